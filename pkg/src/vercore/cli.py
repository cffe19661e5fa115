"""Command-line driver: golden runs, pipeline runs, lockstep co-simulation,
VCD-to-CSV conversion, register-trace diffing and batch benchmarking.

Exit codes are a stable contract: 0 success, 1 verification mismatch or a
missed CPI bound, 2 usage error, 3 input/parse error, 4 simulation error.
`run`/`sim` propagate the guest exit code (a0 at ecall, or the tohost word).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import golden, tracetools
from .cosim import Program, cpi, format_verdict, lockstep
from .elf import ElfFormatError, load_elf
from .golden import HaltCause, HaltKind
from .memory import MalformedHexLine, MemoryImage, load_hex
from .pipeline import CoreState, PipelineConfig, run_core
from .tracetools import (CsvTable, MalformedTraceLine, MalformedVcd,
                         MissingColumn, diff_reg_trace, pipeline_decls,
                         vcd_parse, vcd_to_csv, vcd_write)

EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SIM = 4


@dataclass
class RunConfig:
    """Knobs shared by the simulation subcommands."""

    reset_pc: int = 0x2000
    max_steps: int = 1_000_000
    max_cycles: int = 2_000_000
    mul_latency: int = 4
    tohost: Optional[int] = None
    vcd_out: Optional[str] = None
    strict_pc_compare: bool = False
    compare_loads: bool = True
    cpi_bound: Optional[float] = None
    inject: Optional[str] = None

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_cycles <= 0:
            raise ValueError("step/cycle caps must be positive")
        if self.mul_latency < 1:
            raise ValueError("mul latency must be >= 1")

    def pipeline_config(self, entry: int) -> PipelineConfig:
        return PipelineConfig(
            reset_pc=entry, mul_latency=self.mul_latency,
            inject_no_flush=self.inject == "no-flush",
            inject_no_store_fwd=self.inject == "no-store-fwd")


def _parse_int(text: str) -> int:
    return int(text, 0)


def load_program(path: str, fmt: str = "auto", base: Optional[int] = None,
                 reset_pc: Optional[int] = None,
                 tohost: Optional[int] = None) -> Program:
    """Load an ELF32/hex/bin file into a Program (image + entry point)."""
    p = Path(path)
    data = p.read_bytes()
    if fmt == "auto":
        if data[:4] == b"\x7fELF":
            fmt = "elf"
        elif p.suffix == ".bin":
            fmt = "bin"
        else:
            fmt = "hex"
    if fmt == "elf":
        image, summary = load_elf(data, tohost_addr=tohost)
        entry = reset_pc if reset_pc is not None else summary.entry
        return Program(image, entry, p.name)
    entry = reset_pc if reset_pc is not None else 0x2000
    origin = base if base is not None else entry
    if fmt == "bin":
        image = MemoryImage(tohost)
        image.load_bytes(origin, data)
    else:
        image = load_hex(data.decode("ascii"), base=origin, tohost_addr=tohost)
    return Program(image, entry, p.name)


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        reset_pc=args.reset_pc if args.reset_pc is not None else 0x2000,
        max_steps=getattr(args, "max_steps", 1_000_000),
        max_cycles=getattr(args, "max_cycles", 2_000_000),
        mul_latency=getattr(args, "mul_latency", 4),
        tohost=args.tohost,
        vcd_out=getattr(args, "vcd", None),
        strict_pc_compare=getattr(args, "strict_pc", False),
        compare_loads=not getattr(args, "ignore_load_txns", False),
        cpi_bound=getattr(args, "cpi_bound", None),
        inject=getattr(args, "inject", None))


def _load_from_args(args) -> Program:
    return load_program(args.program, fmt=args.fmt, base=args.base,
                        reset_pc=args.reset_pc, tohost=args.tohost)


def _halt_exit(halt: HaltCause) -> int:
    if halt.kind in (HaltKind.ECALL, HaltKind.TOHOST):
        return halt.code & 0xFF
    if halt.kind is HaltKind.EBREAK:
        return 0
    print(f"simulation did not terminate cleanly: {halt.kind.value} "
          f"{halt.message}".rstrip(), file=sys.stderr)
    return EXIT_SIM


def _write_trace_files(args, trace, reg_lines) -> None:
    if args.trace:
        Path(args.trace).write_text(
            "\n".join(golden.export_commit_trace(trace)) + "\n")
    if args.reg_trace:
        Path(args.reg_trace).write_text("\n".join(reg_lines) + "\n")


def cmd_run(args) -> int:
    program = _load_from_args(args)
    state = golden.ArchState(pc=program.entry, mem=program.image)
    trace, halt = golden.run(state, args.max_steps)
    _write_trace_files(args, trace, golden.export_reg_trace(trace))
    print(f"retired {len(trace)} instructions, halt: {halt.kind.value}")
    return _halt_exit(halt)


def cmd_sim(args) -> int:
    program = _load_from_args(args)
    config = _config_from_args(args)
    core = CoreState.reset(config.pipeline_config(program.entry))
    result = run_core(core, program.image, args.max_cycles,
                      record_signals=args.vcd is not None)
    _write_trace_files(args, result.commits,
                       golden.export_reg_trace(result.commits))
    if args.vcd is not None:
        with open(args.vcd, "w") as sink:
            vcd_write(result.signals, pipeline_decls(), sink)
    if result.commits:
        report = cpi(len(result.commits), result.cycles, result.pc_trace)
        print(f"CPI: cycles={report.cycles} retired={report.retired} "
              f"cpi={report.cpi:.4f}")
    return _halt_exit(result.halt)


def cmd_cosim(args) -> int:
    program = _load_from_args(args)
    config = _config_from_args(args)
    pipe_cfg = config.pipeline_config(program.entry)
    verdict = lockstep(program, args.max_cycles, pipe_cfg,
                       strict_pc=config.strict_pc_compare,
                       compare_loads=config.compare_loads,
                       max_steps=args.max_steps)
    print(format_verdict(verdict))
    if args.vcd is not None:
        rerun = run_core(CoreState.reset(pipe_cfg), program.image.clone(),
                         args.max_cycles, record_signals=True)
        with open(args.vcd, "w") as sink:
            vcd_write(rerun.signals, pipeline_decls(), sink)
    if not verdict.passed:
        return EXIT_SIM if (verdict.mismatch is None and verdict.note)  \
            else EXIT_MISMATCH
    if args.cpi_bound is not None:
        if verdict.cpi_report is None or verdict.cpi_report.cpi > args.cpi_bound:
            print(f"CPI-BOUND: FAIL bound={args.cpi_bound}")
            return EXIT_MISMATCH
        print(f"CPI-BOUND: PASS bound={args.cpi_bound}")
    return 0


def cmd_vcd2csv(args) -> int:
    text = Path(args.vcd).read_text()
    decls, changes = vcd_parse(text)
    table = vcd_to_csv(decls, changes)
    Path(args.csv).write_text(table.to_text())
    print(f"{len(table.rows)} rows, {len(decls)} signals")
    return 0


def cmd_diff_trace(args) -> int:
    table = CsvTable.from_text(Path(args.csv).read_text())
    columns = dict(tracetools.DEFAULT_COLUMNS)
    for key, arg in (("reg_write", args.col_reg_write), ("rd", args.col_rd),
                     ("data", args.col_data), ("pc", args.col_pc)):
        if arg is not None:
            columns[key] = arg
    expected = Path(args.reg_trace).read_text().splitlines()
    diff = diff_reg_trace(table, expected, columns)
    for line in diff.lines():
        print(line)
    return 0 if diff.clean else EXIT_MISMATCH


def _bench_one(payload) -> tuple[str, int, int, float, bool]:
    path, fmt, base, reset_pc, tohost, max_cycles, max_steps, mul_latency = payload
    program = load_program(path, fmt=fmt, base=base, reset_pc=reset_pc,
                           tohost=tohost)
    verdict = lockstep(program, max_cycles,
                       PipelineConfig(reset_pc=program.entry,
                                      mul_latency=mul_latency),
                       max_steps=max_steps)
    cpi_value = verdict.cpi_report.cpi if verdict.cpi_report else float("nan")
    return (program.name, verdict.retired, verdict.cycles, cpi_value,
            verdict.passed)


def cmd_bench(args) -> int:
    payloads = [(p, args.fmt, args.base, args.reset_pc, args.tohost,
                 args.max_cycles, args.max_steps, args.mul_latency)
                for p in args.programs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, payloads))
    else:
        rows = [_bench_one(p) for p in payloads]

    ok = True
    width = max(len(r[0]) for r in rows)
    print(f"{'program':<{width}}  {'retired':>9}  {'cycles':>9}  "
          f"{'cpi':>7}  result")
    for name, retired, cycles, cpi_value, passed in rows:
        bound_ok = args.cpi_bound is None or cpi_value <= args.cpi_bound
        ok = ok and passed and bound_ok
        verdict = "pass" if passed and bound_ok else "FAIL"
        print(f"{name:<{width}}  {retired:>9}  {cycles:>9}  "
              f"{cpi_value:>7.4f}  {verdict}")
        if args.machine:
            print(f"BENCH: name={name} retired={retired} cycles={cycles} "
                  f"cpi={cpi_value:.4f} result={verdict}")
    return 0 if ok else EXIT_MISMATCH


def _add_common(sub, cycles: bool) -> None:
    sub.add_argument("program", help="ELF32, readmemh hex, or raw binary")
    sub.add_argument("--fmt", choices=("auto", "elf", "hex", "bin"),
                     default="auto")
    sub.add_argument("--base", type=_parse_int, default=None,
                     help="load address for hex/bin (default: reset pc)")
    sub.add_argument("--reset-pc", type=_parse_int, default=None,
                     help="start pc (default: ELF entry, else 0x2000)")
    sub.add_argument("--tohost", type=_parse_int, default=None,
                     help="halt-on-store address (default: ELF symbol)")
    sub.add_argument("--max-steps", type=_parse_int, default=1_000_000)
    if cycles:
        sub.add_argument("--max-cycles", type=_parse_int, default=2_000_000)
        sub.add_argument("--mul-latency", type=_parse_int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vercore",
        description="RV32I+Zmmul pipeline model, golden simulator and "
                    "co-simulation harness")
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="execute on the golden model only")
    _add_common(run, cycles=False)
    run.add_argument("--trace", help="write commit trace text file")
    run.add_argument("--reg-trace", help="write reg_trace.hex file")
    run.set_defaults(fn=cmd_run)

    sim = subs.add_parser("sim", help="execute on the pipeline model only")
    _add_common(sim, cycles=True)
    sim.add_argument("--trace", help="write commit trace text file")
    sim.add_argument("--reg-trace", help="write reg_trace.hex file")
    sim.add_argument("--vcd", help="write per-cycle signals as VCD")
    sim.set_defaults(fn=cmd_sim)

    co = subs.add_parser("cosim", help="lockstep pipeline vs golden model")
    _add_common(co, cycles=True)
    co.add_argument("--cpi-bound", type=float, default=None,
                    help="fail unless measured CPI <= bound")
    co.add_argument("--strict-pc", action="store_true",
                    help="also compare commit pc values")
    co.add_argument("--ignore-load-txns", action="store_true",
                    help="compare stores only, not load transactions")
    co.add_argument("--vcd", help="write pipeline signals as VCD")
    co.add_argument("--inject", choices=("no-flush", "no-store-fwd"),
                    help="fault injection for harness validation")
    co.set_defaults(fn=cmd_cosim)

    v2c = subs.add_parser("vcd2csv", help="tabulate a VCD into CSV")
    v2c.add_argument("vcd")
    v2c.add_argument("csv")
    v2c.set_defaults(fn=cmd_vcd2csv)

    dt = subs.add_parser("diff-trace",
                         help="compare CSV register writes with reg_trace.hex")
    dt.add_argument("csv")
    dt.add_argument("reg_trace")
    dt.add_argument("--col-reg-write", default=None)
    dt.add_argument("--col-rd", default=None)
    dt.add_argument("--col-data", default=None)
    dt.add_argument("--col-pc", default=None)
    dt.set_defaults(fn=cmd_diff_trace)

    bench = subs.add_parser("bench",
                            help="cosim + CPI table over a program list")
    bench.add_argument("programs", nargs="+")
    bench.add_argument("--fmt", choices=("auto", "elf", "hex", "bin"),
                       default="auto")
    bench.add_argument("--base", type=_parse_int, default=None)
    bench.add_argument("--reset-pc", type=_parse_int, default=None)
    bench.add_argument("--tohost", type=_parse_int, default=None)
    bench.add_argument("--max-steps", type=_parse_int, default=1_000_000)
    bench.add_argument("--max-cycles", type=_parse_int, default=2_000_000)
    bench.add_argument("--mul-latency", type=_parse_int, default=4)
    bench.add_argument("--cpi-bound", type=float, default=None)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--machine", action="store_true",
                       help="also print one BENCH: line per program")
    bench.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ElfFormatError, MalformedHexLine, MalformedVcd, MissingColumn,
            MalformedTraceLine, UnicodeDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
