"""Lockstep verification of the pipeline against the golden model, plus CPI.

Both simulators run the same program on independent memory copies; their
commit traces are compared in retirement order.  Register writes compare on
(rd, value) -- pc only in strict mode -- and memory transactions on
(kind, addr, data, width).  The first divergence is reported with commit
context and the pipeline's signal activity near the failing cycle.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from . import golden
from .golden import CommitRecord, HaltCause, HaltKind
from .isa import decode, disassemble
from .memory import MemoryImage
from .pipeline import CoreState, PipelineConfig, RunResult, run_core


class ZeroRetired(ValueError):
    """CPI is undefined when no instruction retired."""


@dataclass(frozen=True)
class Program:
    """A loaded program: memory image plus entry point."""

    image: MemoryImage
    entry: int
    name: str = "program"


@dataclass(frozen=True)
class Mismatch:
    index: int  # commit ordinal
    expected: Optional[CommitRecord]
    actual: Optional[CommitRecord]
    cycle: int = 0
    pc: int = 0
    kind: str = "reg"  # reg | mem | missing | extra | halt
    detail: str = ""


@dataclass(frozen=True)
class CpiReport:
    cycles: int
    retired: int
    cpi: float
    per_pc: dict[int, int] = field(default_factory=dict)


def cpi(retired: int, cycles: int, pc_per_cycle=()) -> CpiReport:
    """Cycles per retired instruction, with per-pc cycle attribution.

    Every cycle is attributed to the pc occupying IF that cycle, so stall
    cycles land on the stalled pc and pipeline-fill cycles on the earliest
    pcs; the attribution sums to the total cycle count.
    """
    if retired <= 0:
        raise ZeroRetired("no retired instructions")
    return CpiReport(cycles, retired, cycles / retired,
                     dict(Counter(pc_per_cycle)))


def _txn_mismatch(e: CommitRecord, a: CommitRecord,
                  compare_loads: bool) -> Optional[str]:
    et, at_ = e.mem, a.mem
    if not compare_loads:
        et = None if (et is not None and et.kind == "load") else et
        at_ = None if (at_ is not None and at_.kind == "load") else at_
    if (et is None) != (at_ is None):
        return "memory transaction presence"
    if et is not None and (et.kind, et.addr, et.data, et.width) != \
            (at_.kind, at_.addr, at_.data, at_.width):
        return "memory transaction fields"
    return None


def compare_traces(expected: list[CommitRecord], actual: list[CommitRecord],
                   strict_pc: bool = False, compare_loads: bool = True,
                   actual_cycles: Optional[list[int]] = None) -> Optional[Mismatch]:
    """First divergence between two commit traces, or None if equivalent.

    A shorter actual trace reports a missing write at the first absent
    index; the scan never looks past the first differing element.
    """
    n = max(len(expected), len(actual))
    for i in range(n):
        if i >= len(actual):
            return Mismatch(i, expected[i], None, pc=expected[i].pc,
                            kind="missing", detail="missing commit")
        if i >= len(expected):
            a = actual[i]
            return Mismatch(i, None, a, pc=a.pc, kind="extra",
                            cycle=actual_cycles[i] if actual_cycles else 0,
                            detail="extra commit past expected trace")
        e, a = expected[i], actual[i]
        cyc = actual_cycles[i] if actual_cycles else 0
        if strict_pc and e.pc != a.pc:
            return Mismatch(i, e, a, cyc, e.pc, "reg", "pc")
        if (e.reg_write, e.rd if e.reg_write else 0,
                e.wb_value if e.reg_write else 0) != \
                (a.reg_write, a.rd if a.reg_write else 0,
                 a.wb_value if a.reg_write else 0):
            return Mismatch(i, e, a, cyc, e.pc, "reg", "register write")
        txn_diff = _txn_mismatch(e, a, compare_loads)
        if txn_diff is not None:
            return Mismatch(i, e, a, cyc, e.pc, "mem", txn_diff)
    return None


@dataclass
class MismatchContext:
    expected_window: list[CommitRecord]
    actual_window: list[CommitRecord]
    signals: list[dict]


@dataclass
class Verdict:
    passed: bool
    program: str
    golden_halt: HaltCause
    core_halt: HaltCause
    retired: int
    cycles: int
    cpi_report: Optional[CpiReport] = None
    mismatch: Optional[Mismatch] = None
    context: Optional[MismatchContext] = None
    note: str = ""


CONTEXT_COMMITS = 5
CONTEXT_CYCLES = 8


def _halts_agree(g: HaltCause, p: HaltCause) -> bool:
    capped = {HaltKind.MAX_STEPS, HaltKind.MAX_CYCLES}
    if g.kind in capped and p.kind in capped:
        return True
    return g.kind == p.kind and g.code == p.code


def lockstep(program: Program, max_cycles: int,
             pipe_config: Optional[PipelineConfig] = None,
             strict_pc: bool = False, compare_loads: bool = True,
             max_steps: Optional[int] = None) -> Verdict:
    """Run golden and pipeline on separate copies of the program memory and
    compare their commit traces; error halts on either side are failures."""
    pipe_config = pipe_config or PipelineConfig(reset_pc=program.entry)
    gstate = golden.ArchState(pc=program.entry, mem=program.image.clone())
    gtrace, ghalt = golden.run(gstate, max_steps or max_cycles)

    core = CoreState.reset(pipe_config)
    pmem = program.image.clone()
    result = run_core(core, pmem, max_cycles)

    retired = len(result.commits)
    report = cpi(retired, result.cycles, result.pc_trace) if retired else None

    mismatch = compare_traces(gtrace, result.commits, strict_pc=strict_pc,
                              compare_loads=compare_loads,
                              actual_cycles=result.commit_cycles)
    note = ""
    passed = mismatch is None
    if passed and (ghalt.kind is HaltKind.ERROR or result.halt.kind is HaltKind.ERROR):
        passed = False
        note = (f"simulation error: golden={ghalt.kind.value} "
                f"{ghalt.message} / pipeline={result.halt.kind.value} "
                f"{result.halt.message}")
    elif passed and not _halts_agree(ghalt, result.halt):
        passed = False
        note = (f"halt mismatch: golden={ghalt.kind.value}({ghalt.code}) "
                f"pipeline={result.halt.kind.value}({result.halt.code})")

    context = None
    if mismatch is not None:
        context = _gather_context(program, pipe_config, max_cycles, gtrace,
                                  result, mismatch)
    return Verdict(passed, program.name, ghalt, result.halt, retired,
                   result.cycles, report, mismatch, context, note)


def _gather_context(program: Program, pipe_config: PipelineConfig,
                    max_cycles: int, gtrace: list[CommitRecord],
                    result: RunResult, mm: Mismatch) -> MismatchContext:
    lo = max(0, mm.index - CONTEXT_COMMITS)
    hi = mm.index + CONTEXT_COMMITS + 1
    # Deterministic rerun with signal recording to capture waveform context
    # around the failing cycle.
    rerun = run_core(CoreState.reset(pipe_config), program.image.clone(),
                     min(max_cycles, mm.cycle + CONTEXT_CYCLES + 1),
                     record_signals=True)
    sig_lo = max(0, mm.cycle - CONTEXT_CYCLES)
    signals = (rerun.signals or [])[sig_lo:mm.cycle + CONTEXT_CYCLES + 1]
    return MismatchContext(gtrace[lo:hi], result.commits[lo:hi], signals)


def _describe(c: Optional[CommitRecord]) -> str:
    if c is None:
        return "<none>"
    parts = [f"pc=0x{c.pc:08x}"]
    try:
        parts.append(f"[{disassemble(decode(c.instr))}]")
    except Exception:
        parts.append(f"[instr=0x{c.instr:08x}]")
    if c.reg_write:
        parts.append(f"x{c.rd}=0x{c.wb_value:08x}")
    if c.mem is not None:
        tag = "S" if c.mem.kind == "store" else "L"
        parts.append(f"{tag} addr=0x{c.mem.addr:08x} data=0x{c.mem.data:08x} "
                     f"w={c.mem.width}")
    if not c.reg_write and c.mem is None:
        parts.append("(no effects)")
    return " ".join(parts)


def format_verdict(v: Verdict, show_context: bool = True) -> str:
    """Machine-parseable report: RESULT:/MISMATCH:/CPI: prefixed lines."""
    lines = [f"RESULT: {'PASS' if v.passed else 'FAIL'} {v.program}"]
    if v.note:
        lines.append(f"RESULT-NOTE: {v.note}")
    mm = v.mismatch
    if mm is not None:
        exp = f"x{mm.expected.rd}=0x{mm.expected.wb_value:08x}" \
            if mm.expected is not None and mm.expected.reg_write else _describe(mm.expected)
        got = f"x{mm.actual.rd}=0x{mm.actual.wb_value:08x}" \
            if mm.actual is not None and mm.actual.reg_write else _describe(mm.actual)
        lines.append(f"MISMATCH: index={mm.index} kind={mm.kind} "
                     f"pc=0x{mm.pc:08x} cycle={mm.cycle} "
                     f"expected {exp} got {got}")
        if show_context and v.context is not None:
            lines.append("MISMATCH-CONTEXT: expected commits:")
            lines.extend(f"  E{i}: {_describe(c)}" for i, c in
                         enumerate(v.context.expected_window))
            lines.append("MISMATCH-CONTEXT: actual commits:")
            lines.extend(f"  A{i}: {_describe(c)}" for i, c in
                         enumerate(v.context.actual_window))
    if v.cpi_report is not None:
        r = v.cpi_report
        lines.append(f"CPI: cycles={r.cycles} retired={r.retired} "
                     f"cpi={r.cpi:.4f}")
    return "\n".join(lines)
