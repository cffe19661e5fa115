"""Waveform trace tooling: VCD emission/parsing, CSV tabulation and the
register-write diff against an expected reg_trace.hex.

The VCD subset covers $timescale, nested $scope/$var declarations,
$enddefinitions, $dumpvars, #time stamps, scalar and b-vector changes with
x/z states.  CSV tables hold one row per distinct timestamp with
sample-and-hold cell values (fixed-width lowercase hex for vectors).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, TextIO

from .pipeline import SIGNAL_SCHEMA

TIME_PER_CYCLE = 10000  # 1ps timescale units per pipeline clock


class MalformedVcd(ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class MissingColumn(ValueError):
    pass


class MalformedTraceLine(ValueError):
    pass


class SinkWriteFailure(OSError):
    pass


@dataclass(frozen=True)
class SignalDecl:
    """One declared signal: short id token, bit width, hierarchical name
    with an optional [msb:lsb] suffix (e.g. vercore_tb.u_vercore.wb_rd[4:0])."""

    id_code: str
    width: int
    name: str


@dataclass(frozen=True)
class ValueChange:
    """A timestamped transition; value is a binary string, possibly x/z."""

    time: int
    id_code: str
    value: str


@dataclass
class CsvTable:
    """'time' plus one column per signal; one row per distinct timestamp."""

    header: list[str]
    rows: list[list[str]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [",".join(self.header)]
        lines.extend(",".join(row) for row in self.rows)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "CsvTable":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise MissingColumn("empty CSV")
        header = lines[0].split(",")
        return CsvTable(header, [ln.split(",") for ln in lines[1:]])


def pipeline_decls() -> list[SignalDecl]:
    """Declarations for the pipeline's per-cycle snapshot schema."""
    return [SignalDecl(_id_code(i), width, name)
            for i, (name, width) in enumerate(SIGNAL_SCHEMA)]


_ID_ALPHABET = [chr(c) for c in range(33, 127)]


def _id_code(index: int) -> str:
    code = ""
    index += 1
    while index > 0:
        index -= 1
        code = _ID_ALPHABET[index % 94] + code
        index //= 94
    return code


_NAME_RE = re.compile(r"^(?P<base>.*?)(?:\[(?P<msb>\d+):(?P<lsb>\d+)\])?$")


def _split_hierarchy(name: str) -> tuple[list[str], str]:
    """Split a dotted name into scope path and var reference ('pc [31:0]')."""
    parts = name.split(".")
    m = _NAME_RE.match(parts[-1])
    base = m.group("base")
    ref = base if m.group("msb") is None else f"{base} [{m.group('msb')}:{m.group('lsb')}]"
    return parts[:-1], ref


def _format_value(value: int, width: int) -> str:
    if width == 1:
        return format(value & 1, "b")
    return format(value & ((1 << width) - 1), f"0{width}b")


def vcd_write(signal_log: Sequence[Mapping[str, int]],
              decls: Sequence[SignalDecl], sink: TextIO,
              time_per_cycle: int = TIME_PER_CYCLE) -> None:
    """Emit per-cycle snapshots as a standard VCD change dump.

    Cycle k maps to timestamp k * time_per_cycle.  Snapshot dicts must carry
    a value for every declared signal name.  Only changed signals are
    re-dumped after the initial $dumpvars block.
    """
    try:
        sink.write("$date\n    vercore trace\n$end\n")
        sink.write("$timescale 1ps $end\n")
        open_scopes: list[str] = []
        for d in decls:
            scopes, ref = _split_hierarchy(d.name)
            while open_scopes and open_scopes != scopes[:len(open_scopes)]:
                sink.write("$upscope $end\n")
                open_scopes.pop()
            for s in scopes[len(open_scopes):]:
                sink.write(f"$scope module {s} $end\n")
                open_scopes.append(s)
            sink.write(f"$var wire {d.width} {d.id_code} {ref} $end\n")
        while open_scopes:
            sink.write("$upscope $end\n")
            open_scopes.pop()
        sink.write("$enddefinitions $end\n")

        last: dict[str, int] = {}
        for cycle, snap in enumerate(signal_log):
            changes = []
            for d in decls:
                v = snap[d.name]
                if cycle == 0 or last[d.name] != v:
                    last[d.name] = v
                    bits = _format_value(v, d.width)
                    changes.append(f"{bits}{d.id_code}" if d.width == 1
                                   else f"b{bits} {d.id_code}")
            if cycle == 0:
                sink.write("#0\n$dumpvars\n")
                sink.write("\n".join(changes))
                sink.write("\n$end\n")
            elif changes:
                sink.write(f"#{cycle * time_per_cycle}\n")
                sink.write("\n".join(changes))
                sink.write("\n")
    except OSError as exc:
        raise SinkWriteFailure(str(exc)) from exc


def vcd_parse(stream: Iterable[str]) -> tuple[list[SignalDecl], list[ValueChange]]:
    """Parse a VCD text stream into declarations and a change sequence.

    Changes appearing before the first #timestamp (e.g. inside $dumpvars)
    are recorded at time 0.  Unknown ids, value widths beyond the declared
    width and decreasing timestamps raise MalformedVcd with a line number.
    """
    decls: list[SignalDecl] = []
    by_id: dict[str, SignalDecl] = {}
    changes: list[ValueChange] = []
    scopes: list[str] = []
    time = 0
    seen_time = False
    in_defs = True

    def parse_change(tok: str, rest: list[str], lineno: int) -> Optional[str]:
        """Returns a leftover token when a vector change consumed its value
        but the id sits in `rest`."""
        if tok[0] in "01xXzZ":
            sid = tok[1:]
            if sid not in by_id:
                raise MalformedVcd(f"change for undeclared id {sid!r}", lineno)
            changes.append(ValueChange(time, sid, tok[0].lower()))
            return None
        if tok[0] in "bB":
            bits = tok[1:].lower()
            if not bits or any(c not in "01xz" for c in bits):
                raise MalformedVcd(f"bad vector value {tok!r}", lineno)
            if not rest:
                raise MalformedVcd(f"vector value {tok!r} missing id", lineno)
            sid = rest.pop(0)
            if sid not in by_id:
                raise MalformedVcd(f"change for undeclared id {sid!r}", lineno)
            if len(bits) > by_id[sid].width:
                raise MalformedVcd(
                    f"value {tok!r} wider than {by_id[sid].width} bits "
                    f"declared for {by_id[sid].name!r}", lineno)
            changes.append(ValueChange(time, sid, bits))
            return None
        if tok[0] in "rR":
            raise MalformedVcd("real-valued signals are not supported", lineno)
        raise MalformedVcd(f"unexpected token {tok!r}", lineno)

    lines = stream.splitlines() if isinstance(stream, str) else stream
    pending_directive: Optional[str] = None
    directive_args: list[str] = []
    for lineno, raw in enumerate(lines, start=1):
        toks = raw.split()
        while toks:
            tok = toks.pop(0)
            if pending_directive is not None:
                if tok == "$end":
                    _finish_directive(pending_directive, directive_args,
                                      scopes, decls, by_id, lineno)
                    pending_directive = None
                    directive_args = []
                else:
                    directive_args.append(tok)
                continue
            if tok.startswith("$"):
                if tok == "$enddefinitions":
                    in_defs = False
                    pending_directive = "$enddefinitions"
                elif tok == "$dumpvars":
                    # contents are ordinary changes at the current time
                    continue
                elif tok == "$end":
                    continue  # closes $dumpvars
                elif tok in ("$scope", "$var", "$upscope", "$timescale",
                             "$date", "$version", "$comment"):
                    if not in_defs and tok in ("$scope", "$var"):
                        raise MalformedVcd(
                            f"{tok} after $enddefinitions", lineno)
                    pending_directive = tok
                else:
                    raise MalformedVcd(f"unknown directive {tok!r}", lineno)
                continue
            if tok.startswith("#"):
                try:
                    t = int(tok[1:])
                except ValueError:
                    raise MalformedVcd(f"bad timestamp {tok!r}", lineno) from None
                if seen_time and t < time:
                    raise MalformedVcd(
                        f"timestamp {t} decreases (previous {time})", lineno)
                time = t
                seen_time = True
                continue
            parse_change(tok, toks, lineno)
    return decls, changes


def _finish_directive(directive: str, args: list[str], scopes: list[str],
                      decls: list[SignalDecl], by_id: dict[str, SignalDecl],
                      lineno: int) -> None:
    if directive == "$scope":
        if len(args) != 2:
            raise MalformedVcd(f"$scope expects type and name, got {args}", lineno)
        scopes.append(args[1])
    elif directive == "$upscope":
        if not scopes:
            raise MalformedVcd("$upscope without open scope", lineno)
        scopes.pop()
    elif directive == "$var":
        if len(args) < 4:
            raise MalformedVcd(f"$var expects 4+ fields, got {args}", lineno)
        _vtype, width_s, sid, base = args[0], args[1], args[2], args[3]
        try:
            width = int(width_s)
        except ValueError:
            raise MalformedVcd(f"bad $var width {width_s!r}", lineno) from None
        if width < 1:
            raise MalformedVcd(f"bad $var width {width}", lineno)
        ref = "".join(args[3:])  # 'pc [31:0]' -> 'pc[31:0]'
        name = ".".join(scopes + [ref]) if scopes else ref
        if sid in by_id:
            raise MalformedVcd(f"duplicate id {sid!r}", lineno)
        decl = SignalDecl(sid, width, name)
        decls.append(decl)
        by_id[sid] = decl
    # $timescale/$date/$version/$comment/$enddefinitions bodies are ignored


def _render_cell(bits: Optional[str], width: int) -> str:
    digits = (width + 3) // 4
    if bits is None:
        return "x" if width == 1 else "x" * digits
    if width == 1:
        return bits[-1]
    if any(c in "xz" for c in bits):
        return "x" * digits
    return format(int(bits, 2), f"0{digits}x")


def vcd_to_csv(decls: Sequence[SignalDecl],
               changes: Sequence[ValueChange]) -> CsvTable:
    """Tabulate a change sequence: one row per distinct timestamp, columns in
    declaration order, values held between changes (hex for vectors)."""
    by_id = {d.id_code: i for i, d in enumerate(decls)}
    current: list[Optional[str]] = [None] * len(decls)
    table = CsvTable(["time"] + [d.name for d in decls])
    idx = 0
    n = len(changes)
    while idx < n:
        t = changes[idx].time
        while idx < n and changes[idx].time == t:
            current[by_id[changes[idx].id_code]] = changes[idx].value
            idx += 1
        table.rows.append([str(t)] + [
            _render_cell(current[i], d.width) for i, d in enumerate(decls)])
    return table


DEFAULT_COLUMNS = {
    "reg_write": "vercore_tb.u_vercore.wb_reg_write",
    "rd": "vercore_tb.u_vercore.wb_rd[4:0]",
    "data": "vercore_tb.u_vercore.wb_data[31:0]",
    "pc": "vercore_tb.u_vercore.u_stage_if.pc[31:0]",
}


@dataclass(frozen=True)
class RegWrite:
    time: int
    rd: int
    value: int
    pc: Optional[int]


@dataclass
class TraceDiff:
    """Outcome of comparing CSV-extracted writes with expected trace lines."""

    writes_compared: int
    mismatch_index: Optional[int] = None
    expected: Optional[tuple[int, int]] = None  # (rd, value)
    actual: Optional[RegWrite] = None
    missing_index: Optional[int] = None

    @property
    def clean(self) -> bool:
        return self.mismatch_index is None and self.missing_index is None

    def lines(self) -> list[str]:
        if self.clean:
            return [f"no mismatch ({self.writes_compared} writes compared)"]
        if self.missing_index is not None:
            rd, value = self.expected
            return [f"missing write {self.missing_index}: "
                    f"expected x{rd} = 0x{value:08x}"]
        rd, value = self.expected
        a = self.actual
        ctx = f"(time={a.time}" + (f", pc=0x{a.pc:04x})" if a.pc is not None
                                   else ")")
        return [f"mismatch at write {self.mismatch_index}:",
                f"  expected: x{rd} = 0x{value:08x}",
                f"  got:      x{a.rd} = 0x{a.value:08x} {ctx}"]


def parse_reg_trace(lines: Iterable[str]) -> list[tuple[int, int]]:
    """reg_trace.hex lines: exactly 10 hex chars, 2 for rd then 8 for value."""
    out = []
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        if len(line) != 10 or any(c not in "0123456789abcdefABCDEF"
                                  for c in line):
            raise MalformedTraceLine(
                f"trace line {i}: {line!r} is not 10 hex characters")
        out.append((int(line[0:2], 16), int(line[2:10], 16)))
    return out


def extract_reg_writes(table: CsvTable,
                       columns: Mapping[str, str] = DEFAULT_COLUMNS) -> list[RegWrite]:
    """Rows where the writeback strobe is 1 and rd != 0, in time order.

    Cells containing x/z never match anything downstream; an x strobe is
    treated as not-a-write here, an x rd/value surfaces as value -1.
    """
    def col(key: str, required: bool) -> Optional[int]:
        name = columns.get(key)
        if name is None or name not in table.header:
            if required:
                raise MissingColumn(f"CSV is missing column {name!r}")
            return None
        return table.header.index(name)

    c_wr = col("reg_write", True)
    c_rd = col("rd", True)
    c_data = col("data", True)
    c_pc = col("pc", False)
    writes = []
    for row in table.rows:
        if row[c_wr] != "1":
            continue
        rd = _hex_or_unknown(row[c_rd])
        value = _hex_or_unknown(row[c_data])
        if rd == 0:
            continue
        pc = _hex_or_unknown(row[c_pc]) if c_pc is not None else None
        writes.append(RegWrite(int(row[0]), rd, value, pc))
    return writes


def _hex_or_unknown(cell: str) -> int:
    # x/z in a compared cell can never equal a known expected value
    try:
        return int(cell, 16)
    except ValueError:
        return -1


def diff_reg_trace(table: CsvTable, expected_lines: Iterable[str],
                   columns: Mapping[str, str] = DEFAULT_COLUMNS) -> TraceDiff:
    """Compare the table's register-write stream against expected lines.

    Reports the first (rd, value) disagreement with its time and pc context,
    or the first expected write with no corresponding row.  Extra actual
    writes beyond the expected list are not an error.
    """
    expected = parse_reg_trace(expected_lines)
    actual = extract_reg_writes(table, columns)
    for i, (erd, evalue) in enumerate(expected):
        if i >= len(actual):
            return TraceDiff(i, missing_index=i, expected=(erd, evalue))
        a = actual[i]
        if a.rd != erd or a.value != evalue:
            return TraceDiff(i, mismatch_index=i, expected=(erd, evalue),
                             actual=a)
    return TraceDiff(len(expected))
