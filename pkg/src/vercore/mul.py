"""Bit-accurate 4-stage Booth-Wallace multiplier model with valid/ready handshake.

The datapath is radix-4 Booth recoding of a 33-bit multiplier (one extension
bit handles all four signedness variants), 17 partial products, a Wallace
tree of 3:2 carry-save compressors (17->12->8->6->4->3->2) and one final
carry-propagate add.  All intermediates live in the 66-bit ring so every
reduction layer preserves the product value mod 2**66.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

MASK32 = 0xFFFFFFFF
MASK33 = (1 << 33) - 1
MASK64 = (1 << 64) - 1
MASK66 = (1 << 66) - 1

DEFAULT_LATENCY = 4


class IssueWhileBusy(RuntimeError):
    """Raised when a request is issued while a previous one is still in flight."""


class MulOp(enum.Enum):
    MUL = "mul"
    MULH = "mulh"
    MULHSU = "mulhsu"
    MULHU = "mulhu"


@dataclass(frozen=True, slots=True)
class MulRequest:
    op: MulOp
    a: int  # rs1 value
    b: int  # rs2 value


@dataclass(frozen=True, slots=True)
class BoothDigits:
    """17 radix-4 digits in {-2,-1,0,+1,+2}; sum(d[i]*4**i) reconstructs the
    signed value of the 33-bit recoded multiplier."""

    digits: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class CsaPair:
    """Carry-save pair; sum + carry mod 2**66 is the represented value."""

    sum: int
    carry: int


# Triplet (b[2i+1], b[2i], b[2i-1]) -> digit, i.e. b[2i-1] + b[2i] - 2*b[2i+1].
_BOOTH_TABLE = (0, 1, 1, 2, -2, -1, -1, 0)


def extend33(value: int, signed: bool) -> int:
    """Zero- or sign-extend a 32-bit operand to a 33-bit pattern."""
    value &= MASK32
    if signed and value & 0x80000000:
        return value | (1 << 32)
    return value


def _signed33(pattern: int) -> int:
    pattern &= MASK33
    return pattern - (1 << 33) if pattern & (1 << 32) else pattern


def booth_encode(multiplier: int) -> BoothDigits:
    """Radix-4 overlapping-triplet recoding of a 33-bit multiplier pattern.

    An implicit 0 sits below bit 0 and the pattern is sign-extended above
    bit 32 so the 17th digit sees a well-defined triplet.
    """
    m = multiplier & MASK33
    m |= ((m >> 32) & 1) << 33  # sign-extend to 34 bits
    m <<= 1                     # implicit zero below bit 0
    t = _BOOTH_TABLE
    return BoothDigits((
        t[m & 7], t[(m >> 2) & 7], t[(m >> 4) & 7], t[(m >> 6) & 7],
        t[(m >> 8) & 7], t[(m >> 10) & 7], t[(m >> 12) & 7], t[(m >> 14) & 7],
        t[(m >> 16) & 7], t[(m >> 18) & 7], t[(m >> 20) & 7],
        t[(m >> 22) & 7], t[(m >> 24) & 7], t[(m >> 26) & 7],
        t[(m >> 28) & 7], t[(m >> 30) & 7], t[(m >> 32) & 7]))


def gen_partial_products(multiplicand: int, digits: BoothDigits) -> list[int]:
    """17 digit-weighted copies of the multiplicand, 66-bit two's complement.

    Their sum mod 2**66 equals the product of the signed 33-bit multiplicand
    and the recoded multiplier.
    """
    mc = _signed33(multiplicand)
    return [((d * mc) << (2 * i)) & MASK66 if d else 0
            for i, d in enumerate(digits.digits)]


def csa(a: int, b: int, c: int) -> CsaPair:
    """3:2 compressor: sum = a^b^c, carry = majority(a,b,c) << 1, mod 2**66."""
    t = a ^ b
    return CsaPair(t ^ c, (((a & b) | (t & c)) << 1) & MASK66)


def wallace_layers(pps):
    """Yield each intermediate addend list of the reduction (17->12->...->2)."""
    vals = list(pps)
    while len(vals) > 2:
        n3 = len(vals) - len(vals) % 3
        nxt = []
        for i in range(0, n3, 3):
            pair = csa(vals[i], vals[i + 1], vals[i + 2])
            nxt.append(pair.sum)
            nxt.append(pair.carry)
        nxt.extend(vals[n3:])
        vals = nxt
        yield vals


def _csa3(a, b, c, m=MASK66):
    t = a ^ b
    return t ^ c, (((a & b) | (t & c)) << 1) & m


def wallace_reduce(pps) -> CsaPair:
    """Compress the partial products to two addends, value-preserving mod 2**66."""
    vals = list(pps)
    if len(vals) == 17:
        # The 17-input tree is a fixed datapath; unrolled with exactly the
        # wallace_layers 3:2 grouping (17->12->8->6->4->3->2).
        p0, p1, p2, p3, p4, p5, p6, p7, p8, p9, p10, p11, p12, p13, p14, \
            p15, p16 = vals
        s1, c1 = _csa3(p0, p1, p2)
        s2, c2 = _csa3(p3, p4, p5)
        s3, c3 = _csa3(p6, p7, p8)
        s4, c4 = _csa3(p9, p10, p11)
        s5, c5 = _csa3(p12, p13, p14)
        t1, d1 = _csa3(s1, c1, s2)
        t2, d2 = _csa3(c2, s3, c3)
        t3, d3 = _csa3(s4, c4, s5)
        t4, d4 = _csa3(c5, p15, p16)
        u1, e1 = _csa3(t1, d1, t2)
        u2, e2 = _csa3(d2, t3, d3)
        v1, f1 = _csa3(u1, e1, u2)
        v2, f2 = _csa3(e2, t4, d4)
        w1, g1 = _csa3(v1, f1, v2)
        x1, h1 = _csa3(w1, g1, f2)
        return CsaPair(x1, h1)
    m = MASK66
    while len(vals) > 2:  # same 3:2 schedule as wallace_layers
        n3 = len(vals) - len(vals) % 3
        nxt = []
        append = nxt.append
        for i in range(0, n3, 3):
            s, c = _csa3(vals[i], vals[i + 1], vals[i + 2])
            append(s)
            append(c)
        nxt.extend(vals[n3:])
        vals = nxt
    if not vals:
        return CsaPair(0, 0)
    if len(vals) == 1:
        return CsaPair(vals[0] & m, 0)
    return CsaPair(vals[0], vals[1])


def mul_result(req: MulRequest) -> int:
    """Full datapath result: 33-bit extension, Booth recode, partial products,
    Wallace reduction, final carry-propagate add; MUL takes bits [31:0] of
    the 64-bit product, the MULH variants bits [63:32]."""
    op = req.op
    a33 = extend33(req.a, op is not MulOp.MULHU)
    b33 = extend33(req.b, op is MulOp.MUL or op is MulOp.MULH)
    pair = wallace_reduce(gen_partial_products(a33, booth_encode(b33)))
    product = (pair.sum + pair.carry) & MASK64
    if op is MulOp.MUL:
        return product & MASK32
    return product >> 32


@dataclass(frozen=True, slots=True)
class MulUnitState:
    """Occupancy state of the multiplier: the issuing tick counts as the first
    pipeline stage, so out_valid rises on the `latency`-th tick after (and
    including) issue and the result is held until the consumer is ready."""

    latency: int = DEFAULT_LATENCY
    busy: bool = False
    stage: int = 0
    pending: Optional[MulRequest] = None
    out_valid: bool = False
    out_ready: bool = False
    result: int = 0

    @staticmethod
    def idle(latency: int = DEFAULT_LATENCY) -> "MulUnitState":
        assert latency >= 1
        return MulUnitState(latency=latency)


def tick(unit: MulUnitState, issue: Optional[MulRequest] = None,
         consumer_ready: bool = False) -> MulUnitState:
    """Advance the unit one clock.

    A completed handshake (out_valid && consumer_ready) clears the unit at
    the start of the tick, so a new request may issue on the same tick the
    previous one retires -- exactly the back-to-back RTL behavior.
    """
    if unit.out_valid and consumer_ready:
        unit = MulUnitState.idle(unit.latency)
    unit = replace(unit, out_ready=consumer_ready)

    if issue is not None:
        if unit.busy or unit.out_valid:
            raise IssueWhileBusy("issue while a multiply is in flight")
        unit = replace(unit, busy=True, stage=1, pending=issue,
                       out_valid=False, result=0)
    elif unit.busy and not unit.out_valid:
        unit = replace(unit, stage=unit.stage + 1)
    else:
        return unit

    if unit.stage >= unit.latency and not unit.out_valid:
        unit = replace(unit, out_valid=True, result=mul_result(unit.pending))
    return unit
