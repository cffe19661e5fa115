"""RV32I + Zmmul instruction decoding, encoding and disassembly.

The multiply-only subset of M (mul/mulh/mulhsu/mulhu) is supported; division,
CSRs, compressed instructions and privileged encodings are rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

MASK32 = 0xFFFFFFFF


class IllegalInstruction(ValueError):
    """Raised for encodings outside RV32I+Zmmul (incl. compressed and CSR)."""


class OutOfRangeImmediate(ValueError):
    """Raised when an immediate does not fit its instruction format."""


class InvalidOperandForFormat(ValueError):
    """Raised for operands a format cannot hold (bad register, odd offset...)."""


def sign_extend(value: int, bits: int) -> int:
    """Sign-extend a bits-wide field to a Python int."""
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def to_signed(value: int) -> int:
    """Reinterpret a 32-bit pattern as a signed integer."""
    value &= MASK32
    return value - 0x100000000 if value & 0x80000000 else value


class Format(enum.Enum):
    R = "R"
    I = "I"
    S = "S"
    B = "B"
    U = "U"
    J = "J"


class Mnemonic(enum.Enum):
    LUI = "lui"
    AUIPC = "auipc"
    JAL = "jal"
    JALR = "jalr"
    BEQ = "beq"
    BNE = "bne"
    BLT = "blt"
    BGE = "bge"
    BLTU = "bltu"
    BGEU = "bgeu"
    LB = "lb"
    LH = "lh"
    LW = "lw"
    LBU = "lbu"
    LHU = "lhu"
    SB = "sb"
    SH = "sh"
    SW = "sw"
    ADDI = "addi"
    SLTI = "slti"
    SLTIU = "sltiu"
    XORI = "xori"
    ORI = "ori"
    ANDI = "andi"
    SLLI = "slli"
    SRLI = "srli"
    SRAI = "srai"
    ADD = "add"
    SUB = "sub"
    SLL = "sll"
    SLT = "slt"
    SLTU = "sltu"
    XOR = "xor"
    SRL = "srl"
    SRA = "sra"
    OR = "or"
    AND = "and"
    FENCE = "fence"
    FENCE_I = "fence.i"
    ECALL = "ecall"
    EBREAK = "ebreak"
    MUL = "mul"
    MULH = "mulh"
    MULHSU = "mulhsu"
    MULHU = "mulhu"


@dataclass(frozen=True)
class Control:
    """Per-instruction control classification derived from the mnemonic."""

    reg_write: bool = False
    mem_read: bool = False
    mem_write: bool = False
    is_branch: bool = False
    is_jump: bool = False
    mul_en: bool = False
    uses_rs1: bool = False
    uses_rs2: bool = False


@dataclass(frozen=True)
class DecodedInstr:
    """One decoded instruction: register indices, immediate, classification."""

    mnemonic: Mnemonic
    rd: int
    rs1: int
    rs2: int
    imm: int  # sign-interpreted
    fmt: Format
    ctrl: Control
    funct3: int
    funct7: int


@dataclass(frozen=True)
class Encoding:
    opcode: int
    fmt: Format
    funct3: int | None = None
    funct7: int | None = None


OP_LUI = 0x37
OP_AUIPC = 0x17
OP_JAL = 0x6F
OP_JALR = 0x67
OP_BRANCH = 0x63
OP_LOAD = 0x03
OP_STORE = 0x23
OP_IMM = 0x13
OP_REG = 0x33
OP_FENCE = 0x0F
OP_SYSTEM = 0x73

ENCODINGS: dict[Mnemonic, Encoding] = {
    Mnemonic.LUI: Encoding(OP_LUI, Format.U),
    Mnemonic.AUIPC: Encoding(OP_AUIPC, Format.U),
    Mnemonic.JAL: Encoding(OP_JAL, Format.J),
    Mnemonic.JALR: Encoding(OP_JALR, Format.I, funct3=0b000),
    Mnemonic.BEQ: Encoding(OP_BRANCH, Format.B, funct3=0b000),
    Mnemonic.BNE: Encoding(OP_BRANCH, Format.B, funct3=0b001),
    Mnemonic.BLT: Encoding(OP_BRANCH, Format.B, funct3=0b100),
    Mnemonic.BGE: Encoding(OP_BRANCH, Format.B, funct3=0b101),
    Mnemonic.BLTU: Encoding(OP_BRANCH, Format.B, funct3=0b110),
    Mnemonic.BGEU: Encoding(OP_BRANCH, Format.B, funct3=0b111),
    Mnemonic.LB: Encoding(OP_LOAD, Format.I, funct3=0b000),
    Mnemonic.LH: Encoding(OP_LOAD, Format.I, funct3=0b001),
    Mnemonic.LW: Encoding(OP_LOAD, Format.I, funct3=0b010),
    Mnemonic.LBU: Encoding(OP_LOAD, Format.I, funct3=0b100),
    Mnemonic.LHU: Encoding(OP_LOAD, Format.I, funct3=0b101),
    Mnemonic.SB: Encoding(OP_STORE, Format.S, funct3=0b000),
    Mnemonic.SH: Encoding(OP_STORE, Format.S, funct3=0b001),
    Mnemonic.SW: Encoding(OP_STORE, Format.S, funct3=0b010),
    Mnemonic.ADDI: Encoding(OP_IMM, Format.I, funct3=0b000),
    Mnemonic.SLTI: Encoding(OP_IMM, Format.I, funct3=0b010),
    Mnemonic.SLTIU: Encoding(OP_IMM, Format.I, funct3=0b011),
    Mnemonic.XORI: Encoding(OP_IMM, Format.I, funct3=0b100),
    Mnemonic.ORI: Encoding(OP_IMM, Format.I, funct3=0b110),
    Mnemonic.ANDI: Encoding(OP_IMM, Format.I, funct3=0b111),
    # Immediate shifts carry a funct7 in imm[11:5].
    Mnemonic.SLLI: Encoding(OP_IMM, Format.I, funct3=0b001, funct7=0b0000000),
    Mnemonic.SRLI: Encoding(OP_IMM, Format.I, funct3=0b101, funct7=0b0000000),
    Mnemonic.SRAI: Encoding(OP_IMM, Format.I, funct3=0b101, funct7=0b0100000),
    Mnemonic.ADD: Encoding(OP_REG, Format.R, funct3=0b000, funct7=0b0000000),
    Mnemonic.SUB: Encoding(OP_REG, Format.R, funct3=0b000, funct7=0b0100000),
    Mnemonic.SLL: Encoding(OP_REG, Format.R, funct3=0b001, funct7=0b0000000),
    Mnemonic.SLT: Encoding(OP_REG, Format.R, funct3=0b010, funct7=0b0000000),
    Mnemonic.SLTU: Encoding(OP_REG, Format.R, funct3=0b011, funct7=0b0000000),
    Mnemonic.XOR: Encoding(OP_REG, Format.R, funct3=0b100, funct7=0b0000000),
    Mnemonic.SRL: Encoding(OP_REG, Format.R, funct3=0b101, funct7=0b0000000),
    Mnemonic.SRA: Encoding(OP_REG, Format.R, funct3=0b101, funct7=0b0100000),
    Mnemonic.OR: Encoding(OP_REG, Format.R, funct3=0b110, funct7=0b0000000),
    Mnemonic.AND: Encoding(OP_REG, Format.R, funct3=0b111, funct7=0b0000000),
    Mnemonic.FENCE: Encoding(OP_FENCE, Format.I, funct3=0b000),
    Mnemonic.FENCE_I: Encoding(OP_FENCE, Format.I, funct3=0b001),
    Mnemonic.ECALL: Encoding(OP_SYSTEM, Format.I, funct3=0b000),
    Mnemonic.EBREAK: Encoding(OP_SYSTEM, Format.I, funct3=0b000),
    Mnemonic.MUL: Encoding(OP_REG, Format.R, funct3=0b000, funct7=0b0000001),
    Mnemonic.MULH: Encoding(OP_REG, Format.R, funct3=0b001, funct7=0b0000001),
    Mnemonic.MULHSU: Encoding(OP_REG, Format.R, funct3=0b010, funct7=0b0000001),
    Mnemonic.MULHU: Encoding(OP_REG, Format.R, funct3=0b011, funct7=0b0000001),
}

_LOADS = {Mnemonic.LB, Mnemonic.LH, Mnemonic.LW, Mnemonic.LBU, Mnemonic.LHU}
_STORES = {Mnemonic.SB, Mnemonic.SH, Mnemonic.SW}
_BRANCHES = {Mnemonic.BEQ, Mnemonic.BNE, Mnemonic.BLT, Mnemonic.BGE,
             Mnemonic.BLTU, Mnemonic.BGEU}
_MULS = {Mnemonic.MUL, Mnemonic.MULH, Mnemonic.MULHSU, Mnemonic.MULHU}
_SHIFTS_IMM = {Mnemonic.SLLI, Mnemonic.SRLI, Mnemonic.SRAI}
_NO_EFFECT = {Mnemonic.FENCE, Mnemonic.FENCE_I, Mnemonic.ECALL, Mnemonic.EBREAK}


def _control_for(mn: Mnemonic, fmt: Format) -> Control:
    if mn in _NO_EFFECT:
        return Control()
    uses_rs1 = fmt in (Format.R, Format.I, Format.S, Format.B)
    uses_rs2 = fmt in (Format.R, Format.S, Format.B)
    return Control(
        reg_write=fmt not in (Format.S, Format.B),
        mem_read=mn in _LOADS,
        mem_write=mn in _STORES,
        is_branch=mn in _BRANCHES,
        is_jump=mn in (Mnemonic.JAL, Mnemonic.JALR),
        mul_en=mn in _MULS,
        uses_rs1=uses_rs1,
        uses_rs2=uses_rs2,
    )


_CONTROL: dict[Mnemonic, Control] = {
    mn: _control_for(mn, enc.fmt) for mn, enc in ENCODINGS.items()
}

# Decode lookup tables, derived from ENCODINGS so the two directions cannot
# drift apart.  R-type and immediate shifts key on (funct3, funct7); other
# I/S/B key on funct3 alone; U/J key on opcode alone.
_BY_F3F7: dict[tuple[int, int, int], Mnemonic] = {}
_BY_F3: dict[tuple[int, int], Mnemonic] = {}
_BY_OP: dict[int, Mnemonic] = {}
for _mn, _enc in ENCODINGS.items():
    if _mn in (Mnemonic.ECALL, Mnemonic.EBREAK):
        continue  # matched on the full instruction word
    if _enc.funct7 is not None:
        _BY_F3F7[(_enc.opcode, _enc.funct3, _enc.funct7)] = _mn
    elif _enc.funct3 is not None:
        _BY_F3[(_enc.opcode, _enc.funct3)] = _mn
    else:
        _BY_OP[_enc.opcode] = _mn


def gen_immediate(word: int, fmt: Format) -> int:
    """Extract and sign-extend the immediate of `word` for format `fmt`.

    B and J immediates have bit 0 forced to zero by construction.
    """
    word &= MASK32
    if fmt == Format.I:
        return sign_extend(word >> 20, 12)
    if fmt == Format.S:
        return sign_extend(((word >> 25) << 5) | ((word >> 7) & 0x1F), 12)
    if fmt == Format.B:
        imm = (((word >> 31) & 0x1) << 12) | (((word >> 7) & 0x1) << 11) \
            | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
        return sign_extend(imm, 13)
    if fmt == Format.U:
        return to_signed(word & 0xFFFFF000)
    if fmt == Format.J:
        imm = (((word >> 31) & 0x1) << 20) | (((word >> 12) & 0xFF) << 12) \
            | (((word >> 20) & 0x1) << 11) | (((word >> 21) & 0x3FF) << 1)
        return sign_extend(imm, 21)
    raise ValueError(f"format {fmt} has no immediate")


@lru_cache(maxsize=8192)
def decode(word: int) -> DecodedInstr:
    """Decode a 32-bit instruction word.

    Raises IllegalInstruction for anything outside RV32I+Zmmul, including
    compressed (low two bits != 11) and CSR/privileged encodings.
    """
    word &= MASK32
    if word & 0b11 != 0b11:
        raise IllegalInstruction(f"compressed or invalid encoding 0x{word:08x}")
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    funct3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    funct7 = (word >> 25) & 0x7F

    mn: Mnemonic | None
    if opcode == OP_SYSTEM:
        if word == 0x00000073:
            mn = Mnemonic.ECALL
        elif word == 0x00100073:
            mn = Mnemonic.EBREAK
        else:
            raise IllegalInstruction(f"unsupported system/CSR encoding 0x{word:08x}")
    else:
        mn = (_BY_F3F7.get((opcode, funct3, funct7))
              or _BY_F3.get((opcode, funct3))
              or _BY_OP.get(opcode))
        if mn is None:
            raise IllegalInstruction(f"unknown encoding 0x{word:08x}")

    enc = ENCODINGS[mn]
    fmt = enc.fmt
    if fmt == Format.R or mn in _SHIFTS_IMM:
        imm = rs2 if mn in _SHIFTS_IMM else 0
    else:
        imm = gen_immediate(word, fmt)
    if fmt in (Format.U, Format.J):
        rs1 = rs2 = 0
    elif fmt == Format.I:
        rs2 = 0
    if fmt in (Format.S, Format.B):
        rd = 0
    return DecodedInstr(mn, rd, rs1, rs2, imm, fmt, _CONTROL[mn], funct3, funct7)


def _check_reg(name: str, idx: int) -> None:
    if not 0 <= idx <= 31:
        raise InvalidOperandForFormat(f"{name}=x{idx} is not a valid register")


def encode(mnemonic: Mnemonic, rd: int = 0, rs1: int = 0, rs2: int = 0,
           imm: int = 0) -> int:
    """Assemble an instruction word; inverse of decode for in-range operands."""
    enc = ENCODINGS[mnemonic]
    fmt = enc.fmt
    op = enc.opcode
    for name, idx in (("rd", rd), ("rs1", rs1), ("rs2", rs2)):
        _check_reg(name, idx)

    if mnemonic == Mnemonic.ECALL:
        return 0x00000073
    if mnemonic == Mnemonic.EBREAK:
        return 0x00100073

    if fmt == Format.R:
        return (enc.funct7 << 25) | (rs2 << 20) | (rs1 << 15) \
            | (enc.funct3 << 12) | (rd << 7) | op
    if mnemonic in _SHIFTS_IMM:
        if not 0 <= imm <= 31:
            raise OutOfRangeImmediate(f"shift amount {imm} not in 0..31")
        return (enc.funct7 << 25) | (imm << 20) | (rs1 << 15) \
            | (enc.funct3 << 12) | (rd << 7) | op
    if fmt == Format.I:
        if not -2048 <= imm <= 2047:
            raise OutOfRangeImmediate(f"I-type immediate {imm} not in -2048..2047")
        return ((imm & 0xFFF) << 20) | (rs1 << 15) | (enc.funct3 << 12) \
            | (rd << 7) | op
    if fmt == Format.S:
        if not -2048 <= imm <= 2047:
            raise OutOfRangeImmediate(f"S-type immediate {imm} not in -2048..2047")
        i = imm & 0xFFF
        return ((i >> 5) << 25) | (rs2 << 20) | (rs1 << 15) \
            | (enc.funct3 << 12) | ((i & 0x1F) << 7) | op
    if fmt == Format.B:
        if imm & 1:
            raise InvalidOperandForFormat(f"branch offset {imm} is odd")
        if not -4096 <= imm <= 4094:
            raise OutOfRangeImmediate(f"B-type offset {imm} not in -4096..4094")
        i = imm & 0x1FFF
        return (((i >> 12) & 0x1) << 31) | (((i >> 5) & 0x3F) << 25) \
            | (rs2 << 20) | (rs1 << 15) | (enc.funct3 << 12) \
            | (((i >> 1) & 0xF) << 8) | (((i >> 11) & 0x1) << 7) | op
    if fmt == Format.U:
        if imm & 0xFFF:
            raise InvalidOperandForFormat(
                f"U-type immediate 0x{imm & MASK32:x} has nonzero low 12 bits")
        if not -(1 << 31) <= imm < (1 << 32):
            raise OutOfRangeImmediate(f"U-type immediate {imm} out of range")
        return (imm & 0xFFFFF000) | (rd << 7) | op
    if fmt == Format.J:
        if imm & 1:
            raise InvalidOperandForFormat(f"jump offset {imm} is odd")
        if not -1048576 <= imm <= 1048574:
            raise OutOfRangeImmediate(f"J-type offset {imm} out of range")
        i = imm & 0x1FFFFF
        return (((i >> 20) & 0x1) << 31) | (((i >> 1) & 0x3FF) << 21) \
            | (((i >> 11) & 0x1) << 20) | (((i >> 12) & 0xFF) << 12) \
            | (rd << 7) | op
    raise AssertionError(f"unhandled format {fmt}")


def disassemble(d: DecodedInstr) -> str:
    """Render a decoded instruction in standard assembly syntax."""
    mn = d.mnemonic
    name = mn.value
    if mn in _NO_EFFECT:
        return name
    if d.fmt == Format.R:
        return f"{name} x{d.rd}, x{d.rs1}, x{d.rs2}"
    if mn in _SHIFTS_IMM:
        return f"{name} x{d.rd}, x{d.rs1}, {d.imm}"
    if mn in _LOADS or mn == Mnemonic.JALR:
        return f"{name} x{d.rd}, {d.imm}(x{d.rs1})"
    if d.fmt == Format.I:
        return f"{name} x{d.rd}, x{d.rs1}, {d.imm}"
    if d.fmt == Format.S:
        return f"{name} x{d.rs2}, {d.imm}(x{d.rs1})"
    if d.fmt == Format.B:
        return f"{name} x{d.rs1}, x{d.rs2}, {d.imm}"
    if d.fmt == Format.U:
        return f"{name} x{d.rd}, 0x{(d.imm >> 12) & 0xFFFFF:x}"
    if d.fmt == Format.J:
        return f"{name} x{d.rd}, {d.imm}"
    raise AssertionError(f"unhandled format {d.fmt}")
