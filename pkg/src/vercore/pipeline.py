"""Cycle-accurate model of the 5-stage in-order RV32I+Zmmul pipeline.

Stages are evaluated combinationally each cycle in a fixed dependency order
(EX ALU -> MEM load extract -> ID forwarding/branch resolution -> hazard ->
latch), then every pipeline register is latched at the cycle boundary.
Branches and jumps resolve in ID with a 1-cycle taken penalty (IF/ID flush);
the register file has flip-flop write timing (a WB write is readable the
next cycle, with an explicit same-cycle WB->ID bypass); a pending multiply
holds the whole pipeline via a global stall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import mul as mulunit
from .golden import CommitRecord, HaltCause, HaltKind, MemTxn, branch_taken
from .isa import (DecodedInstr, Format, IllegalInstruction, MASK32, Mnemonic,
                  decode, to_signed)
from .memory import MemoryImage, MisalignedAccess
from .mul import MulOp, MulRequest, MulUnitState

DEFAULT_RESET_PC = 0x2000


@dataclass(frozen=True)
class PipelineConfig:
    reset_pc: int = DEFAULT_RESET_PC
    mul_latency: int = mulunit.DEFAULT_LATENCY
    # Test-only fault injections used to prove the verification harness
    # actually catches broken designs.
    inject_no_flush: bool = False
    inject_no_store_fwd: bool = False


class AluOp:
    ADD = 0
    SUB = 1
    SLL = 2
    SLT = 3
    SLTU = 4
    XOR = 5
    SRL = 6
    SRA = 7
    OR = 8
    AND = 9


class WbSel:
    ALU = 0
    PC4 = 1


@dataclass(frozen=True)
class ExCtrl:
    reg_write: bool = False
    mem_read: bool = False
    mem_write: bool = False
    mem_to_reg: bool = False
    alu_op: int = AluOp.ADD
    alu_src_imm: bool = False
    use_pc: bool = False
    wb_sel: int = WbSel.ALU
    mul_en: bool = False
    mul_op: Optional[MulOp] = None


@dataclass(frozen=True)
class MemCtrl:
    reg_write: bool = False
    mem_read: bool = False
    mem_write: bool = False
    mem_to_reg: bool = False
    wb_sel: int = WbSel.ALU


_NOP_EX = ExCtrl()
_NOP_MEM = MemCtrl()

_ALU_OP = {
    Mnemonic.ADD: AluOp.ADD, Mnemonic.ADDI: AluOp.ADD,
    Mnemonic.SUB: AluOp.SUB,
    Mnemonic.SLL: AluOp.SLL, Mnemonic.SLLI: AluOp.SLL,
    Mnemonic.SLT: AluOp.SLT, Mnemonic.SLTI: AluOp.SLT,
    Mnemonic.SLTU: AluOp.SLTU, Mnemonic.SLTIU: AluOp.SLTU,
    Mnemonic.XOR: AluOp.XOR, Mnemonic.XORI: AluOp.XOR,
    Mnemonic.SRL: AluOp.SRL, Mnemonic.SRLI: AluOp.SRL,
    Mnemonic.SRA: AluOp.SRA, Mnemonic.SRAI: AluOp.SRA,
    Mnemonic.OR: AluOp.OR, Mnemonic.ORI: AluOp.OR,
    Mnemonic.AND: AluOp.AND, Mnemonic.ANDI: AluOp.AND,
}

_MUL_OP = {
    Mnemonic.MUL: MulOp.MUL, Mnemonic.MULH: MulOp.MULH,
    Mnemonic.MULHSU: MulOp.MULHSU, Mnemonic.MULHU: MulOp.MULHU,
}


def gen_ex_ctrl(d: DecodedInstr) -> ExCtrl:
    """Control signals latched into ID/EX.  Branches, fences and the halt
    instructions carry no effect flags (they retire but do nothing)."""
    mn = d.mnemonic
    if mn in _ALU_OP:
        return ExCtrl(reg_write=True, alu_op=_ALU_OP[mn],
                      alu_src_imm=d.fmt is Format.I)
    if mn is Mnemonic.LUI:
        # rs1 is forced to x0 by decode, so ADD(x0, imm) produces imm.
        return ExCtrl(reg_write=True, alu_src_imm=True)
    if mn is Mnemonic.AUIPC:
        return ExCtrl(reg_write=True, alu_src_imm=True, use_pc=True)
    if d.ctrl.is_jump:
        return ExCtrl(reg_write=True, wb_sel=WbSel.PC4)
    if d.ctrl.mem_read:
        return ExCtrl(reg_write=True, mem_read=True, mem_to_reg=True,
                      alu_src_imm=True)
    if d.ctrl.mem_write:
        return ExCtrl(mem_write=True, alu_src_imm=True)
    if d.ctrl.mul_en:
        return ExCtrl(reg_write=True, mul_en=True, mul_op=_MUL_OP[mn])
    return _NOP_EX  # branches, fence, ecall, ebreak


@dataclass
class IfIdReg:
    valid: bool = False
    pc: int = 0
    instr: int = 0
    pc_plus4: int = 0


@dataclass
class IdExReg:
    valid: bool = False
    pc: int = 0
    pc_plus4: int = 0
    rs1_val: int = 0
    rs2_val: int = 0
    imm: int = 0
    rs1: int = 0
    rs2: int = 0
    rd: int = 0
    funct3: int = 0
    funct7: int = 0
    ctrl: ExCtrl = _NOP_EX
    instr: int = 0
    retire: bool = False  # real instruction (commits at WB); False for bubbles
    halt: Optional[HaltKind] = None


@dataclass
class ExMemReg:
    valid: bool = False
    alu_result: int = 0
    store_data: int = 0
    pc_plus4: int = 0
    rd: int = 0
    funct3: int = 0
    ctrl: MemCtrl = _NOP_MEM
    pc: int = 0
    instr: int = 0
    retire: bool = False
    halt: Optional[HaltKind] = None
    # Memory access bookkeeping: the dcache is touched exactly once per
    # operation even when a global stall parks the instruction in MEM.
    mem_issued: bool = False
    mem_data: int = 0
    mem_txn: Optional[MemTxn] = None
    tohost: Optional[int] = None


@dataclass
class MemWbReg:
    valid: bool = False
    wb_data: int = 0
    rd: int = 0
    reg_write: bool = False  # gated by rd != 0 at latch time
    pc: int = 0
    instr: int = 0
    retire: bool = False
    halt: Optional[HaltKind] = None
    mem_txn: Optional[MemTxn] = None
    tohost: Optional[int] = None
    committed: bool = False


@dataclass(frozen=True)
class CacheBus:
    """Per-cycle cache interface activity (always-hit, same-cycle data)."""

    ic_va: int = 0
    ic_valid: bool = False
    ic_d_in: int = 0
    dc_va: int = 0
    dc_valid: bool = False
    dc_byte_en: int = 0
    dc_d_out: int = 0
    dc_d_in: int = 0


@dataclass(frozen=True)
class HazardDecision:
    stall_pc: bool = False
    stall_ifid: bool = False
    flush_ifid: bool = False
    bubble_idex: bool = False
    global_stall: bool = False


class FwdSource(NamedTuple):
    """A stage's forwardable result: does it write, which rd, what value."""

    writes: bool
    rd: int
    value: int


@dataclass
class CoreState:
    """Full sequential state of the pipeline."""

    config: PipelineConfig = field(default_factory=PipelineConfig)
    pc_f: int = DEFAULT_RESET_PC
    ifid: IfIdReg = field(default_factory=IfIdReg)
    idex: IdExReg = field(default_factory=IdExReg)
    exmem: ExMemReg = field(default_factory=ExMemReg)
    memwb: MemWbReg = field(default_factory=MemWbReg)
    regfile: list[int] = field(default_factory=lambda: [0] * 32)
    mul: MulUnitState = field(default_factory=MulUnitState.idle)
    mul_fire: bool = False  # consumer_ready for the unit's next tick
    halt_fetch: bool = False  # ecall/ebreak in flight: stop fetching
    cycle: int = 0
    reset_n: bool = True
    uninit_fetches: int = 0

    @staticmethod
    def reset(config: PipelineConfig = PipelineConfig()) -> "CoreState":
        assert config.reset_pc % 4 == 0
        return CoreState(config=config, pc_f=config.reset_pc,
                         mul=MulUnitState.idle(config.mul_latency))


@dataclass(frozen=True)
class CycleEvents:
    commit: Optional[CommitRecord]
    bus: CacheBus
    hazard: HazardDecision
    halt: Optional[HaltCause]
    branch_taken: bool
    branch_target: int
    snapshot: dict


def next_pc(cur: CoreState, branch_taken: bool, target: int, stall: bool) -> int:
    """PC update priority: reset -> branch/jump target -> stall hold -> pc+4."""
    if not cur.reset_n:
        return cur.config.reset_pc
    if branch_taken:
        return target & MASK32
    if stall:
        return cur.pc_f
    return (cur.pc_f + 4) & MASK32


def forward_ex(rs: int, rs_val: int, exmem: ExMemReg, memwb: MemWbReg) -> int:
    """EX operand forwarding, priority EX/MEM -> MEM/WB; x0 never forwards."""
    if rs == 0:
        return rs_val
    if exmem.valid and exmem.ctrl.reg_write and exmem.rd == rs:
        return exmem.alu_result
    if memwb.valid and memwb.reg_write and memwb.rd == rs:
        return memwb.wb_data
    return rs_val


def forward_id(rs: int, regfile_val: int, ex_fwd: FwdSource,
               mem_fwd: FwdSource, wb: MemWbReg) -> int:
    """ID branch/jalr operand forwarding, priority EX > MEM > WB > regfile.

    The MEM source must carry load data when the MEM instruction is a load
    (it is computed combinationally there this same cycle).
    """
    if rs == 0:
        return regfile_val
    if ex_fwd.writes and ex_fwd.rd == rs:
        return ex_fwd.value
    if mem_fwd.writes and mem_fwd.rd == rs:
        return mem_fwd.value
    if wb.valid and wb.reg_write and wb.rd == rs:
        return wb.wb_data
    return regfile_val


def hazard_detect(id_instr: Optional[DecodedInstr], idex: IdExReg,
                  mul: MulUnitState, branch_in_id: bool) -> HazardDecision:
    """Stall/flush policy for one cycle.

    A pending multiply in EX freezes everything (global stall).  A load in
    EX whose rd feeds the ID instruction stalls IF/ID+PC one cycle and
    bubbles ID/EX; the same rule covers branch/jalr sources.  A taken
    branch/jump in ID flushes IF/ID.
    """
    if idex.valid and idex.ctrl.mul_en and not mul.out_valid:
        return HazardDecision(stall_pc=True, stall_ifid=True, global_stall=True)
    if (id_instr is not None and idex.valid and idex.ctrl.mem_read
            and idex.rd != 0
            and ((id_instr.ctrl.uses_rs1 and id_instr.rs1 == idex.rd)
                 or (id_instr.ctrl.uses_rs2 and id_instr.rs2 == idex.rd))):
        return HazardDecision(stall_pc=True, stall_ifid=True, bubble_idex=True)
    if branch_in_id:
        return HazardDecision(flush_ifid=True)
    return HazardDecision()


def store_align(funct3: int, addr: int, rs2_val: int) -> tuple[int, int]:
    """Byte enables and shifted store data for the 32-bit dcache lane:
    SB: byte_en = 1 << addr[1:0];  SH: addr[1] ? 1100 : 0011;  SW: 1111;
    data is rs2 shifted into the addressed lane bytes."""
    off = addr & 0x3
    if funct3 == 0b000:
        return 1 << off, (rs2_val << (8 * off)) & MASK32
    if funct3 == 0b001:
        if addr & 0x1:
            raise MisalignedAccess(f"sh to 0x{addr & MASK32:08x}")
        return (0b1100 if addr & 0x2 else 0b0011), (rs2_val << (8 * off)) & MASK32
    if funct3 == 0b010:
        if addr & 0x3:
            raise MisalignedAccess(f"sw to 0x{addr & MASK32:08x}")
        return 0b1111, rs2_val & MASK32
    raise ValueError(f"not a store funct3: {funct3}")


def load_extract(funct3: int, addr: int, mem_word: int) -> int:
    """Select the addressed byte/half from an aligned word and extend per
    funct3 (LB/LH/LW sign, LBU/LHU zero)."""
    off = addr & 0x3
    if funct3 == 0b000:  # lb
        b = (mem_word >> (8 * off)) & 0xFF
        return b | 0xFFFFFF00 if b & 0x80 else b
    if funct3 == 0b100:  # lbu
        return (mem_word >> (8 * off)) & 0xFF
    if funct3 == 0b001:  # lh
        if addr & 0x1:
            raise MisalignedAccess(f"lh from 0x{addr & MASK32:08x}")
        h = (mem_word >> (8 * off)) & 0xFFFF
        return h | 0xFFFF0000 if h & 0x8000 else h
    if funct3 == 0b101:  # lhu
        if addr & 0x1:
            raise MisalignedAccess(f"lhu from 0x{addr & MASK32:08x}")
        return (mem_word >> (8 * off)) & 0xFFFF
    if funct3 == 0b010:  # lw
        if addr & 0x3:
            raise MisalignedAccess(f"lw from 0x{addr & MASK32:08x}")
        return mem_word & MASK32
    raise ValueError(f"not a load funct3: {funct3}")


_LOAD_WIDTH3 = {0b000: 1, 0b100: 1, 0b001: 2, 0b101: 2, 0b010: 4}
_STORE_WIDTH3 = {0b000: 1, 0b001: 2, 0b010: 4}


def _alu_compute(op: int, a: int, b: int) -> int:
    if op == AluOp.ADD:
        return (a + b) & MASK32
    if op == AluOp.SUB:
        return (a - b) & MASK32
    if op == AluOp.SLL:
        return (a << (b & 0x1F)) & MASK32
    if op == AluOp.SLT:
        return 1 if to_signed(a) < to_signed(b) else 0
    if op == AluOp.SLTU:
        return 1 if a < b else 0
    if op == AluOp.XOR:
        return a ^ b
    if op == AluOp.SRL:
        return a >> (b & 0x1F)
    if op == AluOp.SRA:
        return (to_signed(a) >> (b & 0x1F)) & MASK32
    if op == AluOp.OR:
        return a | b
    return a & b


_HALT_MNEMONICS = {Mnemonic.ECALL: HaltKind.ECALL,
                   Mnemonic.EBREAK: HaltKind.EBREAK}

# Snapshot field names follow the testbench hierarchy used by the trace
# tooling; widths drive the VCD declarations.
SIGNAL_SCHEMA: tuple[tuple[str, int], ...] = (
    ("vercore_tb.cycle[31:0]", 32),
    ("vercore_tb.u_vercore.u_stage_if.pc[31:0]", 32),
    ("vercore_tb.u_vercore.ic_va[31:0]", 32),
    ("vercore_tb.u_vercore.ic_valid", 1),
    ("vercore_tb.u_vercore.ic_d_in[31:0]", 32),
    ("vercore_tb.u_vercore.dc_va[31:0]", 32),
    ("vercore_tb.u_vercore.dc_valid", 1),
    ("vercore_tb.u_vercore.dc_byte_en[3:0]", 4),
    ("vercore_tb.u_vercore.dc_d_out[31:0]", 32),
    ("vercore_tb.u_vercore.dc_d_in[31:0]", 32),
    ("vercore_tb.u_vercore.wb_rd[4:0]", 5),
    ("vercore_tb.u_vercore.wb_reg_write", 1),
    ("vercore_tb.u_vercore.wb_data[31:0]", 32),
    ("vercore_tb.u_vercore.branch_taken", 1),
    ("vercore_tb.u_vercore.branch_target[31:0]", 32),
    ("vercore_tb.u_vercore.stall_pc", 1),
    ("vercore_tb.u_vercore.stall_ifid", 1),
    ("vercore_tb.u_vercore.flush_ifid", 1),
    ("vercore_tb.u_vercore.bubble_idex", 1),
    ("vercore_tb.u_vercore.global_stall", 1),
    ("vercore_tb.u_vercore.valid_id", 1),
    ("vercore_tb.u_vercore.valid_ex", 1),
    ("vercore_tb.u_vercore.valid_mem", 1),
    ("vercore_tb.u_vercore.valid_wb", 1),
)


def step_cycle(core: CoreState, mem: MemoryImage) -> CycleEvents:
    """Evaluate one clock cycle and latch all pipeline registers.

    Returns the cycle's events: at most one commit, the cache bus activity,
    the hazard decision and (on fatal decode/access problems) a halt cause.
    The core is advanced in place.
    """
    cfg = core.config
    halt: Optional[HaltCause] = None

    if not core.reset_n:
        core.pc_f = cfg.reset_pc
        core.ifid = IfIdReg()
        core.idex = IdExReg()
        core.exmem = ExMemReg()
        core.memwb = MemWbReg()
        core.halt_fetch = False
        bus = CacheBus(ic_va=cfg.reset_pc)
        hz = HazardDecision()
        snap = _snapshot(core, bus, hz, False, 0, False, 0, 0)
        core.cycle += 1
        return CycleEvents(None, bus, hz, None, False, 0, snap)

    # ---------------- WB: commit exactly once per retiring instruction ----
    wb = core.memwb
    wb_fire = wb.valid and wb.retire and not wb.committed
    commit: Optional[CommitRecord] = None
    if wb_fire:
        wb.committed = True
        commit = CommitRecord(wb.pc, wb.instr, wb.rd if wb.reg_write else 0,
                              wb.wb_data if wb.reg_write else 0,
                              wb.reg_write, wb.mem_txn)
        if wb.halt is HaltKind.ECALL:
            halt = HaltCause(HaltKind.ECALL, code=core.regfile[10])
        elif wb.halt is HaltKind.EBREAK:
            halt = HaltCause(HaltKind.EBREAK)
        elif wb.tohost is not None:
            halt = HaltCause(HaltKind.TOHOST, code=wb.tohost)
    wb_reg_write_sig = wb_fire and wb.reg_write

    # ---------------- EX: forwarded operands, ALU, multiplier handshake ---
    ex = core.idex
    ctrl = ex.ctrl
    ex_result = 0
    store_data = 0
    mul_wait = False

    fire = core.mul_fire
    core.mul_fire = False
    issue: Optional[MulRequest] = None
    if ex.valid and ctrl.mul_en:
        unit = core.mul
        if not unit.busy or (unit.out_valid and fire):
            a = forward_ex(ex.rs1, ex.rs1_val, core.exmem, core.memwb)
            b = forward_ex(ex.rs2, ex.rs2_val, core.exmem, core.memwb)
            issue = MulRequest(ctrl.mul_op, a, b)
    core.mul = mulunit.tick(core.mul, issue=issue, consumer_ready=fire)

    if ex.valid:
        if ctrl.mul_en:
            if core.mul.out_valid:
                ex_result = core.mul.result
                core.mul_fire = True  # handshake completes on the next tick
            else:
                mul_wait = True
        else:
            a_fwd = forward_ex(ex.rs1, ex.rs1_val, core.exmem, core.memwb)
            b_fwd = forward_ex(ex.rs2, ex.rs2_val, core.exmem, core.memwb)
            op_a = ex.pc if ctrl.use_pc else a_fwd
            op_b = (ex.imm & MASK32) if ctrl.alu_src_imm else b_fwd
            alu = _alu_compute(ctrl.alu_op, op_a, op_b)
            # Jumps latch their link value as the EX result so the plain
            # alu_result forwarding paths stay correct for them.
            ex_result = ex.pc_plus4 if ctrl.wb_sel == WbSel.PC4 else alu
            store_data = ex.rs2_val if cfg.inject_no_store_fwd else b_fwd
    ex_fwd = FwdSource(
        ex.valid and ctrl.reg_write and ex.rd != 0 and not ctrl.mem_read
        and not mul_wait,
        ex.rd, ex_result)

    # ---------------- MEM: single-issue dcache access, WB value select ----
    m = core.exmem
    dc_valid = False
    dc_va = 0
    dc_byte_en = 0
    dc_d_out = 0
    dc_d_in = 0
    if m.valid and (m.ctrl.mem_read or m.ctrl.mem_write) and not m.mem_issued \
            and halt is None:
        m.mem_issued = True
        addr = m.alu_result
        dc_valid = True
        dc_va = addr
        try:
            if m.ctrl.mem_write:
                dc_byte_en, dc_d_out = store_align(m.funct3, addr, m.store_data)
                width = _STORE_WIDTH3[m.funct3]
                m.tohost = mem.write_bytes(addr & ~0x3, dc_d_out, dc_byte_en)
                m.mem_txn = MemTxn("store", addr,
                                   m.store_data & ((1 << (8 * width)) - 1), width)
            else:
                dc_d_in = mem.read_word(addr & ~0x3)
                m.mem_data = load_extract(m.funct3, addr, dc_d_in)
                width = _LOAD_WIDTH3[m.funct3]
                raw = (dc_d_in >> (8 * (addr & 0x3))) & ((1 << (8 * width)) - 1)
                m.mem_txn = MemTxn("load", addr, raw, width)
        except MisalignedAccess as exc:
            halt = HaltCause(HaltKind.ERROR,
                             message=f"misaligned access at pc=0x{m.pc:08x}: {exc}")
    mem_fwd = FwdSource(m.valid and m.ctrl.reg_write and m.rd != 0, m.rd,
                        m.mem_data if m.ctrl.mem_read else m.alu_result)
    if m.ctrl.mem_to_reg:
        wb_data_next = m.mem_data
    elif m.ctrl.wb_sel == WbSel.PC4:
        wb_data_next = m.pc_plus4
    else:
        wb_data_next = m.alu_result

    # ---------------- ID: decode, capture with WB bypass, resolve branches -
    f = core.ifid
    id_d: Optional[DecodedInstr] = None
    rs1_cap = rs2_cap = 0
    id_taken = False
    id_target = 0
    if f.valid:
        try:
            id_d = decode(f.instr)
        except IllegalInstruction as exc:
            if halt is None:
                halt = HaltCause(
                    HaltKind.ERROR,
                    message=f"illegal instruction at pc=0x{f.pc:08x}: {exc}")
        if id_d is not None:
            regs = core.regfile
            rf1 = regs[id_d.rs1]
            rf2 = regs[id_d.rs2]
            # Flip-flop register file: this cycle's WB write is not readable
            # yet, so bypass it into the captured operand values.
            rs1_cap = wb.wb_data if (wb.valid and wb.reg_write
                                     and wb.rd == id_d.rs1) else rf1
            rs2_cap = wb.wb_data if (wb.valid and wb.reg_write
                                     and wb.rd == id_d.rs2) else rf2
            if id_d.ctrl.is_branch:
                s1 = forward_id(id_d.rs1, rf1, ex_fwd, mem_fwd, wb)
                s2 = forward_id(id_d.rs2, rf2, ex_fwd, mem_fwd, wb)
                id_taken = branch_taken(id_d.mnemonic, s1, s2)
                id_target = (f.pc + id_d.imm) & MASK32
            elif id_d.mnemonic is Mnemonic.JAL:
                id_taken = True
                id_target = (f.pc + id_d.imm) & MASK32
            elif id_d.mnemonic is Mnemonic.JALR:
                s1 = forward_id(id_d.rs1, rf1, ex_fwd, mem_fwd, wb)
                id_taken = True
                id_target = (s1 + id_d.imm) & ~1 & MASK32

    # ---------------- hazards ---------------------------------------------
    hz = hazard_detect(id_d, core.idex, core.mul, id_taken)
    redirect = hz.flush_ifid
    if redirect and id_target & 0x3 and halt is None:
        halt = HaltCause(
            HaltKind.ERROR,
            message=f"misaligned control transfer to 0x{id_target:08x} "
                    f"at pc=0x{f.pc:08x}")

    # ---------------- IF: always-hit fetch --------------------------------
    ic_va = core.pc_f
    fetch_ok = not core.halt_fetch and mem.is_initialized(ic_va, 4)
    ic_d_in = mem.read_word(ic_va) if fetch_ok else 0
    if not fetch_ok and not core.halt_fetch:
        core.uninit_fetches += 1

    bus = CacheBus(ic_va=ic_va, ic_valid=True, ic_d_in=ic_d_in, dc_va=dc_va,
                   dc_valid=dc_valid, dc_byte_en=dc_byte_en,
                   dc_d_out=dc_d_out, dc_d_in=dc_d_in)
    snap = _snapshot(core, bus, hz, redirect, id_target, wb_reg_write_sig,
                     wb.rd if wb_reg_write_sig else 0,
                     wb.wb_data if wb_reg_write_sig else 0)

    if halt is not None:
        core.cycle += 1
        return CycleEvents(commit, bus, hz, halt, redirect, id_target, snap)

    # ---------------- latch at the cycle boundary -------------------------
    if wb_fire and wb.reg_write:
        core.regfile[wb.rd] = wb.wb_data  # readable from the next cycle on

    if not hz.global_stall:
        core.memwb = MemWbReg(
            valid=m.valid, wb_data=wb_data_next, rd=m.rd,
            reg_write=m.valid and m.ctrl.reg_write and m.rd != 0,
            pc=m.pc, instr=m.instr, retire=m.retire, halt=m.halt,
            mem_txn=m.mem_txn, tohost=m.tohost)
        core.exmem = ExMemReg(
            valid=ex.valid, alu_result=ex_result, store_data=store_data,
            pc_plus4=ex.pc_plus4, rd=ex.rd, funct3=ex.funct3,
            ctrl=MemCtrl(ctrl.reg_write, ctrl.mem_read, ctrl.mem_write,
                         ctrl.mem_to_reg, ctrl.wb_sel),
            pc=ex.pc, instr=ex.instr, retire=ex.retire, halt=ex.halt)
        if hz.bubble_idex or id_d is None:
            core.idex = IdExReg()
        else:
            core.idex = IdExReg(
                valid=True, pc=f.pc, pc_plus4=f.pc_plus4, rs1_val=rs1_cap,
                rs2_val=rs2_cap, imm=id_d.imm, rs1=id_d.rs1, rs2=id_d.rs2,
                rd=id_d.rd, funct3=id_d.funct3, funct7=id_d.funct7,
                ctrl=gen_ex_ctrl(id_d), instr=f.instr, retire=True,
                halt=_HALT_MNEMONICS.get(id_d.mnemonic))
            if core.idex.halt is not None:
                core.halt_fetch = True
        if hz.stall_ifid:
            pass  # IF/ID holds
        elif redirect and not cfg.inject_no_flush:
            core.ifid = IfIdReg()
        elif core.halt_fetch or not fetch_ok:
            core.ifid = IfIdReg()
        else:
            core.ifid = IfIdReg(valid=True, pc=ic_va, instr=ic_d_in,
                                pc_plus4=(ic_va + 4) & MASK32)
        core.pc_f = next_pc(core, redirect, id_target,
                            hz.stall_pc or core.halt_fetch)

    core.cycle += 1
    return CycleEvents(commit, bus, hz, None, redirect, id_target, snap)


def _snapshot(core: CoreState, bus: CacheBus, hz: HazardDecision,
              taken: bool, target: int, wb_write: bool, wb_rd: int,
              wb_data: int) -> dict:
    return {
        "vercore_tb.cycle[31:0]": core.cycle,
        "vercore_tb.u_vercore.u_stage_if.pc[31:0]": core.pc_f,
        "vercore_tb.u_vercore.ic_va[31:0]": bus.ic_va,
        "vercore_tb.u_vercore.ic_valid": int(bus.ic_valid),
        "vercore_tb.u_vercore.ic_d_in[31:0]": bus.ic_d_in,
        "vercore_tb.u_vercore.dc_va[31:0]": bus.dc_va,
        "vercore_tb.u_vercore.dc_valid": int(bus.dc_valid),
        "vercore_tb.u_vercore.dc_byte_en[3:0]": bus.dc_byte_en,
        "vercore_tb.u_vercore.dc_d_out[31:0]": bus.dc_d_out,
        "vercore_tb.u_vercore.dc_d_in[31:0]": bus.dc_d_in,
        "vercore_tb.u_vercore.wb_rd[4:0]": wb_rd,
        "vercore_tb.u_vercore.wb_reg_write": int(wb_write),
        "vercore_tb.u_vercore.wb_data[31:0]": wb_data,
        "vercore_tb.u_vercore.branch_taken": int(taken),
        "vercore_tb.u_vercore.branch_target[31:0]": target,
        "vercore_tb.u_vercore.stall_pc": int(hz.stall_pc),
        "vercore_tb.u_vercore.stall_ifid": int(hz.stall_ifid),
        "vercore_tb.u_vercore.flush_ifid": int(hz.flush_ifid),
        "vercore_tb.u_vercore.bubble_idex": int(hz.bubble_idex),
        "vercore_tb.u_vercore.global_stall": int(hz.global_stall),
        "vercore_tb.u_vercore.valid_id": int(core.ifid.valid),
        "vercore_tb.u_vercore.valid_ex": int(core.idex.valid),
        "vercore_tb.u_vercore.valid_mem": int(core.exmem.valid),
        "vercore_tb.u_vercore.valid_wb": int(core.memwb.valid),
    }


@dataclass
class RunResult:
    commits: list[CommitRecord]
    commit_cycles: list[int]
    cycles: int
    halt: HaltCause
    signals: Optional[list[dict]]
    pc_trace: list[int]


def run_core(core: CoreState, mem: MemoryImage, max_cycles: int,
             record_signals: bool = False) -> RunResult:
    """Step the pipeline until it halts or the cycle cap is reached.

    pc_trace records the pc occupying IF each cycle (CPI attribution);
    signals, when requested, records the full per-cycle snapshot schema.
    """
    assert max_cycles > 0
    commits: list[CommitRecord] = []
    commit_cycles: list[int] = []
    signals: Optional[list[dict]] = [] if record_signals else None
    pc_trace: list[int] = []
    for _ in range(max_cycles):
        pc_trace.append(core.pc_f)
        ev = step_cycle(core, mem)
        if signals is not None:
            signals.append(ev.snapshot)
        if ev.commit is not None:
            commits.append(ev.commit)
            commit_cycles.append(core.cycle - 1)
        if ev.halt is not None:
            return RunResult(commits, commit_cycles, core.cycle, ev.halt,
                             signals, pc_trace)
    return RunResult(commits, commit_cycles, core.cycle,
                     HaltCause(HaltKind.MAX_CYCLES), signals, pc_trace)
