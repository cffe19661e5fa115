"""Cycle-accurate RV32I+Zmmul 5-stage pipeline model with a golden-model
co-simulation harness, CPI measurement and VCD/CSV trace tooling."""

from .cosim import Program, compare_traces, cpi, format_verdict, lockstep
from .elf import load_elf
from .golden import ArchState, CommitRecord, HaltCause, HaltKind
from .isa import DecodedInstr, Mnemonic, decode, disassemble, encode
from .memory import MemoryImage, load_hex
from .pipeline import CoreState, PipelineConfig, run_core, step_cycle

__version__ = "0.1.0"

__all__ = [
    "ArchState", "CommitRecord", "CoreState", "DecodedInstr", "HaltCause",
    "HaltKind", "MemoryImage", "Mnemonic", "PipelineConfig", "Program",
    "compare_traces", "cpi", "decode", "disassemble", "encode",
    "format_verdict", "load_elf", "load_hex", "lockstep", "run_core",
    "step_cycle", "__version__",
]
