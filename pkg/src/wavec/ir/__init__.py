"""Predicated control-flow-graph IR."""

from .build import build_cfg, compute_liveness, convert_program, if_convert
from .model import BasicBlock, IrFunction, IrOp, IrProgram, LoopInfo, Region

__all__ = [
    "BasicBlock", "IrFunction", "IrOp", "IrProgram", "LoopInfo", "Region",
    "build_cfg", "compute_liveness", "convert_program", "if_convert",
]
from .passes import inline_single_callsite, lower_program, merge_blocks, optimize  # noqa: E402
from .verify import Diagnostic, verify_ir  # noqa: E402

__all__ += ["Diagnostic", "inline_single_callsite", "lower_program", "merge_blocks", "optimize", "verify_ir"]
