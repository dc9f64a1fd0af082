"""Preconditioners.  Each one is a callable ``r -> z`` with a ``report`` dict."""
from .base import Preconditioner
from .blr import BlrConfig, BlrFactor, blr_factor, blr_preconditioned_solve, blr_solve
from .hx import HxBlockPrecond, HxOperator, build_hx
from .ras import RasConfig, RasPreconditioner, build_ras, grow_overlap, partition_graph
from .spai import SpaiConfig, build_spai, frobenius_fit, pattern_power, post_filter, sparsify_pattern

__all__ = [
    "Preconditioner",
    "SpaiConfig",
    "sparsify_pattern",
    "pattern_power",
    "frobenius_fit",
    "post_filter",
    "build_spai",
    "RasConfig",
    "RasPreconditioner",
    "partition_graph",
    "grow_overlap",
    "build_ras",
    "HxOperator",
    "HxBlockPrecond",
    "build_hx",
    "BlrConfig",
    "BlrFactor",
    "blr_factor",
    "blr_solve",
    "blr_preconditioned_solve",
]
