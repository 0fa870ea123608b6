"""Iterative refinement of a selected subset of eigenvectors of a real symmetric matrix."""

__version__ = "0.1.0"

from .linalg import DenseSym, SparseSym, gen_randsvd_like, gen_spectrum, orthonormalize
from .mmio import mm_read, mm_write, read_operator
from .refine import RefineConfig, RefineOutcome, Status, refine_step, run
from .wy import WYFactor, apply_h, apply_ht, compact_wy, compact_wy_lu, modified_lu

__all__ = [
    "DenseSym",
    "SparseSym",
    "gen_randsvd_like",
    "gen_spectrum",
    "orthonormalize",
    "mm_read",
    "mm_write",
    "read_operator",
    "RefineConfig",
    "RefineOutcome",
    "Status",
    "refine_step",
    "run",
    "WYFactor",
    "apply_h",
    "apply_ht",
    "compact_wy",
    "compact_wy_lu",
    "modified_lu",
]
