"""Rebuild the bundled sparse test matrix ``eigrefine/data/sample_sym.mtx``.

A 150 x 150 symmetric matrix: five dominant diagonal entries (10, 9, 8,
7, 6), a bulk diagonal in [-4, 4] and about six weak random couplings per
row.  The couplings are small enough that the top five eigenvalues stay
well separated from each other and from the rest.
"""
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from eigrefine.linalg import SparseSym, make_rng
from eigrefine.mmio import mm_write

N = 150
OUT = Path(__file__).resolve().parents[1] / "src" / "eigrefine" / "data" / "sample_sym.mtx"


def build(seed=2024):
    rng = make_rng(seed)
    diag = np.concatenate([[10.0, 9.0, 8.0, 7.0, 6.0], rng.uniform(-4.0, 4.0, N - 5)])
    m = 3 * N  # each (i, j) pair lands twice after symmetrization
    rows = rng.integers(0, N, m)
    cols = rng.integers(0, N, m)
    keep = rows != cols
    vals = 0.3 * rng.standard_normal(keep.sum())
    off = sp.coo_matrix((vals, (rows[keep], cols[keep])), shape=(N, N)).tocsr()
    A = sp.diags(diag) + off + off.T
    return SparseSym(A.tocsr())


if __name__ == "__main__":
    A = build()
    mm_write(OUT, A, comment="eigrefine sample: 150x150 symmetric, 5 dominant eigenvalues")
    vals = np.linalg.eigvalsh(A.toarray())
    top = vals[np.argsort(-np.abs(vals))][:7]
    print(f"wrote {OUT}: nnz={A.nnz}")
    print("largest-magnitude eigenvalues:", np.round(top, 4))
