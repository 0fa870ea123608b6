"""Symmetric matrix storage, block products, norms and test-matrix generators.

Every operator in this package (the plain matrices here and the shifted
wrappers in :mod:`eigrefine.variants`) exposes the same small surface:

``n``
    dimension,
``apply(B)``
    the block product ``A @ B`` for an ``n x m`` array ``B``,
``norm_inf()``
    the maximum absolute row sum (an upper bound on the spectral norm).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

UNIT_ROUNDOFF = 2.0**-53


class DimensionError(ValueError):
    pass


class RankDeficientError(ValueError):
    """Raised by :func:`orthonormalize` when a column is numerically dependent."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"block is rank deficient at column {column}")


def make_rng(seed):
    """Seeded generator backed by Philox-4x64, a counter-based bit generator.

    Philox streams are defined by the (key, counter) pair alone, so a seed
    produces the same numbers on every platform numpy supports.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


def as_block(B, n=None):
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if B.ndim != 2 or B.shape[1] < 1:
        raise DimensionError(f"expected an n x m block, got shape {B.shape}")
    if n is not None and B.shape[0] != n:
        raise DimensionError(f"block has {B.shape[0]} rows, operator has n={n}")
    return B


class DenseSym:
    """Dense real symmetric matrix.

    The input is symmetrized as ``(A + A.T) / 2`` which is bit-exactly
    symmetric because floating-point addition commutes.
    """

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self.entries = a
        self.n = a.shape[0]

    def apply(self, B):
        B = as_block(B, self.n)
        return self.entries @ B

    def norm_inf(self):
        return float(np.abs(self.entries).sum(axis=1).max())

    def norm_fro(self):
        return float(np.linalg.norm(self.entries))

    def toarray(self):
        return self.entries.copy()

    def to_sparse(self):
        return SparseSym(sp.csr_matrix(self.entries))

    def __repr__(self):
        return f"DenseSym(n={self.n})"


class SparseSym:
    """Sparse symmetric matrix in CSR form with both triangles stored."""

    def __init__(self, matrix, check=True):
        m = sp.csr_matrix(matrix, dtype=np.float64)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        if not np.all(np.isfinite(m.data)):
            raise ValueError("matrix has non-finite entries")
        if check and (m != m.T).nnz:
            raise ValueError("sparse matrix is not symmetric")
        self.matrix = m
        self.n = m.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    def apply(self, B):
        B = as_block(B, self.n)
        return np.asarray(self.matrix @ B)

    def norm_inf(self):
        if self.nnz == 0:
            return 0.0
        return float(np.asarray(abs(self.matrix).sum(axis=1)).max())

    def norm_fro(self):
        return float(np.linalg.norm(self.matrix.data))

    def toarray(self):
        return self.matrix.toarray()

    def to_dense(self):
        return DenseSym(self.toarray())

    def __repr__(self):
        return f"SparseSym(n={self.n}, nnz={self.nnz})"


def apply(A, B):
    return A.apply(B)


def norm_inf(A):
    return A.norm_inf()


def norm_fro(A):
    return A.norm_fro()


def two_norm_upper(A):
    # ||A||_2 <= ||A||_inf holds for symmetric A
    return A.norm_inf()


def norm_estimate(A, steps=20, seed=0):
    """Power-iteration estimate of ``||A||_2`` (a lower bound, usually tight)."""
    v = make_rng(seed).standard_normal((A.n, 1))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = A.apply(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def orthonormalize(B, reorth=True):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Raises :class:`RankDeficientError` naming the first column whose norm
    after elimination falls below ``n * u * max column norm``.
    """
    Q = as_block(B).copy()
    n, m = Q.shape
    scale = float(np.linalg.norm(Q, axis=0).max())
    tol = n * UNIT_ROUNDOFF * scale
    passes = 2 if reorth else 1
    for j in range(m):
        for _ in range(passes):
            for i in range(j):
                Q[:, j] -= (Q[:, i] @ Q[:, j]) * Q[:, i]
        nrm = np.linalg.norm(Q[:, j])
        if not nrm > tol:
            raise RankDeficientError(j)
        Q[:, j] /= nrm
    return Q


def _orthogonal_basis(n, rng):
    # Householder QR (LAPACK geqrf) of a Gaussian matrix; the sign fix makes
    # Q Haar-distributed and unique for a given draw
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def sort_by_magnitude(lambdas):
    """Indices ordering ``lambdas`` by nonincreasing absolute value (stable)."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    return np.argsort(-np.abs(lambdas), kind="stable")


def gen_spectrum(lambdas, seed):
    """Return ``(A, Q)`` with ``A = Q diag(lambdas) Q^T`` for a seeded orthogonal ``Q``.

    Column ``j`` of ``Q`` is the eigenvector of ``lambdas[j]``; the order of
    ``lambdas`` is kept as given.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    if not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be finite")
    Q = _orthogonal_basis(lam.size, make_rng(seed))
    A = DenseSym((Q * lam) @ Q.T)
    return A, Q


def randsvd_spectrum(n, kappa, mode):
    if n < 2:
        raise ValueError("n must be at least 2")
    if not kappa > 1:
        raise ValueError("kappa must exceed 1")
    i = np.arange(n, dtype=np.float64)
    if mode == 3:
        return kappa ** (-i / (n - 1))
    if mode == 4:
        return 1.0 - i / (n - 1) * (1.0 - 1.0 / kappa)
    raise ValueError(f"mode must be 3 or 4, got {mode!r}")


class SpectrumModel:
    def __init__(self, lambdas, basis_seed):
        lam = np.asarray(lambdas, dtype=np.float64)
        if np.any(np.diff(np.abs(lam)) > 0):
            raise ValueError("eigenvalues must be sorted by nonincreasing magnitude")
        self.lambdas = lam
        self.basis_seed = basis_seed


def gen_randsvd_like(n, kappa, mode, seed):
    """Symmetric positive definite test matrix with a prescribed spectrum.

    ``mode=3`` spaces the eigenvalues geometrically from 1 down to
    ``1/kappa``; ``mode=4`` spaces them arithmetically.  Returns the matrix,
    its :class:`SpectrumModel` and the exact eigenvectors (column ``j``
    belongs to ``lambdas[j]``).
    """
    lam = randsvd_spectrum(n, kappa, mode)
    A, Q = gen_spectrum(lam, seed)
    return A, SpectrumModel(lam, seed), Q
