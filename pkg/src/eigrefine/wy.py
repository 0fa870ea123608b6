"""Compact WY orthogonal factors ``H = I - Y T Y^T`` built from an orthonormal block.

:func:`compact_wy` is the cheap construction (``Y = Q - I_{n,k}``) and needs
the leading ``k x k`` block of ``Y`` to be nonsingular.  :func:`compact_wy_lu`
goes through a sign-shifted LU factorization and always works for
orthonormal input, at the price of returning ``Q @ diag(sigma)`` as the
image of ``I_{n,k}`` instead of ``Q`` itself.

Nothing here forms an ``n x n`` matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .linalg import UNIT_ROUNDOFF, DimensionError, as_block


class Y1SingularError(ArithmeticError):
    """The leading block of ``Q - I_{n,k}`` is (numerically) singular."""


class PivotError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WYFactor:
    Y: np.ndarray
    T: np.ndarray
    sigma: np.ndarray

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def k(self):
        return self.Y.shape[1]


def _check_panel(Q):
    Q = as_block(Q)
    n, k = Q.shape
    if k >= n:
        raise DimensionError(f"need k < n, got k={k}, n={n}")
    return Q, n, k


def compact_wy(Q):
    Q, n, k = _check_panel(Q)
    Y = Q.copy()
    Y[np.arange(k), np.arange(k)] -= 1.0
    Y1 = Y[:k]
    scale = float(np.abs(Y1).sum(axis=1).max())
    if scale == 0.0:
        raise Y1SingularError("leading block of Q - I is zero")
    with warnings.catch_warnings():
        # exact zero pivots are reported below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(Y1, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= k * UNIT_ROUNDOFF * scale:
        raise Y1SingularError(
            f"leading block of Q - I is singular (min pivot {pivots.min():.3e})"
        )
    # T = -Y1^{-T}: solve Y1^T T = -I
    T = -sla.lu_solve((lu, piv), np.eye(k), trans=1, check_finite=False)
    return WYFactor(Y, T, np.ones(k))


def modified_lu(Q):
    """Sign-shifted LU: ``Q - Sigma = Y U`` with ``Y`` unit lower trapezoidal.

    ``Sigma`` is ``diag(sigma)`` stacked on top of zeros; ``sign(0)`` counts
    as ``+1``.  Returns ``(Y, U, sigma)``.
    """
    A = as_block(Q).copy()
    n, k = A.shape
    if k > n:
        raise DimensionError(f"need k <= n, got k={k}, n={n}")
    sigma = np.empty(k)
    for j in range(k):
        sigma[j] = -1.0 if A[j, j] >= 0 else 1.0
        A[j, j] -= sigma[j]
        if A[j, j] == 0.0:
            raise PivotError(f"zero pivot in column {j}")
        A[j + 1 :, j] /= A[j, j]
        A[j + 1 :, j + 1 :] -= np.outer(A[j + 1 :, j], A[j, j + 1 :])
    U = np.triu(A[:k])
    Y = np.tril(A, -1)
    Y[np.arange(k), np.arange(k)] = 1.0
    return Y, U, sigma


def compact_wy_lu(Q):
    """Factor with ``(I - Y T Y^T) I_{n,k} = Q diag(sigma)``."""
    Q, n, k = _check_panel(Q)
    Y, U, sigma = modified_lu(Q)
    # T = -U Sigma Y1^{-T}  <=>  T Y1^T = -U Sigma  <=>  Y1 T^T = -(U Sigma)^T
    T = -sla.solve_triangular(
        Y[:k], (U * sigma).T, lower=True, unit_diagonal=True, check_finite=False
    ).T
    return WYFactor(Y, T, sigma)


def apply_h(F, B):
    """``H B = B - Y (T (Y^T B))``."""
    B = as_block(B, F.n)
    return B - F.Y @ (F.T @ (F.Y.T @ B))


def apply_ht(F, B):
    """``H^T B = B - Y (T^T (Y^T B))``."""
    B = as_block(B, F.n)
    return B - F.Y @ (F.T.T @ (F.Y.T @ B))
