"""Reference machinery for validating refinement at desk scale.

:func:`jacobi_eig` is a self-contained cyclic Jacobi eigensolver used as
ground truth; the remaining helpers measure subspace distances and build
initial approximations of controlled quality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    UNIT_ROUNDOFF,
    DenseSym,
    as_block,
    make_rng,
    orthonormalize,
    sort_by_magnitude,
)

MAX_ORACLE_N = 2000


class OracleSizeError(ValueError):
    pass


@dataclass
class EigDecomp:
    values: np.ndarray
    vectors: np.ndarray
    off_diag_residual: float
    sweeps: int
    converged: bool


def _dense_array(A):
    if isinstance(A, DenseSym):
        return A.toarray()
    if hasattr(A, "toarray"):
        return np.asarray(A.toarray(), dtype=np.float64)
    a = np.array(A, dtype=np.float64)
    return 0.5 * (a + a.T)


def _off(a):
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_eig(A, max_sweeps=30):
    """Cyclic-by-row Jacobi eigendecomposition of a dense symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops to
    ``n * u * ||A||_F``.  Eigenpairs come back sorted by nonincreasing
    ``|value|``; ``converged`` is False if the sweep cap was hit.
    """
    n = getattr(A, "n", None) or np.shape(A)[0]
    if n > MAX_ORACLE_N:
        raise OracleSizeError(f"jacobi_eig is capped at n={MAX_ORACLE_N}, got n={n}")
    a = _dense_array(A)
    V = np.eye(n)
    fro = float(np.linalg.norm(a))
    tol = n * UNIT_ROUNDOFF * fro
    # entries below this are set to zero instead of rotated
    tiny = UNIT_ROUNDOFF * fro / max(n, 1)
    off = _off(a)
    sweeps = 0
    while off > tol and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tiny:
                    a[p, q] = a[q, p] = 0.0
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        off = _off(a)
    values = np.diag(a).copy()
    order = sort_by_magnitude(values)
    return EigDecomp(values[order], V[:, order], off, sweeps, off <= tol)


def principal_angle_sin(U, V):
    """Sine of the largest principal angle between ``span(U)`` and ``span(V)``."""
    U0 = orthonormalize(U)
    V0 = orthonormalize(V)
    if U0.shape != V0.shape:
        raise ValueError(f"blocks differ in shape: {U0.shape} vs {V0.shape}")
    P = V0 - U0 @ (U0.T @ V0)
    G = P.T @ P
    if G.shape[0] == 1:
        top = float(G[0, 0])
    else:
        top = float(np.max(jacobi_eig(G).values))
    return min(math.sqrt(max(top, 0.0)), 1.0)


def perturb_basis(X, sigma_err, seed):
    """Orthonormalized ``X + sigma_err * G`` and its principal-angle error."""
    X = as_block(X)
    if sigma_err < 0:
        raise ValueError("sigma_err must be nonnegative")
    G = make_rng(seed).standard_normal(X.shape)
    Xp = orthonormalize(X + sigma_err * G)
    # keep column signs aligned with the unperturbed basis
    s = np.sign(np.sum(Xp * X, axis=0))
    s[s == 0] = 1.0
    Xp = Xp * s
    return Xp, principal_angle_sin(Xp, X)


def round_binary32(B):
    """Round every entry to the nearest binary32 value and widen back."""
    B = np.asarray(B, dtype=np.float64)
    with np.errstate(over="ignore"):
        r = B.astype(np.float32)
    if np.any(np.isinf(r) & np.isfinite(B)):
        raise OverflowError("entries exceed the binary32 range")
    return r.astype(np.float64)


def subspace_iteration_binary32(A, K, iters=200, oversample=None, seed=0, tol=None):
    """Low-accuracy initial eigenvectors by subspace iteration kept in binary32.

    Returns the ``K`` Ritz pairs of largest magnitude as
    ``(values, vectors)`` widened to float64.  Baseline quality only: the
    iterate is rounded to binary32 after every product and the small
    Rayleigh-Ritz problems are solved in binary32.
    """
    n = A.n
    p = max(K, 5) if oversample is None else oversample
    m = min(K + p, n)
    if tol is None:
        tol = 10 * 2.0**-24
    X = make_rng(seed).standard_normal((n, m)).astype(np.float32)
    X, _ = np.linalg.qr(X)
    scale = max(A.norm_inf(), np.finfo(np.float32).tiny)
    for it in range(iters):
        Y = A.apply(X.astype(np.float64)).astype(np.float32)
        if it % 10 == 9 or it == iters - 1:
            H = X.T @ Y
            H = 0.5 * (H + H.T)
            vals, S = np.linalg.eigh(H)
            order = np.argsort(-np.abs(vals), kind="stable")
            vals, S = vals[order], S[:, order]
            Xr = X @ S
            R = Y @ S - Xr * vals
            res = np.linalg.norm(R[:, :K], axis=0) / scale
            if np.all(res <= tol):
                X = Xr
                break
        X, _ = np.linalg.qr(Y)
    Y = A.apply(X.astype(np.float64)).astype(np.float32)
    H = X.T @ Y
    H = 0.5 * (H + H.T)
    vals, S = np.linalg.eigh(H)
    order = np.argsort(-np.abs(vals), kind="stable")[:K]
    vecs = (X @ S[:, order]).astype(np.float64)
    return vals[order].astype(np.float64), vecs
