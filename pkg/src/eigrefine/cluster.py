"""Rayleigh-Ritz preprocessing for clustered targets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .linalg import as_block
from .oracle import jacobi_eig

MAX_RITZ_K = 200


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The Gram matrix of the block is not positive definite (rank loss)."""


@dataclass
class RitzResult:
    Z: np.ndarray
    ritz_values: np.ndarray
    matching: np.ndarray
    offdiag: float
    AZ: np.ndarray


def _greedy_match(values, reference):
    """Assign each reference slot the nearest unused value; ties go to the lower index."""
    K = len(reference)
    dist = np.abs(np.asarray(reference)[:, None] - np.asarray(values)[None, :])
    pairs = sorted(
        ((dist[i, j], i, j) for i in range(K) for j in range(K)),
        key=lambda t: (t[0], t[1], t[2]),
    )
    slot_taken = np.zeros(K, dtype=bool)
    value_taken = np.zeros(K, dtype=bool)
    matching = np.empty(K, dtype=np.int64)
    for _, i, j in pairs:
        if slot_taken[i] or value_taken[j]:
            continue
        matching[i] = j
        slot_taken[i] = value_taken[j] = True
    return matching


def rayleigh_ritz(op, X, AX=None, reference=None):
    """Replace ``X`` by ``Z = X S`` with ``Z^T Z = I`` and ``Z^T A Z`` diagonal.

    Solves ``(X^T A X) S = (X^T X) S D`` through a Cholesky reduction and
    the Jacobi oracle.  Column ``j`` of ``Z`` is the Ritz vector whose value
    lies nearest ``reference[j]`` (the incoming Rayleigh quotients by
    default) and its sign is aligned with ``X[:, j]``.  ``AX`` may be passed
    to save a product with ``op``.
    """
    X = as_block(X, op.n)
    K = X.shape[1]
    if K > MAX_RITZ_K:
        raise ValueError(f"Rayleigh-Ritz block limited to {MAX_RITZ_K} columns, got {K}")
    if AX is None:
        AX = op.apply(X)
    G = X.T @ X
    M = X.T @ AX
    M = 0.5 * (M + M.T)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("X^T X is not positive definite; reorthogonalize first") from None
    C = sla.solve_triangular(L, M, lower=True)
    C = sla.solve_triangular(L, C.T, lower=True)
    C = 0.5 * (C + C.T)
    dec = jacobi_eig(C)
    S = sla.solve_triangular(L.T, dec.vectors, lower=False)
    if reference is None:
        reference = np.sum(X * AX, axis=0) / np.sum(X * X, axis=0)
    matching = _greedy_match(dec.values, reference)
    S = S[:, matching]
    values = dec.values[matching]
    Z = X @ S
    AZ = AX @ S
    scale = np.linalg.norm(Z, axis=0)
    sign = np.sign(np.sum(Z * X, axis=0))
    sign[sign == 0] = 1.0
    Z = Z * (sign / scale)
    AZ = AZ * (sign / scale)
    D = Z.T @ AZ
    offdiag = float(np.linalg.norm(D - np.diag(np.diag(D))))
    return RitzResult(Z, values, matching, offdiag, AZ)


def detect_clusters(dtilde, delta):
    """Groups of indices linked by ``|d_i - d_j| <= delta`` (transitively).

    Singletons are dropped; each group is sorted and groups are ordered by
    their smallest index.
    """
    d = np.asarray(dtilde, dtype=np.float64)
    order = np.argsort(d, kind="stable")
    groups, current = [], [int(order[0])] if d.size else []
    for a, b in zip(order[:-1], order[1:]):
        if d[b] - d[a] <= delta:
            current.append(int(b))
        else:
            groups.append(current)
            current = [int(b)]
    if current:
        groups.append(current)
    groups = [sorted(g) for g in groups if len(g) > 1]
    return sorted(groups, key=lambda g: g[0])
