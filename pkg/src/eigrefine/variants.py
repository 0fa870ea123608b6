"""Shifted operators that make other parts of the spectrum dominant.

Refinement converges to eigenvectors whose eigenvalues dominate in
magnitude.  Smallest (or largest) eigenvalues become dominant in
``A - alpha I`` and smallest-magnitude ones in ``A^2 - alpha I``; both
wrappers share eigenvectors with ``A``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import as_block, make_rng, orthonormalize


class Target(str, enum.Enum):
    LARGEST_MAGNITUDE = "largest-magnitude"
    SMALLEST = "smallest"
    LARGEST = "largest"
    SMALLEST_MAGNITUDE = "smallest-magnitude"


class ShiftError(ValueError):
    pass


@dataclass
class TargetSpec:
    kind: Target = Target.LARGEST_MAGNITUDE
    shift: float | None = None
    lambda_next: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        self.kind = Target(self.kind)


class ShiftedOperator:
    """``A - alpha I`` applied blockwise."""

    def __init__(self, base, alpha):
        self.base = base
        self.alpha = float(alpha)
        self.n = base.n

    def apply(self, B):
        B = as_block(B, self.n)
        return self.base.apply(B) - self.alpha * B

    def norm_inf(self):
        # triangle-inequality bound, not the exact row sum
        return self.base.norm_inf() + abs(self.alpha)


class ShiftSquaredOperator:
    """``A^2 - alpha I``; each apply makes exactly two products with ``A``."""

    def __init__(self, base, alpha):
        self.base = base
        self.alpha = float(alpha)
        self.n = base.n

    def apply(self, B):
        B = as_block(B, self.n)
        return self.base.apply(self.base.apply(B)) - self.alpha * B

    def norm_inf(self):
        return self.base.norm_inf() ** 2 + abs(self.alpha)


def choose_shift_smallest(norm_inf_a, lambda_next):
    """Midpoint shift ``(||A||_inf + lambda_next) / 2`` for the smallest eigenvalues."""
    if not math.isfinite(lambda_next):
        raise ShiftError("lambda_next must be finite")
    return 0.5 * (norm_inf_a + lambda_next)


def choose_shift_largest(norm_inf_a, lambda_next):
    # mirror image of the smallest-eigenvalue rule (apply it to -A)
    if not math.isfinite(lambda_next):
        raise ShiftError("lambda_next must be finite")
    return 0.5 * (lambda_next - norm_inf_a)


def choose_shift_smallest_abs(norm_inf_a, lambda_next):
    """Shift ``(||A||_inf^2 + |lambda_next|) / 2`` for the squared operator."""
    if not math.isfinite(lambda_next):
        raise ShiftError("lambda_next must be finite")
    return 0.5 * (norm_inf_a**2 + abs(lambda_next))


def _dominating_operator(A, kind):
    s = A.norm_inf()
    if kind is Target.SMALLEST:
        return lambda B: s * B - A.apply(B)
    if kind is Target.LARGEST:
        return lambda B: A.apply(B) + s * B
    if kind is Target.SMALLEST_MAGNITUDE:
        return lambda B: s * s * B - A.apply(A.apply(B))
    return A.apply


def estimate_next_eigenvalue(A, X, kind, iters=30, seed=0):
    """Approximate the first non-target eigenvalue of ``A``.

    Power iteration on an operator where the wanted end of the spectrum is
    dominant, with the approximate targets ``X`` deflated.  The estimate
    errs towards the interior of the non-target spectrum, which keeps the
    midpoint shift rules on the safe side.
    """
    kind = Target(kind)
    Q = orthonormalize(as_block(X, A.n))
    op = _dominating_operator(A, kind)
    y = make_rng(seed).standard_normal((A.n, 1))
    for _ in range(iters):
        y = y - Q @ (Q.T @ y)
        y = op(y)
        y = y - Q @ (Q.T @ y)
        nrm = float(np.linalg.norm(y))
        if nrm == 0.0:
            raise ShiftError("deflated power iteration collapsed to zero")
        y /= nrm
    Ay = A.apply(y)
    if kind is Target.SMALLEST_MAGNITUDE:
        return math.copysign(float(np.linalg.norm(Ay)), float(y[:, 0] @ Ay[:, 0]))
    return float(y[:, 0] @ Ay[:, 0])


def target_order(values, kind):
    """Indices putting ``values`` in target order (targets first)."""
    v = np.asarray(values, dtype=np.float64)
    kind = Target(kind)
    if kind is Target.SMALLEST:
        return np.argsort(v, kind="stable")
    if kind is Target.LARGEST:
        return np.argsort(-v, kind="stable")
    if kind is Target.SMALLEST_MAGNITUDE:
        return np.argsort(np.abs(v), kind="stable")
    return np.argsort(-np.abs(v), kind="stable")


def resolve_shift(A, spec, X=None, k=None, estimate=True):
    """Fill in ``spec.shift`` using the midpoint rules.

    ``lambda_next`` comes from ``spec.lambda_next``, else from the Rayleigh
    quotient of column ``k`` of ``X`` when ``X`` has more than ``k`` columns,
    else from :func:`estimate_next_eigenvalue` on the first ``k`` columns.
    """
    spec = TargetSpec(spec.kind, spec.shift, spec.lambda_next)
    if spec.kind is Target.LARGEST_MAGNITUDE or spec.shift is not None:
        return spec
    if spec.kind is Target.SMALLEST:
        rule, desc = choose_shift_smallest, "alpha = (||A||_inf + lambda_next) / 2"
    elif spec.kind is Target.LARGEST:
        rule, desc = choose_shift_largest, "alpha = (lambda_next - ||A||_inf) / 2"
    else:
        rule, desc = choose_shift_smallest_abs, "alpha = (||A||_inf^2 + |lambda_next|) / 2"
    lam = spec.lambda_next
    if lam is None and X is not None and k is not None:
        X = as_block(X, A.n)
        if X.shape[1] > k:
            x = X[:, k]
            lam = float(x @ A.apply(x)[:, 0]) / float(x @ x)
        elif estimate:
            lam = estimate_next_eigenvalue(A, X[:, :k], spec.kind)
    if lam is None or not math.isfinite(lam):
        raise ShiftError(
            f"target {spec.kind.value!r} needs a shift from the midpoint rule {desc}, "
            "but no estimate of the first non-target eigenvalue lambda_next is available; "
            "pass a shift or lambda_next explicitly"
        )
    s = A.norm_inf()
    spec.lambda_next = lam
    spec.shift = rule(s, lam)
    bound = s * s if spec.kind is Target.SMALLEST_MAGNITUDE else s
    spec.degenerate = abs(abs(lam) - bound) <= 1e-14 * max(bound, 1.0)
    if spec.degenerate:
        warnings.warn(f"degenerate shift: lambda_next={lam} sits at the norm bound", stacklevel=2)
    return spec


def make_operator(A, spec):
    spec = TargetSpec(spec.kind, spec.shift, spec.lambda_next)
    if spec.kind is Target.LARGEST_MAGNITUDE:
        return A if spec.shift is None else ShiftedOperator(A, spec.shift)
    if spec.shift is None:
        raise ShiftError(f"target {spec.kind.value!r} needs a resolved shift")
    if spec.kind is Target.SMALLEST_MAGNITUDE:
        return ShiftSquaredOperator(A, spec.shift)
    return ShiftedOperator(A, spec.shift)


def shift_margin(A, spec, target_values):
    """Estimated slack of the shifted separation condition (positive is good)."""
    s = A.norm_inf()
    a = spec.shift
    t = np.asarray(target_values, dtype=np.float64)
    lam = spec.lambda_next
    if spec.kind is Target.SMALLEST_MAGNITUDE:
        inner = float(np.min(np.abs(t * t - a)))
        outer = max(abs(lam * lam - a), abs(s * s - a))
    else:
        inner = float(np.min(np.abs(t - a)))
        edge = -s if spec.kind is Target.LARGEST else s
        outer = max(abs(lam - a), abs(edge - a))
    return inner - outer


def check_margin(A, spec, target_values, threshold=1e-8):
    m = shift_margin(A, spec, target_values)
    if m < threshold:
        warnings.warn(f"shifted separation margin {m:.3e} is below {threshold:g}", stacklevel=2)
    return m


def map_back(spec, dtilde):
    """Eigenvalue estimates of ``A`` from quotients of the wrapped operator.

    The squared variant only determines ``|lambda|``; use
    :func:`eigenvalues_of` for signed values.
    """
    d = np.asarray(dtilde, dtype=np.float64)
    a = 0.0 if spec.shift is None else spec.shift
    if spec.kind is Target.SMALLEST_MAGNITUDE:
        return np.sqrt(np.maximum(d + a, 0.0))
    return d + a


def eigenvalues_of(A, X):
    """Rayleigh quotients of the columns of ``X`` against ``A`` itself."""
    X = as_block(X, A.n)
    return np.sum(X * A.apply(X), axis=0) / np.sum(X * X, axis=0)
