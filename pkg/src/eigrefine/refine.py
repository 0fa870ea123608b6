"""Iterative refinement of a subset of eigenvectors.

One step takes an approximate eigenvector block ``X`` (``n x K``), builds
the compact WY factor ``H`` with ``H I_{n,K} = X``, and updates

    X <- X + H E

where ``E`` (``n x K``) is assembled from Rayleigh quotients and the
residual ``V = H^T (A X - X D)``.  Only products with ``A``, with the thin
factor ``Y`` and small ``K x K`` work are needed.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import NotPositiveDefiniteError, detect_clusters, rayleigh_ritz
from .linalg import UNIT_ROUNDOFF, RankDeficientError, as_block, norm_estimate, orthonormalize
from .wy import PivotError, Y1SingularError, apply_h, apply_ht, compact_wy, compact_wy_lu

HISTORY_HEADER = ("iter", "rel_resid", "corr_k", "corr_full", "min_gap", "delta_hits", "fallback")


class DegenerateColumnError(ArithmeticError):
    pass


class NearNullTargetError(ArithmeticError):
    """A target Rayleigh quotient is within ``delta`` of zero; shift the operator."""


class DivergedError(ArithmeticError):
    pass


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


EXIT_CODES = {Status.CONVERGED: 0, Status.MAX_ITER: 3, Status.DIVERGED: 4}


@dataclass
class RefineConfig:
    """Knobs of the refinement driver.

    ``k`` columns are judged for convergence while ``K >= k`` are refined.
    ``delta=None`` selects ``delta_c * ||A||_inf * u``.  ``beta`` picks the
    entries used for near-equal Rayleigh quotient pairs: ``"paired"`` gives
    ``-x_i^T x_j / 2``, ``"zero"`` gives 0.  ``preprocess`` is ``"off"``,
    ``"always"`` (Rayleigh-Ritz before every step) or ``"auto"`` (switched on
    after ``cluster_patience`` consecutive steps with detected clusters, or
    by restarting from ``X0`` after a divergence abort).
    """

    k: int
    K: int | None = None
    delta: float | None = None
    delta_c: float = 10.0
    beta: str = "paired"
    corr_tol: float = 1e-8
    resid_tol: float | None = None
    max_iter: int = 1000
    growth_factor: float = 10.0
    growth_window: int = 3
    growth_floor: float = 2.0**-26
    reorth_threshold: float = 1e-4
    preprocess: str = "off"
    cluster_patience: int = 3
    norm_steps: int = 20
    norm_seed: int = 0

    def __post_init__(self):
        if self.K is None:
            self.K = self.k
        if not 1 <= self.k <= self.K:
            raise ValueError(f"need 1 <= k <= K, got k={self.k}, K={self.K}")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.beta not in ("paired", "zero"):
            raise ValueError(f"beta must be 'paired' or 'zero', got {self.beta!r}")
        if self.preprocess not in ("off", "auto", "always"):
            raise ValueError(f"preprocess must be off, auto or always, got {self.preprocess!r}")
        if not self.corr_tol > 0 or (self.resid_tol is not None and not self.resid_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    def resolve_delta(self, op):
        if self.delta is not None:
            return self.delta
        return self.delta_c * op.norm_inf() * UNIT_ROUNDOFF


@dataclass(frozen=True)
class StepReport:
    iter: int
    rel_resid: float
    corr_k: float
    corr_full: float
    min_gap: float
    delta_hits: tuple
    fallback: bool
    preprocessed: bool = False
    per_vector: tuple = ()

    def csv_row(self):
        return [
            self.iter,
            f"{self.rel_resid:.17g}",
            f"{self.corr_k:.17g}",
            f"{self.corr_full:.17g}",
            f"{self.min_gap:.17g}",
            len(self.delta_hits),
            int(self.fallback),
        ]


@dataclass
class RefineState:
    X: np.ndarray
    dtilde: np.ndarray | None = None
    alpha: np.ndarray | None = None
    history: list = field(default_factory=list)
    sign_fixed: bool = False
    iteration: int = 0


def rayleigh(x, w, alpha=None):
    x = np.asarray(x, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if alpha is None:
        alpha = float(x @ x)
    if not alpha > 0:
        raise DegenerateColumnError(f"column has nonpositive squared norm {alpha}")
    return float(x @ w) / alpha


def _min_gap(d):
    if d.size < 2:
        return math.inf
    s = np.sort(d)
    return float(np.min(np.diff(s)))


def correction_matrix(V, alpha, dtilde, delta, beta="paired", X=None, ritz=False):
    """Assemble the correction block ``E`` (``n x K``) from ``V``.

    Diagonal: ``(1 - alpha_i) / 2``.  Upper ``K x K`` off-diagonal: ``v_ij /
    (d_j - d_i)`` when the quotients differ by more than ``delta``, else the
    ``beta`` entry (exact ties always take the ``beta`` entry).  Rows below
    ``K``: ``v_ij / d_j``.  With ``ritz=True`` (a Rayleigh-Ritz basis) the
    whole upper off-diagonal block is zero.

    Returns ``(E, hits)`` with ``hits`` the ``(i, j)`` pairs, ``i < j``, that
    took the ``beta`` branch.
    """
    V = np.asarray(V, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    d = np.asarray(dtilde, dtype=np.float64)
    K = d.size
    if np.any(np.abs(d) <= delta):
        j = int(np.argmin(np.abs(d)))
        raise NearNullTargetError(
            f"Rayleigh quotient {d[j]:.3e} of column {j} is within delta={delta:.3e} of zero"
        )
    E = np.empty_like(V)
    E[K:] = V[K:] / d
    diff = d[None, :] - d[:, None]  # diff[i, j] = d_j - d_i
    off = ~np.eye(K, dtype=bool)
    near = off & ((np.abs(diff) <= delta) | (diff == 0))
    upper = np.zeros((K, K))
    if not ritz:
        far = off & ~near
        upper[far] = V[:K][far] / diff[far]
        if beta == "paired":
            if X is None:
                raise ValueError("beta='paired' needs X")
            gram = X.T @ X
            upper[near] = -0.5 * gram[near]
    upper[np.arange(K), np.arange(K)] = 0.5 * (1.0 - alpha)
    E[:K] = upper
    ii, jj = np.nonzero(np.triu(near, 1))
    hits = tuple(zip(ii.tolist(), jj.tolist()))
    return E, hits


def residual(op, X, dtilde, norm_est, AX=None):
    """Relative residuals ``||A X - X D||_F / norm_est`` and per column."""
    if not norm_est > 0:
        raise ValueError("norm estimate must be positive")
    X = as_block(X, op.n)
    if AX is None:
        AX = op.apply(X)
    R = AX - X * np.asarray(dtilde, dtype=np.float64)
    return float(np.linalg.norm(R)) / norm_est, np.linalg.norm(R, axis=0) / norm_est


def _normalize(X, threshold):
    X = X / np.linalg.norm(X, axis=0)
    K = X.shape[1]
    if K > 1 and np.linalg.norm(X.T @ X - np.eye(K)) > threshold:
        X = orthonormalize(X)
    return X


def refine_step(op, state, cfg, delta, norm_est, preprocess=False):
    """One refinement step; returns the advanced state and a :class:`StepReport`.

    The incoming block is normalized (and reorthogonalized past
    ``cfg.reorth_threshold``) first.  If the leading block of ``X - I`` is
    singular the factor comes from the sign-shifted LU and ``X`` is flipped
    column-wise once so later steps can use the cheap construction.
    """
    X = _normalize(as_block(state.X, op.n), cfg.reorth_threshold)
    W = op.apply(X)
    if preprocess:
        rr = rayleigh_ritz(op, X, AX=W)
        X, W = rr.Z, rr.AZ
    fallback = False
    sign_fixed = state.sign_fixed
    try:
        F = compact_wy(X)
    except Y1SingularError:
        if sign_fixed:
            raise DivergedError("leading block singular again after the one-time sign fix") from None
        F = compact_wy_lu(X)
        X = X * F.sigma
        W = W * F.sigma
        fallback = sign_fixed = True
    alpha = np.sum(X * X, axis=0)
    if np.any(alpha <= 0):
        raise DegenerateColumnError("zero column in X")
    d = np.sum(X * W, axis=0) / alpha
    R = W - X * d
    V = apply_ht(F, R)
    E, hits = correction_matrix(V, alpha, d, delta, cfg.beta, X=X, ritz=preprocess)
    X_new = X + apply_h(F, E)

    it = state.iteration + 1
    per_vec = np.linalg.norm(R, axis=0) / norm_est
    report = StepReport(
        iter=it,
        rel_resid=float(np.linalg.norm(R)) / norm_est,
        corr_k=float(np.linalg.norm(E[:, : cfg.k])),
        corr_full=float(np.linalg.norm(E)),
        min_gap=_min_gap(d),
        delta_hits=hits,
        fallback=fallback,
        preprocessed=preprocess,
        per_vector=tuple(per_vec.tolist()),
    )
    new_state = RefineState(
        X=X_new,
        dtilde=d,
        alpha=alpha,
        history=state.history + [report],
        sign_fixed=sign_fixed,
        iteration=it,
    )
    return new_state, report


@dataclass
class RefineOutcome:
    status: Status
    X: np.ndarray
    dtilde: np.ndarray
    rel_resid: float
    per_vector_resid: np.ndarray
    history: list
    norm_estimate: float
    delta: float
    fallback_used: bool = False
    preprocessed: bool = False
    restarts: int = 0
    message: str = ""

    @property
    def iterations(self):
        return len(self.history)

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]

    def summary(self):
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else None

        last = self.history[-1] if self.history else None
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "rel_resid": num(self.rel_resid),
            "per_vector_resid": [num(x) for x in self.per_vector_resid],
            "eigenvalue_estimates": [num(x) for x in self.dtilde],
            "final_corr_k": num(last.corr_k) if last else None,
            "final_corr_full": num(last.corr_full) if last else None,
            "norm_estimate": self.norm_estimate,
            "delta": self.delta,
            "fallback_used": self.fallback_used,
            "preprocessed": self.preprocessed,
            "restarts": self.restarts,
            "message": self.message,
        }

    def to_json(self, path=None, extra=None):
        doc = self.summary()
        doc["history"] = [
            {
                "iter": r.iter,
                "rel_resid": r.rel_resid,
                "corr_k": r.corr_k,
                "corr_full": r.corr_full,
                "min_gap": r.min_gap if math.isfinite(r.min_gap) else None,
                "delta_hits": [list(p) for p in r.delta_hits],
                "fallback": r.fallback,
                "preprocessed": r.preprocessed,
            }
            for r in self.history
        ]
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2, allow_nan=False, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_HEADER)
        for r in history:
            w.writerow(r.csv_row())


def _finite(report):
    return all(
        math.isfinite(v) for v in (report.rel_resid, report.corr_k, report.corr_full)
    )


def run(op, X0, cfg, callback=None):
    """Refine ``X0`` until the leading-``k`` correction or the residual is small.

    Stops with ``Status.CONVERGED`` when ``corr_k <= cfg.corr_tol`` or
    ``rel_resid <= cfg.resid_tol``, ``Status.DIVERGED`` on non-finite values,
    breakdown, or when ``corr_full`` grows by ``cfg.growth_factor`` over
    ``cfg.growth_window`` steps to above ``cfg.growth_floor``, and
    ``Status.MAX_ITER`` otherwise.
    ``callback(report, X)`` sees every accepted step.
    """
    X0 = as_block(X0, op.n)
    if X0.shape[1] != cfg.K:
        raise ValueError(f"X0 has {X0.shape[1]} columns, config expects K={cfg.K}")
    if cfg.K >= op.n:
        raise ValueError(f"need K < n, got K={cfg.K}, n={op.n}")
    norm_est = norm_estimate(op, cfg.norm_steps, cfg.norm_seed)
    if not norm_est > 0:
        raise ValueError("operator norm estimate is zero")
    delta = cfg.resolve_delta(op)

    pre = cfg.preprocess == "always"
    state = RefineState(X0.copy())
    history = []
    attempt_start = 0
    cluster_streak = 0
    restarts = 0
    fallback_used = False
    status, message = Status.MAX_ITER, ""

    while len(history) < cfg.max_iter:
        failure = None
        try:
            state = replace(state, iteration=len(history), history=[])
            state, rep = refine_step(op, state, cfg, delta, norm_est, preprocess=pre)
        except (
            Y1SingularError,
            PivotError,
            DivergedError,
            RankDeficientError,
            NotPositiveDefiniteError,
            DegenerateColumnError,
            NearNullTargetError,
            np.linalg.LinAlgError,
        ) as exc:
            failure, rep = str(exc) or type(exc).__name__, None
        if rep is not None:
            fallback_used |= rep.fallback
            history.append(rep)
            if not (_finite(rep) and np.all(np.isfinite(state.X))):
                failure = "non-finite values in the iterate"
        if failure is None:
            if callback is not None:
                callback(rep, state.X)
            if rep.corr_k <= cfg.corr_tol or (
                cfg.resid_tol is not None and rep.rel_resid <= cfg.resid_tol
            ):
                status, message = Status.CONVERGED, ""
                break
            w = cfg.growth_window
            if len(history) - attempt_start > w:
                before = history[-1 - w].corr_full
                # growth among roundoff-level corrections is noise, not divergence
                grown = rep.corr_full >= cfg.growth_factor * before
                if before > 0 and grown and rep.corr_full > cfg.growth_floor:
                    failure = (
                        f"correction norm grew from {before:.3e} to {rep.corr_full:.3e} "
                        f"in {w} steps"
                    )
        if failure is not None:
            if cfg.preprocess == "auto" and not pre:
                pre, restarts = True, restarts + 1
                state = RefineState(X0.copy())
                attempt_start, cluster_streak = len(history), 0
                continue
            status, message = Status.DIVERGED, failure
            break
        if cfg.preprocess == "auto" and not pre:
            cluster_streak = cluster_streak + 1 if detect_clusters(state.dtilde, delta) else 0
            if cluster_streak >= cfg.cluster_patience:
                pre = True
    else:
        message = f"no convergence in {cfg.max_iter} steps"

    X = state.X
    if status is not Status.DIVERGED and np.all(np.isfinite(X)):
        X = X / np.linalg.norm(X, axis=0)
        AX = op.apply(X)
        d = np.sum(X * AX, axis=0)
        rel, per = residual(op, X, d, norm_est, AX=AX)
    else:
        d = state.dtilde if state.dtilde is not None else np.full(cfg.K, np.nan)
        rel = history[-1].rel_resid if history else math.nan
        per = np.array(history[-1].per_vector) if history else np.full(cfg.K, np.nan)
    return RefineOutcome(
        status=status,
        X=X,
        dtilde=d,
        rel_resid=rel,
        per_vector_resid=per,
        history=history,
        norm_estimate=norm_est,
        delta=delta,
        fallback_used=fallback_used,
        preprocessed=pre,
        restarts=restarts,
        message=message,
    )
