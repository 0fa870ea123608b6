"""Closed-form convergence constants and bounds for the refinement iteration.

``eps`` stands for the size ``||E||`` of the correction matrix relating the
approximate and exact orthogonal factors.  All eigenvalue arguments are
ordered internally by nonincreasing magnitude, so index ``j`` means the
``j``-th largest target in absolute value (0-based).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

ALPHA_RHO = (10.0, 100.0, 1000.0, 10000.0)
# reference values, rows rho1 and columns rho2; the (10, 10) reference entry
# disagrees with the formula, which gives -0.4098
ALPHA_REFERENCE = (
    (-0.4144, 0.5061, 0.5153, 0.5154),
    (0.0456, 0.9661, 0.9753, 0.9754),
    (0.0502, 0.9707, 0.9799, 0.9800),
    (0.0502, 0.9707, 0.9799, 0.9800),
)


class DomainError(ValueError):
    pass


def chi(eps):
    if not 0 <= eps < 1:
        raise DomainError(f"chi needs 0 <= eps < 1, got {eps}")
    return (3.0 - 2.0 * eps) / (1.0 - eps) ** 2


def _eta_denominator(eps):
    return 1.0 - 2.0 * eps - chi(eps) * eps**2


def eps_max():
    """Largest admissible eps: the root of ``1 - 2 eps - chi(eps) eps^2``."""
    return brentq(_eta_denominator, 0.0, 0.5, xtol=1e-15)


def eta(eps):
    c = chi(eps)
    den = (1.0 - eps) * _eta_denominator(eps)
    if not den > 0:
        raise DomainError(f"eta is undefined for eps={eps} (eps must be below {eps_max():.6f})")
    return 2.0 * (1.0 + 2.0 * eps + c * eps**2) * c / den


def omega(eps):
    c, e = chi(eps), eta(eps)
    return 2.0 * c + 2.0 * e * eps + c * e * eps**2


def _targets(lambdas, k):
    lam = np.asarray(lambdas, dtype=np.float64)
    if not 1 <= k <= lam.size:
        raise ValueError(f"k must lie in [1, {lam.size}], got {k}")
    order = np.argsort(-np.abs(lam), kind="stable")
    lam = lam[order]
    return lam[:k], lam[k:]


def gamma(lambdas, k):
    """Separation ratio ``max_{i>k} |lambda_i| / min_{j<=k} |lambda_j|``."""
    top, rest = _targets(lambdas, k)
    den = float(np.min(np.abs(top)))
    if den == 0.0:
        raise DomainError("smallest target eigenvalue is zero")
    num = float(np.max(np.abs(rest))) if rest.size else 0.0
    return num / den


def _gap(top, j):
    others = np.delete(top, j)
    return float(np.min(np.abs(top[j] - others))) if others.size else math.inf


def admissible_eps(lambdas, k, j, eps, norm_a):
    """Both admissibility thresholds for target ``j`` evaluated at ``eps``.

    Returns ``(gap_branch, magnitude_branch)``; ``eps`` is admissible when it
    does not exceed either.
    """
    top, _ = _targets(lambdas, k)
    e = eta(eps)
    gap_branch = math.sqrt(_gap(top, j) / (2.0 * e * k * norm_a))
    mag_branch = math.sqrt(abs(top[j]) / (e * norm_a))
    return gap_branch, mag_branch


def contraction_bound(lambdas, k, j, eps, norm_a):
    """Upper bound on ``||x_j - x~_j|| / ||X - X^||`` for one refinement step."""
    if norm_a <= 0:
        raise DomainError("norm_a must be positive")
    top, rest = _targets(lambdas, k)
    gap_branch, mag_branch = admissible_eps(lambdas, k, j, eps, norm_a)
    if eps > gap_branch:
        raise DomainError(f"eps={eps} exceeds the eigenvalue-gap threshold {gap_branch:.3e}")
    if eps > mag_branch:
        raise DomainError(f"eps={eps} exceeds the target-magnitude threshold {mag_branch:.3e}")
    w, e = omega(eps), eta(eps)
    gap = _gap(top, j)
    lam_out = float(np.max(np.abs(rest))) if rest.size else 0.0
    if math.isinf(gap):
        first = 0.0
    else:
        first = w * math.sqrt(k) * norm_a * eps / (gap - 2.0 * e * norm_a * eps**2)
    second = (lam_out + w * norm_a * eps) / (abs(top[j]) - e * norm_a * eps**2)
    return float((first + second) / (1.0 - 2.0 * eps))


def alpha_sufficient(rho1, rho2):
    """Largest separation ratio for which convergence is guaranteed at (rho1, rho2)."""
    if not rho1 > 1:
        raise DomainError(f"rho1 must exceed 1, got {rho1}")
    if not rho2 > 0:
        raise DomainError(f"rho2 must be positive, got {rho2}")
    r1, r2 = rho1 * rho1, rho2 * rho2
    return (r2 - 1.0) / r2 * (98.0 / 100.0 - 46.0 / (r1 - 1.0)) - 92.0 / r2


def alpha_table():
    """``alpha_sufficient`` on the (rho1, rho2) grid of powers of ten."""
    return [[alpha_sufficient(r1, r2) for r2 in ALPHA_RHO] for r1 in ALPHA_RHO]


def sufficient_condition(lambdas, k, eps, norm_a):
    """Evaluate the sufficient convergence condition at a measured ``eps``.

    ``rho1`` and ``rho2`` are the unique values making both defining
    identities hold for this ``eps``; the condition is
    ``eps < 1/100`` and ``gamma <= alpha_sufficient(rho1, rho2)``.
    """
    top, _ = _targets(lambdas, k)
    if eps <= 0:
        raise DomainError("eps must be positive")
    e = eta(eps)
    if k > 1:
        diffs = np.abs(top[:, None] - top[None, :])[~np.eye(k, dtype=bool)]
        gap = float(np.min(diffs))
        rho1 = math.sqrt(gap / (2.0 * e * math.sqrt(k) * norm_a)) / eps
    else:
        rho1 = math.inf
    rho2 = math.sqrt(float(np.min(np.abs(top))) / (e * norm_a)) / eps
    g = gamma(lambdas, k)
    if rho1 <= 1:
        alpha = -math.inf
    elif math.isinf(rho1):
        r2 = rho2 * rho2
        alpha = (r2 - 1.0) / r2 * 0.98 - 92.0 / r2
    else:
        alpha = alpha_sufficient(rho1, rho2)
    return {
        "rho1": rho1,
        "rho2": rho2,
        "alpha": alpha,
        "gamma": g,
        "holds": bool(eps < 0.01 and g <= alpha),
    }


@dataclass
class TheoryReport:
    k: int
    gamma: float
    necessary_condition_ok: bool
    norm_a: float
    constants_at_eps: dict = field(default_factory=dict)
    admissible: list = field(default_factory=list)
    bound_curve: list = field(default_factory=list)
    alpha_grid: dict = field(default_factory=dict)
    sufficient: dict | None = None

    def to_dict(self):
        return asdict(self)


def analyze(lambdas, k, norm_a=None, eps=None, eps_grid=None, rho=None):
    """Collect the quantities reported by ``eigrefine analyze``."""
    lam = np.asarray(lambdas, dtype=np.float64)
    if norm_a is None:
        norm_a = float(np.max(np.abs(lam)))
    g = gamma(lam, k)
    rep = TheoryReport(k=k, gamma=g, necessary_condition_ok=g < 1.0, norm_a=norm_a)
    probe = 0.01 if eps is None else eps
    if probe < eps_max():
        rep.constants_at_eps = {
            "eps": probe,
            "chi": chi(probe),
            "eta": eta(probe),
            "omega": omega(probe),
        }
    if eps_grid is None:
        eps_grid = [0.0] + [10.0**p for p in range(-8, -1)]
    top, _ = _targets(lam, k)
    for j in range(k):
        gb, mb = admissible_eps(lam, k, j, probe if probe < eps_max() else 0.0, norm_a)
        rep.admissible.append({"j": j, "lambda": float(top[j]), "gap_branch": gb, "magnitude_branch": mb})
    for e in eps_grid:
        row = {"eps": e}
        for j in range(k):
            try:
                row[f"j{j}"] = contraction_bound(lam, k, j, e, norm_a)
            except DomainError:
                row[f"j{j}"] = None
        rep.bound_curve.append(row)
    rep.alpha_grid = {
        "rho": list(ALPHA_RHO),
        "computed": alpha_table(),
        "reference": [list(r) for r in ALPHA_REFERENCE],
    }
    if rho is not None:
        rep.alpha_grid["requested"] = {"rho1": rho[0], "rho2": rho[1], "alpha": alpha_sufficient(*rho)}
    if eps is not None and eps > 0:
        rep.sufficient = sufficient_condition(lam, k, eps, norm_a)
    return rep
