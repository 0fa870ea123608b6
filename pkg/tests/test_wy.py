import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigrefine.linalg import make_rng, orthonormalize
from eigrefine.wy import (
    Y1SingularError,
    apply_h,
    apply_ht,
    compact_wy,
    compact_wy_lu,
    modified_lu,
)


def _block(n, k, seed):
    return orthonormalize(make_rng(seed).standard_normal((n, k)))


def _dense_h(F):
    return np.eye(F.n) - F.Y @ F.T @ F.Y.T


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(1, 8), st.integers(0, 10**6))
def test_compact_wy_maps_onto_q(n, k, seed):
    k = min(k, n - 1)
    Q = _block(n, k, seed)
    F = compact_wy(Q)
    H = _dense_h(F)
    assert np.linalg.norm(H.T @ H - np.eye(n)) <= 1e-11
    assert np.linalg.norm(H[:, :k] - Q) <= 1e-11
    assert np.allclose(F.Y[:k], Q[:k] - np.eye(k))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(1, 8), st.integers(0, 10**6))
def test_lu_variant_maps_onto_q_sigma(n, k, seed):
    k = min(k, n - 1)
    Q = _block(n, k, seed)
    Y, U, sigma = modified_lu(Q)
    S = np.zeros_like(Q)
    S[np.arange(k), np.arange(k)] = sigma
    assert np.linalg.norm((Q - S) - Y @ U) <= 1e-13
    assert np.allclose(np.diag(Y[:k]), 1.0) and np.allclose(np.triu(Y[:k], 1), 0.0)
    assert np.allclose(np.tril(U, -1), 0.0)
    F = compact_wy_lu(Q)
    H = _dense_h(F)
    assert np.linalg.norm(H.T @ H - np.eye(n)) <= 1e-11
    assert np.linalg.norm(H[:, :k] - Q * F.sigma) <= 1e-11


def test_sigma_sign_rule():
    # sigma follows the sign of the updated pivot and sign(0) counts as +1:
    # q11 = 0 gives sigma1 = -1; elimination leaves -1 in the (2, 2) slot
    Q = np.zeros((3, 2))
    Q[0, 1] = 1.0
    Q[1, 0] = 1.0
    Y, U, sigma = modified_lu(Q)
    assert sigma.tolist() == [-1.0, 1.0]
    assert np.allclose(Y[:, 0], [1.0, 1.0, 0.0])


def test_identity_panel_needs_fallback():
    Q = np.eye(6, 3)
    with pytest.raises(Y1SingularError):
        compact_wy(Q)
    F = compact_wy_lu(Q)
    assert np.allclose(F.sigma, -1.0)
    H = _dense_h(F)
    assert np.allclose(H[:, :3], -Q, atol=1e-15)
    assert np.linalg.norm(H.T @ H - np.eye(6)) < 1e-14


def test_apply_matches_dense_product():
    Q = _block(20, 4, 1)
    F = compact_wy(Q)
    B = make_rng(2).standard_normal((20, 3))
    H = _dense_h(F)
    assert np.allclose(apply_h(F, B), H @ B, atol=1e-14)
    assert np.allclose(apply_ht(F, B), H.T @ B, atol=1e-14)
    assert np.allclose(apply_ht(F, apply_h(F, B)), B, atol=1e-13)


def test_frozen_small_factor():
    # hand-checked: Q = [c; s] gives Y = [c - 1; s] and T = 1 / (1 - c)
    c, s = 0.6, 0.8
    F = compact_wy(np.array([[c], [s]]))
    assert np.allclose(F.Y, [[c - 1.0], [s]])
    assert F.T[0, 0] == pytest.approx(1.0 / (1.0 - c))


def test_rejects_wide_panel():
    with pytest.raises(ValueError):
        compact_wy(np.ones((2, 3)))
