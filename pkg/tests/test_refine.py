import json

import numpy as np
import pytest

from eigrefine.linalg import DenseSym, UNIT_ROUNDOFF, gen_spectrum, make_rng
from eigrefine.oracle import perturb_basis, principal_angle_sin
from eigrefine.refine import (
    HISTORY_HEADER,
    NearNullTargetError,
    RefineConfig,
    RefineState,
    Status,
    correction_matrix,
    rayleigh,
    refine_step,
    residual,
    run,
    write_history_csv,
)
from eigrefine.theory import contraction_bound


def _clustered():
    lam = np.concatenate([[1.0, 1.0, 0.9, 0.8, 0.7], np.linspace(0.5, 0.01, 195)])
    return gen_spectrum(lam, 3)


def test_rayleigh():
    x = np.array([1.0, 1.0])
    assert rayleigh(x, np.array([3.0, 1.0])) == 2.0
    with pytest.raises(ArithmeticError):
        rayleigh(np.zeros(2), np.ones(2))


def test_correction_matrix_entries():
    V = np.arange(1.0, 13.0).reshape(4, 3)
    d = np.array([4.0, 2.0, 1.0])
    alpha = np.array([1.0, 0.9, 1.1])
    X = np.eye(4, 3)
    E, hits = correction_matrix(V, alpha, d, delta=1e-3, X=X)
    assert hits == ()
    assert np.allclose(np.diag(E[:3]), [0.0, 0.05, -0.05])
    # upper block: v_ij / (d_j - d_i)
    assert E[0, 1] == pytest.approx(2.0 / (2.0 - 4.0))
    assert E[2, 0] == pytest.approx(7.0 / (4.0 - 1.0))
    # rows below K: v_ij / d_j
    assert np.allclose(E[3], V[3] / d)


def test_correction_matrix_delta_branch():
    V = np.ones((5, 3))
    d = np.array([1.0, 1.0 + 1e-15, 0.5])
    X = np.eye(5, 3) + 0.01
    gram = X.T @ X
    E, hits = correction_matrix(V, np.ones(3), d, delta=1e-14, X=X)
    assert hits == ((0, 1),)
    assert E[0, 1] == -0.5 * gram[0, 1] and E[1, 0] == -0.5 * gram[1, 0]
    Ez, hz = correction_matrix(V, np.ones(3), d, delta=1e-14, beta="zero")
    assert hz == hits and Ez[0, 1] == 0.0 and Ez[1, 0] == 0.0
    # exact ties take the beta entry even with delta = 0
    _, h0 = correction_matrix(V, np.ones(3), np.array([1.0, 1.0, 0.5]), delta=0.0, beta="zero")
    assert h0 == ((0, 1),)


def test_correction_matrix_ritz_and_null():
    V = np.ones((4, 2))
    E, _ = correction_matrix(V, np.ones(2), np.array([2.0, 1.0]), 1e-14, beta="zero", ritz=True)
    assert E[0, 1] == 0.0 and E[1, 0] == 0.0
    with pytest.raises(NearNullTargetError):
        correction_matrix(V, np.ones(2), np.array([2.0, 1e-20]), 1e-14, beta="zero")


def test_exact_eigenvectors_are_a_fixed_point(separated):
    A, Q, _ = separated
    cfg = RefineConfig(k=3)
    state, rep = refine_step(A, RefineState(Q[:, :3]), cfg, cfg.resolve_delta(A), 4.0)
    assert rep.corr_full <= 1e-14 and rep.rel_resid <= 1e-15
    assert np.linalg.norm(state.X - Q[:, :3]) <= 1e-14


def test_one_step_respects_contraction_bound(separated):
    A, Q, lam = separated
    X0, err0 = perturb_basis(Q[:, :3], 1e-7, seed=1)
    cfg = RefineConfig(k=3)
    state, _ = refine_step(A, RefineState(X0), cfg, cfg.resolve_delta(A), 4.0)
    for j in range(3):
        e1 = principal_angle_sin(state.X[:, [j]], Q[:, [j]])
        # the bound is in terms of ||E||; 10 * err0 is a generous stand-in
        bound = contraction_bound(lam, 3, j, 10 * err0, A.norm_inf())
        assert e1 <= bound * np.linalg.norm(X0 - Q[:, :3]) * 1.01


def test_run_converges_and_records_history(separated, tmp_path):
    A, Q, _ = separated
    X0, _ = perturb_basis(Q[:, :3], 1e-6, seed=2)
    out = run(A, X0, RefineConfig(k=3, corr_tol=1e-14))
    assert out.status is Status.CONVERGED and out.exit_code == 0
    assert out.rel_resid <= 1e-14
    assert principal_angle_sin(out.X, Q[:, :3]) <= 1e-13
    assert np.allclose(out.dtilde, [4.0, -3.0, 2.0], atol=1e-14)
    corr = [r.corr_k for r in out.history]
    assert corr[-1] < corr[0]
    write_history_csv(tmp_path / "h.csv", out.history)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == ",".join(HISTORY_HEADER) and len(lines) == out.iterations + 1
    doc = json.loads(out.to_json(tmp_path / "o.json"))
    assert doc["status"] == "converged" and len(doc["history"]) == out.iterations


def test_residual_stop(separated):
    A, Q, _ = separated
    X0, _ = perturb_basis(Q[:, :3], 1e-6, seed=2)
    out = run(A, X0, RefineConfig(k=3, corr_tol=1e-300, resid_tol=1e-12))
    assert out.status is Status.CONVERGED
    assert out.history[-1].rel_resid <= 1e-12 < out.history[-2].rel_resid


def test_max_iter_exit_code(separated):
    A, Q, _ = separated
    X0, _ = perturb_basis(Q[:, :3], 1e-3, seed=2)
    out = run(A, X0, RefineConfig(k=3, corr_tol=1e-300, max_iter=2))
    assert out.status is Status.MAX_ITER and out.exit_code == 3 and out.iterations == 2


def test_identity_start_uses_fallback_once():
    lam = np.concatenate([[3.0, 2.0], np.linspace(1.0, 0.1, 8)])
    A = DenseSym(np.diag(lam))
    out = run(A, np.eye(10, 2), RefineConfig(k=2, corr_tol=1e-14))
    assert out.fallback_used and out.history[0].fallback
    assert not any(r.fallback for r in out.history[1:])
    assert out.status is Status.CONVERGED
    assert np.allclose(np.abs(out.X), np.eye(10, 2), atol=1e-15)


def test_k_smaller_than_K(separated):
    A, Q, _ = separated
    X0, _ = perturb_basis(Q[:, :3], 1e-6, seed=4)
    out = run(A, X0, RefineConfig(k=2, K=3, corr_tol=1e-13))
    assert out.status is Status.CONVERGED
    assert principal_angle_sin(out.X[:, :2], Q[:, :2]) < 1e-12


def test_clustered_plain_diverges_and_auto_recovers():
    A, Q = _clustered()
    X0, _ = perturb_basis(Q[:, :5], 1e-4, seed=0)
    plain = run(A, X0, RefineConfig(k=5, max_iter=200))
    assert plain.status is Status.DIVERGED and plain.exit_code == 4
    assert "grew" in plain.message
    auto = run(A, X0, RefineConfig(k=5, max_iter=200, preprocess="auto", beta="zero"))
    assert auto.status is Status.CONVERGED and auto.restarts == 1 and auto.preprocessed
    # corr_tol defaults to 1e-8, so the subspace is accurate to about that level
    assert principal_angle_sin(auto.X, Q[:, :5]) < 1e-7


def test_delta_default():
    A, _ = _clustered()
    cfg = RefineConfig(k=1)
    assert cfg.resolve_delta(A) == pytest.approx(10 * A.norm_inf() * UNIT_ROUNDOFF)
    assert RefineConfig(k=1, delta=0.5).resolve_delta(A) == 0.5


@pytest.mark.parametrize(
    "kwargs",
    [dict(k=0), dict(k=3, K=2), dict(k=1, beta="half"), dict(k=1, preprocess="on"),
     dict(k=1, corr_tol=0.0), dict(k=1, max_iter=0), dict(k=1, delta=-1.0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RefineConfig(**kwargs)


def test_run_input_checks(separated):
    A, Q, _ = separated
    with pytest.raises(ValueError):
        run(A, Q[:, :2], RefineConfig(k=3))


def test_residual_helper(separated):
    A, Q, lam = separated
    rel, per = residual(A, Q[:, :2], lam[:2], 4.0)
    assert rel < 1e-15 and per.shape == (2,)
    with pytest.raises(ValueError):
        residual(A, Q[:, :2], lam[:2], 0.0)


def test_callback_sees_every_step(separated):
    A, Q, _ = separated
    seen = []
    X0, _ = perturb_basis(Q[:, :3], 1e-6, seed=2)
    out = run(A, X0, RefineConfig(k=3), callback=lambda rep, X: seen.append(rep.iter))
    assert seen == list(range(1, out.iterations + 1))


def test_deterministic(separated):
    A, Q, _ = separated
    X0 = Q[:, :3] + 1e-5 * make_rng(9).standard_normal((60, 3))
    a = run(A, X0, RefineConfig(k=3))
    b = run(A, X0, RefineConfig(k=3))
    assert np.array_equal(a.X, b.X)
    assert [r.csv_row() for r in a.history] == [r.csv_row() for r in b.history]


def test_roundoff_noise_is_not_divergence(separated):
    A, Q, _ = separated
    # at the fixed point the correction norm only fluctuates at roundoff level
    out = run(A, Q[:, :3], RefineConfig(k=3, corr_tol=1e-300, max_iter=60))
    assert out.status is Status.MAX_ITER
    assert max(r.corr_full for r in out.history) < 1e-13
    strict = run(A, Q[:, :3], RefineConfig(k=3, corr_tol=1e-300, max_iter=60, growth_floor=0.0, growth_factor=1.0001))
    assert strict.status is Status.DIVERGED


@pytest.mark.parametrize("t", [0.1, 0.01, 0.001])
def test_correction_against_brute_force(t):
    # A = diag(4, 2, 1), exact eigenvector e1.  E_L = H^T e1 - e1 is the
    # correction that would land exactly on e1 with the same factor H.
    A = DenseSym(np.diag([4.0, 2.0, 1.0]))
    x = np.array([1.0, t, t])
    X = (x / np.linalg.norm(x))[:, None]
    from eigrefine.wy import apply_ht, compact_wy

    F = compact_wy(X)
    W = A.apply(X)
    d = np.array([rayleigh(X, W)])
    V = apply_ht(F, W - X * d)
    Et, _ = correction_matrix(V, np.array([1.0]), d, 1e-15, beta="zero")
    EL = apply_ht(F, np.eye(3, 1)) - np.eye(3, 1)
    diff, size = np.linalg.norm(Et - EL), np.linalg.norm(EL)
    if t == 0.1:
        assert diff <= 50 * size**2
    # the lower rows are only matched up to the factor lambda_i / lambda_1,
    # so the gap shrinks linearly, at about 0.4 ||E_L|| here
    assert 0.35 * size <= diff <= 0.45 * size
