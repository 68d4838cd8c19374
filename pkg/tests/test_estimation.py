import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from sbw_dob import consistency, dynamics, estimation
from sbw_dob.errors import ConvergenceError, FilterDegenerateError, ParameterError
from sbw_dob.estimation import (FilterBelief, KfModel, NoiseConfig, augmented_kf_model, discretize,
                                ekf_step, kf_correct, kf_predict, riccati_step, steady_state)
from oracles import taylor_expm

GOLDEN = (1 + math.sqrt(5)) / 2


def scalar_model(a=1.0, c=1.0):
    return KfModel(np.array([[a]]), np.zeros((1, 1)), np.array([[c]]), 1.0)


def scalar_noise(q=1.0, r=1.0):
    return NoiseConfig(Q=np.array([[q]]), R=np.array([[r]]))


def test_noise_defaults_and_validation():
    n = NoiseConfig()
    np.testing.assert_allclose(np.diag(n.Q), [1e-7] * 4 + [0.1])
    np.testing.assert_allclose(n.R, 1e-6 * np.eye(2))
    with pytest.raises(ParameterError):
        NoiseConfig(Q=-np.eye(5))
    with pytest.raises(ParameterError):
        NoiseConfig(R=np.zeros((2, 2)))


def test_discretize_zero_dynamics():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    m = discretize(np.zeros((2, 2)), B, 0.01, C=np.eye(2))
    np.testing.assert_array_equal(m.A_d, np.eye(2))
    np.testing.assert_allclose(m.B_d, B * 0.01, rtol=1e-15)


def test_discretize_scalar_analytic():
    m = discretize([[-1.0]], [[1.0]], 1.0, C=[[1.0]])
    assert abs(m.A_d[0, 0] - math.exp(-1)) <= 1e-12
    assert abs(m.B_d[0, 0] - (1 - math.exp(-1))) <= 1e-12


def test_discretize_reference_against_taylor(ref_hw):
    A5, _, _ = dynamics.augmented_linear_matrices(ref_hw)
    m = augmented_kf_model(ref_hw, 0.001)
    ref = taylor_expm(A5 * 0.001)
    assert np.max(np.abs(m.A_d - ref)) < 1e-10


def test_discretize_bad_dt():
    with pytest.raises(ParameterError):
        discretize(np.eye(2), np.ones((2, 1)), 0.0)


def test_kf_predict_examples(ref_hw):
    b = FilterBelief(np.array([1.0, -2.0]), np.eye(2))
    m = KfModel(np.eye(2), np.zeros((2, 1)), np.eye(2))
    out = kf_predict(m, b, [0.0], NoiseConfig(Q=np.zeros((2, 2)), R=np.eye(2)))
    np.testing.assert_array_equal(out.x_hat, b.x_hat)
    np.testing.assert_array_equal(out.P, b.P)
    out = kf_predict(scalar_model(), FilterBelief(np.zeros(1), np.zeros((1, 1))), [0.0], scalar_noise())
    assert out.P[0, 0] == 1.0
    model = augmented_kf_model(ref_hw, 0.001)
    out = kf_predict(model, estimation.initial_belief(), [0.0, 1.0], NoiseConfig())
    # dt/J_m corrected by damping and gear-stiffness terms of the ZOH series
    lin = ref_hw.linear
    dt = 0.001
    series = dt / lin.J_m * (1 - dt * (lin.d_m + lin.d_g) / (2 * lin.J_m) - lin.c_g * dt**2 / (6 * lin.J_m))
    assert out.x_hat[3] == pytest.approx(series, abs=1e-5)
    assert out.x_hat[3] == pytest.approx(model.B_d[3, 1], rel=1e-15)


def test_kf_correct_examples():
    b = FilterBelief(np.array([0.3]), np.array([[1.0]]))
    post, innov, K = kf_correct(scalar_model(), b, [1.3], scalar_noise())
    assert K[0, 0] == pytest.approx(0.5) and post.P[0, 0] == pytest.approx(0.5)
    assert innov[0] == pytest.approx(1.0) and post.x_hat[0] == pytest.approx(0.8)
    # no prior uncertainty: no update
    post, _, K = kf_correct(scalar_model(), FilterBelief(np.array([0.3]), np.zeros((1, 1))), [5.0],
                            scalar_noise())
    assert K[0, 0] == 0.0 and post.x_hat[0] == 0.3
    # zero innovation still shrinks P
    post, innov, _ = kf_correct(scalar_model(), b, [0.3], scalar_noise())
    assert innov[0] == 0.0 and post.x_hat[0] == 0.3 and post.P[0, 0] == pytest.approx(0.5)


def test_kf_correct_degenerate():
    # two identical sensors of one state, negligible noise: S is rank one
    model = KfModel(np.eye(1), np.zeros((1, 1)), np.array([[1.0], [1.0]]))
    noise = NoiseConfig(Q=np.eye(1), R=1e-300 * np.eye(2))
    with pytest.raises(FilterDegenerateError):
        kf_correct(model, FilterBelief(np.zeros(1), np.eye(1)), [0.0, 0.0], noise)


def test_scalar_steady_state_golden_ratio():
    ss = steady_state(scalar_model(), scalar_noise())
    assert abs(ss.P_inf[0, 0] - GOLDEN) <= 1e-9
    assert abs(ss.K_inf[0, 0] - (math.sqrt(5) - 1) / 2) <= 1e-9
    # independent cross-check against scipy's DARE solver
    dare = scipy.linalg.solve_discrete_are(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    assert ss.P_inf[0, 0] == pytest.approx(dare[0, 0], abs=1e-9)


def test_noise_free_stable_steady_state():
    m = KfModel(np.diag([0.5, -0.3]), np.zeros((2, 1)), np.array([[1.0, 1.0]]))
    ss = steady_state(m, NoiseConfig(Q=np.zeros((2, 2)), R=np.eye(1)))
    assert np.abs(ss.P_inf).max() == 0.0 and np.abs(ss.K_inf).max() == 0.0


def test_steady_state_nonconvergence():
    # unstable and unobservable mode: P grows without bound
    m = KfModel(np.diag([2.0, 0.5]), np.zeros((2, 1)), np.array([[0.0, 1.0]]))
    with pytest.raises(ConvergenceError) as ei:
        steady_state(m, NoiseConfig(Q=np.eye(2), R=np.eye(1)), max_iter=50)
    assert ei.value.last is not None and ei.value.iterations == 50


def test_reference_steady_state_matches_dare(ref_hw):
    model = augmented_kf_model(ref_hw, 0.001)
    noise = NoiseConfig()
    ss = steady_state(model, noise)
    dare = scipy.linalg.solve_discrete_are(model.A_d.T, model.C.T, noise.Q, noise.R)
    np.testing.assert_allclose(ss.P_inf, dare, rtol=1e-6, atol=1e-14)


def test_running_gain_converges_from_random_start(ref_hw, rng):
    model = augmented_kf_model(ref_hw, 0.001)
    noise = NoiseConfig()
    ss = steady_state(model, noise)
    M = rng.normal(size=(5, 5))
    P = 1e-2 * (M @ M.T)
    for _ in range(20000):
        P, K = riccati_step(model, P, noise)
    assert np.max(np.abs(K - ss.K_inf)) <= 1e-9


def test_covariance_stays_psd_long_run(ref_hw, rng):
    model = augmented_kf_model(ref_hw, 0.001)
    noise = NoiseConfig()
    b = estimation.initial_belief()
    z = rng.normal(scale=1e-3, size=(100_000, 2))
    worst = np.inf
    for k in range(100_000):
        b = kf_predict(model, b, [b.x_hat[4], 0.0], noise)
        b, _, _ = kf_correct(model, b, z[k], noise)
        if k % 1000 == 0:
            worst = min(worst, np.linalg.eigvalsh(b.P).min() / np.trace(b.P))
            assert np.array_equal(b.P, b.P.T)
    assert b.is_psd()
    assert worst >= -1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_joseph_form_equivalence(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(5, 5))
    P = M @ M.T + 1e-3 * np.eye(5)
    noise = NoiseConfig()
    C = estimation.MEAS_MATRIX
    post, _, K = estimation._correct(C, FilterBelief(np.zeros(5), P), np.zeros(2), noise.R)
    IKC = np.eye(5) - K @ C
    joseph = IKC @ P @ IKC.T + K @ noise.R @ K.T
    assert np.linalg.norm(joseph - post.P) <= 1e-10 * max(1.0, np.linalg.norm(P))


def test_ekf_equilibrium(ref_hw):
    noise = NoiseConfig()
    b = estimation.initial_belief()
    for _ in range(20):
        b, innov, _ = ekf_step(ref_hw, b, [0.0, 0.0], [0.0, 0.0], 0.001, noise)
        assert not innov.any()
    np.testing.assert_array_equal(b.x_hat, np.zeros(5))
    assert b.is_psd()


def test_ekf_matches_kf_when_linearized(ref_hw, rng):
    """With Stribeck replaced by viscous damping the EKF must reproduce the KF."""
    lin = dynamics.linearized_params(ref_hw)
    dt = 0.001
    noise = NoiseConfig()
    model = augmented_kf_model(lin, dt)
    b_kf = estimation.initial_belief()
    b_ekf = b_kf.copy()
    t = np.arange(1000) * dt
    z = np.column_stack([0.05 * np.sin(2 * np.pi * 3 * t), 2 * np.pi * 3 * 0.05 * np.cos(2 * np.pi * 3 * t)])
    z += rng.normal(scale=1e-3, size=z.shape)
    worst = 0.0
    for k in range(1000):
        u = [b_kf.x_hat[4], -0.1 * z[k, 0]]
        b_kf, _, _ = kf_correct(model, kf_predict(model, b_kf, u, noise), z[k], noise)
        b_ekf, _, _ = ekf_step(lin, b_ekf, [b_ekf.x_hat[4], -0.1 * z[k, 0]], z[k], dt, noise)
        worst = max(worst, np.max(np.abs(b_kf.x_hat - b_ekf.x_hat)))
    assert worst <= 1e-6


def test_ekf_analytic_and_fd_agree(ref_hw):
    noise = NoiseConfig()
    b = FilterBelief(np.array([0.1, 1.5, 0.11, 2.0, 0.3]), 1e-3 * np.eye(5))
    fd, _, _ = ekf_step(ref_hw, b, [0.3, 0.0], [0.11, 2.0], 0.001, noise, jacobian="fd")
    an, _, _ = ekf_step(ref_hw, b, [0.3, 0.0], [0.11, 2.0], 0.001, noise, jacobian="analytic")
    np.testing.assert_allclose(fd.x_hat, an.x_hat, atol=1e-9)
    np.testing.assert_allclose(fd.P, an.P, rtol=1e-5, atol=1e-12)


def test_ekf_rejects_bad_args(ref_hw):
    b = estimation.initial_belief()
    with pytest.raises(ParameterError):
        ekf_step(ref_hw, b, [0, 0], [0, 0], 0.0, NoiseConfig())
    with pytest.raises(ParameterError):
        ekf_step(ref_hw, b, [0, 0], [0, 0], 0.001, NoiseConfig(), jacobian="symbolic")


def test_dob_classes_expose_torque(ref_hw):
    for cls in (estimation.KalmanDOB, estimation.ExtendedKalmanDOB):
        dob = cls(ref_hw, 0.001)
        dob.correct([0.0, 0.0])
        for _ in range(5):
            dob.step([dob.torque, 0.0], [0.0, 0.0])
        assert dob.torque == 0.0


@pytest.fixture(scope="module")
def matched_runs(ref_hw):
    model = augmented_kf_model(ref_hw, 0.001)
    noise = NoiseConfig()
    return [consistency.run_matched_linear(model, noise, 20_000, seed=s) for s in range(3)]


def test_nees_consistency(matched_runs):
    # consecutive NEES values are strongly correlated, so the chi-square band
    # is applied to a decimated, approximately independent subsequence
    for run in matched_runs:
        e = consistency.nees(run)[::100]
        lo, hi = consistency.chi2_band(5, e.size)
        assert lo <= e.mean() <= hi


def test_nis_consistency(matched_runs):
    for run in matched_runs:
        e = consistency.nis(run)[::100]
        lo, hi = consistency.chi2_band(2, e.size)
        assert lo <= e.mean() <= hi


def test_innovation_whiteness(matched_runs):
    run = matched_runs[0]
    n = run.innovations.shape[0]
    bound = consistency.whiteness_bound(n)
    for ch in range(2):
        rho = consistency.autocorrelation(run.innovations[:, ch], 20)
        assert np.all(np.abs(rho) <= bound)


def test_chi2_band_contains_dof():
    lo, hi = consistency.chi2_band(5, 200)
    assert lo < 5.0 < hi
