import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import multivariate_normal

from acctrack.core import TrackerConfig, accel_to_internal, speed_to_internal
from acctrack.kalman import (DegenerateCovarianceError, KalmanState, Motion, cost_at_mahalanobis,
                             initial_covariance, innovation, log_likelihood, log_likelihood_matrix,
                             make_model, model_from_config, pair_cost, predict, predict_many, update,
                             update_many)
from oracles import block_diag_psd


def random_psd(rng, dim, scale=1.0):
    A = rng.normal(size=(dim, dim)) * scale
    return A @ A.T + 1e-3 * scale ** 2 * np.eye(dim)


def test_predict_example():
    m = make_model(0.04, accel_to_internal(50.0), 10.0)
    s = np.array([1000.0, speed_to_internal(2.0), accel_to_internal(10.0), 0, 0, 0])
    out = predict(KalmanState(s, np.eye(6)), m)
    assert out.s[0] == pytest.approx(1088.0, rel=1e-12)
    assert out.s[1] == pytest.approx(speed_to_internal(2.4), rel=1e-12)
    assert out.s[2] == pytest.approx(accel_to_internal(10.0), rel=1e-12)


def test_predict_zero_state_and_linearity(rng):
    m = make_model(0.03, 5e4, 10.0)
    P = random_psd(rng, 6)
    out = predict(KalmanState(np.zeros(6), P), m)
    np.testing.assert_array_equal(out.s, np.zeros(6))
    np.testing.assert_allclose(out.P, m.F @ P @ m.F.T + m.Q, rtol=1e-14)


def test_zero_sigma_a_removes_process_noise(rng):
    m = make_model(0.04, 0.0, 10.0)
    P = random_psd(rng, 6)
    out = predict(KalmanState(np.ones(6), P), m)
    np.testing.assert_array_equal(out.P, m.F @ P @ m.F.T)


def test_model_structure():
    dt, sa = 0.04, 5e4
    m = make_model(dt, sa, 10.0)
    g = np.array([dt * dt / 2, dt, 1.0])
    np.testing.assert_allclose(m.Q[:3, :3], np.outer(g, g) * sa ** 2)
    np.testing.assert_array_equal(m.Q[:3, 3:], 0.0)
    np.testing.assert_array_equal(m.H, [[1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0]])
    np.testing.assert_array_equal(m.R, 100.0 * np.eye(2))
    assert np.all(np.linalg.eigvalsh(m.Q) >= -1e-9 * np.trace(m.Q))
    cv = make_model(dt, sa, 10.0, Motion.const_vel)
    assert cv.dim == 4 and cv.acc_idx is None
    np.testing.assert_allclose(cv.Q[:2, :2], np.outer(g[:2], g[:2]) * sa ** 2)


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_transition_semigroup(dt1, dt2):
    F = lambda dt: make_model(dt, 1.0, 1.0).F
    np.testing.assert_allclose(F(dt1) @ F(dt2), F(dt1 + dt2), rtol=1e-12, atol=1e-15)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4),
       st.floats(-1e5, 1e5), st.floats(-1e5, 1e5), st.floats(1e-3, 0.2), st.integers(1, 20))
def test_predict_matches_quadratic_kinematics(x0, v0, a, y0, vy0, dt, k):
    m = make_model(dt, 0.0, 1.0)
    st_ = KalmanState(np.array([x0, v0, a, y0, vy0, -a]), np.eye(6))
    for _ in range(k):
        st_ = predict(st_, m)
    t = k * dt
    x = x0 + v0 * t + 0.5 * a * t * t
    assert st_.s[0] == pytest.approx(x, rel=1e-9, abs=1e-9 * (abs(x0) + abs(v0 * t) + abs(a * t * t) + 1))
    assert st_.s[1] == pytest.approx(v0 + a * t, rel=1e-9, abs=1e-9 * (abs(v0) + abs(a * t) + 1))


def test_pair_cost_examples():
    m = make_model(0.04, 1.0, 1.0)
    # zero state covariance makes Σ = R = I
    pred = KalmanState(np.zeros(6), np.zeros((6, 6)))
    assert pair_cost(pred, m, (0.0, 0.0)) == pytest.approx(2 * math.pi, rel=1e-14)
    costs = [pair_cost(pred, m, (d, 0.0)) for d in (0.0, 0.5, 1.0, 2.0, 3.0)]
    assert all(a < b for a, b in zip(costs, costs[1:]))
    assert costs[3] == pytest.approx(2 * math.pi * math.exp(2.0), rel=1e-12)


def test_pair_cost_clamped():
    m = make_model(0.04, 1.0, 1.0)
    pred = KalmanState(np.zeros(6), np.zeros((6, 6)))
    assert pair_cost(pred, m, (1e4, 0.0)) == 1e300


def test_pair_cost_matches_scipy_pdf_oracle(rng):
    for _ in range(1000):
        dt = rng.uniform(0.01, 0.1)
        m = make_model(dt, rng.uniform(1e3, 1e5), rng.uniform(1.0, 20.0))
        s = rng.normal(0, 500, 6)
        pred = predict(KalmanState(s, block_diag_psd(rng, 3, [10.0, 1e3, 1e4])), m)
        mu, sigma = innovation(pred, m)
        z = mu + rng.multivariate_normal(np.zeros(2), sigma) * rng.uniform(0, 2.5)
        pdf = multivariate_normal(mean=mu, cov=sigma).pdf(z)
        assert pair_cost(pred, m, z) == pytest.approx(1.0 / pdf, rel=1e-10)


def test_degenerate_covariance_raises():
    m = make_model(0.04, 0.0, 1e-4)
    P = np.diag([1e10, 0, 0, 0, 0, 0]).astype(float)
    pred = KalmanState(np.zeros(6), P)
    with pytest.raises(DegenerateCovarianceError):
        pair_cost(pred, m, (0.0, 0.0))
    with pytest.raises(DegenerateCovarianceError):
        update(pred, m, (0.0, 0.0))
    with pytest.raises(DegenerateCovarianceError):
        log_likelihood_matrix(P[None], P[None] * 0 + P, m, np.zeros((1, 2)))


@given(st.floats(-1e5, 1e5), st.floats(-1e5, 1e5), st.integers(0, 2 ** 32 - 1))
def test_pair_cost_translation_invariant(tx, ty, seed):
    rng = np.random.default_rng(seed)
    m = make_model(0.04, 5e4, 10.0)
    pred = KalmanState(rng.normal(0, 100, 6), block_diag_psd(rng, 3, [10.0, 1e3, 1e4]))
    z = rng.normal(0, 100, 2)
    shifted = pred.s.copy()
    shifted[[0, 3]] += (tx, ty)
    a = pair_cost(pred, m, z)
    b = pair_cost(KalmanState(shifted, pred.P), m, z + (tx, ty))
    assert b == pytest.approx(a, rel=1e-6)


@given(st.floats(0.1, 100.0), st.integers(0, 2 ** 32 - 1))
def test_cost_ordering_scale_invariant(alpha, seed):
    rng = np.random.default_rng(seed)
    m1 = make_model(0.04, 0.0, 10.0)
    m2 = make_model(0.04, 0.0, 10.0 * alpha)
    P = block_diag_psd(rng, 3, [10.0, 1e3, 1e4])
    s = rng.normal(0, 100, 6)
    Z = rng.normal(0, 60, (5, 2))
    c1 = [pair_cost(KalmanState(s, P), m1, z) for z in Z]
    c2 = [pair_cost(KalmanState(alpha * s, alpha ** 2 * P), m2, alpha * z) for z in Z]
    assert list(np.argsort(c1, kind="stable")) == list(np.argsort(c2, kind="stable"))


def test_update_limits():
    m = make_model(0.04, 5e4, 1e-6)
    pred = predict(KalmanState(np.zeros(6), initial_covariance(m, 2e4)), m)
    out = update(pred, m, (12.0, -7.0))
    assert out.s[0] == pytest.approx(12.0, abs=1e-3) and out.s[3] == pytest.approx(-7.0, abs=1e-3)

    m = make_model(0.04, 5e4, 10.0)
    pred = predict(KalmanState(np.arange(6.0), initial_covariance(m, 2e4)), m)
    mu, _ = innovation(pred, m)
    out = update(pred, m, mu)
    np.testing.assert_allclose(out.s[[0, 3]], pred.s[[0, 3]])
    assert np.trace(out.P) <= np.trace(pred.P)


@given(st.integers(0, 2 ** 32 - 1))
def test_update_position_between_prediction_and_measurement(seed):
    rng = np.random.default_rng(seed)
    m = make_model(rng.uniform(0.01, 0.1), rng.uniform(1e3, 1e5), rng.uniform(1, 20))
    pred = predict(KalmanState(rng.normal(0, 100, 6), block_diag_psd(rng, 3, [10.0, 1e3, 1e4])), m)
    mu, _ = innovation(pred, m)
    z = mu + rng.normal(0, 50, 2)
    out = update(pred, m, z)
    for c, i in enumerate((0, 3)):
        lo, hi = sorted((mu[c], z[c]))
        assert lo - 1e-9 <= out.s[i] <= hi + 1e-9


def _assert_sym_psd(P):
    np.testing.assert_allclose(P, P.T, rtol=0, atol=1e-12 * np.abs(P).max())
    assert np.linalg.eigvalsh(P).min() >= -1e-9 * np.trace(P)


@pytest.mark.parametrize("motion", list(Motion))
def test_covariance_stays_symmetric_psd(rng, motion):
    m = make_model(0.04, 5e4, 10.0, motion)
    state = KalmanState(np.zeros(m.dim), initial_covariance(m, 2e4))
    for _ in range(500):
        state = predict(state, m)
        _assert_sym_psd(state.P)
        mu, sigma = innovation(state, m)
        state = update(state, m, rng.multivariate_normal(mu, sigma))
        _assert_sym_psd(state.P)


def test_noiseless_quadratic_recovered_exactly():
    dt = 0.04
    m = make_model(dt, 0.0, 1e-6)
    truth = lambda t: np.array([100 + 3000 * t + 0.5 * 4e4 * t * t, 3000 + 4e4 * t, 4e4,
                                -50 + 1000 * t - 0.5 * 2e4 * t * t, 1000 - 2e4 * t, -2e4])
    state = KalmanState(truth(0.0), initial_covariance(m, 2e4))
    for k in range(1, 30):
        state = update(predict(state, m), m, truth(k * dt)[[0, 3]])
        np.testing.assert_allclose(state.s, truth(k * dt), rtol=1e-9)


def test_batched_helpers_match_scalar(rng):
    for motion in Motion:
        m = make_model(0.04, 5e4, 10.0, motion)
        b = m.block
        S = rng.normal(0, 100, (4, m.dim))
        P = np.array([block_diag_psd(rng, b, [10.0, 1e3, 1e4][:b]) for _ in range(4)])
        Sp, Pp = predict_many(S, P, m)
        Z = rng.normal(0, 100, (3, 2))
        ll, logdet = log_likelihood_matrix(Sp, Pp, m, Z)
        for i in range(4):
            one = predict(KalmanState(S[i], P[i]), m)
            np.testing.assert_allclose(Sp[i], one.s, rtol=1e-12)
            np.testing.assert_allclose(Pp[i], one.P, rtol=1e-12)
            for j in range(3):
                assert ll[i, j] == pytest.approx(log_likelihood(one, m, Z[j]), rel=1e-10)
            d3 = cost_at_mahalanobis(logdet[i], 3.0)
            _, sigma = innovation(one, m)
            assert d3 == pytest.approx(2 * math.pi * math.sqrt(np.linalg.det(sigma)) * math.exp(4.5), rel=1e-10)
        Su, Pu = update_many(Sp[:3], Pp[:3], m, Z)
        for i in range(3):
            one = update(KalmanState(Sp[i], Pp[i]), m, Z[i])
            np.testing.assert_allclose(Su[i], one.s, rtol=1e-10)
            np.testing.assert_allclose(Pu[i], one.P, rtol=1e-9)


def test_model_from_config_units():
    m = model_from_config(TrackerConfig(sigma_a=50.0, r_std=10.0), 0.04)
    assert m.sigma_a == 50000.0 and m.r_std == 10.0
    P0 = initial_covariance(m, 2e4)
    np.testing.assert_allclose(np.diag(P0), [100.0, (2e4 / 3) ** 2, 5e4 ** 2] * 2)
