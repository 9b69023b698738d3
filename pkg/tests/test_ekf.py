import numpy as np
from numpy.testing import assert_allclose

from swarmlift import ekf
from swarmlift.identify import fit_first_order_tau, run_force_step
from swarmlift.mav import GRAVITY, MavParams

PARAMS = MavParams()
TS = 0.01


def hover_filter():
    return ekf.ekf_init(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))


def hover_input():
    return (0.0, 0.0, 0.0, PARAMS.m * GRAVITY)


def random_state(rng):
    x = np.zeros(ekf.NX)
    x[ekf.P_SL] = rng.normal(scale=2.0, size=3)
    x[ekf.V_SL] = rng.normal(scale=1.0, size=3)
    x[ekf.ETA_SL] = rng.normal(scale=0.2, size=3)
    x[ekf.W_SL] = rng.normal(scale=0.5, size=3)
    x[ekf.F_SL] = rng.normal(scale=2.0, size=3)
    x[ekf.M_SL] = rng.normal(scale=0.1, size=3)
    return x


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        x = random_state(rng)
        u = (rng.normal(scale=0.1), rng.normal(scale=0.1), 0.0,
             PARAMS.m * GRAVITY + rng.normal(scale=3.0))
        A = ekf.process_jacobian(x, u, PARAMS)
        eps = 1e-6
        A_fd = np.empty_like(A)
        for j in range(ekf.NX):
            dx = np.zeros(ekf.NX)
            dx[j] = eps
            A_fd[:, j] = (ekf.process_rhs(x + dx, u, PARAMS)
                          - ekf.process_rhs(x - dx, u, PARAMS)) / (2 * eps)
        scale = max(1.0, np.abs(A_fd).max())
        worst = max(worst, np.abs(A - A_fd).max() / scale)
    assert worst < 1e-4


def test_predict_hover_fixed_point():
    s = hover_filter()
    Q = ekf.default_ekf_Q(100.0)
    s2 = ekf.ekf_predict(s, hover_input(), Q, TS, PARAMS)
    assert_allclose(s2.x, s.x, atol=1e-12)
    assert np.all(np.diag(s2.P) >= np.diag(s.P) - 1e-15)  # covariance grows


def test_predict_force_feeds_velocity():
    s = hover_filter()
    s.x[ekf.F_SL] = [2.0, 0.0, 0.0]
    s2 = ekf.ekf_predict(s, hover_input(), ekf.default_ekf_Q(), TS, PARAMS)
    assert_allclose(s2.x[3], TS * 2.0 / PARAMS.m, rtol=1e-12)


def test_update_at_predicted_mean():
    s = hover_filter()
    s = ekf.ekf_predict(s, hover_input(), ekf.default_ekf_Q(), TS, PARAMS)
    z = np.concatenate([s.x[ekf.P_SL], s.x[ekf.ETA_SL]])
    s2 = ekf.ekf_update(s, z, ekf.default_ekf_R())
    assert_allclose(s2.x, s.x, atol=1e-12)
    assert np.trace(s2.P) <= np.trace(s.P) + 1e-15


def test_update_infinite_noise_ignores_channel():
    s = hover_filter()
    s = ekf.ekf_predict(s, hover_input(), ekf.default_ekf_Q(), TS, PARAMS)
    R = ekf.default_ekf_R()
    R[0] = 1e12  # x-position channel disabled
    z = np.concatenate([s.x[ekf.P_SL], s.x[ekf.ETA_SL]])
    z[0] += 5.0
    s2 = ekf.ekf_update(s, z, R)
    assert np.max(np.abs(s2.x - s.x)) < 1e-6


def test_covariance_symmetric_psd_through_steps():
    rng = np.random.default_rng(1)
    s = hover_filter()
    Q, R = ekf.default_ekf_Q(), ekf.default_ekf_R()
    for _ in range(300):
        u = (rng.normal(scale=0.05), rng.normal(scale=0.05), 0.0,
             PARAMS.m * GRAVITY + rng.normal())
        s = ekf.ekf_predict(s, u, Q, TS, PARAMS)
        z = np.concatenate([s.x[ekf.P_SL], s.x[ekf.ETA_SL]]) + rng.normal(
            scale=1e-3, size=6)
        s = ekf.ekf_update(s, z, R)
        assert np.max(np.abs(s.P - s.P.T)) < 1e-10
        assert np.linalg.eigvalsh(s.P).min() > -1e-9


def test_closed_loop_force_step_convergence():
    tr = run_force_step(PARAMS, "ekf", magnitude=1.0, t_step=1.0, duration=8.0)
    t, Fx = tr.t, tr.F_hat[:, 0]
    assert abs(Fx[t > 7.0].mean() - 1.0) < 0.05
    tau = fit_first_order_tau(t, Fx, 1.0, t_start=1.0)
    # bracketing the nominal estimator time constant of 0.2 s
    assert 0.1 < tau < 0.4
