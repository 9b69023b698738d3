import numpy as np
import pytest
from numpy.testing import assert_allclose

from swarmlift.attitude import IDENTITY_QUAT, quat_from_axis_angle, quat_to_rotmat
from swarmlift.errors import DimensionMismatch, IndexOutOfRange
from swarmlift.mav import GRAVITY
from swarmlift.payload import (
    PayloadParams,
    SystemInertia,
    SystemState,
    agent_kinematics,
    all_agent_kinematics,
    joint_interaction_force,
    payload_dynamics,
    regular_polygon_attachments,
    system_mass_inertia,
    total_agent_wrench,
)


def beam_params(height=0.0):
    return PayloadParams(
        m_p=1.8,
        J_p=np.array([0.01, 0.3375, 0.3375]),
        attachments=regular_polygon_attachments(2, side=1.5, height=height),
    )


def rest_state(params):
    n = params.n_agents
    return SystemState(np.zeros(3), np.zeros(3), IDENTITY_QUAT.copy(),
                       np.zeros(3), np.zeros((n, 3)), np.zeros((n, 3)))


def test_polygon_generator():
    r2 = regular_polygon_attachments(2, side=1.5, height=0.0)
    assert_allclose(r2, [[0.75, 0, 0], [-0.75, 0, 0]])
    r5 = regular_polygon_attachments(5, side=1.2)
    # side length check between consecutive vertices
    d = np.linalg.norm(r5[0] - r5[1])
    assert_allclose(d, 1.2, rtol=1e-12)
    assert_allclose(r5[:, 2], 0.15)
    # centroid at payload origin (balanced attachment set)
    assert_allclose(r5[:, :2].mean(axis=0), [0, 0], atol=1e-15)


def test_mass_inertia_no_agents_vs_payload_only():
    p = PayloadParams(m_p=1.5, J_p=[0.1, 0.1, 0.2], attachments=[[0.0, 0.0, 0.0]])
    si = system_mass_inertia(p, [0.0])
    assert si.m_sys == 1.5
    assert_allclose(si.J_sys, np.diag([0.1, 0.1, 0.2]))


def test_mass_nominal_value():
    # nominal analysis payload: m_p = 1.5 * max payload of one agent (1.0 kg)
    m_bar = 1.0
    p = PayloadParams(m_p=1.5 * m_bar, J_p=[0.1, 0.1, 0.2],
                      attachments=regular_polygon_attachments(3, 1.2, 0.0))
    si = system_mass_inertia(p, [3.5, 3.5, 3.5])
    assert_allclose(si.m_sys, 1.5 + 3 * 3.5)


def test_inertia_point_mass_sum():
    # brute-force oracle: three agents at radius 0.7, J_zz gains 3 m r^2
    r = 0.7
    ang = 2 * np.pi * np.arange(3) / 3
    att = np.stack([r * np.cos(ang), r * np.sin(ang), np.zeros(3)], axis=1)
    p = PayloadParams(m_p=2.46, J_p=[0.2, 0.2, 0.4], attachments=att)
    si = system_mass_inertia(p, [3.5] * 3)
    oracle = np.diag([0.2, 0.2, 0.4]).astype(float)
    for m_i, ri in zip([3.5] * 3, att):
        oracle += m_i * (np.dot(ri, ri) * np.eye(3) - np.outer(ri, ri))
    assert_allclose(si.J_sys, oracle, rtol=1e-12)
    assert_allclose(si.J_sys[2, 2], 0.4 + 3 * 3.5 * 0.49, rtol=1e-12)


def test_mass_inertia_dim_mismatch():
    p = beam_params()
    with pytest.raises(DimensionMismatch):
        system_mass_inertia(p, [3.5])


def test_kinematics_no_rotation():
    p = beam_params()
    st = rest_state(p)
    st.v_WP = np.array([0.3, -0.1, 0.0])
    for i in range(2):
        pi, vi, ai = agent_kinematics(st, i, np.zeros(3), np.array([0.1, 0, 0]),
                                      attachments=p.attachments)
        assert_allclose(pi, p.attachments[i])
        assert_allclose(vi, st.v_WP)
        assert_allclose(ai, [0.1, 0, 0])


def test_kinematics_pure_spin():
    p = PayloadParams(m_p=1.0, J_p=[0.1, 0.1, 0.1],
                      attachments=[[1.0, 0.0, 0.0]])
    st = rest_state(p)
    st.omega_P = np.array([0.0, 0.0, 1.0])
    pi, vi, ai = agent_kinematics(st, 0, np.zeros(3), np.zeros(3),
                                  attachments=p.attachments)
    assert_allclose(vi, [0.0, 1.0, 0.0], atol=1e-15)
    assert_allclose(ai, [-1.0, 0.0, 0.0], atol=1e-15)  # centripetal


def test_kinematics_index_range():
    p = beam_params()
    with pytest.raises(IndexOutOfRange):
        agent_kinematics(rest_state(p), 5, attachments=p.attachments)


def test_kinematics_finite_difference():
    # v_i matches d(p_i)/dt along a simulated rigid trajectory
    p = beam_params(height=0.15)
    dt = 1e-6
    q = quat_from_axis_angle([0.2, 0.5, 1.0], 0.4)
    st = SystemState(np.array([0.5, 0.2, 1.0]), np.array([0.1, -0.2, 0.05]), q,
                     np.array([0.3, -0.1, 0.4]), np.zeros((2, 3)), np.zeros((2, 3)))
    p0, v0, _ = all_agent_kinematics(st.p_WP, st.v_WP, st.R_WP, st.omega_P,
                                     p.attachments)
    # advance the rigid motion by dt
    from swarmlift.attitude import quat_integrate
    st2 = SystemState(st.p_WP + dt * st.v_WP, st.v_WP,
                      quat_integrate(st.q_WP, st.omega_P, dt), st.omega_P,
                      st.agent_eta, st.agent_eta_dot)
    p1, _, _ = all_agent_kinematics(st2.p_WP, st2.v_WP, st2.R_WP, st2.omega_P,
                                    p.attachments)
    fd = (p1 - p0) / dt
    assert np.max(np.abs(fd - v0)) < 1e-5


def test_total_wrench_zero_and_symmetry():
    p = beam_params()
    F, M = total_agent_wrench(np.zeros((2, 3)), p)
    assert_allclose(F, np.zeros(3))
    assert_allclose(M, np.zeros(3))
    F, M = total_agent_wrench([[0, 0, 10.0], [0, 0, 10.0]], p)
    assert_allclose(F, [0, 0, 20.0])
    assert_allclose(M, np.zeros(3), atol=1e-12)


def test_total_wrench_cross_product_oracle():
    p = beam_params()  # attachments at (+-0.75, 0, 0)
    F, M = total_agent_wrench([[0, 0, 10.0], [0, 0, 12.0]], p)
    oracle = np.cross([0.75, 0, 0], [0, 0, 10.0]) + np.cross([-0.75, 0, 0], [0, 0, 12.0])
    assert_allclose(M, oracle, atol=1e-12)
    assert_allclose(M, [0.0, 1.5, 0.0], atol=1e-12)


def test_payload_dynamics_static_hover():
    p = beam_params()
    si = system_mass_inertia(p, [3.5, 3.5])
    F_agents = np.array([0, 0, si.m_sys * GRAVITY])
    v_dot, w_dot = payload_dynamics(np.eye(3), np.zeros(3), np.zeros(3),
                                    F_agents, np.zeros(3), si, p)
    assert_allclose(v_dot, np.zeros(3), atol=1e-12)
    assert_allclose(w_dot, np.zeros(3), atol=1e-12)


def test_payload_dynamics_thrust_excess():
    # 1 N above hover on m_sys = 8.8 kg (2 x 3.5 + 1.8 beam)
    p = beam_params()
    si = system_mass_inertia(p, [3.5, 3.5])
    assert_allclose(si.m_sys, 8.8)
    F_agents = np.array([0, 0, si.m_sys * GRAVITY + 1.0])
    v_dot, _ = payload_dynamics(np.eye(3), np.zeros(3), np.zeros(3),
                                F_agents, np.zeros(3), si, p)
    assert_allclose(v_dot, [0, 0, 1.0 / 8.8], atol=1e-12)


def test_payload_dynamics_torque_step():
    p = beam_params()
    si = system_mass_inertia(p, [3.5, 3.5])
    _, w_dot = payload_dynamics(np.eye(3), np.zeros(3), np.zeros(3),
                                np.zeros(3), np.array([0, 0, 0.5]), si, p)
    assert_allclose(w_dot, [0, 0, 0.5 / si.J_sys[2, 2]], atol=1e-15)


def test_joint_force_free_hover():
    a = np.zeros(3)
    F_prop = np.array([0, 0, 3.5 * GRAVITY])
    assert_allclose(joint_interaction_force(a, F_prop, 3.5), np.zeros(3), atol=1e-12)


def test_joint_force_static_share():
    # static carry: each of N agents lifts its own weight plus m_p g / N
    m_p, N, m_i = 1.8, 2, 3.5
    F_prop = np.array([0, 0, m_i * GRAVITY + m_p * GRAVITY / N])
    F_int = joint_interaction_force(np.zeros(3), F_prop, m_i)
    assert_allclose(F_int, [0, 0, -m_p * GRAVITY / N], atol=1e-12)


def test_joint_force_newton_closure():
    # sum of joint forces balances the payload's own Newton law, exact in
    # the composite-CoM frame even with elevated attachments
    from swarmlift.payload import com_system

    p = beam_params(height=0.15)
    cs = com_system(p, [3.5, 3.5])
    si = SystemInertia(m_sys=cs.m_sys, J_sys=cs.J_sys)
    rng = np.random.default_rng(0)
    R = quat_to_rotmat(quat_from_axis_angle(rng.normal(size=3), 0.2))
    v_WP = rng.normal(size=3) * 0.2
    omega = rng.normal(size=3) * 0.3
    forces_w = rng.normal(size=(2, 3)) * 2.0 + np.array([0, 0, cs.m_sys * GRAVITY / 2])
    F_agents = R.T @ forces_w.sum(axis=0)
    M_agents = np.cross(cs.attachments, forces_w @ R).sum(axis=0)
    v_dot, w_dot = payload_dynamics(R, v_WP, omega, F_agents, M_agents, si, p)
    _, _, a = all_agent_kinematics(np.zeros(3), v_WP, R, omega, cs.attachments,
                                   omega_dot=w_dot, v_dot=v_dot)
    F_int = np.array([
        joint_interaction_force(a[i], forces_w[i], 3.5) for i in range(2)])
    # payload CoG acceleration from the rigid kinematics about the CoM
    a_pc = v_dot + R @ (np.cross(w_dot, cs.r_payload_cog)
                        + np.cross(omega, np.cross(omega, cs.r_payload_cog)))
    residual = F_int.sum(axis=0) + p.m_p * (a_pc + GRAVITY * np.array([0, 0, 1]))
    assert np.max(np.abs(residual)) < 1e-9


def test_com_system_balanced_case_matches_spec_formula():
    from swarmlift.payload import com_system

    p = beam_params(height=0.0)
    cs = com_system(p, [3.5, 3.5])
    si = system_mass_inertia(p, [3.5, 3.5])
    assert_allclose(cs.J_sys, si.J_sys, rtol=1e-12)
    assert_allclose(cs.attachments, p.attachments)
    assert_allclose(cs.r_payload_cog, np.zeros(3))
