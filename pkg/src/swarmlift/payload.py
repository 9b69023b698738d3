"""Rigid payload coupled to N agents through ideal spherical joints.

The joints transmit force but no torque, so agent attitude dynamics are
decoupled from the payload while agent translational states are constrained
to the payload kinematics. Agents enter the system inertia as point masses
at their attachment points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attitude import quat_to_rotmat, skew
from .errors import DimensionMismatch, IndexOutOfRange
from .mav import EZ, GRAVITY


@dataclass
class PayloadParams:
    m_p: float
    J_p: np.ndarray
    attachments: np.ndarray  # (N, 3) payload-frame offsets r_PBi
    R_PB: np.ndarray | None = None  # (N, 3, 3); identity when omitted
    drag_F: np.ndarray = field(default_factory=lambda: np.zeros(3))
    drag_M: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.J_p = np.asarray(self.J_p, dtype=float)
        self.attachments = np.atleast_2d(np.asarray(self.attachments, dtype=float))
        self.drag_F = np.asarray(self.drag_F, dtype=float)
        self.drag_M = np.asarray(self.drag_M, dtype=float)
        if self.m_p <= 0 or np.any(self.J_p <= 0):
            raise ValueError("payload mass and inertia must be positive")
        if self.attachments.shape[0] < 1 or self.attachments.shape[1] != 3:
            raise ValueError("need at least one (N, 3) attachment")
        if self.R_PB is None:
            self.R_PB = np.broadcast_to(np.eye(3), (self.n_agents, 3, 3)).copy()
        else:
            self.R_PB = np.asarray(self.R_PB, dtype=float)

    @property
    def n_agents(self) -> int:
        return self.attachments.shape[0]


@dataclass
class SystemState:
    """Payload pose/twist plus per-agent attitude; agent translational
    states are always derived from the payload kinematics."""

    p_WP: np.ndarray
    v_WP: np.ndarray
    q_WP: np.ndarray
    omega_P: np.ndarray  # payload frame
    agent_eta: np.ndarray  # (N, 3) Z-Y-X angles
    agent_eta_dot: np.ndarray  # (N, 3)

    @property
    def R_WP(self) -> np.ndarray:
        return quat_to_rotmat(self.q_WP)


@dataclass(frozen=True)
class SystemInertia:
    m_sys: float
    J_sys: np.ndarray  # (3, 3), payload frame


def regular_polygon_attachments(n: int, side: float = 1.2, height: float = 0.0):
    """Attachment offsets for n agents on a regular n-gon of the given side
    length; two agents degenerate to a beam of length `side`. A nonzero
    height models gripper stems standing above the payload plane (adds a
    roll/pitch pendulum mode); the joints sit in the payload plane by
    default."""
    if n < 1:
        raise ValueError("need at least one agent")
    if n == 1:
        return np.array([[0.0, 0.0, height]])
    if n == 2:
        return np.array([[side / 2, 0.0, height], [-side / 2, 0.0, height]])
    radius = side / (2.0 * np.sin(np.pi / n))
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(ang), radius * np.sin(ang),
                     np.full(n, height)], axis=1)


def polygon_payload_inertia(m_p: float, n: int, side: float):
    """Disc-approximation inertia of a regular-polygon plate payload."""
    radius = side / 2 if n == 2 else side / (2.0 * np.sin(np.pi / n))
    jzz = 0.5 * m_p * radius**2
    jxx = 0.25 * m_p * radius**2
    return np.array([max(jxx, 1e-3), max(jxx, 1e-3), max(jzz, 1e-3)])


def system_mass_inertia(params: PayloadParams, agent_masses) -> SystemInertia:
    """Total mass plus payload-frame inertia with agents as point masses."""
    agent_masses = np.asarray(agent_masses, dtype=float)
    if agent_masses.shape != (params.n_agents,):
        raise DimensionMismatch(
            f"expected {params.n_agents} agent masses, got {agent_masses.shape}")
    m_sys = params.m_p + float(np.sum(agent_masses))
    J = np.diag(params.J_p).astype(float)
    for m_i, r in zip(agent_masses, params.attachments):
        J += m_i * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
    return SystemInertia(m_sys=m_sys, J_sys=J)


def agent_kinematics(state: SystemState, i: int, omega_dot=None, v_dot=None,
                     attachments=None):
    """Constrained position/velocity (and acceleration when the payload
    accelerations are supplied) of agent i in the world frame."""
    r_all = attachments
    if r_all is None:
        raise ValueError("attachments required")
    if not 0 <= i < r_all.shape[0]:
        raise IndexOutOfRange(f"agent index {i} out of range")
    r = r_all[i]
    R = state.R_WP
    w = state.omega_P
    p_i = state.p_WP + R @ r
    v_i = state.v_WP + R @ np.cross(w, r)
    a_i = None
    if omega_dot is not None and v_dot is not None:
        a_i = v_dot + R @ (np.cross(omega_dot, r) + np.cross(w, np.cross(w, r)))
    return p_i, v_i, a_i


def all_agent_kinematics(p_WP, v_WP, R_WP, omega_P, attachments,
                         omega_dot=None, v_dot=None):
    """Vectorized kinematics of every attachment; returns (p, v[, a])
    arrays of shape (N, 3)."""
    r = attachments
    p = p_WP[None, :] + r @ R_WP.T
    v = v_WP[None, :] + np.cross(omega_P[None, :], r) @ R_WP.T
    if omega_dot is None:
        return p, v, None
    a_pf = np.cross(omega_dot[None, :], r) + np.cross(
        omega_P[None, :], np.cross(omega_P[None, :], r))
    a = v_dot[None, :] + a_pf @ R_WP.T
    return p, v, a


def total_agent_wrench(forces_body, params: PayloadParams):
    """Aggregate payload-frame force and torque of per-agent body thrusts."""
    forces_body = np.atleast_2d(np.asarray(forces_body, dtype=float))
    if forces_body.shape != (params.n_agents, 3):
        raise DimensionMismatch(
            f"expected ({params.n_agents}, 3) forces, got {forces_body.shape}")
    F_p = np.einsum("nij,nj->ni", params.R_PB, forces_body)
    F_agents = F_p.sum(axis=0)
    M_agents = np.cross(params.attachments, F_p).sum(axis=0)
    return F_agents, M_agents


def payload_dynamics(R_WP, v_WP, omega_P, F_agents, M_agents,
                     inertia: SystemInertia, params: PayloadParams):
    """Coupled translational/rotational accelerations of the payload.

    F_agents and M_agents are expressed in the payload frame; drag is linear
    in the payload-frame velocity and rate.
    """
    v_pf = R_WP.T @ v_WP
    F_drag = params.drag_F * v_pf
    v_dot = R_WP @ (F_agents - F_drag) / inertia.m_sys - GRAVITY * EZ
    M_drag = params.drag_M * omega_P
    Jw = inertia.J_sys @ omega_P
    omega_dot = np.linalg.solve(
        inertia.J_sys, M_agents - np.cross(omega_P, Jw) - M_drag)
    return v_dot, omega_dot


def joint_interaction_force(a_i, F_applied_i, m_i: float):
    """World-frame force the payload exerts on agent i through the joint,
    closing Newton's law for the agent: m a = F_applied + F_int - m g."""
    return m_i * (np.asarray(a_i) + GRAVITY * EZ) - np.asarray(F_applied_i)


@dataclass(frozen=True)
class ComSystem:
    """Composite-body description about the system center of mass.

    The lumped rigid-body equations are exact only about the composite CoM;
    when attachments are not mass-balanced about the payload CoG (gripper
    stems sit above the plate) everything is shifted there.
    """

    m_sys: float
    J_sys: np.ndarray  # (3, 3) about the composite CoM
    attachments: np.ndarray  # (N, 3) agent offsets from the CoM
    r_payload_cog: np.ndarray  # payload CoG offset from the CoM
    agent_masses: np.ndarray


def com_system(params: PayloadParams, agent_masses) -> ComSystem:
    agent_masses = np.asarray(agent_masses, dtype=float)
    if agent_masses.shape != (params.n_agents,):
        raise DimensionMismatch(
            f"expected {params.n_agents} agent masses, got {agent_masses.shape}")
    m_sys = params.m_p + float(np.sum(agent_masses))
    com = (agent_masses[:, None] * params.attachments).sum(axis=0) / m_sys
    att = params.attachments - com[None, :]
    r_pc = -com
    J = np.diag(params.J_p) + params.m_p * (
        np.dot(r_pc, r_pc) * np.eye(3) - np.outer(r_pc, r_pc))
    for m_i, r in zip(agent_masses, att):
        J += m_i * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
    return ComSystem(m_sys=m_sys, J_sys=J, attachments=att,
                     r_payload_cog=r_pc, agent_masses=agent_masses)
