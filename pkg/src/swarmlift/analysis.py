"""Nominal coupled closed-loop model for robust tuning.

The model couples the rigid payload (about the composite CoM) to N agents
whose chains are the nominal blocks of the analysis: PD position loop,
first-order world-frame thrust lag, first-order force-estimator lag, and
the engaged admittance law on every slave. The master tracks an external
velocity command through a reference integrator.

Uncertainty enters through normalized injection channels:

* u_mass / y_mass: inverse-system-mass perturbation (payload mass interval),
* u_inertia / y_inertia: payload inertia diagonal perturbation,
* u_mpc_i / y_mpc_i: multiplicative perturbation on each position controller,
* u_att_i / y_att_i: multiplicative perturbation on each thrust lag,
* u_est_j / y_est_j: multiplicative perturbation on each slave estimator.

Two linearization routes exist on purpose: a complex-step Jacobian of the
monolithic nonlinear model (usable at any operating point, in particular
the pre-rolled transport point) and an analytic block assembly wired with
the channel interconnect (rest point). Their agreement pins both down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admittance import AdmittanceParams
from .attitude import quat_integrate, quat_normalize, quat_to_rotmat, rotvec_to_rotmat, skew
from .errors import UnstableOperatingPoint
from .lti import LinearSystem, append, connect, gain_block, integrator
from .mav import EZ, GRAVITY, MavParams, saturate_thrust_command
from .payload import ComSystem, PayloadParams, com_system

TRANSPORT_PREROLL_T = 5.0
TRANSPORT_VELOCITY = np.array([0.5, 0.5, 0.0])


@dataclass
class AnalysisConfig:
    n_agents: int
    tuning_M: float = 8.0
    tuning_C: float = 6.0
    mav: MavParams = field(default_factory=MavParams)
    payload: PayloadParams = None
    adm: AdmittanceParams = None
    mass_uncertainty: float = 0.5  # fraction of nominal payload mass
    inertia_uncertainty: float = 0.1  # fraction of payload inertia diagonal

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need a master and at least one slave")
        if self.payload is None:
            from .payload import polygon_payload_inertia, regular_polygon_attachments

            m_p = 1.5 * self.mav.m_bar
            side = 1.2
            self.payload = PayloadParams(
                m_p=m_p,
                J_p=polygon_payload_inertia(m_p, self.n_agents, side),
                attachments=regular_polygon_attachments(self.n_agents, side))
        if self.adm is None:
            self.adm = AdmittanceParams(
                C=np.array([6.0, 6.0, 120.0]), K=np.array([0.0, 0.0, 400.0]))
        self.adm = self.adm.lateral(self.tuning_M, self.tuning_C)
        self.com: ComSystem = com_system(
            self.payload, np.full(self.n_agents, self.mav.m))
        # equal static share of the payload weight per agent
        self.share = self.payload.m_p * GRAVITY / self.n_agents
        self.F_trim = np.tile(
            np.array([0.0, 0.0, self.mav.m * GRAVITY + self.share]),
            (self.n_agents, 1))
        # the sensed joint force at rest, removed by offset calibration
        self.F_int_trim = np.array([0.0, 0.0, -self.share])
        # slave desired positions / master reference at the attachment layout
        self.engage_points = self.com.attachments.copy()
        # mass channel gain: half-width of the payload mass interval over the
        # nominal system mass
        self.w_mass = self.mass_uncertainty * self.payload.m_p / self.com.m_sys
        # inertia channel gain: relative uncertainty on the diagonal of the
        # total system inertia (agents enter as point masses, so this also
        # covers the attachment-geometry modeling error)
        self.G_inertia = np.linalg.solve(
            self.com.J_sys,
            self.inertia_uncertainty * np.diag(np.diag(self.com.J_sys)))

    @property
    def n_slaves(self) -> int:
        return self.n_agents - 1

    # ---------------------------------------------------------------- sizes
    @property
    def n_states(self) -> int:
        return 15 + 3 * self.n_agents + 9 * self.n_slaves + 1  # q has 4 comps

    @property
    def n_chart_states(self) -> int:
        return 15 + 3 * self.n_agents + 9 * self.n_slaves

    def input_channels(self):
        ch = [("u_mass", 3), ("u_inertia", 3)]
        ch += [(f"u_mpc_{i}", 3) for i in range(self.n_agents)]
        ch += [(f"u_att_{i}", 3) for i in range(self.n_agents)]
        ch += [(f"u_est_{j}", 3) for j in range(1, self.n_agents)]
        ch += [("w", 3)]
        return ch

    def output_channels(self):
        ch = [("y_mass", 3), ("y_inertia", 3)]
        ch += [(f"y_mpc_{i}", 3) for i in range(self.n_agents)]
        ch += [(f"y_att_{i}", 3) for i in range(self.n_agents)]
        ch += [(f"y_est_{j}", 3) for j in range(1, self.n_agents)]
        ch += [(f"z_lat_{i}", 2) for i in range(self.n_agents)]
        ch += [("v_WP", 3), ("p_WP", 3)]
        return ch

    @property
    def n_inputs(self) -> int:
        return sum(s for _, s in self.input_channels())

    @property
    def n_outputs(self) -> int:
        return sum(s for _, s in self.output_channels())


# ------------------------------------------------------------ state packing

def pack_state(cfg: AnalysisConfig, p, v, q, omega, p_ref, F_prop, F_hat,
               z, zdot):
    """Per-slave estimator/admittance blocks stay contiguous so the chart
    state ordering matches the analytic block assembly."""
    parts = [p, v, q, omega, p_ref, np.reshape(F_prop, -1)]
    for j in range(cfg.n_slaves):
        parts += [F_hat[j], z[j], zdot[j]]
    return np.concatenate(parts)


def unpack_state(cfg: AnalysisConfig, x):
    N, S = cfg.n_agents, cfg.n_slaves
    i = 0

    def take(k, shape=None):
        nonlocal i
        out = x[i:i + k]
        i += k
        return out if shape is None else out.reshape(shape)

    p = take(3)
    v = take(3)
    q = take(4)
    omega = take(3)
    p_ref = take(3)
    F_prop = take(3 * N, (N, 3))
    F_hat = np.zeros((S, 3), dtype=x.dtype)
    z = np.zeros((S, 3), dtype=x.dtype)
    zdot = np.zeros((S, 3), dtype=x.dtype)
    for j in range(S):
        F_hat[j] = take(3)
        z[j] = take(3)
        zdot[j] = take(3)
    return p, v, q, omega, p_ref, F_prop, F_hat, z, zdot


def split_inputs(cfg: AnalysisConfig, u):
    N, S = cfg.n_agents, cfg.n_slaves
    u_mass = u[0:3]
    u_J = u[3:6]
    u_mpc = u[6:6 + 3 * N].reshape(N, 3)
    u_att = u[6 + 3 * N:6 + 6 * N].reshape(N, 3)
    u_est = u[6 + 6 * N:6 + 6 * N + 3 * S].reshape(S, 3)
    w = u[6 + 6 * N + 3 * S:]
    return u_mass, u_J, u_mpc, u_att, u_est, w


# ------------------------------------------------------- nonlinear dynamics

def _core(cfg: AnalysisConfig, R, p, v, omega, p_ref, F_prop, F_hat, z, zdot,
          u):
    """Shared nonlinear dynamics; complex-step safe. Returns state
    derivatives (except attitude kinematics) and all channel outputs."""
    N, S = cfg.n_agents, cfg.n_slaves
    mav, adm, com = cfg.mav, cfg.adm, cfg.com
    u_mass, u_J, u_mpc, u_att, u_est, w = split_inputs(cfg, u)
    dt_ = np.result_type(R.dtype, p.dtype, u.dtype)

    r = com.attachments
    p_i = p[None, :] + r @ R.T
    v_i = v[None, :] + np.cross(omega[None, :], r) @ R.T

    # references: master integrates the velocity command, slaves follow the
    # engaged admittance law
    ref_p = np.zeros((N, 3), dtype=dt_)
    ref_v = np.zeros((N, 3), dtype=dt_)
    ref_p[0] = p_ref
    ref_v[0] = w
    if S:
        ref_p[1:] = cfg.engage_points[1:] + z
        ref_v[1:] = zdot

    F_cmd = (mav.K_P[None, :] * (ref_p - p_i)
             + mav.K_D[None, :] * (ref_v - v_i)
             + mav.m * GRAVITY * EZ[None, :])
    y_mpc = F_cmd
    F_lag_in_w = saturate_thrust_command(F_cmd + u_mpc, mav)
    # the realized thrust is carried in the payload frame (constant-R_PB
    # aggregation: once settled it tilts with the structure); lateral
    # components re-orient with the attitude time constant, the collective
    # magnitude with the (much faster) motor lag
    F_lag_in_P = np.einsum("ji,nj->ni", R, F_lag_in_w)
    tau_axes = np.array([mav.tau_att, mav.tau_att, mav.tau_motor])
    dF_prop = (F_lag_in_P - F_prop) / tau_axes[None, :]
    y_att = F_prop
    F_cons_P = F_prop + u_att
    F_cons_w = np.einsum("ij,nj->ni", R, F_cons_P)

    # payload rigid body about the composite CoM
    sumF = F_cons_w.sum(axis=0)
    drag_w = R @ (cfg.payload.drag_F * (R.T @ v))
    a_com = (sumF - drag_w) / com.m_sys - cfg.w_mass * u_mass
    y_mass = a_com
    v_dot = a_com - GRAVITY * EZ
    M_net = np.cross(r, F_cons_P).sum(axis=0) \
        - np.cross(omega, com.J_sys @ omega) - cfg.payload.drag_M * omega
    omega_dot = np.linalg.solve(com.J_sys, M_net) - cfg.G_inertia @ u_J
    y_J = omega_dot

    dp_ref = w

    # slave joint force, estimator lag, admittance
    dF_hat = np.zeros((S, 3), dtype=dt_)
    dz = np.zeros((S, 3), dtype=dt_)
    dzdot = np.zeros((S, 3), dtype=dt_)
    y_est = np.zeros((S, 3), dtype=dt_)
    if S:
        a_i = v_dot[None, :] + (np.cross(omega_dot[None, :], r[1:])
                                + np.cross(omega[None, :],
                                           np.cross(omega[None, :], r[1:]))) @ R.T
        F_int = mav.m * (a_i + GRAVITY * EZ[None, :]) - F_cons_w[1:]
        dF_hat = (F_int - F_hat) / mav.tau_est
        y_est = F_hat
        F_used = F_hat + u_est - cfg.F_int_trim[None, :]
        dz = zdot
        dzdot = (F_used - adm.C[None, :] * zdot - adm.K[None, :] * z) \
            / adm.M[None, :]

    z_lat = F_cons_P[:, :2]
    outputs = np.concatenate(
        [y_mass, y_J, np.reshape(y_mpc, -1), np.reshape(y_att, -1),
         np.reshape(y_est, -1), np.reshape(z_lat, -1), v, p])
    return (v_dot, omega_dot, dp_ref, dF_prop, dF_hat, dz, dzdot), outputs


def full_rhs(cfg: AnalysisConfig, x, u):
    """State derivative with quaternion payload attitude (real arithmetic)."""
    p, v, q, omega, p_ref, F_prop, F_hat, z, zdot = unpack_state(cfg, x)
    R = quat_to_rotmat(q)
    der, _ = _core(cfg, R, p, v, omega, p_ref, F_prop, F_hat, z, zdot, u)
    v_dot, omega_dot, dp_ref, dF_prop, dF_hat, dz, dzdot = der
    # qdot = 1/2 q (x) (omega, 0)
    qv, qs = q[:3], q[3]
    dqv = 0.5 * (qs * omega + np.cross(qv, omega))
    dqs = -0.5 * np.dot(qv, omega)
    return pack_state(cfg, v, v_dot, np.concatenate([dqv, [dqs]]), omega_dot,
                      dp_ref, dF_prop, dF_hat, dz, dzdot)


def chart_rhs_out(cfg: AnalysisConfig, xc, u, q_ref):
    """Dynamics and outputs in the 3-component attitude chart centered on
    q_ref: R = R(q_ref) expm(skew(theta)). Complex-step safe."""
    N, S = cfg.n_agents, cfg.n_slaves
    i = 0

    def take(k, shape=None):
        nonlocal i
        out = xc[i:i + k]
        i += k
        return out if shape is None else out.reshape(shape)

    p = take(3)
    v = take(3)
    theta = take(3)
    omega = take(3)
    p_ref = take(3)
    F_prop = take(3 * N, (N, 3))
    F_hat = np.zeros((S, 3), dtype=xc.dtype)
    z = np.zeros((S, 3), dtype=xc.dtype)
    zdot = np.zeros((S, 3), dtype=xc.dtype)
    for j in range(S):
        F_hat[j] = take(3)
        z[j] = take(3)
        zdot[j] = take(3)

    R = quat_to_rotmat(q_ref) @ rotvec_to_rotmat(theta)
    der, outputs = _core(cfg, R, p, v, omega, p_ref, F_prop, F_hat, z, zdot, u)
    v_dot, omega_dot, dp_ref, dF_prop, dF_hat, dz, dzdot = der
    dtheta = omega + 0.5 * np.cross(theta, omega)
    parts = [v, v_dot, dtheta, omega_dot, dp_ref, np.reshape(dF_prop, -1)]
    for j in range(S):
        parts += [dF_hat[j], dz[j], dzdot[j]]
    dx = np.concatenate(parts)
    return dx, outputs


# ------------------------------------------------------------- rest / trims

def rest_state(cfg: AnalysisConfig) -> np.ndarray:
    """Exact engaged-hover equilibrium (PD springs carry the payload share)."""
    sag = cfg.share / cfg.mav.K_P[2]
    p = np.array([0.0, 0.0, -sag])
    q = np.array([0.0, 0.0, 0.0, 1.0])
    p_ref = cfg.engage_points[0].copy()
    F_prop = cfg.F_trim.copy()
    S = cfg.n_slaves
    F_hat = np.tile(cfg.F_int_trim, (S, 1))
    return pack_state(cfg, p, np.zeros(3), q, np.zeros(3), p_ref, F_prop,
                      F_hat, np.zeros((S, 3)), np.zeros((S, 3)))


def zero_input(cfg: AnalysisConfig) -> np.ndarray:
    return np.zeros(cfg.n_inputs)


def preroll_transport(cfg: AnalysisConfig, T: float = TRANSPORT_PREROLL_T,
                      v_cmd=TRANSPORT_VELOCITY, dt: float = 0.005,
                      divergence_bound: float = 1e3) -> np.ndarray:
    """Integrate the nominal model from rest under the transport velocity
    command; returns the state after T seconds."""
    x = rest_state(cfg)
    u = zero_input(cfg)
    u[-3:] = v_cmd
    n = int(round(T / dt))
    qsl = slice(6, 10)
    for _ in range(n):
        k1 = full_rhs(cfg, x, u)
        k2 = full_rhs(cfg, x + 0.5 * dt * k1, u)
        k3 = full_rhs(cfg, x + 0.5 * dt * k2, u)
        k4 = full_rhs(cfg, x + dt * k3, u)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x[qsl] = quat_normalize(x[qsl])
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > divergence_bound:
            raise UnstableOperatingPoint(
                "transport pre-roll diverged for this tuning")
    return x


def to_chart(cfg: AnalysisConfig, x):
    """Split a full state into (chart state with theta = 0, reference q)."""
    p, v, q, omega, p_ref, F_prop, F_hat, z, zdot = unpack_state(cfg, x)
    parts = [p, v, np.zeros(3), omega, p_ref, np.reshape(F_prop, -1)]
    for j in range(cfg.n_slaves):
        parts += [F_hat[j], z[j], zdot[j]]
    return np.concatenate(parts), q


def complex_step_jacobian(f, x, h: float = 1e-100):
    """Machine-precision Jacobian via the complex-step derivative."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = f(x)
    J = np.empty((np.size(f0), n))
    for k in range(n):
        xe = x.astype(complex)
        xe[k] += 1j * h
        J[:, k] = np.imag(f(xe)) / h
    return J


def linearize(cfg: AnalysisConfig, op: str = "rest", x_full=None,
              u0=None) -> LinearSystem:
    """Jacobian linearization of the nonlinear model at an operating point.

    op = "rest" uses the exact engaged-hover equilibrium; op = "transport"
    pre-rolls the nonlinear model for 5 s under the (0.5, 0.5, 0) velocity
    command. A custom (x_full, u0) overrides both.
    """
    if x_full is None:
        if op == "rest":
            x_full = rest_state(cfg)
            u0 = zero_input(cfg)
        elif op == "transport":
            x_full = preroll_transport(cfg)
            u0 = zero_input(cfg)
            u0[-3:] = TRANSPORT_VELOCITY
        else:
            raise ValueError(f"unknown operating point {op!r}")
    if u0 is None:
        u0 = zero_input(cfg)
    xc0, q_ref = to_chart(cfg, x_full)
    nx, nu = xc0.size, cfg.n_inputs

    def stacked(xu):
        dx, y = chart_rhs_out(cfg, xu[:nx], xu[nx:], q_ref)
        return np.concatenate([dx, y])

    J = complex_step_jacobian(stacked, np.concatenate([xc0, u0]))
    A, B = J[:nx, :nx], J[:nx, nx:]
    C, D = J[nx:, :nx], J[nx:, nx:]
    return LinearSystem(A, B, C, D, inputs=cfg.input_channels(),
                        outputs=cfg.output_channels())


REF_STATES = slice(12, 15)  # master reference integrator inside the chart


def loop_eigenvalues(sys: LinearSystem) -> np.ndarray:
    """Closed-loop spectrum excluding the reference integrator states."""
    keep = np.ones(sys.n_states, dtype=bool)
    keep[REF_STATES] = False
    A = sys.A[np.ix_(keep, keep)]
    return np.linalg.eigvals(A)


def is_nominally_stable(sys: LinearSystem, growth_tol: float = -1e-9,
                        zero_tol: float = 1e-6) -> bool:
    """Hurwitz check that tolerates the structural symmetry modes.

    A laterally compliant formation admits continua of equilibria (the
    collective yaw about the anchored master; for the degenerate two-agent
    beam also the roll about the attachment axis), which show up as exact
    zero eigenvalues. Those modes are unobservable from every uncertainty
    and performance channel, cancel out of the analysis interconnection,
    and persist under every admissible perturbation, so they are exempted.

    growth_tol bounds the acceptable real part: operating points produced
    by a finite pre-roll carry trim residue that parks the symmetry modes
    within numerical noise of the axis, so the transport gate passes a
    loosened tolerance (documented at the call site). Everything else with
    a non-negative real part fails the check.
    """
    keep = np.ones(sys.n_states, dtype=bool)
    keep[REF_STATES] = False
    A = sys.A[np.ix_(keep, keep)]
    ev, V = np.linalg.eig(A)
    # observability rows: everything except the absolute-position monitor
    rows = [i for (name, size) in sys.outputs if name != "p_WP"
            for i in range(sys.output_slice(name).start,
                           sys.output_slice(name).stop)]
    C = sys.C[np.ix_(rows, np.flatnonzero(keep))]
    for k in range(ev.size):
        if ev[k].real <= growth_tol:
            continue
        if abs(ev[k]) <= zero_tol:
            v = V[:, k]
            if np.linalg.norm(C @ v) <= 1e-6 * np.linalg.norm(v):
                continue  # symmetry-neutral and channel-invisible
        return False
    return True


def deflate_marginal_modes(sys: LinearSystem, re_window: float = 5e-4,
                           freq_window: float = 0.1) -> LinearSystem:
    """Quotient out the structurally marginal modes of the interconnection.

    The laterally compliant formation admits equilibrium continua: the
    collective yaw about the anchored master, and for the degenerate
    two-agent beam the roll about its attachment axis. They produce exact
    zero eigenvalues that persist under every admissible block perturbation
    (the perturbed system keeps the same continuum), so no admissible Delta
    can push them across the axis and they do not belong in the margin
    question; a finite pre-roll additionally smears them within numerical
    noise of the axis. Everything inside the |Re| <= re_window,
    |Im| <= freq_window box is truncated via an ordered real Schur form;
    no legitimate plant dynamics oscillate that close to the axis below
    freq_window. The master reference integrator is identified by its
    eigenvector support and always kept.
    """
    A = sys.A
    n = A.shape[0]
    if n == 0:
        return sys
    w, V = np.linalg.eig(A)
    deflate_vals = []
    for k in range(n):
        vn = max(np.linalg.norm(V[:, k]), 1e-30)
        ref_support = np.linalg.norm(V[REF_STATES, k]) / vn
        if ref_support > 0.5:
            continue  # reference integrator
        if abs(w[k].real) <= re_window and abs(w[k].imag) <= freq_window:
            deflate_vals.append(w[k])
    if not deflate_vals:
        return sys
    vals = np.array(deflate_vals)

    from scipy.linalg import schur

    def keep(re, im):
        lam = re + 1j * im
        return bool(np.min(np.abs(vals - lam)) > 1e-7)

    T, Z, sdim = schur(A, output="real", sort=keep)
    k = int(sdim)
    A_r = T[:k, :k]
    B_r = (Z.T @ sys.B)[:k, :]
    C_r = (sys.C @ Z)[:, :k]
    return LinearSystem(A_r, B_r, C_r, sys.D.copy(),
                        inputs=list(sys.inputs), outputs=list(sys.outputs))


def margin_plant(sys: LinearSystem, growth_tol: float = 1e-6):
    """Deflate the structural modes and gate nominal stability.

    Returns (deflated system, stable flag): stable means every remaining
    eigenvalue either sits below growth_tol (strictly decaying, or trim
    residue at the analysis scale) or is an exact zero of the reference
    integrator.
    """
    d = deflate_marginal_modes(sys)
    ev = np.linalg.eigvals(d.A) if d.n_states else np.array([])
    ok = True
    for lam in ev:
        if lam.real <= growth_tol or abs(lam) <= 1e-9:
            continue
        ok = False
        break
    return d, ok


# ------------------------------------------------------- analytic assembly

def _payload_block(cfg: AnalysisConfig) -> LinearSystem:
    """Hand-linearized payload rigid body at the rest trim."""
    N = cfg.n_agents
    com = cfg.com
    r = com.attachments
    m = com.m_sys
    Jinv = np.linalg.inv(com.J_sys)
    DF = np.diag(cfg.payload.drag_F)
    DM = np.diag(cfg.payload.drag_M)

    # states [dp(3), dv(3), theta(3), domega(3)]; agent forces arrive in the
    # payload frame (constant-R_PB aggregation), so tilting the structure
    # tilts the total trim thrust with it
    A = np.zeros((12, 12))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 3:6] = -DF / m
    A[3:6, 6:9] = -skew(cfg.F_trim.sum(axis=0)) / m
    A[6:9, 9:12] = np.eye(3)
    A[9:12, 9:12] = -Jinv @ DM

    # inputs [F_0..F_{N-1} (3 each, payload frame), u_mass(3), u_inertia(3)]
    nu = 3 * N + 6
    B = np.zeros((12, nu))
    for i in range(N):
        B[3:6, 3 * i:3 * i + 3] = np.eye(3) / m
        B[9:12, 3 * i:3 * i + 3] = Jinv @ skew(r[i])
    B[3:6, 3 * N:3 * N + 3] = -cfg.w_mass * np.eye(3)
    B[9:12, 3 * N + 3:3 * N + 6] = -cfg.G_inertia

    # outputs: per agent p_i, v_i, a_i; then y_mass, y_inertia, theta,
    # v_WP, p_WP
    ny = 9 * N + 15
    C = np.zeros((ny, 12))
    D = np.zeros((ny, nu))
    row_a = A[3:6, :]
    rowB_a = B[3:6, :]
    row_w = A[9:12, :]
    rowB_w = B[9:12, :]
    for i in range(N):
        sk = skew(r[i])
        C[9 * i:9 * i + 3, 0:3] = np.eye(3)
        C[9 * i:9 * i + 3, 6:9] = -sk
        C[9 * i + 3:9 * i + 6, 3:6] = np.eye(3)
        C[9 * i + 3:9 * i + 6, 9:12] = -sk
        C[9 * i + 6:9 * i + 9, :] = row_a - sk @ row_w
        D[9 * i + 6:9 * i + 9, :] = rowB_a - sk @ rowB_w
    base = 9 * N
    C[base:base + 3, :] = row_a
    D[base:base + 3, :] = rowB_a
    C[base + 3:base + 6, :] = row_w
    D[base + 3:base + 6, :] = rowB_w
    C[base + 6:base + 9, 6:9] = np.eye(3)
    C[base + 9:base + 12, 3:6] = np.eye(3)
    C[base + 12:base + 15, 0:3] = np.eye(3)

    inputs = [(f"F_{i}", 3) for i in range(N)] + [("u_mass", 3), ("u_inertia", 3)]
    outputs = []
    for i in range(N):
        outputs += [(f"p_{i}", 3), (f"v_{i}", 3), (f"a_{i}", 3)]
    outputs += [("y_mass", 3), ("y_inertia", 3), ("theta", 3),
                ("v_WP", 3), ("p_WP", 3)]
    return LinearSystem(A, B, C, D, inputs=inputs, outputs=outputs)


def _pd_block(cfg: AnalysisConfig, i: int) -> LinearSystem:
    KP, KD = np.diag(cfg.mav.K_P), np.diag(cfg.mav.K_D)
    D = np.hstack([KP, KD, -KP, -KD])
    return gain_block(
        D, inputs=[(f"refp_{i}", 3), (f"refv_{i}", 3), (f"pin_{i}", 3),
                   (f"vin_{i}", 3)],
        outputs=[(f"y_mpc_{i}", 3)])


def _lag_block(cfg: AnalysisConfig, i: int) -> LinearSystem:
    # dF^P = (R_PW sat(F_cmd_w) - F^P) / tau: mapping the world command into
    # the tilted payload frame contributes skew(F_trim) theta
    tau = np.array([cfg.mav.tau_att, cfg.mav.tau_att, cfg.mav.tau_motor])
    Tinv = np.diag(1.0 / tau)
    A = -Tinv
    B = np.hstack([Tinv, Tinv, Tinv @ skew(cfg.F_trim[i])])
    return LinearSystem(A, B, np.eye(3), np.zeros((3, 9)),
                        inputs=[(f"cmd_{i}", 3), (f"u_mpc_{i}", 3),
                                (f"th_lag_{i}", 3)],
                        outputs=[(f"y_att_{i}", 3)])


def _cons_block(i: int) -> LinearSystem:
    return gain_block(np.hstack([np.eye(3), np.eye(3)]),
                      inputs=[(f"prop_{i}", 3), (f"u_att_{i}", 3)],
                      outputs=[(f"cons_{i}", 3)])


def _joint_block(cfg: AnalysisConfig, i: int) -> LinearSystem:
    # F_int = m a_i - world thrust; the payload-frame thrust contributes the
    # tilt term -skew(F_trim) theta when expressed in the world frame
    return gain_block(
        np.hstack([cfg.mav.m * np.eye(3), -np.eye(3),
                   skew(cfg.F_trim[i])]),
        inputs=[(f"acc_{i}", 3), (f"consin_{i}", 3), (f"th_joint_{i}", 3)],
        outputs=[(f"fint_{i}", 3)])


def _estimator_block(cfg: AnalysisConfig, i: int) -> LinearSystem:
    tau = cfg.mav.tau_est
    return LinearSystem(-np.eye(3) / tau, np.eye(3) / tau, np.eye(3),
                        np.zeros((3, 3)), inputs=[(f"fin_{i}", 3)],
                        outputs=[(f"y_est_{i}", 3)])


def _est_sum_block(i: int) -> LinearSystem:
    return gain_block(np.hstack([np.eye(3), np.eye(3)]),
                      inputs=[(f"fhat_{i}", 3), (f"u_est_{i}", 3)],
                      outputs=[(f"fused_{i}", 3)])


def _admittance_block(cfg: AnalysisConfig, i: int) -> LinearSystem:
    M, C, K = cfg.adm.M, cfg.adm.C, cfg.adm.K
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 0:3] = -np.diag(K / M)
    A[3:6, 3:6] = -np.diag(C / M)
    B = np.vstack([np.zeros((3, 3)), np.diag(1.0 / M)])
    Cm = np.eye(6)
    return LinearSystem(A, B, Cm, np.zeros((6, 3)),
                        inputs=[(f"adm_in_{i}", 3)],
                        outputs=[(f"z_{i}", 3), (f"zd_{i}", 3)])


def _lat_block(i: int) -> LinearSystem:
    D = np.zeros((2, 3))
    D[0, 0] = 1.0
    D[1, 1] = 1.0
    return gain_block(D, inputs=[(f"conslat_{i}", 3)],
                      outputs=[(f"z_lat_{i}", 2)])


def build_closed_loop(cfg: AnalysisConfig) -> LinearSystem:
    """Analytic rest-point interconnection with uncertainty channels.

    State ordering matches :func:`linearize` at rest: payload (12), master
    reference integrator (3), thrust lags per agent, then per slave the
    estimator lag and admittance states.
    """
    N = cfg.n_agents
    blocks = [_payload_block(cfg),
              integrator(3, input_name="w", output_name="ref_master")]
    blocks += [_lag_block(cfg, i) for i in range(N)]
    for i in range(1, N):
        blocks.append(_estimator_block(cfg, i))
        blocks.append(_admittance_block(cfg, i))
    # static blocks carry no states, so their position does not disturb the
    # state ordering
    blocks += [_pd_block(cfg, i) for i in range(N)]
    blocks += [_cons_block(i) for i in range(N)]
    blocks += [_lat_block(i) for i in range(N)]
    for i in range(1, N):
        blocks.append(_joint_block(cfg, i))
        blocks.append(_est_sum_block(i))
    # the velocity reference must also reach the master PD directly
    blocks.append(gain_block(np.eye(3), inputs=[("w_split", 3)],
                             outputs=[("w_pd", 3)]))
    sys = append(*blocks)

    wires = []
    for i in range(N):
        wires += [(f"p_{i}", f"pin_{i}"), (f"v_{i}", f"vin_{i}"),
                  (f"y_mpc_{i}", f"cmd_{i}"), (f"y_att_{i}", f"prop_{i}"),
                  (f"cons_{i}", f"F_{i}"), (f"cons_{i}", f"conslat_{i}"),
                  ("theta", f"th_lag_{i}")]
    wires += [("ref_master", "refp_0"), ("w_pd", "refv_0")]
    for i in range(1, N):
        wires += [(f"a_{i}", f"acc_{i}"), (f"cons_{i}", f"consin_{i}"),
                  ("theta", f"th_joint_{i}"),
                  (f"fint_{i}", f"fin_{i}"), (f"y_est_{i}", f"fhat_{i}"),
                  (f"fused_{i}", f"adm_in_{i}"),
                  (f"z_{i}", f"refp_{i}"), (f"zd_{i}", f"refv_{i}")]
    closed = connect(sys, wires)

    # merge the two velocity-command entry points into a single w input
    merge = gain_block(np.vstack([np.eye(3), np.eye(3)]),
                       inputs=[("w_in", 3)],
                       outputs=[("w_orig", 3), ("w_split_feed", 3)])
    both = append(closed, merge)
    closed2 = connect(both, [("w_orig", "w"), ("w_split_feed", "w_split")])

    out_names = [n for n, _ in cfg.output_channels()]
    in_names = [n for n, _ in cfg.input_channels()[:-1]] + ["w_in"]
    sub = closed2.subsystem(out_names=out_names, in_names=in_names)
    sub.inputs[-1] = ("w", 3)
    return sub
