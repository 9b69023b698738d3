"""Fixed-step coupled simulation of N agents rigidly attached to a payload.

Classical RK4 integrates the continuous states (payload rigid body about
the composite CoM, per-agent attitude inner loops and motor lag, or the
per-agent thrust-vector lag in the reduced thrust model) while controller
and estimator outputs are zero-order-held between their ticks. Slaves run
estimator + admittance + PD; the master tracks the scripted reference.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import ekf as ekf_mod
from . import ukf as ukf_mod
from .admittance import AdmittanceMode, AdmittanceState, admittance_step, fsm_step
from .attitude import (
    body_rate_from_euler_rate,
    euler_to_quat,
    euler_to_rotmat,
    quat_integrate,
    quat_normalize,
    quat_to_rotmat,
    rotmat_to_euler,
)
from .errors import ScenarioError
from .mav import (
    EZ,
    GRAVITY,
    AgentState,
    pd_position_control,
    rotor_speeds_from_wrench,
    saturate_thrust_command,
    thrust_to_attitude,
)
from .mission import MissionPhase, MissionState, mission_step
from .payload import com_system, joint_interaction_force
from .scenario import Scenario

LOG_VERSION = "swarmlift-log-v1"


def log_columns(n_agents: int, rotor_count: int) -> list[str]:
    cols = ["t"]
    for i in range(n_agents):
        cols += [f"a{i}_p{ax}" for ax in "xyz"]
        cols += [f"a{i}_v{ax}" for ax in "xyz"]
        cols += [f"a{i}_q{ax}" for ax in ("x", "y", "z", "w")]
        cols += [f"a{i}_w{ax}" for ax in "xyz"]
        cols += [f"a{i}_Fprop{ax}" for ax in "xyz"]
        cols += [f"a{i}_Fhat{ax}" for ax in "xyz"]
        cols += [f"a{i}_Lref{ax}" for ax in "xyz"]
        cols += [f"a{i}_cmd_phi", f"a{i}_cmd_theta", f"a{i}_cmd_psi",
                 f"a{i}_cmd_F"]
        cols += [f"a{i}_n{k}" for k in range(rotor_count)]
        cols += [f"a{i}_fsm"]
    cols += [f"pl_p{ax}" for ax in "xyz"]
    cols += [f"pl_q{ax}" for ax in ("x", "y", "z", "w")]
    cols += [f"pl_v{ax}" for ax in "xyz"]
    cols += [f"pl_w{ax}" for ax in "xyz"]
    cols += ["mission_phase"]
    return cols


FSM_CODE = {AdmittanceMode.DISENGAGED: 0, AdmittanceMode.IDLE: 1,
            AdmittanceMode.CALIBRATING: 2, AdmittanceMode.TRACKING: 3,
            AdmittanceMode.GENERATING: 4}
PHASE_CODE = {MissionPhase.GROUNDED: 0, MissionPhase.ASCENDING: 1,
              MissionPhase.TRANSPORTING: 2, MissionPhase.DESCENDING: 3,
              MissionPhase.LANDED: 4}


@dataclass
class RunLog:
    columns: list
    data: np.ndarray
    diverged: bool = False
    diverged_step: int | None = None
    meta: dict = field(default_factory=dict)

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def cols(self, names) -> np.ndarray:
        idx = [self.columns.index(n) for n in names]
        return self.data[:, idx]

    @property
    def t(self) -> np.ndarray:
        return self.col("t")

    def payload_columns(self) -> list:
        return [c for c in self.columns if c.startswith("pl_")]

    def payload_bytes(self) -> bytes:
        return self.cols(self.payload_columns()).tobytes()

    def to_csv(self, path_or_buf) -> None:
        buf = path_or_buf if hasattr(path_or_buf, "write") else open(
            path_or_buf, "w")
        try:
            buf.write(f"# {LOG_VERSION} diverged={int(self.diverged)}"
                      f" diverged_step={self.diverged_step}\n")
            buf.write(",".join(self.columns) + "\n")
            for row in self.data:
                buf.write(",".join(repr(float(x)) for x in row) + "\n")
        finally:
            if not hasattr(path_or_buf, "write"):
                buf.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "RunLog":
        buf = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf)
        try:
            header = buf.readline().strip()
            if not header.startswith(f"# {LOG_VERSION}"):
                raise ScenarioError(f"not a {LOG_VERSION} file: {header!r}")
            fields = dict(kv.split("=") for kv in header.split()[2:])
            columns = buf.readline().strip().split(",")
            data = np.loadtxt(buf, delimiter=",", ndmin=2)
        finally:
            if not hasattr(path_or_buf, "read"):
                buf.close()
        step = fields.get("diverged_step", "None")
        return cls(columns=columns, data=data,
                   diverged=bool(int(fields.get("diverged", "0"))),
                   diverged_step=None if step == "None" else int(step))


@dataclass
class _AgentCtl:
    """Zero-order-held controller outputs and per-agent discrete state."""

    eta_cmd: np.ndarray
    F_cmd_mag: float
    F_cmd_w: np.ndarray
    rotor: np.ndarray
    adm: AdmittanceState | None = None
    est: object = None
    F_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ref_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ref_v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alt_target: float = 0.0
    hold_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))


class _MasterRef:
    """Scripted master reference: position holds, steps, velocity ramps."""

    def __init__(self, p0):
        self.p = np.array(p0, dtype=float)
        self.v = np.zeros(3)

    def advance(self, dt):
        self.p = self.p + dt * self.v

    def step(self, dp):
        self.p = self.p + np.asarray(dp, dtype=float)

    def set_velocity(self, v):
        self.v = np.asarray(v, dtype=float)


def run_scenario(sc: Scenario) -> RunLog:
    """Deterministic fixed-step simulation of a scenario; divergence is
    reported in the log rather than raised."""
    N = sc.n_agents
    com = com_system(sc.payload, np.full(N, sc.mav.m))
    rng = np.random.default_rng(sc.seed)
    noise_p = float(sc.noise.get("p", 0.0))
    noise_v = float(sc.noise.get("v", 0.0))
    noise_att = float(sc.noise.get("att", 0.0))
    noise_rate = float(sc.noise.get("rate", 0.0))
    use_noise = max(noise_p, noise_v, noise_att, noise_rate) > 0.0

    share = sc.payload.m_p * GRAVITY / N
    F_int_trim = np.array([0.0, 0.0, -share])
    sag = share / sc.mav.K_P[2]

    # initial condition: engaged-hover trim at the transport altitude, or
    # hover at the ground level waiting for the coordinator
    alt0 = sc.transport_altitude if sc.start_engaged else 0.0
    p_pl = np.array([0.0, 0.0, alt0 - sag])
    v_pl = np.zeros(3)
    q_pl = np.array([0.0, 0.0, 0.0, 1.0])
    w_pl = np.zeros(3)
    eta = np.zeros((N, 3))
    eta_dot = np.zeros((N, 3))
    F_mag = np.full(N, sc.mav.m * GRAVITY + share)
    F_lag = np.zeros((N, 3))  # thrust-vector states for the lag model
    F_lag[:, 2] = F_mag

    att_w = com.attachments
    p_agents0 = p_pl[None, :] + att_w
    hover_ref = p_agents0 + np.array([0.0, 0.0, sag])[None, :]

    mission = None
    if sc.mission_auto:
        mission = MissionState(n_agents=N, transport_altitude=sc.transport_altitude,
                               dh=sc.mission_dh, tol=sc.mission_tol)

    master = _MasterRef(hover_ref[0])
    agents = []
    for i in range(N):
        ctl = _AgentCtl(eta_cmd=np.zeros(3), F_cmd_mag=float(F_mag[i]),
                        F_cmd_w=np.array([0.0, 0.0, F_mag[i]]),
                        rotor=rotor_speeds_from_wrench(np.zeros(3),
                                                       float(F_mag[i]), sc.mav))
        ctl.alt_target = hover_ref[i, 2]
        ctl.hold_xy = hover_ref[i, :2].copy()
        if i > 0:
            ctl.adm = AdmittanceState(params=sc.adm)
            if sc.start_engaged:
                ctl.adm = fsm_step(ctl.adm, np.zeros(3), 1.0 / sc.ctrl_rate,
                                   command="engage", current_pose=hover_ref[i])
                ctl.adm.offset = F_int_trim.copy()
            if sc.estimator == "ekf":
                ctl.est = ekf_mod.ekf_init(p_agents0[i], np.zeros(3),
                                           np.zeros(3), np.zeros(3))
                ctl.est.x[ekf_mod.F_SL] = F_int_trim
            elif sc.estimator == "ukf":
                ctl.est = ukf_mod.ukf_init(p_agents0[i], np.zeros(3),
                                           euler_to_quat(np.zeros(3)),
                                           np.zeros(3))
                ctl.est.xi[ukf_mod.F_SL] = F_int_trim
            ctl.F_hat = F_int_trim.copy()
        agents.append(ctl)

    ekf_Q = ekf_mod.default_ekf_Q(sc.est_rate)
    ekf_R = ekf_mod.default_ekf_R()
    ukf_Q = ukf_mod.default_ukf_Q(sc.est_rate)
    ukf_R = ukf_mod.default_ukf_R()

    n_ctrl = int(round(sc.duration * sc.ctrl_rate))
    cols = log_columns(N, sc.mav.rotor_count)
    data = np.zeros((n_ctrl, len(cols)))
    diverged = False
    diverged_step = None

    events = sorted(sc.events, key=lambda e: e["t"])
    ev_idx = 0
    dt_ctrl = 1.0 / sc.ctrl_rate
    dt_est = 1.0 / sc.est_rate
    h = sc.Ts_dyn
    t = 0.0

    drag_F = sc.payload.drag_F
    drag_M = sc.payload.drag_M
    tau_axes = np.array([sc.mav.tau_att, sc.mav.tau_att, sc.mav.tau_motor])

    def agent_kin(vdot=None, wdot=None):
        R = quat_to_rotmat(q_pl)
        p_i = p_pl[None, :] + att_w @ R.T
        v_i = v_pl[None, :] + np.cross(w_pl[None, :], att_w) @ R.T
        a_i = None
        if vdot is not None:
            a_i = vdot[None, :] + (np.cross(wdot[None, :], att_w)
                                   + np.cross(w_pl[None, :],
                                              np.cross(w_pl[None, :], att_w))) @ R.T
        return p_i, v_i, a_i

    def thrust_world():
        if sc.thrust_model == "attitude":
            R = euler_to_rotmat(eta)
            return np.einsum("nij,j->ni", R, EZ) * F_mag[:, None]
        return F_lag.copy()

    def payload_rhs(p, v, q, w, Fw):
        R = quat_to_rotmat(q)
        drag_w = R @ (drag_F * (R.T @ v))
        vdot = (Fw.sum(axis=0) - drag_w) / com.m_sys - GRAVITY * EZ
        M_ag = np.cross(att_w, Fw @ R).sum(axis=0)
        wdot = np.linalg.solve(com.J_sys,
                               M_ag - np.cross(w, com.J_sys @ w) - drag_M * w)
        return vdot, wdot

    for k in range(n_ctrl):
        # scheduled events
        while ev_idx < len(events) and events[ev_idx]["t"] <= t + 1e-12:
            ev = events[ev_idx]
            ev_idx += 1
            act = ev["action"]
            if act == "master_step":
                master.step(ev["dp"])
            elif act == "master_velocity":
                master.set_velocity(ev["v"])
            elif act == "engage_slaves":
                p_i, _, _ = agent_kin()
                for i in range(1, N):
                    if not agents[i].adm.engaged:
                        agents[i].adm = fsm_step(agents[i].adm, np.zeros(3),
                                                 dt_ctrl, command="engage",
                                                 current_pose=p_i[i])
            elif act == "disengage_slaves":
                for i in range(1, N):
                    if agents[i].adm.engaged:
                        agents[i].adm = fsm_step(agents[i].adm, np.zeros(3),
                                                 dt_ctrl, command="disengage")
            elif act == "compute_offset":
                for i in range(1, N):
                    agents[i].adm = fsm_step(agents[i].adm, np.zeros(3),
                                             dt_ctrl, command="compute_offset")
            elif act == "remove_offset":
                for i in range(1, N):
                    agents[i].adm = fsm_step(agents[i].adm, np.zeros(3),
                                             dt_ctrl, command="remove_offset")
            else:
                raise ScenarioError(f"unknown event action {act!r}")

        # mission coordinator at the controller rate
        if mission is not None:
            p_i, _, _ = agent_kin()
            begin = (sc.mission_land_at is not None
                     and t >= sc.mission_land_at
                     and mission.phase is MissionPhase.TRANSPORTING)
            mission, cmds = mission_step(mission, p_i[:, 2], begin_descent=begin)
            for cmd in cmds:
                if cmd[0] == "set_altitude":
                    for i in range(N):
                        agents[i].alt_target = cmd[1]
                elif cmd[0] == "engage_slaves":
                    for i in range(1, N):
                        agents[i].adm = fsm_step(agents[i].adm, np.zeros(3),
                                                 dt_ctrl, command="engage",
                                                 current_pose=p_i[i])
                elif cmd[0] == "disengage_slaves":
                    for i in range(1, N):
                        if agents[i].adm.engaged:
                            agents[i].adm = fsm_step(
                                agents[i].adm, dt_ctrl=dt_ctrl, F_raw=np.zeros(3),
                                command="disengage")

        # current constrained kinematics and the coupled accelerations
        Fw_now = thrust_world()
        vdot_now, wdot_now = payload_rhs(p_pl, v_pl, q_pl, w_pl, Fw_now)
        p_i, v_i, a_i = agent_kin(vdot_now, wdot_now)
        omega_i = np.array([
            body_rate_from_euler_rate(eta[i], eta_dot[i]) for i in range(N)])

        # estimators (slaves) at their own rate
        if k % sc.ctrl_per_est == 0:
            for i in range(1, N):
                ctl = agents[i]
                p_m = p_i[i] + (rng.normal(scale=noise_p, size=3) if use_noise else 0.0)
                v_m = v_i[i] + (rng.normal(scale=noise_v, size=3) if use_noise else 0.0)
                eta_m = eta[i] + (rng.normal(scale=noise_att, size=3) if use_noise else 0.0)
                w_m = omega_i[i] + (rng.normal(scale=noise_rate, size=3) if use_noise else 0.0)
                if sc.estimator == "ekf":
                    ctl.est = ekf_mod.ekf_predict(
                        ctl.est, (ctl.eta_cmd[0], ctl.eta_cmd[1],
                                  ctl.eta_cmd[2], ctl.F_cmd_mag),
                        ekf_Q, dt_est, sc.mav)
                    ctl.est = ekf_mod.ekf_update(
                        ctl.est, np.concatenate([p_m, eta_m]), ekf_R)
                    ctl.F_hat = ctl.est.F_ext.copy()
                elif sc.estimator == "ukf":
                    ctl.est = ukf_mod.ukf_predict(ctl.est, ctl.rotor, ukf_Q,
                                                  sc.mav, dt_est)
                    ctl.est = ukf_mod.ukf_update(ctl.est, p_m, v_m,
                                                 euler_to_quat(eta_m), w_m,
                                                 ukf_R)
                    ctl.F_hat = ctl.est.F_ext.copy()
                else:
                    F_int = joint_interaction_force(a_i[i], Fw_now[i], sc.mav.m)
                    alpha = 1.0 - np.exp(-dt_est / sc.mav.tau_est)
                    ctl.F_hat = ctl.F_hat + alpha * (F_int - ctl.F_hat)

        # admittance FSM + reference generation (slaves), then PD commands
        for i in range(N):
            ctl = agents[i]
            if i == 0:
                master.advance(dt_ctrl)
                if mission is not None and mission.phase is not MissionPhase.TRANSPORTING:
                    ctl.ref_p = np.array([ctl.hold_xy[0], ctl.hold_xy[1],
                                          ctl.alt_target])
                    ctl.ref_v = np.zeros(3)
                    master.p = ctl.ref_p.copy()
                else:
                    ctl.ref_p = master.p.copy()
                    ctl.ref_v = master.v.copy()
            else:
                adm = ctl.adm
                if adm.engaged:
                    adm = fsm_step(adm, ctl.F_hat, dt_ctrl)
                    adm = admittance_step(adm, ctl.F_hat, dt_ctrl)
                    ctl.adm = adm
                    ctl.ref_p = adm.Lambda_r.copy()
                    ctl.ref_v = adm.dLambda_r.copy()
                else:
                    ctl.ref_p = np.array([ctl.hold_xy[0], ctl.hold_xy[1],
                                          ctl.alt_target])
                    ctl.ref_v = np.zeros(3)
            st = AgentState(p_i[i], v_i[i], euler_to_quat(eta[i]), omega_i[i])
            F_cmd_w = pd_position_control(st, ctl.ref_p, ctl.ref_v, sc.mav)
            ctl.F_cmd_w = F_cmd_w
            phi_c, theta_c, F_c = thrust_to_attitude(F_cmd_w, eta[i, 2], sc.mav)
            ctl.eta_cmd = np.array([phi_c, theta_c, 0.0])
            ctl.F_cmd_mag = F_c
            acc_att = (sc.mav.omega_n_att**2 * (ctl.eta_cmd - eta[i])
                       - 2.0 * sc.mav.omega_n_att * eta_dot[i])
            M_cmd = sc.mav.J * acc_att + np.cross(omega_i[i],
                                                  sc.mav.J * omega_i[i])
            ctl.rotor = rotor_speeds_from_wrench(M_cmd, F_c, sc.mav)

        # log the tick
        row = [t]
        for i in range(N):
            ctl = agents[i]
            row += [*p_i[i], *v_i[i], *euler_to_quat(eta[i]), *omega_i[i],
                    *Fw_now[i], *ctl.F_hat, *ctl.ref_p,
                    ctl.eta_cmd[0], ctl.eta_cmd[1], ctl.eta_cmd[2],
                    ctl.F_cmd_mag, *ctl.rotor,
                    FSM_CODE[ctl.adm.mode] if ctl.adm else -1]
        row += [*p_pl, *q_pl, *v_pl, *w_pl,
                PHASE_CODE[mission.phase] if mission else -1]
        data[k, :] = row

        # integrate the coupled dynamics over one controller period
        cmd_eta = np.array([agents[i].eta_cmd for i in range(N)])
        cmd_F = np.array([agents[i].F_cmd_mag for i in range(N)])
        cmd_Fw = np.array([agents[i].F_cmd_w for i in range(N)])

        if sc.thrust_model == "attitude":
            def rhs(p, v, q, w, et, etd, fm):
                R_et = euler_to_rotmat(et)
                Fw = np.einsum("nij,j->ni", R_et, EZ) * fm[:, None]
                vdot, wdot = payload_rhs(p, v, q, w, Fw)
                qv, qs = q[:3], q[3]
                om = w
                dq = np.concatenate([
                    0.5 * (qs * om + np.cross(qv, om)), [-0.5 * np.dot(qv, om)]])
                etdd = (sc.mav.omega_n_att**2 * (cmd_eta - et)
                        - 2.0 * sc.mav.omega_n_att * etd)
                dfm = (cmd_F - fm) / sc.mav.tau_motor
                return v, vdot, dq, wdot, etd, etdd, dfm

            for _ in range(sc.steps_per_ctrl):
                k1 = rhs(p_pl, v_pl, q_pl, w_pl, eta, eta_dot, F_mag)
                k2 = rhs(p_pl + 0.5 * h * k1[0], v_pl + 0.5 * h * k1[1],
                         q_pl + 0.5 * h * k1[2], w_pl + 0.5 * h * k1[3],
                         eta + 0.5 * h * k1[4], eta_dot + 0.5 * h * k1[5],
                         F_mag + 0.5 * h * k1[6])
                k3 = rhs(p_pl + 0.5 * h * k2[0], v_pl + 0.5 * h * k2[1],
                         q_pl + 0.5 * h * k2[2], w_pl + 0.5 * h * k2[3],
                         eta + 0.5 * h * k2[4], eta_dot + 0.5 * h * k2[5],
                         F_mag + 0.5 * h * k2[6])
                k4 = rhs(p_pl + h * k3[0], v_pl + h * k3[1], q_pl + h * k3[2],
                         w_pl + h * k3[3], eta + h * k3[4],
                         eta_dot + h * k3[5], F_mag + h * k3[6])
                p_pl = p_pl + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                v_pl = v_pl + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                q_pl = quat_normalize(
                    q_pl + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]))
                w_pl = w_pl + h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
                eta = eta + h / 6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
                eta_dot = eta_dot + h / 6 * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5])
                F_mag = F_mag + h / 6 * (k1[6] + 2 * k2[6] + 2 * k3[6] + k4[6])
        else:
            sat_cmd = np.array([
                saturate_thrust_command(cmd_Fw[i], sc.mav) for i in range(N)])

            def rhs(p, v, q, w, Fl):
                vdot, wdot = payload_rhs(p, v, q, w, Fl)
                qv, qs = q[:3], q[3]
                dq = np.concatenate([
                    0.5 * (qs * w + np.cross(qv, w)), [-0.5 * np.dot(qv, w)]])
                dF = (sat_cmd - Fl) / tau_axes[None, :]
                return v, vdot, dq, wdot, dF

            for _ in range(sc.steps_per_ctrl):
                k1 = rhs(p_pl, v_pl, q_pl, w_pl, F_lag)
                k2 = rhs(p_pl + 0.5 * h * k1[0], v_pl + 0.5 * h * k1[1],
                         q_pl + 0.5 * h * k1[2], w_pl + 0.5 * h * k1[3],
                         F_lag + 0.5 * h * k1[4])
                k3 = rhs(p_pl + 0.5 * h * k2[0], v_pl + 0.5 * h * k2[1],
                         q_pl + 0.5 * h * k2[2], w_pl + 0.5 * h * k2[3],
                         F_lag + 0.5 * h * k2[4])
                k4 = rhs(p_pl + h * k3[0], v_pl + h * k3[1], q_pl + h * k3[2],
                         w_pl + h * k3[3], F_lag + h * k3[4])
                p_pl = p_pl + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                v_pl = v_pl + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                q_pl = quat_normalize(
                    q_pl + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]))
                w_pl = w_pl + h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
                F_lag = F_lag + h / 6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])

        t += dt_ctrl
        state_mag = max(np.max(np.abs(p_pl)), np.max(np.abs(v_pl)),
                        np.max(np.abs(w_pl)))
        if not np.isfinite(state_mag) or state_mag > sc.divergence_bound:
            diverged = True
            diverged_step = k
            data = data[:k + 1]
            break

    return RunLog(columns=cols, data=data, diverged=diverged,
                  diverged_step=diverged_step,
                  meta={"config_hash": sc.config_hash()})


def replay_log(log: RunLog, sc: Scenario, agent: int = 1) -> np.ndarray:
    """Feed a recorded log back through an estimator for one agent.

    Returns (T, 4) array: time plus the re-estimated external force. Uses
    the commands (EKF) or rotor speeds (UKF) recorded in the log.
    """
    if agent < 1 or agent >= sc.n_agents:
        raise ScenarioError("replay runs on a slave agent index")
    t = log.t
    a = f"a{agent}_"
    p = log.cols([a + "px", a + "py", a + "pz"])
    v = log.cols([a + "vx", a + "vy", a + "vz"])
    q = log.cols([a + "qx", a + "qy", a + "qz", a + "qw"])
    w = log.cols([a + "wx", a + "wy", a + "wz"])
    cmd = log.cols([a + "cmd_phi", a + "cmd_theta", a + "cmd_psi", a + "cmd_F"])
    rotors = log.cols([a + f"n{k}" for k in range(sc.mav.rotor_count)])
    dt = float(t[1] - t[0])
    out = np.zeros((t.size, 4))
    out[:, 0] = t
    if sc.estimator == "ekf":
        Q, R = ekf_mod.default_ekf_Q(1.0 / dt), ekf_mod.default_ekf_R()
        eta0 = rotmat_to_euler(quat_to_rotmat(q[0]))
        est = ekf_mod.ekf_init(p[0], v[0], eta0, w[0])
        for k in range(t.size):
            est = ekf_mod.ekf_predict(est, tuple(cmd[k]), Q, dt, sc.mav)
            eta_k = rotmat_to_euler(quat_to_rotmat(q[k]))
            est = ekf_mod.ekf_update(est, np.concatenate([p[k], eta_k]), R)
            out[k, 1:] = est.F_ext
    elif sc.estimator == "ukf":
        Q, R = ukf_mod.default_ukf_Q(1.0 / dt), ukf_mod.default_ukf_R()
        est = ukf_mod.ukf_init(p[0], v[0], q[0], w[0])
        for k in range(t.size):
            est = ukf_mod.ukf_predict(est, rotors[k], Q, sc.mav, dt)
            est = ukf_mod.ukf_update(est, p[k], v[k], q[k], w[k], R)
            out[k, 1:] = est.F_ext
    else:
        raise ScenarioError("replay supports the ekf and ukf estimators")
    return out
