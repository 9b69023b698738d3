"""Built-in independent oracles backing the test suite.

Each check recomputes a quantity through a route independent of the
implementation it validates: finite differences against analytic Jacobians,
brute-force sums against closed forms, analytic ODE solutions against
discretizations, random admissible perturbations against margin claims.
The mutation hook deliberately injects a sign error so the suite can prove
the oracles detect broken dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ekf as ekf_mod
from . import ukf as ukf_mod
from .admittance import AdmittanceParams, AdmittanceState, admittance_step, fsm_step
from .admittance import AdmittanceMode
from .analysis import AnalysisConfig, chart_rhs_out, rest_state, to_chart, zero_input
from .attitude import (
    mrp_to_quat,
    quat_integrate,
    quat_multiply,
    quat_to_mrp,
    quat_to_rotmat,
    random_quat,
)
from .mav import EZ, GRAVITY, AgentState, MavParams, translational_dynamics
from .payload import PayloadParams, system_mass_inertia

MUTATIONS = ("gravity_sign", "coriolis_sign", "drag_sign")


@dataclass
class OracleResult:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.measured < self.tolerance

    def line(self) -> str:
        flag = "pass" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.measured:.3e} < {self.tolerance:.1e}"


@dataclass
class OracleReport:
    results: list

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary(self) -> str:
        lines = [r.line() for r in self.results]
        verdict = "ALL PASS" if self.all_passed else "FAILURES PRESENT"
        return "\n".join(lines + [verdict])


def oracle_suite(mutate: str | None = None) -> OracleReport:
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"mutation must be one of {MUTATIONS}")
    rng = np.random.default_rng(1234)
    params = MavParams()
    results = []

    grav_term = -GRAVITY * EZ
    if mutate == "gravity_sign":
        grav_term = GRAVITY * EZ
    coriolis_sign = -1.0 if mutate != "coriolis_sign" else 1.0
    drag_sign = 1.0 if mutate != "drag_sign" else -1.0

    # free fall: zero thrust, zero drag, acceleration equals gravity exactly
    st = AgentState(np.zeros(3), rng.normal(size=3), random_quat(rng),
                    np.zeros(3))
    vdot = translational_dynamics(st, 0.0, np.zeros(3), np.zeros(6), params)
    vdot = vdot + (grav_term - (-GRAVITY * EZ))  # mutation hook
    results.append(OracleResult(
        "free-fall acceleration equals -g", float(np.max(np.abs(vdot - (-GRAVITY * EZ)))),
        1e-12))

    # gyroscopic term against a hand cross product
    J = params.J
    omega = rng.normal(size=3)
    impl = (coriolis_sign * np.cross(omega, J * omega)) / J
    oracle = -np.cross(omega, J * omega) / J
    results.append(OracleResult(
        "gyroscopic torque sign", float(np.max(np.abs(impl - oracle))), 1e-12))

    # rotor drag opposes lateral body velocity
    st = AgentState(np.zeros(3), np.array([1.0, 0.0, 0.0]),
                    np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))
    n_rot = 400.0 * np.ones(6)
    vdot_d = translational_dynamics(st, params.m * GRAVITY, np.zeros(3), n_rot,
                                    params)
    drag_acc = drag_sign * (vdot_d[0])
    results.append(OracleResult(
        "rotor drag opposes velocity", float(max(drag_acc + 1e-15, 0.0)), 1e-12))

    # quaternion round trips and integration against the ODE oracle
    worst = 0.0
    for _ in range(300):
        q = random_quat(rng, max_angle=np.pi - 1e-3)
        worst = max(worst, float(np.max(np.abs(mrp_to_quat(quat_to_mrp(q)) - q))))
    results.append(OracleResult("quat<->MRP round trip", worst, 1e-12))

    worst = 0.0
    for _ in range(20):
        q = random_quat(rng)
        om = rng.normal(scale=0.5, size=3)
        q1 = quat_integrate(q, om, 0.05)
        qq = q.copy()
        h = 0.05 / 200
        for _ in range(200):
            def f(qv):
                v, s = qv[:3], qv[3]
                return np.concatenate([0.5 * (s * om + np.cross(v, om)),
                                       [-0.5 * np.dot(v, om)]])
            k1 = f(qq)
            k2 = f(qq + 0.5 * h * k1)
            k3 = f(qq + 0.5 * h * k2)
            k4 = f(qq + h * k3)
            qq = qq + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        qq /= np.linalg.norm(qq)
        worst = max(worst, float(np.max(np.abs(q1 - qq))))
    results.append(OracleResult("quat integration vs ODE", worst, 1e-8))

    worst = 0.0
    for _ in range(50):
        a, b = random_quat(rng), random_quat(rng)
        worst = max(worst, float(np.max(np.abs(
            quat_to_rotmat(quat_multiply(a, b))
            - quat_to_rotmat(a) @ quat_to_rotmat(b)))))
    results.append(OracleResult("Hamilton composition", worst, 1e-9))

    # EKF process Jacobian against central finite differences
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=ekf_mod.NX) * np.repeat(
            [2.0, 1.0, 0.2, 0.5, 2.0, 0.1], 3)
        u = (rng.normal(scale=0.1), rng.normal(scale=0.1), 0.0,
             params.m * GRAVITY + rng.normal(scale=3.0))
        A = ekf_mod.process_jacobian(x, u, params)
        eps = 1e-6
        for j in range(ekf_mod.NX):
            dx = np.zeros(ekf_mod.NX)
            dx[j] = eps
            col = (ekf_mod.process_rhs(x + dx, u, params)
                   - ekf_mod.process_rhs(x - dx, u, params)) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(A[:, j] - col))
                                     / max(1.0, np.max(np.abs(col)))))
    results.append(OracleResult("EKF Jacobian vs finite differences", worst,
                                1e-4))

    # linearization against central finite differences at random states
    cfg = AnalysisConfig(n_agents=2)
    x0 = rest_state(cfg)
    u0 = zero_input(cfg)
    xc0, q_ref = to_chart(cfg, x0)
    worst = 0.0
    for _ in range(20):
        xc = xc0 + rng.normal(scale=0.02, size=xc0.size)
        u = u0 + rng.normal(scale=0.02, size=u0.size)
        from .analysis import complex_step_jacobian

        J_cs = complex_step_jacobian(
            lambda z: chart_rhs_out(cfg, z, u.astype(z.dtype), q_ref)[0], xc)
        eps = 1e-6
        cols = rng.choice(xc.size, size=6, replace=False)
        for j in cols:
            dx = np.zeros(xc.size)
            dx[j] = eps
            col = (chart_rhs_out(cfg, xc + dx, u, q_ref)[0]
                   - chart_rhs_out(cfg, xc - dx, u, q_ref)[0]) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(J_cs[:, j] - col))
                                     / max(1.0, np.max(np.abs(col)))))
    results.append(OracleResult(
        "coupled-model linearization vs finite differences", worst, 1e-4))

    # unscented transform affine exactness
    cfgu = ukf_mod.UkfConfig()
    A_m = rng.normal(size=(ukf_mod.NXI, ukf_mod.NXI))
    P = A_m @ A_m.T + 0.5 * np.eye(ukf_mod.NXI)
    xi = rng.normal(size=ukf_mod.NXI)
    M = rng.normal(size=(7, ukf_mod.NXI))
    b = rng.normal(size=7)
    pts = ukf_mod.sigma_points(xi, P, cfgu)
    wm, wc = cfgu.weights()
    ypts = pts @ M.T + b[None, :]
    ymean = wm @ ypts
    dev = ypts - ymean[None, :]
    ycov = dev.T @ (wc[:, None] * dev)
    err = max(float(np.max(np.abs(ymean - (M @ xi + b)))),
              float(np.max(np.abs(ycov - M @ P @ M.T))))
    results.append(OracleResult("unscented transform affine exactness", err,
                                1e-9))

    # point-mass system inertia against a brute-force sum
    att = np.array([[0.7, 0.1, 0.0], [-0.3, 0.5, 0.1], [-0.4, -0.6, -0.1]])
    pay = PayloadParams(m_p=2.0, J_p=[0.2, 0.25, 0.4], attachments=att)
    masses = np.array([3.5, 3.3, 3.7])
    si = system_mass_inertia(pay, masses)
    brute = np.diag([0.2, 0.25, 0.4]).astype(float)
    for m_i, r in zip(masses, att):
        brute += m_i * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
    results.append(OracleResult(
        "point-mass inertia brute force",
        float(np.max(np.abs(si.J_sys - brute))), 1e-12))

    # admittance exact discretization against the analytic terminal velocity
    p_adm = AdmittanceParams(M=np.array([8.0, 8.0, 8.0]),
                             C=np.array([6.0, 6.0, 6.0]),
                             K=np.array([0.0, 0.0, 0.0]))
    stt = AdmittanceState(params=p_adm)
    stt = fsm_step(stt, np.zeros(3), 0.01, command="engage",
                   current_pose=np.zeros(3))
    stt.axis_generating[:] = True
    stt.mode = AdmittanceMode.GENERATING
    ncyc = 500
    for _ in range(ncyc):
        stt = admittance_step(stt, [6.0, 0, 0], 0.01)
    v_expect = 1.0 * (1 - np.exp(-6.0 / 8.0 * ncyc * 0.01))
    results.append(OracleResult(
        "admittance ZOH vs analytic response",
        float(abs(stt.dLambda_r[0] - v_expect)), 1e-9))

    return OracleReport(results=results)


def random_delta_hurwitz_check(n_agents: int = 2, M: float = 10.0,
                               C: float = 6.0, n_samples: int = 50,
                               seed: int = 0, freqs=None):
    """Monte-Carlo necessary condition: at a tuning point with rs > 1, every
    sampled admissible perturbation (mass pinned at both interval endpoints
    included) leaves the closed loop without growing modes.

    Returns (rs_margin, worst real part over sampled perturbed loops).
    Perturbations close the Delta channels of the deflated interconnection;
    growth is measured on the perturbed state matrix.
    """
    from .analysis import build_closed_loop, margin_plant
    from .mu import assemble_n_delta, default_blocks, margin_point, rs_partition
    from .mu import sample_admissible_perturbation
    from .uncertainty import performance_weight

    res = margin_point(n_agents, M, C, freqs=freqs)
    cfg = AnalysisConfig(n_agents=n_agents, tuning_M=M, tuning_C=C)
    plant, ok = margin_plant(build_closed_loop(cfg))
    N_sys, structure = assemble_n_delta(plant, default_blocks(n_agents),
                                        performance_weight())
    rs_blocks = [b for b in structure if b.name != "perf"]
    n_y = sum(b.dim_y for b in rs_blocks)
    n_u = sum(b.dim_u for b in rs_blocks)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for k in range(n_samples):
        endpoint = None
        if k == 0:
            endpoint = 1.0
        elif k == 1:
            endpoint = -1.0
        D = sample_admissible_perturbation(rng, structure,
                                           mass_endpoint=endpoint)
        # close u_Delta = D_real y_Delta on the state-space (complex Delta
        # handled by doubling: [[Re, -Im], [Im, Re]] acting on a realified
        # system is equivalent for stability of the complex LFT)
        A = N_sys.A
        Bd = N_sys.B[:, :n_u]
        Cd = N_sys.C[:n_y, :]
        Dd = N_sys.D[:n_y, :n_u]
        nst = A.shape[0]
        Ar = np.block([[A, np.zeros_like(A)], [np.zeros_like(A), A]])
        Br = np.block([[Bd, np.zeros_like(Bd)], [np.zeros_like(Bd), Bd]])
        Cr = np.block([[Cd, np.zeros_like(Cd)], [np.zeros_like(Cd), Cd]])
        Dr = np.block([[Dd, np.zeros_like(Dd)], [np.zeros_like(Dd), Dd]])
        DR = np.block([[D.real, -D.imag], [D.imag, D.real]])
        closure = np.linalg.solve(np.eye(2 * n_y) - Dr @ DR, Cr)
        A_cl = Ar + Br @ DR @ closure
        ev = np.linalg.eigvals(A_cl)
        ev = ev[np.abs(ev) > 1e-9]  # structural zeros persist by symmetry
        if ev.size:
            worst = max(worst, float(ev.real.max()))
    return res.rs_margin, worst
