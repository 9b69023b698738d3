"""Attitude representations and conversions.

Conventions used throughout the toolkit:

* Quaternions are Hamilton, stored scalar-last as ``[qx, qy, qz, qw]``.
* ``quat_to_rotmat(q)`` maps body-frame vectors into the inertial frame,
  and composition satisfies ``R(q1 (x) q2) = R(q1) R(q2)``.
* Euler angles are Z-Y-X (yaw-pitch-roll): ``R = Rz(psi) Ry(theta) Rx(phi)``.
* Modified Rodrigues Parameters follow ``p = f qv / (a + qs)`` with
  ``f = 2 (a + 1)``; the default configuration is ``a = 1, f = 4``.

All functions accept batched inputs: a quaternion argument of shape
``(..., 4)`` is processed along its last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMrp

QUAT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class MrpConfig:
    """MRP scale configuration: ``f`` is pinned to ``2 (a + 1)``."""

    a: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"MRP parameter a must lie in [0, 1], got {self.a}")

    @property
    def f(self) -> float:
        return 2.0 * (self.a + 1.0)


DEFAULT_MRP = MrpConfig(a=1.0)

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q):
    """Rescale to unit norm (no sign convention applied)."""
    q = np.asarray(q, dtype=float)
    n = np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
    return q / n


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    out[..., :3] = -q[..., :3]
    out[..., 3] = q[..., 3]
    return out


def quat_inverse(q):
    """Inverse of a unit quaternion (its conjugate)."""
    return quat_conjugate(q)


def quat_multiply(q1, q2):
    """Hamilton product q1 (x) q2, renormalized.

    ``quat_multiply(dq, q)`` rotates ``q`` by ``dq`` applied in the
    inertial frame: R(dq (x) q) = R(dq) R(q).
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    v1, s1 = q1[..., :3], q1[..., 3:4]
    v2, s2 = q2[..., :3], q2[..., 3:4]
    v = s1 * v2 + s2 * v1 + np.cross(v1, v2)
    s = s1 * s2 - np.sum(v1 * v2, axis=-1, keepdims=True)
    return quat_normalize(np.concatenate([v, s], axis=-1))


def quat_from_axis_angle(axis, angle: float):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([np.sin(half) * axis, [np.cos(half)]])


def quat_rotation_angle(q) -> float:
    """Rotation angle in [0, pi] represented by a unit quaternion."""
    q = np.asarray(q, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(q[..., :3], axis=-1), np.abs(q[..., 3]))


def quat_to_rotmat(q):
    """Rotation matrix (body -> inertial) of a unit quaternion."""
    q = np.asarray(q, dtype=float)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1.0 - 2.0 * (yy + zz)
    R[..., 0, 1] = 2.0 * (xy - wz)
    R[..., 0, 2] = 2.0 * (xz + wy)
    R[..., 1, 0] = 2.0 * (xy + wz)
    R[..., 1, 1] = 1.0 - 2.0 * (xx + zz)
    R[..., 1, 2] = 2.0 * (yz - wx)
    R[..., 2, 0] = 2.0 * (xz - wy)
    R[..., 2, 1] = 2.0 * (yz + wx)
    R[..., 2, 2] = 1.0 - 2.0 * (xx + yy)
    return R


def rotmat_to_quat(R):
    """Inverse of :func:`quat_to_rotmat`, scalar part kept non-negative."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            x = 0.25 * s
            y = (R[0, 1] + R[1, 0]) / s
            z = (R[0, 2] + R[2, 0]) / s
            w = (R[2, 1] - R[1, 2]) / s
        elif i == 1:
            s = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
            x = (R[0, 1] + R[1, 0]) / s
            y = 0.25 * s
            z = (R[1, 2] + R[2, 1]) / s
            w = (R[0, 2] - R[2, 0]) / s
        else:
            s = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
            x = (R[0, 2] + R[2, 0]) / s
            y = (R[1, 2] + R[2, 1]) / s
            z = 0.25 * s
            w = (R[1, 0] - R[0, 1]) / s
    q = np.array([x, y, z, w])
    if q[3] < 0.0:
        q = -q
    return quat_normalize(q)


def euler_to_rotmat(eta):
    """Z-Y-X Euler angles (roll, pitch, yaw) to rotation matrix."""
    eta = np.asarray(eta, dtype=float)
    phi, theta, psi = eta[..., 0], eta[..., 1], eta[..., 2]
    cph, sph = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cps, sps = np.cos(psi), np.sin(psi)
    R = np.empty(eta.shape[:-1] + (3, 3))
    R[..., 0, 0] = cps * cth
    R[..., 0, 1] = cps * sth * sph - sps * cph
    R[..., 0, 2] = cps * sth * cph + sps * sph
    R[..., 1, 0] = sps * cth
    R[..., 1, 1] = sps * sth * sph + cps * cph
    R[..., 1, 2] = sps * sth * cph - cps * sph
    R[..., 2, 0] = -sth
    R[..., 2, 1] = cth * sph
    R[..., 2, 2] = cth * cph
    return R


def rotmat_to_euler(R):
    """Z-Y-X Euler angles from a rotation matrix (|pitch| < pi/2 branch)."""
    R = np.asarray(R, dtype=float)
    theta = np.arcsin(np.clip(-R[..., 2, 0], -1.0, 1.0))
    phi = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    psi = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([phi, theta, psi], axis=-1)


def euler_to_quat(eta):
    return rotmat_to_quat(euler_to_rotmat(eta))


def quat_to_euler(q):
    return rotmat_to_euler(quat_to_rotmat(q))


def quat_to_mrp(q, cfg: MrpConfig = DEFAULT_MRP):
    """MRP of a unit quaternion: p = f qv / (a + qs)."""
    q = np.asarray(q, dtype=float)
    denom = cfg.a + q[..., 3:4]
    if np.any(np.abs(denom) < 1e-12):
        raise SingularMrp(f"|a + qs| < 1e-12 with a={cfg.a}")
    return cfg.f * q[..., :3] / denom


def mrp_to_quat(p, cfg: MrpConfig = DEFAULT_MRP):
    """Unit quaternion of an MRP vector, scalar part forced non-negative."""
    p = np.asarray(p, dtype=float)
    a, f = cfg.a, cfg.f
    n2 = np.sum(p * p, axis=-1, keepdims=True)
    qs = (-a * n2 + f * np.sqrt(f * f + (1.0 - a * a) * n2)) / (f * f + n2)
    qv = (a + qs) / f * p
    q = np.concatenate([qv, qs], axis=-1)
    neg = q[..., 3:4] < 0.0
    q = np.where(neg, -q, q)
    return quat_normalize(q)


def quat_integrate(q, omega, Ts: float):
    """Propagate a unit quaternion under constant body rate over Ts.

    Exact closed form of qdot = 1/2 q (x) (omega, 0); the zero-rate limit
    is handled with a series branch to avoid 0/0.
    """
    if Ts <= 0.0:
        raise ValueError("Ts must be positive")
    q = np.asarray(q, dtype=float)
    Om = integration_matrix(omega, Ts)
    out = np.einsum("...ij,...j->...i", Om, q)
    return quat_normalize(out)


def integration_matrix(omega, Ts: float):
    """Orthogonal 4x4 propagator of the constant-rate quaternion kinematics."""
    omega = np.asarray(omega, dtype=float)
    w = np.sqrt(np.sum(omega * omega, axis=-1))
    half = 0.5 * w * Ts
    ups = np.cos(half)
    # sin(half)/w with a series branch below ||omega|| Ts < 1e-8
    small = w * Ts < 1e-8
    wsafe = np.where(small, 1.0, w)
    sinc = np.where(small, 0.5 * Ts * (1.0 - half * half / 6.0), np.sin(half) / wsafe)
    psi = sinc[..., None] * omega
    Om = np.zeros(omega.shape[:-1] + (4, 4))
    px, py, pz = psi[..., 0], psi[..., 1], psi[..., 2]
    Om[..., 0, 0] = ups
    Om[..., 1, 1] = ups
    Om[..., 2, 2] = ups
    Om[..., 3, 3] = ups
    # upsilon I3 - skew(psi) block plus psi column / -psi^T row
    Om[..., 0, 1] = pz
    Om[..., 0, 2] = -py
    Om[..., 1, 0] = -pz
    Om[..., 1, 2] = px
    Om[..., 2, 0] = py
    Om[..., 2, 1] = -px
    Om[..., 0, 3] = px
    Om[..., 1, 3] = py
    Om[..., 2, 3] = pz
    Om[..., 3, 0] = -px
    Om[..., 3, 1] = -py
    Om[..., 3, 2] = -pz
    return Om


def skew(v):
    """Cross-product matrix: skew(v) @ u == v x u."""
    v = np.asarray(v)
    S = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    S[..., 0, 1] = -v[..., 2]
    S[..., 0, 2] = v[..., 1]
    S[..., 1, 0] = v[..., 2]
    S[..., 1, 2] = -v[..., 0]
    S[..., 2, 0] = -v[..., 1]
    S[..., 2, 1] = v[..., 0]
    return S


def rotvec_to_rotmat(theta):
    """Rodrigues formula, series branch near zero; complex-step safe."""
    theta = np.asarray(theta)
    a2 = np.sum(theta * theta, axis=-1)
    S = skew(theta)
    S2 = S @ S
    small = np.abs(a2) < 1e-12
    a2safe = np.where(small, 1.0, a2)
    a = np.sqrt(a2safe)
    c1 = np.where(small, 1.0 - a2 / 6.0, np.sin(a) / a)
    c2 = np.where(small, 0.5 - a2 / 24.0, (1.0 - np.cos(a)) / a2safe)
    eye = np.eye(3, dtype=S.dtype)
    return eye + c1[..., None, None] * S + c2[..., None, None] * S2


def euler_rate_matrix(eta):
    """Map body rates to Z-Y-X Euler-angle rates: etadot = E(eta) omega."""
    eta = np.asarray(eta, dtype=float)
    phi, theta = eta[..., 0], eta[..., 1]
    cph, sph = np.cos(phi), np.sin(phi)
    cth, tth = np.cos(theta), np.tan(theta)
    E = np.empty(eta.shape[:-1] + (3, 3))
    E[..., 0, 0] = 1.0
    E[..., 0, 1] = sph * tth
    E[..., 0, 2] = cph * tth
    E[..., 1, 0] = 0.0
    E[..., 1, 1] = cph
    E[..., 1, 2] = -sph
    E[..., 2, 0] = 0.0
    E[..., 2, 1] = sph / cth
    E[..., 2, 2] = cph / cth
    return E


def body_rate_from_euler_rate(eta, eta_dot):
    """Inverse of :func:`euler_rate_matrix`: omega from Euler-angle rates."""
    eta = np.asarray(eta, dtype=float)
    eta_dot = np.asarray(eta_dot, dtype=float)
    phi, theta = eta[..., 0], eta[..., 1]
    cph, sph = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    dphi, dth, dpsi = eta_dot[..., 0], eta_dot[..., 1], eta_dot[..., 2]
    wx = dphi - sth * dpsi
    wy = cph * dth + sph * cth * dpsi
    wz = -sph * dth + cph * cth * dpsi
    return np.stack([wx, wy, wz], axis=-1)


def random_quat(rng: np.random.Generator, max_angle: float = np.pi):
    """Uniform random rotation axis with angle in (0, max_angle), qs >= 0."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return quat_from_axis_angle(axis, angle)
