"""Continuous-time state-space systems with named signal channels.

Carrier for every linear block of the robust-tuning analysis: blocks are
assembled by wiring named output channels into named input channels, and
evaluated on frequency grids. Kept deliberately small: only what the margin
computation needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import tf2ss

from .errors import ChannelMismatch, SingularAssembly, UnstableSystem

STABILITY_TOL = 1e-9


def _normalize_channels(chs, total, kind):
    if chs is None:
        return [(f"{kind}0", total)] if total else []
    out = []
    for name, size in chs:
        out.append((str(name), int(size)))
    if sum(s for _, s in out) != total:
        raise ChannelMismatch(
            f"{kind} channels sum to {sum(s for _, s in out)}, expected {total}")
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ChannelMismatch(f"duplicate {kind} channel names: {names}")
    return out


@dataclass
class LinearSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: list = field(default_factory=lambda: None)
    outputs: list = field(default_factory=lambda: None)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise SingularAssembly("A must be square")
        if self.B.shape[0] != n and self.B.size == 0:
            self.B = self.B.reshape(n, 0)
        if self.C.shape[1] != n and self.C.size == 0:
            self.C = self.C.reshape(0, n)
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise SingularAssembly(
                f"B/C dimensions inconsistent with {n} states")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            if self.D.size == 0:
                self.D = np.zeros((self.C.shape[0], self.B.shape[1]))
            else:
                raise SingularAssembly("D dimension mismatch")
        self.inputs = _normalize_channels(self.inputs, self.n_inputs, "u")
        self.outputs = _normalize_channels(self.outputs, self.n_outputs, "y")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def input_slice(self, name: str) -> slice:
        return _channel_slice(self.inputs, name, "input")

    def output_slice(self, name: str) -> slice:
        return _channel_slice(self.outputs, name, "output")

    def eigvals(self) -> np.ndarray:
        if self.n_states == 0:
            return np.array([])
        return np.linalg.eigvals(self.A)

    def is_stable(self, tol: float = STABILITY_TOL) -> bool:
        ev = self.eigvals()
        return bool(ev.size == 0 or np.max(ev.real) < -tol)

    def freq_response(self, w) -> np.ndarray:
        """G(jw) = C (jwI - A)^-1 B + D, shape (len(w), p, m)."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if self.n_states == 0:
            return np.broadcast_to(self.D.astype(complex),
                                   (w.size, *self.D.shape)).copy()
        n = self.n_states
        M = (1j * w)[:, None, None] * np.eye(n)[None, :, :] - self.A[None, :, :]
        X = np.linalg.solve(M, np.broadcast_to(self.B, (w.size, n, self.n_inputs)))
        return self.C[None, :, :] @ X + self.D[None, :, :]

    def dc_gain(self) -> np.ndarray:
        if self.n_states == 0:
            return self.D.copy()
        return self.D - self.C @ np.linalg.solve(self.A, self.B)

    def subsystem(self, out_names=None, in_names=None) -> "LinearSystem":
        """Restrict to the named channels (states retained)."""
        o_idx, o_ch = _gather(self.outputs, out_names, "output")
        i_idx, i_ch = _gather(self.inputs, in_names, "input")
        return LinearSystem(self.A, self.B[:, i_idx], self.C[o_idx, :],
                            self.D[np.ix_(o_idx, i_idx)],
                            inputs=i_ch, outputs=o_ch)


def _channel_slice(channels, name, kind):
    start = 0
    for n, size in channels:
        if n == name:
            return slice(start, start + size)
        start += size
    raise ChannelMismatch(f"no {kind} channel named {name!r}")


def _gather(channels, names, kind):
    if names is None:
        names = [n for n, _ in channels]
    idx, chs = [], []
    for name in names:
        sl = _channel_slice(channels, name, kind)
        idx.extend(range(sl.start, sl.stop))
        chs.append((name, sl.stop - sl.start))
    return np.array(idx, dtype=int), chs


def gain_block(M, inputs=None, outputs=None) -> LinearSystem:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return LinearSystem(np.zeros((0, 0)), np.zeros((0, M.shape[1])),
                        np.zeros((M.shape[0], 0)), M,
                        inputs=inputs, outputs=outputs)


def siso_tf(num, den, input_name="u", output_name="y") -> LinearSystem:
    """SISO transfer function to state space (controllable canonical)."""
    A, B, C, D = tf2ss(np.atleast_1d(num), np.atleast_1d(den))
    return LinearSystem(A, B, C, D, inputs=[(input_name, 1)],
                        outputs=[(output_name, 1)])


def first_order_lag(tau: float, gain: float = 1.0, input_name="u",
                    output_name="y", dim: int = 1) -> LinearSystem:
    """gain / (tau s + 1) on each of `dim` parallel channels."""
    A = -np.eye(dim) / tau
    B = np.eye(dim) / tau
    C = gain * np.eye(dim)
    D = np.zeros((dim, dim))
    return LinearSystem(A, B, C, D, inputs=[(input_name, dim)],
                        outputs=[(output_name, dim)])


def integrator(dim: int, input_name="u", output_name="y") -> LinearSystem:
    return LinearSystem(np.zeros((dim, dim)), np.eye(dim), np.eye(dim),
                        np.zeros((dim, dim)), inputs=[(input_name, dim)],
                        outputs=[(output_name, dim)])


def append(*systems: LinearSystem) -> LinearSystem:
    """Block-diagonal composition keeping every channel."""
    from scipy.linalg import block_diag

    A = block_diag(*[s.A for s in systems])
    B = block_diag(*[s.B for s in systems])
    C = block_diag(*[s.C for s in systems])
    D = block_diag(*[s.D for s in systems])
    inputs = [ch for s in systems for ch in s.inputs]
    outputs = [ch for s in systems for ch in s.outputs]
    names_i = [n for n, _ in inputs]
    names_o = [n for n, _ in outputs]
    if len(set(names_i)) != len(names_i) or len(set(names_o)) != len(names_o):
        raise ChannelMismatch("appended systems share channel names")
    return LinearSystem(A, B, C, D, inputs=inputs, outputs=outputs)


def connect(sys: LinearSystem, wires) -> LinearSystem:
    """Close feedback paths: each wire (out_name, in_name[, gain]) drives the
    whole named input channel from the named output channel. Wired inputs
    become internal; everything else stays external. Outputs are retained.
    """
    m, p = sys.n_inputs, sys.n_outputs
    F = np.zeros((m, p))
    wired = np.zeros(m, dtype=bool)
    for wire in wires:
        out_name, in_name = wire[0], wire[1]
        gain = wire[2] if len(wire) > 2 else 1.0
        osl, isl = sys.output_slice(out_name), sys.input_slice(in_name)
        G = np.asarray(gain, dtype=float)
        if G.ndim == 0:
            if isl.stop - isl.start != osl.stop - osl.start:
                raise SingularAssembly(
                    f"scalar wire {out_name}->{in_name} joins channels of "
                    f"different widths")
            G = G * np.eye(isl.stop - isl.start)
        if wired[isl].any():
            raise SingularAssembly(f"input {in_name!r} wired twice")
        F[isl, osl] = G
        wired[isl] = True
    ext = ~wired
    E = np.eye(m)[:, ext]
    IDF = np.eye(p) - sys.D @ F
    try:
        G_y = np.linalg.solve(IDF, np.hstack([sys.C, sys.D @ E]))
    except np.linalg.LinAlgError as exc:
        raise SingularAssembly("algebraic loop: I - D F singular") from exc
    Cy, Dy = G_y[:, :sys.n_states], G_y[:, sys.n_states:]
    A_cl = sys.A + sys.B @ F @ Cy
    B_cl = sys.B @ E + sys.B @ F @ Dy
    ext_channels = []
    start = 0
    for name, size in sys.inputs:
        if ext[start:start + size].all():
            ext_channels.append((name, size))
        elif ext[start:start + size].any():
            raise SingularAssembly(f"channel {name!r} partially wired")
        start += size
    return LinearSystem(A_cl, B_cl, Cy, Dy, inputs=ext_channels,
                        outputs=list(sys.outputs))


def output_weight(sys: LinearSystem, channel: str, weight) -> LinearSystem:
    """Filter one output channel through a SISO weight (copied per entry)
    or a list of per-entry SISO weights."""
    sl = sys.output_slice(channel)
    k = sl.stop - sl.start
    weights = list(weight) if isinstance(weight, (list, tuple)) else [weight] * k
    if len(weights) != k:
        raise ChannelMismatch(
            f"channel {channel!r} has {k} entries, got {len(weights)} weights")
    for wgt in weights:
        if wgt.n_inputs != 1 or wgt.n_outputs != 1:
            raise ChannelMismatch("weights must be SISO")
    n = sys.n_states
    n_extra = sum(wgt.n_states for wgt in weights)
    A = np.zeros((n + n_extra, n + n_extra))
    A[:n, :n] = sys.A
    B = np.zeros((n + n_extra, sys.n_inputs))
    B[:n, :] = sys.B
    C = np.zeros((sys.n_outputs, n + n_extra))
    C[:, :n] = sys.C
    D = sys.D.copy()
    off = n
    for i, wgt in enumerate(weights):
        r = sl.start + i
        ws = slice(off, off + wgt.n_states)
        off += wgt.n_states
        A[ws, ws] = wgt.A
        A[ws, :n] = wgt.B @ sys.C[r:r + 1, :]
        B[ws, :] = wgt.B @ sys.D[r:r + 1, :]
        C[r, :n] = wgt.D[0, 0] * sys.C[r, :]
        C[r, ws] = wgt.C[0]
        D[r, :] = wgt.D[0, 0] * sys.D[r, :]
    return LinearSystem(A, B, C, D, inputs=list(sys.inputs),
                        outputs=list(sys.outputs))


def max_singular_value(sys: LinearSystem, w) -> np.ndarray:
    G = sys.freq_response(w)
    return np.linalg.svd(G, compute_uv=False)[:, 0]


def hinf_norm(sys: LinearSystem, w_lo: float = 1e-3, w_hi: float = 1e2,
              n_grid: int = 400, refine: bool = True) -> float:
    """Peak maximum singular value over frequency, with golden-section
    refinement around the grid peak (DC and the w->inf limit included)."""
    if not sys.is_stable():
        raise UnstableSystem("H-infinity norm requires a stable system")
    w = np.logspace(np.log10(w_lo), np.log10(w_hi), n_grid)
    sv = max_singular_value(sys, w)
    candidates = [float(sv.max())]
    if sys.n_states:
        candidates.append(float(np.linalg.svd(sys.dc_gain(),
                                              compute_uv=False)[0]))
    candidates.append(float(np.linalg.svd(sys.D, compute_uv=False)[0])
                      if sys.D.size else 0.0)
    peak = max(candidates)
    if refine and sv.max() >= peak - 1e-15:
        k = int(np.argmax(sv))
        lo = w[max(k - 1, 0)]
        hi = w[min(k + 1, n_grid - 1)]
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        a, b = np.log(lo), np.log(hi)
        c, d = b - gr * (b - a), a + gr * (b - a)
        fc = max_singular_value(sys, [np.exp(c)])[0]
        fd = max_singular_value(sys, [np.exp(d)])[0]
        for _ in range(60):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = max_singular_value(sys, [np.exp(c)])[0]
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = max_singular_value(sys, [np.exp(d)])[0]
        peak = max(peak, float(fc), float(fd))
    return peak
