import numpy as np
import pytest
from numpy.testing import assert_allclose

from swarmlift.analysis import AnalysisConfig, build_closed_loop, margin_plant
from swarmlift.errors import ChannelMismatch
from swarmlift.mu import (
    TuningGrid,
    assemble_n_delta,
    default_blocks,
    default_frequency_grid,
    margin_point,
    rs_partition,
    sample_admissible_perturbation,
    ssv_upper_bound,
)
from swarmlift.uncertainty import UncertaintyBlock, performance_weight

FREQS = default_frequency_grid(60)


def _assembled(n=2, M=8.0, C=6.0):
    cfg = AnalysisConfig(n_agents=n, tuning_M=M, tuning_C=C)
    plant, ok = margin_plant(build_closed_loop(cfg))
    assert ok
    return assemble_n_delta(plant, default_blocks(n), performance_weight())


def test_block_count_enumeration():
    for n in (2, 3, 5):
        blocks = default_blocks(n)
        assert len(blocks) == 2 + 2 * n + (n - 1)


def test_lft_closure_identity():
    # with Delta = 0 the N interconnection reproduces the weighted nominal
    # closed loop exactly
    cfg = AnalysisConfig(n_agents=2)
    plant, _ = margin_plant(build_closed_loop(cfg))
    N, structure = assemble_n_delta(plant, default_blocks(2),
                                    performance_weight())
    from swarmlift.lti import output_weight

    weighted = plant
    for b in default_blocks(2):
        if b.weight is not None:
            weighted = output_weight(weighted, f"y_{b.name}", b.weight)
    pw = performance_weight()
    for name, _ in weighted.outputs:
        if name.startswith("z_lat"):
            weighted = output_weight(weighted, name, pw)
    rng = np.random.default_rng(3)
    w_test = np.exp(rng.uniform(np.log(1e-3), np.log(1e2), 20))
    z_names = [f"z_lat_{i}" for i in range(2)]
    G_N = N.subsystem(out_names=z_names, in_names=["w"]).freq_response(w_test)
    G_ref = weighted.subsystem(out_names=z_names,
                               in_names=["w"]).freq_response(w_test)
    assert np.max(np.abs(G_N - G_ref)) < 1e-9


def test_ssv_single_full_block_is_sigma_max():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    mu = ssv_upper_bound(M[None], [UncertaintyBlock("all", "full", 4, 4)])
    assert_allclose(mu[0], np.linalg.svd(M, compute_uv=False)[0], rtol=1e-9)


def test_ssv_scaling_invariance():
    G11, struct = rs_partition(*(lambda nd: (nd[0].freq_response([0.5, 3.0]),
                                             nd[1]))(_assembled()))
    # apply a block-commuting diagonal similarity
    r = c = 0
    ny = sum(b.dim_y for b in struct)
    nu = sum(b.dim_u for b in struct)
    row = np.ones(ny)
    col = np.ones(nu)
    rng = np.random.default_rng(7)
    for b in struct:
        d = np.exp(rng.uniform(-1.0, 1.0, b.dim_y))
        row[r:r + b.dim_y] = d
        col[c:c + b.dim_u] = d
        r += b.dim_y
        c += b.dim_u
    G_scaled = row[None, :, None] * G11 / col[None, None, :]
    tight = dict(balance_tol=1e-12, max_balance=3000, polish_tol=1e-12)
    mu0 = ssv_upper_bound(G11, struct, **tight)
    mu1 = ssv_upper_bound(G_scaled, struct, **tight)
    assert np.max(np.abs(mu1 - mu0) / mu0) < 1e-6


def test_ssv_dominates_spectral_radius():
    N, struct = _assembled()
    G = N.freq_response(FREQS)
    G11, rs_struct = rs_partition(G, struct)
    mu = ssv_upper_bound(G11, rs_struct)
    rho = np.array([np.max(np.abs(np.linalg.eigvals(G11[k])))
                    for k in range(len(FREQS))])
    assert np.all(mu >= rho - 1e-9)


def test_ssv_structure_mismatch_raises():
    with pytest.raises(ChannelMismatch):
        ssv_upper_bound(np.zeros((1, 3, 3)),
                        [UncertaintyBlock("a", "repeated", 2, 2)])


def test_single_mass_perturbation_first_order():
    # closing only the mass channel with small real delta matches the
    # rebuilt plant to first order (oracle for the channel wiring)
    import dataclasses

    from swarmlift.analysis import linearize, rest_state, zero_input

    cfg = AnalysisConfig(n_agents=2)
    nom = linearize(cfg, "rest")
    x0 = rest_state(cfg)
    for delta in (0.04, -0.04):
        isl = nom.input_slice("u_mass")
        osl = nom.output_slice("y_mass")
        F = np.zeros((nom.n_inputs, nom.n_outputs))
        F[isl, osl] = delta * np.eye(3)
        G = np.linalg.inv(np.eye(nom.n_outputs) - nom.D @ F)
        A_lft = nom.A + nom.B @ F @ G @ nom.C
        cfg_p = AnalysisConfig(n_agents=2)
        m_new = cfg.com.m_sys + delta * cfg.mass_uncertainty * cfg.payload.m_p
        cfg_p.com = dataclasses.replace(cfg_p.com, m_sys=m_new)
        A_reb = linearize(cfg_p, x_full=x0, u0=zero_input(cfg_p)).A
        assert np.abs(A_lft - A_reb).max() < 20.0 * delta**2


def test_margins_structure_and_determinism():
    r1 = margin_point(2, 8.0, 6.0, freqs=FREQS)
    r2 = margin_point(2, 8.0, 6.0, freqs=FREQS)
    assert r1.rs_margin == r2.rs_margin and r1.rp_margin == r2.rp_margin
    assert r1.nominal_stable
    assert r1.rp_margin <= r1.rs_margin + 1e-12
    assert r1.rs_margin > 1.0  # the documented robust tuning point


def test_margin_zero_for_degenerate_and_unstable_tunings():
    r = margin_point(2, 0.0, 6.0, freqs=FREQS)
    assert r.rs_margin == 0.0 and not r.nominal_stable
    r = margin_point(2, 0.05, 0.01, freqs=FREQS)
    assert r.rs_margin == 0.0


def test_tuning_grid_validation():
    g = TuningGrid(M_values=[2.0, 8.0], C_values=[6.0])
    assert len(g.points()) == 2
    with pytest.raises(ValueError):
        TuningGrid(M_values=[-1.0], C_values=[6.0])
    with pytest.raises(ValueError):
        TuningGrid(M_values=[2.0], C_values=[40.0])


def test_sampled_perturbations_respect_structure():
    _, struct = _assembled()
    rng = np.random.default_rng(0)
    D = sample_admissible_perturbation(rng, struct, mass_endpoint=1.0)
    rs_blocks = [b for b in struct if b.name != "perf"]
    n_y = sum(b.dim_y for b in rs_blocks)
    n_u = sum(b.dim_u for b in rs_blocks)
    assert D.shape == (n_u, n_y)
    # mass block pinned at the +1 endpoint
    assert_allclose(D[:3, :3], np.eye(3))
    # block norms within 1
    assert np.linalg.svd(D, compute_uv=False)[0] <= 1.0 + 1e-9


def test_random_delta_hurwitz_at_robust_point():
    from swarmlift.oracles import random_delta_hurwitz_check

    rs, worst = random_delta_hurwitz_check(2, 8.0, 6.0, n_samples=25,
                                           freqs=FREQS)
    assert rs > 1.0
    assert worst < 0.0
