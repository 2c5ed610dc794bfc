import numpy as np
import pytest

from risec import rcce
from risec.metrics import NoisePowers, RcceDesign, rcce_radar_sinr, rcce_rates

from conftest import cn, random_channels, unit_modulus

NOISE = NoisePowers(1.0, 1.0, 0.05)


def test_zf_examples():
    np.testing.assert_allclose(rcce.zf_beamformer(np.array([1, 1]), np.array([1, 0])), [0, 1], atol=1e-12)
    hB = np.array([1.0, 1j])
    hE = np.array([1.0, -1j])  # hE @ hB^H = 0
    np.testing.assert_allclose(rcce.zf_beamformer(hB, hE), hB.conj() / np.linalg.norm(hB), atol=1e-12)
    with pytest.raises(rcce.DegenerateChannel):
        rcce.zf_beamformer(np.array([1.0, 2.0]), np.array([2.0, 4.0]))


def test_zf_nulls_eve(rng):
    for _ in range(20):
        hB, hE = cn(rng, 4), cn(rng, 4)
        w = rcce.zf_beamformer(hB, hE)
        assert abs(hE @ w) <= 1e-9 * np.linalg.norm(hE)
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)


def _design(rng, ch, eps=0.5):
    q = np.ones(ch.M, dtype=complex)
    w = rcce.zf_beamformer(ch.h_B(q), ch.h_E(q))
    return RcceDesign(eps, w, rcce.initial_radar_covariance(ch.h_B(q), ch.N), q)


def test_radar_covariance_constraints(rng):
    for _ in range(10):
        ch = random_channels(rng, 3, 2)
        d = _design(rng, ch)
        R = rcce.optimize_radar_covariance(d, ch, NOISE, 10.0, 1.0)
        hB = ch.h_B(d.q)
        assert abs(hB @ R @ hB.conj()) <= 1e-7
        assert np.trace(R).real == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.eigvalsh(R).min() >= -1e-9
        nd = RcceDesign(d.epsilon, d.w, R, d.q)
        assert rcce_radar_sinr(nd, ch, NOISE, 10.0) >= 1.0 * (1 - 1e-6)


def test_radar_covariance_without_bob_maximises_eve_interference(rng):
    # with Bob silent, C_s = -C_E, so radar interference at Eve should be as large as possible
    ch = random_channels(rng, 3, 1)
    ch.h_AB[:] = 0
    ch.h_IB[:] = 0
    q = np.ones(1, dtype=complex)
    hE = ch.h_E(q)
    w = np.ones(3) / np.sqrt(3)
    R = rcce.optimize_radar_covariance(RcceDesign(0.5, w, np.eye(3) / 3, q), ch, NOISE, 1.0, 1e-12)
    assert np.real(hE @ R @ hE.conj()) == pytest.approx(np.linalg.norm(hE) ** 2, rel=1e-6)


def _grid_secrecy(d, ch, V, gamma, P):
    """Best C_s over R = V U diag(rho, 1 - rho) U^H V^H on a (rho, rotation) grid."""
    rho = np.linspace(0, 1, 100)[:, None, None]
    a = np.linspace(0, np.pi, 50)[None, :, None]
    ph = np.array([0.0, np.pi / 2])[None, None, :]
    hB, hE = ch.h_B(d.q), ch.h_E(d.q)
    g = hE @ V  # Eve's channel seen in the null-space coordinates
    u1 = g[0] * np.cos(a) + g[1] * np.sin(a) * np.exp(1j * ph)
    u2 = -g[0] * np.sin(a) * np.exp(-1j * ph) + g[1] * np.cos(a)
    t = rho * abs(u1) ** 2 + (1 - rho) * abs(u2) ** 2  # tr(H_E R)
    e, s2 = d.epsilon, NOISE.sigma_E_sq
    sigE = e * P * abs(hE @ d.w) ** 2
    C_E = np.log2(1 + sigE / ((1 - e) * P * t + s2))
    C_B = np.log2(1 + e * P * abs(hB @ d.w) ** 2 / NOISE.sigma_B_sq)
    gE = np.linalg.norm(hE) ** 2
    sinr = (1 - e) * P * gE * t / (e * P * gE * abs(hE @ d.w) ** 2 + ch.N * NOISE.sigma_A_sq)
    ok = sinr >= gamma
    return np.max(np.where(ok, C_B - C_E, -np.inf))


def test_radar_covariance_near_parametric_grid():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(20):
        ch = random_channels(rng, 3, 1)
        # an imperfect w so that Eve's leakage depends on R
        d = RcceDesign(0.5, np.ones(3) / np.sqrt(3), np.eye(3) / 3, np.ones(1, dtype=complex))
        V = rcce.null_basis(ch.h_B(d.q))
        best = _grid_secrecy(d, ch, V, 0.5, 10.0)
        try:
            R = rcce.optimize_radar_covariance(d, ch, NOISE, 10.0, 0.5)
        except rcce.RadarInfeasible:
            assert best == -np.inf
            continue
        got = rcce.secrecy(RcceDesign(d.epsilon, d.w, R, d.q), ch, NOISE, 10.0)
        assert got >= best - 0.01 * abs(best)
        checked += 1
    assert checked >= 10


def test_ris_phase_sweep_m1():
    rng = np.random.default_rng(6)
    sweep = np.exp(2j * np.pi * np.arange(3600) / 3600)
    for _ in range(20):
        ch = random_channels(rng, 2, 1)
        d = _design(rng, ch)
        gamma = 0.5
        try:
            R = rcce.optimize_radar_covariance(d, ch, NOISE, 10.0, gamma)
        except rcce.RadarInfeasible:
            continue
        d = RcceDesign(d.epsilon, d.w, R, d.q)
        q = rcce.optimize_ris_phases_rcce(d, ch, NOISE, 10.0, gamma, rng=np.random.default_rng(0))
        got = rcce.secrecy(RcceDesign(d.epsilon, d.w, d.R, q), ch, NOISE, 10.0)
        best = max(rcce.secrecy(RcceDesign(d.epsilon, d.w, d.R, np.array([p])), ch, NOISE, 10.0)
                   for p in sweep if rcce.radar_ok(RcceDesign(d.epsilon, d.w, d.R, np.array([p])),
                                                   ch, NOISE, 10.0, gamma))
        assert got >= best - 0.005 * abs(best)
        assert got >= rcce.secrecy(d, ch, NOISE, 10.0) - 1e-12


def test_ris_phases_irrelevant_without_ris_links(rng):
    ch = random_channels(rng, 3, 2).without_ris()
    d = _design(rng, ch)
    q = rcce.optimize_ris_phases_rcce(d, ch, NOISE, 10.0, 0.1, rng=rng)
    np.testing.assert_allclose(np.abs(q), 1.0)
    a = rcce_rates(d, ch, NOISE, 10.0)
    b = rcce_rates(RcceDesign(d.epsilon, d.w, d.R, q), ch, NOISE, 10.0)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_power_split_grid():
    rng = np.random.default_rng(2)
    ch = random_channels(rng, 3, 2)
    d = _design(rng, ch)
    R = rcce.optimize_radar_covariance(d, ch, NOISE, 10.0, 1e-9)
    d = RcceDesign(0.5, d.w, R, d.q)
    # ZF keeps C_E = 0, so C_s grows with eps and the top grid point wins when gamma = 0
    assert rcce.optimize_power_split(d, ch, NOISE, 10.0, 0.0) == pytest.approx(0.99)
    gamma = 0.5 * rcce_radar_sinr(RcceDesign(0.5, d.w, R, d.q), ch, NOISE, 10.0)
    e = rcce.optimize_power_split(d, ch, NOISE, 10.0, gamma)
    fine = [x for x in np.arange(1, 1000) * 1e-3
            if rcce.radar_ok(RcceDesign(x, d.w, R, d.q), ch, NOISE, 10.0, gamma)]
    assert abs(e - max(fine)) <= 0.01
    with pytest.raises(rcce.RadarInfeasible):
        rcce.optimize_power_split(d, ch, NOISE, 10.0, 1e12)


def test_bcd_monotone_feasible_and_audited():
    rng = np.random.default_rng(9)
    for _ in range(3):
        ch = random_channels(rng, 4, 4, scale=1.0)
        design, tr = rcce.run_rcce_bcd(ch, NOISE, 10.0, 2.0)
        assert tr.feasible
        assert np.all(np.diff(tr.cs) >= -1e-6)
        assert 1 <= tr.iterations <= rcce.RcceOptions().max_outer
        assert np.linalg.norm(design.w) == pytest.approx(1.0, abs=1e-9)
        assert np.trace(design.R).real == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.eigvalsh(design.R).min() >= -1e-9
        np.testing.assert_allclose(np.abs(design.q), 1.0, atol=1e-9)
        assert 0 < design.epsilon < 1
        assert rcce_radar_sinr(design, ch, NOISE, 10.0) >= 2.0 * (1 - 1e-6)
        assert len(tr.points) == len(tr.cs)


def test_bcd_reports_radar_infeasible():
    ch = random_channels(np.random.default_rng(1), 2, 2)
    _, tr = rcce.run_rcce_bcd(ch, NOISE, 1.0, 1e12)
    assert not tr.feasible and tr.cs == [0.0] and tr.reason == "radar_infeasible"
