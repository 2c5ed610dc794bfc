import numpy as np
import pytest

from risec import robust as rb
from risec.channels import UncertaintyModel, sample_bounded_perturbation
from risec.metrics import NoisePowers, lift_vector, stack_T

from conftest import cn, random_channels, unit_modulus, unit_vector


def _rank_one(rng, N, M):
    w = unit_vector(rng, N)
    u = lift_vector(unit_modulus(rng, M))
    return w, np.outer(w, w.conj()), np.outer(u.conj(), u)


@pytest.mark.parametrize("bits, phase, expect", [
    (1, 0.6 * np.pi, np.pi),
    (2, 0.3 * np.pi, 0.5 * np.pi),
    (1, 1.95 * np.pi, 0.0),
])
def test_quantize_examples(bits, phase, expect):
    q = rb.quantize_phases(np.exp(1j * np.array([phase])), rb.QuantizationSpec(bits))
    assert abs(q[0] - np.exp(1j * expect)) < 1e-12


def test_quantize_ties_and_levels(rng):
    spec = rb.QuantizationSpec(2)
    assert spec.levels == 4 and spec.step == pytest.approx(np.pi / 2)
    q = rb.quantize_phases(np.exp(1j * np.array([np.pi / 4, 7 * np.pi / 4])), spec)
    np.testing.assert_allclose(q, [1.0, 1.0], atol=1e-12)
    qs = rb.quantize_phases(unit_modulus(rng, 200), rb.QuantizationSpec(3))
    idx = np.mod(np.angle(qs), 2 * np.pi) / (np.pi / 4)
    np.testing.assert_allclose(idx, np.round(idx), atol=1e-9)
    with pytest.raises(ValueError):
        rb.QuantizationSpec(0)


def test_quantize_is_nearest(rng):
    spec = rb.QuantizationSpec(2)
    q = unit_modulus(rng, 500)
    qd = rb.quantize_phases(q, spec)
    levels = np.exp(1j * spec.level_set)
    best = np.min(np.abs(q[:, None] - levels[None, :]), axis=1)
    np.testing.assert_allclose(np.abs(q - qd), best, atol=1e-12)


def test_taylor_examples():
    assert rb.taylor_eta_bound(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert rb.taylor_eta_bound(1.0, 0.0) == pytest.approx(1 / np.log(2), rel=1e-12)
    ks = np.linspace(0, 50, 201)
    for k0 in (0.0, 0.5, 3.0, 20.0):
        assert rb.taylor_eta_bound(k0, k0) == pytest.approx(np.log2(1 + k0), rel=1e-14)
        assert np.all(rb.taylor_eta_bound(ks, k0) >= np.log2(1 + ks) - 1e-12)
    with pytest.raises(ValueError):
        rb.taylor_eta_bound(1.0, -0.1)


def test_stack_and_radius(rng):
    G, h = cn(rng, 3, 2), cn(rng, 2)
    E = rb.stack_nominal_E(G, h)
    np.testing.assert_array_equal(E[:3], G)
    np.testing.assert_array_equal(E[3], h.conj())
    unc = UncertaintyModel(eps_G=3.0, phi=0.0, theta_bar=0.5, n_antennas=2)
    assert unc.eps_E == pytest.approx(3.0)
    unc = UncertaintyModel(eps_G=3.0, phi=0.2, theta_bar=0.5, n_antennas=4)
    unc = UncertaintyModel(eps_G=3.0, phi=0.2, theta_bar=0.5, n_antennas=4, beta_AE=4.0 / unc.eps_A)
    assert unc.eps_E == pytest.approx(5.0, rel=1e-12)
    assert UncertaintyModel(0.0, 0.0, 0.5, 4).eps_E == 0.0


def test_nominal_power_matches_stack(rng):
    ch = random_channels(rng, 3, 2)
    w, W, Theta = _rank_one(rng, 3, 2)
    Ebar = stack_T(ch.h_IE, ch.H_AI, ch.h_AE)
    _, _, c = rb.leakage_terms(W, Theta, Ebar)
    # Theta = conj(u) u^T with u = [q; 1], so its last column is conj(u)
    u = np.conj(Theta[:, -1])
    assert c == pytest.approx(abs(u @ Ebar @ w) ** 2, rel=1e-10)
    assert rb.worst_case_power(W, Theta, Ebar, 0.0) == pytest.approx(c, rel=1e-12)


def test_lmi_trivial_cases():
    # one antenna, no RIS: W = Theta = [1], Ebar = [a]
    W = Theta = np.ones((1, 1))
    Ebar = np.zeros((1, 1))
    noise = NoisePowers(1.0, 1.0, 1.0)
    # p = 0 and c_E = 0 here, so a negative gamma_p plays the role of c_E = 2 gamma_p / P
    B = rb.lmi_radar(W, Theta, Ebar, 0.0, -1.0, 1.0, 0.0)
    assert np.linalg.eigvalsh(B).min() >= 0
    B = rb.lmi_radar(W, Theta, Ebar, 0.0, 1.0, 1.0, 5.0)
    assert B[-1, -1].real < 0
    Ebar = np.array([[2.0]])
    B = rb.lmi_radar(W, Theta, Ebar, 0.0, 2.0, 1.0, 0.0)  # c_E = 4 = 2 gamma_p / P
    assert B[-1, -1].real == pytest.approx(2.0)
    # leakage with huge kappa is feasible for a modest multiplier
    B = rb.lmi_leakage(W, Theta, Ebar, 0.5, 1e6, noise, 1.0, 50.0)
    assert np.linalg.eigvalsh(B).min() >= 0
    # eps = 0, p = 0: needs rho2 >= lambda_max(W kron Theta) and kappa sigma^2 / P >= c_E
    Ebar = np.zeros((1, 1))
    assert np.linalg.eigvalsh(rb.lmi_leakage(W, Theta, Ebar, 0.0, 0.0, noise, 1.0, 1.0)).min() >= -1e-15
    assert np.linalg.eigvalsh(rb.lmi_leakage(W, Theta, Ebar, 0.0, 0.0, noise, 1.0, 0.5)).min() < 0


def test_lmi_block_shape(rng):
    w, W, Theta = _rank_one(rng, 3, 2)
    Ebar = cn(rng, 3, 3)
    B = rb.lmi_radar(W, Theta, Ebar, 0.1, 1.0, 1.0, 1.0)
    assert B.shape == (3 * 3 + 1,) * 2
    np.testing.assert_allclose(B, B.conj().T, atol=1e-14)


def _max_certified_rho(block_of_rho, hi):
    rhos = np.linspace(0, hi, 400)
    return max((np.linalg.eigvalsh(block_of_rho(r)).min(), r) for r in rhos)


def test_lmi_soundness_sampled():
    rng = np.random.default_rng(21)
    noise = NoisePowers(1.0, 1.0, 1.0)
    hits = 0
    for _ in range(10):
        w, W, Theta = _rank_one(rng, 2, 2)
        Ebar = cn(rng, 3, 2)
        eps = 0.2
        _, _, c = rb.leakage_terms(W, Theta, Ebar)
        gp = 0.3 * c
        lam, rho = _max_certified_rho(lambda r: rb.lmi_radar(W, Theta, Ebar, eps, gp, 1.0, r), 4 * c / eps ** 2)
        if lam >= 0:
            hits += 1
            for _ in range(1000):
                dE = sample_bounded_perturbation(eps, 3, 2, rng, boundary=True)
                assert np.real(np.trace(Theta @ (Ebar + dE) @ W @ (Ebar + dE).conj().T)) >= gp - 1e-6
            v_rad, _ = rb.audit_constraints(W, Theta, Ebar, eps, gp, 1e9, noise, 1.0)
            assert v_rad <= 1e-6
        kap = 3.0 * c
        lam, rho = _max_certified_rho(lambda r: rb.lmi_leakage(W, Theta, Ebar, eps, kap, noise, 1.0, r),
                                      10 * kap / eps ** 2)
        if lam >= 0:
            _, v_leak = rb.audit_constraints(W, Theta, Ebar, eps, 0.0, kap, noise, 1.0)
            assert v_leak <= 1e-6
    assert hits >= 5


def test_reduced_blocks_agree_with_full(rng):
    """The small rank-one blocks certify exactly when the full S-lemma blocks do."""
    noise = NoisePowers(1.0, 1.0, 1.0)
    for _ in range(10):
        w, W, Theta = _rank_one(rng, 2, 2)
        Ebar = cn(rng, 3, 2)
        pr = rb._Problem(B=cn(rng, 3, 2), Ebar=Ebar, eps_E=0.3, noise=noise, P=1.0, gamma_p=0.0)
        q = np.conj(Theta[:2, -1])
        m = rb.robust_metrics(w, q, pr)
        kap = m["kappa"] * 1.01
        r1, r2, l1, l2 = rb.certify(w, q, pr, kap)
        assert l2 >= -1e-9
        assert np.linalg.eigvalsh(rb.lmi_leakage(W, Theta, Ebar, 0.3, kap, noise, 1.0, r2)).min() >= -1e-8


def test_trust_region_global(rng):
    for _ in range(20):
        H = cn(rng, 4, 4)
        H = H + H.conj().T
        g = cn(rng, 4)
        e = rb._trust_region_min(H, g, 0.7)
        val = rb._quad_value(H, g, 0.0, e)
        assert np.linalg.norm(e) <= 0.7 + 1e-9
        X = cn(rng, 5000, 4)
        X *= 0.7 / np.linalg.norm(X, axis=1, keepdims=True) * rng.uniform(size=(5000, 1)) ** 0.25
        vals = np.real(np.einsum("ij,jk,ik->i", X.conj(), H, X)) + 2 * np.real(X @ g.conj())
        assert val <= vals.min() + 1e-9


def test_rank_one_extremes_match_worst_case(rng):
    for _ in range(10):
        w, W, Theta = _rank_one(rng, 3, 2)
        q = np.conj(Theta[:2, -1])
        Ebar = cn(rng, 3, 3)
        lo, hi = rb.rank_one_extremes(w, q, Ebar, 0.4)
        assert rb.worst_case_power(W, Theta, Ebar, 0.4, "max") == pytest.approx(hi, rel=1e-8)
        assert rb.worst_case_power(W, Theta, Ebar, 0.4, "min") == pytest.approx(lo, rel=1e-6, abs=1e-10)


def test_worst_case_rate_monotone_in_radius(rng):
    noise = NoisePowers(1.0, 1.0, 1.0)
    w, W, Theta = _rank_one(rng, 2, 3)
    Ebar = cn(rng, 4, 2)
    rates = [rb.worst_case_eve_rate(W, Theta, Ebar, e, noise, 2.0) for e in (0.0, 0.1, 0.3, 0.6)]
    assert rates[0] == pytest.approx(np.log2(1 + 2.0 * rb.leakage_terms(W, Theta, Ebar)[2]), rel=1e-12)
    assert np.all(np.diff(rates) >= 0)


def _small_case(seed, eps_G):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, 2, 2)
    unc = UncertaintyModel(eps_G=eps_G, phi=0.0, theta_bar=0.5, n_antennas=2)
    return ch, unc, NoisePowers(1.0, 1.0, 1.0)


def test_run_robust_bcd_small():
    ch, unc, noise = _small_case(3, 0.1)
    design, tr = rb.run_robust_bcd(ch, unc, noise, 5.0, 0.5, rb.RobustOptions(n_samples=30))
    assert tr.feasible
    assert np.all(np.diff(tr.surrogate) >= -1e-6)
    np.testing.assert_allclose(np.real(np.diag(design.Theta)), 1.0, atol=1e-8)
    assert np.real(np.trace(design.W)) == pytest.approx(1.0, abs=1e-9)
    assert design.rho1 >= 0 and design.rho2 >= 0
    assert design.eta >= np.log2(1 + design.kappa) - 1e-12
    pr = rb.make_problem(ch, unc, noise, 5.0, 0.5)
    v_rad, v_leak = rb.audit_constraints(design.W, design.Theta, pr.Ebar, unc.eps_E, 0.5, design.kappa, noise, 5.0)
    assert v_rad <= 1e-6 and v_leak <= 1e-6
    wc = rb.worst_case_eve_rate(design.W, design.Theta, pr.Ebar, unc.eps_E, noise, 5.0)
    assert wc <= np.log2(1 + design.kappa) + 1e-6


def test_run_robust_bcd_radar_infeasible():
    ch, unc, noise = _small_case(4, 0.1)
    _, tr = rb.run_robust_bcd(ch, unc, noise, 1.0, 1e9, rb.RobustOptions(n_samples=10, max_outer=2))
    assert not tr.feasible and tr.reason == "radar_infeasible"
    assert tr.cs == [0.0]


def test_refine_joint_never_loses(rng):
    for seed in range(4):
        ch, unc, noise = _small_case(10 + seed, 0.1)
        pr = rb.make_problem(ch, unc, noise, 5.0, 0.5)
        h = ch.h_B(np.ones(ch.M))
        w0, q0 = h.conj() / np.linalg.norm(h), np.ones(ch.M, dtype=complex)
        start = rb.robust_metrics(w0, q0, pr)
        w, q, m = rb.refine_joint(w0, q0, pr, np.random.default_rng(seed), tries=20)
        assert m["surrogate"] >= start["surrogate"]
        np.testing.assert_allclose(np.abs(q), 1.0, atol=1e-12)
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-9)
        assert m == rb.robust_metrics(w, q, pr)
        if start["feasible"]:
            assert m["feasible"]


def test_refinement_is_recorded():
    ch, unc, noise = _small_case(3, 0.1)
    d1, t1 = rb.run_robust_bcd(ch, unc, noise, 5.0, 0.5, rb.RobustOptions(n_samples=30, refine_tries=20))
    d0, t0 = rb.run_robust_bcd(ch, unc, noise, 5.0, 0.5, rb.RobustOptions(n_samples=30))
    assert t0.refine_gain == 0.0
    assert t1.surrogate[-1] >= t0.surrogate[-1] - 1e-9
    assert t1.surrogate[-1] == pytest.approx(t0.surrogate[-1] + t1.refine_gain, abs=1e-9)


def test_quantized_metrics_keep_radar(rng):
    ch, unc, noise = _small_case(5, 0.05)
    design, tr = rb.run_robust_bcd(ch, unc, noise, 5.0, 0.5, rb.RobustOptions(n_samples=30))
    pr = rb.make_problem(ch, unc, noise, 5.0, 0.5)
    cont, _, _ = rb.quantized_metrics(design.w, design.q, pr, None)
    assert cont["C_s"] == pytest.approx(tr.cs[-1], abs=1e-9)
    for b in (1, 2, 4):
        m, w, qd = rb.quantized_metrics(design.w, design.q, pr, rb.QuantizationSpec(b))
        idx = np.mod(np.angle(qd), 2 * np.pi) / (2 * np.pi / 2 ** b)
        np.testing.assert_allclose(idx, np.round(idx), atol=1e-9)
        assert m["C_s"] >= 0
        if m["C_s"] > 0:
            assert m["feasible"]
