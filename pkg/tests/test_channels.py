import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risec.channels import (
    LINKS,
    Geometry,
    PathLossModel,
    SteeringParams,
    UncertaintyModel,
    cascaded_channel,
    db_to_lin,
    effective_channel,
    path_loss,
    sample_bounded_perturbation,
    sample_channels,
    steering_error_bound,
    steering_vector,
)

from conftest import cn, unit_modulus


@pytest.mark.parametrize("theta, N, expected", [
    (0.0, 4, [1, 1, 1, 1]),
    (np.pi / 6, 2, [1, 1j]),
    (np.pi / 2, 3, [1, -1, 1]),
])
def test_steering_vector_examples(theta, N, expected):
    np.testing.assert_allclose(steering_vector(SteeringParams(theta, N)), expected, atol=1e-12)


@given(st.floats(-np.pi, np.pi), st.integers(1, 16), st.floats(0.1, 2.0))
def test_steering_vector_unit_modulus(theta, N, d):
    a = steering_vector(SteeringParams(theta, N, d))
    assert a.shape == (N,)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


def test_steering_params_reject_bad_values():
    with pytest.raises(ValueError):
        SteeringParams(0.0, 0)
    with pytest.raises(ValueError):
        SteeringParams(0.0, 2, 0.0)


@pytest.mark.parametrize("d, alpha, db", [(1.0, 2.7, -15.0), (10.0, 2.0, -35.0), (100.0, 3.2, -79.0)])
def test_path_loss_examples(d, alpha, db):
    model = PathLossModel(exponents={k: alpha for k in LINKS})
    assert path_loss(d, "AB", model) == pytest.approx(db_to_lin(db), rel=1e-12)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss(0.0, "AB", PathLossModel())
    with pytest.raises(ValueError):
        PathLossModel(exponents={"AB": -1.0})
    with pytest.raises(ValueError):
        PathLossModel(d0=0.0)


def test_default_geometry_distances():
    g = Geometry()
    assert g.distance("AI") == pytest.approx(np.sqrt(2.5 ** 2 + 18.75 + 25))
    assert g.distance("AB") == pytest.approx(np.sqrt(900 + 300))


def test_sample_channels_reproducible_and_shaped():
    steer = SteeringParams(np.pi / 6, 4)
    a = sample_channels(Geometry(), PathLossModel(), steer, np.random.default_rng(7), n_ris=9)
    b = sample_channels(Geometry(), PathLossModel(), steer, np.random.default_rng(7), n_ris=9)
    for name in ("H_AI", "h_AB", "h_AE", "h_IB", "h_IE"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.H_AI.shape == (9, 4) and a.N == 4 and a.M == 9
    # line of sight toward the target, scaled by the path gain
    beta = np.sqrt(path_loss(Geometry().distance("AE"), "AE", PathLossModel()))
    np.testing.assert_allclose(a.h_AE, beta * steering_vector(steer))


def test_zero_gain_link_gives_zero_channel():
    gains = {k: 1.0 for k in LINKS}
    gains["IB"] = 0.0
    ch = sample_channels(Geometry(), PathLossModel(), SteeringParams(0.3, 2), np.random.default_rng(0),
                         n_ris=3, gains=gains)
    assert not np.any(ch.h_IB)
    assert np.any(ch.h_IE)


def test_rayleigh_entries_have_unit_variance():
    gains = {k: 1.0 for k in LINKS}
    ch = sample_channels(Geometry(), PathLossModel(), SteeringParams(0.0, 1), np.random.default_rng(3),
                         n_ris=100_000, gains=gains)
    assert np.mean(np.abs(ch.h_IB) ** 2) == pytest.approx(1.0, rel=0.02)
    g = np.empty(100_000, dtype=complex)
    rng = np.random.default_rng(5)
    for i in range(0, 100_000, 1000):
        c = sample_channels(Geometry(), PathLossModel(), SteeringParams(0.0, 1000), rng, n_ris=1, gains=gains)
        g[i:i + 1000] = c.h_AB
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.02)


def test_effective_channel_examples(rng):
    H = cn(rng, 3, 2)
    hA = cn(rng, 2)
    q = unit_modulus(rng, 3)
    np.testing.assert_allclose(effective_channel(np.zeros(3), q, H, hA), hA.conj())
    np.testing.assert_allclose(effective_channel(cn(rng, 3), q, np.zeros((3, 2)), hA), hA.conj())
    out = effective_channel(np.array([1.0]), np.array([[np.exp(1j * np.pi)]]), np.array([[2.0]]), np.array([1j]))
    np.testing.assert_allclose(out, [-2 - 1j], atol=1e-12)
    with pytest.raises(ValueError):
        effective_channel(cn(rng, 2), q, H, hA)


def test_effective_channel_is_linear_in_each_phase(rng):
    H, hI, hA = cn(rng, 3, 2), cn(rng, 3), cn(rng, 2)
    q1, q2 = cn(rng, 3), cn(rng, 3)
    base = effective_channel(hI, np.zeros(3), H, hA)
    lhs = effective_channel(hI, 2 * q1 + q2, H, hA) - base
    rhs = 2 * (effective_channel(hI, q1, H, hA) - base) + (effective_channel(hI, q2, H, hA) - base)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_cascaded_channel_identities(rng):
    H = cn(rng, 3, 2)
    np.testing.assert_allclose(cascaded_channel(np.ones(3), H), H)
    h = cn(rng, 3)
    np.testing.assert_allclose(cascaded_channel(h, np.eye(3)), np.diag(h.conj()))
    G = cascaded_channel(h, H)
    for _ in range(20):
        q = unit_modulus(rng, 3)
        direct = (h.conj() * q) @ H
        np.testing.assert_allclose(q @ G, direct, rtol=1e-10)


def test_steering_error_bound_examples():
    assert steering_error_bound(0.3, 0.0, 6) == 0.0
    assert steering_error_bound(0.3, 0.1, 1) == 0.0
    phi = np.deg2rad(3.0)
    chord = abs(np.exp(1j * np.pi * np.sin(phi)) - 1.0)
    assert steering_error_bound(0.0, phi, 2) == pytest.approx(chord, rel=1e-12)
    assert steering_error_bound(0.0, phi, 2) == pytest.approx(np.sqrt(2 * (1 - np.cos(np.pi * np.sin(phi)))))
    assert chord == pytest.approx(0.16423, abs=1e-5)


def test_steering_error_bound_covers_actual_error():
    rng = np.random.default_rng(2)
    theta, phi, N = np.pi / 6, np.deg2rad(3.0), 6
    bound = steering_error_bound(theta, phi, N)
    a0 = steering_vector(SteeringParams(theta, N))
    # the bound is attained at the edge of the angle interval
    edge = np.linalg.norm(steering_vector(SteeringParams(theta + phi, N)) - a0)
    assert edge == pytest.approx(bound, rel=1e-12)
    vals = [steering_error_bound(theta, p, N) for p in np.linspace(0, phi, 30)]
    assert np.all(np.diff(vals) >= 0)
    for d in rng.uniform(-phi, phi, size=50):
        assert np.linalg.norm(steering_vector(SteeringParams(theta + d, N)) - a0) <= bound + 1e-12


def test_uncertainty_model_composition():
    u = UncertaintyModel(eps_G=0.3, phi=np.deg2rad(2.0), theta_bar=np.pi / 6, n_antennas=4, beta_AE=0.5)
    assert u.eps_E ** 2 == pytest.approx(u.eps_G ** 2 + u.eps_AE ** 2, rel=1e-15)
    assert u.eps_AE == pytest.approx(0.5 * u.eps_A)
    assert UncertaintyModel(eps_G=3.0, phi=0.0, theta_bar=0.2, n_antennas=4).eps_A == 0.0
    with pytest.raises(ValueError):
        UncertaintyModel(eps_G=-1.0, phi=0.0, theta_bar=0.0, n_antennas=2)


def test_eps_E_from_pythagorean_pair():
    # eps_A of 4 for a unit-gain LoS channel, eps_G = 3
    class Fixed(UncertaintyModel):
        @property
        def eps_A(self):
            return 4.0
    assert Fixed(eps_G=3.0, phi=0.1, theta_bar=0.0, n_antennas=2).eps_E == pytest.approx(5.0)


@settings(max_examples=30)
@given(st.floats(0.0, 10.0), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_bounded_perturbation_within_ball(eps, r, c, seed):
    D = sample_bounded_perturbation(eps, r, c, np.random.default_rng(seed))
    assert D.shape == (r, c)
    assert np.linalg.norm(D) <= eps + 1e-12


def test_bounded_perturbation_boundary_and_zero():
    rng = np.random.default_rng(0)
    assert not np.any(sample_bounded_perturbation(0.0, 3, 2, rng))
    norms = [np.linalg.norm(sample_bounded_perturbation(0.7, 3, 2, rng, boundary=True)) for _ in range(1000)]
    np.testing.assert_allclose(norms, 0.7, atol=1e-9)
    a = sample_bounded_perturbation(0.7, 3, 2, np.random.default_rng(9))
    b = sample_bounded_perturbation(0.7, 3, 2, np.random.default_rng(9))
    assert np.array_equal(a, b)
