import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixbgk.grid import PhaseGrid, SpatialGrid, VelocityGrid
from mixbgk.mixture import (
    DegenerateCell,
    InadmissibleParams,
    InfeasibleTarget,
    MixtureParams,
    SpeciesMoments,
    compute_moments,
    discrete_maxwellian,
    energy_exchange_residual,
    global_equilibria,
    maxwellian,
    mix_moments,
    mix_temperatures,
    mix_velocities,
    momentum_exchange_residual,
    require_admissible,
    validate_params,
)
from mixbgk.verify import draw_params

FINE = VelocityGrid(7.0, 24)


def test_delta_lower_bound_message():
    v = validate_params(MixtureParams(m1=2.0, delta=0.2))
    assert not v
    assert "0.333333" in v.violations[0]
    assert MixtureParams(m1=2.0).delta_lower_bound == pytest.approx(1 / 3)


def test_gamma_upper_bound():
    # (1/3)(1/2)(2 * 1/2) for equal masses at delta = 1/2
    assert MixtureParams().gamma_upper_bound == pytest.approx(1 / 6)
    v = validate_params(MixtureParams(gamma=0.2))
    assert not v and "gamma" in v.violations[0]
    assert validate_params(MixtureParams(gamma=1 / 6))


@pytest.mark.parametrize(
    "changes",
    [dict(m1=0.5), dict(m2=-1.0), dict(n10=0.0), dict(delta=1.0), dict(omega=1.0), dict(omega=-0.1)],
)
def test_rejections(changes):
    with pytest.raises(InadmissibleParams):
        require_admissible(MixtureParams(**changes))


def test_degenerate_interchange_allowed_on_request():
    p = MixtureParams(delta=1.0, omega=1.0)
    assert not validate_params(p)
    assert validate_params(p, allow_degenerate=True)


def test_sampled_maxwellian_moments():
    m = 2.0
    U = np.array([0.2, -0.1, 0.3])
    s = compute_moments(maxwellian(1.3, U, 0.8, m, FINE), m, FINE)
    # midpoint quadrature of a sampled Gaussian: error at the 1e-9 level on 24^3
    assert s.n == pytest.approx(1.3, rel=1e-8)
    np.testing.assert_allclose(s.U, U, atol=1e-8)
    assert s.T == pytest.approx(0.8, rel=1e-8)


def test_maxwellian_broadcasts_over_cells():
    F = maxwellian([1.0, 2.0], np.zeros((2, 3)), [1.0, 0.5], 1.0, FINE)
    assert F.shape == (2, FINE.size)
    np.testing.assert_allclose(F[1], maxwellian(2.0, np.zeros(3), 0.5, 1.0, FINE))
    with pytest.raises(ValueError):
        maxwellian(1.0, np.zeros(3), -1.0, 1.0, FINE)


def test_degenerate_cells_are_reported():
    with pytest.raises(DegenerateCell):
        compute_moments(np.zeros(FINE.size), 1.0, FINE)


def test_mixing_rules_hand_values():
    p = MixtureParams(m1=2.0, delta=0.5, omega=0.5)
    U1, U2 = np.array([1.0, 0.0, 0.0]), np.zeros(3)
    U12, U21 = mix_velocities(U1, U2, p)
    np.testing.assert_allclose(U12, [0.5, 0, 0])
    np.testing.assert_allclose(U21, [1.0, 0, 0])
    s1 = SpeciesMoments(np.array(1.0), U1, np.array(1.0))
    s2 = SpeciesMoments(np.array(1.0), U2, np.array(1.0))
    T12, T21 = mix_temperatures(s1, s2, p)
    assert T12 == pytest.approx(1.0)
    # 3 (T21 - 1) = 2 (1 - 1/4) - 1 from the energy balance
    assert T21 == pytest.approx(7 / 6)


def test_fault_breaks_energy_balance_only_when_gamma_active():
    p = MixtureParams(gamma=0.1)
    s1 = SpeciesMoments(np.array(1.0), np.array([0.5, 0.0, 0.0]), np.array(1.0))
    s2 = SpeciesMoments(np.array(1.0), np.zeros(3), np.array(1.2))
    assert abs(energy_exchange_residual(mix_moments(s1, s2, p, flip_gamma_t21=True), p)) > 1e-3
    p0 = p.replace(gamma=0.0)
    assert abs(energy_exchange_residual(mix_moments(s1, s2, p0, flip_gamma_t21=True), p0)) < 1e-14


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exchange_identities_property(seed):
    rng = np.random.default_rng(seed)
    p = draw_params(rng)
    s1 = SpeciesMoments(rng.uniform(0.1, 3), rng.normal(0, 1, 3), rng.uniform(0.1, 3))
    s2 = SpeciesMoments(rng.uniform(0.1, 3), rng.normal(0, 1, 3), rng.uniform(0.1, 3))
    ms = mix_moments(s1, s2, p)
    scale = 1 + p.m1 * s1.U @ s1.U + p.m2 * s2.U @ s2.U + 3 * (s1.T + s2.T)
    assert np.max(np.abs(momentum_exchange_residual(ms, p))) <= 1e-13 * scale
    assert abs(energy_exchange_residual(ms, p)) <= 1e-13 * scale
    assert ms.T12 > 0 and ms.T21 > 0


@settings(max_examples=50, deadline=None)
@given(
    n=st.floats(0.2, 5.0),
    u=st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
    T=st.floats(0.5, 2.0),
    m=st.floats(1.0, 3.0),
)
def test_discrete_maxwellian_matches_targets(n, u, T, m):
    # spacing 0.5 resolves the narrowest width sqrt(T/m) = 0.41 of this domain
    grid = VelocityGrid(6.0, 24)
    U = np.array(u)
    energy = n * (3 * T + m * U @ U)
    G = discrete_maxwellian(n, n * U, energy, m, grid)
    assert np.all(G >= 0)  # far corners may underflow
    s = compute_moments(G, m, grid)
    assert s.n == pytest.approx(n, rel=1e-12)
    np.testing.assert_allclose(s.U, U, atol=1e-12)
    assert s.T == pytest.approx(T, rel=1e-11)


def test_discrete_maxwellian_rejects_infeasible():
    with pytest.raises(InfeasibleTarget):
        discrete_maxwellian(1.0, np.array([2.0, 0, 0]), 1.0, 1.0, FINE)


@pytest.mark.parametrize("mode", ["sampled", "matched"])
def test_global_equilibria(mode):
    p = MixtureParams(m1=2.0, n10=1.5)
    grid = PhaseGrid(SpatialGrid(3, 1.0, 1), FINE)
    mu = global_equilibria(p, grid, mode)
    assert mu.first.shape == grid.shape
    s = compute_moments(mu.first[0], p.m1, FINE)
    tol = 1e-13 if mode == "matched" else 1e-9
    assert s.n == pytest.approx(1.5, rel=tol)
    assert s.T == pytest.approx(1.0, rel=tol)
    with pytest.raises(ValueError):
        global_equilibria(p, grid, "exact")
