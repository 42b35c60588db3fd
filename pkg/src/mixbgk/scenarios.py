"""Initial distributions for the shipped experiments."""

from __future__ import annotations

import numpy as np

from .grid import DistributionPair, PhaseGrid
from .mixture import MixtureParams, global_equilibria, maxwellian

SCENARIOS = ("equilibria", "temperature-gap", "counter-flow", "momentum-gap", "sinusoidal-density", "random-smooth")


def _tile(a, grid):
    return np.tile(a, (grid.space.n_cells, 1))


def equilibria(p, grid, epsilon, rng):
    return global_equilibria(p, grid, mode="matched")


def temperature_gap(p, grid, epsilon, rng):
    """``T1 = 1 + eps``, ``T2 = 1 - eps``, both at rest with reference densities."""
    vg = grid.velocity
    F1 = maxwellian(p.n10, np.zeros(3), 1.0 + epsilon, p.m1, vg)
    F2 = maxwellian(p.n20, np.zeros(3), 1.0 - epsilon, p.m2, vg)
    return DistributionPair(_tile(F1, grid), _tile(F2, grid))


def counter_flow(p, grid, epsilon, rng):
    """``U1 = -U2 = (eps, 0, 0)`` at unit temperature."""
    vg = grid.velocity
    u = np.array([epsilon, 0.0, 0.0])
    F1 = maxwellian(p.n10, u, 1.0, p.m1, vg)
    F2 = maxwellian(p.n20, -u, 1.0, p.m2, vg)
    return DistributionPair(_tile(F1, grid), _tile(F2, grid))


def momentum_gap(p, grid, epsilon, rng):
    """Opposite flows with zero total momentum: only the velocity difference relaxes."""
    vg = grid.velocity
    u1 = np.array([epsilon, 0.0, 0.0])
    u2 = -p.m1 * p.n10 / (p.m2 * p.n20) * u1
    F1 = maxwellian(p.n10, u1, 1.0, p.m1, vg)
    F2 = maxwellian(p.n20, u2, 1.0, p.m2, vg)
    return DistributionPair(_tile(F1, grid), _tile(F2, grid))


def sinusoidal_density(p, grid, epsilon, rng):
    """Species-1 density wave ``n10 (1 + eps sin(2 pi x / L))``; species 2 at equilibrium."""
    vg = grid.velocity
    x = grid.space.centers
    profile = 1.0 + epsilon * np.sin(2 * np.pi * x / grid.space.length)
    mu1 = maxwellian(p.n10, np.zeros(3), 1.0, p.m1, vg)
    mu2 = maxwellian(p.n20, np.zeros(3), 1.0, p.m2, vg)
    return DistributionPair(profile[:, None] * mu1, _tile(mu2, grid))


def _velocity_features(m, grid):
    """Bounded smooth functions of velocity: low-order polynomials times a wide Gaussian."""
    v = np.sqrt(m) * grid.velocity.nodes
    s2 = np.sum(v * v, axis=1)
    polys = [np.ones(len(v)), *v.T, s2 - 3, v[:, 0] * v[:, 1], v[:, 1] * v[:, 2], v[:, 0] ** 3, v[:, 2] * s2]
    damp = np.exp(-s2 / 8)
    return np.array([q * damp for q in polys])


def random_smooth(p, grid, epsilon, rng):
    """``F_k = mu_k (1 + eps phi_k)`` with ``phi_k`` band-limited in x, smooth in v and ``max|phi_k| = 1``."""
    x = grid.space.centers / grid.space.length
    n_modes = 3 if grid.space.dim == 1 else 0
    out = []
    for m, n0 in ((p.m1, p.n10), (p.m2, p.n20)):
        feats = _velocity_features(m, grid)
        coef = rng.standard_normal((len(feats), 2 * n_modes + 1))
        basis_x = [np.ones_like(x)]
        for q in range(1, n_modes + 1):
            basis_x += [np.cos(2 * np.pi * q * x) / q, np.sin(2 * np.pi * q * x) / q]
        amp = coef @ np.array(basis_x)
        phi = amp.T @ feats
        phi /= np.max(np.abs(phi))
        mu = maxwellian(n0, np.zeros(3), 1.0, m, grid.velocity)
        out.append(mu * (1.0 + epsilon * phi))
    return DistributionPair(*out)


_BUILDERS = {
    "equilibria": equilibria,
    "temperature-gap": temperature_gap,
    "counter-flow": counter_flow,
    "momentum-gap": momentum_gap,
    "sinusoidal-density": sinusoidal_density,
    "random-smooth": random_smooth,
}


def initial_state(name: str, p: MixtureParams, grid: PhaseGrid, epsilon: float = 1e-3, seed: int = 0) -> DistributionPair:
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    if not epsilon > 0:
        raise ValueError(f"amplitude must be positive, got {epsilon}")
    return _BUILDERS[name](p, grid, float(epsilon), np.random.default_rng(seed))
