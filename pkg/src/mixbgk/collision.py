"""Nonlinear BGK relaxation operator of the mixture and its conservation diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import DistributionPair, PhaseGrid
from .mixture import (
    MixtureParams,
    MomentSet,
    discrete_maxwellian,
    maxwellian,
    mix_moments,
    moments_from_raw,
)

MODES = ("matched", "sampled")


@dataclass
class LocalEquilibria:
    moments: MomentSet
    M11: np.ndarray
    M12: np.ndarray
    M22: np.ndarray
    M21: np.ndarray


def local_equilibria(F: DistributionPair, p: MixtureParams, grid: PhaseGrid, mode: str = "matched",
                     flip_gamma_t21: bool = False) -> LocalEquilibria:
    """Per-cell moments and the four target Maxwellians ``M11, M12, M22, M21``."""
    vg = grid.velocity
    raw1 = _kernels.velocity_moments(F.first, vg.nodes, vg.weights)
    raw2 = _kernels.velocity_moments(F.second, vg.nodes, vg.weights)
    s1 = moments_from_raw(raw1, p.m1)
    s2 = moments_from_raw(raw2, p.m2)
    ms = mix_moments(s1, s2, p, flip_gamma_t21)

    def energy(n, U, T, m):
        return n * (3.0 * T + m * np.sum(U * U, axis=-1))

    if mode == "sampled":
        M11 = maxwellian(s1.n, s1.U, s1.T, p.m1, vg)
        M12 = maxwellian(s1.n, ms.U12, ms.T12, p.m1, vg)
        M22 = maxwellian(s2.n, s2.U, s2.T, p.m2, vg)
        M21 = maxwellian(s2.n, ms.U21, ms.T21, p.m2, vg)
    elif mode == "matched":
        # intra-species targets are the raw sums themselves, so they are exact
        M11 = discrete_maxwellian(s1.n, raw1[:, 1:4], p.m1 * raw1[:, 4], p.m1, vg)
        M22 = discrete_maxwellian(s2.n, raw2[:, 1:4], p.m2 * raw2[:, 4], p.m2, vg)
        M12 = discrete_maxwellian(s1.n, s1.n[:, None] * ms.U12, energy(s1.n, ms.U12, ms.T12, p.m1), p.m1, vg)
        M21 = discrete_maxwellian(s2.n, s2.n[:, None] * ms.U21, energy(s2.n, ms.U21, ms.T21, p.m2), p.m2, vg)
    else:
        raise ValueError(f"unknown equilibrium mode {mode!r}; expected one of {MODES}")
    return LocalEquilibria(ms, M11, M12, M22, M21)


def bgk_rhs(F: DistributionPair, p: MixtureParams, grid: PhaseGrid, mode: str = "matched",
            rate: float = 1.0, flip_gamma_t21: bool = False) -> DistributionPair:
    """Relaxation tendency ``(n1(M11-F1) + n2(M12-F1), n2(M22-F2) + n1(M21-F2))``.

    Moments are frozen at the input state. ``rate`` multiplies both
    collision frequencies (1 reproduces the model exactly).
    """
    eq = local_equilibria(F, p, grid, mode, flip_gamma_t21)
    n1 = rate * eq.moments.s1.n[:, None]
    n2 = rate * eq.moments.s2.n[:, None]
    d1 = n1 * (eq.M11 - F.first) + n2 * (eq.M12 - F.first)
    d2 = n2 * (eq.M22 - F.second) + n1 * (eq.M21 - F.second)
    return DistributionPair(d1, d2, "tendency")


@dataclass
class ConservedTotals:
    mass1: float
    mass2: float
    momentum: np.ndarray
    energy: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.mass1, self.mass2], self.momentum, [self.energy]])

    def momentum_scale(self, p: MixtureParams) -> float:
        """Natural size of the total momentum, ``sqrt((m1 M1 + m2 M2) E)``."""
        return float(np.sqrt(abs((p.m1 * self.mass1 + p.m2 * self.mass2) * self.energy)))

    def relative_drift(self, other: ConservedTotals, p: MixtureParams) -> dict:
        """Drift of each total relative to its own size; momentum uses :meth:`momentum_scale`."""
        return {
            "mass1": abs(other.mass1 - self.mass1) / abs(self.mass1),
            "mass2": abs(other.mass2 - self.mass2) / abs(self.mass2),
            "momentum": float(np.max(np.abs(other.momentum - self.momentum))) / self.momentum_scale(p),
            "energy": abs(other.energy - self.energy) / abs(self.energy),
        }


def conserved_totals(F: DistributionPair, p: MixtureParams, grid: PhaseGrid) -> ConservedTotals:
    """Discrete ``int int F_k``, ``int int (m1 F1 + m2 F2) v`` and ``int int (m1 F1 + m2 F2)|v|^2``."""
    vg = grid.velocity
    raw1 = _kernels.velocity_moments(np.atleast_2d(F.first), vg.nodes, vg.weights).sum(axis=0) * grid.space.dx
    raw2 = _kernels.velocity_moments(np.atleast_2d(F.second), vg.nodes, vg.weights).sum(axis=0) * grid.space.dx
    return ConservedTotals(
        mass1=float(raw1[0]),
        mass2=float(raw2[0]),
        momentum=p.m1 * raw1[1:4] + p.m2 * raw2[1:4],
        energy=float(p.m1 * raw1[4] + p.m2 * raw2[4]),
    )


@dataclass
class ExchangeResiduals:
    """Per-cell residuals of the inter-species cancellation identities."""

    mass12: np.ndarray
    mass21: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray

    def max_abs(self) -> float:
        return float(max(np.abs(a).max() for a in (self.mass12, self.mass21, self.momentum, self.energy)))


def exchange_diagnostics(F: DistributionPair, p: MixtureParams, grid: PhaseGrid,
                         mode: str = "matched", flip_gamma_t21: bool = False) -> ExchangeResiduals:
    eq = local_equilibria(F, p, grid, mode, flip_gamma_t21)
    vg = grid.velocity
    d1 = _kernels.velocity_moments(eq.M12 - F.first, vg.nodes, vg.weights)
    d2 = _kernels.velocity_moments(eq.M21 - F.second, vg.nodes, vg.weights)
    n1 = eq.moments.s1.n[:, None]
    n2 = eq.moments.s2.n[:, None]
    # species 1 meets species 2 at rate n2, and vice versa
    mom = n2 * p.m1 * d1[:, 1:4] + n1 * p.m2 * d2[:, 1:4]
    en = n2[:, 0] * p.m1 * d1[:, 4] + n1[:, 0] * p.m2 * d2[:, 4]
    return ExchangeResiduals(d1[:, 0], d2[:, 0], mom, en)
