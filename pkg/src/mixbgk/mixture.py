"""Species parameters, moments, mixing rules and Maxwellians of the two-species BGK model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import DistributionPair, PhaseGrid, VelocityGrid


class InadmissibleParams(ValueError):
    """Mixture parameters outside the region that keeps all temperatures positive."""


class DegenerateCell(ArithmeticError):
    """A cell with nonpositive mass or temperature."""


class InfeasibleTarget(ArithmeticError):
    """No exponential-of-quadratic grid function reproduces the requested moments."""


@dataclass(frozen=True)
class MixtureParams:
    m1: float = 1.0
    m2: float = 1.0
    n10: float = 1.0
    n20: float = 1.0
    delta: float = 0.5
    omega: float = 0.5
    gamma: float = 0.0

    @property
    def mass_ratio(self) -> float:
        return self.m1 / self.m2

    @property
    def delta_lower_bound(self) -> float:
        r = self.mass_ratio
        return (r - 1.0) / (1.0 + r)

    @property
    def gamma_upper_bound(self) -> float:
        r = self.mass_ratio
        return self.m1 / 3.0 * (1.0 - self.delta) * ((1.0 + r) * self.delta + 1.0 - r)

    @property
    def t21_velocity_coefficient(self) -> float:
        """Coefficient of ``|U2 - U1|^2`` in ``T21``."""
        r = self.mass_ratio
        return self.m1 * (1.0 - self.delta) * (r * (self.delta - 1.0) + 1.0 + self.delta) / 3.0 - self.gamma

    def replace(self, **changes) -> MixtureParams:
        return MixtureParams(**{**self.__dict__, **changes})


@dataclass
class Verdict:
    admissible: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.admissible


def validate_params(p: MixtureParams, allow_degenerate: bool = False) -> Verdict:
    """Check the admissibility constraints on masses, densities and ``delta, omega, gamma``.

    ``allow_degenerate`` admits ``delta = 1`` and ``omega = 1`` (no interchange),
    which the linear-operator kernel studies need.
    """
    v = []
    if not (p.m1 > 0 and p.m2 > 0):
        v.append(f"masses must be positive (m1={p.m1}, m2={p.m2})")
    elif p.m1 < p.m2:
        v.append(f"m1 >= m2 required (m1={p.m1}, m2={p.m2})")
    if not (p.n10 > 0 and p.n20 > 0):
        v.append(f"reference densities must be positive (n10={p.n10}, n20={p.n20})")
    if v:
        return Verdict(False, v)

    lo = p.delta_lower_bound
    top_ok = p.delta <= 1.0 if allow_degenerate else p.delta < 1.0
    if not (p.delta >= lo and top_ok):
        v.append(f"(m1/m2 - 1)/(1 + m1/m2) <= delta < 1 violated: lower bound {lo:.6g}, delta={p.delta}")
    top_ok = p.omega <= 1.0 if allow_degenerate else p.omega < 1.0
    if not (p.omega >= 0.0 and top_ok):
        v.append(f"0 <= omega < 1 violated: omega={p.omega}")
    hi = p.gamma_upper_bound
    if not (0.0 <= p.gamma <= hi + 1e-15 * max(1.0, abs(hi))):
        v.append(
            f"0 <= gamma <= (m1/3)(1-delta)[(1+m1/m2)delta + 1 - m1/m2] violated: upper bound {hi:.6g}, gamma={p.gamma}"
        )
    return Verdict(not v, v)


def require_admissible(p: MixtureParams, allow_degenerate: bool = False) -> MixtureParams:
    verdict = validate_params(p, allow_degenerate)
    if not verdict:
        raise InadmissibleParams("; ".join(verdict.violations))
    return p


@dataclass
class SpeciesMoments:
    """Density, bulk velocity and temperature; arrays broadcast over cells."""

    n: np.ndarray
    U: np.ndarray
    T: np.ndarray


@dataclass
class MomentSet:
    s1: SpeciesMoments
    s2: SpeciesMoments
    U12: np.ndarray
    U21: np.ndarray
    T12: np.ndarray
    T21: np.ndarray


def moments_from_raw(raw, m: float) -> SpeciesMoments:
    """Turn ``(sum wF, sum wFv, sum wF|v|^2)`` rows into ``(n, U, T)``."""
    raw = np.asarray(raw, dtype=float)
    n = raw[..., 0]
    if np.any(~(n > 0)):
        raise DegenerateCell(f"nonpositive mass in {int(np.sum(~(n > 0)))} cell(s)")
    U = raw[..., 1:4] / n[..., None]
    T = m * (raw[..., 4] / n - np.einsum("...i,...i->...", U, U)) / 3.0
    if np.any(~(T > 0)):
        raise DegenerateCell(f"nonpositive temperature in {int(np.sum(~(T > 0)))} cell(s)")
    return SpeciesMoments(n, U, T)


def compute_moments(F, m: float, grid: VelocityGrid) -> SpeciesMoments:
    """``n = sum wF``, ``U = sum wFv / n``, ``T = sum wF m|v-U|^2 / (3n)``.

    ``F`` may be one cell (1-D) or a stack of cells.
    """
    F = np.asarray(F, dtype=float)
    raw = _kernels.velocity_moments(F, grid.nodes, grid.weights)
    return moments_from_raw(raw, m)


def mix_velocities(U1, U2, p: MixtureParams):
    U1 = np.asarray(U1, dtype=float)
    U2 = np.asarray(U2, dtype=float)
    r = p.mass_ratio
    U12 = p.delta * U1 + (1.0 - p.delta) * U2
    U21 = r * (1.0 - p.delta) * U1 + (1.0 - r * (1.0 - p.delta)) * U2
    return U12, U21


def mix_temperatures(mom1: SpeciesMoments, mom2: SpeciesMoments, p: MixtureParams, flip_gamma_t21: bool = False):
    """Inter-species temperatures ``(T12, T21)``.

    ``flip_gamma_t21`` is a deliberate fault used to check that the
    verification suite notices a broken energy exchange.
    """
    du2 = np.sum((np.asarray(mom2.U) - np.asarray(mom1.U)) ** 2, axis=-1)
    T12 = p.omega * mom1.T + (1.0 - p.omega) * mom2.T + p.gamma * du2
    coef = p.t21_velocity_coefficient
    if flip_gamma_t21:
        coef += 2.0 * p.gamma
    T21 = (1.0 - p.omega) * mom1.T + p.omega * mom2.T + coef * du2
    if np.any(~(np.asarray(T12) > 0)) or np.any(~(np.asarray(T21) > 0)):
        raise AssertionError("mixed temperature not positive; parameters outside the admissible region?")
    return T12, T21


def mix_moments(mom1: SpeciesMoments, mom2: SpeciesMoments, p: MixtureParams, flip_gamma_t21=False) -> MomentSet:
    U12, U21 = mix_velocities(mom1.U, mom2.U, p)
    T12, T21 = mix_temperatures(mom1, mom2, p, flip_gamma_t21)
    return MomentSet(mom1, mom2, U12, U21, T12, T21)


def momentum_exchange_residual(ms: MomentSet, p: MixtureParams):
    """``m1 (U12 - U1) + m2 (U21 - U2)``, zero by construction."""
    return p.m1 * (ms.U12 - ms.s1.U) + p.m2 * (ms.U21 - ms.s2.U)


def energy_exchange_residual(ms: MomentSet, p: MixtureParams):
    """``3(T12-T1) + 3(T21-T2) + m1(|U12|^2-|U1|^2) + m2(|U21|^2-|U2|^2)``."""

    def sq(u):
        return np.sum(np.asarray(u) ** 2, axis=-1)

    return (
        3.0 * (ms.T12 - ms.s1.T)
        + 3.0 * (ms.T21 - ms.s2.T)
        + p.m1 * (sq(ms.U12) - sq(ms.s1.U))
        + p.m2 * (sq(ms.U21) - sq(ms.s2.U))
    )


def maxwellian(n, U, T, m: float, grid: VelocityGrid) -> np.ndarray:
    """Sample ``n (m / 2 pi T)^{3/2} exp(-m |v - U|^2 / 2T)`` at every node.

    ``n``, ``T`` may be scalars or arrays over cells (``U`` then has a
    trailing axis of length 3); the result has shape ``(..., n_nodes)``.
    """
    n = np.asarray(n, dtype=float)
    T = np.asarray(T, dtype=float)
    U = np.asarray(U, dtype=float)
    if np.any(~(n > 0)) or np.any(~(T > 0)):
        raise ValueError("maxwellian needs positive density and temperature")
    d2 = np.sum((grid.nodes - U[..., None, :]) ** 2, axis=-1)
    return (n * (m / (2 * np.pi * T)) ** 1.5)[..., None] * np.exp(-m * d2 / (2 * T[..., None]))


def maxwellian_params(n, U, T, m: float) -> np.ndarray:
    """Exponent coefficients ``(alpha, beta, c)`` of a continuous Maxwellian, per cell."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    c = -m / (2 * T)
    beta = (m / T)[:, None] * U
    alpha = np.log(n * (m / (2 * np.pi * T)) ** 1.5) - m * np.sum(U * U, axis=1) / (2 * T)
    return np.column_stack([alpha, beta, c])


def discrete_maxwellian(n, nU, energy, m: float, grid: VelocityGrid, tol: float = 1e-12, maxiter: int = 100):
    """Grid function ``exp(alpha + beta.v + c|v|^2)`` whose discrete moments are exact.

    Targets are the mass ``n``, momentum density ``nU`` (per unit mass) and
    the energy ``sum w G m |v|^2``. Returns values shaped like the targets'
    leading axes plus the node axis.
    """
    n_arr = np.asarray(n, dtype=float)
    lead = n_arr.shape
    n_flat = np.atleast_1d(n_arr).reshape(-1)
    nU_flat = np.asarray(nU, dtype=float).reshape(-1, 3)
    e_flat = np.atleast_1d(np.asarray(energy, dtype=float)).reshape(-1)
    internal = e_flat / m - np.sum(nU_flat**2, axis=1) / n_flat
    if np.any(~(n_flat > 0)) or np.any(~(internal > 0)):
        raise InfeasibleTarget("targets need positive mass and positive internal energy")
    U = nU_flat / n_flat[:, None]
    T = m * internal / (3 * n_flat)
    targets = np.column_stack([n_flat, nU_flat, e_flat / m])
    p0 = maxwellian_params(n_flat, U, T, m)
    params, values, _, converged = _kernels.expquad_solve(targets, p0, grid.nodes, grid.weights, tol, maxiter)
    if not np.all(converged) or np.any(params[:, 4] >= 0):
        bad = int(np.sum(~converged | (params[:, 4] >= 0)))
        raise InfeasibleTarget(f"moment matching did not converge in {maxiter} iterations for {bad} cell(s)")
    return values.reshape(*lead, grid.size)


def global_equilibria(p: MixtureParams, grid: PhaseGrid, mode: str = "sampled") -> DistributionPair:
    """``(mu1, mu2)`` at every cell.

    ``mode="sampled"`` evaluates the continuous formula; ``mode="matched"``
    returns the discrete Maxwellians with exact moments ``(n_k0, 0, T=1)``.
    """
    vg = grid.velocity
    if mode == "sampled":
        mu1 = maxwellian(p.n10, np.zeros(3), 1.0, p.m1, vg)
        mu2 = maxwellian(p.n20, np.zeros(3), 1.0, p.m2, vg)
    elif mode == "matched":
        mu1 = discrete_maxwellian(p.n10, np.zeros(3), 3 * p.n10, p.m1, vg)
        mu2 = discrete_maxwellian(p.n20, np.zeros(3), 3 * p.n20, p.m2, vg)
    else:
        raise ValueError(f"unknown equilibrium mode {mode!r}")
    cells = grid.space.n_cells
    return DistributionPair(np.tile(mu1, (cells, 1)), np.tile(mu2, (cells, 1)))
