"""Perturbation framework around the global equilibrium.

Moment bases and projections, the linearized relaxation operator ``L`` with
its mass and momentum-energy parts, the dissipation functional, kernel
counting, finite-difference checks of the Maxwellian derivatives and the
nonlinear remainder ``Gamma = rhs/sqrt(mu) - L f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .collision import bgk_rhs
from .grid import PERTURBATION, DistributionPair, PhaseGrid, SpatialGrid, VelocityGrid, inner_product_xv
from .mixture import MixtureParams, SpeciesMoments, compute_moments, maxwellian, mix_moments

SQRT6 = np.sqrt(6.0)


# ---------------------------------------------------------------- bases


@dataclass(frozen=True, eq=False)
class SpeciesBasis:
    """The five moment functions ``e_k1..e_k5`` of one species as rows of ``e``.

    ``gram_defect`` is ``max |<e_i, e_j> - delta_ij|`` of the stored rows on
    the grid; it is the honest size of the quadrature error when the rows
    are plain samples of the continuous formulas.
    """

    species: int
    e: np.ndarray
    sqrt_mu: np.ndarray
    weights: np.ndarray
    gram_defect: float
    orthonormalized: bool

    def coefficients(self, f) -> np.ndarray:
        """``<f, e_i>`` for every cell, shape ``(..., 5)``."""
        return np.asarray(f, dtype=float) @ (self.e * self.weights).T

    def project(self, f) -> np.ndarray:
        return self.coefficients(f) @ self.e


def _gram(rows, weights):
    return (rows * weights) @ rows.T


@lru_cache(maxsize=64)
def _species_basis(m: float, n0: float, species: int, grid: VelocityGrid, orthonormalize: bool) -> SpeciesBasis:
    v = grid.nodes
    sqrt_mu = np.sqrt(maxwellian(n0, np.zeros(3), 1.0, m, grid))
    e = np.empty((5, grid.size))
    e[0] = sqrt_mu / np.sqrt(n0)
    e[1:4] = np.sqrt(m / n0) * v.T * sqrt_mu
    e[4] = (m * grid.speed2 - 3.0) / np.sqrt(6.0 * n0) * sqrt_mu
    if orthonormalize:
        # Gram-Schmidt in the order e1..e5, written as a Cholesky solve
        chol = np.linalg.cholesky(_gram(e, grid.weights))
        e = np.linalg.solve(chol, e)
    defect = float(np.max(np.abs(_gram(e, grid.weights) - np.eye(5))))
    e.setflags(write=False)
    sqrt_mu.setflags(write=False)
    return SpeciesBasis(species, e, sqrt_mu, grid.weights, defect, orthonormalize)


def build_species_basis(p: MixtureParams, k: int, grid: VelocityGrid, orthonormalize: bool = False) -> SpeciesBasis:
    """Moment basis of species ``k`` (1 or 2).

    By default the rows are the sampled continuous formulas and are not
    re-orthonormalized; ``orthonormalize=True`` applies a discrete
    Gram-Schmidt pass so that projections are exactly orthogonal on the grid.
    """
    if k == 1:
        return _species_basis(p.m1, p.n10, 1, grid, orthonormalize)
    if k == 2:
        return _species_basis(p.m2, p.n20, 2, grid, orthonormalize)
    raise ValueError(f"species index must be 1 or 2, got {k}")


@dataclass(frozen=True, eq=False)
class MixtureBasis:
    """Six pair-valued functions spanning the joint collision invariants.

    ``E1 = (e11, 0)``, ``E2 = (0, e21)``, the three joint momenta and the
    joint energy, each a weighted combination of the per-species rows.
    """

    first: np.ndarray
    second: np.ndarray
    weights: np.ndarray

    def coefficients(self, f1, f2) -> np.ndarray:
        w = self.weights
        return np.asarray(f1) @ (self.first * w).T + np.asarray(f2) @ (self.second * w).T

    def project(self, f1, f2):
        d = self.coefficients(f1, f2)
        return d @ self.first, d @ self.second

    def gram(self) -> np.ndarray:
        return _gram(self.first, self.weights) + _gram(self.second, self.weights)

    @property
    def gram_defect(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(6))))


def build_mixture_basis(p: MixtureParams, b1: SpeciesBasis, b2: SpeciesBasis) -> MixtureBasis:
    size = b1.e.shape[1]
    first = np.zeros((6, size))
    second = np.zeros((6, size))
    first[0] = b1.e[0]
    second[1] = b2.e[0]
    rho1 = p.m1 * p.n10
    rho2 = p.m2 * p.n20
    norm = np.sqrt(rho1 + rho2)
    first[2:5] = np.sqrt(rho1) * b1.e[1:4] / norm
    second[2:5] = np.sqrt(rho2) * b2.e[1:4] / norm
    # normalized by sqrt(6 (n10 + n20)) once the e_k5 factors are expanded
    norm = np.sqrt(p.n10 + p.n20)
    first[5] = np.sqrt(p.n10) * b1.e[4] / norm
    second[5] = np.sqrt(p.n20) * b2.e[4] / norm
    return MixtureBasis(first, second, b1.weights)


@dataclass(frozen=True, eq=False)
class Bases:
    b1: SpeciesBasis
    b2: SpeciesBasis
    E: MixtureBasis


def build_bases(p: MixtureParams, grid: VelocityGrid | PhaseGrid, orthonormalize: bool = False) -> Bases:
    vg = grid.velocity if isinstance(grid, PhaseGrid) else grid
    b1 = build_species_basis(p, 1, vg, orthonormalize)
    b2 = build_species_basis(p, 2, vg, orthonormalize)
    return Bases(b1, b2, build_mixture_basis(p, b1, b2))


def _pair(f) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(f, DistributionPair):
        return f.first, f.second
    f1, f2 = f
    return np.asarray(f1, dtype=float), np.asarray(f2, dtype=float)


# ---------------------------------------------------------------- perturbations


def perturbation_split(F: DistributionPair, p: MixtureParams, grid: PhaseGrid) -> DistributionPair:
    """``f_k = (F_k - mu_k) / sqrt(mu_k)`` nodewise."""
    bs = build_bases(p, grid)
    s1, s2 = bs.b1.sqrt_mu, bs.b2.sqrt_mu
    return DistributionPair((F.first - s1 * s1) / s1, (F.second - s2 * s2) / s2, PERTURBATION)


def reconstruct(f: DistributionPair, p: MixtureParams, grid: PhaseGrid) -> DistributionPair:
    """``F_k = mu_k + sqrt(mu_k) f_k``."""
    bs = build_bases(p, grid)
    s1, s2 = bs.b1.sqrt_mu, bs.b2.sqrt_mu
    return DistributionPair(s1 * (s1 + f.first), s2 * (s2 + f.second))


def project_species(f, basis: SpeciesBasis) -> np.ndarray:
    """``P_k f = sum_i <f, e_ki> e_ki``."""
    return basis.project(f)


def project_mixture(f, basis: MixtureBasis) -> DistributionPair:
    """``P(f1, f2) = sum_i <(f1, f2), E_i> E_i``."""
    f1, f2 = _pair(f)
    g1, g2 = basis.project(f1, f2)
    return DistributionPair(g1, g2, PERTURBATION)


@dataclass
class MacroCoefficients:
    """Density, velocity and temperature coefficients of the macroscopic part, per cell."""

    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def reconstruct(self, p: MixtureParams, grid: VelocityGrid | PhaseGrid) -> DistributionPair:
        """``a1 (sqrt mu1, 0) + a2 (0, sqrt mu2) + (b.v + c|v|^2)(m1 sqrt mu1, m2 sqrt mu2)``."""
        vg = grid.velocity if isinstance(grid, PhaseGrid) else grid
        bs = build_bases(p, vg)
        shape = (self.b @ vg.nodes.T) + self.c[..., None] * vg.speed2
        g1 = bs.b1.sqrt_mu * (self.a1[..., None] + p.m1 * shape)
        g2 = bs.b2.sqrt_mu * (self.a2[..., None] + p.m2 * shape)
        return DistributionPair(g1, g2, PERTURBATION)


def macro_coefficients(f, p: MixtureParams, grid: VelocityGrid | PhaseGrid) -> MacroCoefficients:
    vg = grid.velocity if isinstance(grid, PhaseGrid) else grid
    f1, f2 = _pair(f)
    bs = build_bases(p, vg)
    w = vg.weights
    phi = np.column_stack([np.ones(vg.size), vg.nodes, vg.speed2])
    q1 = f1 @ (phi * (w * bs.b1.sqrt_mu)[:, None])
    q2 = f2 @ (phi * (w * bs.b2.sqrt_mu)[:, None])
    energy = (p.m1 * q1[..., 4] - 3.0 * q1[..., 0]) + (p.m2 * q2[..., 4] - 3.0 * q2[..., 0])
    ntot = p.n10 + p.n20
    return MacroCoefficients(
        a1=q1[..., 0] / p.n10 - energy / (2.0 * ntot),
        a2=q2[..., 0] / p.n20 - energy / (2.0 * ntot),
        b=(p.m1 * q1[..., 1:4] + p.m2 * q2[..., 1:4]) / (p.m1 * p.n10 + p.m2 * p.n20),
        c=energy / (6.0 * ntot),
    )


# ---------------------------------------------------------------- linearized operator


@dataclass
class LinearParts:
    """The six pieces of ``L``; species-1 pieces first."""

    L11: np.ndarray
    L12_1: np.ndarray
    L12_2: np.ndarray
    L22: np.ndarray
    L21_1: np.ndarray
    L21_2: np.ndarray

    def total(self) -> DistributionPair:
        return DistributionPair(self.L11 + self.L12_1 + self.L12_2, self.L22 + self.L21_1 + self.L21_2, PERTURBATION)

    def items(self):
        return self.__dict__.items()


def exchange_parts(c1, c2, p: MixtureParams, bases: Bases):
    """Momentum-energy interchange parts ``(L12^2, L21^2)`` from the moment coefficients."""
    e1, e2 = bases.b1.e, bases.b2.e
    r = p.mass_ratio
    a = np.sqrt(p.n10 / p.n20) * np.sqrt(r)
    s = np.sqrt(p.n10 / p.n20)
    L12 = p.n20 * (
        (1.0 - p.delta) * (a * c2[..., 1:4] - c1[..., 1:4]) @ e1[1:4]
        + (1.0 - p.omega) * (s * c2[..., 4] - c1[..., 4])[..., None] * e1[4]
    )
    L21 = p.n10 * (
        r * (1.0 - p.delta) * (c1[..., 1:4] / a - c2[..., 1:4]) @ e2[1:4]
        + (1.0 - p.omega) * (c1[..., 4] / s - c2[..., 4])[..., None] * e2[4]
    )
    return L12, L21


def apply_L_parts(f, p: MixtureParams, grid: VelocityGrid | PhaseGrid, bases: Bases | None = None) -> LinearParts:
    """Split of ``L`` into intra-species, mass-interaction and momentum-energy parts.

    ``delta = 1`` and ``omega = 1`` are accepted here (kernel studies).
    """
    bases = bases or build_bases(p, grid)
    f1, f2 = _pair(f)
    c1 = bases.b1.coefficients(f1)
    c2 = bases.b2.coefficients(f2)
    micro1 = c1 @ bases.b1.e - f1
    micro2 = c2 @ bases.b2.e - f2
    L12_2, L21_2 = exchange_parts(c1, c2, p, bases)
    return LinearParts(
        L11=p.n10 * micro1,
        L12_1=p.n20 * micro1,
        L12_2=L12_2,
        L22=p.n20 * micro2,
        L21_1=p.n10 * micro2,
        L21_2=L21_2,
    )


def apply_L(f, p: MixtureParams, grid: VelocityGrid | PhaseGrid, bases: Bases | None = None) -> DistributionPair:
    """``L(f1, f2) = (L11 f1 + L12(f1, f2), L22 f2 + L21(f1, f2))``."""
    return apply_L_parts(f, p, grid, bases).total()


def linear_maxwellian_parts(f, p: MixtureParams, grid: VelocityGrid | PhaseGrid, bases: Bases | None = None):
    """First-order variations of ``M12`` and ``M21`` divided by ``sqrt(mu_k)``.

    Assembled term by term from the chain rule at the equilibrium (density,
    then velocity weighted by ``delta``, temperature weighted by ``omega``,
    then the cross-species contributions), independent of :func:`apply_L`.
    """
    bases = bases or build_bases(p, grid)
    f1, f2 = _pair(f)
    c1 = bases.b1.coefficients(f1)
    c2 = bases.b2.coefficients(f2)
    e1, e2 = bases.b1.e, bases.b2.e
    r = p.mass_ratio
    a = np.sqrt(p.n10 / p.n20) * np.sqrt(r)
    s = np.sqrt(p.n10 / p.n20)
    lin12 = (
        c1[..., :1] * e1[0]
        + p.delta * c1[..., 1:4] @ e1[1:4]
        + p.omega * c1[..., 4:5] * e1[4]
        + (1.0 - p.delta) * a * c2[..., 1:4] @ e1[1:4]
        + (1.0 - p.omega) * s * c2[..., 4:5] * e1[4]
    )
    lin21 = (
        c2[..., :1] * e2[0]
        + (1.0 - r * (1.0 - p.delta)) * c2[..., 1:4] @ e2[1:4]
        + p.omega * c2[..., 4:5] * e2[4]
        + r * (1.0 - p.delta) * c1[..., 1:4] @ e2[1:4] / a
        + (1.0 - p.omega) * c1[..., 4:5] * e2[4] / s
    )
    return lin12, lin21


# ---------------------------------------------------------------- dissipation


@dataclass
class DissipationReport:
    lhs: float
    rhs: float
    margin: float
    norm2: float
    partial_lhs: float
    partial_rhs: float
    exchange_lhs: float
    exchange_bound: float

    @property
    def partial_residual(self) -> float:
        return abs(self.partial_lhs - self.partial_rhs)

    @property
    def exchange_margin(self) -> float:
        return self.exchange_bound - self.exchange_lhs


def dissipation_check(f: DistributionPair, p: MixtureParams, grid: PhaseGrid, bases: Bases | None = None) -> DissipationReport:
    """Compare ``<Lf, f>`` with the dissipation bound in the micro parts.

    ``margin = rhs - lhs`` is nonnegative when the inequality holds. Also
    returns the two partial estimates: the mass/intra-species identity and
    the momentum-energy bound.
    """
    bases = bases or build_bases(p, grid, orthonormalize=True)
    f = DistributionPair(*_pair(f), PERTURBATION)
    parts = apply_L_parts(f, p, grid, bases)
    ip = lambda a, b: inner_product_xv(a, b, grid)  # noqa: E731
    ntot = p.n10 + p.n20

    P12 = DistributionPair(bases.b1.project(f.first), bases.b2.project(f.second))
    micro12 = f.axpy(-1.0, P12)
    PE = project_mixture(f, bases.E)
    microE = f.axpy(-1.0, PE)

    lhs = ip(parts.total(), f)
    rhs = -ntot * (max(p.delta, p.omega) * ip(micro12, micro12) + min(1 - p.delta, 1 - p.omega) * ip(microE, microE))
    partial = ip(DistributionPair(parts.L11 + parts.L12_1, parts.L22 + parts.L21_1), f)
    exchange = ip(DistributionPair(parts.L12_2, parts.L21_2), f)
    gap = ip(P12, P12) - ip(PE, PE)
    return DissipationReport(
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        norm2=ip(f, f),
        partial_lhs=partial,
        partial_rhs=-ntot * ip(micro12, micro12),
        exchange_lhs=exchange,
        exchange_bound=-min(1 - p.delta, 1 - p.omega) * ntot * gap,
    )


# ---------------------------------------------------------------- kernel


@dataclass
class KernelReport:
    dimension: int
    singular_values: np.ndarray
    threshold: float
    basis: np.ndarray = field(repr=False)


def kernel_dimension(p: MixtureParams, grid: VelocityGrid, tol: float = 1e-6, n_random: int = 20,
                     seed: int = 0, orthonormalize: bool = True) -> KernelReport:
    """Dimension of the null space of ``L`` restricted to a reduced trial space.

    The trial space is the ten per-species moment functions plus
    ``n_random`` random directions orthogonal to them. ``L`` maps this
    space into itself, so its singular values below ``tol * s_max`` count
    the kernel. ``basis`` holds the kernel vectors as rows of stacked
    ``(f1, f2)`` values.
    """
    bases = build_bases(p, grid, orthonormalize)
    sw = np.sqrt(grid.weights)
    n = grid.size
    span = np.zeros((2 * n, 10))
    span[:n, :5] = (bases.b1.e * sw).T
    span[n:, 5:] = (bases.b2.e * sw).T
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(np.hstack([span, rng.standard_normal((2 * n, n_random))]))
    trial = Q.T / np.concatenate([sw, sw])
    out = apply_L((trial[:, :n], trial[:, n:]), p, grid, bases)
    M = Q.T @ (np.hstack([out.first, out.second]) * np.concatenate([sw, sw])).T
    _, svals, vt = np.linalg.svd(M)
    thresh = tol * svals[0]
    null = vt[svals < thresh]
    return KernelReport(int(np.sum(svals < thresh)), svals, thresh, null @ trial)


# ---------------------------------------------------------------- derivative checks


def transition_moments(s: SpeciesMoments, n0: float, m: float, theta: float) -> SpeciesMoments:
    """Fields on the straight path in ``(n, nU, G)`` from ``(n0, 0, 1)`` (``theta=0``) to ``s``.

    ``G = (3nT + m n |U|^2 - 3n) / sqrt 6`` so the path is affine in the
    conserved quantities.
    """
    n = np.asarray(s.n, dtype=float)
    U = np.asarray(s.U, dtype=float)
    G = (3 * n * s.T + m * n * np.sum(U * U, axis=-1) - 3 * n) / SQRT6
    nt = theta * n + (1 - theta) * n0
    Ut = theta * n[..., None] * U / nt[..., None]
    Tt = 1.0 + (SQRT6 * theta * G - m * nt * np.sum(Ut * Ut, axis=-1)) / (3 * nt)
    return SpeciesMoments(nt, Ut, Tt)


def theta_maxwellians(s1: SpeciesMoments, s2: SpeciesMoments, p: MixtureParams, grid: VelocityGrid, theta: float):
    """``(M12(theta), M21(theta))`` along the transition path."""
    t1 = transition_moments(s1, p.n10, p.m1, theta)
    t2 = transition_moments(s2, p.n20, p.m2, theta)
    ms = mix_moments(t1, t2, p)
    return (
        maxwellian(t1.n, ms.U12, ms.T12, p.m1, grid),
        maxwellian(t2.n, ms.U21, ms.T21, p.m2, grid),
    )


def _m12_of(fields, p, grid):
    n1, U1, T1, n2, U2, T2 = fields
    ms = mix_moments(SpeciesMoments(n1, U1, T1), SpeciesMoments(n2, U2, T2), p)
    return maxwellian(n1, ms.U12, ms.T12, p.m1, grid)


def _m21_of(fields, p, grid):
    n1, U1, T1, n2, U2, T2 = fields
    ms = mix_moments(SpeciesMoments(n1, U1, T1), SpeciesMoments(n2, U2, T2), p)
    return maxwellian(n2, ms.U21, ms.T21, p.m2, grid)


@dataclass
class DerivativeRow:
    name: str
    error: float
    error_half_step: float


def _closed_forms(p: MixtureParams, grid: VelocityGrid):
    v = grid.nodes
    mu1 = maxwellian(p.n10, np.zeros(3), 1.0, p.m1, grid)
    mu2 = maxwellian(p.n20, np.zeros(3), 1.0, p.m2, grid)
    h1 = (p.m1 * grid.speed2 - 3.0) / 2.0 * mu1
    h2 = (p.m2 * grid.speed2 - 3.0) / 2.0 * mu2
    r = p.mass_ratio
    # (map, field index, closed form); vector fields give a (3, N) array
    return [
        ("dM12/dn1", _m12_of, 0, mu1 / p.n10),
        ("dM12/dU1", _m12_of, 1, p.delta * p.m1 * v.T * mu1),
        ("dM12/dT1", _m12_of, 2, p.omega * h1),
        ("dM12/dU2", _m12_of, 4, (1 - p.delta) * p.m1 * v.T * mu1),
        ("dM12/dT2", _m12_of, 5, (1 - p.omega) * h1),
        ("dM21/dn2", _m21_of, 3, mu2 / p.n20),
        ("dM21/dU2", _m21_of, 4, (1 - r * (1 - p.delta)) * p.m2 * v.T * mu2),
        ("dM21/dT2", _m21_of, 5, p.omega * h2),
        ("dM21/dU1", _m21_of, 1, r * (1 - p.delta) * p.m2 * v.T * mu2),
        ("dM21/dT1", _m21_of, 2, (1 - p.omega) * h2),
    ]


def _central_difference(fn, base, idx, comp, h, p, grid):
    up = [np.array(x, dtype=float) for x in base]
    dn = [np.array(x, dtype=float) for x in base]
    if comp is None:
        up[idx] = up[idx] + h
        dn[idx] = dn[idx] - h
    else:
        up[idx][comp] += h
        dn[idx][comp] -= h
    return (fn(up, p, grid) - fn(dn, p, grid)) / (2 * h)


def verify_mix_derivatives(p: MixtureParams, grid: VelocityGrid, step: float = 1e-5) -> list[DerivativeRow]:
    """Central differences of ``M12``, ``M21`` at the equilibrium against their closed forms.

    The error is the max-norm of the difference relative to the max-norm of
    the closed form, at ``step`` and at ``step / 2`` (steps scale with the
    size of the perturbed field).
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError(f"step must lie in [1e-7, 1e-3], got {step}")
    base = (p.n10, np.zeros(3), 1.0, p.n20, np.zeros(3), 1.0)
    rows = []
    for name, fn, idx, exact in _closed_forms(p, grid):
        errs = []
        for h0 in (step, step / 2):
            h = h0 * max(1.0, float(np.max(np.abs(base[idx]))))
            if exact.ndim == 2:
                fd = np.stack([_central_difference(fn, base, idx, i, h, p, grid) for i in range(3)])
            else:
                fd = _central_difference(fn, base, idx, None, h, p, grid)
            errs.append(float(np.max(np.abs(fd - exact)) / np.max(np.abs(exact))))
        rows.append(DerivativeRow(name, errs[0], errs[1]))
    return rows


@dataclass
class JacobianReport:
    inverse_residual: float
    fd_residual: float


def jacobian_closed_form(n: float, U, T: float, m: float):
    """``J = d(n, nU, G)/d(n, U, T)`` and its inverse, both 5x5."""
    U = np.asarray(U, dtype=float)
    J = np.zeros((5, 5))
    J[0, 0] = 1.0
    J[1:4, 0] = U
    J[1:4, 1:4] = n * np.eye(3)
    J[4, 0] = (3 * T + m * U @ U - 3) / SQRT6
    J[4, 1:4] = 2 * n * m * U / SQRT6
    J[4, 4] = 3 * n / SQRT6
    Ji = np.zeros((5, 5))
    Ji[0, 0] = 1.0
    Ji[1:4, 0] = -U / n
    Ji[1:4, 1:4] = np.eye(3) / n
    Ji[4, 0] = (m * U @ U - 3 * T + 3) / (3 * n)
    Ji[4, 1:4] = -2 * m / 3 * U / n
    Ji[4, 4] = np.sqrt(2.0 / 3.0) / n
    return J, Ji


def conserved_map(x, m: float) -> np.ndarray:
    """``(n, U, T) -> (n, nU, G)`` for a packed 5-vector ``x``."""
    n, U, T = x[0], x[1:4], x[4]
    return np.concatenate([[n], n * U, [(3 * n * T + m * n * U @ U - 3 * n) / SQRT6]])


def verify_jacobian(n: float, U, T: float, m: float, step: float = 1e-5) -> JacobianReport:
    """Residuals ``max|J Jinv - I|`` and ``max|J_fd - J|`` (the latter relative to ``max(1, max|J|)``)."""
    if not (n > 0 and T > 0):
        raise ValueError("need n > 0 and T > 0")
    J, Ji = jacobian_closed_form(n, U, T, m)
    x = np.concatenate([[n], np.asarray(U, dtype=float), [T]])
    fd = np.empty((5, 5))
    for j in range(5):
        h = step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fd[:, j] = (conserved_map(xp, m) - conserved_map(xm, m)) / (2 * h)
    return JacobianReport(
        inverse_residual=float(np.max(np.abs(J @ Ji - np.eye(5)))),
        fd_residual=float(np.max(np.abs(fd - J)) / max(1.0, np.max(np.abs(J)))),
    )


# ---------------------------------------------------------------- Taylor remainders


def random_moment_perturbation(p: MixtureParams, grid: VelocityGrid, rng: np.random.Generator,
                               bases: Bases | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm pair in the ten-dimensional moment span with random coefficients."""
    bases = bases or build_bases(p, grid)
    c = rng.standard_normal(10)
    c /= np.linalg.norm(c)
    return c[:5] @ bases.b1.e, c[5:] @ bases.b2.e


@dataclass
class LinearPartReport:
    amplitudes: np.ndarray
    remainder12: np.ndarray
    remainder21: np.ndarray
    order12: float
    order21: float
    theta_derivative_error: float

    @property
    def order(self) -> float:
        return min(self.order12, self.order21)


def _moment_state(f1, f2, p, grid, bases):
    """Discrete species moments of ``mu + sqrt(mu) f`` (single cell)."""
    F1 = bases.b1.sqrt_mu * (bases.b1.sqrt_mu + f1)
    F2 = bases.b2.sqrt_mu * (bases.b2.sqrt_mu + f2)
    return compute_moments(F1, p.m1, grid), compute_moments(F2, p.m2, grid)


def verify_linear_part(p: MixtureParams, grid: VelocityGrid, amplitudes=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
                       seed: int = 0) -> LinearPartReport:
    """Taylor order of the first-order expansion of ``M12`` and ``M21``.

    For a random moment perturbation ``g`` the remainder is
    ``R(eps) = [M(mu + eps sqrt(mu) g) - M(mu)] / sqrt(mu) - eps * lin(g)``,
    measured in the discrete ``L^2_v`` norm; subtracting ``M(mu)`` on the
    grid removes the constant quadrature offset so ``R(0) = 0`` exactly.
    The fitted slope of ``log|R|`` against ``log eps`` should be near 2.
    Also reports the relative mismatch between ``d/dtheta M(theta)`` at 0
    (central difference along the transition path) and the linear part.
    """
    amps = np.asarray(sorted(amplitudes, reverse=True), dtype=float)
    if amps.min() < 1e-4 or amps.max() > 1e-1:
        raise ValueError("amplitudes must lie within [1e-4, 1e-1]")
    bases = build_bases(p, grid)
    rng = np.random.default_rng(seed)
    g1, g2 = random_moment_perturbation(p, grid, rng, bases)
    lin12, lin21 = linear_maxwellian_parts((g1, g2), p, grid, bases)
    s1, s2 = bases.b1.sqrt_mu, bases.b2.sqrt_mu
    w = grid.weights

    base1, base2 = _moment_state(np.zeros_like(g1), np.zeros_like(g2), p, grid, bases)
    ms0 = mix_moments(base1, base2, p)
    M12_0 = maxwellian(base1.n, ms0.U12, ms0.T12, p.m1, grid)
    M21_0 = maxwellian(base2.n, ms0.U21, ms0.T21, p.m2, grid)

    r12, r21 = [], []
    for eps in amps:
        t1, t2 = _moment_state(eps * g1, eps * g2, p, grid, bases)
        ms = mix_moments(t1, t2, p)
        M12 = maxwellian(t1.n, ms.U12, ms.T12, p.m1, grid)
        M21 = maxwellian(t2.n, ms.U21, ms.T21, p.m2, grid)
        R12 = (M12 - M12_0) / s1 - eps * lin12
        R21 = (M21 - M21_0) / s2 - eps * lin21
        r12.append(np.sqrt(np.sum(w * R12 * R12)))
        r21.append(np.sqrt(np.sum(w * R21 * R21)))
    r12 = np.asarray(r12)
    r21 = np.asarray(r21)
    order12 = float(np.polyfit(np.log(amps), np.log(r12), 1)[0])
    order21 = float(np.polyfit(np.log(amps), np.log(r21), 1)[0])

    # d/dtheta at theta = 0 along the path towards mu + sqrt(mu) g
    t1, t2 = _moment_state(g1, g2, p, grid, bases)
    h = 1e-4
    up12, up21 = theta_maxwellians(t1, t2, p, grid, h)
    dn12, dn21 = theta_maxwellians(t1, t2, p, grid, -h)
    d12 = (up12 - dn12) / (2 * h)
    d21 = (up21 - dn21) / (2 * h)
    ref12, ref21 = s1 * lin12, s2 * lin21
    theta_err = max(
        float(np.max(np.abs(d12 - ref12)) / np.max(np.abs(ref12))),
        float(np.max(np.abs(d21 - ref21)) / np.max(np.abs(ref21))),
    )
    return LinearPartReport(amps, r12, r21, order12, order21, theta_err)


def nonlinear_remainder(f, p: MixtureParams, grid: PhaseGrid, mode: str = "sampled",
                        bases: Bases | None = None) -> DistributionPair:
    """``Gamma(f) = bgk_rhs(mu + sqrt(mu) f) / sqrt(mu) - L f``.

    Raises ``ValueError`` when the reconstructed distribution is negative
    anywhere.
    """
    bases = bases or build_bases(p, grid)
    f = DistributionPair(*_pair(f), PERTURBATION)
    F = reconstruct(f, p, grid)
    if F.min() < 0:
        raise ValueError(f"reconstructed distribution is negative (min {F.min():.3e}); reduce the perturbation")
    rhs = bgk_rhs(F, p, grid, mode=mode)
    Lf = apply_L(f, p, grid, bases)
    return DistributionPair(
        rhs.first / bases.b1.sqrt_mu - Lf.first,
        rhs.second / bases.b2.sqrt_mu - Lf.second,
        PERTURBATION,
    )


def homogeneous_grid(velocity: VelocityGrid) -> PhaseGrid:
    return PhaseGrid(SpatialGrid(), velocity)
