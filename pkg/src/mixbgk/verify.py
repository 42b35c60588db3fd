"""Property suite run by ``mixbgk verify``: each check returns measured residuals and a verdict."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import exchange_diagnostics
from .grid import DistributionPair, PhaseGrid, SpatialGrid, VelocityGrid, norm_xv2
from .linear import (
    build_bases,
    build_mixture_basis,
    build_species_basis,
    dissipation_check,
    homogeneous_grid,
    kernel_dimension,
    nonlinear_remainder,
    verify_jacobian,
    verify_linear_part,
    verify_mix_derivatives,
)
from .scenarios import initial_state
from .mixture import (
    MixtureParams,
    SpeciesMoments,
    energy_exchange_residual,
    maxwellian,
    mix_moments,
    momentum_exchange_residual,
    validate_params,
)

# expected null-space size for (delta < 1, omega < 1), (1, <1), (<1, 1), (1, 1)
KERNEL_REGIMES = {(False, False): 6, (True, False): 9, (False, True): 7, (True, True): 10}


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name:<28s} measured={self.measured:.3e}  tol={self.tolerance:.1e}  {self.detail}".rstrip()


def verification_grid(p: MixtureParams, n_per_axis: int = 24, v_max: float = 0.0) -> VelocityGrid:
    """Velocity grid for the checks; ``v_max = 0`` selects ``7 / sqrt(m2)``."""
    return VelocityGrid(v_max if v_max > 0 else 7.0 / np.sqrt(p.m2), n_per_axis)


def draw_params(rng: np.random.Generator, m1: float | None = None, m2: float | None = None) -> MixtureParams:
    """Uniform draw from the admissible region; masses are drawn unless given."""
    if m2 is None:
        m2 = float(rng.uniform(0.5, 2.0))
    if m1 is None:
        m1 = m2 * float(rng.uniform(1.0, 4.0))
    p = MixtureParams(m1=m1, m2=m2, n10=float(rng.uniform(0.3, 3.0)), n20=float(rng.uniform(0.3, 3.0)))
    delta = float(rng.uniform(p.delta_lower_bound, 1.0))
    p = p.replace(delta=delta, omega=float(rng.uniform(0.0, 1.0)))
    p = p.replace(gamma=float(rng.uniform(0.0, max(p.gamma_upper_bound, 0.0))))
    assert validate_params(p)
    return p


# ---------------------------------------------------------------- individual checks


def check_exchange_antisymmetry(n_params: int = 100, per_params: int = 100, seed: int = 0,
                                flip_gamma_t21: bool = False, tol: float = 1e-12) -> list[CheckResult]:
    """Momentum and energy exchange identities of the mixing rules over random draws.

    Residuals are relative to the size of the terms they balance.
    """
    rng = np.random.default_rng(seed)
    worst_mom = worst_en = 0.0
    for _ in range(n_params):
        p = draw_params(rng)
        k = per_params
        s1 = SpeciesMoments(rng.uniform(0.1, 3.0, k), rng.normal(0, 1, (k, 3)) / np.sqrt(p.m1), rng.uniform(0.2, 3.0, k))
        s2 = SpeciesMoments(rng.uniform(0.1, 3.0, k), rng.normal(0, 1, (k, 3)) / np.sqrt(p.m2), rng.uniform(0.2, 3.0, k))
        ms = mix_moments(s1, s2, p, flip_gamma_t21)
        mom_scale = p.m1 * np.abs(s1.U).max(axis=1) + p.m2 * np.abs(s2.U).max(axis=1)
        en_scale = 3 * (s1.T + s2.T) + p.m1 * np.sum(s1.U**2, axis=1) + p.m2 * np.sum(s2.U**2, axis=1)
        mom = np.abs(momentum_exchange_residual(ms, p)).max(axis=1) / mom_scale
        en = np.abs(energy_exchange_residual(ms, p)) / en_scale
        worst_mom = max(worst_mom, float(mom.max()))
        worst_en = max(worst_en, float(en.max()))
    draws = f"{n_params * per_params} draws"
    return [
        CheckResult("momentum_antisymmetry", worst_mom <= tol, worst_mom, tol, draws),
        CheckResult("energy_antisymmetry", worst_en <= tol, worst_en, tol, draws),
    ]


def check_gram(p: MixtureParams, grid: VelocityGrid, tol: float = 1e-8) -> list[CheckResult]:
    """Quadrature defect of the unnormalized bases, relative to ``n10 + n20``."""
    b1 = build_species_basis(p, 1, grid)
    b2 = build_species_basis(p, 2, grid)
    E = build_mixture_basis(p, b1, b2)
    scale = p.n10 + p.n20
    out = []
    for name, defect in (("gram_species1", b1.gram_defect), ("gram_species2", b2.gram_defect), ("gram_mixture", E.gram_defect)):
        rel = defect / scale
        out.append(CheckResult(name, rel <= tol, rel, tol))
    return out


def check_derivatives(p: MixtureParams, grid: VelocityGrid, step: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    rows = verify_mix_derivatives(p, grid, step)
    return [CheckResult(f"derivative {r.name}", r.error <= tol, r.error, tol) for r in rows]


def check_jacobian(n_draws: int = 100, seed: int = 0, step: float = 1e-5,
                   tol_inverse: float = 1e-12, tol_fd: float = 1e-6) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    inv = fd = 0.0
    for _ in range(n_draws):
        rep = verify_jacobian(rng.uniform(0.2, 3.0), rng.normal(0, 1, 3), rng.uniform(0.2, 3.0), rng.uniform(0.5, 4.0), step)
        inv = max(inv, rep.inverse_residual)
        fd = max(fd, rep.fd_residual)
    return [
        CheckResult("jacobian_inverse", inv <= tol_inverse, inv, tol_inverse, f"{n_draws} draws"),
        CheckResult("jacobian_finite_difference", fd <= tol_fd, fd, tol_fd, f"{n_draws} draws"),
    ]


def _random_perturbation(rng, p: MixtureParams, grid: PhaseGrid, bases) -> DistributionPair:
    """Random macroscopic part plus random velocity noise, in perturbation form."""
    n_cells, n = grid.shape
    out = []
    for b in (bases.b1, bases.b2):
        macro = rng.normal(0, 1, (n_cells, 5)) @ b.e
        noise = rng.normal(0, 1, (n_cells, n)) * rng.uniform(0.0, 2.0)
        out.append(macro + noise)
    return DistributionPair(*out, kind="perturbation")


def check_dissipation(draws: int, grid_v: VelocityGrid, seed: int = 0, masses=None, tol: float = 1e-10,
                      n_cells: int = 1) -> list[CheckResult]:
    """Dissipation inequality and its two partial estimates over random ``(f, p)``.

    Every quantity is relative to ``||f||^2``. ``masses`` fixes ``(m1, m2)``
    (the grid is sized for ``m2``); otherwise they are drawn per sample with
    ``m2 = 1``.
    """
    rng = np.random.default_rng(seed)
    grid = PhaseGrid(SpatialGrid(n_cells, 1.0, 0 if n_cells == 1 else 1), grid_v)
    worst = {"dissipation": np.inf, "dissipation_partial_intra": 0.0, "dissipation_partial_exchange": np.inf}
    for _ in range(draws):
        m1, m2 = masses if masses is not None else (None, 1.0)
        p = draw_params(rng, m1=m1, m2=m2)
        bases = build_bases(p, grid_v, orthonormalize=True)
        f = _random_perturbation(rng, p, grid, bases)
        rep = dissipation_check(f, p, grid, bases)
        worst["dissipation"] = min(worst["dissipation"], rep.margin / rep.norm2)
        worst["dissipation_partial_intra"] = max(worst["dissipation_partial_intra"], rep.partial_residual / rep.norm2)
        worst["dissipation_partial_exchange"] = min(worst["dissipation_partial_exchange"], rep.exchange_margin / rep.norm2)
    d = f"{draws} draws, min margin / ||f||^2"
    return [
        CheckResult("dissipation", worst["dissipation"] >= -tol, worst["dissipation"], tol, d),
        CheckResult("dissipation_partial_intra", worst["dissipation_partial_intra"] <= tol,
                    worst["dissipation_partial_intra"], tol, f"{draws} draws, identity residual / ||f||^2"),
        CheckResult("dissipation_partial_exchange", worst["dissipation_partial_exchange"] >= -tol,
                    worst["dissipation_partial_exchange"], tol, d),
    ]


def kernel_regime_params(p: MixtureParams, delta_one: bool, omega_one: bool) -> MixtureParams:
    """``p`` moved into one of the four regimes; interior values fall back to 0.5 if ``p`` sits on a boundary."""
    delta = 1.0 if delta_one else (p.delta if p.delta < 1 else max(0.5, p.delta_lower_bound))
    omega = 1.0 if omega_one else (p.omega if p.omega < 1 else 0.5)
    return p.replace(delta=delta, omega=omega, gamma=0.0)


def check_kernel(p: MixtureParams, grid: VelocityGrid, tol: float = 1e-6, regimes=None) -> list[CheckResult]:
    """Null-space dimension of ``L`` by singular-value counting in each regime."""
    regimes = regimes or list(KERNEL_REGIMES)
    out = []
    for key in regimes:
        q = kernel_regime_params(p, *key)
        rep = kernel_dimension(q, grid, tol)
        expected = KERNEL_REGIMES[key]
        gap = rep.singular_values[rep.dimension - 1] if rep.dimension else rep.singular_values[0]
        name = f"kernel delta={q.delta:g} omega={q.omega:g}"
        out.append(CheckResult(name, rep.dimension == expected, float(rep.dimension), float(expected),
                               f"dimension {rep.dimension} (expected {expected}), smallest kept sv {gap:.2e}"))
    return out


def _kernel_key(p: MixtureParams):
    return (p.delta >= 1.0, p.omega >= 1.0)


def check_cancellation(p: MixtureParams, grid: VelocityGrid, n_cells: int = 6, seed: int = 0,
                       flip_gamma_t21: bool = False, tol: float = 1e-10) -> list[CheckResult]:
    """Inter-species exchange of mass, momentum and energy vanishes for moment-matched targets.

    Cells hold Maxwellians with random densities, drifts and temperatures;
    the residual is relative to ``n10 + n20``.
    """
    rng = np.random.default_rng(seed)
    phase = PhaseGrid(SpatialGrid(n_cells, 1.0, 1), grid)
    F = []
    for m, n0 in ((p.m1, p.n10), (p.m2, p.n20)):
        n = n0 * rng.uniform(0.5, 1.5, n_cells)
        U = rng.normal(0, 0.3, (n_cells, 3)) / np.sqrt(m)
        T = rng.uniform(0.7, 1.3, n_cells)
        F.append(maxwellian(n, U, T, m, grid))
    res = exchange_diagnostics(DistributionPair(*F), p, phase, mode="matched", flip_gamma_t21=flip_gamma_t21)
    scale = p.n10 + p.n20
    out = []
    for name, arr in (("mass", np.concatenate([res.mass12, res.mass21])), ("momentum", res.momentum),
                      ("energy", res.energy)):
        err = float(np.max(np.abs(arr))) / scale
        out.append(CheckResult(f"cancellation_{name}", err <= tol, err, tol, f"{n_cells} cells, moment-matched"))
    return out


def check_linear_part(p: MixtureParams, grid: VelocityGrid, seed: int = 0, min_order: float = 1.9,
                      tol_theta: float = 1e-6) -> list[CheckResult]:
    rep = verify_linear_part(p, grid, seed=seed)
    return [
        CheckResult("linear_part_order", rep.order >= min_order, rep.order, min_order,
                    f"orders M12 {rep.order12:.4f}, M21 {rep.order21:.4f}"),
        CheckResult("linear_part_theta_derivative", rep.theta_derivative_error <= tol_theta,
                    rep.theta_derivative_error, tol_theta),
    ]


def gamma_scaling(p: MixtureParams, grid: VelocityGrid, amplitudes=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3), seed: int = 0):
    """``||Gamma(eps g)|| / eps^2`` for a fixed smooth ``g`` with ``max |g / sqrt(mu)| = 1``, and ``||Gamma(0)||``."""
    phase = homogeneous_grid(grid)
    bases = build_bases(p, grid)
    G = initial_state("random-smooth", p, phase, epsilon=1.0, seed=seed)
    g = DistributionPair((G.first / bases.b1.sqrt_mu - bases.b1.sqrt_mu),
                         (G.second / bases.b2.sqrt_mu - bases.b2.sqrt_mu), kind="perturbation")
    ratios = []
    for eps in amplitudes:
        gam = nonlinear_remainder(g.scaled(eps), p, phase, mode="sampled", bases=bases)
        ratios.append(np.sqrt(norm_xv2(gam, phase)) / eps**2)
    zero = nonlinear_remainder(g.scaled(0.0), p, phase, mode="sampled", bases=bases)
    return np.asarray(ratios), float(np.sqrt(norm_xv2(zero, phase)))


def check_gamma_scaling(p: MixtureParams, grid: VelocityGrid, seed: int = 0, max_spread: float = 1.2,
                        tol_zero: float = 1e-8) -> list[CheckResult]:
    ratios, zero = gamma_scaling(p, grid, seed=seed)
    spread = float(ratios.max() / ratios.min())
    zero_rel = zero / (p.n10 + p.n20)
    return [
        CheckResult("gamma_quadratic_scaling", spread <= max_spread, spread, max_spread,
                    "max/min of ||Gamma(eps g)|| / eps^2: " + ", ".join(f"{r:.4f}" for r in ratios)),
        CheckResult("gamma_at_zero", zero_rel <= tol_zero, zero_rel, tol_zero),
    ]


# ---------------------------------------------------------------- suite


def run_suite(cfg, flip_gamma_t21: bool = False, kernel_only: bool = False, progress=None) -> list[CheckResult]:
    """All checks for a :class:`~mixbgk.config.RunConfig`.

    ``kernel_only`` reports just the kernel dimension of the configured
    ``(delta, omega)`` regime (degenerate values allowed).
    """
    p = cfg.mixture
    vc = cfg.verify
    small = verification_grid(p, vc.dissipation_n_per_axis, vc.v_max)
    if kernel_only:
        return check_kernel(p, small, regimes=[_kernel_key(p)])
    big = verification_grid(p, vc.n_per_axis, vc.v_max)
    steps = [
        ("exchange antisymmetry", lambda: check_exchange_antisymmetry(seed=vc.seed, flip_gamma_t21=flip_gamma_t21)),
        ("gram", lambda: check_gram(p, big)),
        ("derivatives", lambda: check_derivatives(p, big, vc.step)),
        ("jacobian", lambda: check_jacobian(seed=vc.seed, step=vc.step)),
        ("dissipation", lambda: check_dissipation(vc.draws, small, vc.seed, masses=(p.m1, p.m2))),
        ("kernel", lambda: check_kernel(p, small)),
        ("cancellation", lambda: check_cancellation(p, small, seed=vc.seed, flip_gamma_t21=flip_gamma_t21)),
        ("linear part", lambda: check_linear_part(p, big, vc.seed)),
        ("gamma scaling", lambda: check_gamma_scaling(p, big, vc.seed)),
    ]
    results = []
    for label, fn in steps:
        if progress:
            progress(label)
        results += fn()
    return results


def format_report(results: list[CheckResult]) -> str:
    n_fail = sum(not r.passed for r in results)
    head = f"{len(results) - n_fail}/{len(results)} checks passed"
    return "\n".join([head, "", *(r.line() for r in results), ""])
