"""Time integration on the periodic line: spline transport split with RK4 relaxation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .collision import ConservedTotals, bgk_rhs, conserved_totals
from .grid import DistributionPair, PhaseGrid
from .mixture import (
    DegenerateCell,
    InfeasibleTarget,
    MixtureParams,
    discrete_maxwellian,
    maxwellian,
    mix_moments,
    moments_from_raw,
    validate_params,
)
from .scenarios import initial_state

SPLITTINGS = ("strang", "lie")
NEGATIVITY_TOL = 1e-12


class SolverAbort(RuntimeError):
    """Integration stopped on a degenerate cell or a negative value.

    ``state`` is the last accepted distribution and ``time`` its time.
    """

    def __init__(self, reason: str, state: DistributionPair, time: float, step_index: int):
        super().__init__(f"{reason} (t={time:.6g}, step {step_index})")
        self.reason = reason
        self.state = state
        self.time = time
        self.step_index = step_index


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.05
    t_max: float = 10.0
    splitting: str = "strang"
    equilibrium_mode: str = "matched"
    record_every: int = 1
    rate_multiplier: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max >= self.dt:
            raise ValueError(f"t_max must be at least dt, got t_max={self.t_max}, dt={self.dt}")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}, got {self.splitting!r}")
        if self.equilibrium_mode not in ("matched", "sampled"):
            raise ValueError(f"equilibrium_mode must be 'matched' or 'sampled', got {self.equilibrium_mode!r}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if not self.rate_multiplier > 0:
            raise ValueError(f"rate_multiplier must be positive, got {self.rate_multiplier}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


# ---------------------------------------------------------------- transport


def _bspline3(x):
    ax = np.abs(x)
    return np.where(ax < 1, 2.0 / 3.0 - ax**2 + ax**3 / 2, np.where(ax < 2, (2 - ax) ** 3 / 6, 0.0))


def shift_symbol(shift, n_cells: int) -> np.ndarray:
    """Fourier multipliers of a periodic cubic-spline shift by ``shift`` cells.

    Returns shape ``(n_cells // 2 + 1, len(shift))``; the zero mode is 1 so
    the cell sum is preserved.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    theta = 2 * np.pi * np.arange(n_cells // 2 + 1) / n_cells
    base = np.floor(shift)
    num = np.zeros((theta.size, shift.size), dtype=complex)
    for off in (-1, 0, 1, 2):
        m = base + off
        num += _bspline3(m - shift) * np.exp(-1j * np.outer(theta, m))
    interp = (4 + 2 * np.cos(theta)) / 6
    return num / interp[:, None]


def advect(F: DistributionPair, dt: float, grid: PhaseGrid) -> DistributionPair:
    """Exact-in-time transport ``F(x - v1 dt, v)`` with periodic cubic-spline interpolation.

    A no-op on homogeneous grids.
    """
    if grid.space.dim == 0:
        return F
    vg = grid.velocity
    n = grid.space.n_cells
    # v1 takes n_per_axis distinct values; nodes are ordered with v1 slowest
    shifts = vg.axis * dt / grid.space.dx
    symbol = np.repeat(shift_symbol(shifts, n), vg.n_per_axis**2, axis=1)
    out = [np.fft.irfft(np.fft.rfft(a, axis=0) * symbol, n=n, axis=0) for a in F]
    return DistributionPair(out[0], out[1], F.kind)


# ---------------------------------------------------------------- relaxation and steps


def relax(F: DistributionPair, dt: float, p: MixtureParams, grid: PhaseGrid, cfg: SolverConfig,
          flip_gamma_t21: bool = False) -> DistributionPair:
    """Classical RK4 on ``dF/dt = bgk_rhs(F)``, moments recomputed at every stage."""

    def rhs(state):
        return bgk_rhs(state, p, grid, cfg.equilibrium_mode, cfg.rate_multiplier, flip_gamma_t21)

    k1 = rhs(F)
    k2 = rhs(F.axpy(dt / 2, k1))
    k3 = rhs(F.axpy(dt / 2, k2))
    k4 = rhs(F.axpy(dt, k3))
    return DistributionPair(
        F.first + dt / 6 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first),
        F.second + dt / 6 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second),
        F.kind,
    )


def step(F: DistributionPair, p: MixtureParams, grid: PhaseGrid, cfg: SolverConfig, time: float = 0.0,
         step_index: int = 0, flip_gamma_t21: bool = False) -> DistributionPair:
    """One split step; raises :class:`SolverAbort` on a degenerate cell or negativity."""
    try:
        if cfg.splitting == "strang":
            G = advect(F, cfg.dt / 2, grid)
            G = relax(G, cfg.dt, p, grid, cfg, flip_gamma_t21)
            G = advect(G, cfg.dt / 2, grid)
        else:
            G = relax(F, cfg.dt, p, grid, cfg, flip_gamma_t21)
            G = advect(G, cfg.dt, grid)
    except (DegenerateCell, InfeasibleTarget) as exc:
        raise SolverAbort(f"{type(exc).__name__}: {exc}", F, time, step_index) from exc
    lo, hi = G.min(), G.max()
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise SolverAbort("non-finite values in the distribution", F, time, step_index)
    if lo < -NEGATIVITY_TOL * hi:
        raise SolverAbort(f"negative value {lo:.3e} below -{NEGATIVITY_TOL:g} * max ({hi:.3e})", F, time, step_index)
    return G


# ---------------------------------------------------------------- run


def final_equilibrium(totals: ConservedTotals, p: MixtureParams, grid: PhaseGrid, mode: str = "matched"):
    """Common-velocity, common-temperature state fixed by the conserved totals.

    Returns ``(M1, M2, n1, n2, U, T)`` with ``M_k`` spatially constant.
    """
    length = grid.space.length
    rho = p.m1 * totals.mass1 + p.m2 * totals.mass2
    U = totals.momentum / rho
    T = (totals.energy - rho * U @ U) / (3 * (totals.mass1 + totals.mass2))
    n1 = totals.mass1 / length
    n2 = totals.mass2 / length
    vg = grid.velocity
    if mode == "matched":
        M1 = discrete_maxwellian(n1, n1 * U, n1 * (3 * T + p.m1 * U @ U), p.m1, vg)
        M2 = discrete_maxwellian(n2, n2 * U, n2 * (3 * T + p.m2 * U @ U), p.m2, vg)
    else:
        M1 = maxwellian(n1, U, T, p.m1, vg)
        M2 = maxwellian(n2, U, T, p.m2, vg)
    return M1, M2, n1, n2, U, T


def perturbation_energy(F: DistributionPair, M1, M2, grid: PhaseGrid) -> float:
    """``sum_k ||(F_k - M_k) / sqrt(M_k)||^2`` in the discrete ``L^2_{x,v}`` norm."""
    w = grid.velocity.weights
    e1 = ((F.first - M1) ** 2 / M1) @ w
    e2 = ((F.second - M2) ** 2 / M2) @ w
    return float(np.sum(e1 + e2) * grid.space.dx)


MOMENT_COLUMNS = ("n1", "n2", "U1x", "U1y", "U1z", "U2x", "U2y", "U2z", "T1", "T2", "T12", "T21")
SERIES_COLUMNS = ("t", "energy", "mass1", "mass2", "px", "py", "pz", "E_total", *MOMENT_COLUMNS)


def averaged_moments(F: DistributionPair, p: MixtureParams, grid: PhaseGrid) -> np.ndarray:
    """Cell averages of ``(n1, n2, U1, U2, T1, T2, T12, T21)`` as a 12-vector."""
    vg = grid.velocity
    s1 = moments_from_raw(_kernels.velocity_moments(F.first, vg.nodes, vg.weights), p.m1)
    s2 = moments_from_raw(_kernels.velocity_moments(F.second, vg.nodes, vg.weights), p.m2)
    ms = mix_moments(s1, s2, p)
    cols = [ms.s1.n, ms.s2.n, *ms.s1.U.T, *ms.s2.U.T, ms.s1.T, ms.s2.T, ms.T12, ms.T21]
    return np.array([np.mean(c) for c in cols])


@dataclass
class TimeSeries:
    times: np.ndarray
    energy: np.ndarray
    totals: list = field(repr=False)
    moments: np.ndarray = field(repr=False)
    min_ratio: float = 0.0
    final_state: DistributionPair | None = field(default=None, repr=False)
    reference: tuple | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def totals_array(self) -> np.ndarray:
        return np.array([t.as_array() for t in self.totals])

    def drift(self, p: MixtureParams) -> dict:
        """Largest relative drift of every conserved total over the run."""
        first = self.totals[0]
        out = {}
        for t in self.totals[1:]:
            for k, v in first.relative_drift(t, p).items():
                out[k] = max(out.get(k, 0.0), v)
        return out or {k: 0.0 for k in ("mass1", "mass2", "momentum", "energy")}


def run(F0: DistributionPair, p: MixtureParams, grid: PhaseGrid, cfg: SolverConfig,
        flip_gamma_t21: bool = False, on_record=None) -> TimeSeries:
    """Integrate to ``t_max``, recording every ``record_every`` steps.

    The energy is the squared perturbation norm against the equilibrium
    fixed by the initial conserved totals. ``on_record(t, F, row)`` is called
    at every record with ``row = (t, energy, totals, moments)`` flattened in
    the order of :data:`SERIES_COLUMNS`. On abort the partially filled series is attached to the
    raised :class:`SolverAbort` as ``series``.
    """
    totals0 = conserved_totals(F0, p, grid)
    ref = final_equilibrium(totals0, p, grid, cfg.equilibrium_mode)
    M1, M2 = ref[0], ref[1]
    times, energy, totals, moments = [], [], [], []
    min_ratio = F0.min() / F0.max()

    def record(t, F):
        times.append(t)
        energy.append(perturbation_energy(F, M1, M2, grid))
        totals.append(conserved_totals(F, p, grid))
        moments.append(averaged_moments(F, p, grid))
        if on_record is not None:
            on_record(t, F, np.concatenate([[t, energy[-1]], totals[-1].as_array(), moments[-1]]))

    def series(F):
        return TimeSeries(np.array(times), np.array(energy), totals, np.array(moments), min_ratio, F, ref)

    F = F0
    record(0.0, F)
    for i in range(1, cfg.n_steps + 1):
        try:
            F = step(F, p, grid, cfg, (i - 1) * cfg.dt, i, flip_gamma_t21)
        except SolverAbort as exc:
            exc.series = series(exc.state)
            raise
        min_ratio = min(min_ratio, F.min() / F.max())
        if i % cfg.record_every == 0 or i == cfg.n_steps:
            record(i * cfg.dt, F)
    return series(F)


# ---------------------------------------------------------------- decay rates


@dataclass
class DecayReport:
    rate: float
    intercept: float
    fit_window: tuple[float, float]
    r_squared: float
    theory_floor: float
    n_samples: int = 0


def fit_log_decay(times, energy, window=None, theory_floor: float = float("nan"), min_samples: int = 10) -> DecayReport:
    """Least-squares line through ``log energy``; the rate is ``-slope / 2``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(energy, dtype=float)
    if window is None:
        window = (0.2 * t[-1], 0.8 * t[-1])
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < min_samples:
        raise ValueError(f"fit window [{lo:g}, {hi:g}] holds {int(sel.sum())} samples; need >= {min_samples}")
    if np.any(~(y[sel] > 0)):
        raise ValueError("energy must be strictly positive on the fit window")
    x, ly = t[sel], np.log(y[sel])
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - np.sum(resid**2) / ss_tot)
    return DecayReport(-slope / 2, float(intercept), (float(lo), float(hi)), float(r2), theory_floor, int(sel.sum()))


def estimate_decay(ts: TimeSeries, p: MixtureParams | None = None, window=None) -> DecayReport:
    floor = min(1 - p.delta, 1 - p.omega) if p is not None else float("nan")
    return fit_log_decay(ts.times, ts.energy, window, floor)


@dataclass
class SweepRow:
    delta: float
    omega: float
    admissible: bool
    report: DecayReport | None = None
    reason: str = ""


def sweep_rates(p_base: MixtureParams, grid: PhaseGrid, cfg: SolverConfig, delta_list, omega_list,
                epsilon: float = 1e-3, scenario: str = "random-smooth", seed: int = 0, window=None) -> list[SweepRow]:
    """Decay-rate table over every ``(delta, omega)`` pair.

    Inadmissible pairs are kept as rows with ``admissible=False`` and the
    violated constraints in ``reason``.
    """
    rows = []
    for d, o in itertools.product(delta_list, omega_list):
        p = p_base.replace(delta=float(d), omega=float(o))
        verdict = validate_params(p)
        if not verdict:
            rows.append(SweepRow(p.delta, p.omega, False, None, "; ".join(verdict.violations)))
            continue
        F0 = initial_state(scenario, p, grid, epsilon, seed)
        ts = run(F0, p, grid, cfg)
        rows.append(SweepRow(p.delta, p.omega, True, estimate_decay(ts, p, window)))
    return rows


def monotone_nonincreasing(values, rel_tol: float = 0.02) -> bool:
    """True when no entry exceeds its predecessor by more than ``rel_tol`` relative."""
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] * (1 + rel_tol) + 1e-300))
