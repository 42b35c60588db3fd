"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test prints one ``PASS`` / ``FAIL`` line. Run on its own with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mixbgk.grid import PhaseGrid, SpatialGrid, VelocityGrid
from mixbgk.mixture import MixtureParams
from mixbgk.scenarios import initial_state
from mixbgk.solver import MOMENT_COLUMNS, SolverConfig, estimate_decay, monotone_nonincreasing, run, sweep_rates
from mixbgk.verify import (
    check_derivatives,
    check_dissipation,
    check_exchange_antisymmetry,
    check_gamma_scaling,
    check_jacobian,
    check_kernel,
    check_linear_part,
    verification_grid,
)

EQUAL = MixtureParams()
UNEQUAL = MixtureParams(m1=2.0, m2=1.0, n10=1.5, n20=1.0, delta=0.6, omega=0.3, gamma=0.01)
PARAM_SETS = (EQUAL, UNEQUAL)
COL = {name: i for i, name in enumerate(MOMENT_COLUMNS)}


@pytest.fixture
def say(capsys):
    def emit(number: int, ok: bool, text: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {text}")

    return emit


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _worst(results, key=lambda r: r.measured):
    return max(results, key=key)


# ---------------------------------------------------------------- 1-5: operator identities


def test_criterion_1_exchange_antisymmetry(say):
    results, elapsed = _timed(lambda: check_exchange_antisymmetry(n_params=100, per_params=100, seed=11, tol=1e-12))
    ok = all(r.passed for r in results) and elapsed < 1.0
    detail = ", ".join(f"{r.name} {r.measured:.2e}" for r in results)
    say(1, ok, f"10^4 draws, {detail} (tol 1e-12), {elapsed:.2f} s (budget 1 s)")
    assert ok


def test_criterion_2_derivatives_and_jacobian(say):
    def work():
        rows = []
        for p in PARAM_SETS:
            rows += check_derivatives(p, verification_grid(p, 24), step=1e-5, tol=1e-6)
        return rows, check_jacobian(n_draws=200, seed=2, step=1e-5, tol_inverse=1e-12, tol_fd=1e-6)

    (rows, jac), elapsed = _timed(work)
    ok = all(r.passed for r in rows + jac) and len(rows) == 20 and elapsed < 10.0
    say(2, ok, f"worst derivative {_worst(rows).measured:.2e} (tol 1e-6), "
               f"J Jinv - I {jac[0].measured:.2e} (tol 1e-12), finite difference {jac[1].measured:.2e} (tol 1e-6), "
               f"{elapsed:.1f} s (budget 10 s)")
    assert ok


def test_criterion_3_linearization_order(say):
    def work():
        out = []
        for p in PARAM_SETS:
            grid = verification_grid(p, 24)
            out += check_linear_part(p, grid, seed=5, min_order=1.9)
            out += check_gamma_scaling(p, grid, seed=5, max_spread=1.2)
        return out

    results, elapsed = _timed(work)
    order = min(r.measured for r in results if r.name == "linear_part_order")
    spread = max(r.measured for r in results if r.name == "gamma_quadratic_scaling")
    ok = all(r.passed for r in results) and elapsed < 30.0
    say(3, ok, f"Taylor order {order:.4f} (>= 1.9), Gamma ratio spread {spread:.4f} (<= 1.2), "
               f"{elapsed:.1f} s (budget 30 s)")
    assert ok


def test_criterion_4_dissipation(say):
    results, elapsed = _timed(lambda: check_dissipation(1000, VelocityGrid(7.0, 16), seed=4, tol=1e-10))
    ok = all(r.passed for r in results) and elapsed < 60.0
    m = {r.name: r.measured for r in results}
    say(4, ok, f"1000 draws on 16^3: min margin {m['dissipation']:.2e} ||f||^2 (>= -1e-10), "
               f"intra identity {m['dissipation_partial_intra']:.2e}, exchange margin "
               f"{m['dissipation_partial_exchange']:.2e}, {elapsed:.1f} s (budget 60 s)")
    assert ok


def test_criterion_5_kernel_dimensions(say):
    def work():
        return [r for p in PARAM_SETS for r in check_kernel(p, VelocityGrid(7.0, 16), tol=1e-6)]

    results, elapsed = _timed(work)
    dims = [int(r.measured) for r in results]
    ok = all(r.passed for r in results) and elapsed < 30.0
    say(5, ok, f"dimensions {dims[:4]} and {dims[4:]} (expected [6, 9, 7, 10]), {elapsed:.1f} s (budget 30 s)")
    assert ok


# ---------------------------------------------------------------- 6-9: solver runs


def _run(name, p, grid, cfg, epsilon, seed=0):
    F0 = initial_state(name, p, grid, epsilon, seed)
    ts, elapsed = _timed(lambda: run(F0, p, grid, cfg))
    return ts, elapsed


@pytest.fixture(scope="module")
def conservation_runs():
    homogeneous = PhaseGrid(SpatialGrid(), VelocityGrid(6.0, 16))
    transport = PhaseGrid(SpatialGrid(32, 1.0, 1), VelocityGrid(6.0, 16))
    return {
        "homogeneous": _run("random-smooth", UNEQUAL, homogeneous, SolverConfig(dt=0.02, t_max=20.0, record_every=10), 1e-2),
        "transport": _run("random-smooth", UNEQUAL, transport, SolverConfig(dt=0.01, t_max=10.0, record_every=50), 1e-2),
    }


def _expected_limit(F, p, grid):
    """Common velocity and temperature fixed by the discrete conserved totals of ``F``."""
    vg = grid.velocity
    w = vg.weights
    mass, mom, en = [], [], []
    for G, m in ((F.first[0], p.m1), (F.second[0], p.m2)):
        mass.append(G @ w)
        mom.append(m * ((G * w) @ vg.nodes))
        en.append(m * ((G * w) @ vg.speed2))
    rho = p.m1 * mass[0] + p.m2 * mass[1]
    U = sum(mom) / rho
    T = (sum(en) - rho * U @ U) / (3 * sum(mass))
    return U, T


def _nominal_temperature(name, p, eps):
    """Limit temperature from the continuous initial moments (quadrature-free)."""
    n1, n2 = p.n10, p.n20
    if name == "temperature-gap":
        return (n1 * (1 + eps) + n2 * (1 - eps)) / (n1 + n2)
    rho = p.m1 * n1 + p.m2 * n2
    U = (p.m1 * n1 - p.m2 * n2) * eps / rho
    return (3 * (n1 + n2) + (p.m1 * n1 + p.m2 * n2) * eps**2 - rho * U**2) / (3 * (n1 + n2))


@pytest.fixture(scope="module")
def relaxation_runs():
    grid = PhaseGrid(SpatialGrid(), VelocityGrid(6.0, 16))
    cfg = SolverConfig(dt=0.05, t_max=20.0, record_every=20)
    return {(name, i): _run(name, p, grid, cfg, 1e-2)
            for name in ("temperature-gap", "counter-flow") for i, p in enumerate(PARAM_SETS)}


SWEEP_CFG = SolverConfig(dt=0.1, t_max=20.0)
SWEEP_GRID = PhaseGrid(SpatialGrid(), VelocityGrid(6.0, 16))


@pytest.fixture(scope="module")
def sweep_tables():
    levels = [0.1, 0.5, 0.9]
    t0 = time.perf_counter()
    by_delta = sweep_rates(EQUAL, SWEEP_GRID, SWEEP_CFG, levels, [0.5], epsilon=1e-3, seed=8)
    by_omega = sweep_rates(EQUAL, SWEEP_GRID, SWEEP_CFG, [0.5], levels, epsilon=1e-3, seed=8)
    return by_delta, by_omega, time.perf_counter() - t0


GAP = MixtureParams(m1=2.0, m2=1.0, n10=1.0, n20=1.0, delta=0.5, omega=0.5, gamma=0.0)
GAP_CFG = SolverConfig(dt=0.05, t_max=10.0)


@pytest.fixture(scope="module")
def momentum_gap_run():
    grid = PhaseGrid(SpatialGrid(), VelocityGrid(6.0, 16))
    return _run("momentum-gap", GAP, grid, GAP_CFG, 1e-3)


def test_criterion_6_conservation(say, conservation_runs):
    (hom, t_hom), (tr, t_tr) = conservation_runs["homogeneous"], conservation_runs["transport"]
    d_hom, d_tr = hom.drift(UNEQUAL), tr.drift(UNEQUAL)
    steps_ok = hom.times[-1] == pytest.approx(1000 * 0.02) and tr.times[-1] == pytest.approx(1000 * 0.01)
    ok = steps_ok and max(d_hom.values()) <= 1e-10 and max(d_tr.values()) <= 1e-6 and t_tr < 300.0
    say(6, ok, f"1000 steps homogeneous max drift {max(d_hom.values()):.2e} (tol 1e-10); "
               f"Nx=32 16^3 transport max drift {max(d_tr.values()):.2e} (tol 1e-6) in {t_tr:.0f} s (budget 300 s)")
    assert ok


def test_criterion_7_fixed_point(say, relaxation_runs):
    grid = PhaseGrid(SpatialGrid(), VelocityGrid(6.0, 16))
    worst = nominal_gap = slowest = 0.0
    for (name, i), (ts, elapsed) in relaxation_runs.items():
        p = PARAM_SETS[i]
        U, T = _expected_limit(initial_state(name, p, grid, 1e-2), p, grid)
        last = ts.moments[-1]
        temps = last[[COL["T1"], COL["T2"], COL["T12"], COL["T21"]]]
        vels = last[[COL["U1x"], COL["U1y"], COL["U1z"], COL["U2x"], COL["U2y"], COL["U2z"]]]
        worst = max(worst, np.abs(temps - T).max(), np.abs(vels - np.tile(U, 2)).max())
        nominal_gap = max(nominal_gap, abs(T - _nominal_temperature(name, p, 1e-2)))
        slowest = max(slowest, elapsed)
    ok = worst <= 1e-6 and slowest < 120.0
    say(7, ok, f"temperature-gap and counter-flow, two mass ratios: max |moment - prediction| {worst:.2e} "
               f"(tol 1e-6), slowest run {slowest:.1f} s (budget 120 s); "
               f"grid totals differ from the continuous ones by {nominal_gap:.1e} in T")
    assert ok


def _moment_ode_rate(p, eps, cfg):
    """Rate of the closed moment system for two Maxwellians, fitted like the solver output."""
    n1, n2, r = p.n10, p.n20, p.m1 / p.m2
    u2 = -p.m1 * n1 / (p.m2 * n2) * eps

    def rhs(t, y):
        U1, U2, E1, E2 = y
        T1 = p.m1 * (E1 - U1**2) / 3
        T2 = p.m2 * (E2 - U2**2) / 3
        U12 = p.delta * U1 + (1 - p.delta) * U2
        U21 = r * (1 - p.delta) * U1 + (1 - r * (1 - p.delta)) * U2
        du2 = (U1 - U2) ** 2
        T12 = p.omega * T1 + (1 - p.omega) * T2 + p.gamma * du2
        coef = p.m1 * (1 - p.delta) * (r * (p.delta - 1) + 1 + p.delta) / 3 - p.gamma
        T21 = (1 - p.omega) * T1 + p.omega * T2 + coef * du2
        return [
            n2 * (U12 - U1),
            n1 * (U21 - U2),
            n2 * (3 * T12 / p.m1 + U12**2 - E1),
            n1 * (3 * T21 / p.m2 + U21**2 - E2),
        ]

    y0 = [eps, u2, 3 / p.m1 + eps**2, 3 / p.m2 + u2**2]
    t = np.linspace(0, cfg.t_max, cfg.n_steps + 1)
    sol = solve_ivp(rhs, (0, cfg.t_max), y0, t_eval=t, method="DOP853", rtol=1e-12, atol=1e-20)
    U1, U2, E1, E2 = sol.y
    T1, T2 = p.m1 * (E1 - U1**2) / 3, p.m2 * (E2 - U2**2) / 3
    rho = p.m1 * n1 + p.m2 * n2
    Uinf = (p.m1 * n1 * U1[0] + p.m2 * n2 * U2[0]) / rho
    Tinf = (n1 * (3 * T1[0] + p.m1 * U1[0] ** 2) + n2 * (3 * T2[0] + p.m2 * U2[0] ** 2) - rho * Uinf**2) / (3 * (n1 + n2))
    # squared weighted norm of a Maxwellian pair near (Uinf, Tinf), to leading order
    energy = sum(n * (m * (U - Uinf) ** 2 / Tinf + 1.5 * ((T - Tinf) / Tinf) ** 2)
                 for n, m, U, T in ((n1, p.m1, U1, T1), (n2, p.m2, U2, T2)))
    sel = (t >= 0.2 * cfg.t_max) & (t <= 0.8 * cfg.t_max)
    return -np.polyfit(t[sel], np.log(energy[sel]), 1)[0] / 2


def test_criterion_8_decay_rates(say, sweep_tables, momentum_gap_run):
    by_delta, by_omega, elapsed = sweep_tables
    rates_d = [row.report.rate for row in by_delta]
    rates_o = [row.report.rate for row in by_omega]
    r2 = min(row.report.r_squared for row in by_delta + by_omega)
    mono = monotone_nonincreasing(rates_d, 0.02) and monotone_nonincreasing(rates_o, 0.02)

    ts, t_gap = momentum_gap_run
    measured = estimate_decay(ts, GAP).rate
    oracle = _moment_ode_rate(GAP, 1e-3, GAP_CFG)
    rel = abs(measured - oracle) / oracle

    ok = mono and r2 >= 0.999 and rel <= 0.01 and elapsed + t_gap < 600.0
    say(8, ok, f"rates in delta {np.round(rates_d, 5).tolist()}, in omega {np.round(rates_o, 5).tolist()}, "
               f"min r2 {r2:.6f}; momentum gap {measured:.6f} vs moment ODE {oracle:.6f} "
               f"(rel {rel:.1e}, tol 1e-2), {elapsed + t_gap:.0f} s (budget 600 s)")
    assert ok


def test_criterion_9_positivity(say, conservation_runs, relaxation_runs, sweep_tables, momentum_gap_run):
    # sweep runs are not kept, so redo the extreme rows and record their minima
    mins = [ts.min_ratio for ts, _ in (*conservation_runs.values(), *relaxation_runs.values(), momentum_gap_run)]
    for d, o in ((0.1, 0.5), (0.5, 0.1)):
        p = EQUAL.replace(delta=d, omega=o)
        mins.append(run(initial_state("random-smooth", p, SWEEP_GRID, 1e-3, 8), p, SWEEP_GRID, SWEEP_CFG).min_ratio)
    worst = min(mins)
    ok = worst >= -1e-12
    say(9, ok, f"{len(mins)} runs, smallest min(F)/max(F) {worst:.2e} (>= -1e-12)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
