"""Command line entry point: ``mixbgk verify | simulate | sweep``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import ConfigError, RunConfig, emit_config, load_config, parse_config
from .grid import PhaseGrid
from .mixture import validate_params
from .scenarios import initial_state
from .solver import SERIES_COLUMNS, SolverAbort, estimate_decay, monotone_nonincreasing, run, sweep_rates
from .verify import format_report, run_suite

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
FAULTS = ("flip-gamma-t21",)
RATE_COLUMNS = ("delta", "omega", "rate", "r2", "theory_floor", "admissible")

log = logging.getLogger("mixbgk")


def _num(x) -> str:
    """Locale-independent shortest round-trip representation."""
    return repr(float(x))


def provenance(cfg: RunConfig, command: str) -> str:
    lines = [
        "# provenance",
        f"# command: {command}",
        f"# version: {__version__}",
        f"# kernel backend: {_kernels.BACKEND}",
        f"# seed: {cfg.scenario.seed} (scenario), {cfg.verify.seed} (verify)",
        "# resolved configuration follows",
        "",
        emit_config(cfg),
    ]
    return "\n".join(lines)


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def _csv_writer(handle):
    return csv.writer(handle, lineterminator="\n")


def _phase(cfg: RunConfig) -> PhaseGrid:
    return PhaseGrid(cfg.space, cfg.velocity)


# ---------------------------------------------------------------- verify


def cmd_verify(cfg: RunConfig, out: Path, fault: str | None = None, kernel_only: bool = False) -> int:
    results = run_suite(cfg, flip_gamma_t21=fault == "flip-gamma-t21", kernel_only=kernel_only,
                        progress=lambda label: log.info("verify: %s", label))
    head = f"verification report (fault: {fault or 'none'}{', kernel only' if kernel_only else ''})\n"
    _write(out / "verify_report.txt", head + format_report(results) + "\n" + provenance(cfg, "verify"))
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


# ---------------------------------------------------------------- simulate


def _abort_dump(out: Path, exc: SolverAbort):
    np.savez(out / "abort_state.npz", first=exc.state.first, second=exc.state.second,
             time=exc.time, step=exc.step_index)


def cmd_simulate(cfg: RunConfig, out: Path, fault: str | None = None) -> int:
    p = cfg.mixture
    grid = _phase(cfg)
    F0 = initial_state(cfg.scenario.name, p, grid, cfg.scenario.epsilon, cfg.scenario.seed)
    lines = [f"scenario {cfg.scenario.name}, epsilon {_num(cfg.scenario.epsilon)}, fault {fault or 'none'}"]
    with open(out / "series.csv", "w", encoding="utf-8", newline="") as handle:
        writer = _csv_writer(handle)
        writer.writerow(SERIES_COLUMNS)

        def on_record(t, F, row):
            writer.writerow([_num(x) for x in row])
            handle.flush()

        try:
            ts = run(F0, p, grid, cfg.solver, flip_gamma_t21=fault == "flip-gamma-t21", on_record=on_record)
        except SolverAbort as exc:
            _abort_dump(out, exc)
            lines += [f"ABORTED: {exc}", "last accepted state written to abort_state.npz", ""]
            _write(out / "summary.txt", "\n".join(lines) + "\n" + provenance(cfg, "simulate"))
            log.error("solver abort: %s", exc)
            return EXIT_ABORT

    _, _, n1, n2, U, T = ts.reference
    lines.append(f"steps {cfg.solver.n_steps}, records {len(ts)}, final time {_num(ts.times[-1])}")
    lines.append("")
    lines.append("relative drift of conserved totals (maximum over the run)")
    lines += [f"  {k:<9s} {v:.3e}" for k, v in ts.drift(p).items()]
    lines.append("")
    lines.append("predicted equilibrium from conserved totals")
    lines.append(f"  n1 {_num(n1)}  n2 {_num(n2)}  T {_num(T)}")
    lines.append(f"  U ({', '.join(_num(u) for u in U)})")
    lines.append("")
    lines.append("terminal cell-averaged moments")
    lines += [f"  {name:<4s} {_num(v)}" for name, v in zip(SERIES_COLUMNS[8:], ts.moments[-1])]
    lines.append("")
    lines.append(f"perturbation energy: initial {ts.energy[0]:.6e}, final {ts.energy[-1]:.6e}")
    lines.append(f"minimum F / max F over the run: {ts.min_ratio:.3e}")
    try:
        rep = estimate_decay(ts, p)
        lines.append(f"decay fit on [{rep.fit_window[0]:g}, {rep.fit_window[1]:g}]: rate {rep.rate:.6g}, r2 {rep.r_squared:.6f}")
    except ValueError as exc:
        lines.append(f"decay fit skipped: {exc}")
    lines.append("")
    _write(out / "summary.txt", "\n".join(lines) + "\n" + provenance(cfg, "simulate"))
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def _monotonicity(rows) -> list[str]:
    """Verdicts along every fixed-omega line (in delta) and fixed-delta line (in omega)."""
    ok = [r for r in rows if r.admissible]
    out = []
    for fixed, key, other in (("omega", lambda r: r.omega, lambda r: r.delta), ("delta", lambda r: r.delta, lambda r: r.omega)):
        free = "delta" if fixed == "omega" else "omega"
        for value in sorted({key(r) for r in ok}):
            line = sorted((r for r in ok if key(r) == value), key=other)
            if len(line) < 2:
                continue
            rates = [r.report.rate for r in line]
            verdict = "non-increasing" if monotone_nonincreasing(rates) else "NOT non-increasing"
            pairs = ", ".join(f"{other(r):g}: {r.report.rate:.6g}" for r in line)
            out.append(f"{fixed} = {value:g}: rate in {free} {verdict} within 2% ({pairs})")
    return out or ["fewer than two admissible points along every line; no monotonicity verdict"]


def cmd_sweep(cfg: RunConfig, out: Path, delta_list, omega_list) -> int:
    p = cfg.mixture
    pairs = [p.replace(delta=d, omega=o) for d in delta_list for o in omega_list]
    if not any(validate_params(q) for q in pairs):
        log.error("every (delta, omega) pair is inadmissible")
        return EXIT_CONFIG
    grid = _phase(cfg)
    try:
        rows = sweep_rates(p, grid, cfg.solver, delta_list, omega_list, cfg.scenario.epsilon,
                           cfg.scenario.name, cfg.scenario.seed)
    except SolverAbort as exc:
        _abort_dump(out, exc)
        log.error("solver abort: %s", exc)
        return EXIT_ABORT
    except ValueError as exc:
        log.error("rate fit failed: %s", exc)
        return EXIT_CHECK
    with open(out / "rates.csv", "w", encoding="utf-8", newline="") as handle:
        writer = _csv_writer(handle)
        writer.writerow(RATE_COLUMNS)
        for r in rows:
            if r.admissible:
                rep = r.report
                writer.writerow([_num(r.delta), _num(r.omega), _num(rep.rate), _num(rep.r_squared), _num(rep.theory_floor), "true"])
            else:
                writer.writerow([_num(r.delta), _num(r.omega), "", "", "", "false"])
    lines = [f"scenario {cfg.scenario.name}, epsilon {_num(cfg.scenario.epsilon)}, {len(rows)} pairs"]
    lines += [f"  delta={r.delta:g} omega={r.omega:g} inadmissible: {r.reason}" for r in rows if not r.admissible]
    lines.append("")
    lines.append("monotonicity")
    lines += ["  " + s for s in _monotonicity(rows)]
    lines.append("")
    lines.append("note: rates are fitted to the plain squared L2 norm of the perturbation (no derivatives),")
    lines.append("while the theoretical decay bound is stated for a derivative-weighted energy.")
    lines.append("theory_floor is min(1 - delta, 1 - omega), the factor in the dissipation bound.")
    lines.append("")
    _write(out / "summary.txt", "\n".join(lines) + "\n" + provenance(cfg, "sweep"))
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixbgk", description="Two-species BGK mixture solver and verification suite.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("verify", "run the property suite"), ("simulate", "integrate one scenario"),
                       ("sweep", "fit decay rates over (delta, omega) pairs")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", type=Path, help="configuration file (defaults apply when omitted)")
        cmd.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
        cmd.add_argument("-q", "--quiet", action="store_true", help="only report errors on stderr")
        if name != "sweep":
            cmd.add_argument("--fault", choices=FAULTS, help="inject a deliberate fault")
        if name == "verify":
            cmd.add_argument("--kernel-only", action="store_true",
                             help="only count the kernel of the configured regime; delta = 1 or omega = 1 allowed")
        if name == "sweep":
            cmd.add_argument("--delta-list", type=_float_list, help="comma-separated delta values")
            cmd.add_argument("--omega-list", type=_float_list, help="comma-separated omega values")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(name)s: %(message)s")

    allow_degenerate = getattr(args, "kernel_only", False)
    try:
        cfg = load_config(args.config, allow_degenerate) if args.config else parse_config("", allow_degenerate)
    except ConfigError as exc:
        for problem in exc.problems:
            log.error("%s", problem)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_CONFIG
    if args.out is not None:
        cfg = replace(cfg, output=args.out)
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "verify":
        return cmd_verify(cfg, out, args.fault, args.kernel_only)
    if args.command == "simulate":
        return cmd_simulate(cfg, out, args.fault)
    return cmd_sweep(cfg, out, args.delta_list or [cfg.mixture.delta], args.omega_list or [cfg.mixture.omega])


if __name__ == "__main__":
    sys.exit(main())
