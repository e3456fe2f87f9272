"""Command line entry point: ``kfgm bc|spectrum|evolve|check|nonrel``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boundary import PRESET_NAMES, is_majorana_admissible, preset, real_constraint_rank
from .checks import run_suite
from .config import RunConfig
from .core import ValidationError
from .evolution import NumericalError, evolve_trajectory
from .nonrel import doubling_ladder, nonrel_ladder
from .operators import build_hamiltonian
from .spectrum import CLOSED_FORM_PRESETS, analytic_reference_spectrum, fv_energies, stationary_modes

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def fmt(value) -> str:
    """Locale-free serialization: integers as is, reals with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _bc_row(name: str) -> list:
    p = preset(name)
    return [name, p.mu, p.m0, p.m1, p.m2, p.m3, is_majorana_admissible(p), real_constraint_rank(p)]


def cmd_bc(args) -> int:
    header = ["name", "mu", "m0", "m1", "m2", "m3", "admissible", "rank"]
    if args.action == "list":
        names = PRESET_NAMES
    else:
        if not args.name:
            raise ValidationError("name", "bc show needs a preset name")
        if args.name.lower() not in PRESET_NAMES:
            raise ValidationError("name", f"unknown preset {args.name!r}; choose from {', '.join(PRESET_NAMES)}")
        names = [args.name.lower()]
    rows = [_bc_row(n) for n in names]
    widths = [max(len(h), *(len(_pretty(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(_pretty(v).ljust(w) for v, w in zip(row, widths)))
    return EXIT_OK


def _pretty(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        if abs(value - math.pi) < 1e-15:
            return "pi"
        if abs(value - math.pi / 2) < 1e-15:
            return "pi/2"
        return f"{value:g}"
    return str(value)


def cmd_spectrum(args) -> int:
    cfg = RunConfig.load(args.config)
    if not cfg.potential.static:
        raise ValidationError("potential.form", "spectrum needs a static potential")
    k = cfg.spectrum_k
    ops = cfg.evolution.operators(cfg.grid)
    modes = stationary_modes(cfg.grid, cfg.params, cfg.potential, cfg.bc, k, ops=ops)
    H = build_hamiltonian(cfg.grid, cfg.params, cfg.potential, 0.0, cfg.bc, space=ops.space)
    plus, minus = fv_energies(H, k)
    plus = np.pad(plus, (0, k - len(plus)), constant_values=np.nan)
    minus = np.pad(minus, (0, k - len(minus)), constant_values=np.nan)
    start = 1 if cfg.bc.name == "dirichlet" else 0
    header = ["index", "E_squared", "E_fv_plus", "E_fv_minus"]
    analytic = None
    if cfg.bc.name in CLOSED_FORM_PRESETS and cfg.potential.is_zero:
        analytic = analytic_reference_spectrum(cfg.bc.name, cfg.grid.length, cfg.params, k)
        header += ["analytic_E_squared", "rel_error"]
    rows = []
    for i in range(k):
        row = [start + i, modes.E_squared[i], plus[i], minus[i]]
        if analytic is not None:
            row += [analytic[i], abs(modes.E_squared[i] - analytic[i]) / abs(analytic[i])]
        rows.append(row)
    out = Path(args.out)
    write_csv(out / "spectrum.csv", header, rows)
    if np.any(modes.negative):
        print(f"warning: {int(np.sum(modes.negative))} mode(s) with E^2 < 0", file=sys.stderr)
    print(f"wrote {out / 'spectrum.csv'} ({k} rows)")
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = RunConfig.load(args.config)
    initial = cfg.initial_state()
    traj = evolve_trajectory(initial, cfg.evolution)
    out = Path(args.out)
    rows = [
        [t, o.pseudo_norm.real, o.pseudo_norm.imag, d, ja, jb, l2]
        for t, o, d, ja, jb, l2 in zip(traj.times, traj.observables, traj.majorana_defect, traj.j_a, traj.j_b, traj.l2_psi)
    ]
    write_csv(out / "observables.csv",
              ["t", "pseudo_norm_re", "pseudo_norm_im", "majorana_defect", "j_a", "j_b", "l2_psi"], rows)
    x = cfg.grid.x
    header = ["x", "re_psi", "im_psi", "re_phi", "im_phi", "re_chi", "im_chi"]
    written = 0
    for i, state in enumerate(traj.states):
        if i % cfg.snapshot_every:
            continue
        psi = state.phi + state.chi
        cols = [x, psi.real, psi.imag, state.phi.real, state.phi.imag, state.chi.real, state.chi.imag]
        write_csv(out / "snapshots" / f"psi_{i:04d}.csv", header, zip(*cols))
        written += 1
    print(f"wrote {out / 'observables.csv'} ({len(rows)} rows) and {written} snapshots")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
    except ValidationError as exc:
        print(f"FAIL validation {exc.key}: {str(exc).split(': ', 1)[1]}")
        return EXIT_VALIDATION
    results = run_suite(cfg)
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if passed else EXIT_NUMERICAL


def cmd_nonrel(args) -> int:
    cfg = RunConfig.load(args.config)
    if not is_majorana_admissible(cfg.bc):
        raise ValidationError("boundary", "the nonrelativistic study runs the standard Majorana equation")
    spec = cfg.nonrel
    grid = cfg.grid
    if spec.envelope == "lowest_mode":
        envelope = stationary_modes(grid, cfg.params, cfg.potential if cfg.potential.static else None, cfg.bc, 1).modes[0]
    else:
        envelope = cfg.initial_state().psi
    envelope = np.real(envelope)
    ladder = doubling_ladder(spec.mc2_start, spec.doublings)
    result = nonrel_ladder(grid, envelope, cfg.bc, cfg.potential, ladder, spec.t_final, spec.samples,
                           mass=cfg.params.mass, hbar=cfg.params.hbar)
    out = Path(args.out)
    dev_rows = [[t, d, r.mc2] for r in result.rungs for t, d in zip(r.times, r.deviation)]
    write_csv(out / "deviation.csv", ["t", "deviation", "mc2"], dev_rows)
    summary = [
        [r.mc2, r.epsilon, r.rms, float(np.max(r.deviation)), result.alpha, result.monotone, result.status]
        for r in result.rungs
    ]
    write_csv(out / "scaling_summary.csv",
              ["mc2", "epsilon", "rms_deviation", "max_deviation", "alpha", "monotone", "status"], summary)
    print(f"alpha = {result.alpha:.4f} ({result.status}); wrote {out / 'deviation.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kfgm", description="Klein-Fock-Gordon-Majorana laboratory on an interval")
    sub = parser.add_subparsers(dest="command", required=True)

    bc = sub.add_parser("bc", help="list or show boundary presets")
    bc.add_argument("action", choices=["list", "show"])
    bc.add_argument("name", nargs="?")
    bc.set_defaults(func=cmd_bc)

    for name, func, help_text, needs_out in (
        ("spectrum", cmd_spectrum, "stationary modes and FV energies", True),
        ("evolve", cmd_evolve, "time evolution with observables and snapshots", True),
        ("check", cmd_check, "run the invariant suite", False),
        ("nonrel", cmd_nonrel, "nonrelativistic limit study", True),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
