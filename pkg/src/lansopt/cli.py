"""Batch command-line front end.

Subcommands:

    solve-forward   integrate the state equation, write trajectory + energy CSV
    optimize        projected-gradient control optimization, write iterations CSV
    verify          run the identity/inequality check battery (JSON lines)
    check-gradient  adjoint-vs-finite-difference sweep, write sweep CSV

Exit codes: 0 success; 2 bad configuration / unknown names; 3 blow-up;
4 iteration cap reached; 5 line-search failure; 6 stagnation; 1 check
failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .adjoint import solve_adjoint
from .config import RunSetup, build_setup, preset_sections, read_config, sections_to_text
from .control import ControlField
from .cost import evaluate_cost
from .errors import BlowUpError, ConfigurationError
from .forward import filtered_energy, solve_forward
from .optimize import OptimizerOptions, projected_gradient
from .snapshots import control_hash, write_manifest, write_snapshot, write_trajectory
from .spectral import da_norm, l2_norm, to_physical, v_norm
from .verify import CHECK_NAMES, fd_gradient_check, run_battery

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_MAX_ITER = 4
EXIT_LINE_SEARCH = 5
EXIT_STAGNATION = 6

TERMINATION_EXIT = {
    "residual_tol": EXIT_OK,
    "max_iter": EXIT_MAX_ITER,
    "line_search_fail": EXIT_LINE_SEARCH,
    "stagnation": EXIT_STAGNATION,
}


def _load_setup(args) -> RunSetup:
    if args.config and args.preset:
        raise ConfigurationError("give either --config or --preset, not both")
    if args.config:
        sections = read_config(args.config)
    elif args.preset:
        sections = preset_sections(args.preset, seed=args.seed or 0)
    else:
        raise ConfigurationError("one of --config or --preset is required")
    if args.seed is not None:
        sections.setdefault("run", {})["seed"] = str(args.seed)
    return build_setup(sections)


def _prepare_out(args, command: str) -> str:
    out = args.out or f"lansopt-{command}"
    os.makedirs(out, exist_ok=True)
    return out


def _write_run_manifest(out: str, command: str, setup: Optional[RunSetup], extra: dict) -> None:
    sections = {"manifest": {
        "command": command,
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        **extra,
    }}
    if setup is not None:
        sections.update(setup.sections)
        with open(os.path.join(out, "config_echo.ini"), "w", encoding="utf-8") as fh:
            fh.write(sections_to_text(setup.sections))
    write_manifest(os.path.join(out, "manifest.txt"), sections)


def cmd_solve_forward(args) -> int:
    setup = _load_setup(args)
    out = _prepare_out(args, "solve-forward")
    cfg = setup.cfg
    try:
        traj = solve_forward(cfg.u0, setup.initial_control, cfg)
    except BlowUpError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        _write_run_manifest(out, "solve-forward", setup, {"status": f"blow-up step {err.step}"})
        return EXIT_BLOWUP

    with open(os.path.join(out, "energy.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "l2_sq", "alpha_grad_sq", "grad_sq", "stokes_sq"])
        for n, snap in enumerate(traj.snapshots):
            l2sq = l2_norm(snap) ** 2
            gradsq = v_norm(snap) ** 2
            writer.writerow(
                [n * cfg.grid.dt, repr(l2sq), repr(cfg.alpha * gradsq), repr(gradsq), repr(da_norm(snap) ** 2)]
            )
    write_trajectory(os.path.join(out, "trajectory"), traj, setup.initial_control.stacked)
    _write_run_manifest(out, "solve-forward", setup, {
        "status": "completed",
        "final_filtered_energy": repr(filtered_energy(traj.final(), cfg.alpha)),
    })
    print(f"trajectory and energy CSV written to {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    setup = _load_setup(args)
    out = _prepare_out(args, "optimize")
    cfg = setup.cfg

    rows = []

    def record(it, cost, residual, step, wall_ms):
        rows.append([it, repr(cost.tracking), repr(cost.terminal), repr(cost.control),
                     repr(cost.total), repr(residual), repr(step), repr(wall_ms)])

    try:
        result = projected_gradient(cfg, setup.opts, setup.initial_control, callback=record)
    except BlowUpError as err:
        print(f"blow-up during optimization: {err}", file=sys.stderr)
        _write_run_manifest(out, "optimize", setup, {"status": f"blow-up step {err.step}"})
        return EXIT_BLOWUP

    with open(os.path.join(out, "iterations.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "tracking", "terminal", "control", "total", "residual", "step_size", "wall_ms"])
        writer.writerows(rows)

    ctrl_dir = os.path.join(out, "final_control")
    os.makedirs(ctrl_dir, exist_ok=True)
    for n in range(cfg.grid.n_steps):
        write_snapshot(os.path.join(ctrl_dir, f"slice_{n:05d}.dat"), result.final_control.slice(n))

    _write_run_manifest(out, "optimize", setup, {
        "status": result.termination,
        "iterations": result.iterations,
        "final_total_cost": repr(result.cost_history[-1].total),
        "final_residual": repr(result.residual_history[-1]),
        "control_sha256": control_hash(result.final_control.stacked),
    })
    print(
        f"optimize: {result.termination} after {result.iterations} iterations, "
        f"total cost {result.cost_history[-1].total:.6e}, residual {result.residual_history[-1]:.3e}"
    )
    return TERMINATION_EXIT[result.termination]


def cmd_verify(args) -> int:
    out = _prepare_out(args, "verify")
    names = None
    if args.checks:
        names = [name.strip() for name in args.checks.split(",") if name.strip()]
    try:
        reports = run_battery(names, seed=args.seed or 0)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    all_passed = True
    with open(os.path.join(out, "checks.jsonl"), "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.to_json() + "\n")
            print(report.to_json())
            all_passed = all_passed and report.passed
    _write_run_manifest(out, "verify", None, {
        "status": "pass" if all_passed else "fail",
        "seed": args.seed or 0,
        "checks": ",".join(names or CHECK_NAMES),
    })
    return EXIT_OK if all_passed else EXIT_CHECK_FAILED


def cmd_check_gradient(args) -> int:
    setup = _load_setup(args)
    out = _prepare_out(args, "check-gradient")
    report = fd_gradient_check(
        setup.cfg, seed=setup.seed, flip_adjoint_sign=args.debug_flip_adjoint
    )
    with open(os.path.join(out, "fd_sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe", "relative_error"])
        for key, value in report.context["sweep"].items():
            writer.writerow([key, repr(value)])
    _write_run_manifest(out, "check-gradient", setup, {
        "status": "pass" if report.passed else "fail",
        "measured": repr(report.measured),
        "tolerance": repr(report.tolerance),
    })
    print(report.line())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lansopt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"lansopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", help="path to a config file")
            p.add_argument("--preset", help="code-defined scenario name")
        p.add_argument("--out", help="run output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None, help="worker threads for numeric kernels")

    p = sub.add_parser("solve-forward", help="integrate the state equation")
    common(p)
    p.set_defaults(func=cmd_solve_forward)

    p = sub.add_parser("optimize", help="projected-gradient control optimization")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="run the identity check battery")
    common(p, needs_config=False)
    p.add_argument("--checks", help=f"comma-separated subset of: {', '.join(CHECK_NAMES)}")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check-gradient", help="adjoint gradient vs finite differences")
    common(p)
    p.add_argument("--debug-flip-adjoint", action="store_true",
                   help="negative control: corrupt the multiplier sign on purpose")
    p.set_defaults(func=cmd_check_gradient)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
        os.environ["OPENBLAS_NUM_THREADS"] = str(args.threads)
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
