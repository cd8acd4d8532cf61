"""Command-line front end.

Subcommands: ``check`` (structural conditions), ``limit`` (drift and
diffusion of the parabolic limit), ``sweep`` (tracked eigenvalues of the
symbol along a ray), ``run`` (decay experiment), ``report`` (re-serialize
an existing report).  Exit codes: 0 success, 1 rate-check failure, 2
condition failure, 3 configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chapman import (
    ConditionViolatedError,
    compute_parabolic_limit,
    eigenvalue_sweep,
)
from .harness import (
    ConfigurationError,
    DecayReport,
    ExperimentConfig,
    HarnessError,
    IoFailureError,
    WrapAroundGuardError,
    emit_report,
    run_experiment,
)
from .model import SystemFileError, check_all_conditions, load_system
from .spectral import SupportTooWideError

__all__ = ["main"]

PASS_EXIT = 0
RATE_EXIT = 1
CONDITION_EXIT = 2
CONFIG_EXIT = 3


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="experiment config file")
    shared.add_argument("--threads", type=int, default=None, help="worker threads")
    shared.add_argument("--seed", type=int, default=None, help="initial-data seed override")
    shared.add_argument("--out", type=Path, default=Path("."), help="output directory")

    parser = argparse.ArgumentParser(
        prog="hyprelax",
        description="Structural checks, parabolic limits, and decay experiments "
        "for partially dissipative hyperbolic systems.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser(
        "check", parents=[shared], help="verify structural conditions of a system"
    )
    check.add_argument("system", nargs="?", type=Path, help="system file")

    limit = commands.add_parser(
        "limit", parents=[shared], help="compute the parabolic limit coefficients"
    )
    limit.add_argument("system", nargs="?", type=Path, help="system file")

    sweep = commands.add_parser(
        "sweep", parents=[shared], help="sweep symbol eigenvalues along a ray"
    )
    sweep.add_argument("system", nargs="?", type=Path, help="system file")
    sweep.add_argument(
        "--direction", default=None, help="comma-separated ray direction (default first axis)"
    )
    sweep.add_argument("--kmin", type=float, default=1e-2, help="smallest modulus")
    sweep.add_argument("--kmax", type=float, default=1e2, help="largest modulus")
    sweep.add_argument("--count", type=int, default=200, help="number of moduli")
    sweep.add_argument(
        "--linear", action="store_true", help="space moduli linearly instead of by log"
    )

    commands.add_parser(
        "run", parents=[shared], help="run a decay experiment from a config file"
    )

    report = commands.add_parser(
        "report", parents=[shared], help="re-serialize an existing report"
    )
    report.add_argument("report", type=Path, help="existing report.json")
    return parser


def _resolve_system_path(args: argparse.Namespace) -> Path:
    if getattr(args, "system", None) is not None:
        return args.system
    if args.config is not None:
        cfg = ExperimentConfig.from_file(args.config)
        return Path(cfg.system)
    raise ConfigurationError("provide a system file or --config pointing to one")


def _complex_matrix(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _cmd_check(args: argparse.Namespace) -> int:
    system = load_system(_resolve_system_path(args))
    reports = check_all_conditions(system)
    payload = {}
    all_passed = True
    for name, report in sorted(reports.items()):
        verdict = "pass" if report.passed else "FAIL"
        print(f"condition {name}: {verdict} ({report.summary})")
        payload[name] = {"passed": report.passed, "summary": report.summary}
        all_passed = all_passed and report.passed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "conditions.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    return PASS_EXIT if all_passed else CONDITION_EXIT


def _cmd_limit(args: argparse.Namespace) -> int:
    system = load_system(_resolve_system_path(args))
    limit = compute_parabolic_limit(system)
    print(f"drift c = {limit.drift.tolist()}")
    print(f"diffusion D = {limit.diffusion.tolist()}")
    print(f"spectral gap = {limit.gap:.6g}")
    payload = {
        "drift": limit.drift.tolist(),
        "diffusion": limit.diffusion.tolist(),
        "gap": limit.gap,
        "projection": _complex_matrix(limit.projection),
        "reduced": _complex_matrix(limit.reduced),
        "corrections": [_complex_matrix(p) for p in limit.corrections],
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "limit.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return PASS_EXIT


def _cmd_sweep(args: argparse.Namespace) -> int:
    system = load_system(_resolve_system_path(args))
    if args.direction is None:
        direction = np.zeros(system.dimension)
        direction[0] = 1.0
    else:
        direction = np.array([float(part) for part in args.direction.split(",")])
        if direction.shape != (system.dimension,):
            raise ConfigurationError(
                f"direction needs {system.dimension} components, got {direction.size}"
            )
        direction = direction / np.linalg.norm(direction)
    if not 0 < args.kmin < args.kmax:
        raise ConfigurationError("moduli must satisfy 0 < kmin < kmax")
    if args.linear:
        moduli = np.linspace(args.kmin, args.kmax, args.count)
    else:
        moduli = np.geomspace(args.kmin, args.kmax, args.count)
    points = eigenvalue_sweep(system, moduli[:, None] * direction[None, :])
    lines = ["modulus,branch,real,imag,cluster_count"]
    for modulus, point in zip(moduli, points):
        for branch, value in enumerate(point.eigenvalues):
            lines.append(
                f"{float(modulus)!r},{branch},"
                f"{float(value.real)!r},{float(value.imag)!r},{point.cluster_count}"
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(points)} sweep points to {out / 'sweep.csv'}")
    return PASS_EXIT


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ConfigurationError("run requires --config")
    cfg = ExperimentConfig.from_file(args.config)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.seed is not None:
        cfg = replace(cfg, initial=replace(cfg.initial, seed=args.seed))
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else Path(args.out)
    if args.out != Path("."):
        out_dir = Path(args.out)
    cfg = replace(cfg, out_dir=str(out_dir))
    report = run_experiment(cfg)
    emit_report(report, out_dir)
    for name, fit in sorted(report.fits.items()):
        verdict = "ok" if fit["saturated"] else "OFF"
        print(
            f"{name}: slope {fit['slope']:+.4f} vs predicted {fit['predicted']:+.4f} "
            f"[{verdict}]"
        )
    for name, fit in sorted(report.remainder.items()):
        verdict = "ok" if fit["negative"] else "OFF"
        print(f"{name}: exponential rate {fit['rate']:+.4f} [{verdict}]")
    print(f"report written to {out_dir}")
    return PASS_EXIT if report.passed else RATE_EXIT


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        raw = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigurationError(f"cannot read report {args.report}: {error}") from error
    try:
        report = DecayReport(
            config=raw["config"],
            resolved_cutoff=raw["resolved_cutoff"],
            times=tuple(raw["times"]),
            series={name: tuple(vals) for name, vals in raw["series"].items()},
            fits=raw["fits"],
            remainder=raw["remainder"],
            conditions=raw["conditions"],
            psi_skipped=raw.get("psi_skipped"),
            passed=bool(raw["passed"]),
        )
    except (KeyError, TypeError) as error:
        raise ConfigurationError(f"report {args.report} is malformed: {error}") from error
    paths = emit_report(report, args.out)
    print(f"re-serialized report to {', '.join(str(p) for p in paths)}")
    return PASS_EXIT if report.passed else RATE_EXIT


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "check": _cmd_check,
        "limit": _cmd_limit,
        "sweep": _cmd_sweep,
        "run": _cmd_run,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (
        ConfigurationError,
        SystemFileError,
        WrapAroundGuardError,
        SupportTooWideError,
        IoFailureError,
    ) as error:
        print(f"error: {error}", file=sys.stderr)
        return CONFIG_EXIT
    except ConditionViolatedError as error:
        print(f"condition violated: {error}", file=sys.stderr)
        return CONDITION_EXIT
    except HarnessError as error:
        print(f"error: {error}", file=sys.stderr)
        return RATE_EXIT


if __name__ == "__main__":
    sys.exit(main())
