"""Decay-rate experiments: norms, exponent fits, reports.

An experiment evolves localized initial data under a partially dissipative
system, splits the solution into the projected low-frequency part ``u1``
and the remainder ``u2``, compares ``u1`` against the parabolic profiles,
and fits log-log decay exponents of the error norms against the predicted
values ``-d/2 (1/q - 1/p) - 1/2`` (zeroth-order profile) and
``-d/2 (1/q - 1/p) - 1`` (first-order profile); the remainder is fitted to
an exponential.  Verified norm pairs are restricted to (p, q) in
{(2, 1), (2, 2), (inf, 1)}: on a finite grid these span both degrees of
freedom of the rate formula, while genuine L^inf -> L^inf experiments have
no localized surrogate on a box.

The q = 1 series uses one fixed localized datum.  The q = 2 series probes
the worst case over L^2 data with a scaling family of Gaussians widened as
sqrt(t) and normalized in L^2, since any single fixed datum decays faster
than the uniform rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from .chapman import (
    ConditionBViolatedError,
    ConditionViolatedError,
    compute_parabolic_limit,
)
from .model import (
    HyperbolicSystem,
    check_condition_B,
    check_condition_D,
    check_condition_S,
    load_system,
    max_wave_speed,
)
from .spectral import (
    CutoffSpec,
    FrequencySplitter,
    GridField,
    PeriodicGrid,
    default_cutoff,
    evolve_parabolic_phi,
    evolve_parabolic_psi,
    lp_norm,
    make_initial_data,
    save_field,
)

__all__ = [
    "HarnessError",
    "NonPositiveValueError",
    "TooFewPointsError",
    "WrapAroundGuardError",
    "IoFailureError",
    "ConfigurationError",
    "RateFit",
    "FitWindow",
    "TimeSchedule",
    "InitialSpec",
    "ExperimentConfig",
    "DecayReport",
    "lp_norm",
    "fit_rate",
    "fit_exponential",
    "predicted_exponent",
    "run_experiment",
    "emit_report",
]

# Gaussian radius beyond which the tail is below 1e-12 of the peak.
_GAUSSIAN_SUPPORT = math.sqrt(2.0 * math.log(1e12))

_VERIFIED_PAIRS = ((2.0, 1), (2.0, 2), (math.inf, 1))


class HarnessError(Exception):
    """Base class for errors raised by this module."""


class NonPositiveValueError(HarnessError):
    """A fit received zero, negative, or non-finite values."""


class TooFewPointsError(HarnessError):
    """A fit received fewer than the minimum number of samples."""


class WrapAroundGuardError(HarnessError):
    """The schedule would let the solution wrap around the periodic box."""


class IoFailureError(HarnessError):
    """Report or snapshot files could not be written."""


class ConfigurationError(HarnessError):
    """An experiment configuration is malformed."""


@dataclass(frozen=True)
class RateFit:
    """Least-squares line fit with its diagnostics."""

    slope: float
    stderr: float
    intercept: float
    r_squared: float
    npoints: int


def _validated_samples(times, values) -> tuple[np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("times and values must be matching one-dimensional arrays")
    if times.size < 6:
        raise TooFewPointsError(f"need at least 6 samples to fit, got {times.size}")
    if not np.all(np.diff(times) > 0):
        raise ValueError("times must be strictly increasing")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise NonPositiveValueError("fitted values must be positive and finite")
    return times, values


def fit_rate(times, values) -> RateFit:
    """Power-law exponent: ordinary least squares on (log t, log v)."""
    times, values = _validated_samples(times, values)
    if not np.all(times > 0):
        raise ValueError("power-law fits need positive times")
    result = linregress(np.log(times), np.log(values))
    return RateFit(
        slope=float(result.slope),
        stderr=float(result.stderr),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        npoints=times.size,
    )


def fit_exponential(times, values) -> RateFit:
    """Exponential rate: ordinary least squares on (t, log v)."""
    times, values = _validated_samples(times, values)
    result = linregress(times, np.log(values))
    return RateFit(
        slope=float(result.slope),
        stderr=float(result.stderr),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        npoints=times.size,
    )


def predicted_exponent(profile: str, dimension: int, p: float, q: float) -> float:
    """Predicted decay exponent of ``|u1 - U|_p`` for L^q data."""
    base = -0.5 * dimension * (1.0 / q - 1.0 / p)
    if profile == "phi":
        return base - 0.5
    if profile == "psi":
        return base - 1.0
    raise ValueError(f"unknown profile {profile!r}; expected phi or psi")


@dataclass(frozen=True)
class FitWindow:
    """Lower time bounds for the power-law and exponential fits."""

    t_min: float = 1.0
    exp_t_min: float | None = None


@dataclass(frozen=True)
class TimeSchedule:
    """Measurement times, log-spaced by default; rates hold for ``t >= 1``."""

    t_min: float
    t_max: float
    count: int
    log: bool = True

    def __post_init__(self) -> None:
        if not self.t_min >= 1.0:
            raise ValueError(f"schedule must start at t >= 1, got {self.t_min}")
        if not self.t_max > self.t_min:
            raise ValueError("schedule needs t_max > t_min")
        if self.count < 2:
            raise ValueError("schedule needs at least two times")

    def times(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.t_min, self.t_max, self.count)
        return np.linspace(self.t_min, self.t_max, self.count)


@dataclass(frozen=True)
class InitialSpec:
    """Parameters handed to :func:`hyprelax.spectral.make_initial_data`."""

    kind: str = "gaussian"
    seed: int = 0
    sigma: float = 1.0
    radius: float = 1.0
    band: tuple[float, float] = (0.5, 1.5)
    amplitudes: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Full declarative description of one decay experiment."""

    system: str
    grid_points: int
    grid_half_width: float
    times: TimeSchedule
    initial: InitialSpec = field(default_factory=InitialSpec)
    cutoff: CutoffSpec | None = None
    pairs: tuple[tuple[float, int], ...] = ((2.0, 1),)
    profile: str = "both"
    tolerance: float = 0.15
    fit: FitWindow = field(default_factory=FitWindow)
    out_dir: str | None = None
    save_fields: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.profile not in ("phi", "psi", "both"):
            raise ConfigurationError(
                f"profile must be phi, psi, or both, got {self.profile!r}"
            )
        pairs = tuple((float(p), int(q)) for p, q in self.pairs)
        for pair in pairs:
            if pair not in _VERIFIED_PAIRS:
                raise ConfigurationError(
                    f"norm pair {pair} is outside the verified set "
                    f"{{(2, 1), (2, 2), (inf, 1)}}"
                )
        object.__setattr__(self, "pairs", pairs)
        if not self.tolerance > 0:
            raise ConfigurationError("exponent tolerance must be positive")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")

    @staticmethod
    def from_file(path: str | Path) -> "ExperimentConfig":
        """Parse a config file, rejecting unknown keys by name."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as error:
            raise ConfigurationError(f"cannot read config {path}: {error}") from error
        except json.JSONDecodeError as error:
            raise ConfigurationError(f"config {path} is not valid JSON: {error}") from error
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config {path} must be a JSON object")
        return _parse_config(raw, path.parent)


def _reject_unknown(mapping: dict, allowed: set[str], context: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigurationError(f"unknown key {key!r} in {context}")


def _require_keys(mapping: dict, required: tuple[str, ...], context: str) -> None:
    for key in required:
        if key not in mapping:
            raise ConfigurationError(f"missing required key {key!r} in {context}")


def _parse_config(raw: dict, base_dir: Path) -> ExperimentConfig:
    _reject_unknown(
        raw,
        {
            "system",
            "grid",
            "initial",
            "cutoff",
            "times",
            "pairs",
            "profile",
            "tolerance",
            "fit",
            "out_dir",
            "save_fields",
            "threads",
        },
        "config",
    )
    _require_keys(raw, ("system", "grid", "times"), "config")
    try:
        system_path = Path(raw["system"])
        if not system_path.is_absolute():
            system_path = base_dir / system_path

        grid = raw["grid"]
        _reject_unknown(grid, {"points", "half_width"}, "grid")
        _require_keys(grid, ("points", "half_width"), "grid")

        schedule = raw["times"]
        _reject_unknown(schedule, {"t_min", "t_max", "count", "log"}, "times")
        _require_keys(schedule, ("t_min", "t_max", "count"), "times")
        times = TimeSchedule(
            t_min=float(schedule["t_min"]),
            t_max=float(schedule["t_max"]),
            count=int(schedule["count"]),
            log=bool(schedule.get("log", True)),
        )

        initial_raw = raw.get("initial", {})
        _reject_unknown(
            initial_raw,
            {"kind", "seed", "sigma", "radius", "band", "amplitudes"},
            "initial",
        )
        amplitudes = initial_raw.get("amplitudes")
        initial = InitialSpec(
            kind=initial_raw.get("kind", "gaussian"),
            seed=int(initial_raw.get("seed", 0)),
            sigma=float(initial_raw.get("sigma", 1.0)),
            radius=float(initial_raw.get("radius", 1.0)),
            band=tuple(float(b) for b in initial_raw.get("band", (0.5, 1.5))),
            amplitudes=None if amplitudes is None else tuple(float(a) for a in amplitudes),
        )

        cutoff_raw = raw.get("cutoff", "auto")
        if cutoff_raw == "auto" or cutoff_raw is None:
            cutoff = None
        else:
            _reject_unknown(cutoff_raw, {"inner", "outer"}, "cutoff")
            _require_keys(cutoff_raw, ("inner", "outer"), "cutoff")
            cutoff = CutoffSpec(
                inner=float(cutoff_raw["inner"]), outer=float(cutoff_raw["outer"])
            )

        pairs_raw = raw.get("pairs", [[2, 1]])
        pairs = []
        for entry in pairs_raw:
            p_raw, q_raw = entry
            p = math.inf if p_raw in ("inf", "Infinity") else float(p_raw)
            pairs.append((p, int(q_raw)))

        fit_raw = raw.get("fit", {})
        _reject_unknown(fit_raw, {"t_min", "exp_t_min"}, "fit")
        exp_t_min = fit_raw.get("exp_t_min")
        window = FitWindow(
            t_min=float(fit_raw.get("t_min", 1.0)),
            exp_t_min=None if exp_t_min is None else float(exp_t_min),
        )

        return ExperimentConfig(
            system=str(system_path),
            grid_points=int(grid["points"]),
            grid_half_width=float(grid["half_width"]),
            times=times,
            initial=initial,
            cutoff=cutoff,
            pairs=tuple(pairs),
            profile=raw.get("profile", "both"),
            tolerance=float(raw.get("tolerance", 0.15)),
            fit=window,
            out_dir=raw.get("out_dir"),
            save_fields=bool(raw.get("save_fields", False)),
            threads=int(raw.get("threads", 1)),
        )
    except ConfigurationError:
        raise
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigurationError(f"malformed config value: {error}") from error


@dataclass(frozen=True)
class DecayReport:
    """All measured series, fits, and verdicts of one experiment."""

    config: dict
    resolved_cutoff: dict
    times: tuple[float, ...]
    series: dict[str, tuple[float, ...]]
    fits: dict[str, dict]
    remainder: dict[str, dict]
    conditions: dict[str, dict]
    psi_skipped: str | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "resolved_cutoff": self.resolved_cutoff,
            "times": list(self.times),
            "series": {name: list(vals) for name, vals in sorted(self.series.items())},
            "fits": {name: dict(fit) for name, fit in sorted(self.fits.items())},
            "remainder": {
                name: dict(fit) for name, fit in sorted(self.remainder.items())
            },
            "conditions": {
                name: dict(entry) for name, entry in sorted(self.conditions.items())
            },
            "psi_skipped": self.psi_skipped,
            "passed": self.passed,
        }

    def csv_rows(self):
        """Rows (t, norm_name, value), time-major, names sorted."""
        names = sorted(self.series)
        for index, t in enumerate(self.times):
            for name in names:
                yield t, name, self.series[name][index]


def _pair_tag(p: float, q: int) -> str:
    p_label = "inf" if math.isinf(p) else f"{int(p)}"
    return f"p{p_label}_q{q}"


def _pair_echo(pairs) -> list[list]:
    return [["inf" if math.isinf(p) else int(p), q] for p, q in pairs]


def _config_echo(cfg: ExperimentConfig) -> dict:
    echo = {
        "system": str(cfg.system),
        "grid": {"points": cfg.grid_points, "half_width": cfg.grid_half_width},
        "times": asdict(cfg.times),
        "initial": {
            key: (list(value) if isinstance(value, tuple) else value)
            for key, value in asdict(cfg.initial).items()
        },
        "cutoff": None if cfg.cutoff is None else asdict(cfg.cutoff),
        "pairs": _pair_echo(cfg.pairs),
        "profile": cfg.profile,
        "tolerance": cfg.tolerance,
        "fit": asdict(cfg.fit),
        "out_dir": cfg.out_dir,
        "save_fields": cfg.save_fields,
        "threads": cfg.threads,
    }
    return echo


def _support_radius(initial: InitialSpec, sigma: float) -> float:
    if initial.kind == "gaussian":
        return _GAUSSIAN_SUPPORT * sigma
    if initial.kind == "bump":
        return initial.radius
    # Band-limited noise fills the box; the wrap guard cannot localize it and
    # the surrogate interpretation is up to the caller.
    return 0.0


def _difference_norm(a: GridField, b: GridField, p: float) -> float:
    return lp_norm(GridField(a.grid, a.values - b.values, a.representation), p)


def _unit_l2_gaussian(
    grid: PeriodicGrid, components: int, spec: InitialSpec, sigma: float
) -> GridField:
    data = make_initial_data(
        grid,
        components,
        "gaussian",
        seed=spec.seed,
        amplitudes=spec.amplitudes,
        sigma=sigma,
    )
    scale = data.norms["l2"]
    return GridField(grid, data.field.values / scale, data.field.representation)


def _fit_series(
    times: np.ndarray,
    values: np.ndarray,
    t_min: float,
    predicted: float,
    tolerance: float,
) -> dict:
    window = times >= t_min
    fit = fit_rate(times[window], values[window])
    saturated = abs(fit.slope - predicted) <= tolerance
    return {
        "slope": fit.slope,
        "stderr": fit.stderr,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "npoints": fit.npoints,
        "predicted": predicted,
        "tolerance": tolerance,
        "window_t_min": t_min,
        "saturated": saturated,
        "bound_ok": fit.slope <= predicted + tolerance,
    }


def run_experiment(
    cfg: ExperimentConfig, *, system: HyperbolicSystem | None = None
) -> DecayReport:
    """Evolve, split, compare against parabolic profiles, and fit rates.

    ``system`` overrides loading ``cfg.system`` from disk, for callers that
    already hold the object.  The report passes when every requested
    exponent fit lands within tolerance of its prediction and every
    remainder series fits an exponential with negative rate.

    Raises:
        ConditionViolatedError: if the kernel or dissipation check fails, or
            the first-order profile is requested alone without a symmetry.
        WrapAroundGuardError: if waves could cross the periodic boundary
            within the schedule.
        ConfigurationError: if the config is inconsistent with the system.
    """
    if system is None:
        system = load_system(cfg.system)

    conditions: dict[str, dict] = {}
    report_b = check_condition_B(system)
    conditions["B"] = {"passed": report_b.passed, "summary": report_b.summary}
    if not report_b.passed:
        raise ConditionBViolatedError(
            f"relaxation spectrum check fails: {report_b.summary}", report_b
        )
    report_d = check_condition_D(system)
    conditions["D"] = {"passed": report_d.passed, "summary": report_d.summary}
    if not report_d.passed:
        raise ConditionViolatedError(
            f"uniform dissipation fails: {report_d.summary}", report_d
        )

    psi_active = cfg.profile in ("psi", "both")
    phi_active = cfg.profile in ("phi", "both")
    psi_skipped = None
    if psi_active:
        report_s = check_condition_S(system)
        conditions["S"] = {"passed": report_s.passed, "summary": report_s.summary}
        if not report_s.passed:
            if cfg.profile == "psi":
                raise ConditionViolatedError(
                    f"first-order profile needs a symmetry: {report_s.summary}",
                    report_s,
                )
            psi_active = False
            psi_skipped = report_s.summary

    grid = PeriodicGrid(
        dimension=system.dimension,
        points=cfg.grid_points,
        half_width=cfg.grid_half_width,
    )
    times = cfg.times.times()

    scaling_pairs = [pair for pair in cfg.pairs if pair[1] != 1]
    fixed_pairs = [pair for pair in cfg.pairs if pair[1] == 1]
    if scaling_pairs and cfg.initial.kind != "gaussian":
        raise ConfigurationError(
            "norm pairs with q != 1 use a widening Gaussian family; set the "
            "initial kind to gaussian"
        )

    speed = max_wave_speed(system)
    guard_sigma = cfg.initial.sigma
    if scaling_pairs:
        guard_sigma = cfg.initial.sigma * math.sqrt(times[-1] / times[0])
    support = _support_radius(cfg.initial, guard_sigma)
    reach = speed * times[-1] + support
    if reach > cfg.grid_half_width / 2.0:
        raise WrapAroundGuardError(
            f"wave reach {reach:.3g} exceeds half-width/2 = "
            f"{cfg.grid_half_width / 2.0:.3g}; enlarge the box or shorten the schedule"
        )

    initial = make_initial_data(
        grid,
        system.size,
        cfg.initial.kind,
        seed=cfg.initial.seed,
        amplitudes=cfg.initial.amplitudes,
        sigma=cfg.initial.sigma,
        radius=cfg.initial.radius,
        band=cfg.initial.band,
    )
    cut = cfg.cutoff if cfg.cutoff is not None else default_cutoff(system)
    splitter = FrequencySplitter(system, grid, cut, threads=cfg.threads)
    limit = compute_parabolic_limit(system)

    fields_dir = None
    if cfg.save_fields and cfg.out_dir is not None:
        fields_dir = Path(cfg.out_dir) / "fields"
        try:
            fields_dir.mkdir(parents=True, exist_ok=True)
        except OSError as error:
            raise IoFailureError(f"cannot create {fields_dir}: {error}") from error

    series: dict[str, list[float]] = {}

    def record(name: str, value: float) -> None:
        series.setdefault(name, []).append(value)

    def measure(datum: GridField, t: float, pairs, q_label: int, save_index=None):
        full, low, high = splitter.decompose(datum, t)
        phi = evolve_parabolic_phi(limit, datum, t) if phi_active else None
        psi = evolve_parabolic_psi(limit, datum, t) if psi_active else None
        record(f"u2_l2_q{q_label}", lp_norm(high, 2))
        for p, q in pairs:
            tag = _pair_tag(p, q)
            record(f"u_{tag}", lp_norm(full, p))
            if phi is not None:
                record(f"u1_minus_phi_{tag}", _difference_norm(low, phi, p))
            if psi is not None:
                record(f"u1_minus_psi_{tag}", _difference_norm(low, psi, p))
        if save_index is not None and fields_dir is not None:
            for label, snapshot in (("u", full), ("u1", low), ("u2", high)):
                save_field(
                    snapshot,
                    fields_dir / f"snapshot_{save_index:03d}_{label}.bin",
                    time=t,
                )

    for index, t in enumerate(times):
        if fixed_pairs:
            measure(initial.field, float(t), fixed_pairs, 1, save_index=index)
        for p, q in scaling_pairs:
            sigma_t = cfg.initial.sigma * math.sqrt(float(t) / float(times[0]))
            datum = _unit_l2_gaussian(grid, system.size, cfg.initial, sigma_t)
            measure(datum, float(t), [(p, q)], q)

    fits: dict[str, dict] = {}
    passed = True
    for p, q in cfg.pairs:
        tag = _pair_tag(p, q)
        targets = []
        if phi_active:
            targets.append(("phi", f"u1_minus_phi_{tag}"))
        if psi_active:
            targets.append(("psi", f"u1_minus_psi_{tag}"))
        for profile, name in targets:
            predicted = predicted_exponent(profile, system.dimension, p, q)
            fits[name] = _fit_series(
                times, np.asarray(series[name]), cfg.fit.t_min, predicted, cfg.tolerance
            )
            passed = passed and fits[name]["saturated"]

    remainder: dict[str, dict] = {}
    exp_t_min = cfg.fit.exp_t_min if cfg.fit.exp_t_min is not None else cfg.fit.t_min
    for name in sorted(series):
        if not name.startswith("u2_l2"):
            continue
        window = times >= exp_t_min
        fit = fit_exponential(times[window], np.asarray(series[name])[window])
        remainder[name] = {
            "rate": fit.slope,
            "stderr": fit.stderr,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "npoints": fit.npoints,
            "window_t_min": exp_t_min,
            "negative": fit.slope < 0,
        }
        passed = passed and fit.slope < 0

    return DecayReport(
        config=_config_echo(cfg),
        resolved_cutoff={"inner": cut.inner, "outer": cut.outer},
        times=tuple(float(t) for t in times),
        series={name: tuple(vals) for name, vals in series.items()},
        fits=fits,
        remainder=remainder,
        conditions=conditions,
        psi_skipped=psi_skipped,
        passed=passed,
    )


def emit_report(
    report: DecayReport, out_dir: str | Path, formats: tuple[str, ...] = ("json", "csv")
) -> list[Path]:
    """Write ``report.json`` and/or ``report.csv``; returns the paths.

    Output is byte-reproducible: JSON keys are sorted and CSV rows are
    emitted time-major with sorted series names and full-precision floats.
    """
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            if fmt == "json":
                path = out_dir / "report.json"
                payload = json.dumps(report.to_dict(), indent=2, sort_keys=True)
                path.write_text(payload + "\n")
            elif fmt == "csv":
                path = out_dir / "report.csv"
                lines = ["t,norm_name,value"]
                lines.extend(
                    f"{t!r},{name},{value!r}" for t, name, value in report.csv_rows()
                )
                path.write_text("\n".join(lines) + "\n")
            else:
                raise ValueError(f"unknown report format {fmt!r}")
            written.append(path)
    except OSError as error:
        raise IoFailureError(f"cannot write report to {out_dir}: {error}") from error
    return written
