"""Config-driven Monte-Carlo experiments over seeded channel draws.

Five experiments mirror the simulation study: high-SNR capacity slopes
(``dof_slope``), strong-reference approximation quality
(``mi_vs_rsnr``), achievable-rate sweeps against receive SNR or array
size (``rate_vs_snr`` / ``rate_vs_nr``), and alternating-minimization
convergence traces (``convergence``).

Per-trial channel seeds are derived as ``seed + trial``; any further
substreams a trial needs (one per sweep point, in grid order) come from
``numpy.random.SeedSequence(seed + trial).spawn(...)``.  Trials are
independent, so the runner can fan them out to a process pool; records
are always reduced in trial order, which keeps outputs byte-identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .channel import (ChannelConfig, generate_channel, power_for_receive_snr,
                      reference_gain_for_rsnr)
from .hybrid import fc_hybrid_precoder, sc_hybrid_precoder
from .numerics import NumericFailure
from .precoding import (achievable_rate, capacity_slopes, classical_precoder,
                        iq_digital_precoder, transmit_covariance)
from .receiver import linearize, mi_linearized, mi_nonlinear_mc

__all__ = [
    "EXPERIMENTS",
    "ConfigValidationError",
    "Dimensions",
    "ChannelSettings",
    "SweepSpec",
    "McSettings",
    "AltMinSettings",
    "ExperimentConfig",
    "TrialRecord",
    "AggregateRow",
    "ExperimentResult",
    "config_from_dict",
    "validate_config",
    "run_experiment",
    "aggregate",
]

EXPERIMENTS = ("dof_slope", "mi_vs_rsnr", "rate_vs_snr", "rate_vs_nr", "convergence")

#: sweep axis each experiment expects
SWEEP_AXES = {
    "dof_slope": "snr_db",
    "mi_vs_rsnr": "rsnr_db",
    "rate_vs_snr": "receive_snr_db",
    "rate_vs_nr": "nr",
    "convergence": "n_rf",
}


class ConfigValidationError(ValueError):
    """An experiment configuration failed validation; message carries the field path."""


@dataclass(frozen=True)
class Dimensions:
    nt: int = 2
    nr: int = 2
    ns: int = 1
    n_rf: int | None = None


@dataclass(frozen=True)
class ChannelSettings:
    paths: int = 10
    wavelength: float = 0.01083
    spacing: float = 0.010
    noise_var: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple[float, ...]


@dataclass(frozen=True)
class McSettings:
    samples: int = 100_000
    inner_samples: int = 4096
    batches: int = 20


@dataclass(frozen=True)
class AltMinSettings:
    tol: float = 1e-6
    max_iter: int | None = None
    architecture: str = "fc"
    restarts: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dims: Dimensions = field(default_factory=Dimensions)
    channel: ChannelSettings = field(default_factory=ChannelSettings)
    sweep: SweepSpec = field(default_factory=lambda: SweepSpec("snr_db", (30.0, 35.0, 40.0)))
    trials: int = 100
    seed: int = 0
    rsnr_db: float = 20.0
    receive_snr_db: float = 0.0
    include_hybrid: bool = True
    mc: McSettings = field(default_factory=McSettings)
    altmin: AltMinSettings = field(default_factory=AltMinSettings)
    out: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    sweep_value: float
    trial: int
    metrics: dict[str, float]
    seed: int


@dataclass(frozen=True)
class AggregateRow:
    sweep_value: float
    metric: str
    mean: float
    stderr: float
    count: int


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple[TrialRecord, ...]
    aggregates: tuple[AggregateRow, ...]
    traces: dict[tuple[float, int], np.ndarray]


# ---------------------------------------------------------------------------
# configuration parsing and validation
# ---------------------------------------------------------------------------

def _build_section(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{path}: expected an object")
    known = {f for f in cls.__dataclass_fields__}
    for key in data:
        if key not in known:
            raise ConfigValidationError(f"{path}.{key}: unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"{path}: {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a JSON document."""
    if not isinstance(doc, dict):
        raise ConfigValidationError("config: expected a JSON object")
    doc = dict(doc)
    sections = {"dims": Dimensions, "channel": ChannelSettings,
                "mc": McSettings, "altmin": AltMinSettings}
    kwargs = {}
    for name, cls in sections.items():
        if name in doc:
            kwargs[name] = _build_section(cls, doc.pop(name), name)
    if "sweep" in doc:
        sweep = doc.pop("sweep")
        if not isinstance(sweep, dict) or set(sweep) - {"axis", "grid"}:
            raise ConfigValidationError("sweep: expected an object with axis and grid")
        try:
            kwargs["sweep"] = SweepSpec(axis=str(sweep["axis"]),
                                        grid=tuple(float(g) for g in sweep["grid"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigValidationError(f"sweep: {exc}") from exc
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    for key in doc:
        if key not in known:
            raise ConfigValidationError(f"{key}: unknown field")
    try:
        cfg = ExperimentConfig(**doc, **kwargs)
    except TypeError as exc:
        raise ConfigValidationError(str(exc)) from exc
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def validate_config(cfg: ExperimentConfig) -> None:
    """Reject configurations the experiment modules cannot honor."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigValidationError(
            f"experiment: {cfg.experiment!r} is not one of {', '.join(EXPERIMENTS)}")
    d = cfg.dims
    for name in ("nt", "nr", "ns"):
        if int(getattr(d, name)) < 1:
            raise ConfigValidationError(f"dims.{name}: must be at least 1")
    if cfg.trials < 1:
        raise ConfigValidationError("trials: must be at least 1")
    grid = cfg.sweep.grid
    if len(grid) == 0:
        raise ConfigValidationError("sweep.grid: must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigValidationError("sweep.grid: must be strictly increasing")
    expected_axis = SWEEP_AXES[cfg.experiment]
    if cfg.sweep.axis != expected_axis:
        raise ConfigValidationError(
            f"sweep.axis: experiment {cfg.experiment} sweeps {expected_axis!r}")
    if cfg.channel.paths < 1:
        raise ConfigValidationError("channel.paths: must be at least 1")
    for name in ("wavelength", "spacing", "noise_var"):
        if not getattr(cfg.channel, name) > 0:
            raise ConfigValidationError(f"channel.{name}: must be positive")
    if cfg.mc.samples < 1 or cfg.mc.inner_samples < 1:
        raise ConfigValidationError("mc.samples: sample counts must be positive")
    if cfg.mc.batches < 2:
        raise ConfigValidationError("mc.batches: must be at least 2")
    if cfg.format not in ("csv", "json"):
        raise ConfigValidationError("format: must be csv or json")
    if cfg.altmin.architecture not in ("fc", "sc"):
        raise ConfigValidationError("altmin.architecture: must be fc or sc")
    if cfg.altmin.restarts < 1:
        raise ConfigValidationError("altmin.restarts: must be at least 1")

    if cfg.experiment == "dof_slope":
        if len(grid) < 2:
            raise ConfigValidationError("sweep.grid: slope estimation needs >= 2 points")
        if grid[0] < 25.0:
            raise ConfigValidationError("sweep.grid: slope estimation needs >= 25 dB")
    if cfg.experiment == "rate_vs_snr":
        if 2 * d.ns > min(d.nr, 2 * d.nt):
            raise ConfigValidationError(
                f"dims.ns: 2*ns={2 * d.ns} exceeds min(nr, 2*nt)={min(d.nr, 2 * d.nt)}")
    if cfg.experiment == "rate_vs_nr":
        if 2 * d.ns > min(int(grid[0]), 2 * d.nt):
            raise ConfigValidationError(
                f"dims.ns: 2*ns={2 * d.ns} exceeds min(nr, 2*nt) at the smallest nr")
        if any(g != int(g) for g in grid):
            raise ConfigValidationError("sweep.grid: antenna counts must be integers")
    if cfg.experiment in ("rate_vs_snr", "rate_vs_nr") and cfg.include_hybrid:
        if d.n_rf is None:
            raise ConfigValidationError("dims.n_rf: required when include_hybrid is set")
        _check_hybrid_dims(d.nt, d.n_rf, d.ns)
    if cfg.experiment == "convergence":
        if 2 * d.ns > min(d.nr, 2 * d.nt):
            raise ConfigValidationError(
                f"dims.ns: 2*ns={2 * d.ns} exceeds min(nr, 2*nt)={min(d.nr, 2 * d.nt)}")
        for g in grid:
            if g != int(g) or int(g) < 1:
                raise ConfigValidationError("sweep.grid: RF chain counts must be positive integers")
            _check_hybrid_dims(d.nt, int(g), d.ns,
                               sub_connected=cfg.altmin.architecture == "sc")


def _check_hybrid_dims(nt: int, n_rf: int, ns: int, sub_connected: bool = False) -> None:
    if ns > n_rf:
        raise ConfigValidationError(f"dims.n_rf: {ns} streams need at least {ns} RF chains")
    if sub_connected and nt % n_rf:
        raise ConfigValidationError(
            f"dims.n_rf: nt={nt} is not divisible by n_rf={n_rf} (sub-connected)")


# ---------------------------------------------------------------------------
# per-trial workers
# ---------------------------------------------------------------------------

def _channel_config(cfg: ExperimentConfig, nr: int | None = None,
                    reference_gain: float = 1.0) -> ChannelConfig:
    return ChannelConfig(nt=cfg.dims.nt, nr=nr if nr is not None else cfg.dims.nr,
                         paths=cfg.channel.paths, wavelength=cfg.channel.wavelength,
                         spacing=cfg.channel.spacing, reference_gain=reference_gain,
                         noise_var=cfg.channel.noise_var)


def _dof_slope_trial(cfg: ExperimentConfig, trial: int):
    trial_seed = cfg.seed + trial
    real = generate_channel(_channel_config(cfg), trial_seed)
    grid = np.asarray(cfg.sweep.grid)
    slopes = capacity_slopes(real.h, real.r, cfg.channel.noise_var, grid)
    centers = grid[1:-1] if grid.size > 2 else [0.5 * (grid[0] + grid[1])]
    records = []
    for i, center in enumerate(centers):
        records.append(TrialRecord(
            experiment=cfg.experiment, sweep_value=float(center), trial=trial,
            metrics={f"slope_{scheme}": float(vals[i]) for scheme, vals in slopes.items()},
            seed=trial_seed))
    return records, {}


def _mi_vs_rsnr_trial(cfg: ExperimentConfig, trial: int):
    trial_seed = cfg.seed + trial
    noise = cfg.channel.noise_var
    real = generate_channel(_channel_config(cfg), trial_seed)
    power = power_for_receive_snr(real.h, noise, cfg.receive_snr_db)
    # Capacity-achieving input with the full min(Nr, 2Nt) real substreams;
    # the reference gain is calibrated against this realized covariance.
    lc0 = linearize(real.h, real.r)
    streams = min(cfg.dims.nr, 2 * cfg.dims.nt)
    q_bar = transmit_covariance(
        iq_digital_precoder(lc0.h_bar, power, noise, streams).f_bar)
    phases = np.exp(1j * np.angle(real.r))
    children = np.random.SeedSequence(trial_seed).spawn(len(cfg.sweep.grid))
    records = []
    for child, target in zip(children, cfg.sweep.grid):
        gain = reference_gain_for_rsnr(real.h, power, noise, target, q=q_bar)
        r = gain * phases
        lc = linearize(real.h, r)
        linear = mi_linearized(lc.h_bar, q_bar, noise)
        est = mi_nonlinear_mc(real.h, r, noise, q_bar, cfg.mc.samples, child,
                              inner_samples=cfg.mc.inner_samples, batches=cfg.mc.batches)
        records.append(TrialRecord(
            experiment=cfg.experiment, sweep_value=float(target), trial=trial,
            metrics={
                "mi_linear_bits": linear,
                "mi_mc_bits": est.value,
                "mi_mc_stderr_bits": est.stderr,
                "rel_error": abs(est.value - linear) / linear,
                "reference_gain": gain,
            },
            seed=trial_seed))
    return records, {}


def _rates_at(cfg: ExperimentConfig, h, r, power: float, seeds) -> dict[str, float]:
    noise = cfg.channel.noise_var
    lc = linearize(h, r)
    d = cfg.dims
    iq = iq_digital_precoder(lc.h_bar, power, noise, 2 * d.ns)
    classical = classical_precoder(lc.h_tilde, power, noise, d.ns)
    metrics = {
        "rate_iq_digital": achievable_rate(lc.h_bar, transmit_covariance(iq.f_bar), noise),
        "rate_classical_digital": achievable_rate(
            lc.h_bar, transmit_covariance(classical.f_real), noise),
        "power": power,
    }
    if cfg.include_hybrid and d.n_rf is not None:
        fc_max = cfg.altmin.max_iter if cfg.altmin.max_iter is not None else 500
        fc, _ = fc_hybrid_precoder(iq.f_bar, d.n_rf, power, tol=cfg.altmin.tol,
                                   max_iter=fc_max, seed=seeds[0],
                                   restarts=cfg.altmin.restarts)
        metrics["rate_fc_hybrid"] = achievable_rate(lc.h_bar, fc.transmit_covariance(), noise)
        if d.nt % d.n_rf == 0:
            sc_max = cfg.altmin.max_iter if cfg.altmin.max_iter is not None else 100
            sc, _ = sc_hybrid_precoder(iq.f_bar, d.n_rf, power, tol=cfg.altmin.tol,
                                       max_iter=sc_max, seed=seeds[1])
            metrics["rate_sc_hybrid"] = achievable_rate(
                lc.h_bar, sc.transmit_covariance(), noise)
    return metrics


def _rate_vs_snr_trial(cfg: ExperimentConfig, trial: int):
    trial_seed = cfg.seed + trial
    real = generate_channel(_channel_config(cfg), trial_seed)
    children = np.random.SeedSequence(trial_seed).spawn(2 * len(cfg.sweep.grid))
    records = []
    for i, target in enumerate(cfg.sweep.grid):
        power = power_for_receive_snr(real.h, cfg.channel.noise_var, target)
        metrics = _rates_at(cfg, real.h, real.r, power, children[2 * i:2 * i + 2])
        records.append(TrialRecord(experiment=cfg.experiment, sweep_value=float(target),
                                   trial=trial, metrics=metrics, seed=trial_seed))
    return records, {}


def _rate_vs_nr_trial(cfg: ExperimentConfig, trial: int):
    trial_seed = cfg.seed + trial
    children = np.random.SeedSequence(trial_seed).spawn(3 * len(cfg.sweep.grid))
    records = []
    for i, nr in enumerate(cfg.sweep.grid):
        real = generate_channel(_channel_config(cfg, nr=int(nr)), children[3 * i])
        power = power_for_receive_snr(real.h, cfg.channel.noise_var, cfg.receive_snr_db)
        metrics = _rates_at(cfg, real.h, real.r, power,
                            children[3 * i + 1:3 * i + 3])
        records.append(TrialRecord(experiment=cfg.experiment, sweep_value=float(nr),
                                   trial=trial, metrics=metrics, seed=trial_seed))
    return records, {}


def _convergence_trial(cfg: ExperimentConfig, trial: int):
    trial_seed = cfg.seed + trial
    noise = cfg.channel.noise_var
    real = generate_channel(_channel_config(cfg), trial_seed)
    lc = linearize(real.h, real.r)
    power = power_for_receive_snr(real.h, noise, cfg.receive_snr_db)
    iq = iq_digital_precoder(lc.h_bar, power, noise, 2 * cfg.dims.ns)
    target_norm = float(np.linalg.norm(iq.f_bar))
    children = np.random.SeedSequence(trial_seed).spawn(len(cfg.sweep.grid))
    records = []
    traces = {}
    for child, n_rf in zip(children, cfg.sweep.grid):
        n_rf = int(n_rf)
        if cfg.altmin.architecture == "fc":
            max_iter = cfg.altmin.max_iter if cfg.altmin.max_iter is not None else 500
            _, trace = fc_hybrid_precoder(iq.f_bar, n_rf, power, tol=cfg.altmin.tol,
                                          max_iter=max_iter, seed=child,
                                          restarts=cfg.altmin.restarts)
        else:
            max_iter = cfg.altmin.max_iter if cfg.altmin.max_iter is not None else 100
            _, trace = sc_hybrid_precoder(iq.f_bar, n_rf, power, tol=cfg.altmin.tol,
                                          max_iter=max_iter, seed=child)
        records.append(TrialRecord(
            experiment=cfg.experiment, sweep_value=float(n_rf), trial=trial,
            metrics={
                "iterations": float(trace.iterations),
                "converged": float(trace.converged),
                "final_objective": float(trace.objectives[-1]),
                "rel_residual": float(np.sqrt(trace.objectives[-1]) / target_norm),
                "trace_index": float(trial),
            },
            seed=trial_seed))
        traces[(float(n_rf), trial)] = trace.objectives
    return records, traces


_TRIALS: dict[str, Callable] = {
    "dof_slope": _dof_slope_trial,
    "mi_vs_rsnr": _mi_vs_rsnr_trial,
    "rate_vs_snr": _rate_vs_snr_trial,
    "rate_vs_nr": _rate_vs_nr_trial,
    "convergence": _convergence_trial,
}


def _run_trial(cfg: ExperimentConfig, trial: int):
    try:
        return _TRIALS[cfg.experiment](cfg, trial)
    except (ConfigValidationError, NumericFailure):
        raise
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(
            f"{cfg.experiment} trial {trial} (seed {cfg.seed + trial}): {exc}") from exc


def _worker(args):
    return _run_trial(*args)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def aggregate(records) -> tuple[AggregateRow, ...]:
    """Mean and standard error per (sweep value, metric), in sorted order."""
    groups: dict[tuple[float, str], list[float]] = {}
    for rec in records:
        for metric, value in rec.metrics.items():
            groups.setdefault((rec.sweep_value, metric), []).append(value)
    rows = []
    for (sweep_value, metric) in sorted(groups):
        values = np.asarray(groups[(sweep_value, metric)], dtype=float)
        stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
        rows.append(AggregateRow(sweep_value=sweep_value, metric=metric,
                                 mean=float(values.mean()), stderr=stderr,
                                 count=int(values.size)))
    return tuple(rows)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run every trial, reduce in trial order, and aggregate per sweep point.

    Identical ``(config, seed)`` produce identical results for any
    ``jobs``; workers share nothing and the reduction is order-stable.
    """
    validate_config(cfg)
    if jobs < 1:
        raise ConfigValidationError("jobs: must be at least 1")
    if jobs == 1 or cfg.trials == 1:
        outputs = [_run_trial(cfg, t) for t in range(cfg.trials)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_worker, [(cfg, t) for t in range(cfg.trials)]))
    records: list[TrialRecord] = []
    traces: dict[tuple[float, int], np.ndarray] = {}
    for trial_records, trial_traces in outputs:
        records.extend(trial_records)
        traces.update(trial_traces)
    return ExperimentResult(config=cfg, records=tuple(records),
                            aggregates=aggregate(records), traces=traces)
