"""Named verification experiments producing machine-readable reports.

Each experiment renders one asymptotic claim as a Monte Carlo gate:

* ``theorem1_fluid``: paths from a fixed macroscopic start track the
  deterministic flow; the median sup deviation over [0, T] shrinks down
  the epsilon ladder (diffusive rate reported, not gated).
* ``theorem2_distributional``: the state at T_eps = log(1/eps)/a, started
  from x0 = eps, converges in law to the profile-mapped limit draw; gated
  on strictly decreasing Wasserstein-1 plus the atom mass at zero.
* ``theorem2_pathwise``: an early-time measurement at t_c = (c/a)log(1/eps)
  is rescaled into a limit-draw estimate, pushed through the profile and
  the flow, and compared pathwise against the simulated window after
  T_eps; gated on the median sup error decreasing down the ladder.
* ``lemma_l1``: the rescaled small-noise path and its linear companion on
  shared increments stay L1-close on a fixed time grid; gated on the
  mean gap at the gate time decreasing down the ladder, plus the
  discounted-companion martingale identity.

Determinism: every random quantity comes from streams keyed by (seed,
role, index), so reports and metrics rows are identical for any worker
count; metrics.csv is byte-stable.  Wall-clock time appears only in
report.json, never in metrics.csv.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path as FsPath

import numpy as np

from . import flow
from ._rng import TAG_BOOTSTRAP, derived_generator
from .limitlaw import LimitLaw, sample_limit
from .models import BUILTIN_MODEL_NAMES, ModelSpec, builtin_model
from .sde import SimConfig, simulate_coupled_ensemble, simulate_ensemble
from .stats import (
    ks_pvalue,
    ks_statistic,
    wasserstein1,
    wasserstein1_subsample_stderr,
)

Array = np.ndarray

__all__ = [
    "EXPERIMENT_NAMES",
    "ExperimentConfig",
    "MetricRow",
    "ExperimentReport",
    "run_experiment",
    "metrics_csv_text",
    "write_report",
]

EXPERIMENT_NAMES = (
    "theorem1_fluid",
    "theorem2_distributional",
    "theorem2_pathwise",
    "lemma_l1",
)

DEFAULT_EPSILON_LADDER = (1e-2, 1e-3, 1e-4)
DEFAULT_T_GRID = (0.0, 0.5, 1.0, 2.0)

# Pathwise window resolution: the sup is taken over this many recorded
# offsets spanning [0, T] after T_eps (a grid sup, not an all-step sup;
# per-path references at every step would not fit in memory).
_WINDOW_POINTS = 51

# Limit-law reference sample size, as a multiple of n_paths.
_REFERENCE_FACTOR = 20

# Sensitivity companions for the split exponent; always includes c_split.
_C_PROBES = (0.6, 0.9)

_SLOPE_BAND = (0.35, 0.65)

_REQUIRED_KEYS = ("experiment", "model", "a")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters (see from_dict for the file form)."""

    experiment: str
    model: str
    a: float
    b: float = 1.0
    epsilon_ladder: tuple[float, ...] = DEFAULT_EPSILON_LADDER
    n_paths: int = 20000
    t_horizon: float = 3.0
    dt: float | None = None
    c_split: float = 0.75
    seed: int = 0
    x0: float = 0.2
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    w1_max_at_smallest: float | None = None
    n_boot: int = 200
    threads: int = 1

    def __post_init__(self) -> None:
        # Coerce numerics so that 1 and 1.0 in a config file are the same
        # config (identical hash, identical report bytes).
        for key in ("a", "b", "t_horizon", "c_split", "x0"):
            object.__setattr__(self, key, float(getattr(self, key)))
        for key in ("dt", "w1_max_at_smallest"):
            value = getattr(self, key)
            if value is not None:
                object.__setattr__(self, key, float(value))
        if self.experiment not in EXPERIMENT_NAMES:
            raise ValueError(
                f"experiment must be one of {EXPERIMENT_NAMES}, got {self.experiment!r}"
            )
        if self.model not in BUILTIN_MODEL_NAMES:
            raise ValueError(
                f"model must be one of {BUILTIN_MODEL_NAMES}, got {self.model!r}"
            )
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError("a must be positive")
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError("b must be positive")
        if self.b != 1.0:
            raise ValueError(
                "builtin models carry unit diffusion slope; b must equal 1"
            )
        ladder = tuple(float(e) for e in self.epsilon_ladder)
        if len(ladder) == 0:
            raise ValueError("epsilon_ladder must be nonempty")
        if any(not (e > 0.0 and math.isfinite(e)) for e in ladder):
            raise ValueError("epsilon_ladder entries must be positive and finite")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("epsilon_ladder must be strictly decreasing")
        object.__setattr__(self, "epsilon_ladder", ladder)
        if self.n_paths < 2:
            raise ValueError("n_paths must be at least 2")
        if not self.t_horizon > 0.0:
            raise ValueError("t_horizon must be positive")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("dt must be positive when given")
        if not 0.5 < self.c_split < 1.0:
            raise ValueError("c_split must lie in (1/2,1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (self.x0 > 0.0 and math.isfinite(self.x0)):
            raise ValueError("x0 must be positive")
        grid = tuple(float(t) for t in self.t_grid)
        if len(grid) == 0 or any(t < 0.0 for t in grid) or grid[-1] <= 0.0:
            raise ValueError("t_grid must be nonnegative with a positive last entry")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("t_grid must be nondecreasing")
        object.__setattr__(self, "t_grid", grid)
        if self.w1_max_at_smallest is not None and not self.w1_max_at_smallest > 0.0:
            raise ValueError("w1_max_at_smallest must be positive when given")
        if self.n_boot < 2:
            raise ValueError("n_boot must be at least 2")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def step_size(self, epsilon: float) -> float:
        # Default rule keeps scheme bias below statistical error down the
        # ladder: dt = min(1e-3, sqrt(epsilon) * 1e-2).
        if self.dt is not None:
            return self.dt
        return min(1e-3, math.sqrt(epsilon) * 1e-2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in _REQUIRED_KEYS if k not in data)
        if missing:
            raise ValueError(f"missing required config keys: {', '.join(missing)}")
        clean = dict(data)
        for key in ("epsilon_ladder", "t_grid"):
            if key in clean:
                if not isinstance(clean[key], (list, tuple)):
                    raise ValueError(f"{key} must be a list")
                clean[key] = tuple(clean[key])
        for key in ("n_paths", "seed", "n_boot", "threads"):
            if key in clean:
                if isinstance(clean[key], bool) or not isinstance(clean[key], int):
                    raise ValueError(f"{key} must be an integer")
        return cls(**clean)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "a": self.a,
            "b": self.b,
            "epsilon_ladder": list(self.epsilon_ladder),
            "n_paths": self.n_paths,
            "t_horizon": self.t_horizon,
            "dt": self.dt,
            "c_split": self.c_split,
            "seed": self.seed,
            "x0": self.x0,
            "t_grid": list(self.t_grid),
            "w1_max_at_smallest": self.w1_max_at_smallest,
            "n_boot": self.n_boot,
            "threads": self.threads,
        }

    def config_hash(self) -> str:
        # threads is an execution detail with no effect on results, so it
        # stays out of the identity hash.
        payload = self.to_dict()
        del payload["threads"]
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class MetricRow:
    """One reported estimate; epsilon is None for ladder-global rows."""

    experiment: str
    epsilon: float | None
    metric: str
    value: float
    stderr: float | None
    n: int


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    config: dict
    config_hash: str
    passed: bool
    verdicts: dict
    metrics: tuple[MetricRow, ...]
    diagnostics: dict = field(default_factory=dict)
    failures: tuple[str, ...] = ()
    wall_clock_seconds: float = 0.0

    def as_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "config_hash": self.config_hash,
            "passed": self.passed,
            "verdicts": dict(self.verdicts),
            "metrics": [
                {
                    "experiment": r.experiment,
                    "epsilon": r.epsilon,
                    "metric": r.metric,
                    "value": r.value,
                    "stderr": r.stderr,
                    "n": r.n,
                }
                for r in self.metrics
            ],
            "diagnostics": self.diagnostics,
            "failures": list(self.failures),
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def metrics_csv_text(report: ExperimentReport) -> str:
    """Render the metrics table; formatting is repr-exact and byte-stable."""
    lines = ["experiment,epsilon,metric,value,stderr,n"]
    for r in report.metrics:
        eps = repr(float(r.epsilon)) if r.epsilon is not None else ""
        err = repr(float(r.stderr)) if r.stderr is not None else ""
        lines.append(f"{r.experiment},{eps},{r.metric},{float(r.value)!r},{err},{r.n}")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, out_dir: str | FsPath) -> None:
    """Write report.json and metrics.csv into out_dir (created if needed)."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv_text(report))
    payload = json.dumps(
        report.as_json_dict(), indent=2, sort_keys=True, allow_nan=False
    )
    (out / "report.json").write_text(payload + "\n")


def _monotone_beyond_se(values: list[float], stderrs: list[float]) -> bool:
    """Strict decrease where each drop exceeds the two adjacent stderrs."""
    if len(values) < 2:
        return False
    return all(
        values[k + 1] < values[k] - (stderrs[k] + stderrs[k + 1])
        for k in range(len(values) - 1)
    )


def _bootstrap_stat_stderr(
    sample: Array, stat, rng: np.random.Generator, n_boot: int
) -> float:
    reps = np.empty(n_boot)
    n = sample.size
    for i in range(n_boot):
        reps[i] = stat(sample[rng.integers(0, n, n)])
    return float(np.std(reps, ddof=1))


def _mean_with_se(sample: Array) -> tuple[float, float]:
    n = sample.size
    sd = float(np.std(sample, ddof=1)) if n > 1 else 0.0
    return float(np.mean(sample)), sd / math.sqrt(n)


def _binomial_se(p0: float, n: int) -> float:
    return math.sqrt(p0 * (1.0 - p0) / n)


def _t_shift(cfg: ExperimentConfig, epsilon: float) -> float:
    return math.log(1.0 / epsilon) / cfg.a


def _run_theorem2_distributional(
    cfg: ExperimentConfig, model: ModelSpec, law: LimitLaw
) -> tuple[list[MetricRow], dict, dict, list[str]]:
    offsets = (0.0, cfg.t_horizon / 2.0, cfg.t_horizon)
    # The reference is 20x the sample so its own sampling noise is second
    # order; the W1 floor is then the simulated sample's alone (~n^-1/2).
    ref_n = _REFERENCE_FACTOR * cfg.n_paths
    draws = sample_limit(law, ref_n, cfg.seed)
    references = [
        np.sort(flow.limit_profile_batch(model, draws * math.exp(cfg.a * off)))
        for off in offsets
    ]

    rows: list[MetricRow] = []
    failures: list[str] = []
    w1_series: list[float] = []
    se_series: list[float] = []
    atom_z_at_smallest: float | None = None
    p0 = math.exp(-law.rate)

    for k, eps in enumerate(cfg.epsilon_ladder):
        try:
            shift = _t_shift(cfg, eps)
            sim_cfg = SimConfig(
                dt=cfg.step_size(eps), horizon=shift + cfg.t_horizon, seed=cfg.seed
            )
            ens = simulate_ensemble(
                model, eps, eps, sim_cfg, cfg.n_paths,
                [shift + off for off in offsets], threads=cfg.threads,
            )
        except Exception as exc:  # per-epsilon isolation, report stays partial
            failures.append(f"epsilon={eps:g}: {exc}")
            continue

        names = ("w1_endpoint", "w1_mid_window", "w1_end_window")
        for j, name in enumerate(names):
            observed = ens.values[:, j]
            w1 = wasserstein1(observed, references[j])
            # Subsampling, not the with-replacement bootstrap: at the
            # sampling floor the bootstrap re-inflates the floor and
            # overstates the error by half again.
            se = wasserstein1_subsample_stderr(observed, references[j])
            rows.append(MetricRow(cfg.experiment, eps, name, w1, se, cfg.n_paths))
            if j == 0:
                w1_series.append(w1)
                se_series.append(se)

        endpoint = ens.values[:, 0]
        rows.append(MetricRow(
            cfg.experiment, eps, "ks_endpoint",
            ks_statistic(endpoint, references[0]), None, cfg.n_paths,
        ))
        rows.append(MetricRow(
            cfg.experiment, eps, "ks_pvalue_endpoint",
            ks_pvalue(endpoint, references[0]), None, cfg.n_paths,
        ))
        mean, mean_se = _mean_with_se(endpoint)
        rows.append(MetricRow(
            cfg.experiment, eps, "endpoint_mean", mean, mean_se, cfg.n_paths
        ))

        frac = float(np.mean(ens.values[:, -1] == 0.0))
        rows.append(MetricRow(
            cfg.experiment, eps, "absorbed_fraction",
            frac, _binomial_se(p0, cfg.n_paths), cfg.n_paths,
        ))
        if k == len(cfg.epsilon_ladder) - 1:
            atom_z_at_smallest = abs(frac - p0) / _binomial_se(p0, cfg.n_paths)

    complete = len(w1_series) == len(cfg.epsilon_ladder)
    verdicts = {
        "w1_strictly_decreasing": (
            complete and all(b < a for a, b in zip(w1_series, w1_series[1:]))
        ),
        # Total drop across the ladder must beat the summed per-rung errors.
        # The per-rung pairwise version is reported as a diagnostic only: at
        # n = 2e4 the empirical-W1 sampling floor (~2.3e-3 mean, ~7e-4 sd
        # for this law) exceeds the true gap of the last rung pair, so a
        # pairwise gate there measures the floor, not convergence.
        "w1_total_decrease_beyond_summed_se": (
            complete and w1_series[0] - w1_series[-1] > sum(se_series)
        ),
        "atom_within_3_sigma": (
            atom_z_at_smallest is not None and atom_z_at_smallest <= 3.0
        ),
    }
    if cfg.w1_max_at_smallest is not None:
        verdicts["w1_below_pilot_threshold"] = (
            complete and w1_series[-1] <= cfg.w1_max_at_smallest
        )
    diagnostics = {
        "atom_reference": p0,
        "atom_z_at_smallest": atom_z_at_smallest,
        "window_offsets": list(offsets),
        "reference_n": ref_n,
        "w1_pairwise_beyond_se": (
            complete and _monotone_beyond_se(w1_series, se_series)
        ),
    }
    return rows, verdicts, diagnostics, failures


def _run_theorem2_pathwise(
    cfg: ExperimentConfig, model: ModelSpec, law: LimitLaw
) -> tuple[list[MetricRow], dict, dict, list[str]]:
    offsets = np.linspace(0.0, cfg.t_horizon, _WINDOW_POINTS)
    c_values = sorted({cfg.c_split, *_C_PROBES})
    growth = np.exp(cfg.a * offsets)
    p0 = math.exp(-law.rate)

    rows: list[MetricRow] = []
    failures: list[str] = []
    med_series: list[float] = []
    med_se_series: list[float] = []
    atom_z_at_smallest: float | None = None
    sensitivity: list[dict] = []

    for k, eps in enumerate(cfg.epsilon_ladder):
        try:
            shift = _t_shift(cfg, eps)
            split_times = {c: (c / cfg.a) * math.log(1.0 / eps) for c in c_values}
            early = sorted(split_times.values())
            record = early + list(shift + offsets)
            sim_cfg = SimConfig(
                dt=cfg.step_size(eps), horizon=shift + cfg.t_horizon, seed=cfg.seed
            )
            ens = simulate_ensemble(
                model, eps, eps, sim_cfg, cfg.n_paths, record, threads=cfg.threads
            )

            def rescaled(c: float) -> Array:
                col = early.index(split_times[c])
                return np.exp(-cfg.a * split_times[c]) * ens.values[:, col] / eps

            w_hat = rescaled(cfg.c_split)
            window = ens.values[:, len(early):]
            args = (w_hat[:, None] * growth[None, :]).ravel()
            predicted = flow.limit_profile_batch(model, args).reshape(window.shape)
            sup_err = np.max(np.abs(window - predicted), axis=1)
        except Exception as exc:
            failures.append(f"epsilon={eps:g}: {exc}")
            continue

        boot = derived_generator(cfg.seed, TAG_BOOTSTRAP, k)
        med = float(np.median(sup_err))
        med_se = _bootstrap_stat_stderr(sup_err, np.median, boot, cfg.n_boot)
        rows.append(MetricRow(cfg.experiment, eps, "median_sup", med, med_se, cfg.n_paths))
        med_series.append(med)
        med_se_series.append(med_se)
        rows.append(MetricRow(
            cfg.experiment, eps, "q90_sup",
            float(np.quantile(sup_err, 0.9)),
            _bootstrap_stat_stderr(sup_err, lambda s: np.quantile(s, 0.9), boot, cfg.n_boot),
            cfg.n_paths,
        ))
        mean_sup, mean_sup_se = _mean_with_se(sup_err)
        rows.append(MetricRow(
            cfg.experiment, eps, "mean_sup", mean_sup, mean_sup_se, cfg.n_paths
        ))

        wh_mean, wh_se = _mean_with_se(w_hat)
        rows.append(MetricRow(
            cfg.experiment, eps, "w_hat_mean", wh_mean, wh_se, cfg.n_paths
        ))
        # The rescaled estimate carries a deterministic drift deficit of
        # order eps^(1-c); the normalized bias should be ladder-stable.
        power = eps ** (1.0 - cfg.c_split)
        rows.append(MetricRow(
            cfg.experiment, eps, "w_hat_bias_over_eps_power",
            (1.0 - wh_mean) / power, wh_se / power, cfg.n_paths,
        ))

        frac = float(np.mean(window[:, -1] == 0.0))
        rows.append(MetricRow(
            cfg.experiment, eps, "absorbed_fraction",
            frac, _binomial_se(p0, cfg.n_paths), cfg.n_paths,
        ))
        if k == len(cfg.epsilon_ladder) - 1:
            atom_z_at_smallest = abs(frac - p0) / _binomial_se(p0, cfg.n_paths)
            for c in c_values:
                wc = rescaled(c)
                mean_c, se_c = _mean_with_se(wc)
                sensitivity.append({
                    "c": c,
                    "epsilon": eps,
                    "w_hat_mean": mean_c,
                    "w_hat_stderr": se_c,
                    "w1_t0_extrapolation": wasserstein1(
                        flow.limit_profile_batch(model, wc), window[:, 0]
                    ),
                })

    verdicts = {
        "median_sup_monotone_beyond_se": (
            len(med_series) == len(cfg.epsilon_ladder)
            and _monotone_beyond_se(med_series, med_se_series)
        ),
        "atom_within_3_sigma": (
            atom_z_at_smallest is not None and atom_z_at_smallest <= 3.0
        ),
    }
    diagnostics = {
        "atom_reference": p0,
        "atom_z_at_smallest": atom_z_at_smallest,
        "c_sensitivity": sensitivity,
        "window_points": _WINDOW_POINTS,
    }
    return rows, verdicts, diagnostics, failures


def _run_theorem1_fluid(
    cfg: ExperimentConfig, model: ModelSpec, law: LimitLaw
) -> tuple[list[MetricRow], dict, dict, list[str]]:
    if not cfg.x0 <= model.state_upper:
        raise ValueError(f"x0={cfg.x0} outside the state space")
    rows: list[MetricRow] = []
    failures: list[str] = []
    med_series: list[float] = []
    med_se_series: list[float] = []
    eps_ok: list[float] = []

    for k, eps in enumerate(cfg.epsilon_ladder):
        try:
            dt = cfg.step_size(eps)
            sim_cfg = SimConfig(dt=dt, horizon=cfg.t_horizon, seed=cfg.seed)
            grid = np.arange(sim_cfg.n_steps + 1) * dt
            reference = flow.flow_map_grid(model, cfg.x0, grid)
            ens = simulate_ensemble(
                model, eps, cfg.x0, sim_cfg, cfg.n_paths, [cfg.t_horizon],
                reference=reference, threads=cfg.threads,
            )
        except Exception as exc:
            failures.append(f"epsilon={eps:g}: {exc}")
            continue

        sup_err = ens.sup_error
        boot = derived_generator(cfg.seed, TAG_BOOTSTRAP, k)
        med = float(np.median(sup_err))
        med_se = _bootstrap_stat_stderr(sup_err, np.median, boot, cfg.n_boot)
        rows.append(MetricRow(cfg.experiment, eps, "median_sup", med, med_se, cfg.n_paths))
        rows.append(MetricRow(
            cfg.experiment, eps, "q90_sup",
            float(np.quantile(sup_err, 0.9)),
            _bootstrap_stat_stderr(sup_err, lambda s: np.quantile(s, 0.9), boot, cfg.n_boot),
            cfg.n_paths,
        ))
        mean_sup, mean_sup_se = _mean_with_se(sup_err)
        rows.append(MetricRow(
            cfg.experiment, eps, "mean_sup", mean_sup, mean_sup_se, cfg.n_paths
        ))
        med_series.append(med)
        med_se_series.append(med_se)
        eps_ok.append(eps)

    slope = None
    if len(med_series) >= 2 and all(m > 0.0 for m in med_series):
        slope = float(np.polyfit(np.log(eps_ok), np.log(med_series), 1)[0])
        rows.append(MetricRow(
            cfg.experiment, None, "median_sup_loglog_slope",
            slope, None, len(eps_ok),
        ))

    verdicts = {
        "median_sup_monotone_beyond_se": (
            len(med_series) == len(cfg.epsilon_ladder)
            and _monotone_beyond_se(med_series, med_se_series)
        ),
    }
    diagnostics = {
        # Soft expectation: the noise enters at amplitude sqrt(eps), so the
        # fitted slope should sit near one half.  Reported, never gated.
        "loglog_slope": slope,
        "slope_expected_band": list(_SLOPE_BAND),
        "slope_in_expected_band": (
            None if slope is None else bool(_SLOPE_BAND[0] <= slope <= _SLOPE_BAND[1])
        ),
    }
    return rows, verdicts, diagnostics, failures


def _run_lemma_l1(
    cfg: ExperimentConfig, model: ModelSpec, law: LimitLaw
) -> tuple[list[MetricRow], dict, dict, list[str]]:
    grid = np.asarray(cfg.t_grid, dtype=float)
    # The monotonicity gate applies at t = 1 when the grid contains it,
    # otherwise at the final grid time.
    matches = np.nonzero(np.isclose(grid, 1.0))[0]
    gate_index = int(matches[0]) if matches.size else len(grid) - 1
    discount = np.exp(-cfg.a * grid)

    rows: list[MetricRow] = []
    failures: list[str] = []
    gate_series: list[float] = []
    gate_se_series: list[float] = []
    martingale_ok = True
    zero_start_ok = True

    for eps in cfg.epsilon_ladder:
        try:
            sim_cfg = SimConfig(
                dt=cfg.step_size(eps), horizon=float(grid[-1]), seed=cfg.seed
            )
            x_ens, y_ens = simulate_coupled_ensemble(
                model, eps, sim_cfg, cfg.n_paths, grid, threads=cfg.threads
            )
        except Exception as exc:
            failures.append(f"epsilon={eps:g}: {exc}")
            continue

        gaps = np.abs(x_ens.values / eps - y_ens.values)
        discounted = discount[None, :] * y_ens.values
        for j, t in enumerate(grid):
            l1, l1_se = _mean_with_se(gaps[:, j])
            rows.append(MetricRow(
                cfg.experiment, eps, f"l1_error_t{t:g}", l1, l1_se, cfg.n_paths
            ))
            m, m_se = _mean_with_se(discounted[:, j])
            rows.append(MetricRow(
                cfg.experiment, eps, f"martingale_mean_t{t:g}", m, m_se, cfg.n_paths
            ))
            if j > 0 and abs(m - 1.0) > 3.0 * m_se:
                martingale_ok = False
            if t == 0.0 and l1 != 0.0:
                zero_start_ok = False
            if j == gate_index:
                gate_series.append(l1)
                gate_se_series.append(l1_se)

    verdicts = {
        "l1_monotone_beyond_se": (
            len(gate_series) == len(cfg.epsilon_ladder)
            and _monotone_beyond_se(gate_series, gate_se_series)
        ),
        "martingale_within_3_sigma": martingale_ok,
    }
    if 0.0 in cfg.t_grid:
        verdicts["exact_zero_at_t0"] = zero_start_ok
    diagnostics = {"gate_time": float(grid[gate_index])}
    return rows, verdicts, diagnostics, failures


_RUNNERS = {
    "theorem1_fluid": _run_theorem1_fluid,
    "theorem2_distributional": _run_theorem2_distributional,
    "theorem2_pathwise": _run_theorem2_pathwise,
    "lemma_l1": _run_lemma_l1,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the named experiment and assemble its report.

    Per-epsilon simulation failures are recorded (the report is flagged as
    failed and partial) rather than raised; configuration errors raise.
    """
    start = time.perf_counter()
    model = builtin_model(cfg.model, cfg.a)
    law = LimitLaw(a=cfg.a, b=cfg.b)
    rows, verdicts, diagnostics, failures = _RUNNERS[cfg.experiment](cfg, model, law)
    passed = bool(all(verdicts.values())) and not failures
    return ExperimentReport(
        experiment=cfg.experiment,
        config=cfg.to_dict(),
        config_hash=cfg.config_hash(),
        passed=passed,
        verdicts=verdicts,
        metrics=tuple(rows),
        diagnostics=diagnostics,
        failures=tuple(failures),
        wall_clock_seconds=time.perf_counter() - start,
    )
