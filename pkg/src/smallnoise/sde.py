"""Stochastic path engine: small-noise paths, a coupled linear companion
process on shared Brownian increments, and exact endpoint sampling for the
linear process.

Scheme: full-truncation Euler.  The proposal for the next state is
x + f(x)*dt + sqrt(eps*sigma(x))*sqrt(dt)*xi with sigma evaluated on the
clamped state and negative sigma floored at 0; a proposal <= 0 absorbs the
path at exactly 0 for good (no bridge correction for intra-step exits, a
documented bias that is second order for the asymptotics tested here).
Proposals are otherwise clamped into [0, state_upper].

Randomness: path i of an ensemble draws from the counter-based stream
(seed, tag, i), so results are bitwise independent of chunking and worker
count.  Chunk size and slab length below are pure performance knobs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import (
    TAG_COUPLED_PAIR,
    TAG_FELLER_ENDPOINT,
    TAG_PATH_ENSEMBLE,
    derived_generator,
)
from .limitlaw import sample_compound_poisson
from .models import ModelSpec

Array = np.ndarray

__all__ = [
    "SimConfig",
    "Path",
    "CoupledPair",
    "PathEnsemble",
    "SimulationError",
    "simulate_X",
    "simulate_ensemble",
    "simulate_coupled",
    "simulate_coupled_ensemble",
    "exact_feller_endpoint",
]

_SCHEMES = ("full_truncation_euler",)
_CHUNK = 4096  # paths stepped together as one vector
_SLAB = 1024  # steps of noise generated per path per refill


class SimulationError(RuntimeError):
    """Non-finite state during stepping; carries the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    """Stepping parameters. The time grid is k*dt for k = 0..round(horizon/dt)."""

    dt: float
    horizon: float
    seed: int
    scheme: str = "full_truncation_euler"
    record_stride: int = 1

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.dt > self.horizon:
            raise ValueError(f"dt={self.dt} exceeds horizon={self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        if not isinstance(self.record_stride, int) or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


@dataclass(frozen=True)
class Path:
    """One recorded trajectory. After absorbed_at every value is exactly 0."""

    times: Array
    values: Array
    absorbed_at: float | None
    epsilon: float


@dataclass(frozen=True)
class CoupledPair:
    """Nonlinear path and its linear companion, driven by identical draws."""

    x_path: Path
    y_path: Path
    seed: int


@dataclass(frozen=True)
class PathEnsemble:
    """States of n paths at the recorded times (one row per path).

    times are the actual grid times after rounding each requested record
    time to the nearest step.  absorbed_at is nan for paths never absorbed.
    sup_error, when present, is the per-path running sup of |state - ref|
    over every step against a shared dense reference curve.
    """

    epsilon: float
    x0: float
    times: Array
    values: Array
    absorbed_at: Array
    sup_error: Array | None = None

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class _LinearCompanion:
    # dY = growth*Y dt + sqrt(slope*Y) dB from Y0 = 1, on the shared draws.
    growth: float
    slope: float


def _record_steps(times: Array, dt: float, n_steps: int) -> Array:
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("record_times must be nonempty")
    if np.any(times < 0.0) or np.any(np.diff(times) < 0.0):
        raise ValueError("record_times must be nondecreasing and nonnegative")
    steps = np.rint(times / dt).astype(np.int64)
    if steps[-1] > n_steps:
        raise ValueError(
            f"record time {times[-1]:g} lies beyond the horizon grid "
            f"({n_steps} steps of dt={dt:g})"
        )
    return steps


def _step_chunk(
    model: ModelSpec,
    epsilon: float,
    x0: float,
    dt: float,
    n_steps: int,
    gens: list[np.random.Generator],
    rec_steps: Array,
    reference: Array | None,
    zero_noise: bool,
    companion: _LinearCompanion | None,
) -> tuple[Array, Array, Array | None, Array | None, Array | None]:
    """Advance one chunk of paths through the full grid.

    Returns (recorded x, absorbed-time x, running sup, recorded y,
    absorbed-time y); the y entries are None without a companion.
    """
    width = len(gens)
    n_rec = len(rec_steps)
    coef_x = 0.0 if zero_noise else math.sqrt(epsilon * dt)

    x = np.full(width, float(x0))
    alive_x = np.full(width, x0 > 0.0)
    dead_time_x = np.where(alive_x, np.nan, 0.0)
    rec_x = np.empty((width, n_rec))

    if companion is not None:
        coef_y = 0.0 if zero_noise else math.sqrt(companion.slope * dt)
        y = np.ones(width)
        alive_y = np.ones(width, dtype=bool)
        dead_time_y = np.full(width, np.nan)
        rec_y = np.empty((width, n_rec))
    else:
        rec_y = None
        dead_time_y = None

    sup = np.abs(x - reference[0]) if reference is not None else None

    ptr = 0
    while ptr < n_rec and rec_steps[ptr] == 0:
        rec_x[:, ptr] = x
        if companion is not None:
            rec_y[:, ptr] = y
        ptr += 1

    noise = np.empty((0, width))
    slab_start = 0
    for k in range(n_steps):
        j = k - slab_start
        if j >= noise.shape[0]:
            slab_start = k
            fill = min(_SLAB, n_steps - k)
            buf = np.empty((width, fill))
            for i, g in enumerate(gens):
                buf[i] = g.standard_normal(fill)
            noise = np.ascontiguousarray(buf.T)
            j = 0
        xi = noise[j]

        prop = x + model.drift(x) * dt
        if coef_x != 0.0:
            prop = prop + coef_x * np.sqrt(np.maximum(model.diffusion(x), 0.0)) * xi
        if not np.all(np.isfinite(prop)):
            raise SimulationError("non-finite state in path update", k + 1)
        newly = alive_x & (prop <= 0.0)
        if np.any(newly):
            dead_time_x[newly] = (k + 1) * dt
            alive_x = alive_x & ~newly
        x = np.where(alive_x, np.clip(prop, 0.0, model.state_upper), 0.0)

        if companion is not None:
            prop_y = y + companion.growth * y * dt
            if coef_y != 0.0:
                prop_y = prop_y + coef_y * np.sqrt(np.maximum(y, 0.0)) * xi
            if not np.all(np.isfinite(prop_y)):
                raise SimulationError("non-finite state in companion update", k + 1)
            newly_y = alive_y & (prop_y <= 0.0)
            if np.any(newly_y):
                dead_time_y[newly_y] = (k + 1) * dt
                alive_y = alive_y & ~newly_y
            y = np.where(alive_y, np.maximum(prop_y, 0.0), 0.0)

        if sup is not None:
            np.maximum(sup, np.abs(x - reference[k + 1]), out=sup)

        while ptr < n_rec and rec_steps[ptr] == k + 1:
            rec_x[:, ptr] = x
            if companion is not None:
                rec_y[:, ptr] = y
            ptr += 1

    return rec_x, dead_time_x, sup, rec_y, dead_time_y


def _run_ensemble(
    model: ModelSpec,
    epsilon: float,
    x0: float,
    cfg: SimConfig,
    n_paths: int,
    record_times: Array,
    reference: Array | None,
    zero_noise: bool,
    tag: int,
    threads: int,
    companion: _LinearCompanion | None,
) -> tuple[PathEnsemble, PathEnsemble | None]:
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    if not 0.0 <= x0 <= model.state_upper:
        raise ValueError(f"x0={x0} outside [0, {model.state_upper}]")
    if n_paths < 1:
        raise ValueError(f"n_paths must be at least 1, got {n_paths}")
    n_steps = cfg.n_steps
    rec_steps = _record_steps(record_times, cfg.dt, n_steps)
    if reference is not None:
        reference = np.asarray(reference, dtype=float)
        if reference.shape != (n_steps + 1,):
            raise ValueError(
                f"reference must hold one value per grid time "
                f"({n_steps + 1},), got shape {reference.shape}"
            )

    n_rec = len(rec_steps)
    values_x = np.empty((n_paths, n_rec))
    absorbed_x = np.empty(n_paths)
    sup_out = np.empty(n_paths) if reference is not None else None
    values_y = np.empty((n_paths, n_rec)) if companion is not None else None
    absorbed_y = np.empty(n_paths) if companion is not None else None

    def work(start: int) -> None:
        stop = min(start + _CHUNK, n_paths)
        gens = [derived_generator(cfg.seed, tag, i) for i in range(start, stop)]
        rx, dx, sup, ry, dy = _step_chunk(
            model, epsilon, x0, cfg.dt, n_steps, gens, rec_steps,
            reference, zero_noise, companion,
        )
        values_x[start:stop] = rx
        absorbed_x[start:stop] = dx
        if sup_out is not None:
            sup_out[start:stop] = sup
        if companion is not None:
            values_y[start:stop] = ry
            absorbed_y[start:stop] = dy

    starts = list(range(0, n_paths, _CHUNK))
    if threads <= 1 or len(starts) == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for future in [pool.submit(work, s) for s in starts]:
                future.result()

    grid_times = rec_steps * cfg.dt
    x_ens = PathEnsemble(
        epsilon=epsilon, x0=x0, times=grid_times, values=values_x,
        absorbed_at=absorbed_x, sup_error=sup_out,
    )
    if companion is None:
        return x_ens, None
    y_ens = PathEnsemble(
        epsilon=epsilon, x0=1.0, times=grid_times, values=values_y,
        absorbed_at=absorbed_y, sup_error=None,
    )
    return x_ens, y_ens


def simulate_ensemble(
    model: ModelSpec,
    epsilon: float,
    x0: float,
    cfg: SimConfig,
    n_paths: int,
    record_times: Array,
    reference: Array | None = None,
    zero_noise: bool = False,
    threads: int = 1,
) -> PathEnsemble:
    """n_paths independent paths recorded at the given times.

    Pass reference (one value per grid time) to also accumulate each path's
    sup deviation from it over every step, not just the recorded ones.
    """
    ens, _ = _run_ensemble(
        model, epsilon, x0, cfg, n_paths, record_times, reference,
        zero_noise, TAG_PATH_ENSEMBLE, threads, companion=None,
    )
    return ens


def simulate_X(
    model: ModelSpec,
    epsilon: float,
    x0: float,
    cfg: SimConfig,
    zero_noise: bool = False,
) -> Path:
    """One path on the stride-thinned grid (endpoint always included)."""
    n_steps = cfg.n_steps
    steps = np.arange(0, n_steps + 1, cfg.record_stride, dtype=np.int64)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    ens, _ = _run_ensemble(
        model, epsilon, x0, cfg, 1, steps * cfg.dt, None,
        zero_noise, TAG_PATH_ENSEMBLE, 1, companion=None,
    )
    dead = float(ens.absorbed_at[0])
    return Path(
        times=ens.times,
        values=ens.values[0],
        absorbed_at=None if math.isnan(dead) else dead,
        epsilon=epsilon,
    )


def simulate_coupled_ensemble(
    model: ModelSpec,
    epsilon: float,
    cfg: SimConfig,
    n_pairs: int,
    record_times: Array,
    threads: int = 1,
) -> tuple[PathEnsemble, PathEnsemble]:
    """Pairs (nonlinear from x0=epsilon, linear companion from 1).

    Pair i feeds both processes the identical normal draws from stream
    (seed, coupled-tag, i); the companion runs dY = a*Y dt + sqrt(b*Y) dB.
    """
    companion = _LinearCompanion(growth=model.a, slope=model.b)
    x_ens, y_ens = _run_ensemble(
        model, epsilon, float(epsilon), cfg, n_pairs, record_times, None,
        False, TAG_COUPLED_PAIR, threads, companion=companion,
    )
    return x_ens, y_ens


def simulate_coupled(model: ModelSpec, epsilon: float, cfg: SimConfig) -> CoupledPair:
    """One coupled pair on the stride-thinned grid."""
    n_steps = cfg.n_steps
    steps = np.arange(0, n_steps + 1, cfg.record_stride, dtype=np.int64)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    companion = _LinearCompanion(growth=model.a, slope=model.b)
    x_ens, y_ens = _run_ensemble(
        model, epsilon, float(epsilon), cfg, 1, steps * cfg.dt, None,
        False, TAG_COUPLED_PAIR, 1, companion=companion,
    )

    def to_path(ens: PathEnsemble) -> Path:
        dead = float(ens.absorbed_at[0])
        return Path(
            times=ens.times,
            values=ens.values[0],
            absorbed_at=None if math.isnan(dead) else dead,
            epsilon=epsilon,
        )

    return CoupledPair(x_path=to_path(x_ens), y_path=to_path(y_ens), seed=cfg.seed)


def exact_feller_endpoint(a: float, b: float, t: float, n: int, seed: int) -> Array:
    """Exact draws of the discounted linear process exp(-a*t)*Y(t), Y(0)=1.

    The law is compound Poisson with both the count rate and the
    exponential rate equal to c_t = 2a / (b*(1 - exp(-a*t))): the
    time-t Laplace transform of the limit-law family evaluated with its
    argument discounted by exp(-a*t).  Mean is exactly 1 at every t.
    """
    if not (a > 0.0 and b > 0.0 and t > 0.0):
        raise ValueError(f"a, b, t must all be positive, got a={a}, b={b}, t={t}")
    rate = 2.0 * a / (b * -math.expm1(-a * t))
    return sample_compound_poisson(rate, n, seed, TAG_FELLER_ENDPOINT)
