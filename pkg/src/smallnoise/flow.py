"""Deterministic flow machinery for drifts with an unstable origin.

Everything here is organized around the scalar autonomous ODE
dx/dt = f(x) on (0, drift_root) and one change of coordinate:

``flow_time`` (strictly increasing, since its derivative is 1/f > 0)
measures progress along the flow in time units,

    flow_time(x) = integral_0^x (1/f(u) - 1/(a*u)) du + log(x)/a,
    flow_time(flow_map(t, x)) = flow_time(x) + t.

The integrand extends continuously to u = 0 (write it as
(a*u - f(u)) / (a*u*f(u)) and expand f near 0), so the quadrature is
proper.  ``flow_time`` is a bijection from (0, drift_root) onto the real
line; its inverse is computed by monotone bracketing plus Brent's method.

``limit_profile`` is the limit of the rescaled flow,

    limit_profile(x) = lim_{t->inf} flow_map(t, x * exp(-a*t))
                     = flow_time_inverse(log(x)/a),

which maps [0, inf) onto [0, drift_root) and sends the multiplicative
scale of the linear regime to a state of the nonlinear flow.  Near 0 the
time coordinate degenerates to log(x)/a, so limit_profile(x) = x + O(x^2).

Floating-point ceiling: inverting flow_time at large positive y needs
states within ~exp(-a*y) of a finite drift_root; one ULP there moves the
time coordinate by about eps * exp(a*y) / a.  Round-trip accuracy of 1e-9
therefore holds only while a*y is below roughly 16, and degrades rapidly
beyond a*y of about 30.  Large negative y is benign (relative spacing is
uniform near 0).
"""

from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .models import ModelSpec

Array = np.ndarray

__all__ = [
    "FlowSolverConfig",
    "FlowSolverError",
    "PrecisionError",
    "FlowTable",
    "ProfileLimitResult",
    "flow_map",
    "flow_map_grid",
    "flow_time",
    "flow_time_inverse",
    "limit_profile",
    "limit_profile_batch",
    "limit_profile_via_flow",
    "default_profile_schedule",
]

# Below this argument the profile equals its argument to O(x^2); evaluating
# the full inversion there would push the bracket toward the floating-point
# floor for no gain in accuracy.
TINY_PROFILE_ARG = 1e-10

# Quadrature targets for flow_time; the round trip is self-consistent, so
# these only need to beat the closed-form comparison tolerances.
_QUAD_ABS = 1e-12
_QUAD_REL = 1e-12
_QUAD_LIMIT = 300

_PROFILE_CONVERGENCE_TOL = 1e-9


class FlowSolverError(RuntimeError):
    """ODE integration failed; carries the requested time and start state."""

    def __init__(self, message: str, t: float, x: float):
        super().__init__(f"{message} (t={t:g}, x={x:g})")
        self.t = t
        self.x = x


class PrecisionError(RuntimeError):
    """A bracket or evaluation ran off the end of double precision."""


@dataclass(frozen=True)
class FlowSolverConfig:
    """Tolerances for the adaptive embedded Runge-Kutta integrator."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    method: str = "DOP853"

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0.0:
            raise ValueError("max_step must be positive")
        if self.method not in ("RK45", "DOP853"):
            raise ValueError(f"method must be RK45 or DOP853, got {self.method!r}")


DEFAULT_SOLVER = FlowSolverConfig()


def _integrate(model: ModelSpec, x0: float, t_eval: Array, cfg: FlowSolverConfig) -> Array:
    """Solve dx/dt = f(x) from x0 and return states at sorted times t_eval."""
    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(t_eval[-1])
    if t_end == 0.0 or float(model.drift_at(x0)) == 0.0:
        # At a fixed point of the drift the trajectory is exactly constant.
        return np.full(t_eval.shape, float(x0))

    # Scale the absolute tolerance down to the start state: the solution can
    # ramp up from far below abs_tol, and only relative control keeps the
    # exponential phase accurate.
    atol = min(cfg.abs_tol, 1e-2 * cfg.rel_tol * abs(x0)) if x0 != 0.0 else cfg.abs_tol
    sol = solve_ivp(
        lambda _t, y: model.drift_at(y),
        (0.0, t_end),
        [float(x0)],
        method=cfg.method,
        rtol=cfg.rel_tol,
        atol=max(atol, 5e-324),
        max_step=cfg.max_step,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        raise FlowSolverError(f"flow integration failed: {sol.message}", t_end, x0)
    return np.clip(sol.y[0], 0.0, model.state_upper)


def flow_map(
    model: ModelSpec, t: float, x: float, cfg: FlowSolverConfig | None = None
) -> float:
    """State reached at time t >= 0 by the drift ODE started at x."""
    cfg = cfg or DEFAULT_SOLVER
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if not 0.0 <= x <= model.state_upper:
        raise ValueError(f"x={x} outside [0, {model.state_upper}]")
    if t == 0.0:
        return float(x)
    return float(_integrate(model, x, np.array([t]), cfg)[0])


def flow_map_grid(
    model: ModelSpec,
    x0: float,
    times: Array,
    cfg: FlowSolverConfig | None = None,
) -> Array:
    """Flow from x0 evaluated on a nondecreasing time grid (one solve)."""
    cfg = cfg or DEFAULT_SOLVER
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty(0)
    if times[0] < 0.0 or np.any(np.diff(times) < 0.0):
        raise ValueError("times must be nondecreasing and nonnegative")
    if not 0.0 <= x0 <= model.state_upper:
        raise ValueError(f"x0={x0} outside [0, {model.state_upper}]")
    return _integrate(model, x0, times, cfg)


def _time_scale(model: ModelSpec) -> float:
    return model.drift_root if math.isfinite(model.drift_root) else 1.0


def _guard_threshold(model: ModelSpec) -> float:
    return 1e-8 * _time_scale(model)


def _integrand_limit_at_zero(model: ModelSpec) -> float:
    # (a*u - f(u)) / (a*u*f(u)) -> -f''(0)/(2 a^2); second difference of f.
    h = 1e-5 * _time_scale(model)
    f2 = (float(model.drift_at(2.0 * h)) - 2.0 * float(model.drift_at(h))) / (h * h)
    return -f2 / (2.0 * model.a * model.a)


def _quad_checked(func, lo: float, hi: float, what: str) -> float:
    if lo == hi:
        return 0.0
    out = quad(
        func, lo, hi, epsabs=_QUAD_ABS, epsrel=_QUAD_REL, limit=_QUAD_LIMIT, full_output=1
    )
    value, abserr = out[0], out[1]
    if abserr > 1e-9 * max(1.0, abs(value)):
        raise PrecisionError(
            f"{what}: quadrature error estimate {abserr:g} over [{lo:g}, {hi:g}]"
        )
    return float(value)


def flow_time(model: ModelSpec, x: float, cfg: FlowSolverConfig | None = None) -> float:
    """Time-like coordinate of the flow at x, strictly increasing in x.

    Evaluated as a proper quadrature of the bounded integrand
    (a*u - f(u)) / (a*u*f(u)) plus log(x)/a; below a threshold u0 the
    integrand is replaced by its limit at zero (the difference is O(u0^2)).
    """
    del cfg  # quadrature-based; accepted for interface symmetry
    if not 0.0 < x < model.drift_root:
        raise ValueError(f"x={x} outside (0, {model.drift_root})")
    a = model.a
    u0 = _guard_threshold(model)
    g0 = _integrand_limit_at_zero(model)

    def integrand(u: float) -> float:
        fu = float(model.drift_at(u))
        return (a * u - fu) / (a * u * fu)

    if x <= u0:
        return g0 * x + math.log(x) / a
    tail = _quad_checked(integrand, u0, x, "flow_time")
    return g0 * u0 + tail + math.log(x) / a


@dataclass(frozen=True)
class FlowTable:
    """Monotone table of (x, flow_time(x)) pairs for one model.

    Serves as a bracketing accelerator for inversion: the time coordinate
    between an anchor node and a nearby state is a short integral of 1/f,
    which is much cheaper than the full quadrature from zero.
    """

    model: ModelSpec
    xs: Array
    values: Array
    quad_tol: float = _QUAD_ABS

    def __post_init__(self) -> None:
        if np.any(np.diff(self.xs) <= 0.0) or np.any(np.diff(self.values) <= 0.0):
            raise PrecisionError("flow table is not strictly increasing")

    @classmethod
    def build(
        cls,
        model: ModelSpec,
        cfg: FlowSolverConfig | None = None,
        n_points: int = 129,
    ) -> "FlowTable":
        root = model.drift_root
        if math.isfinite(root):
            fracs = np.geomspace(1e-6, 0.5, n_points // 2 + 1)
            xs = np.unique(np.concatenate([root * fracs, root * (1.0 - fracs)]))
        else:
            xs = np.geomspace(1e-6, 1e6, n_points)
        values = np.empty_like(xs)
        values[0] = flow_time(model, float(xs[0]), cfg)

        def inv_f(u: float) -> float:
            return 1.0 / float(model.drift_at(u))

        for j in range(1, len(xs)):
            values[j] = values[j - 1] + _quad_checked(
                inv_f, float(xs[j - 1]), float(xs[j]), "flow_time increment"
            )
        return cls(model=model, xs=xs, values=values)

    def time_at(self, x: float) -> float:
        """flow_time(x) via the nearest anchor node plus a short integral."""
        j = int(np.clip(np.searchsorted(self.xs, x), 1, len(self.xs) - 1))
        if abs(x - self.xs[j - 1]) < abs(x - self.xs[j]):
            j -= 1
        anchor_x, anchor_v = float(self.xs[j]), float(self.values[j])
        lo, hi = min(anchor_x, x), max(anchor_x, x)
        seg = _quad_checked(
            lambda u: 1.0 / float(self.model.drift_at(u)), lo, hi, "flow_time segment"
        )
        return anchor_v + seg if x >= anchor_x else anchor_v - seg

    def bracket(self, y: float) -> tuple[float, float] | None:
        """Adjacent table nodes enclosing flow_time = y, if y is in range."""
        if not self.values[0] <= y <= self.values[-1]:
            return None
        j = int(np.searchsorted(self.values, y))
        j = min(max(j, 1), len(self.xs) - 1)
        return float(self.xs[j - 1]), float(self.xs[j])


_table_cache: "weakref.WeakKeyDictionary[ModelSpec, FlowTable]" = weakref.WeakKeyDictionary()
_table_lock = threading.Lock()


def _shared_table(model: ModelSpec, cfg: FlowSolverConfig | None) -> FlowTable:
    table = _table_cache.get(model)
    if table is None:
        with _table_lock:
            table = _table_cache.get(model)
            if table is None:
                table = FlowTable.build(model, cfg)
                _table_cache[model] = table
    return table


def flow_time_inverse(
    model: ModelSpec,
    y: float,
    cfg: FlowSolverConfig | None = None,
    table: FlowTable | None = None,
) -> float:
    """The unique x in (0, drift_root) with flow_time(x) = y.

    Monotone bracketing (geometric expansion toward the endpoints when the
    initial bracket does not enclose y) followed by Brent's method.  See the
    module docstring for the double-precision ceiling at large positive y.
    """
    if not math.isfinite(y):
        raise ValueError(f"y must be finite, got {y}")
    table = table if table is not None else _shared_table(model, cfg)
    root = model.drift_root

    def resid(x: float) -> float:
        return table.time_at(x) - y

    node = table.bracket(y)
    if node is not None:
        lo, hi = node
    elif y < table.values[0]:
        hi = float(table.xs[0])
        lo = hi / 16.0
        while resid(lo) > 0.0:
            lo /= 16.0
            if lo < 1e-300:
                raise PrecisionError(f"bracket toward 0 exhausted for y={y:g}")
    else:
        lo = float(table.xs[-1])
        if math.isfinite(root):
            gap = root - lo
            while True:
                gap /= 16.0
                if gap <= root * 4e-16:
                    raise PrecisionError(
                        f"bracket toward drift_root exhausted for y={y:g}; "
                        "the inverse is closer to the root than double spacing"
                    )
                hi = root - gap
                if resid(hi) >= 0.0:
                    break
        else:
            hi = lo * 16.0
            while resid(hi) < 0.0:
                hi *= 16.0
                if hi > 1e300:
                    raise PrecisionError(f"bracket toward infinity exhausted for y={y:g}")

    result = brentq(resid, lo, hi, xtol=1e-30, rtol=1e-14, maxiter=300)
    return float(result)


def limit_profile(
    model: ModelSpec,
    x: float,
    cfg: FlowSolverConfig | None = None,
    table: FlowTable | None = None,
) -> float:
    """Limit of the rescaled flow: lim_t flow_map(t, x*exp(-a*t)).

    Equals flow_time_inverse(log(x)/a) for x > 0 and is exactly 0 at 0.
    """
    if x < 0.0 or not math.isfinite(x):
        raise ValueError(f"x must be finite and nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if x <= TINY_PROFILE_ARG:
        # The time coordinate degenerates to log(x)/a here, so the profile
        # equals its argument to O(x^2) -- far below every tolerance in use.
        return float(x)
    return flow_time_inverse(model, math.log(x) / model.a, cfg, table)


def limit_profile_batch(
    model: ModelSpec,
    xs: Array,
    cfg: FlowSolverConfig | None = None,
) -> Array:
    """Vectorized limit_profile.

    Uses the conjugacy flow_time(flow_map(t, x)) = flow_time(x) + t: the
    inverse time coordinate advances along the flow itself, so after one
    scalar inversion at the smallest argument a single ODE solve evaluates
    the whole (sorted, deduplicated) batch.  Agrees with the scalar route
    to solver tolerance.
    """
    cfg = cfg or DEFAULT_SOLVER
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return np.empty(0)
    if np.any(~np.isfinite(xs)) or np.any(xs < 0.0):
        raise ValueError("profile arguments must be finite and nonnegative")

    out = np.array(xs, dtype=float, copy=True)  # exact for zeros and tiny args
    big = xs > TINY_PROFILE_ARG
    if not np.any(big):
        return out

    ys = np.log(xs[big]) / model.a
    uniq, inverse = np.unique(ys, return_inverse=True)
    anchor = flow_time_inverse(model, float(uniq[0]), cfg)
    values = _integrate(model, anchor, uniq - uniq[0], cfg)
    out[big] = np.clip(values, 0.0, model.state_upper)[inverse]
    return out


def default_profile_schedule(a: float, n: int = 30) -> Array:
    """Times t_k = (k/a)*log(10): the rescaled argument shrinks 10x per step."""
    return (np.arange(1, n + 1) / a) * math.log(10.0)


@dataclass(frozen=True)
class ProfileLimitResult:
    """Outcome of the rescaled-flow iteration toward the profile limit."""

    value: float
    times: tuple[float, ...]
    diffs: tuple[float, ...]
    converged: bool


def limit_profile_via_flow(
    model: ModelSpec,
    x: float,
    t_schedule: Array | None = None,
    cfg: FlowSolverConfig | None = None,
) -> ProfileLimitResult:
    """Profile limit computed directly as flow_map(t, x*exp(-a*t)).

    Walks the schedule until two successive values agree to 1e-9 (declared
    convergence; stops early) or the schedule is exhausted (converged is
    False, the trace is still returned).
    """
    cfg = cfg or DEFAULT_SOLVER
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"x must be positive and finite, got {x}")
    schedule = (
        default_profile_schedule(model.a)
        if t_schedule is None
        else np.asarray(t_schedule, dtype=float)
    )
    if schedule.size == 0 or np.any(np.diff(schedule) <= 0.0):
        raise ValueError("t_schedule must be nonempty and increasing")
    # The seed x*exp(-a*t) must sit strictly inside the state space; with an
    # increasing schedule it suffices to check the earliest entry.
    if x * math.exp(-model.a * float(schedule[0])) >= model.state_upper:
        raise ValueError(
            "earliest schedule time is too small: the rescaled start "
            f"{x * math.exp(-model.a * float(schedule[0])):.6g} does not lie "
            f"below the stable root {model.state_upper:g}"
        )

    times: list[float] = []
    diffs: list[float] = []
    value = math.nan
    converged = False
    for t in schedule:
        t = float(t)
        start = x * math.exp(-model.a * t)
        current = flow_map(model, t, start, cfg)
        if times:
            diffs.append(abs(current - value))
        times.append(t)
        value = current
        if diffs and diffs[-1] < _PROFILE_CONVERGENCE_TOL:
            converged = True
            break
    return ProfileLimitResult(
        value=value, times=tuple(times), diffs=tuple(diffs), converged=converged
    )
