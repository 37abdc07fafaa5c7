"""Scalar diffusion models with a linearly unstable origin.

A model couples a drift f and a diffusion coefficient sigma on the
nonnegative half-line with

    f(0) = 0,      a = f'(0) > 0        (origin repels),
    sigma(0) = 0,  b = sigma'(0) > 0    (square-root noise scale near 0),

and the one-sided slope bound

    (y - x) * (f(y) - f(x)) <= a * (y - x)**2,

which makes the origin the point of steepest exponential growth and gives
f(x) <= a*x everywhere.  ``validate_model`` spot-checks these assumptions
on a deterministic grid; ``builtin_model`` provides the three reference
models together with their closed forms, used as oracles elsewhere.

Coefficients are only meaningful on the state interval, so every
evaluation clamps its argument into [0, state_upper].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray

__all__ = [
    "ModelSpec",
    "ValidationReport",
    "BUILTIN_MODEL_NAMES",
    "builtin_model",
    "validate_model",
]

BUILTIN_MODEL_NAMES = ("wright_fisher", "balancing_selection", "linear_feller")

# Validation window when the state space is unbounded; see validate_model.
GRID_CAP_FOR_UNBOUNDED = 10.0


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable description of one diffusion model.

    Parameters
    ----------
    name : str
        Identifier used in reports and the CLI.
    drift, diffusion : callable
        Vectorized coefficient functions on [0, state_upper].
    a : float
        Drift slope at the origin, f'(0) > 0 (units 1/time).
    b : float
        Diffusion slope at the origin, sigma'(0) > 0.
    drift_root : float
        Smallest positive root of the drift; the flow maps (0, drift_root)
        into itself.  ``inf`` when the drift has no positive root.
    state_upper : float
        Hard upper bound of the state interval used for clamping; ``inf``
        for unbounded models.
    closed_form_flow : callable, optional
        (t, x) -> exact flow value, when known.
    closed_form_profile : callable, optional
        Exact limit of the rescaled flow (see flow.limit_profile), when
        known.
    """

    name: str
    drift: Callable[[Array], Array]
    diffusion: Callable[[Array], Array]
    a: float
    b: float
    drift_root: float
    state_upper: float
    closed_form_flow: Callable[[float, Array], Array] | None = None
    closed_form_profile: Callable[[Array], Array] | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("model name must be nonempty")
        if not (np.isfinite(self.a) and self.a > 0.0):
            raise ValueError(f"a must be positive, got {self.a}")
        if not (np.isfinite(self.b) and self.b > 0.0):
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.drift_root > 0.0:
            raise ValueError(f"drift_root must be positive, got {self.drift_root}")
        if not self.state_upper > 0.0:
            raise ValueError(f"state_upper must be positive, got {self.state_upper}")

    def clamp(self, x: Array | float) -> Array:
        return np.clip(np.asarray(x, dtype=float), 0.0, self.state_upper)

    def drift_at(self, x: Array | float) -> Array:
        return np.asarray(self.drift(self.clamp(x)), dtype=float)

    def diffusion_at(self, x: Array | float) -> Array:
        return np.asarray(self.diffusion(self.clamp(x)), dtype=float)

    def grid_cap(self) -> float:
        """Upper end of the default validation grid (always finite)."""
        if math.isfinite(self.drift_root):
            cap = GRID_CAP_FOR_UNBOUNDED * max(1.0, self.drift_root)
        else:
            cap = GRID_CAP_FOR_UNBOUNDED
        return min(self.state_upper, cap)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_model: one message per violated assumption."""

    model_name: str
    grid_size: int
    grid_upper: float
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return (
                f"{self.model_name}: no violations on a {self.grid_size}-point "
                f"grid in [0, {self.grid_upper:g}]"
            )
        lines = [f"{self.model_name}: {len(self.violations)} violation(s)"]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def _wright_fisher_drift(a: float) -> Callable[[Array], Array]:
    def drift(x: Array) -> Array:
        return a * x * (1.0 - x)

    return drift


def _balancing_drift(a: float) -> Callable[[Array], Array]:
    def drift(x: Array) -> Array:
        return a * x * (1.0 - x) * (1.0 - 2.0 * x)

    return drift


def _logistic_diffusion(x: Array) -> Array:
    return x * (1.0 - x)


def _wright_fisher_flow(a: float) -> Callable[[float, Array], Array]:
    # x*e^{at} / (1 - x + x*e^{at}), written so large a*t cannot overflow.
    def flow(t: float, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        decay = np.exp(-a * t)
        with np.errstate(invalid="ignore"):
            out = x / (x + (1.0 - x) * decay)
        return np.where(x > 0.0, out, 0.0)

    return flow


def _balancing_flow(a: float) -> Callable[[float, Array], Array]:
    def flow(t: float, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        s = 4.0 * x * (1.0 - x) * np.expm1(a * t) + 1.0
        return 0.5 - 0.5 * (1.0 - 2.0 * x) / np.sqrt(np.maximum(s, 0.0))

    return flow


def _wright_fisher_profile(x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    return x / (1.0 + x)


def _balancing_profile(x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    return 0.5 - 0.5 / np.sqrt(4.0 * x + 1.0)


def builtin_model(name: str, a: float) -> ModelSpec:
    """Construct one of the reference models by name.

    All builtins have diffusion slope b = 1.  The drift scale ``a`` is the
    only free parameter; the closed-form rescaled-flow limits do not
    depend on it.
    """
    if not (np.isfinite(a) and a > 0.0):
        raise ValueError(f"a must be positive, got {a}")
    if name == "wright_fisher":
        return ModelSpec(
            name=name,
            drift=_wright_fisher_drift(a),
            diffusion=_logistic_diffusion,
            a=a,
            b=1.0,
            drift_root=1.0,
            state_upper=1.0,
            closed_form_flow=_wright_fisher_flow(a),
            closed_form_profile=_wright_fisher_profile,
        )
    if name == "balancing_selection":
        return ModelSpec(
            name=name,
            drift=_balancing_drift(a),
            diffusion=_logistic_diffusion,
            a=a,
            b=1.0,
            drift_root=0.5,
            state_upper=1.0,
            closed_form_flow=_balancing_flow(a),
            closed_form_profile=_balancing_profile,
        )
    if name == "linear_feller":
        return ModelSpec(
            name=name,
            drift=lambda x, _a=a: _a * x,
            diffusion=lambda x: np.asarray(x, dtype=float),
            a=a,
            b=1.0,
            drift_root=math.inf,
            state_upper=math.inf,
            closed_form_flow=lambda t, x, _a=a: np.asarray(x, dtype=float) * math.exp(_a * t),
            closed_form_profile=lambda x: np.asarray(x, dtype=float),
        )
    raise ValueError(
        f"unknown model {name!r}; builtins are {', '.join(BUILTIN_MODEL_NAMES)}"
    )


# Finite-difference slope sanity check: catches a declared a or b that is
# plainly inconsistent with the coefficients; loose on purpose, since the
# one-sided difference carries an O(h*|f''|) truncation term.
_SLOPE_STEP = 1e-6
_SLOPE_TOL = 1e-2

# Slack for the pairwise drift inequality; exact-arithmetic equality cases
# (builtins touch the bound at the origin) must not trip on roundoff.
_PAIR_TOL = 1e-9


def _pairwise_drift_violation(
    xs: Array, fs: Array, a: float
) -> tuple[float, float, float, float, float] | None:
    """Worst violation of (y-x)(f(y)-f(x)) <= a(y-x)^2 over grid pairs.

    Scans all pairs in blocks to keep memory flat for grids up to 10^4
    points.  Returns (x, y, lhs, rhs, excess) for the worst offending pair,
    or None if the inequality holds everywhere up to roundoff slack.
    """
    n = len(xs)
    worst: tuple[float, float, float, float, float] | None = None
    block = max(1, 2**21 // max(n, 1))
    for start in range(0, n, block):
        xb = xs[start : start + block, None]
        fb = fs[start : start + block, None]
        dx = xs[None, :] - xb
        lhs = dx * (fs[None, :] - fb)
        rhs = a * dx * dx
        excess = lhs - rhs - _PAIR_TOL * np.maximum(1.0, np.abs(rhs))
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > 0.0:
            cand = (
                float(xs[start + i]),
                float(xs[j]),
                float(lhs[i, j]),
                float(rhs[i, j]),
                float(excess[i, j]),
            )
            if worst is None or cand[4] > worst[4]:
                worst = cand
    return worst


def validate_model(spec: ModelSpec, grid_size: int = 512) -> ValidationReport:
    """Check the standing assumptions on a deterministic grid.

    An empty report means no violation was found on the grid, which is
    evidence, not proof.  Non-finite coefficient values are reported as
    violations rather than raised.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")

    cap = spec.grid_cap()
    xs = np.linspace(0.0, cap, grid_size)
    violations: list[str] = []

    with np.errstate(all="ignore"):
        fs = spec.drift_at(xs)
        sigmas = spec.diffusion_at(xs)

    if fs.shape != xs.shape or sigmas.shape != xs.shape:
        violations.append("drift/diffusion do not evaluate elementwise on arrays")
        return ValidationReport(spec.name, grid_size, cap, tuple(violations))

    if not np.all(np.isfinite(fs)):
        bad = xs[~np.isfinite(fs)][0]
        violations.append(f"drift not finite at x={bad:g}")
    if not np.all(np.isfinite(sigmas)):
        bad = xs[~np.isfinite(sigmas)][0]
        violations.append(f"diffusion not finite at x={bad:g}")
    if violations:
        return ValidationReport(spec.name, grid_size, cap, tuple(violations))

    f0 = float(spec.drift_at(0.0))
    s0 = float(spec.diffusion_at(0.0))
    if f0 != 0.0:
        violations.append(f"drift(0) != 0 (got {f0:g})")
    if s0 != 0.0:
        violations.append(f"diffusion(0) != 0 (got {s0:g})")

    # Slope consistency at the origin: declared a, b against one-sided
    # finite differences.
    h = _SLOPE_STEP * min(1.0, cap)
    fslope = float(spec.drift_at(h)) / h
    sslope = float(spec.diffusion_at(h)) / h
    if abs(fslope - spec.a) > _SLOPE_TOL * max(1.0, spec.a):
        violations.append(
            f"drift slope at 0 is {fslope:.6g}, declared a={spec.a:g}"
        )
    if abs(sslope - spec.b) > _SLOPE_TOL * max(1.0, spec.b):
        violations.append(
            f"diffusion slope at 0 is {sslope:.6g}, declared b={spec.b:g}"
        )

    worst = _pairwise_drift_violation(xs, fs, spec.a)
    if worst is not None:
        x, y, lhs, rhs, _ = worst
        violations.append(
            "drift slope condition fails at "
            f"(x,y)=({x:g},{y:g}): (y-x)*(f(y)-f(x))={lhs:.6g} > a*(y-x)^2={rhs:.6g}"
        )

    if np.any(sigmas < -_PAIR_TOL):
        bad = xs[sigmas < -_PAIR_TOL][0]
        violations.append(f"diffusion negative at x={bad:g}")

    # f(x) <= a*x follows from the pair condition with y -> 0; checked
    # directly because it is the bound the moment estimates lean on.
    over = fs - spec.a * xs - _PAIR_TOL * np.maximum(1.0, spec.a * xs)
    if np.any(over > 0.0):
        bad = xs[over > 0.0][0]
        violations.append(
            f"drift exceeds a*x at x={bad:g} (f={float(spec.drift_at(bad)):.6g})"
        )

    interior_top = min(spec.drift_root, cap)
    interior = xs[(xs > 0.0) & (xs < interior_top)]
    if interior.size:
        f_int = spec.drift_at(interior)
        if np.any(f_int <= 0.0):
            bad = interior[f_int <= 0.0][0]
            violations.append(
                f"drift not positive inside (0, {interior_top:g}): f({bad:g})="
                f"{float(spec.drift_at(bad)):.6g}"
            )

    return ValidationReport(spec.name, grid_size, cap, tuple(violations))
