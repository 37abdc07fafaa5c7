"""The long-run rescaled limit law and random initial conditions built from it.

For the linearized branching diffusion dY = a*Y dt + sqrt(b*Y) dB with
Y(0) = 1, the discounted process exp(-a*t)*Y(t) converges to a limit whose
law is compound Poisson: a Poisson(c) number of Exponential(rate c)
summands with c = 2a/b.  Direct consequences used as oracles throughout:

    Laplace transform   E exp(-lam * limit) = exp(-c*lam / (c + lam)),
    atom at zero        P(limit = 0) = exp(-c),
    mean                c * (1/c) = 1,
    variance            c * (2/c^2) = 2/c = b/a.

``sample_initial_conditions`` pushes these draws through the model's limit
profile, producing starting states in [0, drift_root) whose zeros are
exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import TAG_LIMIT_SAMPLE, derived_generator
from .flow import FlowSolverConfig, limit_profile_batch
from .models import ModelSpec

Array = np.ndarray

__all__ = [
    "LimitLaw",
    "sample_compound_poisson",
    "sample_limit",
    "laplace_transform",
    "sample_initial_conditions",
]

# Samples are generated in fixed-size chunks with one derived stream per
# chunk, so splitting a request across workers cannot change the output.
_CHUNK = 65536


@dataclass(frozen=True)
class LimitLaw:
    """Compound-Poisson limit law for linear growth rate a and noise slope b."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a}")
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError(f"b must be positive and finite, got {self.b}")

    @property
    def rate(self) -> float:
        # Poisson count rate and exponential rate coincide at 2a/b.
        return 2.0 * self.a / self.b

    @classmethod
    def for_model(cls, model: ModelSpec) -> "LimitLaw":
        return cls(a=model.a, b=model.b)


def sample_compound_poisson(rate: float, n: int, seed: int, tag: int) -> Array:
    """Sum of Poisson(rate) many Exponential(rate) variables, n draws.

    The sum of k unit-rate-scaled exponentials is a Gamma(k, 1/rate)
    variate, so each draw costs one Poisson and at most one gamma sample.
    Draws with a zero count stay exactly 0.0.  Generation is chunked with
    one derived stream per chunk (see module note on parallel safety).
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    out = np.empty(n)
    for chunk_index, start in enumerate(range(0, n, _CHUNK)):
        stop = min(start + _CHUNK, n)
        rng = derived_generator(seed, tag, chunk_index)
        counts = rng.poisson(rate, stop - start)
        block = np.zeros(stop - start)
        positive = counts > 0
        if np.any(positive):
            block[positive] = rng.gamma(shape=counts[positive], scale=1.0 / rate)
        out[start:stop] = block
    return out


def sample_limit(law: LimitLaw, n: int, seed: int) -> Array:
    """n independent draws from the limit law (nonnegative, atom at 0)."""
    return sample_compound_poisson(law.rate, n, seed, TAG_LIMIT_SAMPLE)


def laplace_transform(law: LimitLaw, lam: float) -> float:
    """E exp(-lam * limit) = exp(-c*lam/(c + lam)); equals exp(-c) at infinity."""
    if lam < 0.0 or math.isnan(lam):
        raise ValueError(f"lam must be nonnegative, got {lam}")
    c = law.rate
    if math.isinf(lam):
        return math.exp(-c)
    return math.exp(-c * lam / (c + lam))


def sample_initial_conditions(
    model: ModelSpec,
    law: LimitLaw,
    n: int,
    seed: int,
    cfg: FlowSolverConfig | None = None,
) -> Array:
    """Limit-law draws pushed through the model's limit profile.

    Outputs lie in [0, drift_root); exact zeros of the draw stay exactly
    zero.  The law must carry the model's own (a, b).
    """
    if law.a != model.a or law.b != model.b:
        raise ValueError(
            f"law (a={law.a}, b={law.b}) does not match "
            f"model (a={model.a}, b={model.b})"
        )
    draws = sample_limit(law, n, seed)
    return limit_profile_batch(model, draws, cfg)
