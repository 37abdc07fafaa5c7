"""Distribution distances and estimation helpers for the experiment harness.

All functions are pure and operate on one-dimensional float samples.  The
headline metric is the 1-Wasserstein distance: it stays informative when a
distribution carries an atom at zero, which a sup-gap statistic handles
poorly right at the atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstwo

Array = np.ndarray

__all__ = [
    "QUANTILE_LEVELS",
    "SampleSummary",
    "summarize",
    "wasserstein1",
    "wasserstein1_bootstrap_stderr",
    "wasserstein1_fixed_reference_stderr",
    "wasserstein1_subsample_stderr",
    "ks_statistic",
    "ks_pvalue",
    "empirical_laplace",
    "binomial_ci",
]

QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class SampleSummary:
    """Moment and quantile digest of one sample."""

    n: int
    mean: float
    variance: float
    stderr: float
    zero_fraction: float
    quantiles: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("summary requires at least one observation")
        if self.variance < 0.0:
            raise ValueError("variance must be nonnegative")
        if any(b < a for a, b in zip(self.quantiles, self.quantiles[1:])):
            raise ValueError("quantiles must be nondecreasing")

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "stderr": self.stderr,
            "zero_fraction": self.zero_fraction,
            "quantiles": {
                f"q{int(round(100 * level)):02d}": value
                for level, value in zip(QUANTILE_LEVELS, self.quantiles)
            },
        }


def summarize(xs: Array) -> SampleSummary:
    xs = _as_sample(xs, "xs")
    n = int(xs.size)
    variance = float(np.var(xs, ddof=1)) if n > 1 else 0.0
    return SampleSummary(
        n=n,
        mean=float(np.mean(xs)),
        variance=variance,
        stderr=math.sqrt(variance / n),
        zero_fraction=float(np.mean(xs == 0.0)),
        quantiles=tuple(float(q) for q in np.quantile(xs, QUANTILE_LEVELS)),
    )


def _as_sample(xs: Array, name: str) -> Array:
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.isfinite(xs).all():
        raise ValueError(f"{name} must be finite")
    return xs


def wasserstein1(xs: Array, ys: Array) -> float:
    """1-Wasserstein distance between the two empirical distributions.

    Quantile coupling: for equal sizes this is the mean absolute gap of
    sorted samples; otherwise the integral of |inverse-CDF difference| is
    taken exactly, piecewise over the merged grid of jump points i/n and
    j/m (indices read at interval midpoints, which is roundoff-safe).
    """
    xs = np.sort(_as_sample(xs, "xs"))
    ys = np.sort(_as_sample(ys, "ys"))
    n, m = xs.size, ys.size
    if n == m:
        return float(np.mean(np.abs(xs - ys)))
    cuts = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    edges = np.concatenate([[0.0], cuts])
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    ix = np.minimum((mids * n).astype(np.int64), n - 1)
    iy = np.minimum((mids * m).astype(np.int64), m - 1)
    return float(np.sum(widths * np.abs(xs[ix] - ys[iy])))


def wasserstein1_bootstrap_stderr(
    xs: Array,
    ys: Array,
    rng: np.random.Generator,
    n_boot: int = 200,
) -> float:
    """Bootstrap standard error of wasserstein1 (both samples resampled)."""
    xs = _as_sample(xs, "xs")
    ys = _as_sample(ys, "ys")
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    reps = np.empty(n_boot)
    for i in range(n_boot):
        bx = xs[rng.integers(0, xs.size, xs.size)]
        by = ys[rng.integers(0, ys.size, ys.size)]
        reps[i] = wasserstein1(bx, by)
    return float(np.std(reps, ddof=1))


def wasserstein1_fixed_reference_stderr(
    xs: Array,
    reference: Array,
    rng: np.random.Generator,
    n_boot: int = 200,
) -> float:
    """Bootstrap standard error of wasserstein1 against a fixed reference.

    Only xs is resampled. Appropriate when the reference is much larger
    than the sample, so its own sampling noise is second order and the
    reported error should reflect the sample alone.  Caution: when the two
    distributions are close, resampling re-inflates the n^-1/2 sampling
    floor and the result overstates the error; prefer the subsampling
    estimator there.
    """
    xs = _as_sample(xs, "xs")
    reference = np.sort(_as_sample(reference, "reference"))
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    reps = np.empty(n_boot)
    for i in range(n_boot):
        bx = xs[rng.integers(0, xs.size, xs.size)]
        reps[i] = wasserstein1(bx, reference)
    return float(np.std(reps, ddof=1))


def wasserstein1_subsample_stderr(
    xs: Array,
    reference: Array,
    n_splits: int = 10,
) -> float:
    """Subsampling standard error of wasserstein1 against a fixed reference.

    The sample is cut into n_splits disjoint blocks (points are exchangeable,
    so contiguous blocks are themselves independent draws), the distance of
    each block to the reference is computed, and the block-level spread is
    scaled by the root-n rate back to the full sample size.  Unlike the
    with-replacement bootstrap this stays consistent when xs already sits at
    the sampling floor of the distance.  Deterministic: no resampling.
    """
    xs = _as_sample(xs, "xs")
    reference = np.sort(_as_sample(reference, "reference"))
    if n_splits < 2:
        raise ValueError("n_splits must be at least 2")
    if xs.size < 2 * n_splits:
        raise ValueError("need at least two points per split")
    block = xs.size // n_splits
    reps = np.empty(n_splits)
    for i in range(n_splits):
        reps[i] = wasserstein1(xs[i * block:(i + 1) * block], reference)
    # SD at block size b, mapped to size n through the n^-1/2 rate.
    return float(np.std(reps, ddof=1) * math.sqrt(block / xs.size))


def ks_statistic(xs: Array, ys: Array) -> float:
    """Two-sample sup gap of empirical CDFs, in [0, 1]."""
    xs = np.sort(_as_sample(xs, "xs"))
    ys = np.sort(_as_sample(ys, "ys"))
    grid = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, grid, side="right") / xs.size
    cdf_y = np.searchsorted(ys, grid, side="right") / ys.size
    return float(np.max(np.abs(cdf_x - cdf_y)))


def ks_pvalue(xs: Array, ys: Array) -> float:
    """Large-sample p-value for the two-sample sup-gap statistic.

    Uses the one-sample null distribution at the rounded effective size
    n*m/(n+m), which keeps an O(1/sqrt(n)) accuracy edge over the pure
    limiting law at moderate sizes.
    """
    xs = _as_sample(xs, "xs")
    ys = _as_sample(ys, "ys")
    d = ks_statistic(xs, ys)
    effective = xs.size * ys.size / (xs.size + ys.size)
    return float(np.clip(kstwo.sf(d, round(effective)), 0.0, 1.0))


def empirical_laplace(xs: Array, lam: float) -> float:
    """Mean of exp(-lam * x) over the sample; equals 1 at lam = 0."""
    xs = _as_sample(xs, "xs")
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    return float(np.mean(np.exp(-lam * xs)))


def binomial_ci(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wald interval k/n +- z*sqrt(p(1-p)/n), clipped to [0, 1].

    No continuity correction; degenerate (width 0) at k = 0 or k = n, so
    callers checking rare events should keep n large enough that the
    normal approximation is defensible.
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if z < 0.0:
        raise ValueError("z must be nonnegative")
    p = k / n
    half = z * math.sqrt(p * (1.0 - p) / n)
    return (max(0.0, p - half), min(1.0, p + half))
