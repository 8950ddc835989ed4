"""Statistical machinery for the acceptance checks.

Only what the verification harness needs: mergeable moment summaries for
Monte Carlo error accounting, a two-sample Kolmogorov-Smirnov test and
chi-square tests.  Pass/fail conventions are fixed globally: identity checks
at 4 standard errors, distributional checks at p > 0.01 with pre-registered
replicate counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import chi2 as chi2_dist

IDENTITY_K_SIGMA = 4.0
DISTRIBUTIONAL_P = 0.01


@dataclass(frozen=True)
class SampleSummary:
    """Streaming count / mean / sum-of-squared-deviations summary.

    Summaries merge associatively (up to float rounding), so workers can
    accumulate independently and combine in any order.
    """

    count: int
    mean: float
    m2: float
    min: float
    max: float

    @staticmethod
    def empty() -> "SampleSummary":
        return SampleSummary(0, 0.0, 0.0, math.inf, -math.inf)

    @staticmethod
    def from_sample(values) -> "SampleSummary":
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            return SampleSummary.empty()
        mean = float(arr.mean())
        m2 = float(((arr - mean) ** 2).sum())
        return SampleSummary(int(arr.size), mean, m2, float(arr.min()), float(arr.max()))

    def push(self, x: float) -> "SampleSummary":
        n = self.count + 1
        delta = x - self.mean
        mean = self.mean + delta / n
        m2 = self.m2 + delta * (x - mean)
        return SampleSummary(n, mean, m2, min(self.min, x), max(self.max, x))

    def merge(self, other: "SampleSummary") -> "SampleSummary":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return SampleSummary(n, mean, m2,
                             min(self.min, other.min), max(self.max, other.max))

    def variance(self) -> float:
        if self.count < 2:
            raise ValueError("variance needs at least two observations")
        return self.m2 / (self.count - 1)

    def standard_error(self) -> float:
        if self.count < 2:
            raise ValueError("standard error needs at least two observations")
        return math.sqrt(self.m2 / (self.count * (self.count - 1)))


def mc_mean_ci(summary: SampleSummary, k: float) -> tuple[float, float]:
    """(mean, k * standard error) for a summary with count >= 2."""
    if summary.count < 2:
        raise ValueError("confidence interval needs at least two observations")
    return summary.mean, k * summary.standard_error()


def ks_statistic(a, b) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_two_sample(a, b, rng: np.random.Generator | None = None,
                  n_permutations: int = 10_000) -> tuple[float, float]:
    """KS statistic and p-value.

    The p-value uses the asymptotic Kolmogorov distribution once both
    samples have at least 50 points, and a permutation null (10^4 shuffles)
    below that.  With heavily tied (discrete) samples the asymptotic p-value
    is conservative.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = ks_statistic(a, b)
    if min(a.size, b.size) >= 50:
        n_eff = a.size * b.size / (a.size + b.size)
        p = float(special.kolmogorov(math.sqrt(n_eff) * d))
        return d, min(1.0, p)
    if rng is None:
        rng = np.random.default_rng(0)
    pooled = np.concatenate([a, b])
    hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(pooled)
        if ks_statistic(perm[:a.size], perm[a.size:]) >= d - 1e-12:
            hits += 1
    return d, (hits + 1) / (n_permutations + 1)


def chi_square_uniformity(counts) -> tuple[float, float]:
    """Pearson test of uniform cell occupancy.

    Requires at least two cells and expected count >= 5 per cell; raise the
    replicate count if the check refuses to run.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size < 2:
        raise ValueError("need at least two cells")
    expected = counts.sum() / counts.size
    if expected < 5:
        raise ValueError(
            f"expected count {expected:.2f} per cell is below 5; "
            "increase the number of replicates")
    stat = float(((counts - expected) ** 2 / expected).sum())
    p = float(chi2_dist.sf(stat, counts.size - 1))
    return stat, p


def chi_square_homogeneity(table) -> tuple[float, float]:
    """Pearson homogeneity test on a groups x cells contingency table."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or min(table.shape) < 2:
        raise ValueError("need a 2-D table with at least two rows and columns")
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row @ col / table.sum()
    if expected.min() < 5:
        raise ValueError(
            f"minimum expected count {expected.min():.2f} is below 5; "
            "increase the number of replicates")
    stat = float(((table - expected) ** 2 / expected).sum())
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    p = float(chi2_dist.sf(stat, dof))
    return stat, p
