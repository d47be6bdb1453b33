"""Moving-block bootstrap and Welch's t-test for run comparisons."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import t as student_t


def block_bootstrap_ci(series, block: int = 20, resamples: int = 1000, level: float = 0.95,
                       seed: int = 0) -> tuple[float, float]:
    """Percentile interval for the mean of an autocorrelated series.

    Each resample concatenates randomly placed overlapping blocks of length
    ``block`` and is truncated to the series length.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if block < 1 or n < 2 * block:
        raise ValueError("the series must hold at least two blocks")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    rng = np.random.default_rng(seed)
    n_blocks = -(-n // block)
    starts = rng.integers(0, n - block + 1, size=(resamples, n_blocks))
    idx = (starts[:, :, None] + np.arange(block)).reshape(resamples, -1)[:, :n]
    means = x[idx].mean(axis=1)
    a = (1 - level) / 2
    lo, hi = np.quantile(means, [a, 1 - a])
    return float(lo), float(hi)


def welch_t_test(a, b) -> tuple[float, float, float]:
    """Welch statistic, Welch-Satterthwaite degrees of freedom and two-sided p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va == 0 and vb == 0:
        raise ValueError("both samples have zero variance")
    diff = a.mean() - b.mean()
    if diff == 0:
        dof = (va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
        return 0.0, float(dof), 1.0
    t = diff / math.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = 2.0 * student_t.sf(abs(t), dof)
    return float(t), float(dof), float(min(p, 1.0))
