"""Agreement and correlation statistics for batch evaluation reports."""

from __future__ import annotations

import math
import random
from typing import NamedTuple, Sequence


def _check_paired(xs: Sequence[float], ys: Sequence[float]) -> None:
    if len(xs) != len(ys):
        raise ValueError("inputs must have equal length")
    if len(xs) < 2:
        raise ValueError("need at least two observations")


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson product-moment correlation. Constant input is an error."""
    _check_paired(xs, ys)
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0 or var_y == 0:
        raise ValueError("correlation undefined for constant input")
    return sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)


def rankdata(xs: Sequence[float]) -> list[float]:
    """Ranks starting at 1; ties receive the average of their positions."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson over average ranks."""
    _check_paired(xs, ys)
    return pearson(rankdata(xs), rankdata(ys))


class KappaResult(NamedTuple):
    kappa: float
    degenerate: bool  # expected agreement was 1, kappa reported as 0 by convention


def cohen_kappa(a: Sequence, b: Sequence) -> KappaResult:
    """Cohen's kappa for two paired label sequences.

    kappa = (p_o - p_e) / (1 - p_e), evaluated in integer arithmetic with a
    single final division so rationally-exact cases come out exact. When
    chance agreement p_e is 1 (both raters constant on the same label),
    returns 0 with the degenerate flag set instead of dividing by zero.
    """
    if len(a) != len(b):
        raise ValueError("inputs must have equal length")
    if not a:
        raise ValueError("need at least one observation")
    n = len(a)
    labels = set(a) | set(b)
    matches = sum(1 for x, y in zip(a, b) if x == y)
    # n^2 * p_e, kept integral
    chance = sum(list(a).count(lab) * list(b).count(lab) for lab in labels)
    if chance == n * n:
        return KappaResult(0.0, True)
    return KappaResult((n * matches - chance) / (n * n - chance), False)


def alignment_rate(verdict_accepts: Sequence[bool], gold_accepts: Sequence[bool], flagged: Sequence[bool] | None = None) -> float:
    """Percentage of unflagged verdicts that match the gold label, in [0, 100]."""
    if len(verdict_accepts) != len(gold_accepts):
        raise ValueError("inputs must have equal length")
    if flagged is None:
        flagged = [False] * len(verdict_accepts)
    kept = [(v, g) for v, g, f in zip(verdict_accepts, gold_accepts, flagged) if not f]
    if not kept:
        raise ValueError("no unflagged rows to score")
    return 100.0 * sum(1 for v, g in kept if v == g) / len(kept)


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile of pre-sorted values."""
    if not sorted_values:
        raise ValueError("no values")
    pos = q * (len(sorted_values) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_values[lo]
    frac = pos - lo
    return sorted_values[lo] * (1 - frac) + sorted_values[hi] * frac


class BootstrapCI(NamedTuple):
    delta: float
    lower: float
    upper: float


def bootstrap_delta_ci(
    a: Sequence[float],
    b: Sequence[float],
    *,
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 42,
) -> BootstrapCI:
    """Percentile bootstrap CI for the mean paired difference a[i] - b[i]."""
    _check_paired(a, b)
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    diffs = [x - y for x, y in zip(a, b)]
    n = len(diffs)
    rng = random.Random(seed)
    means = sorted(
        sum(diffs[rng.randrange(n)] for _ in range(n)) / n for _ in range(resamples)
    )
    alpha = (1 - level) / 2
    return BootstrapCI(
        delta=sum(diffs) / n,
        lower=_quantile(means, alpha),
        upper=_quantile(means, 1 - alpha),
    )
