"""Monte Carlo verification engine.

Reproducibility model: every trial owns a counter-based random stream keyed
by (master_seed, trial_index), so results are byte-identical for a given
plan no matter how many workers execute it or in what order chunks finish.
Normals come from the inverse CDF applied to a 53-bit open-interval uniform,
one draw per variate.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import beta as _beta_dist

from . import core

__all__ = [
    "TrialPlan",
    "EstimateResult",
    "QuantileResult",
    "OrderStatMeans",
    "Side",
    "ConcentrationResult",
    "derive_seed",
    "trial_stream",
    "normal_from_stream",
    "draw_sample",
    "clopper_pearson",
    "collect_extremes",
    "estimate_membership",
    "estimate_quantiles",
    "empirical_order_stat_means",
    "concentration_check",
]

_U64 = (1 << 64) - 1
_CHUNK = 2048


def derive_seed(seed: int, tag: int) -> int:
    """Mix a master seed with an integer tag into a new 64-bit seed
    (splitmix64 finalizer, avalanching so nearby tags decorrelate)."""
    z = (int(seed) + 0x9E3779B97F4A7C15 * (int(tag) + 1)) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class TrialPlan:
    """How many trials to run at which m, under which seed, on how many threads."""

    m: int
    trials: int
    master_seed: int
    workers: int = 1

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 0 <= self.master_seed <= _U64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class EstimateResult:
    successes: int
    trials: int
    point: float
    ci_low: float
    ci_high: float
    master_seed: int


@dataclass(frozen=True)
class QuantileResult:
    levels: tuple[float, ...]
    min_quantiles: tuple[float, ...]
    max_quantiles: tuple[float, ...]
    trials: int
    spec: core.ErasureSpec


@dataclass(frozen=True)
class OrderStatMeans:
    """Estimated E|y_(j)| (descending j = 1..m) with standard errors."""

    means: np.ndarray
    ses: np.ndarray
    trials: int
    m: int


class Side(enum.Enum):
    TOP_K = "top_k"
    TAIL_REST = "tail_rest"


@dataclass(frozen=True)
class ConcentrationResult:
    subset_size: int
    delta: float
    side: Side
    mean: float
    se: float
    bound: float
    above: EstimateResult
    below: EstimateResult


def trial_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial, keyed (master_seed, trial_index)."""
    key = [int(master_seed) & _U64, int(trial_index) & _U64]
    return np.random.Generator(np.random.Philox(key=key))


def normal_from_stream(gen: np.random.Generator, size: int) -> np.ndarray:
    """size standard normals by inverse CDF of (r + 0.5)/2^53, r uniform on
    53-bit integers; the offset keeps u strictly inside (0, 1)."""
    r = gen.integers(0, 1 << 53, size=size, dtype=np.int64)
    u = (r.astype(np.float64) + 0.5) * (1.0 / (1 << 53))
    return ndtri(u)


def draw_sample(m: int, stream: np.random.Generator) -> core.SortedSample:
    """One sketch-norm sample: m squared normals, sorted."""
    return core.sort_sample(normal_from_stream(stream, m))


def clopper_pearson(
    successes: int, trials: int, confidence: float = 0.95
) -> tuple[float, float]:
    """Exact binomial (Clopper-Pearson) confidence interval."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    a = 1.0 - confidence
    if successes == 0:
        lo = 0.0
    else:
        lo = float(_beta_dist.ppf(a / 2.0, successes, trials - successes + 1))
    if successes == trials:
        hi = 1.0
    else:
        hi = float(_beta_dist.ppf(1.0 - a / 2.0, successes + 1, trials - successes))
    return lo, hi


# ---------------------------------------------------------------------------
# Vectorized trial execution
# ---------------------------------------------------------------------------

def _sorted_sq_block(master_seed: int, start: int, count: int, m: int) -> np.ndarray:
    """Squared samples for trials [start, start+count), each row sorted
    ascending.  Streams are per trial, so block boundaries don't matter."""
    z = np.empty((count, m), dtype=np.float64)
    for i in range(count):
        z[i] = normal_from_stream(trial_stream(master_seed, start + i), m)
    sq = z * z
    sq.sort(axis=1)
    return sq


def _prefix_and_tail(sq_asc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending prefix sums and ascending tail sums of sorted squares."""
    rows, m = sq_asc.shape
    prefix = np.zeros((rows, m + 1), dtype=np.float64)
    np.cumsum(sq_asc[:, ::-1], axis=1, out=prefix[:, 1:])
    tail = np.zeros((rows, m + 1), dtype=np.float64)
    np.cumsum(sq_asc, axis=1, out=tail[:, 1:])
    return prefix, tail


def _chunk_starts(trials: int) -> list[tuple[int, int]]:
    return [(s, min(_CHUNK, trials - s)) for s in range(0, trials, _CHUNK)]


def _run_chunked(plan: TrialPlan, work) -> None:
    """Apply work(start, count) over all chunks, threaded when workers > 1.

    work writes into preallocated arrays at disjoint slices, so execution
    order is irrelevant to the result.
    """
    chunks = _chunk_starts(plan.trials)
    if plan.workers == 1 or len(chunks) == 1:
        for start, count in chunks:
            work(start, count)
        return
    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        futures = [pool.submit(work, start, count) for start, count in chunks]
        for f in futures:
            f.result()


def collect_extremes(
    plan: TrialPlan, specs: Sequence[core.ErasureSpec]
) -> tuple[np.ndarray, np.ndarray]:
    """Worst-case min and max energy ratios for every trial and every spec.

    Returns (mins, maxes), each of shape (len(specs), trials).  All specs
    must share plan.m; the sampled squares are drawn once per trial and
    reused across specs, so estimates for different budgets or modes are
    coupled through common random numbers.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one erasure spec")
    for s in specs:
        if s.m != plan.m:
            raise ValueError("spec row count does not match plan.m")
    mins = np.empty((len(specs), plan.trials), dtype=np.float64)
    maxes = np.empty((len(specs), plan.trials), dtype=np.float64)

    def work(start: int, count: int) -> None:
        prefix, tail = _prefix_and_tail(
            _sorted_sq_block(plan.master_seed, start, count, plan.m))
        for i, spec in enumerate(specs):
            lo, hi = core.prefix_extremes(prefix, tail, spec.k, spec.mode)
            mins[i, start:start + count] = lo
            maxes[i, start:start + count] = hi

    _run_chunked(plan, work)
    return mins, maxes


def estimate_membership(
    band: core.DistortionBand,
    beta: float,
    mode: core.Mode,
    plan: TrialPlan,
) -> EstimateResult:
    """Estimate P{ every erasure pattern within budget keeps the energy ratio
    inside band }, with an exact 95% binomial confidence interval."""
    spec = core.ErasureSpec.from_ratio(beta, plan.m, mode)
    mins, maxes = collect_extremes(plan, [spec])
    ok = (mins[0] >= band.lo) & (maxes[0] <= band.hi)
    successes = int(np.count_nonzero(ok))
    lo, hi = clopper_pearson(successes, plan.trials)
    return EstimateResult(
        successes=successes,
        trials=plan.trials,
        point=successes / plan.trials,
        ci_low=lo,
        ci_high=hi,
        master_seed=plan.master_seed,
    )


def estimate_quantiles(
    beta: float,
    mode: core.Mode,
    plan: TrialPlan,
    levels: Sequence[float],
) -> QuantileResult:
    """Empirical quantiles of the per-trial worst-case min and max ratios."""
    levels = tuple(float(q) for q in levels)
    if not levels:
        raise ValueError("need at least one quantile level")
    for q in levels:
        if not 0.0 < q < 1.0:
            raise ValueError("quantile levels must lie in (0, 1)")
    spec = core.ErasureSpec.from_ratio(beta, plan.m, mode)
    mins, maxes = collect_extremes(plan, [spec])
    return QuantileResult(
        levels=levels,
        min_quantiles=tuple(float(v) for v in np.quantile(mins[0], levels)),
        max_quantiles=tuple(float(v) for v in np.quantile(maxes[0], levels)),
        trials=plan.trials,
        spec=spec,
    )


def empirical_order_stat_means(m: int, plan: TrialPlan) -> OrderStatMeans:
    """Estimate E|y_(j)| for each rank j (descending) with standard errors."""
    if m != plan.m:
        raise ValueError("m does not match plan.m")
    sums = np.zeros(m, dtype=np.float64)
    sumsq = np.zeros(m, dtype=np.float64)
    partials: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def work(start: int, count: int) -> None:
        a = np.sqrt(_sorted_sq_block(plan.master_seed, start, count, m)[:, ::-1])
        partials[start] = (a.sum(axis=0), (a * a).sum(axis=0))

    _run_chunked(plan, work)
    for s, sq in partials.values():
        sums += s
        sumsq += sq
    n = plan.trials
    means = sums / n
    var = np.maximum(sumsq / n - means * means, 0.0) * (n / max(n - 1, 1))
    ses = np.sqrt(var / n)
    return OrderStatMeans(means=means, ses=ses, trials=n, m=m)


def concentration_check(
    k_frac: float,
    side: Side,
    delta: float,
    plan: TrialPlan,
) -> ConcentrationResult:
    """Empirical two-sided deviation frequencies for the root-mean energy of
    a ranked subset, against the Lipschitz concentration bound
    exp(-delta^2 |S| / 2).

    side TOP_K takes the k = round(k_frac*m) largest squares (k_frac = 1.0
    allowed, the full sample); TAIL_REST takes the m-k smallest and needs
    k <= m-1.  Deviations are measured from the empirical mean on each side.
    """
    if not 0.0 < k_frac <= 1.0:
        raise ValueError("k_frac must lie in (0, 1]")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    m = plan.m
    k = int(round(k_frac * m))
    if k < 1:
        raise ValueError("subset is empty at this k_frac")
    if side is Side.TAIL_REST and k > m - 1:
        raise ValueError("tail subset is empty at this k_frac")
    size = k if side is Side.TOP_K else m - k
    vals = np.empty(plan.trials, dtype=np.float64)

    def work(start: int, count: int) -> None:
        prefix, tail = _prefix_and_tail(
            _sorted_sq_block(plan.master_seed, start, count, m))
        if side is Side.TOP_K:
            energy = prefix[:, k] / k
        else:
            energy = tail[:, m - k] / (m - k)
        vals[start:start + count] = np.sqrt(energy)

    _run_chunked(plan, work)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(plan.trials)) if plan.trials > 1 else 0.0
    bound = math.exp(-delta * delta * size / 2.0)

    def wrap(successes: int) -> EstimateResult:
        lo, hi = clopper_pearson(successes, plan.trials)
        return EstimateResult(
            successes=successes,
            trials=plan.trials,
            point=successes / plan.trials,
            ci_low=lo,
            ci_high=hi,
            master_seed=plan.master_seed,
        )

    above = wrap(int(np.count_nonzero(vals > mean + delta)))
    below = wrap(int(np.count_nonzero(vals < mean - delta)))
    return ConcentrationResult(
        subset_size=size,
        delta=delta,
        side=side,
        mean=mean,
        se=se,
        bound=bound,
        above=above,
        below=below,
    )
