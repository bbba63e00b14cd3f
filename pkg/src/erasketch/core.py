"""Exact worst-case norm statistics of a sketch vector under row erasures.

A Gaussian sketch of a unit vector reduces, by rotation invariance, to a
vector y of m i.i.d. standard normals.  Every erasure event studied here
depends on y only through its squared magnitudes sorted in nonincreasing
order: for a survivor set T (the rows an adversary did not delete),
``norm(y_T)^2 = norm(y)^2 - norm(y_{T^c})^2``, so the worst cases over all
T with ``|T^c| <= k`` are prefix/suffix sums of the sorted squares.

Two normalizations are supported: per-survivor (divide by ``|T|``) and
uniform (divide by m).  ``extreme_ratios`` evaluates the exact min/max in
O(1) from prefix sums; ``brute_force_extremes`` enumerates every admissible
survivor set and is kept as an independent oracle for small m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Sequence

import numpy as np

__all__ = [
    "Mode",
    "SortedSample",
    "ErasureSpec",
    "RatioExtremes",
    "DistortionBand",
    "sort_sample",
    "erased_budget",
    "canonical_arg_erased",
    "extreme_ratios",
    "prefix_extremes",
    "membership",
    "brute_force_extremes",
]

# Largest m accepted by the brute-force subset oracle.
BRUTE_FORCE_LIMIT = 22


class Mode(Enum):
    """Normalization of the surviving squared norm.

    PER_SURVIVOR divides by the survivor count |T|; UNIFORM divides by the
    full row count m regardless of how many rows were erased.
    """

    PER_SURVIVOR = "per_survivor"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, name: str) -> "Mode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {name!r}; expected 'per_survivor' or 'uniform'"
            ) from None


@dataclass(frozen=True)
class SortedSample:
    """One sketch realization reduced to sorted squared magnitudes.

    Attributes:
        m: number of rows.
        sq_desc: squared magnitudes, sorted nonincreasing, length m.
        prefix: prefix[i] = sum of the i largest squares, prefix[0] = 0.
        tail: tail[i] = sum of the i smallest squares, tail[0] = 0.

    tail is accumulated directly over the ascending order rather than as
    total - prefix: survivor sums after heavy erasure are tiny, and the
    subtraction would lose relative precision to cancellation.
    """

    m: int
    sq_desc: np.ndarray
    prefix: np.ndarray
    tail: np.ndarray

    @classmethod
    def from_squares(cls, squares: Sequence[float]) -> "SortedSample":
        """Build from already-squared magnitudes (sorted here, any input order)."""
        sq = np.asarray(squares, dtype=np.float64)
        if sq.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(sq)):
            raise ValueError("non-finite input")
        if np.any(sq < 0):
            raise ValueError("squared magnitudes must be nonnegative")
        asc = np.sort(sq)
        sq_desc = asc[::-1].copy()
        prefix = np.concatenate(([0.0], np.cumsum(sq_desc)))
        tail = np.concatenate(([0.0], np.cumsum(asc)))
        return cls(m=int(sq.size), sq_desc=sq_desc, prefix=prefix, tail=tail)

    @property
    def total(self) -> float:
        """Sum of all squared magnitudes."""
        return float(self.prefix[self.m])


@dataclass(frozen=True)
class ErasureSpec:
    """Erasure ratio, derived integer budget, and normalization mode.

    Invariants: 0 <= k <= m-1 (at least one row survives) and
    gamma = k/m <= beta < gamma + 1/m.
    """

    beta: float
    k: int
    gamma: float
    m: int
    mode: Mode

    @classmethod
    def from_ratio(cls, beta: float, m: int, mode: Mode) -> "ErasureSpec":
        """Budget k = floor(beta*m) for an erasure ratio beta in [0,1)."""
        k = erased_budget(beta, m)
        return cls(beta=float(beta), k=k, gamma=k / m, m=int(m), mode=mode)

    @classmethod
    def from_budget(cls, k: int, m: int, mode: Mode) -> "ErasureSpec":
        """Spec with an explicit row budget k in [0, m-1]."""
        k = int(k)
        m = int(m)
        if m < 1:
            raise ValueError("m must be positive")
        if not 0 <= k <= m - 1:
            raise ValueError(f"budget k={k} must satisfy 0 <= k <= m-1={m - 1}")
        return cls(beta=k / m, k=k, gamma=k / m, m=m, mode=mode)


@dataclass(frozen=True)
class RatioExtremes:
    """Worst-case normalized squared norms over all admissible erasures.

    argmin_erased / argmax_erased are the erased-row counts of the canonical
    extremal erasures (erase the k largest magnitudes for the minimum; the k
    smallest for the per-survivor maximum; nothing for the uniform maximum).
    Under ties other counts may achieve the same ratio.
    """

    min_ratio: float
    max_ratio: float
    argmin_erased: int
    argmax_erased: int


@dataclass(frozen=True)
class DistortionBand:
    """Acceptance interval [lo, hi] for normalized squared norms; hi may be inf."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("band endpoints must not be NaN")
        if self.lo < 0:
            raise ValueError("band lo must be nonnegative")
        if self.hi < self.lo:
            raise ValueError("band must satisfy lo <= hi")

    @classmethod
    def symmetric(cls, eps: float) -> "DistortionBand":
        """Band [1-eps, 1+eps]; requires eps > 0.

        The lower edge is clamped at 0 for eps >= 1, which leaves membership
        semantics unchanged (ratios are nonnegative).
        """
        if not eps > 0:
            raise ValueError("symmetric band requires eps > 0")
        return cls(lo=max(0.0, 1.0 - eps), hi=1.0 + eps)

    def contains(self, lo_value: float, hi_value: float) -> bool:
        return lo_value >= self.lo and hi_value <= self.hi


def erased_budget(beta: float, m: int) -> int:
    """Integer erasure budget k = floor(beta*m) for beta in [0,1).

    A +1e-9 absolute nudge absorbs IEEE representation error in beta*m
    (e.g. 0.3*10 evaluates to 2.9999999999999996).
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("erasure ratio out of range: need 0 <= beta < 1")
    if m < 1:
        raise ValueError("m must be positive")
    k = int(math.floor(beta * m + 1e-9))
    return min(k, m - 1)


def sort_sample(y: Sequence[float]) -> SortedSample:
    """Reduce a raw sketch vector to its sorted squared magnitudes.

    Args:
        y: vector of m finite reals.

    Returns:
        SortedSample with nonincreasing sq_desc and prefix sums.

    Raises:
        ValueError: on an empty vector or non-finite entries.
    """
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    return SortedSample.from_squares(arr * arr)


def prefix_extremes(
    prefix: np.ndarray, tail: np.ndarray, k: int, mode: Mode
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized erasure extremes from prefix- and tail-sum arrays.

    Args:
        prefix: shape (..., m+1); prefix[..., i] = sum of the i largest
            squared magnitudes of each sample.
        tail: same shape; tail[..., i] = sum of the i smallest.
        k: erasure budget, 0 <= k <= m-1.
        mode: normalization.

    Returns:
        (min_ratio, max_ratio) arrays of shape prefix.shape[:-1].

    This is the single source of truth for the extreme formulas; the scalar
    ``extreme_ratios`` and every Monte Carlo path go through it.  Min-side
    numerators come from tail (sums of small values accumulated directly),
    max-side from prefix, so neither direction suffers cancellation.
    """
    m = prefix.shape[-1] - 1
    if not 0 <= k <= m - 1:
        raise ValueError("no surviving rows")
    if tail.shape != prefix.shape:
        raise ValueError("prefix and tail shapes must match")
    if mode is Mode.PER_SURVIVOR:
        # erase the k largest -> smallest survivor mean; k smallest -> largest
        mn = tail[..., m - k] / (m - k)
        mx = prefix[..., m - k] / (m - k)
    else:
        mn = tail[..., m - k] / m
        mx = prefix[..., m] / m
    return mn, mx


def canonical_arg_erased(k: int, mode: Mode) -> tuple[int, int]:
    """Erased-row counts attaining the extremes, by the canonical convention
    (full budget for the min; full budget for the per-survivor max, zero for
    the uniform max)."""
    if mode is Mode.PER_SURVIVOR:
        return k, k
    return k, 0


def extreme_ratios(s: SortedSample, spec: ErasureSpec) -> RatioExtremes:
    """Exact min/max normalized squared norm over ALL erasures of size <= k.

    With tail[i] the sum of the i smallest squares and prefix[j] the sum of
    the j largest:
    PerSurvivor: min = tail[m-k]/(m-k), max = prefix[m-k]/(m-k).
    Uniform:     min = tail[m-k]/m,     max = prefix[m]/m.
    Monotonicity of the sorted prefix means in the erased count makes these
    the extremes over every budget 0..k, not just exactly k.
    """
    if spec.m != s.m:
        raise ValueError(f"spec is for m={spec.m}, sample has m={s.m}")
    if spec.k > s.m - 1:
        raise ValueError("no surviving rows")
    mn, mx = prefix_extremes(s.prefix, s.tail, spec.k, spec.mode)
    argmin, argmax = canonical_arg_erased(spec.k, spec.mode)
    return RatioExtremes(
        min_ratio=float(mn),
        max_ratio=float(mx),
        argmin_erased=argmin,
        argmax_erased=argmax,
    )


def membership(s: SortedSample, band: DistortionBand, spec: ErasureSpec) -> bool:
    """True iff every admissible erasure keeps the normalized norm inside band."""
    ext = extreme_ratios(s, spec)
    return band.contains(ext.min_ratio, ext.max_ratio)


def brute_force_extremes(y: Sequence[float], spec: ErasureSpec) -> RatioExtremes:
    """Oracle: enumerate every survivor set T with |T^c| <= spec.k.

    Independent of the sorting reduction; guards m <= 22.  Ties resolve to
    the same canonical erased counts as extreme_ratios (larger erased count
    preferred for extremes that sit at k, smaller for the uniform maximum).
    """
    arr = np.asarray(y, dtype=np.float64).reshape(-1)
    m = arr.size
    if m == 0:
        raise ValueError("empty sample")
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for oracle: m={m} > {BRUTE_FORCE_LIMIT}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    if spec.m != m:
        raise ValueError(f"spec is for m={spec.m}, sample has m={m}")
    if spec.k > m - 1:
        raise ValueError("no surviving rows")

    squares = arr * arr
    per_survivor = spec.mode is Mode.PER_SURVIVOR

    best_min = math.inf
    best_max = -math.inf
    argmin_erased = 0
    argmax_erased = 0
    for j in range(spec.k + 1):
        denom = (m - j) if per_survivor else m
        # sum survivor squares directly: all terms positive, so no precision
        # is lost to cancellation even when survivors are tiny
        idx = np.array(list(combinations(range(m), m - j)), dtype=np.intp)
        ratios = squares[idx].sum(axis=1) / denom
        lo = float(ratios.min())
        hi = float(ratios.max())
        if lo <= best_min:
            best_min = lo
            argmin_erased = j
        if per_survivor:
            if hi >= best_max:
                best_max = hi
                argmax_erased = j
        else:
            if hi > best_max:
                best_max = hi
                argmax_erased = j
    return RatioExtremes(
        min_ratio=best_min,
        max_ratio=best_max,
        argmin_erased=argmin_erased,
        argmax_erased=argmax_erased,
    )
