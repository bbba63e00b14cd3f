"""Erasure-robust pairwise dimension-reduction audits.

Workflow: load a point set, size the sketch with ``jl_min_rows``, draw (or
reuse from cache) a Gaussian projection, pick an erasure budget with
``erasure_budget_jl``, then ``audit_pairwise`` checks that every pairwise
difference keeps its energy ratio inside the target band under every
erasure pattern within budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds, core, montecarlo

__all__ = [
    "Dataset",
    "ProjectionSpec",
    "HypothesisCheck",
    "PairCountCondition",
    "PairDistortion",
    "DistortionReport",
    "load_points",
    "draw_projection",
    "cached_projection",
    "erasure_budget_jl",
    "jl_hypothesis",
    "pairwise_rows_condition",
    "audit_pairwise",
]

# fixed stream tag so projection draws never collide with trial streams
_PROJECTION_TAG = 0x50524F4A


@dataclass(frozen=True)
class Dataset:
    """Point set to embed: points has shape (N, n), one point per row."""

    points: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array (N, n)")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be non-empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite input")
        if self.labels is not None and len(self.labels) != pts.shape[0]:
            raise ValueError("labels length must match the number of points")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def load_points(path: str | Path) -> Dataset:
    """Read a dataset from .npy, .csv, or .tsv (rows are points)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such dataset file: {path}")
    if path.suffix == ".npy":
        arr = np.load(path)
    elif path.suffix == ".csv":
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    elif path.suffix == ".tsv":
        arr = np.loadtxt(path, delimiter="\t", ndmin=2)
    else:
        arr = np.loadtxt(path, ndmin=2)
    return Dataset(points=np.asarray(arr, dtype=np.float64))


@dataclass(frozen=True)
class ProjectionSpec:
    """Identity of a Gaussian sketch matrix: shape (m, n) and the seed."""

    m: int
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix dimensions must be positive")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 bits")


def draw_projection(spec: ProjectionSpec) -> np.ndarray:
    """Unnormalized i.i.d. standard normal matrix of shape (m, n),
    a pure function of (m, n, seed)."""
    gen = montecarlo.trial_stream(spec.seed, _PROJECTION_TAG)
    flat = montecarlo.normal_from_stream(gen, spec.m * spec.n)
    return flat.reshape(spec.m, spec.n)


def cached_projection(spec: ProjectionSpec, cache_dir: str | Path | None = None) -> np.ndarray:
    """Projection matrix, loaded from cache_dir when a file keyed by
    (m, n, seed) exists, drawn and saved there otherwise."""
    if cache_dir is None:
        return draw_projection(spec)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"projection_m{spec.m}_n{spec.n}_seed{spec.seed}.npz"
    if path.exists():
        with np.load(path) as data:
            stored = (int(data["m"]), int(data["n"]), int(data["seed"]))
            if stored != (spec.m, spec.n, spec.seed):
                raise ValueError(f"matrix cache key mismatch in {path}")
            return np.array(data["matrix"], dtype=np.float64)
    matrix = draw_projection(spec)
    np.savez(path, matrix=matrix, m=spec.m, n=spec.n, seed=spec.seed)
    return matrix


def erasure_budget_jl(eps: float, alpha: float, m: int) -> int:
    """Largest guaranteed-safe erasure count for a pairwise audit:
    floor(m * ((1-sqrt(alpha))/32) * eps / ln(1/eps))."""
    if not 0.0 < eps < 1.0:
        raise ValueError("requires 0 < eps < 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("requires 0 < alpha < 1")
    if m < 1:
        raise ValueError("m must be positive")
    ratio = ((1.0 - math.sqrt(alpha)) / 32.0) * eps / math.log(1.0 / eps)
    return min(int(math.floor(m * ratio + 1e-9)), m - 1)


@dataclass(frozen=True)
class HypothesisCheck:
    ok: bool
    limit: float
    message: str


def jl_hypothesis(eps: float, alpha: float) -> HypothesisCheck:
    """Whether (eps, alpha) satisfies the small-distortion hypothesis
    eps < (1-sqrt(alpha))/4 under which the budget formula is proved.

    Outside it the formula still evaluates and audits still run; the flag
    records that the analytical guarantee no longer applies.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("requires 0 < alpha < 1")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    limit = (1.0 - math.sqrt(alpha)) / 4.0
    ok = eps < limit
    msg = "" if ok else (
        f"eps = {eps:.6g} is outside the proved range eps < {limit:.6g}; "
        "budget guarantee is heuristic here"
    )
    return HypothesisCheck(ok=ok, limit=limit, message=msg)


@dataclass(frozen=True)
class PairCountCondition:
    """Both readings of the pair-count side condition on m.

    literal_threshold is (1/alpha) ln(1/(N(N-1))), negative for N >= 2, so
    literal_ok is vacuously true; strict_threshold is (1/alpha) ln(N(N-1)),
    the reading that actually constrains m.
    """

    literal_threshold: float
    literal_ok: bool
    strict_threshold: float
    strict_ok: bool


def pairwise_rows_condition(n_points: int, alpha: float, m: int) -> PairCountCondition:
    if n_points < 2:
        raise ValueError("need at least 2 points")
    if not 0.0 < alpha < 1.0:
        raise ValueError("requires 0 < alpha < 1")
    if m < 1:
        raise ValueError("m must be positive")
    pairs2 = float(n_points) * (n_points - 1)
    literal = math.log(1.0 / pairs2) / alpha
    strict = math.log(pairs2) / alpha
    return PairCountCondition(
        literal_threshold=literal,
        literal_ok=m > literal,
        strict_threshold=strict,
        strict_ok=m > strict,
    )


@dataclass(frozen=True)
class PairDistortion:
    i: int
    j: int
    min_ratio: float
    max_ratio: float
    argmin_erased: int
    argmax_erased: int
    degenerate: bool

    def within(self, band: core.DistortionBand) -> bool:
        if self.degenerate:
            return True
        return band.contains(self.min_ratio, self.max_ratio)


@dataclass(frozen=True)
class DistortionReport:
    """Outcome of a pairwise audit: per-pair extreme ratios over all erasure
    patterns within budget, plus the worst offenders."""

    passed: bool
    band: core.DistortionBand
    budget: int
    mode: core.Mode
    m: int
    n_pairs: int
    audited_pairs: int
    degenerate_pairs: int
    pairs: tuple[PairDistortion, ...]
    worst_min: float
    worst_min_pair: tuple[int, int] | None
    worst_max: float
    worst_max_pair: tuple[int, int] | None


def audit_pairwise(
    data: Dataset,
    matrix: np.ndarray,
    band: core.DistortionBand,
    budget: int,
    mode: core.Mode = core.Mode.UNIFORM,
) -> DistortionReport:
    """Exact audit of all point pairs under every erasure pattern of size
    <= budget.

    For each pair the normalized difference is sketched and the worst-case
    min/max energy ratios are computed by the sorting reduction; the audit
    passes when every non-degenerate pair stays inside band.  Coincident
    points make a degenerate pair, flagged and treated as a vacuous pass.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-d")
    m, n = matrix.shape
    if n != data.dim:
        raise ValueError("matrix width does not match the point dimension")
    if not 0 <= budget <= m - 1:
        raise ValueError("budget must lie in [0, m-1]")

    pts = data.points
    n_pts = data.n_points
    idx_i, idx_j = np.triu_indices(n_pts, k=1)
    n_pairs = idx_i.size
    if n_pairs == 0:
        return DistortionReport(
            passed=True, band=band, budget=budget, mode=mode, m=m,
            n_pairs=0, audited_pairs=0, degenerate_pairs=0, pairs=(),
            worst_min=math.nan, worst_min_pair=None,
            worst_max=math.nan, worst_max_pair=None,
        )

    diffs = pts[idx_i] - pts[idx_j]
    norms = np.linalg.norm(diffs, axis=1)
    degenerate = norms == 0.0
    unit = np.zeros_like(diffs)
    live = ~degenerate
    unit[live] = diffs[live] / norms[live, None]

    sketched = unit @ matrix.T
    sq = sketched * sketched
    sq.sort(axis=1)
    prefix = np.zeros((n_pairs, m + 1), dtype=np.float64)
    np.cumsum(sq[:, ::-1], axis=1, out=prefix[:, 1:])
    tail = np.zeros((n_pairs, m + 1), dtype=np.float64)
    np.cumsum(sq, axis=1, out=tail[:, 1:])
    mins, maxes = core.prefix_extremes(prefix, tail, budget, mode)
    arg_min, arg_max = core.canonical_arg_erased(budget, mode)

    rows = []
    worst_min = math.inf
    worst_min_pair = None
    worst_max = -math.inf
    worst_max_pair = None
    passed = True
    for p in range(n_pairs):
        deg = bool(degenerate[p])
        pd = PairDistortion(
            i=int(idx_i[p]),
            j=int(idx_j[p]),
            min_ratio=math.nan if deg else float(mins[p]),
            max_ratio=math.nan if deg else float(maxes[p]),
            argmin_erased=arg_min,
            argmax_erased=arg_max,
            degenerate=deg,
        )
        rows.append(pd)
        if deg:
            continue
        if pd.min_ratio < worst_min:
            worst_min = pd.min_ratio
            worst_min_pair = (pd.i, pd.j)
        if pd.max_ratio > worst_max:
            worst_max = pd.max_ratio
            worst_max_pair = (pd.i, pd.j)
        if not pd.within(band):
            passed = False

    n_deg = int(np.count_nonzero(degenerate))
    return DistortionReport(
        passed=passed,
        band=band,
        budget=budget,
        mode=mode,
        m=m,
        n_pairs=n_pairs,
        audited_pairs=n_pairs - n_deg,
        degenerate_pairs=n_deg,
        pairs=tuple(rows),
        worst_min=worst_min if worst_min_pair is not None else math.nan,
        worst_min_pair=worst_min_pair,
        worst_max=worst_max if worst_max_pair is not None else math.nan,
        worst_max_pair=worst_max_pair,
    )
