"""Closed-form bounds and constants for erasure-robust Gaussian sketching.

Everything here is a deterministic pure function: both Lambert W branches
(Halley iteration with branch-specific initial guesses), the derived
small-distortion constants, chi-square tail rates, the admissible-erasure
thresholds in both directions, distortion-level (theta/omega) bounds,
Gaussian order-statistic expectation brackets, row-count sizing for pairwise
dimension reduction, sparse-recovery admissibility checks, and Monte Carlo
calibration of the order-statistic coefficient c.

Invalid preconditions yield flagged values (``BoundValue.valid = False``)
rather than exceptions so whole parameter grids can be tabulated; hard
domain errors (e.g. a Lambert W argument off its branch) still raise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

__all__ = [
    "GaussianConstants",
    "BoundValue",
    "BoundReport",
    "TailBound",
    "OrderStatBounds",
    "PartialSumBounds",
    "RipAdmissibility",
    "lambert_w0",
    "lambert_wm1",
    "gaussian_constants",
    "abs_moment_coeff",
    "chi2_exponent_rate",
    "chi2_tail_bound",
    "beta_conditions_hold",
    "beta_lower_bounds",
    "beta_upper_bounds",
    "theta_omega_bounds",
    "order_stat_expectation_bounds",
    "partial_sum_expectation_bounds",
    "jl_min_rows",
    "rip_admissibility",
    "calibrate_cg",
    "write_constants",
    "load_constants",
]

_BRANCH_POINT = -math.exp(-1.0)  # -1/e, shared domain edge of both branches


# ---------------------------------------------------------------------------
# Lambert W
# ---------------------------------------------------------------------------

def _halley_w(x: float, w: float, lower_branch: bool) -> float:
    """Halley iteration for w*e^w = x from a branch-appropriate start."""
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-14 * max(1.0, abs(x)):
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            w += 1e-9 if not lower_branch else -1e-9
            continue
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0 or not math.isfinite(denom):
            break
        w_next = w - f / denom
        # keep the iterate on its branch
        if lower_branch:
            w_next = min(w_next, -1.0)
        else:
            w_next = max(w_next, -1.0)
        if w_next == w:
            break
        w = w_next
    return w


def _bisect_w(x: float, lower_branch: bool) -> float:
    """Monotone bisection fallback; w*e^w is monotone on each branch."""
    g = lambda w: w * math.exp(w)
    if lower_branch:
        hi = -1.0
        lo = -2.0
        while g(lo) < x:  # g increases toward 0 as w -> -inf
            lo *= 2.0
            if lo < -750.0:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < x:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)
    lo = -1.0
    hi = 1.0
    while g(hi) < x:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _residual_ok(w: float, x: float) -> bool:
    return abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


def lambert_w0(x: float) -> float:
    """Principal branch: w >= -1 with w*e^w = x, for x >= -1/e.

    Residual contract: |w e^w - x| <= 1e-12 * max(1, |x|).
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("Lambert W domain: argument must be finite")
    if x < _BRANCH_POINT:
        if x > _BRANCH_POINT - 1e-15:
            x = _BRANCH_POINT
        else:
            raise ValueError("Lambert W domain: principal branch needs x >= -1/e")
    if x == 0.0:
        return 0.0
    if x == _BRANCH_POINT:
        return -1.0
    if x < -0.25:
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
    elif x < math.e:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    w = _halley_w(x, w, lower_branch=False)
    if not _residual_ok(w, x):
        w = _halley_w(x, _bisect_w(x, lower_branch=False), lower_branch=False)
    return w


def lambert_wm1(x: float) -> float:
    """Lower branch: w <= -1 with w*e^w = x, for x in [-1/e, 0)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("Lambert W domain: argument must be finite")
    if x >= 0.0:
        raise ValueError("Lambert W domain: lower branch needs x < 0")
    if x < _BRANCH_POINT:
        if x > _BRANCH_POINT - 1e-15:
            x = _BRANCH_POINT
        else:
            raise ValueError("Lambert W domain: lower branch needs x >= -1/e")
    if x == _BRANCH_POINT:
        return -1.0
    if x < -0.25:
        p = -math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    w = _halley_w(x, w, lower_branch=True)
    if not _residual_ok(w, x):
        w = _halley_w(x, _bisect_w(x, lower_branch=True), lower_branch=True)
    return w


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def abs_moment_coeff(p: float) -> float:
    """Coefficient C_p = p*(pi/2)^(1-p/2) in E|y_(j)|^p <= C_p(1/j + ln(m/j))."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    return p * (math.pi / 2.0) ** (1.0 - p / 2.0)


@dataclass(frozen=True)
class GaussianConstants:
    """Order-statistic coefficient c and the constants derived from it.

    c is the coefficient in the expectation lower bound
    ``E (j-th largest of m absolute normals) >= c*sqrt(ln(2m/j))`` for
    j <= m/2; no closed form pins its value, so the default is produced by
    ``calibrate_cg`` and pinned in the packaged constants file.

    eps0 = max over x >= 2 of (c^2 ln(2x) - 1)/(x - 1) is the distortion
    threshold below which the sharp small-eps upper bounds apply; beta0 in
    (0, 1/2] is the maximizer 1/x*.  c_abs_p1/c_abs_p2 are the absolute
    moment coefficients C_1 = sqrt(pi/2), C_2 = 2.
    """

    c: float
    eps0: float
    beta0: float
    c_abs_p1: float = field(default=math.sqrt(math.pi / 2.0))
    c_abs_p2: float = field(default=2.0)
    source: str = "configured"
    calibration: dict | None = None


def gaussian_constants(
    c: float, source: str = "configured", calibration: dict | None = None
) -> GaussianConstants:
    """Derive eps0/beta0 from the order-statistic coefficient c > 0.

    Branch rule: if c^2*ln(4/sqrt(e)) > 1 the maximum of
    (c^2 ln(2x) - 1)/(x - 1) over x >= 2 sits at the boundary x = 2
    (beta0 = 1/2, eps0 = c^2 ln4 - 1); otherwise it is interior with
    beta0 = -W0(-2 e^(-1 - 1/c^2)) and eps0 = c^2 * beta0.
    """
    c = float(c)
    if not (math.isfinite(c) and c > 0):
        raise ValueError("c must be a positive real")
    if c * c * math.log(4.0 / math.sqrt(math.e)) > 1.0:
        beta0 = 0.5
        eps0 = c * c * math.log(4.0) - 1.0
    else:
        beta0 = -lambert_w0(-2.0 * math.exp(-1.0 - 1.0 / (c * c)))
        eps0 = c * c * beta0
    return GaussianConstants(
        c=c, eps0=eps0, beta0=beta0, source=source, calibration=calibration
    )


def write_constants(gc: GaussianConstants, path: str) -> None:
    """Persist the coefficient and its provenance as JSON (derived fields are
    recomputed on load, never trusted from disk)."""
    payload = {"c": gc.c, "source": gc.source, "calibration": gc.calibration}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_constants(path: str | None = None) -> GaussianConstants:
    """Load the pinned coefficient; default is the packaged constants file."""
    if path is None:
        ref = resources.files("erasketch").joinpath("data/gaussian_constants.json")
        raw = json.loads(ref.read_text(encoding="utf-8"))
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    return gaussian_constants(
        raw["c"], source=raw.get("source", "configured"),
        calibration=raw.get("calibration"),
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundValue:
    value: float
    valid: bool
    note: str = ""


@dataclass(frozen=True)
class BoundReport:
    """Named bound values with validity flags plus the echoed inputs."""

    inputs: dict
    bounds: dict[str, BoundValue]
    h_beta: float | None = None

    def value(self, bound_id: str) -> float:
        return self.bounds[bound_id].value

    def valid(self, bound_id: str) -> bool:
        return self.bounds[bound_id].valid


@dataclass(frozen=True)
class TailBound:
    rate: float
    one_sided: float
    two_sided: float


def chi2_exponent_rate(eps: float) -> float:
    """Exponent rate eps^2/4 - eps^3/6 of the normalized chi-square tail."""
    return eps * eps / 4.0 - eps ** 3 / 6.0


def chi2_tail_bound(eps: float, m: int) -> TailBound:
    """Tail bound P{ |chi2_m/m - 1| > eps } sides: e^{-(eps^2/4-eps^3/6) m}.

    one_sided bounds each of the upper and lower deviations; two_sided is
    their union bound.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be positive")
    rate = chi2_exponent_rate(eps)
    one = math.exp(-rate * m)
    return TailBound(rate=rate, one_sided=one, two_sided=2.0 * one)


# ---------------------------------------------------------------------------
# Admissible erasure ratio: lower thresholds
# ---------------------------------------------------------------------------

def _entropy(b: float) -> float:
    """b * ln(e/b), increasing on (0, 1]."""
    return b * (1.0 - math.log(b))


def _solve_entropy(rhs: float) -> float:
    """Largest beta in (0,1] with beta*ln(e/beta) = rhs, by bisection.

    The map is increasing on (0,1] with range (0,1]; absolute tolerance 1e-12.
    """
    if not 0.0 < rhs <= 1.0:
        raise ValueError("entropy equation rhs must lie in (0, 1]")
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _entropy(mid) <= rhs:
            lo = mid
        else:
            hi = mid
    return lo


def beta_conditions_hold(eps: float, alpha: float, beta: float) -> bool:
    """Check the admissibility pair for a candidate erasure ratio beta:
    0 < beta <= (1-sqrt(alpha))*eps/(1+eps)  and
    beta*ln(e/beta) <= (eps/2)*(sqrt(1-sqrt(alpha)) - sqrt(alpha*eps/2))^2.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if not 0.0 < beta < 1.0:
        return False
    sa = math.sqrt(alpha)
    cap = (1.0 - sa) * eps / (1.0 + eps)
    rhs = (eps / 2.0) * (math.sqrt(1.0 - sa) - math.sqrt(alpha * eps / 2.0)) ** 2
    return beta <= cap and _entropy(beta) <= rhs


def beta_lower_bounds(eps: float, alpha: float) -> BoundReport:
    """Admissible-erasure-ratio lower thresholds at distortion eps, level alpha.

    Reported entries:
      beta_lower_log          (1-sqrt(a))eps / (16 ln(4/((1-sqrt(a))eps)))
      beta_lower_simple       ((1-sqrt(a))/32) * eps/ln(1/eps)
      beta_lower_entropy_root largest beta with beta*ln(e/beta) =
                              (eps/2)(sqrt(1-sqrt(a)) - sqrt(a*eps/2))^2
      beta_pair_cap           (1-sqrt(a))eps/(1+eps), the companion cap that
                              together with the entropy condition forms the
                              admissibility pair checked by
                              ``beta_conditions_hold``
    Each entry carries its own validity flag; out-of-range requests are
    flagged, not raised.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not (math.isfinite(eps) and eps > 0.0):
        raise ValueError("eps must be positive")
    sa = math.sqrt(alpha)
    oms = 1.0 - sa
    bounds: dict[str, BoundValue] = {}

    log_arg = 4.0 / (oms * eps)
    if log_arg > 1.0:
        t1 = oms * eps / (16.0 * math.log(log_arg))
    else:
        t1 = math.nan
    t1_valid = eps <= min(1.0, oms / (4.0 * alpha))
    bounds["beta_lower_log"] = BoundValue(
        t1, t1_valid, "" if t1_valid else f"needs eps <= min(1, {oms / (4 * alpha):.6g})"
    )

    if eps < 1.0:
        t2 = (oms / 32.0) * eps / math.log(1.0 / eps)
    else:
        t2 = math.nan
    t2_valid = eps < oms / 4.0
    bounds["beta_lower_simple"] = BoundValue(
        t2, t2_valid, "" if t2_valid else f"needs eps < (1-sqrt(alpha))/4 = {oms / 4:.6g}"
    )

    pair_valid = eps <= min(1.0, oms / (alpha / 2.0))
    rhs = (eps / 2.0) * (math.sqrt(oms) - math.sqrt(alpha * eps / 2.0)) ** 2
    if 0.0 < rhs <= 1.0:
        root = _solve_entropy(rhs)
    else:
        root = math.nan
    bounds["beta_lower_entropy_root"] = BoundValue(
        root,
        pair_valid and math.isfinite(root),
        "" if pair_valid else f"needs eps <= min(1, {oms / (alpha / 2.0):.6g})",
    )
    bounds["beta_pair_cap"] = BoundValue(
        oms * eps / (1.0 + eps),
        pair_valid,
        "companion cap of the admissibility pair",
    )

    return BoundReport(inputs={"eps": eps, "alpha": alpha}, bounds=bounds)


# ---------------------------------------------------------------------------
# Admissible erasure ratio: upper thresholds
# ---------------------------------------------------------------------------

def beta_upper_bounds(
    eps: float, gc: GaussianConstants, prob_const: float = 3.0
) -> BoundReport:
    """Upper thresholds on the admissible erasure ratio at distortion eps.

    Entries:
      beta_upper_moderate          (1 + 1/eps0) eps / (c^2 ln(2 eps0/eps))
      beta_upper_w_root            eps / (-c^2 W_{-1}(-eps/(2c^2))), the exact
                                   root of c^2 * beta * ln(2/beta) = eps
      beta_upper_w_log             eps / (2c^2 ln(2c^2/eps)); WARNING: its
                                   printed ordering against the W-form fails
                                   numerically (e.g. c=1, eps=0.3 gives
                                   0.1002 > 0.0791); the W-root is authoritative
      beta_upper_envelope          (2 + 2 eps0)/(c^2 eps0) * eps/ln(1/eps)
      beta_upper_envelope_uniform  (1/(4c^2)) * eps/ln(1/eps)

    prob_const is the multiplicative constant of the probability target the
    thresholds refer to (any value > 2 works; echoed, does not change values).
    """
    if not (math.isfinite(eps) and eps > 0.0):
        raise ValueError("eps must be positive")
    if prob_const <= 2.0:
        raise ValueError("prob_const must exceed 2")
    c2 = gc.c * gc.c
    eps0 = gc.eps0
    bounds: dict[str, BoundValue] = {}

    if eps < 2.0 * eps0:
        u1 = (1.0 + 1.0 / eps0) * eps / (c2 * math.log(2.0 * eps0 / eps))
    else:
        u1 = math.nan
    u1_valid = 0.0 < eps < min(1.0, eps0)
    bounds["beta_upper_moderate"] = BoundValue(
        u1, u1_valid, "" if u1_valid else f"needs eps < min(1, eps0={eps0:.6g})"
    )

    w_arg = -eps / (2.0 * c2)
    u2_range = 0.0 < eps < min(1.0, c2 * math.log(2.0), 1.0 / (2.0 * c2))
    if w_arg >= _BRANCH_POINT:
        u2 = eps / (-c2 * lambert_wm1(w_arg))
    else:
        u2 = math.nan
    bounds["beta_upper_w_root"] = BoundValue(
        u2,
        u2_range and math.isfinite(u2),
        "exact root of c^2*beta*ln(2/beta) = eps (lower W branch; the source "
        "formula's subscript is ambiguous, the lower branch is what its proof uses)",
    )

    if eps < 2.0 * c2:
        u3 = eps / (2.0 * c2 * math.log(2.0 * c2 / eps))
    else:
        u3 = math.nan
    bounds["beta_upper_w_log"] = BoundValue(
        u3,
        u2_range and math.isfinite(u3),
        "WARNING: printed ordering w_root <= w_log fails numerically; "
        "beta_upper_w_root is authoritative",
    )

    if eps < 1.0:
        env = (2.0 + 2.0 * eps0) / (c2 * eps0) * eps / math.log(1.0 / eps)
        env_u = eps / (4.0 * c2 * math.log(1.0 / eps))
    else:
        env = env_u = math.nan
    env_valid = 0.0 < eps < min(1.0, eps0, 4.0 * eps0 * eps0)
    bounds["beta_upper_envelope"] = BoundValue(
        env, env_valid, "" if env_valid else "needs eps < min(1, eps0, 4*eps0^2)"
    )
    envu_valid = u2_range
    bounds["beta_upper_envelope_uniform"] = BoundValue(
        env_u, envu_valid and math.isfinite(env_u),
        "" if envu_valid else "needs eps < min(1, c^2 ln2, 1/(2c^2))",
    )

    return BoundReport(
        inputs={"eps": eps, "c": gc.c, "eps0": eps0, "prob_const": prob_const},
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Distortion-level (theta/omega) bounds
# ---------------------------------------------------------------------------

def theta_omega_bounds(
    beta: float,
    alpha: float,
    gc: GaussianConstants,
    m: int | None = None,
) -> BoundReport:
    """All floor/ceiling bounds on sustainable distortion levels at ratio beta.

    Per-survivor normalization entries: theta_lower, theta_upper, omega_lower,
    omega_upper; uniform normalization adds the _uniform variants.  The
    confidence-level refinements are theta_lower_alpha / omega_upper_alpha
    (per-survivor) and theta_lower_alpha_uniform / omega_lower_alpha_uniform.
    When m is given, theta_finite_m / omega_finite_m report the usable
    finite-sample pair for dimension-reduction audits.

    h_beta = min(3/4 - beta/2, 1 - beta) throughout.  The alpha-dependent
    theta formulas are valid only when alpha < (pi/12)(1-beta)^2 h_beta;
    out-of-range values are flagged, not raised.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    c2 = gc.c * gc.c
    ob = 1.0 - beta
    h = min(0.75 - beta / 2.0, ob)
    piece = min((3.0 - 2.0 * beta) / (4.0 * ob), 1.0)
    bounds: dict[str, BoundValue] = {}

    theta_lower = (math.pi / 6.0) * ob * ob * piece
    theta_upper = min((math.pi / 2.0) * math.log(1.0 / beta) ** 2, 1.0)
    omega_lower = max(c2 * math.log(2.0 / ob), (math.pi / 2.0) * beta * beta)
    omega_upper = 2.0 * (1.0 + math.log(1.0 / ob))
    bounds["theta_lower"] = BoundValue(theta_lower, True)
    bounds["theta_upper"] = BoundValue(theta_upper, True)
    bounds["omega_lower"] = BoundValue(omega_lower, True)
    bounds["omega_upper"] = BoundValue(omega_upper, True)
    bounds["theta_lower_uniform"] = BoundValue(ob * theta_lower, True)
    bounds["theta_upper_uniform"] = BoundValue(ob * theta_upper, True)
    bounds["omega_lower_uniform"] = BoundValue(ob * omega_lower, True)
    bounds["omega_upper_uniform"] = BoundValue(ob * omega_upper, True)

    alpha_cap = (math.pi / 12.0) * ob * ob * h
    a_valid = alpha < alpha_cap
    a_note = "" if a_valid else f"needs alpha < (pi/12)(1-beta)^2 h = {alpha_cap:.6g}"
    tla = (
        (math.pi / 6.0) * ob * h
        + 2.0 * alpha / ob
        - 2.0 * math.sqrt(math.pi * alpha * h / 3.0)
    )
    bounds["theta_lower_alpha"] = BoundValue(tla, a_valid, a_note)
    oua = (
        2.0 * math.log(math.e / ob)
        + 2.0 * alpha / ob
        + 4.0 * math.sqrt(alpha / ob * math.log(math.e / ob))
    )
    bounds["omega_upper_alpha"] = BoundValue(oua, True)
    tlau = (
        (math.pi / 6.0) * ob * ob * h
        + 2.0 * alpha
        - 2.0 * ob * math.sqrt(math.pi * alpha * h / 3.0)
    )
    bounds["theta_lower_alpha_uniform"] = BoundValue(tlau, a_valid, a_note)
    bounds["omega_lower_alpha_uniform"] = BoundValue(
        ob * omega_lower, True, "level-free floor, holds at every confidence level"
    )

    if m is not None:
        m = int(m)
        if m < 1:
            raise ValueError("m must be positive")
        x = ob - 1.0 / m
        if x < 0.0:
            raise ValueError(
                f"no surviving rows at this beta: need m >= 1/(1-beta) = {1.0 / ob:.6g}"
            )
        term = 0.0 if x == 0.0 else 2.0 * x * math.log(math.e / x)
        omega_m = (math.sqrt(term) + math.sqrt(2.0 * alpha)) ** 2
        bounds["theta_finite_m"] = BoundValue(tlau, a_valid, a_note)
        bounds["omega_finite_m"] = BoundValue(omega_m, True)

    return BoundReport(
        inputs={"beta": beta, "alpha": alpha, "c": gc.c, "m": m},
        bounds=bounds,
        h_beta=h,
    )


# ---------------------------------------------------------------------------
# Order-statistic expectation brackets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderStatBounds:
    lower: float | None
    upper: float


def order_stat_expectation_bounds(m: int, j: int, p: float = 1.0) -> OrderStatBounds:
    """Bracket E|y_(j)|^p for the j-th largest of m absolute standard normals.

    upper = C_p*(1/j + ln(m/j)) with C_p = p*(pi/2)^(1-p/2);
    lower = sqrt(pi/2)*(m+1-j)/(m+1), reported only for p = 1.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if not 1 <= j <= m:
        raise ValueError("j must lie in [1, m]")
    cp = abs_moment_coeff(p)
    upper = cp * (1.0 / j + math.log(m / j))
    lower = math.sqrt(math.pi / 2.0) * (m + 1 - j) / (m + 1) if p == 1.0 else None
    return OrderStatBounds(lower=lower, upper=upper)


@dataclass(frozen=True)
class PartialSumBounds:
    top_upper: float
    tail_lower: float | None
    tail_upper: float | None


def partial_sum_expectation_bounds(m: int, k: int) -> PartialSumBounds:
    """Expectation brackets for root-mean partial sums of sorted squares.

    top_upper bounds E sqrt((1/k) sum of the k largest squares) by
    sqrt(2 ln(em/k)); tail_lower/tail_upper bracket
    E sqrt((1/(m-k)) sum of the m-k smallest squares) and require k <= m-1.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if not 1 <= k <= m:
        raise ValueError("k must lie in [1, m]")
    top_upper = math.sqrt(2.0 * math.log(math.e * m / k))
    if k == m:
        return PartialSumBounds(top_upper=top_upper, tail_lower=None, tail_upper=None)
    g = k / m
    tail_lower = math.sqrt(math.pi / 6.0) * math.sqrt(
        (1.0 - g) * (1.0 - g + 1.0 / (2.0 * m)) / (1.0 + 1.0 / m)
    )
    tail_upper = math.sqrt(
        2.0 - (2.0 * g / (1.0 - g)) * math.log((1.0 + 1.0 / m) / (g + 1.0 / m))
    )
    return PartialSumBounds(
        top_upper=top_upper, tail_lower=tail_lower, tail_upper=tail_upper
    )


# ---------------------------------------------------------------------------
# Sizing and admissibility
# ---------------------------------------------------------------------------

def jl_min_rows(n_points: int, eps: float, alpha: float) -> int:
    """Smallest row count m making the pairwise-distortion failure bound
    (3/2)N(N-1) e^{-alpha (eps^2/4 - eps^3/6) m} drop below 1.

    m is the smallest integer strictly greater than
    ln(3 N(N-1)/2) / (alpha (eps^2/4 - eps^3/6)).
    """
    if n_points < 2:
        raise ValueError("need at least 2 points for a pairwise audit")
    if not 0.0 < eps < 1.0:
        raise ValueError("requires 0 < eps < 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("requires 0 < alpha < 1")
    quotient = math.log(1.5 * n_points * (n_points - 1)) / (
        alpha * chi2_exponent_rate(eps)
    )
    return int(math.floor(quotient)) + 1


@dataclass(frozen=True)
class RipAdmissibility:
    ok: bool
    lhs: float
    rhs: float
    slack: float
    fail_prob_bound: float
    variant: str


def rip_admissibility(
    n: int, s: int, m: int, eps: float, alpha: float, variant: str = "symmetric"
) -> RipAdmissibility:
    """Support-count admissibility s*ln(24en/(eps*s)) < rhs for sparse bands.

    variant "symmetric": rhs = alpha*(eps^2/16 - eps^3/24)*m - ln3 (band
    (1-eps, 1+eps)); variant "two_level": rhs = alpha*m - ln2 (band
    (theta(1-eps), omega(1+eps))).  fail_prob_bound = exp(-slack) is the
    corresponding union-bound failure probability (may exceed 1 when the
    inequality fails badly).
    """
    if not 1 <= s <= n:
        raise ValueError("need 1 <= s <= n")
    if m < 1:
        raise ValueError("m must be positive")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lhs = s * math.log(24.0 * math.e * n / (eps * s))
    if variant == "symmetric":
        rhs = alpha * (eps * eps / 16.0 - eps ** 3 / 24.0) * m - math.log(3.0)
    elif variant == "two_level":
        rhs = alpha * m - math.log(2.0)
    else:
        raise ValueError("variant must be 'symmetric' or 'two_level'")
    slack = rhs - lhs
    try:
        fail = math.exp(-slack)
    except OverflowError:
        fail = math.inf
    return RipAdmissibility(
        ok=lhs < rhs, lhs=lhs, rhs=rhs, slack=slack, fail_prob_bound=fail,
        variant=variant,
    )


# ---------------------------------------------------------------------------
# Calibration of c
# ---------------------------------------------------------------------------

def calibrate_cg(
    m_grid: Sequence[int],
    trials: int,
    seed: int,
    workers: int = 1,
    date: str | None = None,
) -> GaussianConstants:
    """Monte Carlo calibration of the order-statistic coefficient c.

    For each m in m_grid estimates E|y_(j)| for j = 1..m//2 and takes

        c_hat = min over (m, j) of (mean - 3*SE) / sqrt(ln(2m/j)),

    the 3-standard-error shrink applied per candidate for conservatism.
    Deterministic per-m substreams derive from (seed, m); results are
    independent of the worker count.
    """
    from . import montecarlo  # deferred: montecarlo depends on core only

    grid = sorted({int(x) for x in m_grid})
    if not grid:
        raise ValueError("empty grid")
    if any(m < 2 for m in grid):
        raise ValueError("every m in the grid must be >= 2")
    if trials < 2:
        raise ValueError("need at least 2 trials")

    import numpy as np

    best = math.inf
    for m in grid:
        plan = montecarlo.TrialPlan(
            m=m, trials=trials,
            master_seed=montecarlo.derive_seed(seed, m), workers=workers,
        )
        stats = montecarlo.empirical_order_stat_means(m, plan)
        half = m // 2
        js = np.arange(1, half + 1, dtype=np.float64)
        denom = np.sqrt(np.log(2.0 * m / js))
        ratios = (stats.means[:half] - 3.0 * stats.ses[:half]) / denom
        best = min(best, float(ratios.min()))

    calibration = {
        "seed": int(seed),
        "m_grid": grid,
        "trials": int(trials),
        "date": date if date is not None else "unspecified",
    }
    return gaussian_constants(best, source="calibrated", calibration=calibration)
