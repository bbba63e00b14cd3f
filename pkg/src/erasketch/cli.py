"""Command-line front end.

One config file drives everything: a JSON object with global keys (seed,
workers, format, out, constants) and one block per command holding that
command's parameters.  Flags override the config; the environment variables
ERASKETCH_OUT and ERASKETCH_WORKERS override only the output path and the
worker count, never a mathematical parameter.

Primary output (JSON or long-format CSV) is byte-identical across runs and
worker counts for a fixed config and constants file; anything
time-dependent goes to stderr.

Exit codes: 0 success, 1 audit or certification failure, 2 invalid config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import bounds, core, jl, montecarlo, rip

_EXIT_OK = 0
_EXIT_AUDIT_FAIL = 1
_EXIT_BAD_CONFIG = 2

_COMMANDS = (
    "bounds",
    "estimate",
    "quantiles",
    "tailcheck",
    "calibrate-cg",
    "oracle",
    "jl",
    "rip",
    "bernoulli-demo",
    "orderstats",
)

_CSV_FIELDS = (
    "command",
    "inputs",
    "quantity",
    "value",
    "ci_low",
    "ci_high",
    "bound_value",
    "bound_id",
    "seed",
    "constants",
)


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _inputs_str(d: dict) -> str:
    return "|".join(f"{k}={_fmt(v)}" for k, v in sorted(d.items()))


class Row:
    """One long-format record: an input tuple, a named quantity, its value,
    and optionally a confidence interval and the bound it is checked against."""

    def __init__(self, inputs: dict, quantity: str, value,
                 ci=(None, None), bound_value=None, bound_id=""):
        self.inputs = inputs
        self.quantity = quantity
        self.value = value
        self.ci = ci
        self.bound_value = bound_value
        self.bound_id = bound_id

    def as_json(self) -> dict:
        d = {"inputs": self.inputs, "quantity": self.quantity, "value": self.value}
        if self.ci != (None, None):
            d["ci_low"], d["ci_high"] = self.ci
        if self.bound_value is not None:
            d["bound_value"] = self.bound_value
        if self.bound_id:
            d["bound_id"] = self.bound_id
        return d


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _require(block: dict, key: str, kind, what: str):
    if key not in block:
        raise ConfigError(f"missing key '{key}' in the {what} block")
    v = block[key]
    if kind is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, kind):
        raise ConfigError(f"key '{key}' in the {what} block has the wrong type")
    return v


def _positive_int(block: dict, key: str, what: str) -> int:
    v = _require(block, key, int, what)
    if isinstance(v, bool) or v < 1:
        raise ConfigError(f"key '{key}' in the {what} block must be a positive integer")
    return v


def _mode_of(block: dict) -> core.Mode:
    return core.Mode.parse(block.get("mode", "uniform"))


def _constants(args, cfg) -> bounds.GaussianConstants:
    path = args.constants or cfg.get("constants")
    try:
        return bounds.load_constants(path)
    except FileNotFoundError:
        raise ConfigError(f"constants file not found: {path}")


def _seed_of(args, cfg) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < (1 << 64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def _workers_of(args, cfg) -> int:
    if args.workers is not None:
        w = args.workers
    elif "ERASKETCH_WORKERS" in os.environ:
        try:
            w = int(os.environ["ERASKETCH_WORKERS"])
        except ValueError:
            raise ConfigError("ERASKETCH_WORKERS must be an integer")
    else:
        w = cfg.get("workers", 1)
    if not isinstance(w, int) or w < 1:
        raise ConfigError("workers must be a positive integer")
    return w


# ---------------------------------------------------------------------------
# Command implementations: each returns (rows, audit_ok)
# ---------------------------------------------------------------------------

def _cmd_bounds(block: dict, gc: bounds.GaussianConstants, seed: int, workers: int):
    rows: list[Row] = []
    alpha = float(block.get("alpha", 0.25))
    m = block.get("m")
    m = int(m) if m is not None else None
    for eps in block.get("eps_grid", []):
        eps = float(eps)
        rep_l = bounds.beta_lower_bounds(eps, alpha)
        rep_u = bounds.beta_upper_bounds(eps, gc)
        inputs = {"eps": eps, "alpha": alpha}
        for rep in (rep_l, rep_u):
            for bid, bv in sorted(rep.bounds.items()):
                rows.append(Row(dict(inputs, valid=bv.valid), bid, bv.value,
                                bound_id=bid))
        m_tail = m if m is not None else 100
        tb = bounds.chi2_tail_bound(eps, m_tail)
        rows.append(Row(dict(inputs, m=m_tail),
                        "chi2_tail_two_sided", tb.two_sided,
                        bound_id="chi2_tail_two_sided"))
    for beta in block.get("beta_grid", []):
        beta = float(beta)
        rep = bounds.theta_omega_bounds(beta, alpha, gc, m=m)
        inputs = {"beta": beta, "alpha": alpha, "m": m}
        for bid, bv in sorted(rep.bounds.items()):
            rows.append(Row(dict(inputs, valid=bv.valid), bid, bv.value,
                            bound_id=bid))
    if not rows:
        raise ConfigError("bounds block needs an eps_grid or a beta_grid")
    return rows, True


def _cmd_estimate(block: dict, gc, seed: int, workers: int):
    m = _positive_int(block, "m", "estimate")
    trials = _require(block, "trials", int, "estimate")
    if trials < 1:
        raise ConfigError("trials must be a positive integer")
    beta = _require(block, "beta", float, "estimate")
    mode = _mode_of(block)
    if "band" in block:
        lo, hi = (float(v) for v in block["band"])
        band = core.DistortionBand(lo, hi)
    else:
        band = core.DistortionBand.symmetric(_require(block, "eps", float, "estimate"))
    plan = montecarlo.TrialPlan(m=m, trials=trials, master_seed=seed, workers=workers)
    res = montecarlo.estimate_membership(band, beta, mode, plan)
    inputs = {"m": m, "beta": beta, "mode": mode.value,
              "band_lo": band.lo, "band_hi": band.hi, "trials": trials}
    rows = [Row(inputs, "membership_prob", res.point,
                ci=(res.ci_low, res.ci_high))]
    if "alpha" in block and "eps" in block:
        alpha = float(block["alpha"])
        rate = bounds.chi2_exponent_rate(float(block["eps"]))
        lower = 1.0 - 3.0 * math.exp(-alpha * rate * m)
        rows.append(Row(inputs, "membership_prob_floor", lower,
                        bound_value=lower, bound_id="membership_prob_floor"))
    return rows, True


def _cmd_quantiles(block: dict, gc, seed: int, workers: int):
    m = _positive_int(block, "m", "quantiles")
    trials = _positive_int(block, "trials", "quantiles")
    beta = _require(block, "beta", float, "quantiles")
    levels = block.get("levels", [0.01, 0.05, 0.5, 0.95, 0.99])
    mode = _mode_of(block)
    plan = montecarlo.TrialPlan(m=m, trials=trials, master_seed=seed, workers=workers)
    res = montecarlo.estimate_quantiles(beta, mode, plan, levels)
    inputs = {"m": m, "beta": beta, "mode": mode.value, "trials": trials}
    rows = []
    for q, lo_v, hi_v in zip(res.levels, res.min_quantiles, res.max_quantiles):
        rows.append(Row(dict(inputs, level=q), "min_ratio_quantile", lo_v))
        rows.append(Row(dict(inputs, level=q), "max_ratio_quantile", hi_v))
    return rows, True


def _cmd_tailcheck(block: dict, gc, seed: int, workers: int):
    trials = _positive_int(block, "trials", "tailcheck")
    m_grid = block.get("m_grid") or [_positive_int(block, "m", "tailcheck")]
    eps_grid = block.get("eps_grid") or [_require(block, "eps", float, "tailcheck")]
    rows, ok = [], True
    for m in m_grid:
        m = int(m)
        plan = montecarlo.TrialPlan(
            m=m, trials=trials,
            master_seed=montecarlo.derive_seed(seed, m), workers=workers,
        )
        spec = core.ErasureSpec.from_budget(0, m, core.Mode.UNIFORM)
        mins, _ = montecarlo.collect_extremes(plan, [spec])
        ratios = mins[0]  # at budget 0 min == max == total/m
        for eps in eps_grid:
            eps = float(eps)
            bound = bounds.chi2_tail_bound(eps, m).one_sided
            for name, count in (
                ("upper_exceed_freq", int(np.count_nonzero(ratios > 1.0 + eps))),
                ("lower_exceed_freq", int(np.count_nonzero(ratios < 1.0 - eps))),
            ):
                freq = count / trials
                se = math.sqrt(max(freq * (1.0 - freq), 1.0 / trials) / trials)
                ci = montecarlo.clopper_pearson(count, trials)
                if freq > bound + 3.0 * se:
                    ok = False
                rows.append(Row({"m": m, "eps": eps, "trials": trials},
                                name, freq, ci=ci,
                                bound_value=bound, bound_id="chi2_tail_one_sided"))
    return rows, ok


def _cmd_calibrate(block: dict, gc, seed: int, workers: int):
    m_grid = block.get("m_grid", [64, 256, 1024])
    trials = _positive_int(block, "trials", "calibrate-cg")
    new = bounds.calibrate_cg(m_grid, trials, seed, workers=workers,
                              date=block.get("date"))
    save_to = block.get("save_constants")
    if save_to:
        bounds.write_constants(new, save_to)
    inputs = {"m_grid": ",".join(str(m) for m in sorted({int(x) for x in m_grid})),
              "trials": trials}
    rows = [
        Row(inputs, "c_calibrated", new.c),
        Row(inputs, "eps0", new.eps0),
        Row(inputs, "beta0", new.beta0),
    ]
    return rows, True


def _cmd_oracle(block: dict, gc, seed: int, workers: int):
    m_max = int(block.get("m_max", 10))
    if not 2 <= m_max <= core.BRUTE_FORCE_LIMIT:
        raise ConfigError(f"m_max must lie in [2, {core.BRUTE_FORCE_LIMIT}]")
    samples = _positive_int(block, "samples", "oracle")
    mismatches = 0
    checked = 0
    for m in range(2, m_max + 1):
        for k in range(0, m):
            for mode in core.Mode:
                spec = core.ErasureSpec.from_budget(k, m, mode)
                for t in range(samples):
                    stream = montecarlo.trial_stream(
                        montecarlo.derive_seed(seed, m * 1000 + k * 2 + (mode is core.Mode.UNIFORM)), t)
                    y = montecarlo.normal_from_stream(stream, m)
                    fast = core.extreme_ratios(core.sort_sample(y), spec)
                    slow = core.brute_force_extremes(y, spec)
                    checked += 1
                    rel = max(
                        abs(fast.min_ratio - slow.min_ratio) / max(abs(slow.min_ratio), 1e-300),
                        abs(fast.max_ratio - slow.max_ratio) / max(abs(slow.max_ratio), 1e-300),
                    )
                    if rel > 1e-12 or fast.argmin_erased != slow.argmin_erased \
                            or fast.argmax_erased != slow.argmax_erased:
                        mismatches += 1
    inputs = {"m_max": m_max, "samples": samples}
    rows = [Row(inputs, "oracle_checks", checked),
            Row(inputs, "oracle_mismatches", mismatches)]
    return rows, mismatches == 0


def _cmd_jl(block: dict, gc, seed: int, workers: int):
    eps = _require(block, "eps", float, "jl")
    alpha = _require(block, "alpha", float, "jl")
    if "dataset" in block:
        data = jl.load_points(block["dataset"])
    elif "n_points" in block and "dim" in block:
        gen = montecarlo.trial_stream(montecarlo.derive_seed(seed, 0xDA7A), 0)
        pts = montecarlo.normal_from_stream(
            gen, int(block["n_points"]) * int(block["dim"])
        ).reshape(int(block["n_points"]), int(block["dim"]))
        data = jl.Dataset(points=pts)
    else:
        raise ConfigError("jl block needs a dataset path or n_points/dim")
    m = int(block["m"]) if "m" in block else bounds.jl_min_rows(data.n_points, eps, alpha)
    budget = int(block["budget"]) if "budget" in block \
        else jl.erasure_budget_jl(eps, alpha, m)
    spec = jl.ProjectionSpec(m=m, n=data.dim, seed=seed)
    matrix = jl.cached_projection(spec, block.get("cache_dir"))
    band = core.DistortionBand.symmetric(eps)
    report = jl.audit_pairwise(data, matrix, band, budget, _mode_of(block))
    hyp = jl.jl_hypothesis(eps, alpha)
    inputs = {"n_points": data.n_points, "dim": data.dim, "eps": eps,
              "alpha": alpha, "m": m, "budget": budget,
              "mode": report.mode.value}
    rows = [
        Row(inputs, "audit_pass", int(report.passed)),
        Row(inputs, "pairs", report.n_pairs),
        Row(inputs, "degenerate_pairs", report.degenerate_pairs),
        Row(inputs, "worst_min_ratio", report.worst_min,
            bound_value=band.lo, bound_id="band_lo"),
        Row(inputs, "worst_max_ratio", report.worst_max,
            bound_value=band.hi, bound_id="band_hi"),
        Row(inputs, "hypothesis_ok", int(hyp.ok),
            bound_value=hyp.limit, bound_id="jl_hypothesis_limit"),
    ]
    return rows, report.passed


def _cmd_rip(block: dict, gc, seed: int, workers: int):
    n = _positive_int(block, "n", "rip")
    s = _positive_int(block, "s", "rip")
    m = _positive_int(block, "m", "rip")
    beta = float(block.get("beta", 0.0))
    eps = _require(block, "eps", float, "rip")
    if "band" in block:
        lo, hi = (float(v) for v in block["band"])
        band = core.DistortionBand(lo, hi)
    elif "alpha" in block:
        rep = bounds.theta_omega_bounds(beta, float(block["alpha"]), gc, m=m)
        band = core.DistortionBand(rep.value("theta_finite_m"),
                                   rep.value("omega_finite_m"))
    else:
        band = core.DistortionBand(1.0, 1.0)
    gen = montecarlo.trial_stream(montecarlo.derive_seed(seed, 0x414D), 0)
    matrix = montecarlo.normal_from_stream(gen, m * n).reshape(m, n)
    net = None
    if s >= 4:
        net = rip.sampled_net(s, eps, seed, int(block.get("net_samples", 100000)))
    report = rip.certify_strong_rip(matrix, s, beta, band, eps,
                                    net=net, mode=_mode_of(block))
    inputs = {"n": n, "s": s, "m": m, "beta": beta, "eps": eps,
              "band_lo": band.lo, "band_hi": band.hi,
              "mode": report.mode.value}
    rows = [
        Row(inputs, "status", report.status),
        Row(inputs, "supports_checked", report.supports_checked),
        Row(inputs, "net_size", report.net_size),
        Row(inputs, "net_min", report.net_min,
            bound_value=report.inner.lo, bound_id="inner_lo"),
        Row(inputs, "net_max", report.net_max,
            bound_value=report.inner.hi, bound_id="inner_hi"),
        Row(inputs, "certified_lo", report.certified_lo,
            bound_value=report.outer.lo, bound_id="outer_lo"),
        Row(inputs, "certified_hi", report.certified_hi,
            bound_value=report.outer.hi, bound_id="outer_hi"),
        Row(inputs, "band_convention_flag", int(report.band_convention_flag)),
    ]
    if report.witness is not None:
        w = report.witness
        rows.append(Row(dict(inputs, support=",".join(map(str, w.support)),
                             side=w.side, erased=w.erased),
                        "witness_ratio", w.ratio))
    adm = bounds.rip_admissibility(n, s, m, eps,
                                   float(block.get("alpha", 0.25)),
                                   block.get("variant", "two_level"))
    rows.append(Row(inputs, "admissible", int(adm.ok),
                    bound_value=adm.slack, bound_id=f"admissibility_{adm.variant}"))
    return rows, report.passed


def _cmd_bernoulli(block: dict, gc, seed: int, workers: int):
    m = _positive_int(block, "m", "bernoulli-demo")
    demo = rip.bernoulli_counterexample(m, seed)
    residual = demo.matrix @ demo.probe
    residual[demo.erase_rows] = 0.0
    annihilated = bool(np.all(residual == 0.0))
    inputs = {"m": m}
    rows = [
        Row(inputs, "zeros_sum_probe", demo.zeros_sum),
        Row(inputs, "zeros_diff_probe", demo.zeros_diff),
        Row(inputs, "zeros_identity", int(demo.zeros_sum + demo.zeros_diff == m)),
        Row(inputs, "vanishing_probe", demo.vanishing),
        Row(inputs, "erase_count", int(demo.erase_rows.size),
            bound_value=m // 2, bound_id="half_rows"),
        Row(inputs, "annihilated", int(annihilated)),
    ]
    return rows, annihilated and demo.zeros_sum + demo.zeros_diff == m


def _cmd_orderstats(block: dict, gc, seed: int, workers: int):
    m = _positive_int(block, "m", "orderstats")
    trials = _positive_int(block, "trials", "orderstats")
    plan = montecarlo.TrialPlan(m=m, trials=trials, master_seed=seed, workers=workers)
    stats = montecarlo.empirical_order_stat_means(m, plan)
    ranks = [int(j) for j in block.get("ranks", range(1, m + 1))]
    rows, ok = [], True
    for j in ranks:
        if not 1 <= j <= m:
            raise ConfigError("ranks must lie in [1, m]")
        br = bounds.order_stat_expectation_bounds(m, j)
        est = float(stats.means[j - 1])
        se = float(stats.ses[j - 1])
        inside = br.lower - 4 * se <= est <= br.upper + 4 * se
        ok = ok and inside
        inputs = {"m": m, "j": j, "trials": trials}
        rows.append(Row(inputs, "order_stat_mean", est,
                        ci=(est - 2 * se, est + 2 * se),
                        bound_value=br.upper, bound_id="order_stat_upper"))
        rows.append(Row(inputs, "order_stat_lower", br.lower,
                        bound_value=br.lower, bound_id="order_stat_lower"))
    return rows, ok


_RUNNERS = {
    "bounds": _cmd_bounds,
    "estimate": _cmd_estimate,
    "quantiles": _cmd_quantiles,
    "tailcheck": _cmd_tailcheck,
    "calibrate-cg": _cmd_calibrate,
    "oracle": _cmd_oracle,
    "jl": _cmd_jl,
    "rip": _cmd_rip,
    "bernoulli-demo": _cmd_bernoulli,
    "orderstats": _cmd_orderstats,
}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _render_json(command: str, seed: int, gc, rows: list[Row], audit_ok: bool,
                 cfg_echo: dict) -> str:
    doc = {
        "command": command,
        "seed": seed,
        "constants": {"c": gc.c, "source": gc.source,
                      "calibration": gc.calibration},
        "config": cfg_echo,
        "audit_ok": audit_ok,
        "results": [r.as_json() for r in rows],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _render_csv(command: str, seed: int, gc, rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    constants_str = f"c={_fmt(gc.c)};source={gc.source}"
    for r in rows:
        writer.writerow({
            "command": command,
            "inputs": _inputs_str(r.inputs),
            "quantity": r.quantity,
            "value": _fmt(r.value),
            "ci_low": _fmt(r.ci[0]),
            "ci_high": _fmt(r.ci[1]),
            "bound_value": _fmt(r.bound_value),
            "bound_id": r.bound_id,
            "seed": seed,
            "constants": constants_str,
        })
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="erasketch",
        description="Erasure-robust Gaussian sketching: bounds, Monte Carlo "
                    "verification, pairwise audits, sparse-band certification.",
    )
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--constants", help="constants JSON (default: packaged)")
    parser.add_argument("--workers", type=int, help="worker threads")
    parser.add_argument("--format", choices=("json", "csv"), dest="fmt")
    parser.add_argument("--out", help="output path (default: stdout)")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        cfg = _load_config(args.config)
        seed = _seed_of(args, cfg)
        workers = _workers_of(args, cfg)
        gc = _constants(args, cfg)
        fmt = args.fmt or cfg.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError("format must be 'json' or 'csv'")
        out_path = args.out or os.environ.get("ERASKETCH_OUT") or cfg.get("out")
        block = cfg.get(args.command, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config block '{args.command}' must be an object")
        rows, audit_ok = _RUNNERS[args.command](block, gc, seed, workers)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_BAD_CONFIG

    if fmt == "json":
        text = _render_json(args.command, seed, gc, rows, audit_ok, block)
    else:
        text = _render_csv(args.command, seed, gc, rows)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"[erasketch] {args.command} finished in {time.time()-t0:.2f}s "
          f"({len(rows)} rows)", file=sys.stderr)
    return _EXIT_OK if audit_ok else _EXIT_AUDIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
