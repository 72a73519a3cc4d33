"""Experiment driver: ``amlab <subcommand> [--config PATH] [flags]``.

The effective configuration is the subcommand defaults, overlaid by the
JSON file given with ``--config``, overlaid by command-line flags.  It is
canonicalized, hashed (``config_digest``) and written next to the results.

Exit codes: 0 all thresholds met, 1 error, 2 threshold failure,
3 covariance collapse (a ``collapse_<k>.json`` dump is written).
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import warnings
from typing import Callable

import numpy as np
from scipy import stats

from . import analysis, coupling, recursions
from .chain import initial_state, run_am
from .proposals import ProposalConfigError, TemplateKind, proposal_from_config
from .reports import config_digest, write_json
from .rng import replica_seeds
from .schedules import (check_assumption_A1, check_assumption_A2, check_assumption_A3,
                        make_power_schedule)
from .plotting import emit_plot
from .targets import target_from_config

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD, EXIT_COLLAPSE = 0, 1, 2, 3

_ONE_OVER_N = {"kind": "power", "c": 1.0, "gamma": 1.0}

_CHAIN = {
    "target": {"kind": "laplace"},
    "proposal": {"theta": 2.4},
    "schedule": _ONE_OVER_N,
    "dim": 1,
    "n_steps": 10_000,
    "x1": None,
    "m1": None,
    "s1": None,
    "factorization": "update",
}

DEFAULTS = {
    "am-run": dict(_CHAIN),
    "arw-run": {**_CHAIN, "target": {"kind": "uniform"}, "proposal": {"theta": 1.0}},
    "expectation": {"theta": 1.0, "schedule": _ONE_OVER_N, "a1": 0.0, "b1": 1.0, "N": 10_000,
                    "csv_every": 1},
    "dip": {"theta": 0.01, "schedule": _ONE_OVER_N, "a1": 0.0, "b1": 1.0, "N": 2_000_000},
    "gn": {"theta_tilde": 1.0, "schedule": {"kind": "power", "c": 1.0, "gamma": 0.7},
           "g_init": 0.0, "m1": 1, "N": 100_000, "csv_every": 1},
    "growth-check": {"theta": 0.5, "schedule": _ONE_OVER_N, "a1": 0.0, "b1": 1.0,
                     "n": 100_000, "k": 10_000, "lam": 1.1, "N": None},
    "coupling-test": {"p": {"kind": "normal", "loc": 0.0, "scale": 1.0},
                      "q": {"kind": "normal", "loc": 1.0, "scale": 1.0}, "trials": 100_000,
                      "thresholds": {"freq_tol": 0.01, "ks_min": 0.01}},
    "drift-check": {"s_values": [1.0, 10.0, 100.0], "theta": 1.0, "M": 10.0,
                    "target": {"kind": "laplace"},
                    "thresholds": {"slope": -0.5, "slope_tol": 0.1}},
    "kr-check": {"template": "gaussian", "theta": 1.0, "step_counts": [100, 1000, 10000],
                 "L": 1.0, "trials": 100_000, "thresholds": {"slope_tol": 0.05}},
    "slln": {**_CHAIN, "n_steps": 1_000_000, "record_every": 1_000_000,
             "f_ids": ["identity", "square", "exp_abs:0.4"],
             "thresholds": {"m_tol": 0.1, "s_tol": 0.2, "f_tol": 0.1, "min_fraction": 0.8}},
    "eigen-floor": {**_CHAIN, "target": {"kind": "gaussian", "mean": [0.0, 0.0]},
                    "proposal": {"theta": 2.4, "beta": 0.1,
                                 "q_fix": {"kind": "gaussian", "sigma0": 1.0}},
                    "dim": 2, "n_steps": 100_000, "record_every": 100_000,
                    "window": [10_000, 100_000],
                    "thresholds": {"min_trend": 0.5, "min_fraction": 0.95}},
    "check-schedule": {"schedule": _ONE_OVER_N, "m_prime": 2, "N": 1_000_000, "tol": 1e-3,
                       "l1_threshold": 10.0, "l2_tail_tol": None, "divergence_threshold": 5.0},
}

COMMON = {"seeds": {"master_seed": 0, "n_replicas": 1}, "record_every": 1, "thresholds": {},
          "output_dir": "."}

# keys that do not influence results and are left out of the digest
_NON_RESULT_KEYS = ("output_dir",)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# ---------------------------------------------------------------------------
# configuration

def parse_schedule(text: str) -> dict:
    """``power:c,gamma`` (or a JSON object) to a schedule config."""
    if text.strip().startswith("{"):
        return json.loads(text)
    kind, _, args = text.partition(":")
    if kind != "power":
        raise ConfigError(f"config.schedule: unsupported schedule {text!r}")
    try:
        c, g = (float(v) for v in args.split(","))
    except ValueError:
        raise ConfigError(f"config.schedule: expected power:c,gamma, got {text!r}") from None
    return {"kind": "power", "c": c, "gamma": g}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "seeds":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_type(path: str, value, default):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list")
    if isinstance(default, dict) and not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    return value


def canonicalize(cfg: dict) -> dict:
    """Fill defaults, validate field types and normalize seeds.

    Idempotent: ``canonicalize(json.loads(canonical_json(c))) == c`` for any
    canonical ``c``.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    sub = cfg.get("subcommand")
    if sub not in DEFAULTS:
        raise ConfigError(f"config.subcommand: expected one of {sorted(DEFAULTS)}, got {sub!r}")
    defaults = _merge(COMMON, DEFAULTS[sub])
    unknown = set(cfg) - set(defaults) - {"subcommand", "config_digest"}
    if unknown:
        raise ConfigError(f"config.{sorted(unknown)[0]}: unknown field for {sub}")
    out = {"subcommand": sub}
    for key, default in defaults.items():
        value = cfg.get(key, copy.deepcopy(default))
        if isinstance(value, dict) and isinstance(default, dict) and key != "seeds":
            value = _merge(default, value)
        # seeds is either a list or an object and is validated below
        out[key] = value if key == "seeds" else _check_type(f"config.{key}", value, default)
    seeds = out["seeds"]
    if isinstance(seeds, dict):
        extra = set(seeds) - {"master_seed", "n_replicas"}
        if extra:
            raise ConfigError(f"config.seeds.{sorted(extra)[0]}: unknown field")
        out["seeds"] = {"master_seed": _check_type("config.seeds.master_seed",
                                                   seeds.get("master_seed", 0), 0),
                        "n_replicas": _check_type("config.seeds.n_replicas",
                                                  seeds.get("n_replicas", 1), 1)}
        if out["seeds"]["n_replicas"] < 1:
            raise ConfigError("config.seeds.n_replicas: must be at least 1")
    elif isinstance(seeds, list):
        for i, s in enumerate(seeds):
            _check_type(f"config.seeds[{i}]", s, 0)
        if not seeds:
            raise ConfigError("config.seeds: empty seed list")
    else:
        raise ConfigError("config.seeds: expected a list or {master_seed, n_replicas}")
    if out["record_every"] < 1:
        raise ConfigError("config.record_every: must be at least 1")
    return out


def digest_of(cfg: dict) -> str:
    return config_digest({k: v for k, v in cfg.items() if k not in _NON_RESULT_KEYS})


def seed_list(cfg: dict) -> list:
    s = cfg["seeds"]
    if isinstance(s, list):
        return [int(v) for v in s]
    return replica_seeds(s["master_seed"], s["n_replicas"])


def _schedule(cfg, path="config.schedule"):
    sc = cfg["schedule"]
    if sc.get("kind", "power") != "power":
        raise ConfigError(f"{path}.kind: only power schedules are configurable")
    try:
        return make_power_schedule(float(sc.get("c", 1.0)), float(sc.get("gamma", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _chain_inputs(cfg):
    d = cfg["dim"]
    tcfg = dict(cfg["target"])
    if tcfg.get("kind") == "gaussian":
        tcfg.setdefault("mean", [0.0] * d)
        tcfg.setdefault("dim", len(tcfg["mean"]))
    tcfg.setdefault("dim", d)
    try:
        target = target_from_config(tcfg)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"config.target: {exc}") from None
    if target.dim != d:
        raise ConfigError(f"config.target.dim: target has dimension {target.dim}, dim is {d}")
    try:
        spec = proposal_from_config(cfg["proposal"])
    except (ProposalConfigError, ValueError) as exc:
        raise ConfigError(f"config.proposal: {exc}") from None
    x1 = np.zeros(d) if cfg["x1"] is None else np.asarray(cfg["x1"], float)
    try:
        init = initial_state(x1, None if cfg["s1"] is None else np.asarray(cfg["s1"], float),
                             None if cfg["m1"] is None else np.asarray(cfg["m1"], float))
    except ValueError as exc:
        raise ConfigError(f"config.x1: {exc}") from None
    return target, spec, _schedule(cfg), init


# ---------------------------------------------------------------------------
# subcommands.  Each returns (status, payload); payload is written as JSON.

class Context:
    def __init__(self, cfg: dict, out_dir: str, plot: bool):
        self.cfg = cfg
        self.out = out_dir
        self.plot = plot
        self.digest = digest_of(cfg)
        self.seeds = seed_list(cfg)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    @property
    def comment(self) -> str:
        return f"config_digest={self.digest}"

    def plot_to(self, name, series, **kw):
        if self.plot:
            emit_plot(series, self.path(name), description=self.comment, **kw)


def _run_chains(ctx: Context):
    cfg = ctx.cfg
    target, spec, schedule, init = _chain_inputs(cfg)
    traces, collapsed = [], []
    for k, seed in enumerate(ctx.seeds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tr = run_am(target, spec, schedule, init, cfg["n_steps"], cfg["record_every"],
                        seed, factorization=cfg["factorization"], config_digest=ctx.digest)
        traces.append(tr)
        if tr.collapse is not None:
            dump = ctx.path(f"collapse_{k}.json")
            write_json(dump, {"config_digest": ctx.digest, "seed": seed,
                              **tr.collapse.to_dict()})
            collapsed.append(dump)
    return traces, collapsed


def _frac_ok(count: int, total: int, frac: float) -> bool:
    return count >= math.ceil(frac * total - 1e-12)


def cmd_chain(ctx: Context):
    traces, collapsed = _run_chains(ctx)
    th = ctx.cfg["thresholds"]
    rows = []
    growth_ok = 0
    for k, (seed, tr) in enumerate(zip(ctx.seeds, traces)):
        tr.write_csv(ctx.path(f"trace_{k}.csv"), comment=f"{ctx.comment} seed={seed}")
        ratio = float(tr.lambda_min[-1] / tr.lambda_min[0])
        growth_ok += ratio >= th.get("lambda_growth", -math.inf)
        rows.append({"replica": k, "seed": seed, "n_steps": tr.n_steps,
                     "acceptance_rate": tr.acceptance_rate,
                     "final_m": tr.m[-1].tolist(), "final_s_diag": tr.s_diag[-1].tolist(),
                     "final_lambda_min": float(tr.lambda_min[-1]),
                     "lambda_min_ratio": ratio,
                     "collapse_n": None if tr.collapse is None else tr.collapse.n})
    passed = _frac_ok(growth_ok, len(traces), th.get("min_fraction", 0.0))
    ctx.plot_to("plot.svg", {f"seed {r['seed']}": (np.arange(1, t.lambda_min.size + 1), t.lambda_min)
                             for r, t in zip(rows, traces)},
                log_x=True, log_y=True, y_label="lambda_min(S_n)", mark_min=False)
    status = EXIT_COLLAPSE if collapsed else (EXIT_OK if passed else EXIT_THRESHOLD)
    return status, {"replicas": rows, "passed": passed, "collapse_dumps": collapsed}


def cmd_expectation(ctx: Context):
    c = ctx.cfg
    ser = recursions.expectation_series(c["theta"], _schedule(c), c["a1"], c["b1"], c["N"])
    ser.write_csv(ctx.path("expectation.csv"), every=c["csv_every"], comment=ctx.comment)
    n = np.arange(1, ser.N + 1)
    ctx.plot_to("plot.svg", {f"log b_n, theta={c['theta']:g}": (n, ser.log_b)}, log_x=True,
                y_label="log E[S_n]")
    return EXIT_OK, {"final_log_b": float(ser.log_b[-1]), "final_ratio": float(ser.ratio[-1]),
                     "tail_increasing_from": recursions.tail_increasing_index(ser)}


def cmd_dip(ctx: Context):
    c = ctx.cfg
    ser = recursions.expectation_series(c["theta"], _schedule(c), c["a1"], c["b1"], c["N"])
    prof = recursions.dip_profile(c["theta"], ser.schedule, series=ser)
    th = c["thresholds"]
    ok = True
    if "argmin_gt" in th:
        ok &= prof.argmin_index > th["argmin_gt"]
    if "first_exceed_gt" in th:
        ok &= prof.first_exceed_index is not None and prof.first_exceed_index > th["first_exceed_gt"]
    n = np.arange(1, ser.N + 1)
    ctx.plot_to("plot.svg", {f"log b_n, theta={c['theta']:g}": (n, ser.log_b)}, log_x=True,
                y_label="log E[S_n]")
    return (EXIT_OK if ok else EXIT_THRESHOLD), {**prof.to_dict(), "passed": bool(ok)}


def cmd_gn(ctx: Context):
    c = ctx.cfg
    gs = recursions.g_series(c["theta_tilde"], _schedule(c), c["g_init"], c["m1"], c["N"])
    gs.write_csv(ctx.path("gn.csv"), every=c["csv_every"], comment=ctx.comment)
    err = abs(float(gs.g[-1]) - c["theta_tilde"])
    ok = err <= c["thresholds"].get("tol", math.inf)
    n = np.arange(gs.start, gs.start + gs.g.size)
    keep = n >= 2
    ctx.plot_to("plot.svg", {"g_n": (n[keep], gs.g[keep]), "fixed point": (n[keep], gs.fixed_points[keep])},
                log_x=True, mark_min=False)
    return (EXIT_OK if ok else EXIT_THRESHOLD), {
        "g_N": float(gs.g[-1]), "fixed_point_N": float(gs.fixed_points[-1]),
        "abs_error": err, "passed": bool(ok)}


def cmd_growth(ctx: Context):
    c = ctx.cfg
    N = c["N"] or c["n"] + c["k"]
    ser = recursions.expectation_series(c["theta"], _schedule(c), c["a1"], c["b1"], N)
    chk = recursions.growth_bound_check(ser, c["lam"], c["n"], c["k"])
    n = np.arange(1, ser.N + 1)
    ctx.plot_to("plot.svg", {"log b_n": (n, ser.log_b)}, log_x=True, mark_min=False)
    return (EXIT_OK if chk.passed else EXIT_THRESHOLD), {
        "lhs": chk.lhs, "mid": chk.mid, "rhs": chk.rhs, "normalized": chk.normalized,
        "passed": chk.passed}


def _density(cfg: dict, path: str):
    kind = cfg.get("kind")
    if kind == "normal":
        d = stats.norm(cfg.get("loc", 0.0), cfg.get("scale", 1.0))
    elif kind == "uniform":
        lo, hi = cfg.get("lo", 0.0), cfg.get("hi", 1.0)
        d = stats.uniform(lo, hi - lo)
    elif kind == "laplace":
        d = stats.laplace(cfg.get("loc", 0.0), cfg.get("scale", 1.0))
    else:
        raise ConfigError(f"{path}.kind: expected normal, uniform or laplace")
    return d


def cmd_coupling(ctx: Context):
    c = ctx.cfg
    dp, dq = _density(c["p"], "config.p"), _density(c["q"], "config.q")
    lo = min(dp.ppf(1e-15), dq.ppf(1e-15)) - 1.0
    hi = max(dp.isf(1e-15), dq.isf(1e-15)) + 1.0
    bps = [v for d in (dp, dq) for v in (d.support() if np.all(np.isfinite(d.support())) else ())]
    spec = coupling.CouplingSpec(dp.pdf, dq.pdf, (float(lo), float(hi)), tuple(bps))
    rep = coupling.coupling_test(spec, lambda g, n: dp.rvs(size=n, random_state=g), dq.cdf,
                                 c["trials"], ctx.seeds[0])
    th = c["thresholds"]
    ok = (abs(rep.coupled_freq - (1.0 - rep.tv_oracle)) <= th["freq_tol"]
          and rep.ks_pvalue > th["ks_min"])
    grid = np.linspace(lo, hi, 801)
    ctx.plot_to("plot.svg", {"p": (grid, dp.pdf(grid)), "q": (grid, dq.pdf(grid))},
                x_label="x", mark_min=False)
    return (EXIT_OK if ok else EXIT_THRESHOLD), {**rep.to_dict(), "passed": bool(ok)}


def cmd_drift(ctx: Context):
    c = ctx.cfg
    tcfg = {"dim": 1, **c["target"]}
    target = target_from_config(tcfg)
    reports = [analysis.drift_profile(s, c["theta"], target, M=c["M"]) for s in c["s_values"]]
    s = np.array(c["s_values"], float)
    inf_tail = np.array([r.inf_tail for r in reports])
    delta = np.array([r.delta_s for r in reports])
    th = c["thresholds"]
    slope_tail = analysis.loglog_slope(s, inf_tail) if np.all(inf_tail > 0) else float("nan")
    slope_delta = analysis.loglog_slope(s, delta) if np.all(delta > 0) else float("nan")
    checks = {
        "inf_tail_positive": bool(np.all(inf_tail > 0)),
        "inf_tail_slope": bool(abs(slope_tail - th["slope"]) <= th["slope_tol"]),
        "delta_slope": bool(abs(slope_delta - th["slope"]) <= th["slope_tol"]),
        "simple_bound": all(r.simple_bound_holds for r in reports),
    }
    ok = all(checks.values())
    ctx.plot_to("plot.svg", {f"s={r.s:g}": (r.profile[:, 0], r.profile[:, 1]) for r in reports},
                x_label="x", y_label="1 - P_sV/V", mark_min=False)
    return (EXIT_OK if ok else EXIT_THRESHOLD), {
        "reports": [r.to_dict() for r in reports], "inf_tail_slope": slope_tail,
        "delta_slope": slope_delta, "checks": checks, "passed": ok}


def cmd_kr(ctx: Context):
    c = ctx.cfg
    kind, _, nu = c["template"].partition(":")
    template = TemplateKind(kind, float(nu) if nu else 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = analysis.kr_scaling_check(template, c["theta"], c["step_counts"], c["L"],
                                        c["trials"], ctx.seeds[0], c["thresholds"]["slope_tol"])
    ctx.plot_to("plot.svg", {"Q(sum; L)": (rep.step_counts, rep.q_hat)}, log_x=True,
                log_y=True, mark_min=False)
    return (EXIT_OK if rep.passed else EXIT_THRESHOLD), rep.to_dict()


def cmd_slln(ctx: Context):
    c = ctx.cfg
    traces, collapsed = _run_chains(ctx)
    target = traces[0].target
    th = c["thresholds"]
    mean = analysis.functional_reference(target, "identity")
    var = analysis.functional_reference(target, "square") - mean ** 2
    rows, n_ok = [], 0
    running = {}
    for seed, tr in zip(ctx.seeds, traces):
        reps = [analysis.ergodic_average(tr, f) for f in c["f_ids"]]
        m_err = abs(float(tr.m[-1, 0]) - mean)
        s_err = abs(float(tr.s_diag[-1, 0]) - var)
        ok = (m_err <= th["m_tol"] and s_err <= th["s_tol"]
              and all(r.final_error <= th["f_tol"] for r in reps))
        n_ok += ok
        rows.append({"seed": seed, "final_m": float(tr.m[-1, 0]), "final_s": float(tr.s_diag[-1, 0]),
                     "m_error": m_err, "s_error": s_err,
                     "ergodic": [r.to_dict() for r in reps], "passed": bool(ok)})
        n = np.arange(1, reps[0].running_means.size + 1)
        running[f"seed {seed}"] = (n, reps[0].running_means)
    passed = _frac_ok(n_ok, len(traces), th["min_fraction"])
    ctx.plot_to("plot.svg", running, log_x=True, mark_min=False, y_label=f"mean of {c['f_ids'][0]}")
    status = EXIT_COLLAPSE if collapsed else (EXIT_OK if passed else EXIT_THRESHOLD)
    return status, {"target_mean": mean, "target_variance": var, "replicas": rows,
                    "passing": n_ok, "passed": passed, "collapse_dumps": collapsed}


def cmd_eigen(ctx: Context):
    c = ctx.cfg
    traces, collapsed = _run_chains(ctx)
    th = c["thresholds"]
    if collapsed:
        return EXIT_COLLAPSE, {"collapse_dumps": collapsed}
    rep = analysis.eigen_floor(traces, tuple(c["window"]))
    n_ok = rep.count(th["min_trend"])
    passed = _frac_ok(n_ok, len(traces), th["min_fraction"])
    ctx.plot_to("plot.svg", {f"seed {s}": (np.arange(1, t.lambda_min.size + 1), t.lambda_min)
                             for s, t in zip(ctx.seeds, traces)},
                log_x=True, log_y=True, mark_min=False, y_label="lambda_min(S_n)")
    return (EXIT_OK if passed else EXIT_THRESHOLD), {**rep.to_dict(), "passing": n_ok,
                                                     "passed": passed}


def cmd_schedule(ctx: Context):
    c = ctx.cfg
    sc = _schedule(c)
    reports = [
        check_assumption_A1(sc, c["m_prime"], c["N"], c["divergence_threshold"]),
        check_assumption_A2(sc, c["N"], c["tol"]),
        check_assumption_A3(sc, c["N"], c["l1_threshold"], c["l2_tail_tol"]),
    ]
    ok = sc.admissible and all(r.passed for r in reports)
    n = np.arange(1, c["N"] + 1)
    ctx.plot_to("plot.svg", {"eta_n": (n[1:], sc.weights(2, c["N"]))}, log_x=True, log_y=True,
                mark_min=False)
    return (EXIT_OK if ok else EXIT_THRESHOLD), {
        "admissible": sc.admissible, "reports": [r.to_dict() for r in reports], "passed": ok}


HANDLERS: dict[str, Callable] = {
    "am-run": cmd_chain,
    "arw-run": cmd_chain,
    "expectation": cmd_expectation,
    "dip": cmd_dip,
    "gn": cmd_gn,
    "growth-check": cmd_growth,
    "coupling-test": cmd_coupling,
    "drift-check": cmd_drift,
    "kr-check": cmd_kr,
    "slln": cmd_slln,
    "eigen-floor": cmd_eigen,
    "check-schedule": cmd_schedule,
}


def run(cfg: dict, plot: bool = False) -> int:
    """Execute a canonical config; returns the exit status."""
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    ctx = Context(cfg, out, plot)
    status, payload = HANDLERS[cfg["subcommand"]](ctx)
    write_json(ctx.path("config.json"), {**cfg, "config_digest": ctx.digest})
    name = cfg["subcommand"].replace("-", "_") + ".json"
    write_json(ctx.path(name), {"config_digest": ctx.digest, "seeds": ctx.seeds,
                                "thresholds": cfg["thresholds"], **payload})
    print(f"{cfg['subcommand']}: wrote {ctx.path(name)} (exit {status})")
    return status


# ---------------------------------------------------------------------------
# argument parsing

def _flag_overrides(sub: str, args) -> dict:
    over: dict = {}
    chain_like = "n_steps" in DEFAULTS[sub]
    if args.seed is not None or args.replicas is not None:
        over["seeds"] = {"master_seed": args.seed if args.seed is not None else 0,
                         "n_replicas": args.replicas if args.replicas is not None else 1}
    if args.out is not None:
        over["output_dir"] = args.out
    if args.record_every is not None:
        over["record_every"] = args.record_every
    if args.schedule is not None:
        over["schedule"] = parse_schedule(args.schedule)
    if args.theta is not None:
        if chain_like:
            over["proposal"] = {"theta": args.theta}
        elif "theta_tilde" in DEFAULTS[sub]:
            over["theta_tilde"] = args.theta
        else:
            over["theta"] = args.theta
    if args.n is not None:
        over["n_steps" if chain_like else "N"] = args.n
    if args.dim is not None:
        over["dim"] = args.dim
    for item in args.set or []:
        key, eq, raw = item.partition("=")
        if not eq:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = over
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return over


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amlab", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name in DEFAULTS:
        p = subs.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--replicas", type=int, help="number of replicas derived from the master seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--record-every", type=int, metavar="N", help="full-state thinning")
        p.add_argument("--plot", action="store_true", help="also write plot.svg")
        p.add_argument("--theta", type=float, help="proposal scale (theta_tilde for gn)")
        p.add_argument("--schedule", help="power:c,gamma")
        p.add_argument("--n", type=int, help="horizon N, or n_steps for chain runs")
        p.add_argument("--dim", type=int, help="state dimension for chain runs")
        p.add_argument("--set", action="append", metavar="KEY=JSON",
                       help="override any config field (dotted keys allowed)")
    return parser


def load_config(argv=None) -> tuple:
    args = build_parser().parse_args(argv)
    file_cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        if file_cfg.get("subcommand", args.subcommand) != args.subcommand:
            raise ConfigError(f"config.subcommand: file says {file_cfg['subcommand']!r}, "
                              f"command line says {args.subcommand!r}")
        file_cfg.pop("config_digest", None)
    cfg = _merge(file_cfg, _flag_overrides(args.subcommand, args))
    cfg["subcommand"] = args.subcommand
    return canonicalize(cfg), args.plot


def main(argv=None) -> int:
    try:
        cfg, plot = load_config(argv)
        return run(cfg, plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
