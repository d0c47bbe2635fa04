"""Sweep runners behind the command-line subcommands.

Every runner returns a :class:`Table`; rows are produced per sweep point
(possibly in a thread pool) and always emitted in sweep order.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import RateSchedule, throughput_ir, throughput_xp
from .channel import Qam, db_to_linear, mi_gaussian
from .closed_form import (ClosedFormK2Policy, HeuristicPolicy, argmax_r2_numeric, closed_form_r2,
                          heuristic_throughput)
from .exceptions import ConfigurationError
from .grid_optimizer import SearchSpace, optimize_ir, optimize_xp
from .mdp import (ActionGrid, Persistent, TabularPolicy, Truncated, build_states, evaluate_policy,
                  fixed_schedule_policy, ir_policy, policy_iteration)
from .simulator import FixedSchedulePolicy, estimate_throughput, write_trace_csv

__all__ = ["Table", "run_experiment", "write_table", "render_csv", "policy_table"]

log = logging.getLogger(__name__)

DEFAULT_N_CYCLES = 1_000_000


@dataclass
class Table:
    header: list
    rows: list
    extra: dict = field(default_factory=dict)


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def render_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_table(table, cfg, out):
    """Write the CSV (``out`` or stdout) and, for files, a ``.meta.json`` sidecar."""
    text = render_csv(table)
    if out is None:
        print(text, end="")
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    meta = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "grids": cfg.grids,
        "columns": table.header,
        "software": {"package": "xpharq", "version": __version__},
    }
    meta.update(table.extra)
    out.with_name(out.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _snr_cols(db, channel):
    if db is None:
        return [None, None]
    return [db, float(db_to_linear(db))]


def _k_finite(cfg):
    k = cfg.k_max
    if math.isinf(k):
        raise ConfigurationError("field 'grids.k_max': this experiment needs a finite k_max")
    return k


def _ir_cap(cfg, channel):
    if cfg.grids["decodability_cap"] is not None:
        return cfg.grids["decodability_cap"]
    return channel.mi.max_mi if isinstance(channel.mi, Qam) else None


def _search_space(cfg, k_max, cap):
    g = cfg.grids
    return SearchSpace(g["rate_step"], (g["rate_step"], g["r1_max"]), (0.0, g["rk_max"]),
                       g["r_max"], cap, k_max)


def _f_cols(f, k):
    f = list(f)
    return f + [None] * (k - len(f))


def _require(cfg, key):
    if key not in cfg.params:
        raise ConfigurationError(f"field 'params.{key}': required for experiment {cfg.experiment}")
    return cfg.params[key]


# -- individual experiments ----------------------------------------------------

def mi_curve(cfg, threads=1):
    if cfg.snr_sweep is None:
        raise ConfigurationError("field 'snr_sweep': required for the MI curve")
    mi_spec = cfg.channel.get("mi", {"kind": "gaussian"})
    rows = []
    for db in cfg.snr_sweep:
        snr = float(db_to_linear(db))
        if mi_spec["kind"] == "qam":
            fn = Qam(int(mi_spec.get("m", 16)), int(mi_spec.get("quadrature_order", 32)))
            mi = float(fn(snr))
        else:
            mi = float(mi_gaussian(snr))
        rows.append([db, snr, mi])
    return Table(["snr_db", "snr_linear", "mi"], rows)


def fixed_throughput(cfg, threads=1, scheme="ir"):
    k = _k_finite(cfg)
    if scheme == "ir":
        r = _require(cfg, "r")
        rates = RateSchedule.ir(r, k).rates
    else:
        rates = tuple(_require(cfg, "rates"))
        k = len(rates)
    step = cfg.grids["mi_step"]

    def point(item):
        db, ch = item
        dist = ch.discretize(step)
        rep = throughput_ir(dist, rates[0], k) if scheme == "ir" else throughput_xp(dist, rates)
        return _snr_cols(db, ch) + [k] + list(rates) + [rep.eta, rep.expected_rounds] + list(rep.failure_probs)

    header = (["snr_db", "snr_linear", "k_max"] + [f"r{i}" for i in range(1, k + 1)]
              + ["eta", "expected_rounds"] + [f"f{i}" for i in range(1, k + 1)])
    return Table(header, _pmap(point, cfg.channel_points(), threads))


def optimize(cfg, threads=1, scheme="ir"):
    k = _k_finite(cfg)
    step = cfg.grids["mi_step"]

    def point(item):
        db, ch = item
        dist = ch.discretize(step)
        if scheme == "ir":
            r, rep = optimize_ir(dist, _search_space(cfg, k, _ir_cap(cfg, ch)))
            rates = RateSchedule.ir(r, k).rates
        else:
            sched, rep = optimize_xp(dist, _search_space(cfg, k, cfg.grids["decodability_cap"]))
            rates = sched.rates
        return (_snr_cols(db, ch) + [k] + list(rates) + [rep.eta, ch.mean()]
                + list(rep.failure_probs))

    header = (["snr_db", "snr_linear", "k_max"] + [f"r{i}" for i in range(1, k + 1)]
              + ["eta", "capacity"] + [f"f{i}" for i in range(1, k + 1)])
    return Table(header, _pmap(point, cfg.channel_points(), threads))


def _mode(cfg):
    mode = cfg.params.get("mode", "persistent" if math.isinf(cfg.k_max) else "truncated")
    if mode == "persistent":
        return Persistent()
    return Truncated(_k_finite(cfg))


def _space(cfg, ch):
    g = cfg.grids
    cap = g["decodability_cap"]
    return build_states(ch.discretize(g["mi_step"]), ActionGrid(g["rate_step"], g["r_max"], cap), _mode(cfg))


def _policy_path(out, db):
    out = Path(out)
    tag = "" if db is None else f"_{fmt(db)}dB"
    return out.with_name(f"{out.stem}_policy{tag}.json")


def mdp_solve(cfg, threads=1, out=None):
    first = cfg.params.get("first_rate")

    def point(item):
        db, ch = item
        space = _space(cfg, ch)
        res = policy_iteration(space, first_rate=first)
        res.policy.metadata.update(snr_db=db)
        return res, space, db, ch

    results = _pmap(point, cfg.channel_points(), threads)
    rows, files = [], []
    for res, space, db, ch in results:
        k = space.k_max
        rows.append(_snr_cols(db, ch) + ["persistent" if k is None else "truncated", k,
                                         space.n_states, res.gain, res.iterations, res.residual,
                                         res.policy.restart_action * space.grid.step, ch.mean()])
        if out is not None:
            path = _policy_path(out, db)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(res.policy.to_json() + "\n")
            files.append(str(path))
    header = ["snr_db", "snr_linear", "mode", "k_max", "n_states", "gain", "iterations",
              "bellman_residual", "first_rate", "capacity"]
    return Table(header, rows, {"policy_files": files})


def mdp_eval(cfg, threads=1):
    def point(item):
        db, ch = item
        space = _space(cfg, ch)
        dist = space.dist
        if "policy_file" in cfg.params:
            policy = TabularPolicy.from_json(Path(cfg.params["policy_file"]).read_text())
            ref = None
        elif "rates" in cfg.params:
            rates = cfg.params["rates"]
            policy = fixed_schedule_policy(space, rates)
            ref = throughput_xp(dist, rates).eta
        else:
            r = _require(cfg, "r")
            policy = ir_policy(space, r)
            ref = None if space.persistent else throughput_ir(dist, r, space.k_max).eta
        gain, _ = evaluate_policy(policy, space)
        return _snr_cols(db, ch) + ["persistent" if space.persistent else "truncated",
                                    space.k_max, gain, ref]

    header = ["snr_db", "snr_linear", "mode", "k_max", "gain", "analytic_eta"]
    return Table(header, _pmap(point, cfg.channel_points(), threads))


def k2_table(cfg, threads=1):
    r1 = _require(cfg, "r1")
    i1_step = cfg.params.get("i1_step", 0.05)
    n = int(math.ceil(r1 / i1_step - 1e-9))
    i1s = np.arange(n) * i1_step

    def point(item):
        db, ch = item
        if ch.snr.__class__.__name__ != "Rayleigh" or ch.mi.__class__.__name__ != "GaussianCodebook":
            raise ConfigurationError("the closed-form rate assumes Rayleigh fading and Gaussian codebooks")
        g = ch.snr.avg_snr
        return [[r1, db, g, i1, closed_form_r2(i1, r1, g), argmax_r2_numeric(i1, r1, ch)]
                for i1 in i1s]

    blocks = _pmap(point, cfg.channel_points(), threads)
    return Table(["r1", "snr_db", "snr_linear", "i1", "r2_closed_form", "r2_numeric"],
                 [row for b in blocks for row in b])


def heuristic_sweep(cfg, threads=1):
    k = cfg.k_max
    r1_fixed = cfg.params.get("r1")
    g = cfg.grids
    r1_grid = np.arange(1, int(round(g["r1_max"] / g["rate_step"])) + 1) * g["rate_step"]

    def point(item):
        db, ch = item
        cands = [r1_fixed] if r1_fixed is not None else r1_grid
        best = None
        for r1 in cands:
            rep = heuristic_throughput(float(r1), k, ch)
            if best is None or rep.eta > best[1].eta + 1e-12:
                best = (float(r1), rep)
        r1, rep = best
        return _snr_cols(db, ch) + [k, r1, float(ch.cdf(r1)), float(ch.partial_mean(r1)), rep.eta, ch.mean()]

    header = ["snr_db", "snr_linear", "k_max", "r1", "f1", "c_trunc", "eta", "capacity"]
    return Table(header, _pmap(point, cfg.channel_points(), threads))


def _sim_policy(cfg, ch, db):
    kind = cfg.params.get("policy", "fixed" if "rates" in cfg.params else "ir")
    k = cfg.k_max
    if kind == "fixed":
        return FixedSchedulePolicy(tuple(_require(cfg, "rates")))
    if kind == "ir":
        return FixedSchedulePolicy.ir(_require(cfg, "r"), _k_finite(cfg))
    if kind == "heuristic":
        return HeuristicPolicy(_require(cfg, "r1"), None if math.isinf(k) else k)
    if kind == "k2":
        return ClosedFormK2Policy(_require(cfg, "r1"), ch.snr.avg_snr)
    if "policy_file" in cfg.params:
        return TabularPolicy.from_json(Path(cfg.params["policy_file"]).read_text())
    return policy_iteration(_space(cfg, ch), first_rate=cfg.params.get("first_rate")).policy


def simulate(cfg, threads=1, out=None):
    n = cfg.params.get("n_cycles", DEFAULT_N_CYCLES)
    rows, results = [], []
    points = cfg.channel_points()
    for i, (db, ch) in enumerate(points):
        policy = _sim_policy(cfg, ch, db)
        want_trace = "trace" in cfg.params and i == 0
        res = estimate_throughput(policy, ch, n, cfg.seed, threads=threads, keep_cycles=want_trace)
        if want_trace:
            write_trace_csv(res, cfg.params["trace"])
        results.append(dict(res.to_dict(), snr_db=db))
        rows.append(_snr_cols(db, ch) + [policy.kind, n, cfg.seed, res.eta_hat, res.std_err,
                                         res.mean_rounds, res.n_aborted,
                                         ";".join(fmt(f) for f in res.empirical_f)])
    header = ["snr_db", "snr_linear", "policy", "n_cycles", "seed", "eta_hat", "std_err",
              "mean_rounds", "n_aborted", "empirical_f"]
    return Table(header, rows, {"sim_results": results})


def policy_table(policy):
    """Rows ``(k, rsig, isig, deficit, action)`` of a tabular policy."""
    rows = [[0, 0.0, 0.0, 0.0, policy.restart_action * policy.action_step]]
    for (k, r), acts in sorted(policy.actions.items()):
        rsig = r * policy.action_step
        for m, a in enumerate(acts.tolist()):
            isig = round(m * policy.grid_step, 12)
            rows.append([k, rsig, isig, round(rsig - isig, 12), a * policy.action_step])
    return Table(["k", "rsig", "isig", "deficit", "action"], rows)


def validate_all(cfg, threads=1):
    from .selfcheck import run_suite

    quick = cfg.params.get("quick", True)
    results = run_suite(quick=quick, seed=cfg.seed, threads=threads)
    rows = [[c.number, c.name, "PASS" if c.passed else "FAIL", c.detail] for c in results]
    return Table(["criterion", "name", "status", "detail"], rows)


def run_experiment(cfg, threads=1, out=None):
    """Dispatch ``cfg.experiment`` to its runner."""
    exp = cfg.experiment
    if exp == "mi_curve":
        return mi_curve(cfg, threads)
    if exp == "ir_throughput":
        return fixed_throughput(cfg, threads, "ir")
    if exp == "xp_throughput":
        return fixed_throughput(cfg, threads, "xp")
    if exp == "ir_sweep":
        return optimize(cfg, threads, "ir")
    if exp == "xp_sweep":
        return optimize(cfg, threads, "xp")
    if exp == "mdp_solve":
        return mdp_solve(cfg, threads, out)
    if exp == "mdp_eval":
        return mdp_eval(cfg, threads)
    if exp == "k2_closed_form":
        return k2_table(cfg, threads)
    if exp == "heuristic":
        return heuristic_sweep(cfg, threads)
    if exp == "simulate":
        return simulate(cfg, threads, out)
    if exp == "validate_all":
        return validate_all(cfg, threads)
    raise ConfigurationError(f"unknown experiment {exp!r}")
