"""Command-line experiment runner.

Exit codes: 0 on success, 2 for configuration errors, 3 for solver failures.
The log level is read from the ``XPHARQ_LOG`` environment variable.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config
from .exceptions import ConfigurationError, ContractViolation, ResourceError, SolverError
from .experiments import policy_table, render_csv, run_experiment, write_table
from .mdp import TabularPolicy

log = logging.getLogger("xpharq")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

_COMMANDS = {
    ("mi", None): "mi_curve",
    ("throughput", "ir"): "ir_throughput",
    ("throughput", "xp"): "xp_throughput",
    ("optimize", "ir"): "ir_sweep",
    ("optimize", "xp"): "xp_sweep",
    ("mdp", "solve"): "mdp_solve",
    ("mdp", "eval"): "mdp_eval",
    ("policy", "k2"): "k2_closed_form",
    ("policy", "heuristic"): "heuristic",
    ("heuristic", None): "heuristic",
    ("simulate", None): "simulate",
    ("validate", None): "validate_all",
}


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--seed", type=_u64, help="RNG seed (overrides the config)")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads")

    parser = argparse.ArgumentParser(prog="xpharq", description="HARQ throughput experiments")
    parser.add_argument("--version", action="version", version=f"xpharq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("mi", parents=[common], help="MI versus SNR curve")
    for name, variants, helptext in (
        ("throughput", ("ir", "xp"), "throughput of a fixed rate or schedule"),
        ("optimize", ("ir", "xp"), "grid search for the best fixed rates"),
        ("mdp", ("solve", "eval"), "MDP rate adaptation"),
    ):
        p = sub.add_parser(name, help=helptext)
        vs = p.add_subparsers(dest="variant", required=True)
        for v in variants:
            vs.add_parser(v, parents=[common])
    p = sub.add_parser("policy", help="closed-form and tabular policies")
    vs = p.add_subparsers(dest="variant", required=True)
    vs.add_parser("k2", parents=[common], help="two-round closed-form rate table")
    vs.add_parser("heuristic", parents=[common], help="heuristic policy throughput sweep")
    show = vs.add_parser("show", parents=[common], help="print a policy JSON as a table")
    show.add_argument("policy_file")
    sub.add_parser("heuristic", parents=[common], help="alias of 'policy heuristic'")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo simulation")
    val = sub.add_parser("validate", parents=[common], help="run the self-check suite")
    val.add_argument("--full", action="store_true", help="full-size Monte Carlo runs")
    return parser


def _setup_logging():
    level = os.environ.get("XPHARQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _config_for(args, experiment):
    if args.config:
        cfg = load_config(args.config, experiment)
        if cfg.experiment != experiment:
            raise ConfigurationError(
                f"field 'experiment': config is for {cfg.experiment!r}, command runs {experiment!r}")
    elif experiment == "validate_all":
        cfg = ExperimentConfig(experiment)
    else:
        raise ConfigurationError(f"--config is required for this command ({experiment})")
    if args.seed is not None:
        cfg.seed = args.seed
    if experiment == "validate_all" and getattr(args, "full", False):
        cfg.params["quick"] = False
    return cfg


def _show_policy(args):
    try:
        policy = TabularPolicy.from_json(Path(args.policy_file).read_text())
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"cannot read policy {args.policy_file}: {exc}") from None
    table = policy_table(policy)
    if args.out:
        Path(args.out).write_text(render_csv(table))
    else:
        meta = policy.metadata
        print(f"# mode={meta.get('mode')} k_max={meta.get('k_max')} grid_step={policy.grid_step} "
              f"action_step={policy.action_step} first_rate={policy.restart_action * policy.action_step}")
        print(render_csv(table), end="")


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    variant = getattr(args, "variant", None)
    try:
        if args.command == "policy" and variant == "show":
            _show_policy(args)
            return EXIT_OK
        experiment = _COMMANDS[(args.command, variant)]
        cfg = _config_for(args, experiment)
        out = args.out or cfg.output
        table = run_experiment(cfg, threads=args.threads, out=out)
        write_table(table, cfg, out)
        if experiment == "validate_all":
            for row in table.rows:
                print(f"{row[2]} [{row[0]}] {row[1]}: {row[3]}", file=sys.stderr if out is None else sys.stdout)
            return EXIT_OK if all(row[2] == "PASS" for row in table.rows) else EXIT_SOLVER
        if experiment == "simulate" and out is not None:
            Path(out).with_suffix(".simresult.json").write_text(
                json.dumps(table.extra["sim_results"], indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    except (ConfigurationError, ContractViolation) as exc:
        print(f"xpharq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ResourceError) as exc:
        print(f"xpharq: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
