"""Command-line front end: ``netql simulate | bounds | qre | sweep``.

Exit codes: 0 success, 2 configuration or parameter error, 3 numerical
failure (overflow during a single simulation).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._validation import NumericalError, ParameterError
from ._version import __version__
from .config import ConfigError, GameFamily, build_graph, load_config, merge_overrides, DEFAULT_CONFIG
from .dynamics import DynamicsConfig, assess_convergence, initial_state, integrate_qld, random_interior_strategy, run_discrete
from .equilibrium import qre_fixed_point
from .experiments import (
    HistogramConfig,
    SweepConfig,
    compare_to_theory,
    run_boundary,
    run_heatmap,
    run_histogram,
    write_comparison_csv,
    write_manifest,
)
from .graph import SBParams, er_bound, sb_bound

logger = logging.getLogger("netql")

OUTPUT_ENV = "NETQL_OUTPUT_DIR"
BOUND_FAMILIES = ("shapley", "sato", "zerosum")


def _available_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _resolve(args) -> dict:
    config = load_config(args.config) if getattr(args, "config", None) else json.loads(json.dumps(DEFAULT_CONFIG))
    config = merge_overrides(config, args.set or [])
    if args.seed is not None:
        config["seed"] = args.seed
    if not isinstance(config["seed"], int) or config["seed"] < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {config['seed']!r}")
    return config


def _out_dir(args, config) -> Path:
    out = args.out or config["output"].get("dir") or os.environ.get(OUTPUT_ENV) or "netql-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dynamics(config) -> tuple[str, DynamicsConfig]:
    d = dict(config["dynamics"])
    mode = d.pop("mode", "discrete")
    if mode not in ("discrete", "continuous"):
        raise ConfigError(f"dynamics.mode must be discrete or continuous, got {mode!r}")
    unknown = set(d) - {"exploration", "learning_rate", "steps", "tail", "dt", "var_threshold", "rel_threshold"}
    if unknown:
        raise ConfigError(f"unknown dynamics fields: {sorted(unknown)}")
    try:
        return mode, DynamicsConfig(**d)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"dynamics: {err}") from err


def _game(config, rng):
    fam = GameFamily.from_dict(config["game"])
    graph = build_graph(config["network"], rng)
    try:
        return fam.build(graph, rng)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"game: {err}") from err


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    config = _resolve(args)
    mode, dyn = _dynamics(config)
    rng = np.random.default_rng(config["seed"])
    game = _game(config, rng)
    dyn.exploration_vector(game.n_agents)
    out = _out_dir(args, config)
    if mode == "discrete":
        dyn.learning_rate_vector(game.n_agents)
        traj = run_discrete(game, dyn, initial_state(game, dyn.exploration, rng))
    else:
        traj = integrate_qld(game, dyn, random_interior_strategy(game, rng))
    report = assess_convergence(traj, dyn.tail, dyn.var_threshold, dyn.rel_threshold)
    outputs = [out / "trajectory.csv", out / "report.json", out / "game.json"]
    traj.to_csv(outputs[0])
    report.to_json(outputs[1])
    game.save(outputs[2])
    if args.render or config["output"].get("render"):
        from .plotting import plot_trajectory

        outputs.append(out / "trajectory.png")
        plot_trajectory(traj, outputs[-1])
    write_manifest(out / "manifest.json", "simulate", config, config["seed"], [str(p) for p in outputs])
    print(f"converged: {report.converged}")
    print(f"mean_variance: {report.mean_variance!r}")
    print(f"relative_difference: {report.relative_difference!r}")
    print(f"outputs written to {out}")
    return 0


def cmd_bounds(args) -> int:
    eps = args.epsilon
    rows = []
    if args.model in ("er", "both"):
        b = er_bound(args.n, args.p, eps)
        rows.append(("ER", args.n, args.p, "", 1, b))
    if args.model in ("sb", "both"):
        if args.q is None:
            raise ParameterError("--q is required for the SB model")
        if args.n % args.communities:
            raise ParameterError(f"--n={args.n} is not divisible by --communities={args.communities}")
        b = sb_bound(SBParams.equal(args.n, args.communities, args.p, args.q), eps)
        rows.append(("SB", args.n, args.p, args.q, args.communities, b))
    deltas = {f: (1.0 if args.literal_theorem_threshold else GameFamily(f).delta) for f in BOUND_FAMILIES}
    header = ["model", "n", "p", "q", "communities", "epsilon", "bound", "leading_term"]
    header += [f"threshold_{f}" for f in BOUND_FAMILIES]
    table = [[m, n, p, q, c, eps, b.value, b.leading_term] + [deltas[f] * b.value for f in BOUND_FAMILIES]
             for m, n, p, q, c, b in rows]
    w = csv.writer(sys.stdout)
    w.writerow(header)
    w.writerows(table)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows([header] + table)
    return 0


def cmd_qre(args) -> int:
    config = _resolve(args)
    rng = np.random.default_rng(config["seed"])
    game = _game(config, rng)
    T = config["dynamics"]["exploration"] if args.exploration is None else args.exploration
    if args.starts < 1:
        raise ParameterError("--starts must be >= 1")
    results = []
    for s in range(args.starts):
        x0 = None if s == 0 else random_interior_strategy(game, rng)
        results.append(qre_fixed_point(game, T, x0, tol=args.tol))
    best = results[0]
    print("agent,action,probability")
    for k in range(game.n_agents):
        for a, v in enumerate(game.block(best.strategy, k)):
            print(f"{k},{a},{float(v)!r}")
    for i, r in enumerate(results):
        print(f"start {i}: residual={r.residual!r} iterations={r.iterations} converged={r.converged}")
    if len(results) == 1:
        print("max pairwise disagreement: n/a")
    else:
        gap = max(float(np.max(np.abs(a.strategy - b.strategy)))
                  for a, b in itertools.combinations(results, 2))
        print(f"max pairwise disagreement: {gap!r}")
    return 0


_SWEEP_KINDS = ("heatmap", "boundary", "compare", "histogram")


def cmd_sweep(args) -> int:
    config = _resolve(args)
    exp = dict(config["experiment"])
    kind = exp.pop("kind", "heatmap")
    if kind not in _SWEEP_KINDS:
        raise ConfigError(f"experiment.kind must be one of {_SWEEP_KINDS}, got {kind!r}")
    threads = args.threads or _available_threads()
    out = _out_dir(args, config)
    render = args.render or config["output"].get("render")
    eps = args.epsilon if args.epsilon is not None else exp.pop("epsilon", 0.05)
    exp.pop("epsilon", None)
    exp["game"] = GameFamily.from_dict(config["game"])
    exp["base_seed"] = config["seed"]
    outputs = []
    try:
        if kind == "histogram":
            hcfg = HistogramConfig.from_dict(exp)
        else:
            scfg = SweepConfig.from_dict(exp)
    except TypeError as err:
        raise ConfigError(f"experiment: {err}") from err
    if kind == "heatmap":
        res = run_heatmap(scfg, threads)
        outputs.append(out / "heatmap.csv")
        res.to_csv(outputs[-1])
        if render:
            from .plotting import plot_heatmaps

            outputs.append(out / "heatmap.png")
            plot_heatmaps(res, outputs[-1])
    elif kind in ("boundary", "compare"):
        res = run_boundary(scfg, threads)
        outputs.append(out / "boundary.csv")
        res.to_csv(outputs[-1])
        if kind == "compare":
            rows = compare_to_theory(scfg, eps, res, use_literal=args.literal_theorem_threshold)
            outputs.append(out / "theory.csv")
            write_comparison_csv(rows, outputs[-1])
        if render:
            from .plotting import plot_boundary

            outputs.append(out / "boundary.png")
            plot_boundary(res, outputs[-1])
    else:
        res = run_histogram(hcfg, threads)
        outputs.append(out / "histogram.csv")
        res.to_csv(outputs[-1])
        if render:
            from .plotting import plot_histogram

            outputs.append(out / "histogram.png")
            plot_histogram(res, outputs[-1])
    write_manifest(out / "manifest.json", "sweep", config, config["seed"], [str(p) for p in outputs])
    print(f"{kind} results written to {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netql", description="Q-learning on network polymatrix games")
    parser.add_argument("--version", action="version", version=f"netql {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config or run manifest")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--seed", type=int, help="base seed (u64)")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./netql-out)")

    p = sub.add_parser("simulate", help="run one simulation and write its trajectory")
    common(p)
    p.add_argument("--render", action="store_true", help="also write a strategy plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="spectral-radius bounds and exploration thresholds")
    p.add_argument("--model", choices=("er", "sb", "both"), default="er")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--communities", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--literal-theorem-threshold", action="store_true", help="drop the delta_I factor")
    p.add_argument("--csv", help="also write the table to this file")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("qre", help="multi-start logit QRE")
    common(p)
    p.add_argument("--exploration", type=float, help="defaults to dynamics.exploration")
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_qre)

    p = sub.add_parser("sweep", help="heatmap, boundary, theory comparison or histogram experiment")
    common(p, config_required=True)
    p.add_argument("--threads", type=int, help="worker processes (default: available CPUs)")
    p.add_argument("--render", action="store_true")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--literal-theorem-threshold", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as err:
        print(f"netql: numerical failure: {err}", file=sys.stderr)
        return 3
    except (ConfigError, ParameterError) as err:
        print(f"netql: error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        # contract/domain errors from malformed inputs are config problems too
        print(f"netql: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
