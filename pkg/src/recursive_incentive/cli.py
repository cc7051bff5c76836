"""Command-line entry point.

Exit codes: 0 success, 1 bad configuration, 2 unreadable or invalid data,
3 analysis not possible (capability or enumeration cap).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from . import analysis, diffusion, game, mechanism
from .errors import (
    CapabilityError,
    ConfigurationError,
    FitError,
    ParseError,
    RecursiveIncentiveError,
    SizeError,
    UnknownAgentError,
    ValidationError,
)
from .network import SocialGraph, read_cascade, read_graph, write_cascade

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CAPABILITY = 0, 1, 2, 3


class DataError(RecursiveIncentiveError):
    """Input file missing, unreadable or invalid."""


@dataclass
class ScenarioConfig:
    graph_path: str | None = None
    seeds: list[int] | None = None
    n_seeds: int | None = None
    seed_rule: str = "degree"
    n_tasks: int = 10
    budget: str = "40000"
    seed_cost: str = "0"
    recruit_probability: float = 1.0
    mean_intersignup: float = 600.0
    horizon: float | None = None
    signal_threshold: int = 1
    symmetrize: bool = False
    success_model: str = "uniform"
    epsilon: str | None = None
    output_dir: str = "."
    rng_seed: int | None = None
    replicates: int = 1
    workers: int = 1

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> ScenarioConfig:
        data = {}
        if path:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if k in known and v is not None})
        return cls(**data)

    def require_seed(self) -> int:
        if self.rng_seed is None:
            raise ConfigurationError("rng_seed is required (pass --rng-seed or set it in the config)")
        return int(self.rng_seed)

    def diffusion_config(self, graph, rng_seed: int) -> diffusion.DiffusionConfig:
        if self.seeds:
            seeds = frozenset(int(s) for s in self.seeds)
        elif self.n_seeds:
            seeds = diffusion.select_seeds(graph, self.n_seeds, self.seed_rule, rng_seed)
        else:
            raise ConfigurationError("give either seeds or n_seeds")
        cfg = diffusion.DiffusionConfig(
            seeds=seeds, rng_seed=rng_seed,
            recruit_probability=self.recruit_probability,
            mean_intersignup=self.mean_intersignup, horizon=self.horizon,
            signal_threshold=self.signal_threshold)
        cfg.check(graph)
        return cfg

    def success(self) -> mechanism.SuccessModel:
        if self.success_model == "epsilon":
            if self.epsilon is None:
                raise ConfigurationError("epsilon success model needs --epsilon")
            return mechanism.SuccessModel.with_epsilon(Fraction(self.epsilon))
        if self.success_model == "uniform":
            return mechanism.SuccessModel.uniform()
        raise ConfigurationError(f"unknown success model {self.success_model!r}")


def _int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated integers, got {text!r}") from None


def _load_graph(cfg: ScenarioConfig):
    if not cfg.graph_path:
        raise ConfigurationError("graph_path is required")
    try:
        return read_graph(cfg.graph_path, symmetrize=cfg.symmetrize)
    except (OSError, ParseError, ValidationError) as exc:
        raise DataError(f"cannot load graph {cfg.graph_path}: {exc}") from None


def _load_forest(path: str):
    try:
        return read_cascade(path)
    except (OSError, ParseError, ValidationError) as exc:
        raise DataError(f"cannot load cascade {path}: {exc}") from None


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _summary(forest) -> dict:
    depths = forest.tree_depths()
    return {"n_recruited": len(forest), "trees": len(forest.roots),
            "max_depth": max(depths.values(), default=0)}


def _simulate_one(graph, dcfg, out: Path) -> dict:
    forest = diffusion.run_cascade(graph, dcfg)
    write_cascade(forest, out)
    return {"file": out.name, "rng_seed": dcfg.rng_seed, **_summary(forest)}


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = ScenarioConfig.load(args.config, {
        "graph_path": args.graph, "seeds": _int_list(args.seeds), "n_seeds": args.n_seeds,
        "seed_rule": args.seed_rule, "recruit_probability": args.recruit_probability,
        "mean_intersignup": args.mean_intersignup, "horizon": args.horizon,
        "signal_threshold": args.signal_threshold, "symmetrize": args.symmetrize or None,
        "output_dir": args.output_dir, "rng_seed": args.rng_seed,
        "replicates": args.replicates, "workers": args.workers})
    seed = cfg.require_seed()
    graph = _load_graph(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.replicates <= 1:
        summary = _simulate_one(graph, cfg.diffusion_config(graph, seed), out_dir / "cascade.csv")
        print(f"n'={summary['n_recruited']} trees={summary['trees']} max_depth={summary['max_depth']}")
        return EXIT_OK

    configs = [cfg.diffusion_config(graph, seed + i) for i in range(cfg.replicates)]
    paths = [out_dir / f"cascade_r{i:03d}.csv" for i in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_simulate_one, [graph] * len(configs), configs, paths))
    else:
        results = [_simulate_one(graph, c, p) for c, p in zip(configs, paths)]
    sizes = [r["n_recruited"] for r in results]
    aggregate = {"replicates": results, "mean_n_recruited": sum(sizes) / len(sizes)}
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate, indent=2) + "\n")
    for r in results:
        print(f"{r['file']}: n'={r['n_recruited']} trees={r['trees']} max_depth={r['max_depth']}")
    return EXIT_OK


def cmd_settle(args) -> int:
    cfg = ScenarioConfig.load(args.config, {
        "n_tasks": args.tasks, "budget": args.budget, "seed_cost": args.seed_cost,
        "success_model": args.success_model, "epsilon": args.epsilon, "rng_seed": args.rng_seed})
    forest = _load_forest(args.cascade)
    try:
        env = mechanism.TaskEnvironment.uniform(
            _forest_graph(forest), cfg.n_tasks, Fraction(cfg.budget),
            Fraction(cfg.seed_cost), cfg.success())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(str(exc)) from None
    finders = _int_list(args.finders)
    if finders is not None:
        if len(finders) > cfg.n_tasks:
            raise ConfigurationError(f"{len(finders)} finders for {cfg.n_tasks} tasks")
        try:
            sequences = mechanism.sequences_from_finders(forest, finders)
        except UnknownAgentError as exc:
            raise DataError(f"finder not in cascade: {exc.agent}") from None
    elif args.sample:
        sequences = diffusion.sample_finders(forest, env.success_model, env.tasks, cfg.require_seed())
    else:
        sequences = []
    ledger = mechanism.settle(env, sequences)
    report = mechanism.check_budget(env, forest.roots, ledger)
    out = ledger.to_dict()
    out["task_budget"] = mechanism.format_rational(env.task_budget)
    out["sequences"] = [{"task": s.task, "chain": list(s.chain)} for s in sequences]
    out["budget_check"] = report.to_dict()
    text = json.dumps(out, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _forest_graph(forest):
    return SocialGraph.from_edges(((r.parent, r.child) for r in forest.records if r.parent is not None),
                                  agents=forest.agents)


def cmd_verify(args) -> int:
    forest = _load_forest(args.forest)
    if not len(forest):
        raise DataError("forest is empty")
    mode = args.mode
    if mode in ("oracle", "oracle-selective"):
        strategy = "selective" if mode == "oracle-selective" else "all-or-none"
        equilibria = game.brute_force_equilibrium(forest, strategy, cap=args.cap)
        target = game.StrategyProfile.all_recruit(forest, strategy)
        nash = target in equilibria
        result = {"mode": mode, "is_nash": nash, "equilibria": len(equilibria)}
        deviators = []
        if not nash:
            check = game.is_selective_recruit_nash if strategy == "selective" else game.is_all_recruit_nash
            deviators = list(check(forest).deviators)
        result["deviators"] = deviators
        lines = [f"pure Nash profiles found: {len(equilibria)}"]
    else:
        report = (game.is_selective_recruit_nash(forest) if mode == "selective"
                  else game.is_all_recruit_nash(forest))
        nash, deviators = report.is_nash, list(report.deviators)
        result = {"mode": mode, **report.to_dict()}
        lines = []
        for d in report.decisions:
            if mode == "selective":
                for c in d.children:
                    lines.append(f"node {d.node} child {c.child}: recruit={'yes' if c.recruit else 'no'} "
                                 f"share with={c.payoff_with} without={c.payoff_without}")
            else:
                lines.append(f"node {d.node}: k={d.outsiders} threshold={d.threshold} "
                             f"prefers={'yes' if d.prefers else 'no'}"
                             + (" (indifferent)" if d.indifferent else ""))
    verdict = "yes" if nash else "no; deviators: " + ", ".join(
        f"{a} (root)" if forest.parent(a) is None else str(a) for a in deviators)
    if args.json:
        print(json.dumps(result, indent=2, default=str))
    else:
        print(f"all-recruit is Nash: {verdict}")
        for line in lines:
            print("  " + line)
    return EXIT_OK


def cmd_analyze(args) -> int:
    forest = _load_forest(args.cascade)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = analysis.compute_stats(forest, include_singletons=not args.exclude_singletons)
    sizes = list(forest.tree_sizes().values())
    if args.exclude_singletons:
        sizes = [s for s in sizes if s > 1]
    delays = analysis.inter_signup_times(forest)
    report = {"stats": stats.to_dict(), "power_law_size": None, "exponential_delay": None,
              "notices": []}
    try:
        report["power_law_size"] = analysis.fit_power_law(sizes).to_dict()
    except FitError as exc:
        report["notices"].append(f"tree-size power-law fit skipped: {exc}")
    exp_fit = None
    try:
        exp_fit = analysis.fit_exponential(delays)
        report["exponential_delay"] = exp_fit.to_dict()
    except FitError as exc:
        report["notices"].append(f"inter-signup exponential fit skipped: {exc}")
    for note in report["notices"]:
        print(f"notice: {note}", file=sys.stderr)

    (out_dir / "stats.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_csv(out_dir / "tree_size_loglog.csv", ("size", "count", "frequency"),
               analysis.loglog_histogram(sizes) if sizes else [])
    _write_csv(out_dir / "intersignup_ccdf.csv", ("seconds", "empirical_ccdf", "fitted_ccdf"),
               analysis.ccdf_table(delays, exp_fit) if delays.size else [])
    timeline = analysis.recruitment_timeline(forest, args.bin_width)
    _write_csv(out_dir / "timeline.csv", ("bin_start", "signups", "cumulative"), timeline.rows())
    print(f"trees={stats.tree_count} nodes={stats.node_count} max_size={stats.max_size} "
          f"max_depth={stats.max_depth} attrition={stats.attrition_rate:.3f}")
    return EXIT_OK


def cmd_monotonicity(args) -> int:
    cfg = ScenarioConfig.load(args.config, {
        "graph_path": args.graph, "seeds": _int_list(args.seeds), "n_seeds": args.n_seeds,
        "seed_rule": args.seed_rule, "recruit_probability": args.recruit_probability,
        "mean_intersignup": args.mean_intersignup, "signal_threshold": args.signal_threshold,
        "symmetrize": args.symmetrize or None, "rng_seed": args.rng_seed})
    seed = cfg.require_seed()
    graph = _load_graph(cfg)
    dcfg = cfg.diffusion_config(graph, seed)
    report = diffusion.check_monotonic(graph, dcfg)
    out = {"monotonicity": report.to_dict()}
    print(f"monotonic: {'yes' if report.monotonic else 'no'}")
    for removed, s, before, after in report.violations:
        print(f"  removing seed {removed} shrinks seed {s}'s tree from {before} to {after}")
    if args.equilibrium:
        eq = diffusion.equilibrium_on_graph(graph, dcfg)
        out["equilibrium"] = eq.to_dict()
        print(f"all-recruit equilibrium: {eq.verdict}")
    if args.output:
        Path(args.output).write_text(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_diffusion_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario file; flags override its keys")
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--symmetrize", action="store_true", help="treat every edge as two-way")
    p.add_argument("--seeds", help="comma-separated seed agent ids")
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--seed-rule", choices=("degree", "random"))
    p.add_argument("--recruit-probability", type=float)
    p.add_argument("--mean-intersignup", type=float, help="seconds")
    p.add_argument("--signal-threshold", type=int)
    p.add_argument("--rng-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recursive-incentive")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a cascade and write its CSV log")
    _add_diffusion_args(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("settle", help="compute payments for found tasks")
    p.add_argument("cascade")
    p.add_argument("--config")
    p.add_argument("--finders", help="finder of task 1, task 2, ... (comma-separated)")
    p.add_argument("--sample", action="store_true", help="draw finders from the success model")
    p.add_argument("--tasks", type=int)
    p.add_argument("--budget")
    p.add_argument("--seed-cost")
    p.add_argument("--success-model", choices=("uniform", "epsilon"))
    p.add_argument("--epsilon")
    p.add_argument("--rng-seed", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_settle)

    p = sub.add_parser("verify", help="check whether everyone recruiting is Nash")
    p.add_argument("forest")
    p.add_argument("--mode", default="analytic",
                   choices=("analytic", "selective", "oracle", "oracle-selective"))
    p.add_argument("--cap", type=int, default=game.DEFAULT_CAP)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="cascade statistics and fits")
    p.add_argument("cascade")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--bin-width", type=float, default=3600.0, help="timeline bin, seconds")
    p.add_argument("--exclude-singletons", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("monotonicity", help="seed-removal monotonicity probe")
    _add_diffusion_args(p)
    p.add_argument("--equilibrium", action="store_true",
                   help="also check the all-recruit equilibrium premises")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_monotonicity)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParseError, UnknownAgentError, ValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CapabilityError, SizeError) as exc:
        print(f"cannot run: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
