"""Cascade simulation on social graphs.

A recruited agent makes one attempt on each out-neighbour. The attempt
succeeds with the recruiter's recruit probability and, if it does, reaches
the neighbour after an exponential delay. A node signs up once it has heard
from ``signal_threshold`` recruited neighbours; its recruiter is whoever
reached it first (ties go to the lower id).

Under common random numbers every edge owns a fixed (acceptance, delay)
draw derived from its position in the sorted edge list and ``rng_seed``, so
two runs that differ only in seeds or strategies see the same randomness.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .game import subtree_weights
from .mechanism import SuccessModel, Task
from .network import (
    AgentId,
    RecruitmentForest,
    RecruitmentRecord,
    SocialGraph,
    WinningSequence,
    path_to_root,
)


@dataclass(frozen=True)
class DiffusionConfig:
    seeds: frozenset[AgentId]
    rng_seed: int
    recruit_probability: float = 1.0
    mean_intersignup: float = 600.0
    horizon: float | None = None
    node_recruit_probability: Mapping[AgentId, float] = field(default_factory=dict)
    signal_threshold: int = 1
    common_random_numbers: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seeds", frozenset(self.seeds))
        object.__setattr__(self, "node_recruit_probability", dict(self.node_recruit_probability))
        if not self.seeds:
            raise ConfigurationError("seed set is empty")
        for p in (self.recruit_probability, *self.node_recruit_probability.values()):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"recruit probability {p} outside [0, 1]")
        if not self.mean_intersignup > 0:
            raise ConfigurationError("mean inter-signup time must be positive")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigurationError("horizon must be non-negative")
        if self.signal_threshold < 1:
            raise ConfigurationError("signal threshold must be at least 1")
        if isinstance(self.rng_seed, bool) or not isinstance(self.rng_seed, (int, np.integer)):
            raise ConfigurationError("rng_seed must be an integer")

    def check(self, graph: SocialGraph) -> None:
        missing = self.seeds - graph.agents
        if missing:
            raise ConfigurationError(f"seeds not in graph: {sorted(missing)}")

    def probability_of(self, agent: AgentId) -> float:
        return self.node_recruit_probability.get(agent, self.recruit_probability)

    def without_seed(self, seed: AgentId) -> DiffusionConfig:
        return replace(self, seeds=self.seeds - {seed})

    def abstaining(self, agent: AgentId) -> DiffusionConfig:
        """Same process, with ``agent`` recruiting nobody."""
        probs = dict(self.node_recruit_probability)
        probs[agent] = 0.0
        return replace(self, node_recruit_probability=probs)


def edge_draws(graph: SocialGraph, rng_seed: int, mean_intersignup: float
               ) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge uniform acceptance draw and exponential delay, indexed by edge id."""
    rng = np.random.default_rng(rng_seed)
    m = len(graph.sorted_edges)
    return rng.random(m), rng.exponential(mean_intersignup, m)


def run_cascade(graph: SocialGraph, config: DiffusionConfig) -> RecruitmentForest:
    config.check(graph)
    edges = graph.sorted_edges
    if config.common_random_numbers:
        accept, delay = edge_draws(graph, config.rng_seed, config.mean_intersignup)
        stream = None
    else:
        stream = np.random.default_rng(config.rng_seed)

    signup: dict[AgentId, float] = {}
    parent: dict[AgentId, AgentId | None] = {}
    heard: dict[AgentId, list[tuple[float, AgentId]]] = {}
    queue: list[tuple[float, AgentId, AgentId]] = []

    def sign_up(node, t, recruiter):
        signup[node] = t
        parent[node] = recruiter
        p = config.probability_of(node)
        for eid in graph.out_edge_ids(node):
            if stream is None:
                ok, d = accept[eid] < p, delay[eid]
            else:
                ok, d = stream.random() < p, stream.exponential(config.mean_intersignup)
            target = edges[eid][1]
            if ok and target not in signup:
                arrival = t + d
                if arrival <= t:
                    arrival = math.nextafter(t, math.inf)
                heapq.heappush(queue, (arrival, node, target))

    for s in sorted(config.seeds):
        sign_up(s, 0.0, None)
    while queue:
        t, sender, node = heapq.heappop(queue)
        if config.horizon is not None and t > config.horizon:
            break
        if node in signup:
            continue
        got = heard.setdefault(node, [])
        got.append((t, sender))
        if len(got) >= config.signal_threshold:
            sign_up(node, t, got[0][1])
    return RecruitmentForest(RecruitmentRecord(a, parent[a], signup[a]) for a in signup)


def select_seeds(graph: SocialGraph, count: int, rule: str = "degree",
                 rng_seed: int | None = None) -> frozenset[AgentId]:
    """Pick ``count`` seeds by out-degree (ties to lower id) or uniformly at random."""
    if not 0 < count <= len(graph):
        raise ConfigurationError(f"cannot pick {count} seeds from {len(graph)} agents")
    agents = sorted(graph.agents)
    if rule == "degree":
        ranked = sorted(agents, key=lambda a: (-len(graph.out_edge_ids(a)), a))
        return frozenset(ranked[:count])
    if rule == "random":
        if rng_seed is None:
            raise ConfigurationError("random seed selection needs rng_seed")
        rng = np.random.default_rng(rng_seed)
        return frozenset(int(a) for a in rng.choice(agents, size=count, replace=False))
    raise ConfigurationError(f"unknown seed rule {rule!r}")


# -- task finding ------------------------------------------------------------

def draw_finders(forest: RecruitmentForest, model: SuccessModel, n_tasks: int,
                 rng: np.random.Generator) -> list[AgentId | None]:
    """Finder of each task, or ``None`` when nobody finds it."""
    agents = forest.agents
    if model.kind == "uniform":
        if not agents:
            raise ConfigurationError("uniform success model needs a non-empty forest")
        return [agents[i] for i in rng.integers(len(agents), size=n_tasks)]
    eps = float(model.epsilon)
    hits = [a for a, u in zip(agents, rng.random(len(agents))) if u < eps]
    order = rng.permutation(len(hits)) if hits else []
    finders: list[AgentId | None] = [hits[i] for i in order][:n_tasks]
    return finders + [None] * (n_tasks - len(finders))


def sample_finders(forest: RecruitmentForest, model: SuccessModel, tasks: Sequence[Task],
                   rng_seed: int) -> list[WinningSequence]:
    rng = np.random.default_rng(rng_seed)
    found = draw_finders(forest, model, len(tasks), rng)
    return [path_to_root(forest, f, t.id) for f, t in zip(found, tasks) if f is not None]


# -- monotonicity and equilibrium on graphs ---------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    baseline: dict[AgentId, int]
    after_removal: dict[AgentId, dict[AgentId, int]]
    violations: tuple[tuple[AgentId, AgentId, int, int], ...]  # (removed, seed, before, after)

    @property
    def monotonic(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "monotonic": self.monotonic,
            "baseline": {str(k): v for k, v in sorted(self.baseline.items())},
            "after_removal": {str(x): {str(k): v for k, v in sorted(s.items())}
                              for x, s in sorted(self.after_removal.items())},
            "violations": [dict(zip(("removed", "seed", "before", "after"), v))
                           for v in self.violations],
        }


def _seed_tree_sizes(forest: RecruitmentForest, seeds: Iterable[AgentId]) -> dict[AgentId, int]:
    sizes = forest.tree_sizes()
    return {s: sizes.get(s, 0) for s in seeds}


def check_monotonic(graph: SocialGraph, config: DiffusionConfig) -> MonotonicityReport:
    """Remove each seed in turn and look for a surviving seed whose tree shrinks."""
    if not config.common_random_numbers:
        raise CapabilityError("seed-removal comparison needs common random numbers")
    base = _seed_tree_sizes(run_cascade(graph, config), config.seeds)
    after: dict[AgentId, dict[AgentId, int]] = {}
    violations = []
    if len(config.seeds) > 1:
        for x in sorted(config.seeds):
            reduced = config.without_seed(x)
            sizes = _seed_tree_sizes(run_cascade(graph, reduced), reduced.seeds)
            after[x] = sizes
            for s, size in sorted(sizes.items()):
                if size < base[s]:
                    violations.append((x, s, base[s], size))
    return MonotonicityReport(base, after, tuple(violations))


@dataclass(frozen=True)
class GraphEquilibriumReport:
    n_recruited: int
    max_tree: int
    premise_holds: bool
    monotonic: bool
    deviations: tuple[tuple[AgentId, Fraction, Fraction], ...]  # (node, recruit, abstain)

    @property
    def profitable_deviators(self) -> tuple[AgentId, ...]:
        return tuple(a for a, rec, ab in self.deviations if ab > rec)

    @property
    def verdict(self) -> str:
        if not (self.premise_holds and self.monotonic):
            return "inconclusive"
        return "violated" if self.profitable_deviators else "nash"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "n_recruited": self.n_recruited,
                "max_tree": self.max_tree, "premise_holds": self.premise_holds,
                "monotonic": self.monotonic,
                "profitable_deviators": list(self.profitable_deviators),
                "deviations": [{"node": a, "recruit": str(r), "abstain": str(b)}
                               for a, r, b in self.deviations]}


def _share(forest: RecruitmentForest, agent: AgentId) -> Fraction:
    if agent not in forest:
        return Fraction(0)
    return subtree_weights(forest, [agent])[agent] / len(forest)


def equilibrium_on_graph(graph: SocialGraph, config: DiffusionConfig,
                         max_deviations: int | None = 50, sample_seed: int = 0
                         ) -> GraphEquilibriumReport:
    """Check the premises for all-recruit being Nash and probe single-node abstentions.

    The premise is checked on the realised coupled cascade, not in
    expectation over the process.
    """
    if not config.common_random_numbers:
        raise CapabilityError("premise cannot be verified without common random numbers")
    forest = run_cascade(graph, config)
    n = len(forest)
    max_tree = max(forest.tree_sizes().values())
    premise = 2 * max_tree <= n
    monotonic = check_monotonic(graph, config).monotonic
    candidates = [a for a in forest.agents if forest.children(a)]
    if max_deviations is not None and len(candidates) > max_deviations:
        rng = np.random.default_rng(sample_seed)
        picked = rng.choice(len(candidates), size=max_deviations, replace=False)
        candidates = [candidates[i] for i in sorted(picked)]
    deviations = []
    for a in candidates:
        recruit = _share(forest, a)
        abstain = _share(run_cascade(graph, config.abstaining(a)), a)
        deviations.append((a, recruit, abstain))
    return GraphEquilibriumReport(n, max_tree, premise, monotonic, tuple(deviations))
