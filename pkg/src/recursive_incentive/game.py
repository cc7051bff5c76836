"""Recruitment games on fixed forests.

Every tree root is a seed. Each non-leaf node decides whether to pass the
task on to its children; a node's expected share under the uniform success
model is its weight in the recruited subforest divided by the subforest's
size. Payoffs are in units of the finder's payment, half the task value,
unless a ``unit`` is supplied.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal, Mapping

from .errors import DomainError, SizeError, ValidationError
from .mechanism import Rational, as_rational
from .network import (
    AgentId,
    DescendantProfile,
    RecruitmentForest,
    descendant_profile,
)

Mode = Literal["all-or-none", "selective"]
DEFAULT_CAP = 2 ** 20

__all__ = [
    "DescendantProfile", "EpsilonModel", "StrategyProfile", "RecruitDecision",
    "ChildDecision", "SelectiveDecision", "NashReport", "recruited_subforest",
    "expected_payment_uniform", "expected_reward_epsilon", "weight", "payoffs",
    "prefers_recruit_all", "is_all_recruit_nash", "prefers_selective_recruit_all",
    "is_selective_recruit_nash", "brute_force_equilibrium", "payoff_matrix",
    "format_payoff_matrix", "selective_monotonicity_violations", "subtree_weights",
]


@dataclass(frozen=True)
class EpsilonModel:
    epsilon: Fraction
    population: int

    def __post_init__(self):
        eps = as_rational(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not 0 < eps <= 1:
            raise ValidationError("epsilon must lie in (0, 1]")
        if self.population < 1:
            raise ValidationError("population must be positive")
        if self.population * eps > 1:
            raise ValidationError("population * epsilon must not exceed 1")


@dataclass(frozen=True)
class StrategyProfile:
    """Per-node recruitment choice.

    In all-or-none mode a choice is a bool; in selective mode it is the set
    of children recruited. Nodes missing from ``choices`` recruit nobody.
    """

    choices: Mapping[AgentId, bool | frozenset[AgentId]] = field(default_factory=dict)
    mode: Mode = "all-or-none"

    def __post_init__(self):
        if self.mode not in ("all-or-none", "selective"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == "selective":
            object.__setattr__(self, "choices",
                               {a: frozenset(c) for a, c in self.choices.items()})
        else:
            object.__setattr__(self, "choices", {a: bool(c) for a, c in self.choices.items()})

    @classmethod
    def all_recruit(cls, forest: RecruitmentForest, mode: Mode = "all-or-none") -> StrategyProfile:
        players = [a for a in forest.agents if forest.children(a)]
        if mode == "selective":
            return cls({a: frozenset(forest.children(a)) for a in players}, mode)
        return cls({a: True for a in players}, mode)

    def recruited_children(self, forest: RecruitmentForest, node: AgentId) -> tuple[AgentId, ...]:
        choice = self.choices.get(node)
        if not choice:
            return ()
        if self.mode == "selective":
            return tuple(c for c in forest.children(node) if c in choice)
        return forest.children(node)

    def validate(self, forest: RecruitmentForest) -> None:
        for node, choice in self.choices.items():
            if node not in forest:
                raise ValidationError(f"profile names agent {node} outside the forest")
            if self.mode == "selective" and not choice <= set(forest.children(node)):
                raise ValidationError(f"agent {node} selects non-children {sorted(choice - set(forest.children(node)))}")

    def __hash__(self) -> int:
        return hash((self.mode, frozenset(self.choices.items())))


def recruited_subforest(forest: RecruitmentForest, profile: StrategyProfile) -> RecruitmentForest:
    profile.validate(forest)
    keep = []
    frontier = list(forest.roots)
    while frontier:
        node = frontier.pop()
        keep.append(node)
        frontier.extend(profile.recruited_children(forest, node))
    return forest.restrict(keep)


def expected_payment_uniform(profile_shape: DescendantProfile | Iterable[int], n_prime: int,
                             unit: Rational = 1) -> Fraction:
    """Expected share ``(1 + sum_i x_i / 2**i) / n'`` times ``unit``."""
    shape = profile_shape if isinstance(profile_shape, DescendantProfile) \
        else DescendantProfile(tuple(profile_shape))
    if n_prime < 1 + shape.total:
        raise DomainError(f"n' = {n_prime} is smaller than the node's own subtree ({1 + shape.total})")
    return as_rational(unit) * (1 + shape.discounted) / n_prime


def expected_reward_epsilon(model: EpsilonModel, task_value: Rational,
                            subtree_counts: DescendantProfile | Iterable[int] = (0,)) -> Fraction:
    shape = subtree_counts if isinstance(subtree_counts, DescendantProfile) \
        else DescendantProfile(tuple(subtree_counts))
    v = as_rational(task_value)
    return model.epsilon * v / 2 + sum(
        (model.epsilon * x * v / 2 ** j for j, x in enumerate(shape.counts, 1)), Fraction(0))


def subtree_weights(forest: RecruitmentForest, nodes: Iterable[AgentId]) -> dict[AgentId, Fraction]:
    """Weights of ``nodes`` and of everything below them."""
    order: list[AgentId] = []
    for n in nodes:
        order.append(n)
        order.extend(forest.descendants(n))
    w: dict[AgentId, Fraction] = {}
    for n in reversed(order):
        if n not in w:
            w[n] = 1 + sum((w[c] for c in forest.children(n)), Fraction(0)) / 2
    return w


def weight(forest: RecruitmentForest, node: AgentId) -> Fraction:
    """Reward ``node`` would collect if every node in its subtree found a task."""
    forest.children(node)
    return subtree_weights(forest, [node])[node]


def payoffs(forest: RecruitmentForest, profile: StrategyProfile,
            unit: Rational = 1) -> dict[AgentId, Fraction]:
    """Expected payment of every node of ``forest``; unrecruited nodes get 0."""
    sub = recruited_subforest(forest, profile)
    w = subtree_weights(sub, sub.roots)
    n = len(sub)
    v = as_rational(unit)
    return {a: (v * w[a] / n if a in w else Fraction(0)) for a in forest.agents}


# -- analytic conditions -----------------------------------------------------

@dataclass(frozen=True)
class RecruitDecision:
    node: AgentId
    profile: DescendantProfile
    outsiders: int  # nodes of F that are not descendants of ``node``
    threshold: Fraction
    prefers: bool
    indifferent: bool
    payoff_recruit: Fraction
    payoff_abstain: Fraction

    def to_dict(self) -> dict:
        return {"node": self.node, "profile": list(self.profile.counts), "k": self.outsiders,
                "threshold": str(self.threshold), "prefers_recruit": self.prefers,
                "indifferent": self.indifferent,
                "payoff_recruit": str(self.payoff_recruit),
                "payoff_abstain": str(self.payoff_abstain)}


def prefers_recruit_all(forest: RecruitmentForest, node: AgentId) -> RecruitDecision:
    """Strict preference for recruiting, all other nodes recruiting.

    Recruiting wins iff ``k > sum(x) / sum(x_i / 2**i)``. Equality is reported
    as ``indifferent`` and does not count as a preference.
    """
    shape = descendant_profile(forest, node)
    n = len(forest)
    m = shape.total
    k = n - m
    if m == 0:
        u = Fraction(1, n)
        return RecruitDecision(node, shape, k, Fraction(0), True, False, u, u)
    threshold = m / shape.discounted
    recruit = (1 + shape.discounted) / n
    abstain = Fraction(1, k)
    return RecruitDecision(node, shape, k, threshold, k > threshold, k == threshold,
                           recruit, abstain)


@dataclass(frozen=True)
class NashReport:
    is_nash: bool
    deviators: tuple[AgentId, ...]
    indifferent: tuple[AgentId, ...]
    decisions: tuple = ()

    def to_dict(self) -> dict:
        return {"is_nash": self.is_nash, "deviators": list(self.deviators),
                "indifferent": list(self.indifferent),
                "decisions": [d.to_dict() for d in self.decisions]}


def is_all_recruit_nash(forest: RecruitmentForest) -> NashReport:
    """All-recruit is Nash iff no node strictly gains by recruiting nobody."""
    decisions = tuple(prefers_recruit_all(forest, a) for a in forest.agents)
    deviators = tuple(d.node for d in decisions if not d.prefers and not d.indifferent)
    indifferent = tuple(d.node for d in decisions if d.indifferent)
    return NashReport(not deviators, deviators, indifferent, decisions)


@dataclass(frozen=True)
class ChildDecision:
    child: AgentId
    child_weight: Fraction
    child_size: int  # subtree size including the child
    payoff_with: Fraction
    payoff_without: Fraction
    recruit: bool
    sufficient: bool

    @property
    def indifferent(self) -> bool:
        return self.payoff_with == self.payoff_without

    def to_dict(self) -> dict:
        return {"child": self.child, "weight": str(self.child_weight), "size": self.child_size,
                "payoff_with": str(self.payoff_with), "payoff_without": str(self.payoff_without),
                "recruit": self.recruit, "sufficient_condition": self.sufficient}


@dataclass(frozen=True)
class SelectiveDecision:
    node: AgentId
    outsiders: int
    children: tuple[ChildDecision, ...]

    @property
    def recruits_all(self) -> bool:
        return all(c.recruit for c in self.children)

    @property
    def profitable_drops(self) -> tuple[AgentId, ...]:
        return tuple(c.child for c in self.children if c.payoff_without > c.payoff_with)

    def to_dict(self) -> dict:
        return {"node": self.node, "k": self.outsiders, "recruits_all": self.recruits_all,
                "children": [c.to_dict() for c in self.children]}


def prefers_selective_recruit_all(forest: RecruitmentForest, node: AgentId) -> SelectiveDecision:
    """Per-child test of whether dropping that child alone lowers ``node``'s share.

    Child subtree sizes include the child, so outsiders plus all child
    subtrees add up to the forest size.
    """
    kids = forest.children(node)
    w = subtree_weights(forest, kids)
    sizes = {c: forest.subtree_size(c) for c in kids}
    m = len(kids)
    k = len(forest) - sum(sizes.values())
    total_w = sum((w[c] for c in kids), Fraction(0))
    total_s = sum(sizes.values())
    full = (1 + total_w / 2) / (k + total_s)
    bound = (1 + Fraction(m - 1, 2)) / (k + m - 1) if k + m - 1 > 0 else None
    out = []
    for c in kids:
        without = (1 + (total_w - w[c]) / 2) / (k + total_s - sizes[c])
        sufficient = bound is not None and w[c] / sizes[c] > bound
        out.append(ChildDecision(c, w[c], sizes[c], full, without, without < full, sufficient))
    return SelectiveDecision(node, k, tuple(out))


def is_selective_recruit_nash(forest: RecruitmentForest) -> NashReport:
    """All-recruit Nash check when nodes may recruit any subset of children.

    Dropping a set of children pays only if their pooled weight-to-size ratio
    is below the node's current share, which requires some single child to be
    below it too; single-child drops therefore decide the question.
    """
    decisions = tuple(prefers_selective_recruit_all(forest, a)
                      for a in forest.agents if forest.children(a))
    deviators = tuple(d.node for d in decisions if d.profitable_drops)
    indifferent = tuple(d.node for d in decisions
                        if not d.profitable_drops and any(c.indifferent for c in d.children))
    return NashReport(not deviators, deviators, indifferent, decisions)


def selective_monotonicity_violations(forest: RecruitmentForest) -> list[tuple[AgentId, AgentId, frozenset]]:
    """Cases where recruiting child ``x`` helps alongside all siblings but hurts
    alongside the sibling subset ``S``, all other nodes recruiting.

    Returns ``(node, x, S)`` triples.
    """
    out = []
    for a in forest.agents:
        kids = forest.children(a)
        if len(kids) < 2:
            continue
        w = subtree_weights(forest, kids)
        sizes = {c: forest.subtree_size(c) for c in kids}
        k = len(forest) - sum(sizes.values())

        def share(chosen):
            return (1 + sum((w[c] for c in chosen), Fraction(0)) / 2) / (k + sum(sizes[c] for c in chosen))

        for x in kids:
            others = [c for c in kids if c != x]
            if not share(kids) > share(others):
                continue
            for r in range(len(others)):
                for subset in itertools.combinations(others, r):
                    if not share(subset + (x,)) > share(subset):
                        out.append((a, x, frozenset(subset)))
    return out


# -- exhaustive oracle -------------------------------------------------------

def brute_force_equilibrium(forest: RecruitmentForest, mode: Mode = "all-or-none",
                            cap: int = DEFAULT_CAP) -> list[StrategyProfile]:
    """Every pure-strategy profile from which no node has a strictly improving
    unilateral deviation."""
    if mode not in ("all-or-none", "selective"):
        raise ValidationError(f"unknown mode {mode!r}")
    agents = list(forest.agents)
    pos = {a: i for i, a in enumerate(agents)}
    parent_idx = [None if forest.parent(a) is None else pos[forest.parent(a)] for a in agents]
    edges = [i for i in range(len(agents)) if parent_idx[i] is not None]
    edge_bit = {child: j for j, child in enumerate(edges)}
    players = [a for a in agents if forest.children(a)]
    player_bits = {a: [edge_bit[pos[c]] for c in forest.children(a)] for a in players}

    if mode == "all-or-none":
        n_profiles = 2 ** len(players)
    else:
        n_profiles = 2 ** len(edges)
    if n_profiles > cap:
        raise SizeError(f"{n_profiles} strategy profiles exceed the cap of {cap}")

    def player_mask(a):
        return sum(1 << b for b in player_bits[a])

    if mode == "all-or-none":
        pmasks = [player_mask(a) for a in players]
        profiles = []
        for bits in range(n_profiles):
            profiles.append(sum(pmasks[i] for i in range(len(players)) if bits >> i & 1))
    else:
        profiles = list(range(n_profiles))

    n = len(agents)
    cache: dict[int, list[Fraction]] = {}

    def table(mask):
        if mask not in cache:
            inc = [False] * n
            for i in range(n):  # records are time-sorted, so parents come first
                p = parent_idx[i]
                inc[i] = p is None or (inc[p] and bool(mask >> edge_bit[i] & 1))
            size = sum(inc)
            w = [Fraction(0)] * n
            for i in reversed(range(n)):
                if inc[i]:
                    w[i] += 1
                    p = parent_idx[i]
                    if p is not None:
                        w[p] += w[i] / 2
            cache[mask] = [w[i] / size if inc[i] else Fraction(0) for i in range(n)]
        return cache[mask]

    def alternatives(a, mask):
        own = player_mask(a)
        rest = mask & ~own
        if mode == "all-or-none":
            yield rest if mask & own else rest | own
            return
        bits = player_bits[a]
        for choice in range(2 ** len(bits)):
            alt = rest | sum(1 << b for j, b in enumerate(bits) if choice >> j & 1)
            if alt != mask:
                yield alt

    equilibria = []
    for mask in profiles:
        base = table(mask)
        stable = True
        for a in players:
            i = pos[a]
            if any(table(alt)[i] > base[i] for alt in alternatives(a, mask)):
                stable = False
                break
        if stable:
            equilibria.append(_mask_to_profile(forest, players, player_bits, mask, mode))
    return equilibria


def _mask_to_profile(forest, players, player_bits, mask, mode) -> StrategyProfile:
    if mode == "all-or-none":
        return StrategyProfile({a: bool(mask >> player_bits[a][0] & 1) for a in players}, mode)
    return StrategyProfile(
        {a: frozenset(c for c, b in zip(forest.children(a), player_bits[a]) if mask >> b & 1)
         for a in players}, mode)


def payoff_matrix(forest: RecruitmentForest, row: AgentId, col: AgentId,
                  unit: Rational = 1) -> dict[tuple[bool, bool], tuple[Fraction, Fraction]]:
    """All-or-none payoffs of two players, every other player recruiting."""
    base = dict(StrategyProfile.all_recruit(forest).choices)
    out = {}
    for r, c in itertools.product((False, True), repeat=2):
        choices = dict(base)
        choices[row] = r
        choices[col] = c
        u = payoffs(forest, StrategyProfile(choices), unit)
        out[(r, c)] = (u[row], u[col])
    return out


def format_payoff_matrix(matrix: Mapping[tuple[bool, bool], tuple[Fraction, Fraction]],
                         row: AgentId, col: AgentId) -> str:
    label = {False: "N", True: "Y"}
    cells = {key: f"{a}, {b}" for key, (a, b) in matrix.items()}
    width = max(len(s) for s in cells.values())
    lines = [f"{row}\\{col}".ljust(6) + "  ".join(label[c].center(width) for c in (False, True))]
    for r in (False, True):
        lines.append(label[r].ljust(6) + "  ".join(cells[(r, c)].center(width) for c in (False, True)))
    return "\n".join(lines)
