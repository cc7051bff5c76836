"""Recursive incentive payments.

The finder of a task receives half the task value, its recruiter a quarter,
and so on up the chain to the seed. Every amount is an exact ``Fraction``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Iterable, Literal, Mapping, Sequence

from .errors import DomainError, SettlementError, UnknownTaskError, ValidationError
from .network import AgentId, SocialGraph, TaskId, WinningSequence, path_to_root

Rational = Fraction | int | str | float


def as_rational(x: Rational) -> Fraction:
    """Exact conversion; floats go through their shortest decimal repr (0.1 -> 1/10)."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def to_decimal(x: Fraction, places: int = 2) -> Decimal:
    q = Decimal(1).scaleb(-places)
    return (Decimal(x.numerator) / Decimal(x.denominator)).quantize(q, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class Task:
    id: TaskId
    value: Fraction

    def __post_init__(self):
        value = as_rational(self.value)
        if value <= 0:
            raise ValidationError(f"task {self.id} must have positive value")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class SuccessModel:
    """Who finds a task: each agent independently with ``epsilon``, or one
    agent drawn uniformly from the recruited population."""

    kind: Literal["epsilon", "uniform"] = "uniform"
    epsilon: Fraction | None = None

    def __post_init__(self):
        if self.kind not in ("epsilon", "uniform"):
            raise ValidationError(f"unknown success model {self.kind!r}")
        if self.kind == "epsilon":
            if self.epsilon is None:
                raise ValidationError("epsilon model needs a probability")
            eps = as_rational(self.epsilon)
            if not 0 <= eps <= 1:
                raise ValidationError("epsilon must lie in [0, 1]")
            object.__setattr__(self, "epsilon", eps)

    @classmethod
    def uniform(cls) -> SuccessModel:
        return cls("uniform")

    @classmethod
    def with_epsilon(cls, epsilon: Rational) -> SuccessModel:
        return cls("epsilon", as_rational(epsilon))

    def check_population(self, n: int) -> None:
        if self.kind == "epsilon" and n * self.epsilon > 1:
            raise ValidationError(f"n * epsilon = {n * self.epsilon} exceeds 1")


@dataclass(frozen=True)
class TaskEnvironment:
    graph: SocialGraph
    tasks: tuple[Task, ...]
    budget: Fraction
    seed_cost: Fraction = Fraction(0)
    success_model: SuccessModel = field(default_factory=SuccessModel.uniform)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "budget", as_rational(self.budget))
        object.__setattr__(self, "seed_cost", as_rational(self.seed_cost))
        if self.budget <= 0:
            raise ValidationError("budget must be positive")
        if self.seed_cost < 0:
            raise ValidationError("seed cost must be non-negative")
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValidationError("task ids must be unique")
        if self.uniform_values and sum(t.value for t in self.tasks) > self.budget:
            raise ValidationError("uniform task values exceed the budget")
        if self.success_model.kind == "epsilon":
            self.success_model.check_population(len(self.graph))

    @classmethod
    def uniform(cls, graph: SocialGraph, n_tasks: int, budget: Rational,
                seed_cost: Rational = 0, success_model: SuccessModel | None = None,
                ) -> TaskEnvironment:
        """Split ``budget`` evenly over ``n_tasks`` tasks numbered from 1."""
        if n_tasks < 1:
            raise ValidationError("need at least one task")
        budget = as_rational(budget)
        share = budget / n_tasks
        tasks = tuple(Task(i, share) for i in range(1, n_tasks + 1))
        return cls(graph, tasks, budget, as_rational(seed_cost),
                   success_model or SuccessModel.uniform())

    @property
    def uniform_values(self) -> bool:
        return bool(self.tasks) and len({t.value for t in self.tasks}) == 1

    @property
    def task_budget(self) -> Fraction:
        return self.budget / len(self.tasks)

    def task(self, task_id: TaskId) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise UnknownTaskError(task_id)


@dataclass(frozen=True)
class PaymentLedger:
    payments: Mapping[AgentId, Fraction]
    per_task_surplus: Mapping[TaskId, Fraction]
    total_surplus: Fraction

    @property
    def total_paid(self) -> Fraction:
        return sum(self.payments.values(), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "payments": {str(a): format_rational(v) for a, v in sorted(self.payments.items())},
            "per_task_surplus": {str(t): format_rational(v)
                                 for t, v in sorted(self.per_task_surplus.items())},
            "surplus": format_rational(self.total_surplus),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> PaymentLedger:
        return cls(
            {int(a): Fraction(v) for a, v in data["payments"].items()},
            {int(t): Fraction(v) for t, v in data.get("per_task_surplus", {}).items()},
            Fraction(data["surplus"]),
        )

    @classmethod
    def from_json(cls, text: str) -> PaymentLedger:
        return cls.from_dict(json.loads(text))

    def rendered(self, places: int = 2) -> dict:
        """Decimal view for display; never feed it back into arithmetic."""
        return {
            "payments": {str(a): str(to_decimal(v, places)) for a, v in sorted(self.payments.items())},
            "surplus": str(to_decimal(self.total_surplus, places)),
        }


def chain_payment(task_value: Rational, chain_length: int, position: int) -> Fraction:
    """Payment to the agent at 1-based ``position`` of a chain of ``chain_length``."""
    if chain_length < 1:
        raise DomainError("chain length must be at least 1")
    if not 1 <= position <= chain_length:
        raise DomainError(f"position {position} outside 1..{chain_length}")
    return as_rational(task_value) / 2 ** (chain_length - position + 1)


def chain_total(task_value: Rational, chain_length: int) -> Fraction:
    """Closed form of the payments along one chain: v (2**r - 1) / 2**r."""
    return as_rational(task_value) * (2 ** chain_length - 1) / 2 ** chain_length


def settle(env: TaskEnvironment, sequences: Iterable[WinningSequence]) -> PaymentLedger:
    values = {t.id: t.value for t in env.tasks}
    seen: set[TaskId] = set()
    payments: dict[AgentId, Fraction] = {}
    per_task = dict(values)
    for seq in sequences:
        if seq.task not in values:
            raise UnknownTaskError(seq.task)
        if seq.task in seen:
            raise SettlementError(f"task {seq.task} settled more than once")
        seen.add(seq.task)
        r = len(seq.chain)
        v = values[seq.task]
        for k, agent in enumerate(seq.chain, 1):
            amount = chain_payment(v, r, k)
            payments[agent] = payments.get(agent, Fraction(0)) + amount
            per_task[seq.task] -= amount
    total = env.budget - sum(payments.values(), Fraction(0))
    return PaymentLedger(payments, per_task, total)


@dataclass(frozen=True)
class BudgetReport:
    satisfied: bool
    slack: Fraction
    seed_spend: Fraction
    payments: Fraction

    def to_dict(self) -> dict:
        return {"satisfied": self.satisfied, "slack": format_rational(self.slack),
                "seed_spend": format_rational(self.seed_spend),
                "payments": format_rational(self.payments)}


def check_budget(env: TaskEnvironment, seeds: Iterable[AgentId],
                 ledger: PaymentLedger) -> BudgetReport:
    seed_spend = env.seed_cost * len(set(seeds))
    paid = ledger.total_paid
    slack = env.budget - seed_spend - paid
    return BudgetReport(slack >= 0, slack, seed_spend, paid)


def false_name_reward(task_value: Rational, m: int) -> Fraction:
    """Total collected by a finder who chains ``m`` fake identities above itself."""
    if m < 0:
        raise DomainError("number of false identities must be non-negative")
    v = as_rational(task_value)
    return sum((v / 2 ** (l + 1) for l in range(m + 1)), Fraction(0))


def sequences_from_finders(forest, finders: Sequence[AgentId],
                           task_ids: Sequence[TaskId] | None = None) -> list[WinningSequence]:
    """Winning sequences for task ``i`` found by ``finders[i]``."""
    if task_ids is None:
        task_ids = range(1, len(finders) + 1)
    return [path_to_root(forest, f, t) for f, t in zip(finders, task_ids)]
