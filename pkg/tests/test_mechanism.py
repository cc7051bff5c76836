import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forests import DEMO_EDGES, DEMO_CASCADE
from recursive_incentive.errors import DomainError, SettlementError, UnknownTaskError, ValidationError
from recursive_incentive.mechanism import (
    PaymentLedger,
    SuccessModel,
    Task,
    TaskEnvironment,
    as_rational,
    chain_payment,
    check_budget,
    false_name_reward,
    sequences_from_finders,
    settle,
    to_decimal,
)
from recursive_incentive.network import SocialGraph, WinningSequence, load_cascade, load_graph


@pytest.fixture
def demo_env():
    return TaskEnvironment.uniform(load_graph(DEMO_EDGES), n_tasks=2, budget=8000)


@pytest.fixture
def demo_sequences():
    return [WinningSequence(1, (1, 8, 6)), WinningSequence(2, (1, 2, 3, 4))]


class TestChainPayment:
    @pytest.mark.parametrize("v,r,k,expected", [
        (4000, 3, 3, 2000),
        (4000, 4, 1, 250),
        (4000, 1, 1, 2000),
        (4000, 3, 2, 1000),
        (4000, 3, 1, 500),
    ])
    def test_values(self, v, r, k, expected):
        assert chain_payment(v, r, k) == expected

    @pytest.mark.parametrize("r,k", [(3, 0), (3, 4), (0, 1)])
    def test_out_of_range(self, r, k):
        with pytest.raises(DomainError):
            chain_payment(4000, r, k)

    def test_exact(self):
        p = chain_payment(1, 70, 1)
        assert isinstance(p, Fraction) and p == Fraction(1, 2 ** 70)


@given(st.fractions(min_value=Fraction(1, 1000), max_value=10 ** 9), st.integers(1, 64))
@settings(max_examples=200, deadline=None)
def test_never_in_deficit(v, r):
    total = sum(chain_payment(v, r, k) for k in range(1, r + 1))
    assert total == v * (2 ** r - 1) / 2 ** r
    assert total <= v


@given(st.integers(1, 64), st.integers(1, 64))
def test_finder_payment_independent_of_chain_length(r1, r2):
    assert chain_payment(4000, r1, r1) == chain_payment(4000, r2, r2) == 2000


@given(st.integers(2, 64))
def test_payment_doubles_toward_finder(r):
    for k in range(1, r):
        assert chain_payment(4000, r, k + 1) == 2 * chain_payment(4000, r, k)


class TestSettle:
    def test_worked_example(self, demo_env, demo_sequences):
        ledger = settle(demo_env, demo_sequences)
        assert ledger.payments == {1: 750, 2: 500, 3: 1000, 4: 2000, 6: 2000, 8: 1000}
        assert ledger.total_surplus == 750
        assert ledger.per_task_surplus == {1: 500, 2: 250}

    def test_empty(self, demo_env):
        ledger = settle(demo_env, [])
        assert ledger.payments == {}
        assert ledger.total_surplus == demo_env.budget
        assert ledger.per_task_surplus == {1: 4000, 2: 4000}

    def test_length_five_chain(self):
        env = TaskEnvironment.uniform(SocialGraph(), 1, 4000)
        ledger = settle(env, [WinningSequence(1, (10, 11, 12, 13, 14))])
        # termwise: 4000/2, 4000/4, ... from the finder upward
        assert [ledger.payments[a] for a in (14, 13, 12, 11, 10)] == [2000, 1000, 500, 250, 125]
        assert ledger.per_task_surplus[1] == 125
        assert 4000 - ledger.per_task_surplus[1] == Fraction(4000 * (2 ** 5 - 1), 2 ** 5)

    def test_duplicate_task(self, demo_env):
        with pytest.raises(SettlementError):
            settle(demo_env, [WinningSequence(1, (1,)), WinningSequence(1, (1, 2))])

    def test_unknown_task(self, demo_env):
        with pytest.raises(UnknownTaskError):
            settle(demo_env, [WinningSequence(7, (1,))])

    def test_permutation_invariant(self, demo_env, demo_sequences):
        assert settle(demo_env, demo_sequences) == settle(demo_env, demo_sequences[::-1])

    def test_paid_agents_are_in_sequences(self, demo_env, demo_sequences):
        ledger = settle(demo_env, demo_sequences)
        members = {a for s in demo_sequences for a in s.chain}
        assert set(ledger.payments) <= members

    def test_from_finders(self, demo_env):
        forest = load_cascade(DEMO_CASCADE)
        seqs = sequences_from_finders(forest, [6, 4])
        assert settle(demo_env, seqs).payments[1] == 750


class TestCheckBudget:
    def test_worked_example(self, demo_sequences):
        env = TaskEnvironment.uniform(load_graph(DEMO_EDGES), 10, 40000)
        report = check_budget(env, {1}, settle(env, demo_sequences))
        assert report.satisfied
        assert report.slack == 40000 - 7250

    def test_seed_costs_violate(self):
        env = TaskEnvironment.uniform(SocialGraph(), 1, 100, seed_cost=50)
        report = check_budget(env, {1, 2, 3}, settle(env, []))
        assert not report.satisfied
        assert report.slack == -50


@st.composite
def settlements(draw):
    n_tasks = draw(st.integers(1, 8))
    budget = draw(st.integers(1, 10 ** 6))
    found = draw(st.lists(st.integers(1, n_tasks), unique=True))
    seqs = []
    next_agent = 0
    for t in found:
        r = draw(st.integers(1, 20))
        share = draw(st.booleans()) and next_agent > 0
        start = 0 if share else next_agent
        chain = tuple(range(start, start + r))
        next_agent = max(next_agent, start + r)
        seqs.append(WinningSequence(t, chain))
    return TaskEnvironment.uniform(SocialGraph(), n_tasks, budget), seqs


@given(settlements())
@settings(max_examples=150, deadline=None)
def test_uniform_settlement_never_violates_budget(case):
    env, seqs = case
    ledger = settle(env, seqs)
    assert check_budget(env, set(), ledger).satisfied
    assert ledger.total_surplus == env.budget - ledger.total_paid >= 0
    assert sum(ledger.per_task_surplus.values()) == ledger.total_surplus


class TestFalseName:
    def test_values(self):
        assert false_name_reward(4000, 0) == 2000
        assert false_name_reward(4000, 3) == 2000 + 1000 + 500 + 250 == 3750

    def test_limit(self):
        assert 4000 - false_name_reward(4000, 60) < Fraction(1, 10 ** 14)

    def test_monotone_and_bounded(self):
        rewards = [false_name_reward(4000, m) for m in range(30)]
        assert all(a < b for a, b in zip(rewards, rewards[1:]))
        assert all(r < 4000 for r in rewards)

    def test_negative(self):
        with pytest.raises(DomainError):
            false_name_reward(4000, -1)


class TestLedgerJson:
    def test_roundtrip(self, demo_env, demo_sequences):
        ledger = settle(demo_env, demo_sequences)
        data = json.loads(ledger.to_json())
        assert data["payments"]["1"] == "750/1"
        assert data["surplus"] == "750/1"
        assert PaymentLedger.from_json(ledger.to_json()) == ledger

    def test_rendered(self):
        env = TaskEnvironment.uniform(SocialGraph(), 1, 1)
        ledger = settle(env, [WinningSequence(1, tuple(range(9)))])
        assert ledger.payments[0] == Fraction(1, 512)
        assert ledger.rendered(4)["payments"]["0"] == "0.0020"
        assert str(to_decimal(Fraction(1, 3), 3)) == "0.333"


class TestEnvironment:
    def test_task_budget(self):
        env = TaskEnvironment.uniform(SocialGraph(), 10, 40000)
        assert env.task_budget == 4000
        assert all(t.value == 4000 for t in env.tasks)
        assert env.uniform_values

    def test_invalid(self):
        with pytest.raises(ValidationError):
            Task(1, 0)
        with pytest.raises(ValidationError):
            TaskEnvironment(SocialGraph(), (Task(1, 60), Task(2, 60)), budget=100)
        with pytest.raises(ValidationError):
            TaskEnvironment.uniform(SocialGraph(), 1, 100, seed_cost=-1)

    def test_heterogeneous_values_allowed(self):
        env = TaskEnvironment(SocialGraph(), (Task(1, 10), Task(2, 200)), budget=100)
        assert not env.uniform_values
        ledger = settle(env, [WinningSequence(2, (1,))])
        assert check_budget(env, {1}, ledger).satisfied  # pays 100 of a 100 budget

    def test_epsilon_population_bound(self):
        g = load_graph(DEMO_EDGES)
        TaskEnvironment.uniform(g, 1, 10, success_model=SuccessModel.with_epsilon(Fraction(1, 9)))
        with pytest.raises(ValidationError):
            TaskEnvironment.uniform(g, 1, 10, success_model=SuccessModel.with_epsilon(0.2))

    def test_float_conversion_is_exact(self):
        assert as_rational(0.1) == Fraction(1, 10)
