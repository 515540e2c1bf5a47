import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sociallearn.config import CostModel, ScenarioConfig
from sociallearn.equilibrium import (
    GridSpec,
    herding_bound,
    herding_delta,
    line_cutoff_recursion,
    line_limit,
    line_limit_candidates,
    maximal_learning_prob,
    public_belief_dynamics,
    solve,
    welfare_compare,
)
from sociallearn.errors import ConfigError, GridOverflowError, RegimeError, SizeError, UnsupportedPolicyError
from sociallearn.netform import Constant, FullHistory, ImmediateOne, Policy, SqrtGrowth, ZeroPrefix
from sociallearn.oracle import brute_force_oracle
from sociallearn.signals import BoundedLinear, LinearUnbounded

LIN = LinearUnbounded()
COSTS = (0.0, 0.05, 0.1, 0.2)


def test_maximal_learning_prob():
    assert maximal_learning_prob(LIN, 0.1) == pytest.approx(0.99, abs=1e-12)
    assert maximal_learning_prob(LIN, 0.3) == pytest.approx(0.91, abs=1e-12)
    assert maximal_learning_prob(BoundedLinear(0.3), 0.0) == 1.0
    assert maximal_learning_prob(LIN, 0.0) == 1.0
    # weak beliefs: everyone pays, the target is 1
    assert maximal_learning_prob(BoundedLinear(0.1), 0.4) == 1.0


def test_herding_bound():
    assert herding_delta(BoundedLinear(0.5)) == pytest.approx(0.1, abs=1e-12)
    assert herding_bound(BoundedLinear(0.5)) == pytest.approx(0.9, abs=1e-12)
    assert herding_delta(BoundedLinear(0.8)) == pytest.approx(0.01 / 0.82, abs=1e-12)
    assert herding_bound(BoundedLinear(0.8)) == pytest.approx(0.98780, abs=1e-5)
    assert herding_bound(BoundedLinear(0.99999)) > 0.99999
    with pytest.raises(RegimeError):
        herding_bound(LIN)


def test_line_recursion_first_steps():
    eq = line_cutoff_recursion(LIN, 0.1, 3)
    assert eq.correct[0] == pytest.approx(0.75, abs=1e-12)
    assert eq.cutoffs[1] == pytest.approx(0.3, abs=1e-10)
    assert eq.correct[1] == pytest.approx(0.8025, abs=1e-10)


@pytest.mark.parametrize("c", [0.25, 0.3, 0.45])
def test_line_recursion_no_observation(c):
    eq = line_cutoff_recursion(LIN, c, 50)
    assert np.all(eq.cutoffs == 0.0)
    np.testing.assert_allclose(eq.correct, 0.75, atol=1e-14)


def test_line_recursion_zero_cost():
    eq = line_cutoff_recursion(LIN, 0.0, 400, with_limit=False)
    assert np.all(np.diff(eq.correct) >= -1e-15)
    assert eq.correct[-1] > 0.98
    assert np.all(eq.cutoffs[1:] == 1.0)


def test_line_recursion_converges_to_fixed_point():
    eq = line_cutoff_recursion(LIN, 0.1, 500)
    assert np.all(np.diff(eq.correct) >= -1e-15)
    assert abs(eq.correct[-1] - eq.limit_prob) < 1e-6
    assert eq.converged_at is not None and eq.converged_at < 500


@pytest.mark.parametrize("c", [0.05, 0.1, 0.2])
def test_line_limit_cutoff_closed_form(c):
    s_hat, p_hat = line_limit(LIN, c)
    assert s_hat == pytest.approx(1 - 4 * c, abs=1e-8)
    # fixed point F0(-s)/(F0(-s) + F1(-s)) at s = 1 - 4c
    assert p_hat == pytest.approx(1 - c, abs=1e-8)


def test_line_limit_small_cost_and_candidates():
    s_hat, p_hat = line_limit(LIN, 1e-6)
    assert s_hat > 0.9999 and p_hat > 0.9999
    cand = line_limit_candidates(0.1)
    assert cand["fixed_point"] == pytest.approx(0.9)
    assert cand["closed_form_1_minus_4c2"] == pytest.approx(0.96)
    assert cand["limit_cutoff"] == pytest.approx(0.6)


@given(st.floats(min_value=0.001, max_value=0.49))
@settings(max_examples=40, deadline=None)
def test_equilibrium_below_maximal_below_one(c):
    _, p_hat = line_limit(LIN, c)
    assert p_hat <= maximal_learning_prob(LIN, c) + 1e-12 <= 1.0 + 1e-12


def test_public_dynamics_bounded_herding():
    pd = public_belief_dynamics(BoundedLinear(0.5), 0.0, 200)
    assert pd.limit <= 0.9 + 1e-3
    assert pd.cascade[-1] > 0
    assert pd.binned


def test_public_dynamics_unbounded_increasing():
    pd = public_belief_dynamics(LIN, 0.0, 60)
    assert np.all(np.diff(pd.correct) >= -1e-12)
    assert pd.correct[-1] > 0.99
    assert np.all(pd.cascade == 0.0)


def test_grid_errors():
    with pytest.raises(ConfigError):
        GridSpec(bins=1)
    with pytest.raises(GridOverflowError):
        public_belief_dynamics(BoundedLinear(0.5), 0.0, 30, GridSpec(bins=11, width=1.0, max_atoms=11))


MATRIX = [
    (Policy.IMMEDIATE, ImmediateOne()),
    (Policy.FIRST_K, SqrtGrowth()),
    (Policy.FIRST_K, FullHistory()),
    (Policy.FIRST_K, Constant(2)),
]


@pytest.mark.parametrize("c", COSTS)
@pytest.mark.parametrize("policy,cap", MATRIX, ids=["line", "firstk-sqrt", "full", "const2"])
def test_oracle_equivalence(c, policy, cap):
    cfg = ScenarioConfig(cost=CostModel.flat(c), capacity=cap, policy=policy, N=8)
    sol = solve(cfg)
    orc = brute_force_oracle(LIN, c, 8, policy, cap)
    np.testing.assert_allclose(sol.correct, orc.correct, atol=1e-6)
    np.testing.assert_allclose(sol.observe, orc.observe, atol=1e-6)


@pytest.mark.parametrize("c", COSTS)
def test_public_dynamics_match_oracle(c):
    pd = public_belief_dynamics(LIN, c, 8)
    orc = brute_force_oracle(LIN, c, 8, Policy.FIRST_K, FullHistory())
    np.testing.assert_allclose(pd.correct, orc.correct, atol=1e-6)


def test_oracle_small_cases():
    assert brute_force_oracle(LIN, 0.1, 1).correct[0] == pytest.approx(0.75, abs=1e-12)
    eq = line_cutoff_recursion(LIN, 0.0, 3, with_limit=False)
    assert brute_force_oracle(LIN, 0.0, 3).correct[2] == pytest.approx(eq.correct[2], abs=1e-10)
    with pytest.raises(SizeError):
        brute_force_oracle(LIN, 0.1, 13)


def test_observation_first_matches_oracle():
    cfg = ScenarioConfig(cost=CostModel.flat(0.05), timing="observation_first", N=8)
    orc = brute_force_oracle(LIN, 0.05, 8, timing="observation_first")
    np.testing.assert_allclose(solve(cfg).correct, orc.correct, atol=1e-10)


@pytest.mark.parametrize("c", [0.05, 0.1, 0.2])
def test_cutoffs_below_strong_belief_bound(c):
    for policy, cap in MATRIX:
        sol = solve(ScenarioConfig(cost=CostModel.flat(c), capacity=cap, policy=policy, N=30))
        assert sol.cutoffs_below_s_star()
        assert np.all((sol.cutoffs >= 0) & (sol.cutoffs <= 1))


def test_zero_cost_accuracy_exceeds_threshold():
    sol = solve(ScenarioConfig(cost=CostModel.flat(0.0), N=400))
    assert np.argmax(sol.correct > 0.98) > 0


def test_flat_schedule_equals_flat_cost():
    base = dict(capacity=SqrtGrowth(), policy=Policy.FIRST_K, N=60)
    a = solve(ScenarioConfig(cost=CostModel.flat(0.1), **base))
    b = solve(ScenarioConfig(cost=CostModel((0.1, 0.1, 0.1)), **base))
    np.testing.assert_array_equal(a.correct, b.correct)


def test_stochastic_block_rules():
    cfg = ScenarioConfig(
        structure=BoundedLinear(0.8), cost=CostModel.flat(0.05), capacity=ZeroPrefix(5, SqrtGrowth()),
        policy=Policy.FIRST_K, epsilon=0.1, M=5, N=30,
    )
    sol = solve(cfg)
    for n, rule in enumerate(sol.rules, start=1):
        assert sum(b.weight for b in rule.branches) == pytest.approx(1.0)
        assert rule.max_m <= cfg.capacity(n)
    late = sol.rules[-1]
    assert sorted(b.weight for b in late.branches) == pytest.approx([0.1, 0.9])
    assert min(max(b.ms) for b in late.branches) <= 5


def test_solver_limits():
    with pytest.raises(SizeError):
        solve(ScenarioConfig(capacity=Constant(25), policy=Policy.FIRST_K, N=40))
    with pytest.raises(UnsupportedPolicyError):
        solve(ScenarioConfig(capacity=Constant(2), policy=Policy.MOST_INFORMATIVE, N=10))
    with pytest.raises(UnsupportedPolicyError):
        solve(ScenarioConfig(policy=Policy.MOST_INFORMATIVE, diffusion=True, N=10))


def test_most_informative_capacity_one_is_the_line():
    a = solve(ScenarioConfig(cost=CostModel.flat(0.1), N=40))
    b = solve(ScenarioConfig(cost=CostModel.flat(0.1), policy=Policy.MOST_INFORMATIVE, N=40))
    np.testing.assert_allclose(a.correct, b.correct, atol=1e-14)


def test_welfare_compare():
    rep = welfare_compare(LIN, LIN, 0.1, 0.2)
    assert (rep.limit_a, rep.limit_b) == pytest.approx((0.99, 0.96))
    assert rep.ordering == "A"
    same = welfare_compare(LIN, LIN, 0.1)
    assert same.ordering == "equal" and not same.flag
    flagged = welfare_compare(BoundedLinear(0.9), LIN, 0.1)
    assert flagged.flag
    with pytest.raises(RegimeError):
        welfare_compare(BoundedLinear(0.8), LIN, 0.1)
