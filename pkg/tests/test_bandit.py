import math

import numpy as np
import pytest

from almabdc.bandit import (
    BanditState,
    DelaySpec,
    RegretLedger,
    al_mab_decomposition,
    comm_cost,
    delayed_feedback_buffer,
    distributed_regret_step,
    effective_regret,
    recompute_distributed_regret,
    simulate_bandit,
    thompson_select,
    ucb1_select,
    ucb_regret_bound,
    update_arm,
)
from almabdc.errors import InputError


def test_ucb_forced_exploration_lowest_index_first():
    state = BanditState.new(3)
    for _ in range(10):
        update_arm(state, 1, 0.5)
    assert ucb1_select(state) == 0
    assert ucb1_select(BanditState.new(1)) == 0


def test_ucb_index_hand_computed():
    state = BanditState.new(2)
    state.counts[:] = [90, 10]
    state.means[:] = [0.5, 0.4]
    assert ucb1_select(state, c=1.0) == 1


def test_ucb_subset_respects_given_order():
    state = BanditState.new(4)
    assert ucb1_select(state, arms=[3, 1]) == 3


def test_thompson_prefers_dominant_beta_arm():
    state = BanditState.new(2, "bernoulli")
    state.alpha[:] = [1000, 1]
    state.beta[:] = [1, 1000]
    rng = np.random.default_rng(0)
    picks = [thompson_select(state, rng) for _ in range(10_000)]
    assert np.mean(np.array(picks) == 0) >= 0.99


def test_thompson_symmetric_posteriors_split_evenly():
    state = BanditState.new(2, "bernoulli")
    rng = np.random.default_rng(1)
    share = np.mean([thompson_select(state, rng) for _ in range(10_000)])
    assert abs(share - 0.5) < 0.02


def test_update_running_mean_and_beta_counts():
    state = BanditState.new(2, "bernoulli")
    update_arm(state, 0, 1.0)
    update_arm(state, 0, 0.0)
    assert state.means[0] == 0.5 and state.counts[0] == 2
    assert (state.alpha[0], state.beta[0]) == (2.0, 2.0)
    with pytest.raises(InputError):
        update_arm(state, 0, 0.5)
    with pytest.raises(InputError):
        update_arm(state, 5, 1.0)


def test_distributed_regret_matches_recomputation():
    ledger = RegretLedger([0.9, 0.5, 0.1], comm_weight=0.5)
    rng = np.random.default_rng(0)
    for _ in range(50):
        distributed_regret_step(ledger, rng.integers(0, 3, size=4), comm=comm_cost(0.1, 1.0, 4))
    assert ledger.distributed_regret == pytest.approx(recompute_distributed_regret(ledger))
    assert effective_regret(ledger) == pytest.approx(ledger.distributed_regret + 0.5 * 50 * 0.4)
    with pytest.raises(InputError):
        distributed_regret_step(ledger, [7])


def test_single_agent_regret_equals_cumulative():
    ledger = RegretLedger([0.9, 0.5])
    for arm in [0, 1, 1, 0]:
        distributed_regret_step(ledger, [arm])
    assert ledger.distributed_regret == pytest.approx(0.8)
    assert ledger.cumulative_regret == pytest.approx(0.8)


def test_regret_bound_formula():
    expected = sum(8 * math.log(100) / g + (1 + math.pi**2 / 3) * g for g in (0.2, 0.4))
    assert ucb_regret_bound([0.2, 0.4], 100) == pytest.approx(expected)
    assert ucb_regret_bound([], 100) == 0.0
    with pytest.raises(InputError):
        ucb_regret_bound([0.0], 100)


def test_delay_buffer_orders_by_delivery_then_agent():
    events = [(0, 1, 0, 1.0), (0, 0, 1, 0.0), (1, 0, 2, 1.0)]
    out = delayed_feedback_buffer(events, DelaySpec("constant", 2), np.random.default_rng(0))
    assert [(d.deliver_round, d.agent) for d in out] == [(2, 0), (2, 1), (3, 0)]
    zero = delayed_feedback_buffer(events, DelaySpec(), np.random.default_rng(0))
    assert all(d.deliver_round == d.issue_round for d in zero)
    with pytest.raises(InputError):
        DelaySpec("uniform", -1)


def test_bandit_run_is_deterministic():
    a = simulate_bandit([0.9, 0.5], 200, np.random.default_rng(4), "ts")
    b = simulate_bandit([0.9, 0.5], 200, np.random.default_rng(4), "ts")
    np.testing.assert_array_equal(a.regret_trajectory, b.regret_trajectory)


def test_decomposition_adds_up():
    rng = np.random.default_rng(0)
    d = al_mab_decomposition([0.9, 0.7, 0.5, 0.3], [0.1, 0.8, 0.6, 0.2], 2, 300, rng)
    assert d.shortlist == (1, 2)
    assert d.total_regret == pytest.approx(d.bandit_regret + d.approximation_excess)
    assert d.approximation_excess == pytest.approx(300 * 0.2)
