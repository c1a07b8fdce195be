import math

import numpy as np
import pytest
from scipy.special import expit

from almabdc.benchmarks import (
    CASES,
    DesignStrategy,
    DoseSpec,
    DragSpec,
    MixtureSpec,
    SpatialSpec,
    baseline_next,
    dose_reward,
    dose_utility,
    drag_value,
    make_problem,
    make_policy,
    mixture_mean,
    mixture_reward,
    saturation_value,
    spatial_field_draw,
    spatial_grid,
)
from almabdc.benchmarks.cases import case1_spec, case3_spec, lattice_points, maximin_order
from almabdc.benchmarks.strategies import d_optimal_scores, logistic_mle
from almabdc.errors import ConfigError, InputError
from almabdc.surrogate import kernel_eval


def test_mixture_values():
    single = MixtureSpec([1.0], [[0.3]], [[[0.01]]], 0.0, [[0.3]])
    assert mixture_mean(single, [0.3]) == pytest.approx(1.0)
    two = MixtureSpec([0.5, 0.5], [[-3.0], [3.0]], [[[1.0]], [[1.0]]], 0.0, [[0.0]])
    assert mixture_mean(two, [0.0]) == pytest.approx(math.exp(-4.5))
    noisy = MixtureSpec([1.0], [[0.0]], [[[1.0]]], 0.5, [[0.0]])
    rng = np.random.default_rng(0)
    draws = [mixture_reward(noisy, [0.0], rng) for _ in range(20_000)]
    assert abs(np.mean(draws) - 1.0) < 3 * 0.5 / math.sqrt(20_000) * 1.5


def test_mixture_rejects_bad_specs():
    with pytest.raises(ConfigError):
        MixtureSpec([0.7, 0.7], [[0.0], [1.0]], [[[1.0]], [[1.0]]], 0.0, [[0.0]])
    with pytest.raises(ConfigError):
        MixtureSpec([1.0], [[0.0, 0.0]], [[[1.0, 1.0], [1.0, 1.0]]], 0.0, [[0.0, 0.0]])


def test_dose_utility_optimum_and_values():
    spec = DoseSpec()
    u = spec.utilities()
    assert spec.doses[np.argmax(u)] == 3.5
    assert dose_utility(spec, 3.5) == pytest.approx(0.684, abs=5e-4)
    assert dose_utility(spec, 0.0) == pytest.approx(expit(-1.5) - 0.5 * expit(-5.0))
    no_penalty = DoseSpec(penalty=0.0)
    assert np.all(np.diff(no_penalty.utilities()) > 0)
    with pytest.raises(InputError):
        dose_utility(spec, 3.3)


def test_dose_reward_monte_carlo_mean():
    rng = np.random.default_rng(1)
    spec = DoseSpec()
    mean = np.mean([dose_reward(spec, 3.5, rng) for _ in range(40_000)])
    assert mean == pytest.approx(0.684, abs=0.01)
    sure = DoseSpec(fixed_efficacy=1.0, penalty=0.0)
    assert all(dose_reward(sure, 2.0, rng) == 1.0 for _ in range(50))


def test_spatial_field_moments():
    spec = SpatialSpec()
    rng = np.random.default_rng(2)
    draws = np.array([spatial_field_draw(spec, rng) for _ in range(4000)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.08)
    assert np.all(np.abs(draws.var(axis=0) - 1.0) < 0.1)
    cov = np.cov(draws[:, 0], draws[:, 1])[0, 1]
    grid = spatial_grid(spec)
    assert cov == pytest.approx(kernel_eval(spec.kernel, grid[0], grid[1]), abs=0.08)


def test_saturation_peak_and_monotone_path():
    spec = case1_spec()
    opt = spec.from_unit(np.array([0.62, 0.35, 0.71, 0.44, 0.28]))
    assert saturation_value(spec, opt) == pytest.approx(0.9342)
    path = np.linspace(0.0, 1.0, 21)
    start = spec.from_unit(np.zeros(5))
    values = [saturation_value(spec, start + t * (opt - start)) for t in path]
    assert np.all(np.diff(values) >= -1e-12)
    assert saturation_value(case3_spec(), case3_spec().from_unit([0.33, 0.58, 0.66, 0.81, 0.24, 0.47])) == \
        pytest.approx(9599.0)


def test_drag_bowl():
    spec = DragSpec()
    assert drag_value(spec, *spec.optimum) == pytest.approx(0.0587)
    assert drag_value(spec, 0.10, 0.20) > 0.09
    d = 0.01
    assert drag_value(spec, spec.optimum[0] - d, spec.optimum[1]) == pytest.approx(
        drag_value(spec, spec.optimum[0] + d, spec.optimum[1]))
    with pytest.raises(InputError):
        drag_value(spec, 0.2, 0.1)


def test_maximin_order_and_lattice():
    order = maximin_order(np.linspace(0, 8, 5))
    assert list(order) == [0, 4, 2, 1, 3]
    pts = lattice_points(2, 9)
    assert pts.shape == (9, 2)
    assert len({tuple(p) for p in np.round(pts, 9)}) == 9


def test_problem_construction_is_seeded():
    a = make_problem("1", np.random.default_rng(3))
    b = make_problem("1", np.random.default_rng(3))
    np.testing.assert_array_equal(a.truth, b.truth)
    assert a.lattice.size == CASES["1"].budget
    assert make_problem("2", np.random.default_rng(0)).sense == -1
    with pytest.raises(ConfigError):
        make_problem("7", np.random.default_rng(0))


def test_case4_and_case5_start_designs():
    p4 = make_problem("4", np.random.default_rng(0))
    assert [float(p4.candidates[i, 0]) for i in p4.start] == [0.0, 2.0, 5.5, 8.0]
    p5 = make_problem("5", np.random.default_rng(0))
    assert len(p5.start) == 4


def test_random_with_single_candidate_pool():
    problem = make_problem("4", np.random.default_rng(0))
    problem.pool = np.array([7])
    assert baseline_next("random", [], problem, np.random.default_rng(0)) == [7]


def test_greedy_max_variance_prior_tie_break():
    problem = make_problem("5", np.random.default_rng(0))
    problem.start = []
    assert baseline_next("greedy_max_variance", [], problem, np.random.default_rng(0)) == [0]


def test_d_optimal_first_pick_matches_brute_force():
    problem = make_problem("4", np.random.default_rng(0))
    doses = problem.candidates[:, 0]
    history = [(i, 0.0) for i in problem.start]
    pick = baseline_next(DesignStrategy("d_optimal", {"prior_efficacy": (0.0, 0.0),
                                                      "prior_toxicity": (0.0, 0.0)}),
                         history, problem, np.random.default_rng(0))[0]
    scores = d_optimal_scores((0.0, 0.0), (0.0, 0.0), doses[problem.start], doses)
    assert scores[pick] == pytest.approx(scores.max())


def test_logistic_mle_recovers_coefficients():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 8, 4000)
    y = (rng.random(4000) < expit(-1.5 + 0.9 * x)).astype(float)
    coef, ok = logistic_mle(x, y, (0.0, 0.0))
    assert ok
    np.testing.assert_allclose(coef, [-1.5, 0.9], atol=0.2)
    _, ok = logistic_mle([0.0, 1.0], [0.0, 1.0], (0.0, 0.0))
    assert not ok


def test_equal_spacing_stride_validation():
    problem = make_problem("4", np.random.default_rng(0))
    with pytest.raises(ConfigError):
        make_policy(DesignStrategy("equal_spacing", {"order": "stride", "stride": 3}), problem, 10)
    policy = make_policy(DesignStrategy("equal_spacing", {"order": "stride", "stride": 4}), problem, 10)
    assert policy is not None


def test_unknown_strategy_rejected():
    with pytest.raises(ConfigError):
        DesignStrategy("simulated_annealing")
