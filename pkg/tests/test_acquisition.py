import numpy as np
import pytest

from almabdc.acquisition import AcquisitionSpec, BatchSpec, acq_score, acq_scores, select_batch, select_next
from almabdc.errors import InputError
from almabdc.surrogate import GpDataset, KernelSpec, PosteriorSummary, gp_fit

SE = KernelSpec("squared_exponential", 0.2, 1.0)


def test_ucb_is_mean_plus_beta_sigma():
    assert acq_score(AcquisitionSpec("ucb", beta=2.0), PosteriorSummary(0.5, 0.04)) == pytest.approx(0.9)


def test_expected_improvement_closed_form():
    # mean equal to the incumbent: EI = sigma * phi(0)
    ei = acq_score(AcquisitionSpec("ei"), PosteriorSummary(1.0, 0.25), incumbent=1.0)
    assert ei == pytest.approx(0.5 * 0.3989422804014327)
    assert acq_score(AcquisitionSpec("ei"), PosteriorSummary(0.3, 0.0), incumbent=0.5) == 0.0


def test_max_variance_ignores_mean():
    s = acq_scores(AcquisitionSpec("max_variance"), [5.0, -5.0], [0.1, 0.3])
    assert list(s) == [0.1, 0.3]


def test_negative_parameters_rejected():
    with pytest.raises(InputError):
        AcquisitionSpec("ucb", beta=-1.0)
    with pytest.raises(InputError):
        BatchSpec(0)
    with pytest.raises(InputError):
        acq_score(AcquisitionSpec("ucb"), PosteriorSummary(0.0, -1.0))


def test_select_next_ties_go_to_lowest_index():
    post = gp_fit(GpDataset.empty(1, 0.1), SE)
    assert select_next(post, np.linspace(0, 1, 9)[:, None], AcquisitionSpec("max_variance")) == 0


def test_select_next_avoids_observed_region_under_max_variance():
    post = gp_fit(GpDataset(np.array([[0.0], [0.1]]), [0.0, 0.0], 0.01), SE)
    cands = np.linspace(0, 1, 11)[:, None]
    assert select_next(post, cands, AcquisitionSpec("max_variance")) == 10


def test_batch_is_distinct_and_spread():
    post = gp_fit(GpDataset(np.array([[0.5]]), [0.0], 0.1), SE)
    cands = np.linspace(0, 1, 21)[:, None]
    picks = select_batch(post, cands, AcquisitionSpec("ucb"), BatchSpec(4, 0.5))
    assert len(set(picks)) == 4
    xs = np.sort(cands[picks, 0])
    assert np.min(np.diff(xs)) >= 0.1


def test_batch_of_one_equals_select_next():
    rng = np.random.default_rng(2)
    post = gp_fit(GpDataset(rng.random((5, 2)), rng.normal(size=5), 0.1), SE)
    cands = rng.random((50, 2))
    spec = AcquisitionSpec("ucb")
    assert select_batch(post, cands, spec, BatchSpec(1)) == [select_next(post, cands, spec)]


def test_batch_larger_than_pool_rejected():
    post = gp_fit(GpDataset.empty(1), SE)
    with pytest.raises(InputError):
        select_batch(post, np.zeros((2, 1)), AcquisitionSpec(), BatchSpec(3))
