import numpy as np
import pytest

from laminar_persuasion import DomainError, Problem, StateDistribution, derive_step_profile
from laminar_persuasion import instances


def make(u1, u2, v2, v1=None, dist=None, weights=None):
    n = len(u1)
    return Problem(dist or StateDistribution.uniform(), weights or [1.0 / n] * n, u1, u2, v2, v1)


def test_threshold_profile():
    pr = derive_step_profile(instances.threshold(0.75), 0)
    assert pr.actions == (0, 1)
    np.testing.assert_allclose(pr.cutoffs, [0.0, 0.75, 1.0])
    # the designer wants "accept", so the cutoff belongs to cell 1
    assert pr.cell_of(0.75) == 1
    assert pr.cell_of(0.7) == 0
    assert pr.indirect_utility(0.9) == pytest.approx(0.15)


def test_dominated_and_clipped_actions():
    # actions 0 and 2 are never optimal on the support
    pb = make([[-1.0, 1.0, 0.5, 2.0]], [[-0.5, 0.0, -0.1, -0.8]], [[0, 0, 0, 0]])
    pr = derive_step_profile(pb, 0)
    assert pr.actions == (1, 3)
    np.testing.assert_allclose(pr.cutoffs, [0.0, 0.8, 1.0])


def test_envelope_ordering_and_cutoffs():
    pb = make([[2.0, 0.0, 1.0]], [[-1.2, 0.0, -0.3]], [[1.0, 0.0, 0.5]])
    pr = derive_step_profile(pb, 0)
    assert pr.actions == (1, 2, 0)
    np.testing.assert_allclose(pr.cutoffs, [0.0, 0.3, 0.9, 1.0])
    m = np.linspace(0, 1, 101)
    np.testing.assert_allclose(pr.indirect_utility(m), pb.receiver_utility(0, m))


def test_identical_lines_keep_designer_favourite():
    pb = make([[1.0, 1.0]], [[0.0, 0.0]], [[0.0, 2.0]])
    pr = derive_step_profile(pb, 0)
    assert pr.actions == (1,)


def test_triple_intersection_point_cell():
    # three lines through (0.5, 0.5); the flat middle action pays the designer most
    pb = make([[0.0, 0.5, 1.0]], [[0.5, 0.25, 0.0]], [[0.0, 1.0, 0.0]])
    pr = derive_step_profile(pb, 0)
    assert pr.actions == (0, 1, 2)
    np.testing.assert_allclose(pr.cutoffs, [0.0, 0.5, 0.5, 1.0])
    assert pr.best_action(0.5) == 1
    # without that preference the kink carries no cell
    pr2 = derive_step_profile(pb.with_designer(np.zeros((1, 3)), [[0.0, 0.0, 1.0]]), 0)
    assert pr2.actions == (0, 2)
    assert pr2.best_action(0.5) == 2


def test_buyer_profiles():
    pb = instances.buyer()
    for t, th in enumerate(instances.BUYER_TYPES):
        pr = pb.profiles[t]
        # cutoff between k-1 and k units: (theta + m) * marginal_k = price
        marg = np.array([4.0, 3.0, 2.0, 1.0])
        expected = instances.BUYER_PRICE / marg - th
        inside = [x for x in expected if 0 < x < 1]
        np.testing.assert_allclose(pr.cutoffs[1:-1], inside, atol=1e-12)


def test_validation():
    with pytest.raises(DomainError):
        make([[1.0, 0.0]], [[0.0]], [[0.0, 0.0]])
    with pytest.raises(DomainError):
        Problem(StateDistribution.uniform(), [0.4, 0.4], [[1, 0], [1, 0]], [[0, 0], [0, 0]], [[0, 0], [0, 0]])
    with pytest.raises(DomainError):
        Problem(StateDistribution.uniform(), [1.0], [[np.nan, 0]], [[0, 0]], [[0, 0]])
    with pytest.raises(DomainError):
        Problem(StateDistribution.uniform(), [1.0], [[1, 0]], [[0, 0]], [[0, 0]], participation=[0.0, 1.0])


def test_problem_is_immutable():
    pb = instances.threshold()
    with pytest.raises(ValueError):
        pb.u1[0, 0] = 3.0
