import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from laminar_persuasion import (audit_mechanism, construct_mechanism, ic_report, instances, solve_opt,
                                solve_public, validate_laminar)


def test_public_private_knots():
    n = 3
    bL, bR = instances.public_private_knots(n)
    assert bL.size == bR.size == 4 * n + 1
    assert bL[2 * n] == 0.25 and bR[2 * n] == 0.75
    assert np.all(np.diff(bL) > 0) and np.all(np.diff(bR) > 0)
    assert bL[-1] == pytest.approx(0.375) and bR[0] == pytest.approx(0.625)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_public_private_menu_is_consistent(n):
    pb = instances.public_private(n)
    menu = instances.public_private_menu(n)
    for t, atoms in enumerate(menu):
        ps = np.array([p for p, _ in atoms])
        ms = np.array([m for _, m in atoms])
        assert ps.sum() == pytest.approx(1.0) and ps @ ms == pytest.approx(0.5, abs=1e-15)
        # every atom lands on a chord that pays the designer 1 for this type
        for m in ms:
            assert pb.v2[t, pb.profiles[t].best_action(m)] == 1.0
        var = ps @ (ms - 0.5) ** 2
        assert var == pytest.approx((9 * n + 1) / (128 * n), abs=1e-15)


def test_public_private_rejects_small_n():
    with pytest.raises(Exception):
        instances.public_private(1)


def test_random_problem_shapes():
    rng = np.random.default_rng(0)
    pb = instances.random_problem(rng, n_types=3, n_actions=4, nonnegative=True)
    assert pb.u1.shape == (3, 4) and np.all(pb.v1 == 0) and np.all(pb.v2 >= 0)
    assert pb.weights.sum() == pytest.approx(1.0) and pb.weights.min() > 0


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_pipeline_on_random_instances(seed, nonneg):
    pb = instances.random_problem(np.random.default_rng(seed), nonnegative=nonneg)
    opt = solve_opt(pb)
    noic = solve_opt(pb, ic=False)
    pub = solve_public(pb)
    assert noic.objective >= opt.objective - 1e-7
    assert opt.objective >= pub.objective - 1e-7
    if nonneg:
        assert pub.objective >= opt.objective / pb.n_types - 1e-6
    assert ic_report(pb, opt).ic_ok
    mech = construct_mechanism(opt)
    audit = audit_mechanism(pb, mech, opt)
    assert audit.passed, (audit.max_dp, audit.max_dz, audit.laminar.details)
    assert validate_laminar(mech).passed
