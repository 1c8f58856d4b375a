import dataclasses

import numpy as np
import pytest

from laminar_persuasion import (DomainError, audit_mechanism, construct_mechanism, ic_report, instances,
                                monte_carlo_audit, oracle_discrete, reproduce_example, solution_from_atoms,
                                solve_opt, solve_public)
from laminar_persuasion.verify import sweep_report

# HiGHS values of the discretized buyer example (frozen from an independent run)
BUYER_ORACLE = {1000: 1.256805957124873, 2000: 1.2568060585245435}


@pytest.fixture(scope="module")
def buyer():
    pb = instances.buyer()
    sol = solve_opt(pb)
    return pb, sol, construct_mechanism(sol)


def test_oracle_threshold_exact():
    for bins in (10, 100):
        res = oracle_discrete(instances.threshold(), bins)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.5, abs=1e-9)


def test_oracle_buyer_monotone(buyer):
    pb, sol, _ = buyer
    vals = {b: oracle_discrete(pb, b).objective for b in BUYER_ORACLE}
    for b, v in BUYER_ORACLE.items():
        assert vals[b] == pytest.approx(v, abs=1e-8)
    assert vals[1000] <= vals[2000] <= sol.objective + 1e-9


def test_oracle_rejects_too_few_bins():
    with pytest.raises(DomainError):
        oracle_discrete(instances.buyer(), 2)


def test_ic_report_buyer(buyer):
    pb, sol, _ = buyer
    rep = ic_report(pb, sol)
    assert rep.ic_ok
    assert rep.U.shape == (3, 3)
    # the medium and high types are indifferent between all reports
    assert np.all(rep.binding[1:])
    assert rep.truthful[0] - rep.U[0, 2] > 1e-4


def test_ic_report_explicit_menu():
    for n in (2, 4):
        pb = instances.public_private(n)
        sol = solution_from_atoms(pb, instances.public_private_menu(n))
        rep = ic_report(pb, sol)
        assert rep.spread <= 1e-12
        var = (9 * n + 1) / (128 * n)
        np.testing.assert_allclose(rep.truthful, 0.25 + var, atol=1e-12)


def test_ic_report_rejects_public():
    pb = instances.buyer()
    with pytest.raises(DomainError):
        ic_report(pb, solve_public(pb))


def test_monte_carlo_deterministic_and_passing(buyer):
    pb, sol, mech = buyer
    a = monte_carlo_audit(pb, mech, 20000, seed=7, objective=sol.objective)
    b = monte_carlo_audit(pb, mech, 20000, seed=7, objective=sol.objective)
    assert a.to_dict() == b.to_dict()
    assert a.passed and a.unrouted == 0 and a.generator == "PCG64"
    c = monte_carlo_audit(pb, mech, 20000, seed=8, objective=sol.objective)
    assert c.payoff != a.payoff


def test_monte_carlo_flags_wrong_claims(buyer):
    pb, sol, mech = buyer
    msgs = list(mech.messages[0])
    m = msgs[0]
    msgs[0] = dataclasses.replace(m, p=m.p + 0.05, z=m.z + 0.05 * m.mean)
    bad = dataclasses.replace(mech, messages=(tuple(msgs),) + mech.messages[1:])
    rep = monte_carlo_audit(pb, bad, 50000, seed=1)
    assert not rep.passed and rep.flags


def test_audit_detects_perturbation(buyer):
    pb, sol, mech = buyer
    msgs = list(mech.messages[1])
    m = msgs[-1]
    lo, hi = m.intervals[-1]
    msgs[-1] = dataclasses.replace(m, intervals=m.intervals[:-1] + ((lo, hi - 1e-3),))
    bad = dataclasses.replace(mech, messages=mech.messages[:1] + (tuple(msgs),) + mech.messages[2:])
    assert not audit_mechanism(pb, bad, sol).passed


def test_sweep(buyer):
    _, sol, _ = buyer
    assert sweep_report(sol) <= 1e-9


def test_reproduce_public_private():
    rep = reproduce_example("public_private", n=2)
    assert rep.passed, rep.table()
    assert "PASS" in rep.table()
    assert rep.to_dict()["passed"]


def test_reproduce_unknown():
    with pytest.raises(DomainError):
        reproduce_example("nope")
    with pytest.raises(DomainError):
        reproduce_example("public_private", n=1)
