import numpy as np
import pytest

from laminar_persuasion import (ConvergenceError, InfeasibleError, Problem, SolverConfig, StateDistribution,
                                binding_groups, instances, majorization_sweep, posterior_atoms, refine_vertex,
                                solution_from_atoms, solve_opt, solve_public)
from laminar_persuasion.reduced_form import MASS_FLOOR

# HiGHS optimum of the buyer example discretized into 4000 equal-probability bins
BUYER_ORACLE_4000 = 1.2568061091392817
# same, without incentive constraints (closed form 1.46587037037...)
BUYER_NOIC_ORACLE_4000 = 1.4658703666665904
# best public signal: pooled message means derived by hand, 56/45
BUYER_PUBLIC = 56.0 / 45.0


def test_threshold_value():
    sol = solve_opt(instances.threshold())
    assert sol.objective == pytest.approx(0.5, abs=1e-10)
    atoms = posterior_atoms(sol, 0)
    assert [(round(a.p, 12), round(a.mean, 12)) for a in atoms] == [(0.5, 0.25), (0.5, 0.75)]


@pytest.mark.parametrize("cut", [0.3, 0.5, 0.9])
def test_threshold_closed_form(cut):
    # accept with the largest mass whose mean reaches the cutoff: min(1, 2 (1 - cut))
    sol = solve_opt(instances.threshold(cut))
    assert sol.objective == pytest.approx(min(1.0, 2 * (1 - cut)), abs=1e-9)


def test_buyer_objectives():
    pb = instances.buyer()
    opt = solve_opt(pb)
    noic = solve_opt(pb, ic=False)
    pub = solve_public(pb)
    assert opt.mode == "opt" and noic.mode == "no_ic" and pub.mode == "public"
    assert opt.objective == pytest.approx(BUYER_ORACLE_4000, abs=1e-7)
    assert opt.objective >= BUYER_ORACLE_4000 - 1e-12
    assert noic.objective == pytest.approx(BUYER_NOIC_ORACLE_4000, abs=1e-8)
    assert pub.objective == pytest.approx(BUYER_PUBLIC, abs=1e-9)
    assert noic.objective >= opt.objective >= pub.objective


def test_single_type_public_equals_private():
    pb = instances.threshold(0.6)
    assert solve_public(pb).objective == pytest.approx(solve_opt(pb).objective, abs=1e-10)


def test_solution_is_feasible():
    sol = solve_opt(instances.buyer())
    for t in range(sol.n_menus):
        p, z = sol.p[t], sol.z[t]
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert z.sum() == pytest.approx(0.5, abs=1e-12)
        tb = sol.tables[t]
        live = p > MASS_FLOOR
        assert np.all(z[live] >= tb.lower[live] * p[live] - 1e-12)
        assert np.all(z[live] <= tb.upper[live] * p[live] + 1e-12)
        assert majorization_sweep(sol, t) <= 1e-9


def test_binding_groups_cover_quantiles():
    sol = solve_opt(instances.buyer())
    for t in range(sol.n_menus):
        blocks = binding_groups(sol, t)
        # blocks run from the bottom of the quantile range to the top
        assert blocks[0].q0 == pytest.approx(0.0)
        assert blocks[-1].q1 == pytest.approx(1.0)
        for lo, hi in zip(blocks, blocks[1:]):
            assert lo.q1 == pytest.approx(hi.q0)
        for blk in blocks:
            assert len(blk.cells) <= sol.problem.n_types + 2


def test_refine_keeps_objective_and_is_idempotent():
    sol = solve_opt(instances.buyer(), SolverConfig(refine=False))
    ref = refine_vertex(sol)
    assert ref.objective >= sol.objective - 1e-9
    again = refine_vertex(ref)
    assert again.objective == pytest.approx(ref.objective, abs=1e-9)


def test_solution_from_atoms_public_private():
    n = 3
    pb = instances.public_private(n)
    sol = solution_from_atoms(pb, instances.public_private_menu(n))
    assert sol.objective == pytest.approx(1.0, abs=1e-12)


def test_participation_infeasible_names_type():
    base = instances.buyer()
    pb = Problem(base.distribution, base.weights, base.u1, base.u2, base.v2, base.v1,
                 participation=[np.nan, 50.0, np.nan], type_labels=base.type_labels)
    with pytest.raises(InfeasibleError) as e:
        solve_opt(pb)
    assert e.value.type_index == 1
    assert e.value.constraint == "participation"
    assert "theta=0.45" in str(e.value)


def test_participation_binding_lowers_value():
    base = instances.buyer()
    free = solve_opt(base)
    from laminar_persuasion.verify import ic_report
    truthful = ic_report(base, free).truthful
    bound = truthful[0] + 0.05
    pb = Problem(base.distribution, base.weights, base.u1, base.u2, base.v2, base.v1,
                 participation=[bound, np.nan, np.nan])
    sol = solve_opt(pb)
    assert ic_report(pb, sol).truthful[0] >= bound - 1e-8
    assert sol.objective <= free.objective + 1e-9


def test_round_limit_raises_with_incumbent():
    with pytest.raises(ConvergenceError) as e:
        solve_opt(instances.buyer(), SolverConfig(max_rounds=1, grid=2))
    assert e.value.incumbent is not None


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(grid=1)
    with pytest.raises(ValueError):
        SolverConfig(cut_tol=0)
    with pytest.raises(ValueError):
        SolverConfig.from_dict({"nonsense": 1})


def test_piecewise_linear_prior():
    d = StateDistribution.piecewise_linear([[0, 0], [0.4, 0.6], [0.6, 0.6], [1, 1]])
    pb = Problem(d, [1.0], [[0.0, 1.0]], [[0.0, -0.55]], [[0.0, 1.0]])
    sol = solve_opt(pb)
    # pool the top tail down to mean 0.55: mass x from the top with mean 0.55
    qs = np.linspace(0, 1, 200001)
    tail = np.array([d.tail_quantile_integral(q) for q in qs])
    best = qs[tail >= 0.55 * qs - 1e-15].max()
    assert sol.objective == pytest.approx(best, abs=1e-5)
