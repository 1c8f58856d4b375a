import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.optimize import linprog

from laminar_persuasion import simplex
from laminar_persuasion.simplex import INFEASIBLE, UNBOUNDED, LinearProgram, LPError, available_backends

BACKENDS = list(available_backends().items())


def test_compiled_backend_selected():
    assert "python" in available_backends()
    if "compiled" in available_backends():
        assert simplex.BACKEND == "compiled"


def test_pure_python_override():
    code = "from laminar_persuasion.simplex import BACKEND; print(BACKEND)"
    env = {**os.environ, "LAMINAR_PERSUASION_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name,be", BACKENDS)
def test_textbook_lp(name, be):
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    lp = LinearProgram([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18], backend=be)
    r = lp.solve()
    assert r.objective == pytest.approx(36.0)
    np.testing.assert_allclose(r.x, [2, 6], atol=1e-12)


@pytest.mark.parametrize("name,be", BACKENDS)
def test_equalities_and_negative_rhs(name, be):
    # max x - y, x + y = 1, -x <= -0.25, y >= 0.1 written as -y <= -0.1
    lp = LinearProgram([1, -1], [[-1, 0], [0, -1]], [-0.25, -0.1], [[1, 1]], [1], backend=be)
    r = lp.solve()
    np.testing.assert_allclose(r.x, [0.9, 0.1], atol=1e-12)


@pytest.mark.parametrize("name,be", BACKENDS)
def test_infeasible_and_unbounded(name, be):
    with pytest.raises(LPError) as e:
        LinearProgram([1, 1], [[1, 1]], [-1], backend=be).solve()
    assert e.value.status == INFEASIBLE
    with pytest.raises(LPError) as e:
        LinearProgram([1, 0], [[0, 1]], [1], backend=be).solve()
    assert e.value.status == UNBOUNDED


@pytest.mark.parametrize("name,be", BACKENDS)
def test_degenerate_cycling_example(name, be):
    # Beale's example cycles under the textbook rule without anti-cycling
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    r = LinearProgram(c, A, [0, 0, 1], backend=be).solve()
    assert r.objective == pytest.approx(0.05)


@pytest.mark.parametrize("name,be", BACKENDS)
def test_against_highs(name, be):
    rng = np.random.default_rng(7)
    for _ in range(80):
        n, mu, me = rng.integers(2, 12), rng.integers(1, 10), rng.integers(0, 3)
        A = np.vstack([rng.normal(size=(mu, n)), np.ones((1, n))])
        b = np.append(rng.normal(size=mu) + 1, 10.0)
        Ae = rng.normal(size=(me, n))
        be_ = Ae @ rng.random(n)
        c = rng.normal(size=n)
        ref = linprog(-c, A_ub=A, b_ub=b, A_eq=Ae if me else None, b_eq=be_ if me else None, method="highs")
        lp = LinearProgram(c, A, b, Ae, be_, backend=be)
        if ref.status == 2:
            with pytest.raises(LPError):
                lp.solve()
            continue
        r = lp.solve()
        assert r.objective == pytest.approx(-ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        # warm-started cuts agree with a cold solve of the enlarged program
        A2 = np.abs(rng.normal(size=(3, n)))
        b2 = 0.9 * (A2 @ r.x)
        ref2 = linprog(-c, A_ub=np.vstack([A, A2]), b_ub=np.append(b, b2), A_eq=Ae if me else None,
                       b_eq=be_ if me else None, method="highs")
        if ref2.status == 2:
            with pytest.raises(LPError):
                lp.add_rows(A2, b2)
            continue
        r2 = lp.add_rows(A2, b2)
        assert r2.objective == pytest.approx(-ref2.fun, abs=1e-7 * (1 + abs(ref2.fun)))
        assert lp.violation(r2.x) <= 1e-9


def test_backends_agree_on_pivots():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(3)
    A = np.vstack([rng.normal(size=(30, 40)), np.ones((1, 40))])
    b = np.append(rng.uniform(0.5, 1.5, 30), 40.0)
    c = rng.normal(size=40)
    res = {name: LinearProgram(c, A, b, backend=be).solve() for name, be in BACKENDS}
    assert res["python"].objective == pytest.approx(res["compiled"].objective, abs=1e-10)
