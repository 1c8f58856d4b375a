"""Independent checks of solutions and mechanisms.

Nothing here reuses the cutting-plane machinery: induced distributions come
from exact quadrature over the partition elements, incentive payoffs from the
raw utility tables, the Monte Carlo replay from a seeded PCG64 stream, and the
oracle from a discretized linear program solved by HiGHS.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import instances
from .errors import ConstructionError, DomainError
from .laminar import LaminarReport, Mechanism, construct_mechanism, validate_laminar
from .model import Problem
from .reduced_form import (MASS_FLOOR, MenuSolution, SolverConfig, majorization_sweep, posterior_atoms,
                           solution_from_atoms, solve_opt, solve_public)


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    rows: list
    max_dp: float
    max_dz: float
    payoff_quadrature: float
    objective: float
    laminar: LaminarReport
    tol: float

    @property
    def payoff_gap(self) -> float:
        return abs(self.payoff_quadrature - self.objective)

    @property
    def passed(self) -> bool:
        return (self.max_dp <= self.tol and self.max_dz <= self.tol
                and self.payoff_gap <= self.tol * 10 and self.laminar.passed)

    def to_dict(self) -> dict:
        return {"max_dp": self.max_dp, "max_dz": self.max_dz, "payoff_quadrature": self.payoff_quadrature,
                "objective": self.objective, "passed": self.passed, "laminar": self.laminar.checks,
                "rows": self.rows}


def audit_mechanism(problem: Problem, mechanism: Mechanism, solution: MenuSolution,
                    tol: float = 1e-8) -> AuditReport:
    """Compare each message's quadrature ``(probability, mass-weighted mean)`` with the solution.

    Raises :class:`ConstructionError` if the mechanism's messages do not
    correspond one-to-one to the solution's atoms.
    """
    dist = problem.distribution
    if len(mechanism.messages) != solution.n_menus:
        raise ConstructionError("mechanism and solution have different numbers of menus")
    rows, max_dp, max_dz, payoff = [], 0.0, 0.0, 0.0
    for t, tb in enumerate(solution.tables):
        expected = {a.cell: a for a in posterior_atoms(solution, t, MASS_FLOOR)}
        got = {m.cell: m for m in mechanism.messages[t]}
        if set(expected) != set(got):
            raise ConstructionError(
                f"menu {t}: message cells {sorted(got)} differ from solution atoms {sorted(expected)}")
        for cell in sorted(expected):
            atom, msg = expected[cell], got[cell]
            prob, mm = dist.interval_stats(msg.intervals)
            dp, dz = abs(prob - atom.p), abs(mm - atom.z)
            max_dp, max_dz = max(max_dp, dp), max(max_dz, dz)
            payoff += tb.weight * (tb.dv1[cell] * mm + tb.dv2[cell] * prob)
            rows.append({"menu": t, "cell": cell, "p_solution": atom.p, "p_quadrature": prob,
                         "z_solution": atom.z, "z_quadrature": mm})
    return AuditReport(rows, max_dp, max_dz, float(payoff), solution.objective,
                       validate_laminar(mechanism), tol)


# ---------------------------------------------------------------------------
# incentive compatibility


@dataclass
class ICReport:
    """``U[t][s]``: type ``t``'s expected utility from the signal meant for ``s``."""

    U: np.ndarray
    tol: float
    participation: np.ndarray | None = None

    @property
    def truthful(self) -> np.ndarray:
        return np.diag(self.U).copy()

    @property
    def best_deviation(self) -> np.ndarray:
        n = self.U.shape[0]
        if n == 1:
            return np.full(1, -np.inf)
        off = self.U + np.diag(np.full(n, -np.inf))
        return off.max(axis=1)

    @property
    def binding(self) -> np.ndarray:
        return np.abs(self.U - self.truthful[:, None]) <= self.tol

    @property
    def participation_slack(self) -> np.ndarray | None:
        if self.participation is None:
            return None
        return self.truthful - self.participation

    @property
    def ic_ok(self) -> bool:
        return bool(np.all(self.truthful >= self.best_deviation - self.tol))

    @property
    def spread(self) -> float:
        """Largest gap between any report's value and the truthful value."""
        return float(np.max(np.abs(self.U - self.truthful[:, None])))

    def to_dict(self) -> dict:
        return {"U": self.U.tolist(), "truthful": self.truthful.tolist(),
                "best_deviation": [float(x) for x in self.best_deviation],
                "binding": self.binding.tolist(), "ic_ok": self.ic_ok}


def ic_report(problem: Problem, solution: MenuSolution, tol: float = 1e-7) -> ICReport:
    """Receiver values of every (true type, report) pair from the raw utility tables."""
    if solution.mode == "public":
        raise DomainError("ic_report needs a private menu")
    n = problem.n_types
    U = np.zeros((n, n))
    for t in range(n):
        for s in range(n):
            vals = np.multiply.outer(solution.z[s], problem.u1[t]) + np.multiply.outer(solution.p[s], problem.u2[t])
            U[t, s] = vals.max(axis=1).sum()
    return ICReport(U, tol, None if problem.participation is None else problem.participation.copy())


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MonteCarloReport:
    seed: int
    samples: int
    generator: str
    rows: list
    unrouted: int
    payoff: float
    payoff_se: float
    objective: float
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.flags and self.unrouted == 0

    def to_dict(self) -> dict:
        return {"seed": self.seed, "samples": self.samples, "generator": self.generator, "rows": self.rows,
                "unrouted": self.unrouted, "payoff": self.payoff, "payoff_se": self.payoff_se,
                "objective": self.objective, "flags": self.flags, "passed": self.passed}


def _reward_per_state(problem: Problem, mechanism: Mechanism, t: int, msg_ids: np.ndarray,
                      states: np.ndarray) -> np.ndarray:
    g = problem.weights
    out = np.zeros(states.size)
    for i, msg in enumerate(mechanism.messages[t]):
        sel = msg_ids == i
        if mechanism.public:
            for tt, prof in enumerate(problem.profiles):
                a = prof.best_action(msg.mean)
                out[sel] += g[tt] * (problem.v1[tt, a] * states[sel] + problem.v2[tt, a])
        else:
            a = msg.action
            out[sel] = g[t] * (problem.v1[t, a] * states[sel] + problem.v2[t, a])
    return out


def monte_carlo_audit(problem: Problem, mechanism: Mechanism, samples: int, seed: int = 0,
                      objective: float | None = None, z_sigma: float = 4.0) -> MonteCarloReport:
    """Replay the mechanism on sampled states and compare with the designed atoms.

    States are drawn as ``quantile(u)`` with ``u`` from ``numpy``'s PCG64
    (128-bit state) seeded with ``seed``.  Message frequencies and means more
    than ``z_sigma`` standard errors from ``(p, z / p)`` are flagged.
    """
    if samples < 1:
        raise DomainError("samples must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    states = np.asarray(problem.distribution.quantile(rng.random(samples)), dtype=float).reshape(-1)
    rows, flags, unrouted = [], [], 0
    contrib = np.zeros(samples)
    for t, msgs in enumerate(mechanism.messages):
        ids = mechanism.route(t, states)
        unrouted += int(np.sum(ids < 0))
        for i, msg in enumerate(msgs):
            sel = ids == i
            cnt = int(sel.sum())
            freq = cnt / samples
            se_p = np.sqrt(max(msg.p * (1 - msg.p), 1e-300) / samples)
            row = {"menu": t, "cell": msg.cell, "p": msg.p, "freq": freq, "se_p": float(se_p)}
            if abs(freq - msg.p) > z_sigma * se_p + 1e-12:
                flags.append(f"menu {t} cell {msg.cell}: frequency {freq:.6f} vs {msg.p:.6f}")
            if cnt > 1:
                emp = float(states[sel].mean())
                se_m = float(states[sel].std(ddof=1) / np.sqrt(cnt))
                row.update(mean=msg.mean, emp_mean=emp, se_mean=se_m)
                if abs(emp - msg.mean) > z_sigma * se_m + 1e-12:
                    flags.append(f"menu {t} cell {msg.cell}: mean {emp:.6f} vs {msg.mean:.6f}")
            rows.append(row)
        contrib += _reward_per_state(problem, mechanism, t, ids, states)
    payoff = float(contrib.mean())
    payoff_se = float(contrib.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    if objective is not None and abs(payoff - objective) > z_sigma * payoff_se + 1e-12:
        flags.append(f"payoff {payoff:.6f} vs objective {objective:.6f}")
    return MonteCarloReport(int(seed), int(samples), "PCG64", rows, unrouted, payoff, payoff_se,
                            float("nan") if objective is None else float(objective), flags)


# ---------------------------------------------------------------------------
# discretized oracle


@dataclass
class OracleResult:
    objective: float
    bins: int
    table: list
    status: str


def oracle_discrete(problem: Problem, bins: int, ic: bool = True) -> OracleResult:
    """Exact optimum of the instance with the prior collapsed onto ``bins`` equal-probability cells.

    Variables ``x[t, c, k]`` send cell ``c`` to recommendation ``k`` of type
    ``t``; obedience keeps each recommendation's pooled mean inside its
    action cell, and incentive constraints use the same ``y``
    linearization as the main program.  Any discretized mechanism is a
    garbling of one on the continuous prior, so the value rises towards the
    true optimum as ``bins`` grows.
    """
    profs = problem.profiles
    if bins < max(pr.size for pr in profs):
        raise DomainError("bins must be at least the number of actions")
    dist = problem.distribution
    edges = np.linspace(0.0, 1.0, bins + 1)
    mass = np.diff(edges)
    means = dist.quantile_integral(edges[:-1], edges[1:]) / mass
    n = problem.n_types
    off = [0]
    for pr in profs:
        off.append(off[-1] + bins * pr.size)
    nx = off[-1]
    yoff = {}
    ny = 0
    if ic and n > 1:
        for t in range(n):
            for s in range(n):
                yoff[(t, s)] = nx + ny
                ny += profs[s].size
    nv = nx + ny
    cells = np.arange(bins)

    def xcols(t, k):
        return off[t] + cells * profs[t].size + k

    c = np.zeros(nv)
    eq_r, eq_c, eq_v = [], [], []
    for t, pr in enumerate(profs):
        for k in range(pr.size):
            cols = xcols(t, k)
            c[cols] = -problem.weights[t] * (pr.v1[k] * means + pr.v2[k])
            eq_r.append(t * bins + cells)
            eq_c.append(cols)
            eq_v.append(np.ones(bins))
    A_eq = sparse.csr_matrix((np.concatenate(eq_v), (np.concatenate(eq_r), np.concatenate(eq_c))),
                             shape=(n * bins, nv))
    b_eq = np.tile(mass, n)
    ub_rows, ub_b = [], []

    def add(cols_vals, rhs):
        cols = np.concatenate([cv[0] for cv in cols_vals])
        vals = np.concatenate([cv[1] for cv in cols_vals])
        ub_rows.append((cols, vals))
        ub_b.append(rhs)

    for t, pr in enumerate(profs):
        for k in range(pr.size):
            cols = xcols(t, k)
            add([(cols, pr.cutoffs[k] - means)], 0.0)
            add([(cols, means - pr.cutoffs[k + 1])], 0.0)
    truth = {}
    for t, pr in enumerate(profs):
        truth[t] = [(xcols(t, k), -(pr.slopes[k] * means + pr.intercepts[k])) for k in range(pr.size)]
    if ic and n > 1:
        for t in range(n):
            for s in range(n):
                for k2 in range(profs[s].size):
                    ycol = np.array([yoff[(t, s)] + k2])
                    for a in range(problem.n_actions):
                        add([(xcols(s, k2), problem.u1[t, a] * means + problem.u2[t, a]),
                             (ycol, np.array([-1.0]))], 0.0)
                ycols = yoff[(t, s)] + np.arange(profs[s].size)
                add([(ycols, np.ones(ycols.size))] + truth[t], 0.0)
    if problem.participation is not None:
        for t, bound in enumerate(problem.participation):
            if not np.isnan(bound):
                add(truth[t], -bound)
    rr = np.concatenate([np.full(cols.size, i) for i, (cols, _) in enumerate(ub_rows)])
    cc = np.concatenate([cols for cols, _ in ub_rows])
    vv = np.concatenate([vals for _, vals in ub_rows])
    A_ub = sparse.csr_matrix((vv, (rr, cc)), shape=(len(ub_rows), nv))
    bounds = [(0, None)] * nx + [(None, None)] * ny
    res = linprog(c, A_ub=A_ub, b_ub=np.array(ub_b), A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed ({res.message}); the discretized builder is inconsistent")
    x = res.x
    table = []
    for t, pr in enumerate(profs):
        rows = []
        for k in range(pr.size):
            xs = x[xcols(t, k)]
            pk = float(xs.sum())
            if pk > 1e-12:
                rows.append({"cell": k, "action": pr.actions[k], "p": pk, "mean": float(xs @ means / pk)})
        table.append(rows)
    return OracleResult(float(-res.fun), bins, table, "optimal")


# ---------------------------------------------------------------------------
# paper instances


@dataclass
class Check:
    name: str
    value: float
    target: float
    tol: float
    passed: bool
    note: str = ""


@dataclass
class ExampleReport:
    name: str
    checks: list
    seconds: float
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        lines = [f"{'check':48s} {'value':>14s} {'target':>14s} {'tol':>9s}  result"]
        for c in self.checks:
            lines.append(f"{c.name:48s} {c.value:14.8g} {c.target:14.8g} {c.tol:9.2g}  "
                         f"{'PASS' if c.passed else 'FAIL'}{'  ' + c.note if c.note else ''}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"name": self.name, "seconds": self.seconds, "passed": self.passed,
                "checks": [{"name": c.name, "value": c.value, "target": c.target, "tol": c.tol,
                            "passed": c.passed, "note": c.note} for c in self.checks]}


def _within(name, value, target, tol, note="") -> Check:
    return Check(name, float(value), float(target), float(tol), bool(abs(value - target) <= tol), note)


def _above(name, value, bound, note="") -> Check:
    return Check(name, float(value), float(bound), 0.0, bool(value > bound), note)


def _region(mech: Mechanism, t: int, action: int) -> list[tuple[float, float]]:
    ivs = sorted(iv for m in mech.messages[t] if m.action == action for iv in m.intervals if iv[1] > iv[0])
    merged: list[list[float]] = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1] + 1e-12:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(x) for x in merged]


def _buyer_report(config: SolverConfig, bins: int, samples: int, seed: int) -> ExampleReport:
    t0 = time.perf_counter()
    pb = instances.buyer()
    sol = solve_opt(pb, config)
    pub = solve_public(pb, config)
    mech = construct_mechanism(sol)
    audit = audit_mechanism(pb, mech, sol)
    icr = ic_report(pb, sol, tol=1e-6)
    orc = oracle_discrete(pb, bins)
    low, mid, high = 0, 1, 2
    checks = [_within(f"objective vs oracle ({bins} bins)", sol.objective, orc.objective, 1e-2)]
    two = _region(mech, high, 2)
    t_high = two[0][0] if len(two) == 1 and abs(two[0][1] - 1.0) < 1e-12 else float("nan")
    checks.append(_within("high type two-unit threshold", t_high, 0.06, 0.02,
                          f"region {[(round(a, 4), round(b, 4)) for a, b in two]}"))
    zero = _region(mech, low, 0)
    p_all, z_all = pb.distribution.interval_stats(zero)
    cut = [(max(a, t_high), b) for a, b in zero if b > t_high]
    p_cut, z_cut = pb.distribution.interval_stats(cut)
    checks.append(_within("low zero-unit set above high threshold: mean", z_cut / p_cut, 0.43, 0.02,
                          f"set {[(round(a, 4), round(b, 4)) for a, b in cut]}; "
                          f"whole element mean {z_all / p_all:.4f}"))
    grid = np.linspace(0.80, 0.82, 23)[1:-1]
    acts = {}
    for t in (low, mid, high):
        ids = mech.route(t, grid)
        acts[t] = {mech.messages[t][i].action for i in ids}
    checks.append(Check("states in (0.80, 0.82): low/mid/high units", float(acts == {0: {2}, 1: {1}, 2: {2}}),
                        1.0, 0.0, acts == {low: {2}, mid: {1}, high: {2}},
                        f"low {sorted(acts[low])} mid {sorted(acts[mid])} high {sorted(acts[high])}"))
    U, d = icr.U, icr.truthful
    checks.append(_within("medium type: max |U - truthful|", np.abs(U[mid] - d[mid]).max(), 0.0, 1e-6))
    checks.append(_within("high type: max |U - truthful|", np.abs(U[high] - d[high]).max(), 0.0, 1e-6))
    checks.append(_within("low type: |U(low->medium) - truthful|", abs(U[low, mid] - d[low]), 0.0, 1e-6))
    checks.append(_above("low type: truthful - U(low->high)", d[low] - U[low, high], 1e-4))
    checks.append(_above("private - public objective", sol.objective - pub.objective, 1e-3))
    checks.append(_within("audit max |dp|, |dz|", max(audit.max_dp, audit.max_dz), 0.0, 1e-8))
    checks.append(Check("laminar validation", float(audit.laminar.passed), 1.0, 0.0, audit.laminar.passed))
    if samples:
        mc = monte_carlo_audit(pb, mech, samples, seed, objective=sol.objective)
        checks.append(Check(f"Monte Carlo 4-sigma screen (seed {seed})", float(len(mc.flags)), 0.0, 0.0, mc.passed))
    secs = time.perf_counter() - t0
    checks.append(Check("runtime seconds", secs, 30.0, 0.0, secs < 30.0))
    return ExampleReport("buyer", checks, secs, {"solution": sol, "public": pub, "mechanism": mech,
                                                  "audit": audit, "ic": icr, "oracle": orc})


def _public_private_report(n: int, config: SolverConfig) -> ExampleReport:
    t0 = time.perf_counter()
    pb = instances.public_private(n)
    menu = solution_from_atoms(pb, instances.public_private_menu(n), config)
    icr = ic_report(pb, menu, tol=1e-9)
    target_var = (9 * n + 1) / (128 * n)
    variances = [float(sum(p * (m - 0.5) ** 2 for p, m in atoms)) for atoms in instances.public_private_menu(n)]
    pub = solve_public(pb, config)
    mech = construct_mechanism(menu)
    audit = audit_mechanism(pb, mech, menu)
    checks = [
        _within("explicit menu: report spread", icr.spread, 0.0, 1e-9),
        _within("explicit menu: max |variance - (9n+1)/(128n)|",
                max(abs(v - target_var) for v in variances), 0.0, 1e-9),
        _within("explicit menu: max |truthful - (1/4 + variance)|",
                float(np.max(np.abs(icr.truthful - (0.25 + target_var)))), 0.0, 1e-9),
        _within("explicit menu: designer payoff", menu.objective, 1.0, 1e-9),
        _within("public optimum", pub.objective, 1.0 / n, 1e-6),
        _within("explicit menu: audit max |dp|, |dz|", max(audit.max_dp, audit.max_dz), 0.0, 1e-8),
        Check("explicit menu: laminar validation", float(audit.laminar.passed), 1.0, 0.0, audit.laminar.passed),
    ]
    secs = time.perf_counter() - t0
    checks.append(Check("runtime seconds", secs, 10.0, 0.0, secs < 10.0))
    return ExampleReport(f"public_private(n={n})", checks, secs,
                         {"menu": menu, "public": pub, "mechanism": mech, "audit": audit, "ic": icr})


def reproduce_example(name: str, n: int = 3, *, config: SolverConfig | None = None, bins: int = 2000,
                      samples: int = 200_000, seed: int = 0) -> ExampleReport:
    """Rebuild a worked example, run the full pipeline and evaluate its checks.

    ``name`` is ``"buyer"`` or ``"public_private"`` (the latter uses ``n``).
    """
    config = config or SolverConfig()
    if name == "buyer":
        return _buyer_report(config, bins, samples, seed)
    if name == "public_private":
        if n < 2:
            raise DomainError("public_private needs n >= 2")
        return _public_private_report(n, config)
    raise DomainError(f"unknown example {name!r}; expected 'buyer' or 'public_private'")


def sweep_report(solution: MenuSolution) -> float:
    """Worst majorization excess over all menus (exact breakpoints plus a grid)."""
    return max(majorization_sweep(solution, t) for t in range(solution.n_menus))
