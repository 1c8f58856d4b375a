"""The finite-dimensional program over recommendation atoms.

For every type the receiver's step profile splits posterior means into
ordered cells.  A recommendation mechanism sends one message per cell, so a
menu is described by the probability ``p`` of each message and its
mass-weighted mean ``z = p * m``.  Feasibility is a majorization condition in
quantile space: for every suffix of cells,

    sum_{k >= l} z_k  <=  Phi(sum_{k >= l} p_k),   Phi(q) = int_{1-q}^1 F^{-1},

with equality for the full sum.  Incentive compatibility is linearized with
auxiliaries ``y`` bounding each deviation payoff from above.

``Phi`` is concave, so its hypograph is cut out exactly by tangent lines.
:func:`solve_opt` runs Kelley's method: solve the LP with the tangents found
so far, add the tangent at each violated suffix, warm start, repeat.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConstructionError, ConvergenceError, InfeasibleError
from .model import Problem, StepProfile, _tie_tol
from .simplex import BACKEND, LinearProgram, LPError

# atoms lighter than this are treated as absent
MASS_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits of the cutting-plane solver.

    ``cut_tol`` and ``eps_bind`` are scaled by ``1 + max|state|`` and
    ``1 + |mean|`` respectively; ``eps_bind=None`` selects ``1e-7``.
    """

    grid: int = 32
    cut_tol: float = 1e-11
    max_rounds: int = 400
    lp_tol: float = 1e-9
    eps_bind: float | None = None
    refine: bool = True
    ic_slack: float = 1e-9

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("grid must be at least 2")
        for name in ("cut_tol", "lp_tol", "ic_slack"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_bind is not None and not self.eps_bind > 0:
            raise ValueError("eps_bind must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")

    def bind_tol(self, problem: Problem) -> float:
        base = 1e-7 if self.eps_bind is None else self.eps_bind
        return base * (1.0 + abs(problem.distribution.mean))

    def cut_scale(self, problem: Problem) -> float:
        d = problem.distribution
        return self.cut_tol * (1.0 + max(abs(d.lo), abs(d.hi)))

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class CellTable:
    """Ordered cells of one (possibly aggregated) type as the program sees them.

    ``lower``/``upper`` bound each cell's posterior mean; ``dv1``/``dv2`` is
    the designer's affine reward in the cell; ``rs``/``rc`` the receiver's
    affine utility (absent for the public aggregate).  ``actions[k]`` is the
    raw action index, or a per-type tuple for the public aggregate.
    """

    lower: np.ndarray
    upper: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray
    actions: tuple
    rs: np.ndarray | None = None
    rc: np.ndarray | None = None
    weight: float = 1.0

    @property
    def size(self) -> int:
        return self.lower.size

    def reward(self, k: int, m: float) -> float:
        return float(self.dv1[k] * m + self.dv2[k])

    def cell_of(self, m: float) -> int:
        tol = _tie_tol(m)
        cand = [k for k in range(self.size) if self.lower[k] - tol <= m <= self.upper[k] + tol]
        if not cand:
            cand = [int(np.argmin(np.minimum(abs(self.lower - m), abs(self.upper - m))))]
        return max(cand, key=lambda k: (self.reward(k, m), k))

    def receiver_value(self, p: np.ndarray, z: np.ndarray) -> float:
        """Truthful expected utility: each atom valued on its own cell's line."""
        return float(self.rs @ z + self.rc @ p)

    @classmethod
    def from_profile(cls, prof: StepProfile, weight: float) -> "CellTable":
        return cls(prof.lower.copy(), prof.upper.copy(), prof.v1.copy(), prof.v2.copy(),
                   tuple(prof.actions), prof.slopes.copy(), prof.intercepts.copy(), float(weight))


def public_table(problem: Problem) -> CellTable:
    """Single aggregate type for public signals.

    Cutoff grids of all types are merged; on each merged cell the reward is
    ``sum_theta g(theta) (v1 m + v2)`` of each type's best action there.
    Merged boundary points whose tie-broken reward beats both neighbouring
    cells become zero-width cells of their own.
    """
    profs = problem.profiles
    g = problem.weights
    d = problem.distribution
    pts = np.unique(np.concatenate([pr.cutoffs for pr in profs]))
    keep = [pts[0]]
    for x in pts[1:]:
        if x - keep[-1] > _tie_tol(x):
            keep.append(x)
    pts = np.array(keep)
    pts[0], pts[-1] = d.lo, d.hi

    def interior_cell(pr: StepProfile, lo: float, hi: float) -> int:
        mid = 0.5 * (lo + hi)
        for k in range(pr.size):
            if pr.cutoffs[k] < mid < pr.cutoffs[k + 1]:
                return k
        return pr.cell_of(mid)

    spans = []
    for i in range(pts.size - 1):
        ks = [interior_cell(pr, pts[i], pts[i + 1]) for pr in profs]
        V1 = sum(g[t] * profs[t].v1[k] for t, k in enumerate(ks))
        V2 = sum(g[t] * profs[t].v2[k] for t, k in enumerate(ks))
        spans.append((pts[i], pts[i + 1], V1, V2, tuple(profs[t].actions[k] for t, k in enumerate(ks))))
    cells = list(spans)
    for i, x in enumerate(pts):
        ks = [pr.cell_of(x) for pr in profs]
        R = sum(g[t] * (profs[t].v1[k] * x + profs[t].v2[k]) for t, k in enumerate(ks))
        neigh = []
        if i > 0:
            neigh.append(spans[i - 1][2] * x + spans[i - 1][3])
        if i < len(spans):
            neigh.append(spans[i][2] * x + spans[i][3])
        if all(R > r + 1e-12 * (1.0 + abs(r)) for r in neigh):
            V1 = sum(g[t] * profs[t].v1[k] for t, k in enumerate(ks))
            V2 = sum(g[t] * profs[t].v2[k] for t, k in enumerate(ks))
            cells.append((x, x, V1, V2, tuple(profs[t].actions[k] for t, k in enumerate(ks))))
    cells.sort(key=lambda c: (c[0], c[1]))
    arr = np.array([c[:4] for c in cells], dtype=float)
    return CellTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], tuple(c[4] for c in cells))


@dataclass(frozen=True, eq=False)
class MenuSolution:
    """Optimal (or audited) menu in reduced form.

    ``p[t][k]`` and ``z[t][k]`` refer to cell ``k`` of ``tables[t]``;
    ``y[(t, s)]`` holds, for each cell of reported type ``s``, the largest
    payoff type ``t`` can extract from that message.
    """

    problem: Problem
    tables: tuple[CellTable, ...]
    p: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...]
    y: dict
    objective: float
    mode: str
    config: SolverConfig
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_menus(self) -> int:
        return len(self.tables)

    def means(self, t: int) -> np.ndarray:
        p, z = self.p[t], self.z[t]
        return np.where(p > 0, z / np.where(p > 0, p, 1.0), np.nan)

    def designer_value(self) -> float:
        return float(sum(tb.weight * (tb.dv1 @ z + tb.dv2 @ p)
                         for tb, p, z in zip(self.tables, self.p, self.z)))

    def to_dict(self) -> dict:
        atoms = []
        for t in range(self.n_menus):
            atoms.append([{"action": _label(self, t, a.cell), "cell": a.cell, "p": a.p, "mean": a.mean}
                          for a in posterior_atoms(self, t, MASS_FLOOR)])
        return {"mode": self.mode, "objective": self.objective, "atoms": atoms,
                "diagnostics": {k: v for k, v in self.diagnostics.items() if _jsonable(v)}}


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, list, type(None)))


def _label(sol: MenuSolution, t: int, k: int):
    a = sol.tables[t].actions[k]
    labels = sol.problem.action_labels
    if isinstance(a, tuple):
        return [labels[x] for x in a]
    return labels[a]


# ---------------------------------------------------------------------------
# LP assembly


class _Layout:
    """Column indices of ``p``, ``w = z - lower * p`` and shifted ``y``."""

    def __init__(self, tables: Sequence[CellTable], ic: bool):
        self.tables = tables
        col = 0
        self.p, self.w = [], []
        for tb in tables:
            self.p.append(np.arange(col, col + tb.size))
            col += tb.size
            self.w.append(np.arange(col, col + tb.size))
            col += tb.size
        self.y = {}
        if ic:
            for t in range(len(tables)):
                for s in range(len(tables)):
                    self.y[(t, s)] = np.arange(col, col + tables[s].size)
                    col += tables[s].size
        self.n = col

    def z_row(self, t: int, cells, coef_z, coef_p=None) -> np.ndarray:
        """Row of ``sum coef_z z_k + coef_p p_k`` over the given cells."""
        row = np.zeros(self.n)
        tb = self.tables[t]
        cells = np.asarray(cells, dtype=int)
        cz = np.broadcast_to(np.asarray(coef_z, dtype=float), cells.shape)
        cp = np.zeros(cells.shape) if coef_p is None else np.broadcast_to(np.asarray(coef_p, dtype=float), cells.shape)
        row[self.p[t][cells]] += cz * tb.lower[cells] + cp
        row[self.w[t][cells]] += cz
        return row


def _tangent(dist, q0: float) -> tuple[float, float]:
    """Slope and intercept of the tangent to ``Phi`` at ``q0``."""
    s = dist.tail_slope(q0)
    return float(s), float(dist.tail_quantile_integral(q0) - s * q0)


def _envelope_min(tb: CellTable) -> float:
    pts = np.concatenate([tb.lower, tb.upper])
    return float(np.min(np.max(np.multiply.outer(pts, tb.rs) + tb.rc, axis=1)))


def _build(problem: Problem, tables, ic: bool, config: SolverConfig, participation: bool):
    dist = problem.distribution
    lay = _Layout(tables, ic)
    c = np.zeros(lay.n)
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for t, tb in enumerate(tables):
        K = tb.size
        cells = np.arange(K)
        c += tb.weight * lay.z_row(t, cells, tb.dv1, tb.dv2)
        row = np.zeros(lay.n)
        row[lay.p[t]] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
        A_eq.append(lay.z_row(t, cells, 1.0))
        b_eq.append(dist.mean)
        for k in range(K):
            row = np.zeros(lay.n)
            row[lay.w[t][k]] = 1.0
            row[lay.p[t][k]] = -(tb.upper[k] - tb.lower[k])
            A_ub.append(row)
            b_ub.append(0.0)
        grid = np.linspace(0.0, 1.0, config.grid + 1)
        tangents = [_tangent(dist, q) for q in grid]
        for ell in range(1, K):
            suf = cells[ell:]
            for s, icpt in tangents:
                A_ub.append(lay.z_row(t, suf, 1.0, -s))
                b_ub.append(icpt)
    shifts = {}
    if ic:
        for t, tb in enumerate(tables):
            umin = _envelope_min(tb)
            shifts[t] = umin
            for s_, ts in enumerate(tables):
                ycols = lay.y[(t, s_)]
                for k2 in range(ts.size):
                    for j in range(tb.size):
                        row = lay.z_row(s_, [k2], tb.rs[j], tb.rc[j] - umin)
                        row[ycols[k2]] -= 1.0
                        A_ub.append(row)
                        b_ub.append(0.0)
                row = -lay.z_row(t, np.arange(tb.size), tb.rs, tb.rc)
                row[ycols] += 1.0
                A_ub.append(row)
                b_ub.append(-umin)
    if participation and problem.participation is not None:
        for t, tb in enumerate(tables):
            bound = problem.participation[t]
            if np.isnan(bound):
                continue
            A_ub.append(-lay.z_row(t, np.arange(tb.size), tb.rs, tb.rc))
            b_ub.append(-bound)
    lp = LinearProgram(c, np.array(A_ub), np.array(b_ub), np.array(A_eq), np.array(b_eq),
                       tol=config.lp_tol)
    return lp, lay, shifts


def _majorization_gaps(dist, p: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Suffix sums ``P_l`` and residuals ``Z_l - Phi(P_l)`` for ``l = 1..K-1``."""
    P = np.cumsum(p[::-1])[::-1][1:]
    Z = np.cumsum(z[::-1])[::-1][1:]
    return P, Z - dist.tail_quantile_integral(np.clip(P, 0.0, 1.0))


def full_disclosure_value(problem: Problem, t: int) -> float:
    """``int u_bar(omega, theta) dF``: the most a type can get from any signal."""
    prof = problem.profiles[t]
    d = problem.distribution
    total = 0.0
    for k in range(prof.size):
        lo, hi = prof.cutoffs[k], prof.cutoffs[k + 1]
        if hi > lo:
            prob, mm = d.interval_stats([(lo, hi)])
            total += prof.slopes[k] * mm + prof.intercepts[k] * prob
    return float(total)


def _check_participation(problem: Problem) -> None:
    if problem.participation is None:
        return
    for t, bound in enumerate(problem.participation):
        if np.isnan(bound):
            continue
        best = full_disclosure_value(problem, t)
        if bound > best + 1e-9 * (1.0 + abs(best)):
            raise InfeasibleError(
                f"participation bound {float(bound)!r} of type {problem.type_labels[t]!r} exceeds its "
                f"full-disclosure value {float(best)!r}", type_index=t, constraint="participation")


def _solve(problem: Problem, tables, ic: bool, config: SolverConfig, mode: str,
           participation: bool = True) -> MenuSolution:
    t0 = time.perf_counter()
    dist = problem.distribution
    if participation:
        _check_participation(problem)
    lp, lay, shifts = _build(problem, tables, ic, config, participation)
    tol = config.cut_scale(problem)
    try:
        res = lp.solve()
    except LPError as exc:
        raise InfeasibleError(f"program is {exc.status}: {exc}", constraint=exc.status) from exc
    rounds, n_cuts, worst = 0, 0, np.inf
    incumbent = None
    for rounds in range(1, config.max_rounds + 1):
        rows, rhs = [], []
        worst = 0.0
        for t, tb in enumerate(tables):
            p = res.x[lay.p[t]]
            z = tb.lower * p + res.x[lay.w[t]]
            P, gap = _majorization_gaps(dist, p, z)
            for i, (q, v) in enumerate(zip(P, gap)):
                worst = max(worst, float(v))
                if v > tol:
                    # the tangent at the current suffix mass is the deepest cut
                    s, icpt = _tangent(dist, float(np.clip(q, 0.0, 1.0)))
                    rows.append(lay.z_row(t, np.arange(i + 1, tb.size), 1.0, -s))
                    rhs.append(icpt)
        incumbent = res
        if not rows:
            break
        n_cuts += len(rows)
        try:
            res = lp.add_rows(np.array(rows), np.array(rhs))
        except LPError as exc:
            raise InfeasibleError(f"program is {exc.status} after cuts: {exc}", constraint=exc.status) from exc
    else:
        sol = _assemble(problem, tables, lay, incumbent.x, ic, config, mode, {})
        raise ConvergenceError(
            f"majorization residual {worst:.3e} above {tol:.1e} after {config.max_rounds} rounds",
            incumbent=sol)
    diag = {"rounds": rounds, "cuts": n_cuts, "pivots": lp.pivots, "lp_objective": res.objective,
            "max_violation": max(worst, res.max_violation), "backend": BACKEND,
            "seconds": time.perf_counter() - t0}
    return _assemble(problem, tables, lay, res.x, ic, config, mode, diag)


def tighten_y(tables, p, z) -> dict:
    """Smallest feasible ``y``: each entry is the best deviation payoff."""
    y = {}
    for t, tb in enumerate(tables):
        if tb.rs is None:
            continue
        for s, ts in enumerate(tables):
            vals = np.multiply.outer(z[s], tb.rs) + np.multiply.outer(p[s], tb.rc)
            y[(t, s)] = vals.max(axis=1)
    return y


def _cleanup(tables, p, z):
    """Drop dust atoms and move atoms sitting on a cutoff into the owning cell."""
    p = [np.where(pi > MASS_FLOOR, pi, 0.0) for pi in p]
    z = [np.where(pi > 0, zi, 0.0) for pi, zi in zip(p, z)]
    for t, tb in enumerate(tables):
        z[t] = np.clip(z[t], tb.lower * p[t], tb.upper * p[t])
        for k in range(tb.size):
            if p[t][k] <= 0:
                continue
            m = z[t][k] / p[t][k]
            owner = tb.cell_of(m)
            if owner != k:
                p[t][owner] += p[t][k]
                z[t][owner] += z[t][k]
                p[t][k] = z[t][k] = 0.0
    return p, z


def _assemble(problem, tables, lay, x, ic, config, mode, diag) -> MenuSolution:
    p = [np.maximum(x[lay.p[t]], 0.0) for t in range(len(tables))]
    z = [tb.lower * p[t] + np.maximum(x[lay.w[t]], 0.0) for t, tb in enumerate(tables)]
    p, z = _cleanup(tables, p, z)
    y = tighten_y(tables, p, z) if ic else {}
    sol = MenuSolution(problem, tuple(tables), tuple(p), tuple(z), y, 0.0, mode, config, dict(diag))
    return replace(sol, objective=sol.designer_value())


# ---------------------------------------------------------------------------
# public entry points


def private_tables(problem: Problem) -> tuple[CellTable, ...]:
    return tuple(CellTable.from_profile(pr, problem.weights[t]) for t, pr in enumerate(problem.profiles))


def solve_opt(problem: Problem, config: SolverConfig | None = None, *, ic: bool = True) -> MenuSolution:
    """Designer-optimal menu of recommendation signals.

    With ``ic=False`` the incentive constraints are dropped, giving the
    relaxation in which each type's signal is chosen as if types were public.
    Participation bounds are enforced in both cases.  When
    ``config.refine`` is set the result is moved to a vertex of the per-block
    support LP (see :func:`refine_vertex`).

    Raises
    ------
    InfeasibleError
        A participation bound exceeds what full disclosure gives that type.
    ConvergenceError
        The cut loop hit ``max_rounds``; ``incumbent`` holds the last iterate.
    """
    config = config or SolverConfig()
    tables = private_tables(problem)
    use_ic = ic and problem.n_types > 1
    sol = _solve(problem, tables, use_ic, config, "opt" if ic else "no_ic")
    if ic and problem.n_types == 1:
        sol = replace(sol, y=tighten_y(sol.tables, sol.p, sol.z))
    if config.refine:
        sol = refine_vertex(sol)
    return sol


def solve_public(problem: Problem, config: SolverConfig | None = None) -> MenuSolution:
    """Best single signal shown to every type (no incentive constraints)."""
    config = config or SolverConfig()
    sol = _solve(problem, (public_table(problem),), False, config, "public", participation=False)
    if config.refine:
        sol = refine_vertex(sol)
    return sol


def solution_from_atoms(problem: Problem, atoms: Sequence[Sequence[tuple[float, float]]],
                        config: SolverConfig | None = None, mode: str = "given") -> MenuSolution:
    """Wrap an explicit menu, given as ``(p, mean)`` atoms per type.

    Each atom is assigned to the cell whose action the type takes at its mean.
    """
    tables = private_tables(problem)
    p = [np.zeros(tb.size) for tb in tables]
    z = [np.zeros(tb.size) for tb in tables]
    for t, tb in enumerate(tables):
        for prob, mean in atoms[t]:
            k = tb.cell_of(float(mean))
            p[t][k] += prob
            z[t][k] += prob * mean
    y = tighten_y(tables, p, z)
    sol = MenuSolution(problem, tables, tuple(p), tuple(z), y, 0.0, mode, config or SolverConfig())
    return replace(sol, objective=sol.designer_value())


@dataclass(frozen=True)
class Atom:
    cell: int
    action: object
    p: float
    mean: float

    @property
    def z(self) -> float:
        return self.p * self.mean


def posterior_atoms(solution: MenuSolution, t: int, threshold: float | None = None) -> list[Atom]:
    """Messages of one menu in increasing order of posterior mean.

    Atoms lighter than ``threshold`` (default: the binding tolerance) are
    dropped; atoms whose means agree within ``1e-9`` are merged into the cell
    that owns the common mean.
    """
    if threshold is None:
        threshold = solution.config.bind_tol(solution.problem)
    tb = solution.tables[t]
    p, z = solution.p[t], solution.z[t]
    out: list[list] = []
    for k in range(tb.size):
        if p[k] <= threshold:
            continue
        m = z[k] / p[k]
        if out and abs(m - out[-1][3] / out[-1][2]) <= 1e-9:
            out[-1][2] += p[k]
            out[-1][3] += z[k]
            out[-1][0] = tb.cell_of(out[-1][3] / out[-1][2])
        else:
            out.append([k, None, p[k], z[k]])
    return [Atom(k, tb.actions[k], float(pp), float(zz / pp)) for k, _, pp, zz in out]


@dataclass(frozen=True)
class Block:
    """Consecutive cells whose suffix constraints are slack in the interior."""

    cells: tuple[int, ...]
    q0: float
    q1: float

    @property
    def mass(self) -> float:
        return self.q1 - self.q0


def binding_groups(solution: MenuSolution, t: int, eps: float | None = None,
                   threshold: float = MASS_FLOOR) -> list[Block]:
    """Split a menu's atoms where the majorization constraint binds.

    ``q0, q1`` are quantile endpoints: a block occupies the quantile range
    left over by the blocks above it.  Raises :class:`ConstructionError` if
    some suffix constraint is violated by more than ``eps``.
    """
    if eps is None:
        eps = solution.config.bind_tol(solution.problem)
    dist = solution.problem.distribution
    p, z = solution.p[t], solution.z[t]
    cells = [k for k in range(p.size) if p[k] > threshold]
    if not cells:
        raise ConstructionError(f"menu {t} has no atoms")
    pa, za = p[cells], z[cells]
    P, gap = _majorization_gaps(dist, pa, za)
    if gap.size and gap.max() > eps:
        i = int(np.argmax(gap))
        raise ConstructionError(
            f"menu {t}: suffix constraint at atom {i + 1} violated by {gap[i]:.3e} (tolerance {eps:.1e})")
    blocks, start = [], 0
    for i in range(gap.size):
        if abs(gap[i]) <= eps:
            blocks.append((start, i + 1))
            start = i + 1
    blocks.append((start, len(cells)))
    out = []
    for a, b in blocks:
        q1 = 1.0 if b == len(cells) else 1.0 - float(P[b - 1])
        q0 = 0.0 if a == 0 else 1.0 - float(P[a - 1])
        out.append(Block(tuple(cells[a:b]), max(q0, 0.0), min(q1, 1.0)))
    return [blk for blk in out if blk.q1 > blk.q0]


def majorization_sweep(solution: MenuSolution, t: int, grid: int = 1000) -> float:
    """Largest excess of the menu's tail integral over ``Phi``.

    The tail integral of a discrete distribution is piecewise linear in the
    tail mass, so the breakpoints are where the excess peaks; the uniform grid
    is checked as well.
    """
    dist = solution.problem.distribution
    p, z = solution.p[t], solution.z[t]
    m = solution.means(t)
    order = [k for k in range(p.size) if p[k] > 0]
    order.sort(key=lambda k: m[k])
    pa, za = p[order], z[order]
    P = np.concatenate([[0.0], np.cumsum(pa[::-1])])
    Z = np.concatenate([[0.0], np.cumsum(za[::-1])])
    worst = float(np.max(Z - dist.tail_quantile_integral(np.clip(P, 0, 1))))
    qs = np.linspace(0.0, 1.0, grid + 1)
    G = np.interp(qs, np.clip(P, 0, 1), Z)
    worst = max(worst, float(np.max(G - dist.tail_quantile_integral(qs))))
    # the full sum must match the prior mean exactly
    return max(worst, abs(float(za.sum()) - dist.mean))


# ---------------------------------------------------------------------------
# vertex refinement


def _receiver_line_values(problem: Problem, t: int, means: np.ndarray) -> np.ndarray:
    return np.max(np.multiply.outer(means, problem.u1[t]) + problem.u2[t], axis=1)


def refine_vertex(solution: MenuSolution) -> MenuSolution:
    """Move every block to a vertex of its support LP.

    Within a block the atom means are frozen and the probabilities re-chosen
    to maximize the block's reward, subject to the block's exact mass and
    mean, interior majorization (by cuts), the type's truthful value not
    falling and no other type's deviation value rising.  A basic solution
    uses at most ``n + 2`` atoms between consecutive binding constraints.
    Blocks whose LP fails keep their atoms; the reason is recorded in
    ``diagnostics["refine"]``.
    """
    problem, config = solution.problem, solution.config
    dist = problem.distribution
    ic = solution.mode in ("opt", "given") and solution.tables[0].rs is not None and problem.n_types > 1
    tables = solution.tables
    p = [pi.copy() for pi in solution.p]
    z = [zi.copy() for zi in solution.z]
    tol = config.cut_scale(problem) * 0.1
    notes = []
    for t, tb in enumerate(tables):
        try:
            blocks = binding_groups(replace(solution, p=tuple(p), z=tuple(z)), t)
        except ConstructionError as exc:
            notes.append(f"menu {t}: {exc}")
            continue
        for blk in blocks:
            cells = np.array(blk.cells)
            m = z[t][cells] / p[t][cells]
            x0 = p[t][cells]
            rows, rhs = [], []
            own = tb.rs[cells] * m + tb.rc[cells] if tb.rs is not None else None
            if ic or (problem.participation is not None and tb.rs is not None):
                rows.append(-own)
                rhs.append(-(own @ x0) + config.ic_slack)
            if ic:
                for s in range(problem.n_types):
                    if s != t:
                        dev = _receiver_line_values(problem, s, m)
                        rows.append(dev)
                        rhs.append(dev @ x0 + config.ic_slack)
            P_after = 1.0 - blk.q1
            Z_after = float(dist.tail_quantile_integral(P_after))
            suffix_q = P_after + np.cumsum(x0[::-1])[::-1]
            for ell in range(1, cells.size):
                for q in np.unique(np.concatenate([[suffix_q[ell]], np.linspace(P_after, P_after + blk.mass, 9)])):
                    s_, icpt = _tangent(dist, float(np.clip(q, 0, 1)))
                    row = np.zeros(cells.size)
                    row[ell:] = m[ell:] - s_
                    rows.append(row)
                    rhs.append(icpt + s_ * P_after - Z_after)
            A_eq = np.vstack([np.ones(cells.size), m])
            b_eq = np.array([blk.mass, float(dist.quantile_integral(blk.q0, blk.q1))])
            obj = tb.dv1[cells] * m + tb.dv2[cells]
            lp = LinearProgram(obj, np.array(rows).reshape(-1, cells.size), np.array(rhs), A_eq, b_eq,
                               tol=config.lp_tol)
            try:
                res = lp.solve()
                for _ in range(config.max_rounds):
                    xs = res.x
                    Q = P_after + np.cumsum(xs[::-1])[::-1]
                    Zs = Z_after + np.cumsum((m * xs)[::-1])[::-1]
                    add_r, add_b = [], []
                    for ell in range(1, cells.size):
                        q = float(np.clip(Q[ell], 0, 1))
                        if Zs[ell] - dist.tail_quantile_integral(q) > tol:
                            s_, icpt = _tangent(dist, q)
                            row = np.zeros(cells.size)
                            row[ell:] = m[ell:] - s_
                            add_r.append(row)
                            add_b.append(icpt + s_ * P_after - Z_after)
                    if not add_r:
                        break
                    res = lp.add_rows(np.array(add_r), np.array(add_b))
                else:
                    raise LPError("iteration_limit", "refinement cuts did not converge")
            except LPError as exc:
                notes.append(f"menu {t} block {blk.cells}: kept ({exc.status})")
                continue
            x = np.where(res.x > MASS_FLOOR, res.x, 0.0)
            p[t][cells] = x
            z[t][cells] = x * m
    p, z = _cleanup(tables, p, z)
    y = tighten_y(tables, p, z) if solution.y else {}
    diag = dict(solution.diagnostics)
    diag["refine"] = notes
    diag["pre_refine_objective"] = solution.objective
    out = replace(solution, p=tuple(p), z=tuple(z), y=y, diagnostics=diag)
    return replace(out, objective=out.designer_value())
