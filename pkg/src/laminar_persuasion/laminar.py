"""Laminar partitional signals realizing a reduced-form menu.

A block of atoms occupying the quantile range ``[q0, q1]`` is realized by
peeling atoms off in decreasing order of their means.  The atom with the
largest mean gets the quantile window of its mass whose quantile integral
equals its ``z``; the window is excised and the rest of the block is treated
as a distribution in its own right (the excised mass is removed and the
remaining coordinates renormalized).  Excised windows are kept as a list of
gaps in the original quantile coordinates, so no distribution object is ever
rebuilt.

Later peels may straddle earlier windows, which then nest inside the new
interval.  The message for atom ``k`` is its interval ``J_k`` minus every
interval peeled before it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dist import StateDistribution
from .errors import ConstructionError
from .model import Problem
from .reduced_form import MASS_FLOOR, MenuSolution, _majorization_gaps

BISECT_TOL = 1e-13
MERGE_TOL = 1e-9


@dataclass(frozen=True)
class LaminarFamily:
    """Intervals ``J_k`` of one block, indexed in increasing order of atom mean.

    ``quantile_intervals[k]`` is ``J_k`` in quantile coordinates and
    ``intervals[k]`` its image in state space; ``elements[k]`` lists the
    quantile pieces of ``P_k``.
    """

    q0: float
    q1: float
    quantile_intervals: tuple[tuple[float, float], ...]
    intervals: tuple[tuple[float, float], ...]
    elements: tuple[tuple[tuple[float, float], ...], ...]

    @property
    def size(self) -> int:
        return len(self.intervals)


class _Remaining:
    """A block's quantile range minus excised gaps, with a compressed coordinate."""

    def __init__(self, dist: StateDistribution, q0: float, q1: float):
        self.dist = dist
        self.q0, self.q1 = q0, q1
        self.gaps: list[tuple[float, float]] = []

    def segments(self) -> list[tuple[float, float]]:
        out, cur = [], self.q0
        for a, b in self.gaps:
            if a > cur:
                out.append((cur, a))
            cur = max(cur, b)
        if self.q1 > cur:
            out.append((cur, self.q1))
        return out

    @property
    def mass(self) -> float:
        return sum(b - a for a, b in self.segments())

    def to_quantile(self, r: float, side: str) -> float:
        """Original quantile of compressed coordinate ``r``.

        On a gap boundary ``side="left"`` lands after the gap, ``"right"``
        before it, so that windows never swallow a gap they only touch.
        """
        segs = self.segments()
        acc = 0.0
        for i, (a, b) in enumerate(segs):
            w = b - a
            if r < acc + w or (side == "right" and r <= acc + w) or i == len(segs) - 1:
                return min(max(a + (r - acc), a), b)
            acc += w
        return self.q1

    def window_integral(self, r0: float, length: float) -> float:
        """Quantile integral of the states in the compressed window ``[r0, r0+length]``."""
        total, acc = 0.0, 0.0
        r1 = r0 + length
        for a, b in self.segments():
            w = b - a
            lo, hi = max(r0, acc), min(r1, acc + w)
            if hi > lo:
                total += self.dist.quantile_integral(a + lo - acc, a + hi - acc)
            acc += w
            if acc >= r1:
                break
        return total

    def excise(self, qa: float, qb: float) -> None:
        kept = [(a, b) for a, b in self.gaps if b <= qa or a >= qb]
        kept.append((qa, qb))
        self.gaps = sorted(kept)


def construct_block(dist: StateDistribution, q0: float, q1: float,
                    atoms: Sequence[tuple[float, float]], tol: float = 1e-9) -> LaminarFamily:
    """Laminar family realizing ``atoms`` (``(p, z)`` pairs, means increasing) on ``[q0, q1]``.

    Preconditions are checked to ``tol``: total mass equals ``q1 - q0``,
    total ``z`` equals the block's quantile integral, and each upper suffix
    has ``z`` strictly inside what the block can deliver.  Small excesses
    are clamped; larger ones raise :class:`ConstructionError`.
    """
    if not 0.0 <= q0 < q1 <= 1.0:
        raise ConstructionError(f"block endpoints ({q0}, {q1}) are not an increasing pair in [0, 1]")
    atoms = [(float(p), float(z)) for p, z in atoms]
    if not atoms:
        raise ConstructionError("block has no atoms")
    if any(p <= 0 for p, _ in atoms):
        raise ConstructionError("atom probabilities must be positive")
    means = [z / p for p, z in atoms]
    if any(means[i + 1] <= means[i] for i in range(len(means) - 1)):
        raise ConstructionError("atom means must be strictly increasing")
    mass = sum(p for p, _ in atoms)
    if abs(mass - (q1 - q0)) > tol:
        raise ConstructionError(f"atom mass {mass!r} differs from block mass {q1 - q0!r}")
    target = dist.quantile_integral(q0, q1)
    if abs(sum(z for _, z in atoms) - target) > tol * (1.0 + abs(target)):
        raise ConstructionError("atom z total differs from the block's quantile integral")

    rem = _Remaining(dist, q0, q1)
    n = len(atoms)
    qiv: list[tuple[float, float] | None] = [None] * n
    for k in range(n - 1, 0, -1):
        p, z = atoms[k]
        R = rem.mass
        hi_r = max(R - p, 0.0)
        f_lo = rem.window_integral(0.0, p)
        f_hi = rem.window_integral(hi_r, p)
        if z > f_hi + tol:
            raise ConstructionError(
                f"atom {k}: z={z!r} exceeds the top window integral {f_hi!r} "
                "(suffix majorization inequality fails)")
        if z < f_lo - tol:
            raise ConstructionError(f"atom {k}: z={z!r} below the bottom window integral {f_lo!r}")
        a, b = 0.0, hi_r
        if z >= f_hi:
            a = b
        elif z <= f_lo:
            b = a
        while b - a > BISECT_TOL:
            mid = 0.5 * (a + b)
            if rem.window_integral(mid, p) < z:
                a = mid
            else:
                b = mid
        r0 = 0.5 * (a + b)
        qa = rem.to_quantile(r0, "left")
        qb = rem.to_quantile(r0 + p, "right")
        qiv[k] = (qa, qb)
        rem.excise(qa, qb)
    qiv[0] = (q0, q1)

    elements = []
    for k in range(n):
        a, b = qiv[k]
        inner = sorted(qiv[j] for j in range(k + 1, n) if qiv[j][0] >= a and qiv[j][1] <= b)
        pieces, cur = [], a
        for ia, ib in inner:
            if ia > cur:
                pieces.append((cur, ia))
            cur = max(cur, ib)
        if b > cur:
            pieces.append((cur, b))
        elements.append(tuple(pieces))
    states = tuple((float(dist.quantile(a)), float(dist.quantile(b))) for a, b in qiv)
    return LaminarFamily(q0, q1, tuple(qiv), states, tuple(elements))


@dataclass(frozen=True)
class Message:
    """One message of a type's signal and the state set that triggers it."""

    type_index: int
    cell: int
    action: int
    block: int
    p: float
    z: float
    quantile_pieces: tuple[tuple[float, float], ...]
    intervals: tuple[tuple[float, float], ...]

    @property
    def mean(self) -> float:
        return self.z / self.p


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Per-type laminar partitional signals and the blocks they were built from."""

    problem: Problem
    messages: tuple[tuple[Message, ...], ...]
    families: tuple[tuple[LaminarFamily, ...], ...]
    public: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def n_types(self) -> int:
        return self.problem.n_types

    def route(self, t: int, states) -> np.ndarray:
        """Message index (into ``messages[t]``) of each state; ``-1`` if unrouted."""
        states = np.asarray(states, dtype=float)
        los, his, ids = [], [], []
        for i, msg in enumerate(self.messages[t]):
            for lo, hi in msg.intervals:
                if hi > lo:
                    los.append(lo)
                    his.append(hi)
                    ids.append(i)
        order = np.argsort(los, kind="stable")
        los, his, ids = np.array(los)[order], np.array(his)[order], np.array(ids)[order]
        j = np.searchsorted(los, states, side="right") - 1
        ok = (j >= 0) & (states <= his[np.clip(j, 0, None)])
        return np.where(ok, ids[np.clip(j, 0, None)], -1)

    def to_rows(self) -> list[tuple[str, str, float, float]]:
        rows = []
        labels = self.problem.action_labels
        for t, msgs in enumerate(self.messages):
            tl = "public" if self.public else self.problem.type_labels[t]
            for msg in msgs:
                for lo, hi in msg.intervals:
                    rows.append((tl, labels[msg.action] if not self.public else str(msg.cell), lo, hi))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["type", "message", "interval_lo", "interval_hi"])
        for tl, ml, lo, hi in self.to_rows():
            w.writerow([tl, ml, repr(float(lo)), repr(float(hi))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = []
        for t, msgs in enumerate(self.messages):
            out.append({
                "type": "public" if self.public else self.problem.type_labels[t],
                "messages": [{"cell": m.cell, "action": self.problem.action_labels[m.action] if not self.public else None,
                              "block": m.block, "p": m.p, "z": m.z,
                              "intervals": [list(iv) for iv in m.intervals]} for m in msgs],
            })
        return {"public": self.public, "types": out}


def _split_blocks(dist: StateDistribution, pa: np.ndarray, za: np.ndarray, split_tol: float) -> list[tuple[int, int]]:
    """Blocks of consecutive atoms; split where a suffix constraint is numerically tight."""
    _, gap = _majorization_gaps(dist, pa, za)
    blocks, start = [], 0
    for i in range(gap.size):
        if gap[i] >= -split_tol:
            blocks.append((start, i + 1))
            start = i + 1
    blocks.append((start, pa.size))
    return blocks


def construct_mechanism(solution: MenuSolution, split_tol: float | None = None) -> Mechanism:
    """Laminar partitional signal for every menu of ``solution``.

    Atoms with equal means (within ``1e-9``) are merged first.  Blocks are cut
    wherever a suffix majorization constraint holds with equality up to
    ``split_tol`` (default ``1e-10`` scaled by the support), so each block's
    interior is strictly slack as the peeling step requires.
    """
    problem = solution.problem
    dist = problem.distribution
    if split_tol is None:
        split_tol = 1e-10 * (1.0 + max(abs(dist.lo), abs(dist.hi)))
    all_msgs, all_fams, notes = [], [], []
    for t, tb in enumerate(solution.tables):
        p, z = solution.p[t], solution.z[t]
        cells = [k for k in range(tb.size) if p[k] > MASS_FLOOR]
        if not cells:
            raise ConstructionError(f"menu {t} has no atoms")
        cells.sort(key=lambda k: z[k] / p[k])
        merged: list[list] = []
        for k in cells:
            m = z[k] / p[k]
            if merged and m - merged[-1][2] / merged[-1][1] <= MERGE_TOL:
                merged[-1][1] += p[k]
                merged[-1][2] += z[k]
                merged[-1][0].append(k)
            else:
                merged.append([[k], p[k], z[k]])
        pa = np.array([m[1] for m in merged])
        za = np.array([m[2] for m in merged])
        # tiny rounding in the total mass goes to the largest atom
        pa[np.argmax(pa)] += 1.0 - pa.sum()
        msgs, fams = [], []
        Psuf = np.concatenate([np.cumsum(pa[::-1])[::-1], [0.0]])
        for bi, (a, b) in enumerate(_split_blocks(dist, pa, za, split_tol)):
            q0 = 0.0 if a == 0 else 1.0 - float(Psuf[a])
            q1 = 1.0 if b == pa.size else 1.0 - float(Psuf[b])
            q0, q1 = max(q0, 0.0), min(q1, 1.0)
            bp = pa[a:b] * ((q1 - q0) / pa[a:b].sum())
            fam = construct_block(dist, q0, q1, list(zip(bp, za[a:b])), tol=max(1e-9, 10 * split_tol))
            fams.append(fam)
            for j in range(b - a):
                group = merged[a + j][0]
                mean = za[a + j] / pa[a + j]
                cell = tb.cell_of(mean) if len(group) > 1 else group[0]
                action = tb.actions[cell]
                qp = fam.elements[j]
                iv = tuple((float(dist.quantile(x)), float(dist.quantile(y))) for x, y in qp)
                msgs.append(Message(t, cell, action if not isinstance(action, tuple) else -1,
                                    bi, float(pa[a + j]), float(za[a + j]), qp, iv))
        all_msgs.append(tuple(msgs))
        all_fams.append(tuple(fams))
    return Mechanism(problem, tuple(all_msgs), tuple(all_fams), public=solution.mode == "public",
                     notes=tuple(notes))


@dataclass(frozen=True)
class LaminarReport:
    checks: dict
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _laminar_pairs(hulls: Sequence[tuple[float, float]], tol: float) -> list[tuple[int, int]]:
    bad = []
    for i in range(len(hulls)):
        for j in range(i + 1, len(hulls)):
            a0, a1 = hulls[i]
            b0, b1 = hulls[j]
            overlap = min(a1, b1) - max(a0, b0)
            if overlap <= tol:
                continue
            nested = (a0 >= b0 - tol and a1 <= b1 + tol) or (b0 >= a0 - tol and b1 <= a1 + tol)
            if not nested:
                bad.append((i, j))
    return bad


def laminar_violations(hulls: Sequence[tuple[float, float]], tol: float = 1e-12) -> list[tuple[int, int]]:
    """Pairs of intervals that overlap without nesting (touching counts as disjoint)."""
    return _laminar_pairs(hulls, tol)


def validate_laminar(mechanism: Mechanism, tol: float = 1e-9, max_messages: int | None = None) -> LaminarReport:
    """Structural audit of a mechanism.

    Checks per type: convex hulls of the elements are laminar, elements are
    disjoint and cover the support in probability, each block has at most
    ``n + 2`` messages, and no element has more intervals than its block has
    messages.
    """
    dist = mechanism.problem.distribution
    limit = mechanism.n_types + 2 if max_messages is None else max_messages
    checks = {"laminar": True, "disjoint": True, "coverage": True, "block_size": True, "interval_count": True}
    details: dict = {"laminar": [], "disjoint": [], "coverage": [], "block_size": [], "interval_count": []}
    for t, msgs in enumerate(mechanism.messages):
        hulls = [(min(lo for lo, _ in m.intervals), max(hi for _, hi in m.intervals)) for m in msgs if m.intervals]
        bad = _laminar_pairs(hulls, tol)
        if bad:
            checks["laminar"] = False
            details["laminar"].append((t, bad))
        pieces = sorted((lo, hi) for m in msgs for lo, hi in m.intervals if hi > lo)
        for (a0, a1), (b0, b1) in zip(pieces, pieces[1:]):
            if b0 < a1 - tol:
                checks["disjoint"] = False
                details["disjoint"].append((t, (a0, a1), (b0, b1)))
        prob = sum(dist.cdf(hi) - dist.cdf(lo) for lo, hi in pieces)
        if abs(prob - 1.0) > tol:
            checks["coverage"] = False
            details["coverage"].append((t, prob))
        sizes: dict[int, int] = {}
        for m in msgs:
            sizes[m.block] = sizes.get(m.block, 0) + 1
        for blk, cnt in sizes.items():
            if cnt > limit:
                checks["block_size"] = False
                details["block_size"].append((t, blk, cnt))
        for m in msgs:
            if len(m.intervals) > sizes[m.block]:
                checks["interval_count"] = False
                details["interval_count"].append((t, m.cell, len(m.intervals)))
    return LaminarReport(checks, details)


def mechanism_from_intervals(problem: Problem, rows: Sequence[tuple[int, int, float, float]]) -> Mechanism:
    """Rebuild a mechanism from ``(type, action, lo, hi)`` rows.

    Each message's probability and mean are recomputed from its intervals;
    blocks are unknown, so every message is placed in block 0.
    """
    dist = problem.distribution
    per: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for t, a, lo, hi in rows:
        per.setdefault((int(t), int(a)), []).append((float(lo), float(hi)))
    msgs = []
    for t in range(problem.n_types):
        prof = problem.profiles[t]
        out = []
        for (tt, a), ivs in sorted(per.items()):
            if tt != t:
                continue
            prob, mm = dist.interval_stats(ivs)
            cell = prof.actions.index(a) if a in prof.actions else -1
            qp = tuple((dist.cdf(lo), dist.cdf(hi)) for lo, hi in sorted(ivs))
            out.append(Message(t, cell, a, 0, prob, mm, qp, tuple(sorted(ivs))))
        msgs.append(tuple(out))
    return Mechanism(problem, tuple(msgs), tuple(() for _ in range(problem.n_types)))


def mechanism_to_json(mechanism: Mechanism) -> str:
    return json.dumps(mechanism.to_dict(), sort_keys=True)
