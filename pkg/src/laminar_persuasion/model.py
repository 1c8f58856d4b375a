"""Persuasion problem instances and per-type step profiles.

A receiver of type ``theta`` facing posterior mean ``m`` picks the action
maximizing ``u1[theta, a] * m + u2[theta, a]``.  Over the state support the
upper envelope of these lines is convex and piecewise affine; its pieces cut
the support into ordered cells ``[b_{k-1}, b_k]`` on which one action is
optimal.  :func:`derive_step_profile` computes that structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .dist import StateDistribution
from .errors import DomainError

WEIGHT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Problem:
    """Quasi-linear persuasion instance with finitely many types and actions.

    Coefficient tables are indexed ``[type, action]``.  ``participation`` holds
    per-type lower bounds on truthful expected utility; ``nan`` means none.
    """

    distribution: StateDistribution
    weights: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray
    v1: np.ndarray | None = None
    participation: np.ndarray | None = None
    type_labels: tuple[str, ...] | None = None
    action_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w = _frozen(self.weights)
        u1, u2, v2 = _frozen(self.u1), _frozen(self.u2), _frozen(self.v2)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a non-empty vector")
        n = w.size
        if u1.ndim != 2 or u1.shape[0] != n:
            raise DomainError(f"u1 must have shape ({n}, K)")
        K = u1.shape[1]
        v1 = _frozen(np.zeros((n, K)) if self.v1 is None else self.v1)
        for name, arr in (("u2", u2), ("v1", v1), ("v2", v2)):
            if arr.shape != (n, K):
                raise DomainError(f"{name} must have shape ({n}, {K}), got {arr.shape}")
        for name, arr in (("u1", u1), ("u2", u2), ("v1", v1), ("v2", v2)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
        if np.any(w <= 0):
            raise DomainError("type weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise DomainError(f"type weights must sum to 1, got {w.sum()!r}")
        part = None
        if self.participation is not None:
            part = _frozen([np.nan if x is None else x for x in self.participation])
            if part.shape != (n,):
                raise DomainError(f"participation must have length {n}")
        tl = tuple(self.type_labels) if self.type_labels is not None else tuple(str(i) for i in range(n))
        al = tuple(self.action_labels) if self.action_labels is not None else tuple(str(a) for a in range(K))
        if len(tl) != n or len(al) != K:
            raise DomainError("label counts do not match coefficient tables")
        for name, val in (("weights", w), ("u1", u1), ("u2", u2), ("v1", v1), ("v2", v2),
                          ("participation", part), ("type_labels", tl), ("action_labels", al)):
            object.__setattr__(self, name, val)

    @property
    def n_types(self) -> int:
        return self.weights.size

    @property
    def n_actions(self) -> int:
        return self.u1.shape[1]

    @cached_property
    def profiles(self) -> tuple["StepProfile", ...]:
        return tuple(derive_step_profile(self, i) for i in range(self.n_types))

    def with_designer(self, v1, v2) -> "Problem":
        return Problem(self.distribution, self.weights, self.u1, self.u2, v2, v1,
                       self.participation, self.type_labels, self.action_labels)

    def receiver_utility(self, type_index: int, m):
        """Indirect utility ``max_a u1 m + u2`` of a type; vectorized over ``m``."""
        m = np.asarray(m, dtype=float)
        vals = np.multiply.outer(m, self.u1[type_index]) + self.u2[type_index]
        out = vals.max(axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class StepProfile:
    """Cell structure of one type's indirect utility.

    ``actions[k]`` is the raw action index optimal on the cell
    ``[cutoffs[k], cutoffs[k+1]]``.  Cells of zero width are kept only for
    actions that are optimal at a single kink point and pay the designer more
    there than both neighbours.  ``owner[k]`` (for interior cutoffs
    ``k = 1..K-1``) is the cell that keeps the boundary point under the
    designer-favouring tie-break.
    """

    type_index: int
    actions: tuple[int, ...]
    cutoffs: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    owner: tuple[int, ...]
    collapsed: tuple[int, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def lower(self) -> np.ndarray:
        return self.cutoffs[:-1]

    @property
    def upper(self) -> np.ndarray:
        return self.cutoffs[1:]

    @property
    def anchors(self) -> np.ndarray:
        """``h = u2 + u1 * b`` with ``b`` the right cutoff of each cell."""
        return self.intercepts + self.slopes * self.upper

    def indirect_utility(self, m):
        m = np.asarray(m, dtype=float)
        out = (np.multiply.outer(m, self.slopes) + self.intercepts).max(axis=-1)
        return float(out) if out.ndim == 0 else out

    def designer_reward(self, k: int, m):
        return self.v1[k] * m + self.v2[k]

    def cell_of(self, m: float) -> int:
        """Ordered cell index whose action the receiver takes at ``m``."""
        b = self.cutoffs
        m = min(max(m, b[0]), b[-1])
        tol = _tie_tol(m)
        candidates = [j for j in range(self.size) if b[j] - tol <= m <= b[j + 1] + tol]
        # on a cutoff the designer's preferred cell wins; equal rewards go right
        return max(candidates, key=lambda j: (self.designer_reward(j, m), j))

    def best_action(self, m: float) -> int:
        """Raw action index chosen at ``m`` with designer-favouring tie-break."""
        return self.actions[self.cell_of(m)]


def _tie_tol(m: float) -> float:
    return 1e-12 * max(1.0, abs(m))


def derive_step_profile(problem: Problem, type_index: int) -> StepProfile:
    """Upper envelope of one type's affine utilities over the state support.

    Decisions use exact rational arithmetic on the float coefficients, so
    coincident lines and triple intersections are detected exactly.
    """
    lo = Fraction(problem.distribution.lo)
    hi = Fraction(problem.distribution.hi)
    K = problem.n_actions
    s = [Fraction(float(x)) for x in problem.u1[type_index]]
    c = [Fraction(float(x)) for x in problem.u2[type_index]]
    v1 = problem.v1[type_index]
    v2 = problem.v2[type_index]
    mid = (float(lo) + float(hi)) / 2.0

    # identical receiver lines: keep the designer's favourite
    keep = []
    for a in range(K):
        twin = next((b for b in keep if s[b] == s[a] and c[b] == c[a]), None)
        if twin is None:
            keep.append(a)
        elif v1[a] * mid + v2[a] > v1[twin] * mid + v2[twin]:
            keep[keep.index(twin)] = a

    def val(a, x):
        return s[a] * x + c[a]

    # walk the envelope left to right
    top = max(val(a, lo) for a in keep)
    at_lo = [a for a in keep if val(a, lo) == top]
    cur = max(at_lo, key=lambda a: s[a])
    pieces = [cur]
    cuts = [lo]
    x = lo
    while True:
        best_x, nxt = None, []
        for a in keep:
            if s[a] <= s[cur]:
                continue
            xi = (c[cur] - c[a]) / (s[a] - s[cur])
            if xi < x:
                continue
            if best_x is None or xi < best_x:
                best_x, nxt = xi, [a]
            elif xi == best_x:
                nxt.append(a)
        if best_x is None or best_x >= hi:
            break
        # lines through the same kink: the steepest continues the envelope
        steep = max(nxt, key=lambda a: s[a])
        cuts.append(best_x)
        pieces.append(steep)
        cur = steep
        x = best_x
    cuts.append(hi)

    # actions optimal only at a single point (a kink or a support end)
    cells: list[tuple[int, Fraction, Fraction]] = [(a, cuts[i], cuts[i + 1]) for i, a in enumerate(pieces)]
    point_cells = []
    for a in keep:
        if a in pieces:
            continue
        for pt in cuts:
            if val(a, pt) == max(val(b, pt) for b in pieces):
                point_cells.append((a, pt))
    if point_cells:
        merged = []
        for a, l, r in cells:
            merged.append((a, l, r))
        for a, pt in point_cells:
            ptf = float(pt)
            neigh = [b for b, l, r in cells if l <= pt <= r]
            rb = v1[a] * ptf + v2[a]
            if all(rb > v1[b] * ptf + v2[b] for b in neigh):
                merged.append((a, pt, pt))
        cells = sorted(merged, key=lambda t: (t[1], t[2], s[t[0]]))

    actions = tuple(a for a, _, _ in cells)
    cutoffs = np.array([float(cells[0][1])] + [float(r) for _, _, r in cells])
    slopes = np.array([float(s[a]) for a in actions])
    intercepts = np.array([float(c[a]) for a in actions])
    dv1 = np.array([v1[a] for a in actions], dtype=float)
    dv2 = np.array([v2[a] for a in actions], dtype=float)
    owner = []
    for k in range(1, len(actions)):
        b = cutoffs[k]
        left, right = k - 1, k
        owner.append(right if dv1[right] * b + dv2[right] >= dv1[left] * b + dv2[left] else left)
    collapsed = tuple(a for a in range(K) if a not in actions)
    for arr in (cutoffs, slopes, intercepts, dv1, dv2):
        arr.setflags(write=False)
    return StepProfile(type_index, actions, cutoffs, slopes, intercepts, dv1, dv2, tuple(owner), collapsed)
