"""Hard-coded problem instances used by the demos and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .dist import StateDistribution
from .errors import DomainError
from .model import Problem

BUYER_TYPES = (0.3, 0.45, 0.6)
BUYER_PRICE = 10.0 / 3.0
BUYER_MAX_UNITS = 4


def buyer(types=BUYER_TYPES, price: float = BUYER_PRICE, max_units: int = BUYER_MAX_UNITS) -> Problem:
    """Multi-unit buyer with quality state uniform on ``[0, 1]``.

    The ``k``-th unit is worth ``(theta + omega) * max(5 - k, 0)`` and costs
    ``price``; the seller maximizes expected units sold.
    """
    q = np.arange(max_units + 1)
    marginal = np.maximum(5 - q, 0).astype(float)
    marginal[0] = 0.0
    u1_row = np.cumsum(marginal)  # total worth per unit of (theta + omega)
    th = np.asarray(types, dtype=float)
    u1 = np.tile(u1_row, (th.size, 1))
    u2 = np.outer(th, u1_row) - price * q
    v2 = np.tile(q.astype(float), (th.size, 1))
    w = np.full(th.size, 1.0 / th.size)
    return Problem(StateDistribution.uniform(0.0, 1.0), w, u1, u2, v2,
                   type_labels=tuple(f"theta={x:g}" for x in th),
                   action_labels=tuple(f"{k} units" for k in q))


def threshold(cutoff: float = 0.75) -> Problem:
    """One receiver, two actions, switching at ``cutoff``; the designer wants action 2."""
    u1 = np.array([[0.0, 1.0]])
    u2 = np.array([[0.0, -cutoff]])
    v2 = np.array([[0.0, 1.0]])
    return Problem(StateDistribution.uniform(0.0, 1.0), [1.0], u1, u2, v2,
                   type_labels=("receiver",), action_labels=("reject", "accept"))


def public_private_knots(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Knots ``b_{L,k}`` and ``b_{R,k}`` for ``k = -2n..2n``."""
    k = np.arange(-2 * n, 2 * n + 1)
    offs = np.sign(k) * np.sqrt(np.abs(k) / (2.0 * n)) / 8.0
    return 0.25 + offs, 0.75 + offs


def public_private(n: int) -> Problem:
    """Equally likely types sharing the convex interpolant of ``m**2`` on the knots.

    Action ``j`` is the chord between consecutive sorted knots.  Type
    ``theta`` (1-based) rewards the designer with 1 exactly on the chords
    ``[b_{L,2t-1}, b_{L,2t}]``, ``[b_{L,-2t}, b_{L,-2t+1}]``,
    ``[b_{R,2n+1-2t}, b_{R,2n+2-2t}]`` and ``[b_{R,2t-2n-2}, b_{R,2t-2n-1}]``.
    """
    if n < 2:
        raise DomainError("public_private needs n >= 2")
    bL, bR = public_private_knots(n)
    knots = np.concatenate([bL, bR])
    slopes = knots[1:] + knots[:-1]           # chord of m**2
    icpts = -knots[1:] * knots[:-1]
    K = slopes.size
    off = 2 * n                                # index of k = 0 within a side

    def chord(side: str, k_right: int) -> int:
        # chord ending at knot (side, k_right)
        base = 0 if side == "L" else 4 * n + 1
        return base + off + k_right - 1

    v2 = np.zeros((n, K))
    for th in range(1, n + 1):
        for a in (chord("L", 2 * th), chord("L", -2 * th + 1),
                  chord("R", 2 * n + 2 - 2 * th), chord("R", 2 * th - 2 * n - 1)):
            v2[th - 1, a] = 1.0
    u1 = np.tile(slopes, (n, 1))
    u2 = np.tile(icpts, (n, 1))
    return Problem(StateDistribution.uniform(0.0, 1.0), np.full(n, 1.0 / n), u1, u2, v2,
                   type_labels=tuple(f"theta={t}" for t in range(1, n + 1)),
                   action_labels=tuple(f"chord[{knots[j]:.4f},{knots[j + 1]:.4f}]" for j in range(K)))


def public_private_menu(n: int) -> list[list[tuple[float, float]]]:
    """Four equiprobable posterior means per type that pay the designer 1."""
    bL, bR = public_private_knots(n)
    off = 2 * n
    menu = []
    for th in range(1, n + 1):
        pts = (bL[off + 2 * th], bL[off - 2 * th], bR[off + 2 * n + 2 - 2 * th], bR[off + 2 * th - 2 * n - 2])
        menu.append([(0.25, float(m)) for m in sorted(pts)])
    return menu


def random_distribution(rng: np.random.Generator) -> StateDistribution:
    """Uniform on a random interval, or a random piecewise-linear CDF (possibly with flat stretches)."""
    lo = float(rng.uniform(-1.0, 1.0))
    hi = lo + float(rng.uniform(0.5, 2.0))
    if rng.random() < 0.4:
        return StateDistribution.uniform(lo, hi)
    m = int(rng.integers(2, 6))
    t = np.sort(rng.uniform(lo, hi, m))
    t = np.concatenate([[lo], t, [hi]])
    t = np.unique(t)
    w = rng.exponential(1.0, t.size - 1)
    w[rng.random(w.size) < 0.15] = 0.0      # zero-density gaps
    if w.sum() <= 0:
        w[:] = 1.0
    F = np.concatenate([[0.0], np.cumsum(w) / w.sum()])
    F[-1] = 1.0
    return StateDistribution.piecewise_linear(np.column_stack([t, F]))


def random_problem(rng: np.random.Generator, n_types: int | None = None, n_actions: int | None = None,
                   nonnegative: bool = False) -> Problem:
    """Random instance with affine utilities whose envelopes cross inside the support.

    With ``nonnegative=True`` the designer's reward is state-independent and
    nonnegative.
    """
    dist = random_distribution(rng)
    n = int(rng.integers(2, 5)) if n_types is None else n_types
    K = int(rng.integers(2, 6)) if n_actions is None else n_actions
    u1 = np.zeros((n, K))
    u2 = np.zeros((n, K))
    for t in range(n):
        if rng.random() < 0.7:
            # lines crossing at sorted random cutoffs, then shuffled
            cuts = np.sort(rng.uniform(dist.lo, dist.hi, K - 1))
            slopes = np.sort(rng.normal(0.0, 2.0, K))
            icpt = np.zeros(K)
            icpt[0] = rng.normal()
            for k in range(1, K):
                icpt[k] = icpt[k - 1] + (slopes[k - 1] - slopes[k]) * cuts[k - 1]
            perm = rng.permutation(K)
            u1[t], u2[t] = slopes[perm], icpt[perm]
        else:
            u1[t] = rng.normal(0.0, 2.0, K)
            u2[t] = rng.normal(0.0, 1.0, K)
    if nonnegative:
        v1 = np.zeros((n, K))
        v2 = rng.uniform(0.0, 1.0, (n, K))
    else:
        v1 = rng.normal(0.0, 1.0, (n, K))
        v2 = rng.normal(0.0, 1.0, (n, K))
    g = rng.dirichlet(np.full(n, 2.0))
    g = np.maximum(g, 0.02)
    g = g / g.sum()
    return Problem(dist, g, u1, u2, v2, v1)
