"""Atomless state distributions with exact quantile-space integrals.

Every distribution is stored as a piecewise-linear CDF over a bounded
support.  On each knot segment the quantile function is affine in the
probability, so quantile integrals are exact quadratics and no quadrature
error leaks into solver tolerances.  The uniform law is the one-segment case.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

PROB_TOL = 1e-12


def _check_prob(q, name="q"):
    arr = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
        raise DomainError(f"{name} must lie in [0, 1], got {q!r}")
    return np.clip(arr, 0.0, 1.0)


class StateDistribution:
    """Continuous, atomless prior over a bounded interval of states.

    Parameters
    ----------
    knots : sequence of (state, cumulative probability) pairs
        States strictly increasing, cumulative values nondecreasing from 0
        to 1.  Flat stretches (zero density) are allowed.
    kind : str
        ``"uniform"`` or ``"pl_cdf"``; only affects serialization.

    Instances are immutable.
    """

    __slots__ = ("_t", "_F", "_C", "kind", "_mean")

    def __init__(self, knots: Sequence[Sequence[float]], kind: str = "pl_cdf"):
        arr = np.asarray(knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise DomainError("knots must be a list of at least two (state, cdf) pairs")
        t, F = arr[:, 0].copy(), arr[:, 1].copy()
        if not np.all(np.isfinite(arr)):
            raise DomainError("knots must be finite")
        if np.any(np.diff(t) <= 0):
            raise DomainError("knot states must be strictly increasing")
        if np.any(np.diff(F) < -PROB_TOL):
            raise DomainError("cumulative probabilities must be nondecreasing")
        if abs(F[0]) > 1e-9 or abs(F[-1] - 1.0) > 1e-9:
            raise DomainError("cumulative probabilities must run from 0 to 1")
        F = np.maximum.accumulate(np.clip(F, 0.0, 1.0))
        F[0], F[-1] = 0.0, 1.0
        # prefix integrals of the quantile function at the knot probabilities
        C = np.concatenate([[0.0], np.cumsum(np.diff(F) * (t[:-1] + t[1:]) / 2.0)])
        for a in (t, F, C):
            a.setflags(write=False)
        self._t, self._F, self._C = t, F, C
        self.kind = kind
        self._mean = float(C[-1])

    # construction -------------------------------------------------------

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "StateDistribution":
        if not hi > lo:
            raise DomainError("uniform support needs lo < hi")
        return cls([[lo, 0.0], [hi, 1.0]], kind="uniform")

    @classmethod
    def piecewise_linear(cls, knots: Sequence[Sequence[float]]) -> "StateDistribution":
        return cls(knots, kind="pl_cdf")

    @classmethod
    def from_dict(cls, data: dict) -> "StateDistribution":
        kind = data.get("kind")
        if kind == "uniform":
            return cls.uniform(float(data.get("lo", 0.0)), float(data.get("hi", 1.0)))
        if kind == "pl_cdf":
            return cls.piecewise_linear(data["knots"])
        raise DomainError(f"unknown distribution kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "lo": self.lo, "hi": self.hi}
        return {"kind": "pl_cdf", "knots": [[float(a), float(b)] for a, b in zip(self._t, self._F)]}

    # basic queries ------------------------------------------------------

    @property
    def lo(self) -> float:
        return float(self._t[0])

    @property
    def hi(self) -> float:
        return float(self._t[-1])

    @property
    def mean(self) -> float:
        return self._mean

    @property
    def knots(self) -> np.ndarray:
        return np.column_stack([self._t, self._F])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self._t, self._F)
        return float(out) if out.ndim == 0 else out

    def quantile(self, q):
        """Left-continuous inverse ``inf{t : F(t) >= q}``; vectorized."""
        qa = _check_prob(q)
        out = self._quantile(qa)
        return float(out) if out.ndim == 0 else out

    def _quantile(self, q: np.ndarray) -> np.ndarray:
        t, F = self._t, self._F
        j = np.searchsorted(F, q, side="left")
        j = np.clip(j, 1, len(F) - 1)
        F0, F1 = F[j - 1], F[j]
        t0, t1 = t[j - 1], t[j]
        width = F1 - F0
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width > 0, (q - F0) / np.where(width > 0, width, 1.0), 0.0)
        out = t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)
        # q == 0 maps to the support's left end
        return np.where(q <= 0.0, t[0], out)

    def _cum_integral(self, q: np.ndarray) -> np.ndarray:
        """``int_0^q F^{-1}(x) dx`` for an array of probabilities."""
        F, C = self._F, self._C
        j = np.searchsorted(F, q, side="left")
        j = np.clip(j, 1, len(F) - 1)
        Qq = self._quantile(q)
        out = C[j - 1] + (q - F[j - 1]) * (self._t[j - 1] + Qq) / 2.0
        return np.where(q <= 0.0, 0.0, out)

    def quantile_integral(self, q0, q1):
        """``int_{q0}^{q1} F^{-1}(x) dx`` (signed when q1 < q0)."""
        a, b = _check_prob(q0, "q0"), _check_prob(q1, "q1")
        out = self._cum_integral(b) - self._cum_integral(a)
        return float(out) if out.ndim == 0 else out

    def tail_quantile_integral(self, q):
        """Concave majorization bound ``int_{1-q}^{1} F^{-1}(x) dx``."""
        qa = _check_prob(q)
        out = self._mean - self._cum_integral(1.0 - qa)
        out = np.where(qa <= 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def tail_slope(self, q):
        """Supergradient of :meth:`tail_quantile_integral` at ``q``."""
        qa = _check_prob(q)
        return self.quantile(1.0 - qa)

    def conditional_mean(self, q0: float, q1: float) -> float:
        """Mean state over the quantile band ``[q0, q1]``."""
        q0 = float(_check_prob(q0, "q0"))
        q1 = float(_check_prob(q1, "q1"))
        if not q1 > q0:
            raise DomainError(f"conditional_mean needs q0 < q1, got ({q0}, {q1})")
        return self.quantile_integral(q0, q1) / (q1 - q0)

    def interval_stats(self, intervals: Iterable[Sequence[float]]) -> tuple[float, float]:
        """Probability and mass-weighted mean ``sum int_a^b t dF(t)`` of a union of intervals.

        Intervals may touch at endpoints but must not overlap.
        """
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        prob = 0.0
        mass_mean = 0.0
        prev_hi = -np.inf
        for a, b in ivs:
            if b < a:
                raise DomainError(f"interval [{a}, {b}] is reversed")
            if a < prev_hi - 1e-12 * max(1.0, abs(a)):
                raise DomainError("intervals overlap")
            prev_hi = max(prev_hi, b)
            qa, qb = self.cdf(a), self.cdf(b)
            prob += qb - qa
            mass_mean += self.quantile_integral(qa, qb)
        return float(prob), float(mass_mean)

    def __repr__(self) -> str:
        if self.kind == "uniform":
            return f"StateDistribution.uniform({self.lo}, {self.hi})"
        return f"StateDistribution.piecewise_linear({len(self._t)} knots on [{self.lo}, {self.hi}])"

    def __eq__(self, other) -> bool:
        if not isinstance(other, StateDistribution):
            return NotImplemented
        return np.array_equal(self._t, other._t) and np.array_equal(self._F, other._F)

    def __hash__(self) -> int:
        return hash((self._t.tobytes(), self._F.tobytes()))
