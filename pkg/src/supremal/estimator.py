"""Empirical criterion M_n and its smallest/largest minimizers.

The smallest minimizer is ``inf{t : D+M_n(t) >= 0}`` and the largest is
``sup{t : D-M_n(t) <= 0}``.  Quantile losses are solved exactly over the
order statistics; the mean loss uses a left-to-right running sum so that the
sequential and one-shot answers agree bit for bit.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import order_index
from .errors import InvalidParameter, NoSignChange
from .scores import ConvexLoss, ScoreKind, loss_value

_BISECT_REL_TOL = 1e-12


class Sample:
    """Observations with a maintained sorted view."""

    def __init__(self, values: Sequence[float]):
        vals = np.asarray(values, dtype=float).ravel()
        if vals.size < 1:
            raise InvalidParameter("a sample needs at least one observation")
        self.values = vals
        self.sorted_view = np.sort(vals, kind="stable")

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"Sample(n={len(self)})"


def _as_sample(sample) -> Sample:
    return sample if isinstance(sample, Sample) else Sample(sample)


@dataclass(frozen=True)
class ArgminPair:
    smallest: float
    largest: float


def empirical_criterion(sample, loss: ConvexLoss, t: float) -> float:
    """``M_n(t) = n^-1 sum [v(t - X_i) - v(-X_i)]``."""
    x = _as_sample(sample).values
    return float(np.mean(loss_value(loss, t - x) - loss_value(loss, -x)))


def empirical_derivative(sample, loss: ConvexLoss, t: float, side: str = "right") -> float:
    """``D+M_n(t) = n^-1 sum phi(t - X_i)``, or the left version with ``phi(u-)``."""
    s = _as_sample(sample)
    score = loss.score
    if score.kind is ScoreKind.QUANTILE_STEP:
        n = len(s)
        side_rule = "right" if side == "right" else "left"
        count = int(np.searchsorted(s.sorted_view, t, side=side_rule))
        return count / n - score.params["alpha"]
    if side == "right":
        vals = score.value(t - s.values)
    elif side == "left":
        vals = score.left_limit(t - s.values)
    else:
        raise InvalidParameter(f"side must be 'right' or 'left', got {side!r}")
    return float(np.mean(vals))


def _quantile_extremes(sorted_view, alpha) -> ArgminPair:
    n = sorted_view.size
    j = order_index(n, alpha)
    k = j + 1 if (j < n and j / n == alpha) else j
    return ArgminPair(float(sorted_view[j - 1]), float(sorted_view[k - 1]))


def _mean_of(values):
    return float(np.cumsum(values)[-1] / values.size)


def _sign_bracket(dplus, dminus, lo, hi):
    """Widen [lo, hi] until D+M_n(lo) < 0 and D-M_n(hi) > 0."""
    width = max(hi - lo, 1.0)
    for _ in range(60):
        if dplus(lo) < 0.0 and dminus(hi) > 0.0:
            return lo, hi
        lo, hi = lo - width, hi + width
        width *= 2.0
    raise NoSignChange("empirical derivative never changes sign; the score is degenerate")


def _bisect_boundary(pred, lo, hi):
    """pred(lo) False, pred(hi) True; returns (lo, hi) of width <= tol."""
    for _ in range(2000):
        scale = max(1.0, abs(lo), abs(hi))
        if hi - lo <= _BISECT_REL_TOL * scale:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _bisect_extremes(s: Sample, loss, lo=None, hi=None) -> ArgminPair:
    def dplus(t):
        return empirical_derivative(s, loss, t, "right")

    def dminus(t):
        return empirical_derivative(s, loss, t, "left")

    if lo is None:
        lo, hi = float(s.sorted_view[0]) - 1.0, float(s.sorted_view[-1]) + 1.0
    lo, hi = _sign_bracket(dplus, dminus, lo, hi)
    _, smallest = _bisect_boundary(lambda t: dplus(t) >= 0.0, lo, hi)
    largest, _ = _bisect_boundary(lambda t: dminus(t) > 0.0, lo, hi)
    return ArgminPair(smallest, max(largest, smallest))


def argmin_extremes(sample, loss: ConvexLoss) -> ArgminPair:
    """Smallest and largest minimizers of ``M_n``."""
    s = _as_sample(sample)
    kind = loss.score.kind
    if kind is ScoreKind.QUANTILE_STEP:
        return _quantile_extremes(s.sorted_view, loss.score.params["alpha"])
    if kind is ScoreKind.IDENTITY:
        mean = _mean_of(s.values)
        return ArgminPair(mean, mean)
    return _bisect_extremes(s, loss)


def sequential_argmins(stream: Sequence[float], loss: ConvexLoss, start: int = 1) -> np.ndarray:
    """Smallest minimizers of every prefix ``X_1..X_k`` for ``k = start..N``."""
    x = np.asarray(stream, dtype=float).ravel()
    N = x.size
    if not 1 <= start <= N:
        raise InvalidParameter(f"need 1 <= start <= N, got start={start}, N={N}")
    kind = loss.score.kind
    ks = np.arange(start, N + 1)
    if kind is ScoreKind.IDENTITY:
        return np.cumsum(x)[start - 1:] / ks
    if kind is ScoreKind.QUANTILE_STEP:
        alpha = loss.score.params["alpha"]
        ordered = sorted(x[: start - 1].tolist())
        out = np.empty(ks.size)
        for i, k in enumerate(ks):
            bisect.insort(ordered, x[k - 1])
            out[i] = ordered[order_index(k, alpha) - 1]
        return out
    out = np.empty(ks.size)
    prev = None
    for i, k in enumerate(ks):
        s = Sample(x[:k])
        if prev is None:
            pair = _bisect_extremes(s, loss)
        else:
            # warm start: a small bracket around the previous estimate, widened on demand
            span = max(1e-3, 4.0 * abs(prev - x[k - 1]) / k)
            pair = _bisect_extremes(s, loss, prev - span, prev + span)
        out[i] = pair.smallest
        prev = pair.smallest
    return out
