"""Score functions and the convex losses they generate.

A score ``phi`` is nondecreasing and right-continuous.  It induces the convex
loss ``v(u) = int_0^u phi(s) ds`` with one-sided derivatives
``D+v(u) = phi(u)`` and ``D-v(u) = phi(u-)``.  Presets carry closed-form
antiderivatives; custom scores fall back to adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import IntegrationFailure, InvalidParameter

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ScoreKind(str, Enum):
    IDENTITY = "identity"
    QUANTILE_STEP = "quantile_step"
    HUBER = "huber"
    SMOOTHED_MEDIAN = "smoothed_median"
    NORMAL_CDF_SHIFT = "normal_cdf_shift"
    CAUCHY_CDF_SHIFT = "cauchy_cdf_shift"
    RATIONAL_SQRT = "rational_sqrt"
    CUSTOM = "custom"


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _std_normal_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


@dataclass(frozen=True, eq=False)
class ScoreFunction:
    """A nondecreasing right-continuous generator with its metadata.

    ``lower``/``upper`` are ``inf phi`` and ``sup phi``; ``growth`` is the
    polynomial order of ``|phi(u)|`` as ``|u| -> inf`` (0 for bounded scores),
    used to decide which moments of the data distribution are needed.
    ``kinks`` lists every point where ``phi`` is not smooth, jumps included;
    quadrature splits its range there.
    """

    kind: ScoreKind
    params: dict
    value: Callable
    left_limit: Callable
    jump_points: tuple = ()
    deriv: Optional[Callable] = None
    sup_abs: float = math.inf
    lower: float = -math.inf
    upper: float = math.inf
    antiderivative: Optional[Callable] = None
    kinks: tuple = ()
    deriv_positive: bool = False
    growth: float = 0.0
    monotone_flag: bool = True
    odd: bool = False

    def __call__(self, u):
        return self.value(u)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if not callable(v))
        return f"ScoreFunction({self.kind.value}{', ' + args if args else ''})"

    @property
    def bounded(self):
        return math.isfinite(self.sup_abs)

    @property
    def has_jumps(self):
        return bool(self.jump_points)


def _identity():
    return ScoreFunction(
        kind=ScoreKind.IDENTITY,
        params={},
        value=lambda u: _scalar_or_array(u),
        left_limit=lambda u: _scalar_or_array(u),
        deriv=lambda u: _scalar_or_array(np.ones_like(np.asarray(u, dtype=float))),
        antiderivative=lambda u: _scalar_or_array(0.5 * np.asarray(u, dtype=float) ** 2),
        deriv_positive=True,
        growth=1.0,
        odd=True,
    )


def _quantile_step(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")

    def value(u):
        return _scalar_or_array(np.where(np.asarray(u, dtype=float) >= 0.0, 1.0 - alpha, -alpha))

    def left(u):
        return _scalar_or_array(np.where(np.asarray(u, dtype=float) > 0.0, 1.0 - alpha, -alpha))

    def anti(u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(u * (np.where(u >= 0.0, 1.0, 0.0) - alpha))

    return ScoreFunction(
        kind=ScoreKind.QUANTILE_STEP,
        params={"alpha": alpha},
        value=value,
        left_limit=left,
        jump_points=(0.0,),
        sup_abs=max(alpha, 1.0 - alpha),
        lower=-alpha,
        upper=1.0 - alpha,
        antiderivative=anti,
        kinks=(0.0,),
    )


def _check_width(c):
    if not (c > 0.0 and math.isfinite(c)):
        raise InvalidParameter(f"width c must be positive and finite, got {c}")


def _huber(c):
    _check_width(c)

    def value(u):
        return _scalar_or_array(np.clip(np.asarray(u, dtype=float), -c, c))

    def deriv(u):
        return _scalar_or_array(np.where(np.abs(np.asarray(u, dtype=float)) < c, 1.0, 0.0))

    def anti(u):
        a = np.abs(np.asarray(u, dtype=float))
        return _scalar_or_array(np.where(a <= c, 0.5 * a * a, c * a - 0.5 * c * c))

    return ScoreFunction(
        kind=ScoreKind.HUBER,
        params={"c": c},
        value=value,
        left_limit=value,
        deriv=deriv,
        sup_abs=c,
        lower=-c,
        upper=c,
        antiderivative=anti,
        kinks=(-c, c),
        odd=True,
    )


def _smoothed_median(c):
    _check_width(c)

    def value(u):
        return _scalar_or_array(np.clip(np.asarray(u, dtype=float) / (2.0 * c), -0.5, 0.5))

    def deriv(u):
        return _scalar_or_array(np.where(np.abs(np.asarray(u, dtype=float)) < c, 1.0 / (2.0 * c), 0.0))

    def anti(u):
        a = np.abs(np.asarray(u, dtype=float))
        return _scalar_or_array(np.where(a <= c, a * a / (4.0 * c), 0.5 * a - 0.25 * c))

    return ScoreFunction(
        kind=ScoreKind.SMOOTHED_MEDIAN,
        params={"c": c},
        value=value,
        left_limit=value,
        deriv=deriv,
        sup_abs=0.5,
        lower=-0.5,
        upper=0.5,
        antiderivative=anti,
        kinks=(-c, c),
        odd=True,
    )


def _normal_cdf_shift():
    def value(u):
        return _scalar_or_array(ndtr(np.asarray(u, dtype=float)) - 0.5)

    def anti(u):
        # primitive of Phi is s*Phi(s) + pdf(s)
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(u * ndtr(u) + _std_normal_pdf(u) - 1.0 / _SQRT_2PI - 0.5 * u)

    return ScoreFunction(
        kind=ScoreKind.NORMAL_CDF_SHIFT,
        params={},
        value=value,
        left_limit=value,
        deriv=lambda u: _scalar_or_array(_std_normal_pdf(u)),
        sup_abs=0.5,
        lower=-0.5,
        upper=0.5,
        antiderivative=anti,
        deriv_positive=True,
        odd=True,
    )


def _cauchy_cdf_shift(scale=1.0):
    _check_width(scale)

    def value(u):
        return _scalar_or_array(np.arctan(np.asarray(u, dtype=float) / scale) / math.pi)

    def deriv(u):
        z = np.asarray(u, dtype=float) / scale
        return _scalar_or_array(1.0 / (math.pi * scale * (1.0 + z * z)))

    def anti(u):
        u = np.asarray(u, dtype=float)
        z = u / scale
        return _scalar_or_array((u * np.arctan(z) - 0.5 * scale * np.log1p(z * z)) / math.pi)

    return ScoreFunction(
        kind=ScoreKind.CAUCHY_CDF_SHIFT,
        params={"scale": scale},
        value=value,
        left_limit=value,
        deriv=deriv,
        sup_abs=0.5,
        lower=-0.5,
        upper=0.5,
        antiderivative=anti,
        deriv_positive=True,
        odd=True,
    )


def _rational_sqrt():
    def value(u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(u / np.sqrt(1.0 + u * u))

    def deriv(u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array((1.0 + u * u) ** -1.5)

    def anti(u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(np.sqrt(1.0 + u * u) - 1.0)

    return ScoreFunction(
        kind=ScoreKind.RATIONAL_SQRT,
        params={},
        value=value,
        left_limit=value,
        deriv=deriv,
        sup_abs=1.0,
        lower=-1.0,
        upper=1.0,
        antiderivative=anti,
        deriv_positive=True,
        odd=True,
    )


def _custom(value, jump_points=(), left_limit=None, deriv=None, sup_abs=None,
            deriv_positive=False, growth=None, grid=(-50.0, 50.0, 10_000)):
    if not callable(value):
        raise InvalidParameter("custom score needs a callable 'value'")
    jumps = tuple(sorted(float(j) for j in jump_points))

    def value_fn(u):
        return _scalar_or_array(np.vectorize(value, otypes=[float])(u)
                                if not _accepts_arrays(value) else value(np.asarray(u, dtype=float)))

    if left_limit is None:
        def left_fn(u):
            u = np.asarray(u, dtype=float)
            out = np.asarray(value_fn(u), dtype=float).copy()
            if jumps:
                at_jump = np.isin(u, jumps)
                if np.any(at_jump):
                    out[at_jump] = np.asarray(value_fn(np.nextafter(u[at_jump], -np.inf)))
            return _scalar_or_array(out)
    else:
        def left_fn(u):
            return _scalar_or_array(np.vectorize(left_limit, otypes=[float])(u))

    lo, hi, npts = grid
    probe = np.linspace(lo, hi, int(npts))
    bound = math.inf if sup_abs is None else float(sup_abs)
    score = ScoreFunction(
        kind=ScoreKind.CUSTOM,
        params={"value": value, "grid": grid},
        value=value_fn,
        left_limit=left_fn,
        jump_points=jumps,
        deriv=deriv,
        sup_abs=bound,
        lower=-bound,
        upper=bound,
        kinks=jumps,
        deriv_positive=deriv_positive,
        growth=(0.0 if sup_abs is not None else 1.0) if growth is None else float(growth),
    )
    validate_score(score, probe)
    return score


def _accepts_arrays(fn):
    try:
        out = np.asarray(fn(np.array([0.0, 1.0])), dtype=float)
    except Exception:
        return False
    return out.shape == (2,)


_BUILDERS = {
    ScoreKind.IDENTITY: _identity,
    ScoreKind.QUANTILE_STEP: _quantile_step,
    ScoreKind.HUBER: _huber,
    ScoreKind.SMOOTHED_MEDIAN: _smoothed_median,
    ScoreKind.NORMAL_CDF_SHIFT: _normal_cdf_shift,
    ScoreKind.CAUCHY_CDF_SHIFT: _cauchy_cdf_shift,
    ScoreKind.RATIONAL_SQRT: _rational_sqrt,
    ScoreKind.CUSTOM: _custom,
}


def build_score(kind, **params) -> ScoreFunction:
    """Construct a preset (or custom) score.

    >>> build_score("quantile_step", alpha=0.25)(-1.0)
    -0.25
    """
    try:
        kind = ScoreKind(kind)
    except ValueError:
        raise InvalidParameter(f"unknown score kind {kind!r}") from None
    try:
        return _BUILDERS[kind](**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {kind.value}: {exc}") from None


def validate_score(score: ScoreFunction, grid: Optional[Sequence[float]] = None) -> None:
    """Check the structural invariants of ``score`` on a test grid.

    Raises InvalidParameter if the score decreases somewhere on the grid, if
    ``phi(0-) <= 0 <= phi(0)`` fails, or if a declared finite sup-norm is
    exceeded.
    """
    if grid is None:
        grid = np.linspace(-50.0, 50.0, 10_000)
    grid = np.sort(np.asarray(grid, dtype=float))
    vals = np.asarray(score.value(grid), dtype=float)
    if np.any(np.diff(vals) < 0.0):
        i = int(np.argmax(np.diff(vals) < 0.0))
        raise InvalidParameter(f"score decreases between u={grid[i]} and u={grid[i + 1]}")
    if not score.left_limit(0.0) <= 0.0 <= score.value(0.0):
        raise InvalidParameter("score must satisfy phi(0-) <= 0 <= phi(0)")
    if score.bounded and np.any(np.abs(vals) > score.sup_abs * (1 + 1e-12)):
        raise InvalidParameter("score exceeds its declared sup-norm")


def evaluate_score(phi: ScoreFunction, u, side="right"):
    """``phi(u)`` for ``side='right'``, the left limit ``phi(u-)`` for ``side='left'``."""
    if side == "right":
        return phi.value(u)
    if side == "left":
        return phi.left_limit(u)
    raise InvalidParameter(f"side must be 'right' or 'left', got {side!r}")


@dataclass(frozen=True, eq=False)
class ConvexLoss:
    score: ScoreFunction

    def v(self, u):
        return loss_value(self, u)

    def d_plus(self, u):
        return self.score.value(u)

    def d_minus(self, u):
        return self.score.left_limit(u)


def loss_for(score: ScoreFunction) -> ConvexLoss:
    return ConvexLoss(score)


def _quad_antiderivative(score, u):
    if u == 0.0:
        return 0.0
    lo, hi = (0.0, u) if u > 0 else (u, 0.0)
    pts = [p for p in score.kinks if lo < p < hi]
    edges = [lo, *pts, hi]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for a, b in zip(edges[:-1], edges[1:]):
                val, _ = integrate.quad(lambda s: float(score.value(s)), a, b,
                                        epsabs=1e-10, epsrel=1e-12, limit=200)
                total += val
        except integrate.IntegrationWarning as exc:
            raise IntegrationFailure(f"quadrature of custom score failed at u={u}: {exc}") from None
    if not math.isfinite(total):
        raise IntegrationFailure(f"non-finite loss value at u={u}")
    return total if u > 0 else -total


def loss_value(loss: ConvexLoss, u):
    """``v_phi(u)``; closed form for presets, quadrature (abs tol 1e-10) otherwise."""
    score = loss.score
    if score.antiderivative is not None:
        return score.antiderivative(u)
    u_arr = np.asarray(u, dtype=float)
    out = np.array([_quad_antiderivative(score, float(ui)) for ui in u_arr.ravel()])
    return _scalar_or_array(out.reshape(u_arr.shape))


def loss_one_sided_derivatives(loss: ConvexLoss, u):
    """Return ``(D-v(u), D+v(u)) = (phi(u-), phi(u))``."""
    return loss.score.left_limit(u), loss.score.value(u)
