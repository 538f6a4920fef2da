"""Population criterion M for losses ``h(x, t) = v(t - x)``.

Everything here is expressed through the one-sided derivatives
``D±M(t) = E[D±v(t - X)]`` and the shifted map ``K(x) = D+M(m + x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .distributions import Cauchy, Distribution, Normal, Uniform
from .errors import (
    BracketFailure,
    EnvelopeUnavailable,
    InvalidParameter,
    LinearizationFailure,
    MomentDivergence,
    NonIntegrable,
    UnknownScenario,
)
from .scores import ConvexLoss, ScoreFunction, ScoreKind, build_score, loss_for

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_loss(loss_or_score) -> ConvexLoss:
    if isinstance(loss_or_score, ConvexLoss):
        return loss_or_score
    if isinstance(loss_or_score, ScoreFunction):
        return loss_for(loss_or_score)
    raise TypeError(f"expected ConvexLoss or ScoreFunction, got {type(loss_or_score).__name__}")


def _check_integrable(score: ScoreFunction, dist: Distribution, order: float = 1.0, exc=NonIntegrable):
    need = score.growth * order
    if need > 0 and not need < dist.max_moment:
        raise exc(
            f"E|phi(t - X)|^{order:g} is infinite: {score!r} grows like |u|^{score.growth:g} "
            f"but {dist!r} only has moments of order < {dist.max_moment:g}"
        )


def derivative_at(score: ScoreFunction, dist: Distribution, t: float, side: str = "right",
                  method: str = "auto") -> float:
    """``D+M(t)`` (side='right') or ``D-M(t)`` (side='left') for the pair (score, dist).

    ``method='quadrature'`` forces numerical integration even where a closed
    form exists; it is the oracle route used to check the closed-form catalog.
    """
    if side not in ("right", "left"):
        raise InvalidParameter(f"side must be 'right' or 'left', got {side!r}")
    _check_integrable(score, dist)
    t = float(t)
    if method == "auto":
        if score.kind is ScoreKind.QUANTILE_STEP:
            F = dist.cdf(t) if side == "right" else dist.cdf_left(t)
            return float(F) - score.params["alpha"]
        if score.kind is ScoreKind.IDENTITY:
            return t - float(dist.mean)
    elif method != "quadrature":
        raise InvalidParameter(f"unknown method {method!r}")
    fn = score.value if side == "right" else score.left_limit
    breaks = [t - k for k in score.kinks]
    return dist.expect(lambda x: fn(t - x), breaks=breaks)


def criterion_derivative(model: "PopulationModel", t: float, side: str = "right",
                         method: str = "auto") -> float:
    return derivative_at(model.loss.score, model.dist, t, side, method)


# -- closed-form catalog ---------------------------------------------------

def _H(s):
    # antiderivative of the standard normal CDF
    s = np.asarray(s, dtype=float)
    return s * ndtr(s) + np.exp(-0.5 * s * s) / _SQRT_2PI


def _K_normal(x, sigma=1.0, mu=0.0):
    return ndtr(x / math.sqrt(1.0 + sigma**2)) - 0.5


def _K_cauchy(x, scale=1.0, score_scale=1.0, location=0.0):
    # the convolution of Cauchy laws adds their scales
    return np.arctan(x / (scale + score_scale)) / math.pi


def _K_uniform(x, a=-1.0, b=1.0):
    w = 0.5 * (b - a)
    return (_H(x + w) - _H(x - w)) / (b - a) - 0.5


def _K_smoothed_median(x, c=1.0):
    return (_H(x + c) - _H(x - c)) / (2.0 * c) - 0.5


def _K_huber(x, c=1.0):
    return _H(x + c) - _H(x - c) - c


def _K_rational_sqrt(x):
    return 0.5 * (np.sqrt((x + 1.0) ** 2 + 1.0) - np.sqrt((x - 1.0) ** 2 + 1.0))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    K: Callable
    score: Callable
    dist: Callable
    formula: str


CATALOG = {
    "normal": CatalogEntry(
        "normal", _K_normal,
        lambda p: build_score("normal_cdf_shift"),
        lambda p: Normal(p.get("mu", 0.0), p.get("sigma", 1.0)),
        "K(x)=Phi(x/sqrt(1+sigma^2))-1/2",
    ),
    "cauchy": CatalogEntry(
        "cauchy", _K_cauchy,
        lambda p: build_score("cauchy_cdf_shift", scale=p.get("score_scale", 1.0)),
        lambda p: Cauchy(p.get("location", 0.0), p.get("scale", 1.0)),
        "K(x)=(1/pi)arctan(x/(scale+score_scale))",
    ),
    "uniform": CatalogEntry(
        "uniform", _K_uniform,
        lambda p: build_score("normal_cdf_shift"),
        lambda p: Uniform(p.get("a", -1.0), p.get("b", 1.0)),
        "K(x)=(H(x+(b-a)/2)-H(x-(b-a)/2))/(b-a)-1/2, H(s)=s*Phi(s)+phi(s)",
    ),
    "smoothed_median": CatalogEntry(
        "smoothed_median", _K_smoothed_median,
        lambda p: build_score("smoothed_median", c=p.get("c", 1.0)),
        lambda p: Normal(0.0, 1.0),
        "K(x)=(H(x+c)-H(x-c))/(2c)-1/2",
    ),
    "huber": CatalogEntry(
        "huber", _K_huber,
        lambda p: build_score("huber", c=p.get("c", 1.0)),
        lambda p: Normal(0.0, 1.0),
        "K(x)=H(x+c)-H(x-c)-c",
    ),
    "rational_sqrt": CatalogEntry(
        "rational_sqrt", lambda x, **_: _K_rational_sqrt(x),
        lambda p: build_score("rational_sqrt"),
        lambda p: Uniform(-1.0, 1.0),
        "K(x)=(sqrt((x+1)^2+1)-sqrt((x-1)^2+1))/2",
    ),
}


def closed_form_K(scenario: str, x, params: Optional[dict] = None):
    """``K(x) = D+M(m + x)`` for one of the six cataloged (score, distribution) pairs."""
    try:
        entry = CATALOG[scenario]
    except KeyError:
        raise UnknownScenario(f"no closed form for scenario {scenario!r}; known: {sorted(CATALOG)}") from None
    out = np.asarray(entry.K(np.asarray(x, dtype=float), **(params or {})), dtype=float)
    return float(out) if out.ndim == 0 else out


# -- minimum set -------------------------------------------------------------

@dataclass(frozen=True)
class MinimumSet:
    lower: float
    upper: float
    unique: bool

    def __iter__(self):
        return iter((self.lower, self.upper))


def _initial_bracket(dist: Distribution):
    try:
        center = float(dist.quantile(0.5))
    except Exception:  # pragma: no cover - every shipped distribution has a median
        center = 0.0
    if dist.support is not None:
        lo, hi = dist.support
        return lo - 1.0, hi + 1.0
    spread = abs(float(dist.quantile(0.75)) - float(dist.quantile(0.25))) or 1.0
    return center - 4.0 * spread, center + 4.0 * spread


def _bisect(pred, lo, hi, tol):
    """Shrink [lo, hi] with pred(lo) False and pred(hi) True to width <= tol."""
    for _ in range(400):
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def minimum_set(loss, dist: Distribution, bracket=None, tol: float = 1e-12,
                method: str = "auto") -> MinimumSet:
    """``[m-, m+]`` with ``m- = inf{D+M >= 0}`` and ``m+ = sup{D-M <= 0}``.

    Without a bracket one is grown geometrically around the median of ``dist``.
    """
    score = _as_loss(loss).score

    def dplus(t):
        return derivative_at(score, dist, t, "right", method)

    def dminus(t):
        return derivative_at(score, dist, t, "left", method)

    if bracket is None:
        lo, hi = _initial_bracket(dist)
        width = hi - lo
        for _ in range(60):
            if dplus(lo) < 0.0 and dminus(hi) > 0.0:
                break
            lo, hi = lo - width, hi + width
            width *= 2.0
        else:
            raise BracketFailure("no sign change of D+M found while growing the bracket")
    else:
        lo, hi = map(float, bracket)
        if not (dplus(lo) < 0.0 <= dplus(hi)):
            raise BracketFailure(f"D+M has no sign change on [{lo}, {hi}]")
        if not (dminus(lo) <= 0.0 < dminus(hi)):
            raise BracketFailure(f"D-M has no sign change on [{lo}, {hi}]")

    _, m_lo = _bisect(lambda t: dplus(t) >= 0.0, lo, hi, tol)
    m_hi, _ = _bisect(lambda t: dminus(t) > 0.0, lo, hi, tol)
    m_hi = max(m_hi, m_lo)
    unique = (m_hi - m_lo) <= 1e-9 * max(1.0, abs(m_lo))
    return MinimumSet(m_lo, m_hi, unique)


# -- population model --------------------------------------------------------

@dataclass(eq=False)
class PopulationModel:
    """A loss paired with a data law, anchored at the canonical minimizer ``m``."""

    loss: ConvexLoss
    dist: Distribution
    m: float
    min_set: MinimumSet
    x0: float = 1.0
    sigma_sq: Optional[float] = None
    name: str = ""
    _K_cache: dict = field(default_factory=dict, repr=False)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def score(self) -> ScoreFunction:
        return self.loss.score

    @property
    def unique(self) -> bool:
        return self.min_set.unique

    def K(self, x: float) -> float:
        """``D+M(m + x)``, memoized per x."""
        x = float(x)
        try:
            return self._K_cache[x]
        except KeyError:
            val = criterion_derivative(self, self.m + x, "right")
            self._K_cache[x] = val
            return val

    def d(self, x: float) -> float:
        """Deviation margin ``min{K(x), -K(-x)}``."""
        return min(self.K(x), -self.K(-x))


def build_model(loss, dist: Distribution, m: Optional[float] = None, x0: float = 1.0,
                bracket=None, name: str = "") -> PopulationModel:
    loss = _as_loss(loss)
    score = loss.score
    mset = minimum_set(loss, dist, bracket=bracket)
    if m is None:
        m = mset.lower
    else:
        m = float(m)
        slack = 1e-8
        if not (derivative_at(score, dist, m, "left") <= slack and derivative_at(score, dist, m, "right") >= -slack):
            raise InvalidParameter(f"m={m} violates D-M(m) <= 0 <= D+M(m)")
    if not x0 > 0.0:
        raise InvalidParameter(f"x0 must be positive, got {x0}")
    sigma_sq = None
    try:
        _check_integrable(score, dist, 2.0, exc=MomentDivergence)
        sigma_sq = _raw_moment(score, dist, m, 2.0)
    except MomentDivergence:
        pass
    return PopulationModel(loss, dist, m, mset, x0=x0, sigma_sq=sigma_sq, name=name)


# -- boundedness envelope ----------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Almost-sure bounds ``a(x) <= D+h(X, m + x) <= b(x)``."""

    a: Callable
    b: Callable
    one_sided_limits: tuple  # (alpha+, beta+, alpha-, beta-)

    def A(self, x: float) -> float:
        x = abs(float(x))
        return max(self.b(x) - self.a(x), self.b(-x) - self.a(-x))

    @property
    def A0(self) -> float:
        ap, bp, am, bm = self.one_sided_limits
        return max(bp - ap, bm - am)

    @property
    def tau(self) -> float:
        return self.A0


def boundedness_envelope(score: ScoreFunction, dist: Distribution, m: float) -> Envelope:
    """Constant envelope for bounded scores, support envelope for unbounded ones."""
    if score.bounded:
        lo, hi = float(score.lower), float(score.upper)
        return Envelope(lambda x: lo, lambda x: hi, (lo, hi, lo, hi))
    if dist.support is None:
        raise EnvelopeUnavailable(
            f"{score!r} is unbounded and {dist!r} has unbounded support; use the moment bounds"
        )
    A, B = dist.support
    m = float(m)

    def a(x):
        return float(score.value(m + x - B))

    def b(x):
        return float(score.value(m + x - A))

    limits = (
        float(score.value(m - B)),
        float(score.value(m - A)),
        float(score.left_limit(m - B)),
        float(score.left_limit(m - A)),
    )
    return Envelope(a, b, limits)


def model_envelope(model: PopulationModel) -> Envelope:
    return boundedness_envelope(model.score, model.dist, model.m)


# -- local linearity -------------------------------------------------------------

@dataclass(frozen=True)
class Linearization:
    c: float
    delta: float
    method: str = "derivative"


def _certify(model, c, delta, steps=100):
    xs = np.linspace(-delta, delta, 2 * steps + 1)
    return all(abs(model.K(x)) >= c * abs(x) for x in xs)


def local_linearity(model: PopulationModel, max_halvings: int = 40) -> Linearization:
    """Constants (c, delta) with ``|K(x)| >= c|x|`` on ``[-delta, delta]``.

    With a positive bounded score derivative and ``D+M(m) = 0`` the slope is
    half the mean derivative ``E[phi'(m - X)]``; otherwise it is 0.9 times the
    smallest secant slope on the grid.
    """
    score = model.score
    delta0 = min(model.x0, 1.0)
    slope_known = (score.deriv is not None and score.deriv_positive and abs(model.K(0.0)) <= 1e-9)
    if slope_known:
        if score.kind is ScoreKind.IDENTITY:
            mean_deriv = 1.0
        else:
            mean_deriv = model.dist.expect(lambda s: score.deriv(model.m - s))
        c = 0.5 * mean_deriv
        delta = delta0
        for _ in range(max_halvings):
            if _certify(model, c, delta):
                return Linearization(c, delta, "derivative")
            delta *= 0.5
    delta = delta0
    for _ in range(max_halvings):
        xs = np.linspace(-delta, delta, 201)
        xs = xs[xs != 0.0]
        slope = min(abs(model.K(x)) / abs(x) for x in xs)
        if slope >= 1e-12:
            c = 0.9 * slope
            if _certify(model, c, delta):
                return Linearization(c, delta, "grid")
        delta *= 0.5
    raise LinearizationFailure("no (c, delta) certificate found; is the minimizer unique?")


# -- moment functions ----------------------------------------------------------

def _raw_moment(score, dist, t, s):
    """``E|phi(t - X)|^s``."""
    if score.kind is ScoreKind.QUANTILE_STEP:
        alpha = score.params["alpha"]
        F = float(dist.cdf(t))
        return (1.0 - alpha) ** s * F + alpha**s * (1.0 - F)
    if score.kind is ScoreKind.IDENTITY and s == 2.0 and hasattr(dist, "variance"):
        return (t - float(dist.mean)) ** 2 + float(dist.variance)
    breaks = [t - k for k in score.kinks]
    return dist.expect(lambda x: abs(float(score.value(t - x))) ** s, breaks=breaks)


@dataclass(frozen=True)
class MomentValue:
    R: float
    mu: float

    def __iter__(self):
        return iter((self.R, self.mu))


def moment_function(model: PopulationModel, x: float, s: float = 2.0) -> MomentValue:
    """``R_s(x) = E|D+h(X, m + x)|^s`` and ``mu_s(x) = max{R_s(x), R_s(-x)}``."""
    if s < 1.0:
        raise InvalidParameter(f"moment order must be >= 1, got {s}")
    if abs(x) > model.x0:
        raise InvalidParameter(f"|x|={abs(x)} exceeds the moment radius x0={model.x0}")
    _check_integrable(model.score, model.dist, s, exc=MomentDivergence)
    R_pos = _raw_moment(model.score, model.dist, model.m + x, float(s))
    R_neg = _raw_moment(model.score, model.dist, model.m - x, float(s))
    return MomentValue(R_pos, max(R_pos, R_neg))


def moment_sup(model: PopulationModel, s: float = 2.0, points: int = 201) -> float:
    """Grid approximation of ``L_s = sup_{|x| <= x0} R_s(x)``."""
    _check_integrable(model.score, model.dist, s, exc=MomentDivergence)
    xs = np.linspace(-model.x0, model.x0, points)
    return max(_raw_moment(model.score, model.dist, model.m + x, float(s)) for x in xs)
