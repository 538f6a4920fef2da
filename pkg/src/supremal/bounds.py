"""Finite-sample tail bounds for ``sup_{k >= n} |m_k - m|`` and rate certificates.

All bounds are upper bounds on

    P(sup_{k>=n} (m_k - m) > x)      kind 'sup'
    P(inf_{k>=n} (m_k - m) < -x)     kind 'inf'
    P(sup_{k>=n} |m_k - m| > x)      kind 'abs'

built from ``K(x) = D+M(m + x)``.  ``raw`` keeps the formula value (it can
exceed 1); ``clamped`` is the usable probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateQuantile,
    EnvelopeUnavailable,
    IntegrationFailure,
    InvalidParameter,
    InvalidSupport,
    MgfDivergence,
    MissingConstants,
    MissingLimits,
    NonUniqueMinimizer,
)
from .population import (
    Envelope,
    PopulationModel,
    model_envelope,
    moment_function,
)
from .scores import ScoreKind


class TheoremId(str, Enum):
    EXP_SUP = "ExpSup"
    EXP_INF = "ExpInf"
    EXP_ABS = "ExpAbs"
    CHERNOFF_SUP = "ChernoffSup"
    CHERNOFF_INF = "ChernoffInf"
    CHERNOFF_ABS = "ChernoffAbs"
    POLY_SUP = "PolySup"
    POLY_INF = "PolyInf"
    POLY_ABS = "PolyAbs"
    QUANTILE_FERGER = "QuantileFerger"
    SERFLING_POINT = "SerflingPoint"
    SERFLING_SUP = "SerflingSup"
    HOEFFDING_SUP = "HoeffdingSup"
    ASYMPTOTIC_SUP = "AsymptoticSup"
    ASYMPTOTIC_INF = "AsymptoticInf"
    ASYMPTOTIC_ABS = "AsymptoticAbs"


# Which event each theorem bounds.  'point' is the single-index event |m_n - m| > x.
EVENT_KIND = {
    TheoremId.EXP_SUP: "sup", TheoremId.EXP_INF: "inf", TheoremId.EXP_ABS: "abs",
    TheoremId.CHERNOFF_SUP: "sup", TheoremId.CHERNOFF_INF: "inf", TheoremId.CHERNOFF_ABS: "abs",
    TheoremId.POLY_SUP: "sup", TheoremId.POLY_INF: "inf", TheoremId.POLY_ABS: "abs",
    TheoremId.QUANTILE_FERGER: "abs", TheoremId.SERFLING_POINT: "point",
    TheoremId.SERFLING_SUP: "abs", TheoremId.HOEFFDING_SUP: "abs",
    TheoremId.ASYMPTOTIC_SUP: "sup", TheoremId.ASYMPTOTIC_INF: "inf", TheoremId.ASYMPTOTIC_ABS: "abs",
}

_KINDS = ("sup", "inf", "abs")


@dataclass(frozen=True)
class BoundValue:
    theorem_id: TheoremId
    inputs: dict
    raw: float
    constants: dict = field(default_factory=dict)

    @property
    def clamped(self) -> float:
        return min(self.raw, 1.0)

    @property
    def kind(self) -> str:
        return EVENT_KIND[self.theorem_id]

    def to_record(self) -> dict:
        rec = {"theorem_id": self.theorem_id.value, "kind": self.kind}
        rec.update(self.inputs)
        rec["raw"] = self.raw
        rec["clamped"] = self.clamped
        rec.update(self.constants)
        return rec


def _check_n_x(n, x, allow_zero_x=False):
    if int(n) != n or n < 1:
        raise InvalidParameter(f"sample size n must be a positive integer, got {n}")
    if not (x >= 0.0 if allow_zero_x else x > 0.0):
        raise InvalidParameter(f"threshold x must be positive, got {x}")


def _check_kind(kind):
    if kind not in _KINDS:
        raise InvalidParameter(f"kind must be one of {_KINDS}, got {kind!r}")


def _exp_one_sided(n, eta, width):
    if eta <= 0.0:
        return 1.0
    return math.exp(-2.0 * n * eta * eta / (width * width))


def _exp_two_sided(n, d, A):
    if d <= 0.0:
        return 2.0
    return 2.0 * math.exp(-2.0 * n * d * d / (A * A))


# -- exponential bounds under the boundedness assumption --------------------------

def exp_tail_bound(kind: str, envelope: Envelope, K: Callable, n: int, x: float) -> BoundValue:
    """Hoeffding-type supremal bound from an envelope and ``K(x) = D+M(m + x)``."""
    _check_kind(kind)
    _check_n_x(n, x)
    inputs = {"n": int(n), "x": float(x)}
    if kind == "sup":
        eta, width = K(x), envelope.b(x) - envelope.a(x)
        return BoundValue(TheoremId.EXP_SUP, inputs, _exp_one_sided(n, eta, width),
                          {"eta": eta, "width": width})
    if kind == "inf":
        eta, width = -K(-x), envelope.b(-x) - envelope.a(-x)
        return BoundValue(TheoremId.EXP_INF, inputs, _exp_one_sided(n, eta, width),
                          {"eta": eta, "width": width})
    d, A = min(K(x), -K(-x)), envelope.A(x)
    return BoundValue(TheoremId.EXP_ABS, inputs, _exp_two_sided(n, d, A), {"d": d, "A": A})


def model_exp_bound(kind: str, model: PopulationModel, n: int, x: float) -> BoundValue:
    return exp_tail_bound(kind, model_envelope(model), model.K, n, x)


# -- Chernoff bounds under an mgf condition -----------------------------------------

def _mgf_applicable(model: PopulationModel):
    score, dist = model.score, model.dist
    if score.bounded or dist.support is not None:
        return
    # polynomial tails kill every exponential moment; Gaussian-type tails allow growth below 2
    if math.isfinite(dist.max_moment) or score.growth >= 2.0:
        raise MgfDivergence(f"moment generating function of {score!r} under {dist!r} is infinite")


def _log_mgf_factory(model: PopulationModel, side: str, x: float):
    """Return ``theta -> log E exp(theta * Y)`` with ``Y = -phi(m+x-X)`` (sup) or ``phi(m-x-X)`` (inf)."""
    score, dist, m = model.score, model.dist, model.m
    if score.kind is ScoreKind.QUANTILE_STEP:
        alpha = score.params["alpha"]
        if side == "sup":
            p = float(dist.cdf(m + x))
            return lambda th: th * alpha + math.log1p(p * math.expm1(-th))
        q = float(dist.cdf(m - x))
        return lambda th: -th * alpha + math.log1p(q * math.expm1(th))

    t = m + x if side == "sup" else m - x
    sign = -1.0 if side == "sup" else 1.0
    try:
        env = model_envelope(model)
        ymax = -env.a(x) if side == "sup" else env.b(-x)
    except EnvelopeUnavailable:
        ymax = 0.0
    breaks = [t - k for k in score.kinks]

    def log_mgf(th):
        shift = th * ymax
        try:
            val = dist.expect(lambda s: math.exp(th * sign * float(score.value(t - s)) - shift),
                              breaks=breaks, epsabs=0.0)
        except IntegrationFailure:
            val = dist.expect(lambda s: math.exp(th * sign * float(score.value(t - s)) - shift),
                              breaks=breaks)
        if not (val > 0.0 and math.isfinite(val)):
            return math.inf
        return shift + math.log(val)

    return log_mgf


def _chernoff_exponent(model: PopulationModel, side: str, x: float, theta_max: float):
    key = ("chernoff", side, float(x), float(theta_max))
    if key in model.cache:
        return model.cache[key]
    eta = model.K(x) if side == "sup" else -model.K(-x)
    if eta <= 0.0:
        result = {"eta": eta, "theta": 0.0, "kappa": 0.0, "beta": 0.0}
        model.cache[key] = result
        return result
    log_mgf = _log_mgf_factory(model, side, x)

    def beta(th):
        # beta = eta*theta - kappa(theta) and kappa = eta*theta + log E exp(theta*Y)
        try:
            lm = log_mgf(th)
        except (IntegrationFailure, OverflowError):
            return -math.inf
        return -lm

    grid = np.logspace(-8.0, math.log10(theta_max), 121)
    vals = np.array([beta(th) for th in grid])
    i = int(np.argmax(vals))
    best_th, best_val = float(grid[i]), float(vals[i])
    if 0 < i < grid.size - 1:
        res = optimize.minimize_scalar(lambda th: -beta(th), bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                       method="golden", tol=1e-10)
        if grid[i - 1] <= res.x <= grid[i + 1] and -res.fun > best_val:
            best_th, best_val = float(res.x), float(-res.fun)
    try:
        env = model_envelope(model)
        width = env.b(x) - env.a(x) if side == "sup" else env.b(-x) - env.a(-x)
        th_h = 4.0 * eta / (width * width)
        if 0.0 < th_h <= theta_max:
            val = beta(th_h)
            if val > best_val:
                best_th, best_val = th_h, val
    except EnvelopeUnavailable:
        pass
    best_val = max(best_val, 0.0)
    result = {"eta": eta, "theta": best_th, "kappa": eta * best_th - best_val, "beta": best_val}
    model.cache[key] = result
    return result


def chernoff_tail_bound(kind: str, model: PopulationModel, n: int, x: float,
                        theta_max: float = 50.0) -> BoundValue:
    """``exp(-n * sup_theta [eta*theta - kappa_x(theta)])`` with a numerically optimized theta.

    The abs kind is the sum of the sup and inf bounds.
    """
    _check_kind(kind)
    _check_n_x(n, x)
    if not theta_max > 1e-8:
        raise InvalidParameter(f"theta_max must exceed 1e-8, got {theta_max}")
    _mgf_applicable(model)
    inputs = {"n": int(n), "x": float(x), "theta_max": float(theta_max)}
    if kind in ("sup", "inf"):
        ex = _chernoff_exponent(model, kind, x, theta_max)
        raw = math.exp(-n * ex["beta"])
        tid = TheoremId.CHERNOFF_SUP if kind == "sup" else TheoremId.CHERNOFF_INF
        return BoundValue(tid, inputs, raw, dict(ex))
    up = _chernoff_exponent(model, "sup", x, theta_max)
    lo = _chernoff_exponent(model, "inf", x, theta_max)
    raw = math.exp(-n * up["beta"]) + math.exp(-n * lo["beta"])
    return BoundValue(TheoremId.CHERNOFF_ABS, inputs, raw,
                      {"beta_sup": up["beta"], "beta_inf": lo["beta"],
                       "theta_sup": up["theta"], "theta_inf": lo["theta"]})


# -- polynomial bounds under moment conditions -----------------------------------

def resolve_B_s(s: float, B_s: Optional[float]) -> float:
    if B_s is None:
        if s == 2:
            return 1.0
        raise MissingConstants("B_s required for s>2")
    if not B_s > 0.0:
        raise InvalidParameter(f"B_s must be positive, got {B_s}")
    return float(B_s)


def poly_tail_bound(kind: str, model: PopulationModel, n: int, x: float, s: float = 2.0,
                    B_s: Optional[float] = None) -> BoundValue:
    """Doob/Marcinkiewicz-Zygmund bound ``2^s B_s R_s eta^-s n^-s/2`` (``2^{s+1}`` for abs)."""
    _check_kind(kind)
    _check_n_x(n, x)
    if s < 2:
        raise InvalidParameter(f"moment order s must be >= 2, got {s}")
    B = resolve_B_s(s, B_s)
    mom = moment_function(model, x, s)
    inputs = {"n": int(n), "x": float(x), "s": float(s), "B_s": B}
    scale = B * n ** (-s / 2.0)
    if kind == "sup":
        eta = model.K(x)
        if eta <= 0.0:
            raise NonUniqueMinimizer(f"D+M(m+x) = {eta} <= 0 at x={x}")
        raw = 2.0**s * scale * mom.R * eta ** (-s)
        return BoundValue(TheoremId.POLY_SUP, inputs, raw, {"eta": eta, "R_s": mom.R})
    if kind == "inf":
        eta = -model.K(-x)
        if eta <= 0.0:
            raise NonUniqueMinimizer(f"-D+M(m-x) = {eta} <= 0 at x={x}")
        R_neg = moment_function(model, -x, s).R
        raw = 2.0**s * scale * R_neg * eta ** (-s)
        return BoundValue(TheoremId.POLY_INF, inputs, raw, {"eta": eta, "R_s": R_neg})
    d = model.d(x)
    if d <= 0.0:
        raise NonUniqueMinimizer(f"d(x) = {d} <= 0 at x={x}")
    raw = 2.0 ** (s + 1.0) * scale * mom.mu * d ** (-s)
    return BoundValue(TheoremId.POLY_ABS, inputs, raw, {"d": d, "mu_s": mom.mu, "R_s": mom.R})


# -- quantiles --------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileBounds:
    ferger_sup: BoundValue
    serfling_point: BoundValue
    serfling_sup: BoundValue
    rho: float


def quantile_bounds(F, alpha: float, n: int, x: float) -> QuantileBounds:
    """Supremal quantile bound next to the pointwise and geometric-sum (Serfling) bounds."""
    _check_n_x(n, x)
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    q = float(F.quantile(alpha))
    d = min(float(F.cdf(q + x)) - alpha, alpha - float(F.cdf(q - x)))
    if d <= 0.0:
        raise DegenerateQuantile(f"d(x) = {d} at x={x}: the {alpha}-quantile is not unique")
    # envelope width of the quantile score, computed as the envelope does
    A = (1.0 - alpha) - (-alpha)
    core = _exp_two_sided(n, d, A)
    rho = math.exp(-2.0 * d * d)
    one_minus_rho = -math.expm1(-2.0 * d * d)
    inputs = {"n": int(n), "x": float(x), "alpha": float(alpha)}
    consts = {"d": d, "q_alpha": q}
    return QuantileBounds(
        ferger_sup=BoundValue(TheoremId.QUANTILE_FERGER, inputs, core, dict(consts)),
        serfling_point=BoundValue(TheoremId.SERFLING_POINT, inputs, core, dict(consts)),
        serfling_sup=BoundValue(TheoremId.SERFLING_SUP, inputs, core / one_minus_rho,
                                {**consts, "rho": rho}),
        rho=rho,
    )


def hoeffding_sup_bound(A: float, B: float, n: int, x: float) -> BoundValue:
    """``2 exp(-2 n x^2 / (B - A)^2)`` for the running mean of data in [A, B]."""
    if not A < B:
        raise InvalidSupport(f"need A < B, got A={A}, B={B}")
    _check_n_x(n, x, allow_zero_x=True)
    width = B - A
    raw = 2.0 * math.exp(-2.0 * n * x * x / (width * width))
    return BoundValue(TheoremId.HOEFFDING_SUP, {"n": int(n), "x": float(x), "A": float(A), "B": float(B)},
                      raw, {"width": width})


# -- asymptotic bounds ---------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticSpec:
    """Limit ``delta(x) = lim sqrt(n) K(x / a_n)`` with the envelope limits at 0."""

    delta_fn: Callable
    limits: Optional[tuple]  # (alpha+, beta+, alpha-, beta-)
    norming: str = "sqrt_n"

    def _limits(self):
        if self.limits is None or len(self.limits) != 4 or any(
                v is None or not math.isfinite(v) for v in self.limits):
            raise MissingLimits("one-sided envelope limits at 0 are required")
        return self.limits

    @property
    def tau(self) -> float:
        ap, bp, am, bm = self._limits()
        return max(bp - ap, bm - am)

    def Delta(self, x: float) -> float:
        return min(self.delta_fn(x), -self.delta_fn(-x))


def _gauss_tail(value, width):
    if math.isinf(value):
        return 0.0
    return math.exp(-2.0 * value * value / (width * width))


def asymptotic_bound(kind: str, spec: AsymptoticSpec, x: float) -> float:
    """limsup bound on ``P(a_n sup (m_k - m) > x)`` and relatives; ``x < 0`` for kind 'inf'."""
    _check_kind(kind)
    ap, bp, am, bm = spec._limits()
    if kind == "sup":
        if not x > 0:
            raise InvalidParameter("kind 'sup' needs x > 0")
        return _gauss_tail(spec.delta_fn(x), bp - ap)
    if kind == "inf":
        if not x < 0:
            raise InvalidParameter("kind 'inf' needs x < 0")
        return _gauss_tail(spec.delta_fn(x), bm - am)
    if not x > 0:
        raise InvalidParameter("kind 'abs' needs x > 0")
    return 2.0 * _gauss_tail(spec.Delta(x), spec.tau)


def asymptotic_spec_for(model: PopulationModel, h: float = 1e-5) -> AsymptoticSpec:
    """Root-n norming for a model whose K is differentiable at 0: ``delta(x) = K'(0) x``."""
    slope = (model.K(h) - model.K(-h)) / (2.0 * h)
    env = model_envelope(model)
    return AsymptoticSpec(lambda x: slope * x, env.one_sided_limits)


# -- rate certificates ---------------------------------------------------------------

@dataclass(frozen=True)
class RateCertificate:
    regime: str
    gamma: float
    r: float
    admissible: bool
    r_quick: bool
    big_o: Optional[bool]
    constants: dict


def _require(constants, names):
    missing = [k for k in names if constants.get(k) is None]
    if missing:
        raise MissingConstants(f"missing constants: {', '.join(missing)}")


def rate_certificates(regime: str, gamma: float, r: float, constants: dict) -> RateCertificate:
    """Check the r-complete, r-quick and log-rate conditions (all strict).

    Bounded regime needs ``c, delta, A0`` and optionally ``K`` for the
    ``K n^-1/2 sqrt(log n)`` threshold ``K > A0/c``.  Moment regime needs
    ``s, L_s, B_s`` and reports ``K_s = 2^s B_s L_s``.
    """
    consts = dict(constants)
    if regime == "bounded":
        _require(consts, ("c", "delta", "A0"))
        c, delta, A0 = consts["c"], consts["delta"], consts["A0"]
        positive = c > 0 and delta > 0 and A0 > 0
        threshold = A0 / c
        consts["K_threshold"] = threshold
        big_o = None if consts.get("K") is None else bool(positive and consts["K"] > threshold)
        return RateCertificate(
            regime, gamma, r,
            admissible=bool(positive and gamma < 0.5 and r > 0),
            r_quick=bool(positive and r > 0),
            big_o=big_o,
            constants=consts,
        )
    if regime == "moment":
        _require(consts, ("s", "L_s", "B_s"))
        s = consts["s"]
        consts["K_s"] = 2.0**s * consts["B_s"] * consts["L_s"]
        return RateCertificate(
            regime, gamma, r,
            admissible=bool(s > 2 and gamma < 0.5 and 0 < r < (0.5 - gamma) * s),
            r_quick=bool(s > 2 and 0 < r < s / 2.0),
            big_o=None,
            constants=consts,
        )
    raise InvalidParameter(f"regime must be 'bounded' or 'moment', got {regime!r}")


def model_bound(theorem: TheoremId, model: PopulationModel, n: int, x: float, *,
                s: float = 2.0, B_s: Optional[float] = None, theta_max: float = 50.0) -> BoundValue:
    """Evaluate any finite-sample theorem for a model; raises if it does not apply."""
    theorem = TheoremId(theorem)
    kind = EVENT_KIND[theorem]
    name = theorem.value
    if name.startswith("Exp"):
        return model_exp_bound(kind, model, n, x)
    if name.startswith("Chernoff"):
        return chernoff_tail_bound(kind, model, n, x, theta_max)
    if name.startswith("Poly"):
        return poly_tail_bound(kind, model, n, x, s, B_s)
    if theorem in (TheoremId.QUANTILE_FERGER, TheoremId.SERFLING_POINT, TheoremId.SERFLING_SUP):
        if model.score.kind is not ScoreKind.QUANTILE_STEP:
            raise InvalidParameter(f"{name} needs a quantile score")
        qb = quantile_bounds(model.dist, model.score.params["alpha"], n, x)
        return {TheoremId.QUANTILE_FERGER: qb.ferger_sup, TheoremId.SERFLING_POINT: qb.serfling_point,
                TheoremId.SERFLING_SUP: qb.serfling_sup}[theorem]
    if theorem is TheoremId.HOEFFDING_SUP:
        if model.score.kind is not ScoreKind.IDENTITY or model.dist.support is None:
            raise InvalidParameter("HoeffdingSup needs the mean score on bounded data")
        A, B = model.dist.support
        return hoeffding_sup_bound(A, B, n, x)
    raise InvalidParameter(f"{name} is an asymptotic bound; use asymptotic_bound")
