"""Data distributions Q with exact CDFs, generalized inverses and seeded samplers.

Sampling is inverse-CDF driven from a counter-based Philox stream keyed by
``(seed, stream)``, so draw ``i`` of stream ``j`` never depends on how many
draws were requested or in which order the streams are consumed.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .errors import IntegrationFailure, InvalidParameter, InvalidSupport

_QUAD_EPSABS = 1e-11
_QUAD_EPSREL = 1e-11
_TWO52 = float(2**52)


def order_index(n: int, alpha: float) -> int:
    """Smallest ``j`` in ``1..n`` with ``j / n >= alpha``."""
    j = max(1, min(n, math.ceil(n * alpha)))
    while j > 1 and (j - 1) / n >= alpha:
        j -= 1
    while j < n and j / n < alpha:
        j += 1
    return j


def open_uniforms(seed: int, stream: int, size: int) -> np.ndarray:
    """``size`` uniforms on the open interval (0, 1) from substream ``(seed, stream)``."""
    bitgen = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    raw = bitgen.random_raw(size) >> np.uint64(12)
    return (raw.astype(np.float64) + 0.5) / _TWO52


def _quad(func, a, b, epsabs=_QUAD_EPSABS):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(func, a, b, epsabs=epsabs, epsrel=_QUAD_EPSREL, limit=500)
        except integrate.IntegrationWarning as exc:
            raise IntegrationFailure(f"quadrature on [{a}, {b}] did not converge: {exc}") from None
    if not math.isfinite(val):
        raise IntegrationFailure(f"non-finite integral on [{a}, {b}]")
    return val


class Distribution:
    """Base class.  Subclasses set ``kind`` and implement the CDF family."""

    kind = "abstract"
    support: Optional[tuple] = None
    symmetry_center: Optional[float] = None
    # E|X|^p is finite iff p < max_moment
    max_moment = math.inf
    discrete = False

    def cdf(self, t):
        raise NotImplementedError

    def cdf_left(self, t):
        return self.cdf(t)

    pdf: Optional[Callable] = None

    def quantile(self, alpha):
        raise NotImplementedError

    def from_uniform(self, u):
        return self.quantile(u)

    def sample(self, size: int, seed: int, stream: int = 0) -> np.ndarray:
        return np.asarray(self.from_uniform(open_uniforms(seed, stream, size)), dtype=float)

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def expect(self, func: Callable, breaks: Iterable[float] = (), epsabs: float = _QUAD_EPSABS) -> float:
        """``E[func(X)]`` by adaptive quadrature, split at ``breaks``."""
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params.items()))))


class _Continuous(Distribution):
    def expect(self, func, breaks=(), epsabs=_QUAD_EPSABS):
        lo, hi = self.support if self.support is not None else (-math.inf, math.inf)
        pts = sorted({float(b) for b in breaks if lo < b < hi} | set(self._anchor_points()))
        edges = [lo, *pts, hi]
        pdf = self.pdf

        def integrand(x):
            return float(func(x)) * float(pdf(x))

        return sum(_quad(integrand, a, b, epsabs) for a, b in zip(edges[:-1], edges[1:]) if b > a)

    def _anchor_points(self):
        return ()


class Normal(_Continuous):
    kind = "normal"

    def __init__(self, mu=0.0, sigma=1.0):
        if not sigma > 0.0:
            raise InvalidParameter(f"sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.symmetry_center = self.mu

    @property
    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.sigma**2

    def cdf(self, t):
        return ndtr((np.asarray(t, dtype=float) - self.mu) / self.sigma)

    def pdf(self, t):
        z = (np.asarray(t, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def quantile(self, alpha):
        return self.mu + self.sigma * ndtri(np.asarray(alpha, dtype=float))

    def _anchor_points(self):
        return (self.mu - 8 * self.sigma, self.mu, self.mu + 8 * self.sigma)


class Cauchy(_Continuous):
    kind = "cauchy"
    max_moment = 1.0

    def __init__(self, location=0.0, scale=1.0):
        if not scale > 0.0:
            raise InvalidParameter(f"scale must be positive, got {scale}")
        self.location = float(location)
        self.scale = float(scale)
        self.symmetry_center = self.location

    @property
    def params(self):
        return {"location": self.location, "scale": self.scale}

    @property
    def mean(self):
        return math.nan

    def cdf(self, t):
        return 0.5 + np.arctan((np.asarray(t, dtype=float) - self.location) / self.scale) / math.pi

    def pdf(self, t):
        z = (np.asarray(t, dtype=float) - self.location) / self.scale
        return 1.0 / (math.pi * self.scale * (1.0 + z * z))

    def quantile(self, alpha):
        return self.location + self.scale * np.tan(math.pi * (np.asarray(alpha, dtype=float) - 0.5))

    def _anchor_points(self):
        return (self.location - 50 * self.scale, self.location, self.location + 50 * self.scale)


class Uniform(_Continuous):
    kind = "uniform"

    def __init__(self, a=0.0, b=1.0):
        if not a < b:
            raise InvalidSupport(f"uniform needs a < b, got [{a}, {b}]")
        self.a = float(a)
        self.b = float(b)
        self.support = (self.a, self.b)
        self.symmetry_center = 0.5 * (self.a + self.b)

    @property
    def params(self):
        return {"a": self.a, "b": self.b}

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.a) & (t <= self.b), 1.0 / (self.b - self.a), 0.0)

    def quantile(self, alpha):
        return self.a + (self.b - self.a) * np.asarray(alpha, dtype=float)


class _Atomic(Distribution):
    """Finitely many atoms; every expectation is an exact finite sum."""

    discrete = True
    points: np.ndarray
    weights: np.ndarray

    def _finish(self):
        self._cum = np.cumsum(self.weights)
        self._cum[-1] = 1.0
        self.support = (float(self.points[0]), float(self.points[-1]))
        self.mean = float(np.dot(self.weights, self.points))
        self.variance = float(np.dot(self.weights, (self.points - self.mean) ** 2))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.points, t, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.points, t, side="left")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        idx = np.searchsorted(self._cum, alpha, side="left")
        out = self.points[np.minimum(idx, len(self.points) - 1)]
        return float(out) if out.ndim == 0 else out

    def expect(self, func, breaks=(), epsabs=None):
        vals = np.asarray([float(func(x)) for x in self.points])
        return float(np.dot(self.weights, vals))


class TwoPoint(_Atomic):
    kind = "two_point"

    def __init__(self, p=0.5, x1=0.0, x2=1.0):
        if not 0.0 < p < 1.0:
            raise InvalidParameter(f"p must lie in (0, 1), got {p}")
        if x1 == x2:
            raise InvalidParameter("two-point law needs distinct atoms")
        self.p, self.x1, self.x2 = float(p), float(x1), float(x2)
        if self.x1 < self.x2:
            self.points = np.array([self.x1, self.x2])
            self.weights = np.array([self.p, 1.0 - self.p])
        else:
            self.points = np.array([self.x2, self.x1])
            self.weights = np.array([1.0 - self.p, self.p])
        self._finish()
        self.symmetry_center = self.mean if self.p == 0.5 else None

    @property
    def params(self):
        return {"p": self.p, "x1": self.x1, "x2": self.x2}


class Empirical(_Atomic):
    """Uniform law on a finite list of observations (ties keep multiplicity)."""

    kind = "empirical"

    def __init__(self, values, source=None):
        vals = np.sort(np.asarray(values, dtype=float))
        if vals.size == 0:
            raise InvalidParameter("empirical distribution needs at least one value")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameter("empirical values must be finite")
        self.values = vals
        self.source = source
        self.points, counts = np.unique(vals, return_counts=True)
        self.weights = counts / vals.size
        self._finish()
        self.symmetry_center = None

    @property
    def params(self):
        return {"source": self.source, "n": int(self.values.size)}

    def __eq__(self, other):
        return isinstance(other, Empirical) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def quantile(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        n = self.values.size
        if alpha.ndim == 0:
            return float(self.values[order_index(n, float(alpha)) - 1])
        return np.array([self.values[order_index(n, float(a)) - 1] for a in alpha.ravel()]).reshape(alpha.shape)

    def from_uniform(self, u):
        # bootstrap resampling: index floor(u * n) is uniform on the observations
        u = np.asarray(u, dtype=float)
        idx = np.minimum((u * self.values.size).astype(np.int64), self.values.size - 1)
        return self.values[idx]


def load_empirical(path) -> Empirical:
    """Read one decimal literal per line; blank lines are skipped."""
    path = Path(path)
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                val = float(text)
            except ValueError:
                raise InvalidParameter(f"{path}:{lineno}: not a decimal literal: {text!r}") from None
            if not math.isfinite(val):
                raise InvalidParameter(f"{path}:{lineno}: non-finite value {text!r}")
            values.append(val)
    return Empirical(values, source=str(path))


_KINDS = {
    "normal": Normal,
    "cauchy": Cauchy,
    "uniform": Uniform,
    "two_point": TwoPoint,
}


def build_distribution(kind: str, **params) -> Distribution:
    if kind == "empirical":
        if "path" in params:
            return load_empirical(params["path"])
        return Empirical(params["values"])
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise InvalidParameter(f"unknown distribution kind {kind!r}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {kind}: {exc}") from None
