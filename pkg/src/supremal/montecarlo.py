"""Simulation of sequential estimator paths and one-sided checks of the tail bounds.

Replication ``j`` of a scenario draws ``X_1..X_N`` from the substream
``(seed, j)``.  Two routes reduce a path:

* ``simulate_paths`` runs the exact sequential minimizers and returns real
  valued path statistics.  Exact for every score, but slow for smooth scores
  because each prefix is re-solved.
* ``estimate_sup_tails`` only needs to know whether ``m_k`` crosses the
  thresholds ``m +- x``.  With ``S_k(t)`` the running sum of ``phi(t - X_i)``,
  the smallest minimizer satisfies ``m_k > t`` iff ``S_k(t) < 0`` and
  ``m_k < t`` iff the left-limit sum is ``> 0`` (exact argmin when it is 0).
  Quantile scores use integer counts and the mean uses the running average
  itself, so both routes agree bit for bit on those scores.

Replications are processed in fixed chunks and combined in chunk order, so the
output does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, List, Optional, Sequence

import numpy as np
from scipy import stats

from .bounds import EVENT_KIND, BoundValue
from .distributions import open_uniforms, order_index
from .errors import InvalidParameter, MismatchedGrid, SupremalError
from .estimator import Sample, argmin_extremes, sequential_argmins
from .population import PopulationModel
from .scores import ScoreKind

CHUNK = 250
ABORT_LIMIT = 1e-3
TAIL_KINDS = ("sup", "inf", "abs", "point")


@dataclass(frozen=True)
class Scenario:
    model: PopulationModel
    n: int
    horizon: int
    x_grid: tuple
    replications: int
    seed: int
    epsilon: float = 0.5
    name: str = ""

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"start index n must be a positive integer, got {self.n}")
        if int(self.horizon) != self.horizon or self.horizon < self.n:
            raise InvalidParameter(f"horizon N={self.horizon} must be an integer >= n={self.n}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidParameter(f"replications must be a positive integer, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter(f"seed must be a 64-bit unsigned value, got {self.seed}")
        xs = tuple(float(x) for x in self.x_grid)
        if any(x <= 0 for x in xs) or any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidParameter(f"x_grid must be strictly positive and increasing, got {xs}")
        if not self.epsilon > 0:
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "x_grid", xs)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class PathStatistics:
    replication: int
    sup_abs: float
    sup_signed: float
    inf_signed: float
    last_exit: int
    censored: bool
    path: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    error: Optional[str] = None

    @property
    def aborted(self) -> bool:
        return self.error is not None


def clopper_pearson(k: int, R: int, level: float):
    """Exact two-sided binomial interval."""
    if not 0.0 < level < 1.0:
        raise InvalidParameter(f"confidence level must lie in (0, 1), got {level}")
    if R < 1:
        return 0.0, 1.0
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2.0, k, R - k + 1))
    hi = 1.0 if k == R else float(stats.beta.ppf(1.0 - a / 2.0, k + 1, R - k))
    return lo, hi


@dataclass(frozen=True)
class TailEstimate:
    kind: str
    n: int
    x: float
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    R: int
    N: int
    seed: int
    censored_fraction: float
    aborted: int = 0


def _draw(model: PopulationModel, seed: int, reps: Sequence[int], N: int) -> np.ndarray:
    u = np.stack([open_uniforms(seed, j, N) for j in reps])
    return np.asarray(model.dist.from_uniform(u), dtype=float)


def last_exit_time(deviations, epsilon: float, n: int = 1) -> int:
    """Largest ``k`` with ``|m_k - m| > epsilon`` where ``deviations[i]`` is index ``n + i``; 0 if none."""
    hit = np.flatnonzero(np.abs(np.asarray(deviations, dtype=float)) > epsilon)
    return 0 if hit.size == 0 else int(n + hit[-1])


# -- exact route -------------------------------------------------------------------

def _one_path(scenario: Scenario, j: int, keep_path: bool) -> PathStatistics:
    model = scenario.model
    x = _draw(model, scenario.seed, [j], scenario.horizon)[0]
    try:
        est = sequential_argmins(x, model.loss, start=scenario.n)
    except SupremalError as exc:
        nan = math.nan
        return PathStatistics(j, nan, nan, nan, 0, False, error=f"{type(exc).__name__}: {exc}")
    dev = est - model.m
    L = last_exit_time(dev, scenario.epsilon, scenario.n)
    return PathStatistics(
        replication=j,
        sup_abs=float(np.max(np.abs(dev))),
        sup_signed=float(np.max(dev)),
        inf_signed=float(np.min(dev)),
        last_exit=L,
        censored=L == scenario.horizon,
        path=est if keep_path else None,
    )


def simulate_paths(scenario: Scenario, workers: int = 1, keep_path: bool = False) -> Iterator[PathStatistics]:
    """Exact per-replication statistics over ``k in [n, N]``, in replication order."""
    reps = range(scenario.replications)
    if workers <= 1:
        for j in reps:
            yield _one_path(scenario, j, keep_path)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda j: _one_path(scenario, j, keep_path), reps)


# -- crossing route ----------------------------------------------------------------

@lru_cache(maxsize=64)
def _order_indices(N: int, alpha: float) -> np.ndarray:
    return np.array([order_index(k, alpha) for k in range(1, N + 1)], dtype=np.int64)


class _Crossings:
    """Whether ``m_k`` lies above or below a threshold, for every replication and ``k in [n, N]``."""

    def __init__(self, model: PopulationModel, X: np.ndarray, n: int):
        self.model, self.X, self.n = model, X, n
        self.N = X.shape[1]
        self.aborted = np.zeros(X.shape[0], dtype=bool)
        kind = model.score.kind
        if kind is ScoreKind.IDENTITY:
            ks = np.arange(1, self.N + 1)
            self.estimates = (np.cumsum(X, axis=1) / ks)[:, n - 1:]
        elif kind is ScoreKind.QUANTILE_STEP:
            self.jk = _order_indices(self.N, float(model.score.params["alpha"]))[n - 1:]

    def above(self, t: float) -> np.ndarray:
        kind = self.model.score.kind
        if kind is ScoreKind.IDENTITY:
            return self.estimates > t
        if kind is ScoreKind.QUANTILE_STEP:
            counts = np.cumsum(self.X <= t, axis=1)[:, self.n - 1:]
            return counts < self.jk
        S = np.cumsum(self.model.score.value(t - self.X), axis=1)[:, self.n - 1:]
        return S < 0.0

    def below(self, t: float) -> np.ndarray:
        kind = self.model.score.kind
        if kind is ScoreKind.IDENTITY:
            return self.estimates < t
        if kind is ScoreKind.QUANTILE_STEP:
            counts = np.cumsum(self.X < t, axis=1)[:, self.n - 1:]
            return counts >= self.jk
        score = self.model.score
        SL = np.cumsum(score.left_limit(t - self.X), axis=1)[:, self.n - 1:]
        out = SL > 0.0
        for r, i in zip(*np.nonzero(SL == 0.0)):
            k = self.n + int(i)
            try:
                out[r, i] = argmin_extremes(Sample(self.X[r, :k]), self.model.loss).smallest < t
            except SupremalError:
                self.aborted[r] = True
        return out


def _chunks(R: int) -> List[range]:
    return [range(a, min(a + CHUNK, R)) for a in range(0, R, CHUNK)]


def _run_chunks(func, R: int, workers: int):
    parts = _chunks(R)
    if workers <= 1:
        return [func(p) for p in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, parts))


def _tail_chunk(scenario: Scenario, reps: range, kinds):
    model = scenario.model
    X = _draw(model, scenario.seed, reps, scenario.horizon)
    cr = _Crossings(model, X, scenario.n)
    events = {}
    for x in scenario.x_grid:
        up, lo = cr.above(model.m + x), cr.below(model.m - x)
        per_kind = {
            "sup": (up.any(axis=1), up[:, -1]),
            "inf": (lo.any(axis=1), lo[:, -1]),
            "abs": ((up | lo).any(axis=1), up[:, -1] | lo[:, -1]),
            # the single-index event has no horizon to be censored by
            "point": (up[:, 0] | lo[:, 0], np.zeros(up.shape[0], dtype=bool)),
        }
        for kind in kinds:
            events[(kind, x)] = per_kind[kind]
    keep = ~cr.aborted
    counts = {key: (int(np.count_nonzero(hit & keep)), int(np.count_nonzero(cen & keep)))
              for key, (hit, cen) in events.items()}
    return counts, int(np.count_nonzero(cr.aborted))


def estimate_sup_tails(scenario: Scenario, kinds=("abs",), level: float = 0.99,
                       workers: int = 1) -> dict:
    """Tail estimates keyed by ``(kind, x)`` for every ``x`` in the scenario grid.

    ``censored_fraction`` is the share of replications whose event still holds at ``k = N``.
    """
    for kind in kinds:
        if kind not in TAIL_KINDS:
            raise InvalidParameter(f"tail kind must be one of {TAIL_KINDS}, got {kind!r}")
    results = _run_chunks(lambda reps: _tail_chunk(scenario, reps, kinds), scenario.replications, workers)
    aborted = sum(a for _, a in results)
    R_eff = scenario.replications - aborted
    out = {}
    for key in results[0][0]:
        hits = sum(c[key][0] for c, _ in results)
        cens = sum(c[key][1] for c, _ in results)
        lo, hi = clopper_pearson(hits, R_eff, level)
        out[key] = TailEstimate(
            kind=key[0], n=scenario.n, x=key[1], hits=hits,
            p_hat=hits / R_eff if R_eff else math.nan,
            ci_low=lo, ci_high=hi, R=R_eff, N=scenario.horizon, seed=scenario.seed,
            censored_fraction=cens / R_eff if R_eff else math.nan, aborted=aborted,
        )
    return out


def estimate_sup_tail(scenario: Scenario, x: float, kind: str = "abs", level: float = 0.99,
                      workers: int = 1) -> TailEstimate:
    """``P(sup_{n<=k<=N} |m_k - m| > x)`` (or the one-sided versions) with an exact interval."""
    if not x > 0:
        raise InvalidParameter(f"threshold x must be positive, got {x}")
    sc = Scenario(scenario.model, scenario.n, scenario.horizon, (x,), scenario.replications,
                  scenario.seed, scenario.epsilon, scenario.name)
    return estimate_sup_tails(sc, (kind,), level, workers)[(kind, float(x))]


# -- last exit ---------------------------------------------------------------------

@dataclass(frozen=True)
class LastExitSummary:
    epsilon: float
    r: float
    truncated_moment: float
    censored_fraction: float
    relation_violations: int
    replications: int
    aborted: int


def _relation_violations(exceed: np.ndarray, L: np.ndarray, n: int, N: int) -> int:
    # suffix[:, i] is True iff some k >= n + i exceeds epsilon
    suffix = np.flip(np.logical_or.accumulate(np.flip(exceed, axis=1), axis=1), axis=1)
    z = np.arange(1, N + 1)
    lhs = L[:, None] < z[None, :]
    rhs = ~suffix[:, np.maximum(z, n) - n]
    return int(np.count_nonzero(lhs != rhs))


def _last_exit_chunk(scenario: Scenario, reps: range, epsilon: float, r: float):
    model, n, N = scenario.model, scenario.n, scenario.horizon
    X = _draw(model, scenario.seed, reps, N)
    cr = _Crossings(model, X, n)
    exceed = cr.above(model.m + epsilon) | cr.below(model.m - epsilon)
    any_hit = exceed.any(axis=1)
    last = exceed.shape[1] - 1 - np.argmax(np.flip(exceed, axis=1), axis=1)
    L = np.where(any_hit, n + last, 0)
    keep = ~cr.aborted
    bad = _relation_violations(exceed[keep], L[keep], n, N)
    moment = float(np.sum(np.minimum(L[keep], N).astype(float) ** r))
    censored = int(np.count_nonzero((L == N) & keep))
    return moment, censored, bad, int(np.count_nonzero(cr.aborted))


def estimate_last_exit_moment(scenario: Scenario, epsilon: Optional[float] = None, r: float = 1.0,
                              workers: int = 1) -> LastExitSummary:
    """Mean of ``min(L_eps, N)^r`` and the share of paths still exceeding at ``k = N``.

    The relation ``L_eps < z  <=>  max_{max(z,n) <= k <= N} |m_k - m| <= eps`` is
    checked for every integer ``z`` in ``[1, N]`` on every path.
    """
    eps = scenario.epsilon if epsilon is None else float(epsilon)
    if not eps > 0:
        raise InvalidParameter(f"epsilon must be positive, got {eps}")
    if not r > 0:
        raise InvalidParameter(f"order r must be positive, got {r}")
    parts = _run_chunks(lambda reps: _last_exit_chunk(scenario, reps, eps, r), scenario.replications, workers)
    aborted = sum(p[3] for p in parts)
    R_eff = scenario.replications - aborted
    return LastExitSummary(
        epsilon=eps, r=float(r),
        truncated_moment=sum(p[0] for p in parts) / R_eff if R_eff else math.nan,
        censored_fraction=sum(p[1] for p in parts) / R_eff if R_eff else math.nan,
        relation_violations=sum(p[2] for p in parts),
        replications=R_eff, aborted=aborted,
    )


# -- verification --------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationRow:
    scenario: str
    n: int
    x: float
    kind: str
    theorem: str
    raw_bound: float
    clamped_bound: float
    p_hat: float
    ci_low: float
    ci_high: float
    replications: int
    horizon: int
    censored_fraction: float
    seed: int
    passed: bool

    @property
    def margin(self) -> float:
        return self.clamped_bound - self.p_hat


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple
    replications: int
    aborted: int

    @property
    def abort_fraction(self) -> float:
        return self.aborted / self.replications if self.replications else 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and self.abort_fraction <= ABORT_LIMIT

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def verify_bounds(scenario: Scenario, bounds: Sequence[BoundValue], level: float = 0.99,
                  estimates: Optional[dict] = None, workers: int = 1) -> VerificationReport:
    """Pass iff the lower confidence limit of the simulated tail is at most the clamped bound."""
    needed = sorted({EVENT_KIND[b.theorem_id] for b in bounds})
    if estimates is None:
        estimates = estimate_sup_tails(scenario, needed, level, workers) if bounds else {}
    rows = []
    aborted = 0
    for b in bounds:
        kind = EVENT_KIND[b.theorem_id]
        bn, bx = b.inputs.get("n"), b.inputs.get("x")
        est = estimates.get((kind, bx))
        if est is None or bn != scenario.n or est.n != bn:
            raise MismatchedGrid(f"no tail estimate for {b.theorem_id.value} at n={bn}, x={bx}, kind={kind}")
        aborted = est.aborted
        rows.append(VerificationRow(
            scenario=scenario.name, n=bn, x=bx, kind=kind, theorem=b.theorem_id.value,
            raw_bound=b.raw, clamped_bound=b.clamped, p_hat=est.p_hat,
            ci_low=est.ci_low, ci_high=est.ci_high, replications=est.R, horizon=est.N,
            censored_fraction=est.censored_fraction, seed=est.seed,
            passed=bool(est.ci_low <= b.clamped),
        ))
    return VerificationReport(tuple(rows), scenario.replications, aborted)
