"""Monte-Carlo simulation of latency and computations under the delay model.

Worker ``i`` waits ``X_i ~ Exp(mu)`` and then finishes one row-vector product
every ``tau``.  A trial reports the latency ``T`` at which the master can
decode and how many products each worker had completed by then (partial
products in flight at ``T`` are not counted).
"""

from dataclasses import dataclass, field
import heapq
import math

import numpy as np

from . import ltcode, strategies
from .analysis import DelayParams
from .exceptions import InvalidParameterError
from .utils import spawn

__all__ = [
    "DelayParams", "Fixed", "Coupled", "TrialOutcome", "MonteCarloResult",
    "simulate_lt_trial", "simulate_mds_trial", "simulate_rep_trial",
    "event_merge_latency", "run_monte_carlo",
]

_EPS = 1e-9


@dataclass(frozen=True)
class Fixed:
    """Decode after exactly ``ceil((1 + epsilon) * m)`` products."""

    epsilon: float = 0.0

    def threshold(self, m):
        return math.ceil((1.0 + self.epsilon) * m - _EPS)


@dataclass(frozen=True)
class Coupled:
    """Decode when a freshly drawn LT graph actually peels to completion."""

    c: float = ltcode.DEFAULT_C
    delta: float = ltcode.DEFAULT_DELTA


@dataclass
class TrialOutcome:
    latency: float
    counts: np.ndarray
    m_d: int = None
    cap: int = None
    decoded: bool = True

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def cap_bound(self):
        """True when some worker had already exhausted its stored rows at ``T``."""
        return self.cap is not None and bool((self.counts >= self.cap).any())


def _draw_starts(rng, params, X, start_sampler):
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.shape != (params.p,):
            raise InvalidParameterError(f"forced X must have length p={params.p}")
        return X
    if start_sampler is not None:
        return np.asarray(start_sampler(rng, params.p), dtype=float)
    return rng.exponential(1.0 / params.mu, size=params.p)


def _completed(T, X, tau, load):
    """Products finished by time T (floor, clipped to [0, load])."""
    done = np.floor(np.maximum(T - X, 0.0) / tau + _EPS).astype(np.int64)
    return np.minimum(done, load)


def lt_cap(m, p, alpha):
    return math.ceil(alpha * m / p)


def simulate_lt_trial(m, params, alpha=2.0, m_d_mode=None, seed=None, X=None,
                      start_sampler=None, dist=None):
    """One LT trial.

    ``m_d_mode`` is :class:`Fixed`, :class:`Coupled` (default) or an explicit
    integer threshold.  In coupled mode each worker's rows are a contiguous
    block of a fresh encoding graph, products arrive in merged completion
    order, and the decoder decides when to stop.
    """
    if m_d_mode is None:
        m_d_mode = Coupled()
    p, tau = params.p, params.tau
    cap = lt_cap(m, p, alpha)
    rng_x, rng_g = [np.random.default_rng(s) for s in spawn(seed, 2)]
    Xs = _draw_starts(rng_x, params, X, start_sampler)

    times = Xs[:, None] + tau * np.arange(1, cap + 1)[None, :]
    # stable sort over worker-major layout breaks ties by ascending worker index
    order = np.argsort(times.ravel(), kind="stable")

    if isinstance(m_d_mode, Coupled):
        if dist is None:
            dist = ltcode.build_degree_distribution(m, m_d_mode.c, m_d_mode.delta)
        graph = ltcode.generate_graph(m, alpha, dist, seed=rng_g, m_e=p * cap)
        m_d = ltcode.symbols_needed(graph, order)
        if m_d < 0:
            return TrialOutcome(latency=math.inf, counts=np.full(p, cap, dtype=np.int64),
                                m_d=None, cap=cap, decoded=False)
    elif isinstance(m_d_mode, Fixed):
        m_d = m_d_mode.threshold(m)
    else:
        m_d = int(m_d_mode)

    if m_d > p * cap:
        raise InvalidParameterError(
            f"threshold m_d={m_d} exceeds total stored rows p*ceil(alpha*m/p)={p * cap}"
        )
    if m_d < 1:
        raise InvalidParameterError(f"threshold must be >= 1, got {m_d}")
    first = order[:m_d]
    counts = np.bincount(first // cap, minlength=p).astype(np.int64)
    latency = float(times.ravel()[first[-1]])
    return TrialOutcome(latency=latency, counts=counts, m_d=int(m_d), cap=cap)


def _fastest(values, count):
    """Indices of the ``count`` smallest values, ties to the lower index."""
    return np.argsort(values, kind="stable")[:count]


def simulate_mds_trial(m, params, k, seed=None, X=None, start_sampler=None):
    """One (p, k) MDS trial: the k fastest workers finish their m/k products."""
    if not 1 <= k <= params.p:
        raise InvalidParameterError(f"need 1 <= k <= p, got k={k}, p={params.p}")
    if m % k:
        raise InvalidParameterError(f"k={k} must divide m={m}")
    rng = np.random.default_rng(seed)
    Xs = _draw_starts(rng, params, X, start_sampler)
    load = m // k
    winners = _fastest(Xs, k)
    latency = float(Xs[winners[-1]] + params.tau * load)
    counts = _completed(latency, Xs, params.tau, load)
    counts[winners] = load
    return TrialOutcome(latency=latency, counts=counts, cap=load)


def simulate_rep_trial(m, params, r, seed=None, X=None, start_sampler=None):
    """One r-replication trial: every block needs its fastest replica to finish."""
    p = params.p
    if r < 1 or p % r:
        raise InvalidParameterError(f"r={r} must divide p={p}")
    groups = p // r
    if m % groups:
        raise InvalidParameterError(f"p/r={groups} must divide m={m}")
    rng = np.random.default_rng(seed)
    Xs = _draw_starts(rng, params, X, start_sampler)
    load = m // groups
    grouped = Xs.reshape(groups, r)
    leaders = np.argmin(grouped, axis=1) + r * np.arange(groups)
    latency = float(Xs[leaders].max() + params.tau * load)
    counts = _completed(latency, Xs, params.tau, load)
    counts[leaders] = load
    return TrialOutcome(latency=latency, counts=counts, cap=load)


def event_merge_latency(X, tau, loads, is_done):
    """Reference engine: pop completions in time order until ``is_done(counts)``.

    ``loads[i]`` caps worker i.  Returns ``(T, counts)`` or ``(inf, counts)``
    if every stream drains first.
    """
    X = np.asarray(X, dtype=float)
    counts = np.zeros(len(X), dtype=np.int64)
    heap = [(X[i] + tau, i) for i in range(len(X)) if loads[i] > 0]
    heapq.heapify(heap)
    while heap:
        t, i = heapq.heappop(heap)
        counts[i] += 1
        if is_done(counts):
            return float(t), counts
        if counts[i] < loads[i]:
            heapq.heappush(heap, (X[i] + (counts[i] + 1) * tau, i))
    return math.inf, counts


def mds_done(k, load):
    return lambda counts: int((counts >= load).sum()) >= k


def rep_done(r, load):
    def done(counts):
        return bool((counts.reshape(-1, r) >= load).any(axis=1).all())
    return done


def lt_done(m_d):
    return lambda counts: int(counts.sum()) >= m_d


@dataclass
class MonteCarloResult:
    spec: strategies.StrategySpec
    m: int
    params: DelayParams
    outcomes: list = field(repr=False)

    @property
    def latencies(self):
        return np.array([o.latency for o in self.outcomes])

    @property
    def computations(self):
        return np.array([o.total for o in self.outcomes])

    @property
    def decoded_mask(self):
        return np.array([o.decoded for o in self.outcomes])

    @property
    def failures(self):
        return int((~self.decoded_mask).sum())

    @property
    def thresholds(self):
        return np.array([o.m_d if o.m_d is not None else -1 for o in self.outcomes])

    def latency_tail(self, grid):
        """Empirical Pr(T > t) for each t in ``grid``."""
        lat = self.latencies
        return np.array([(lat > t).mean() for t in np.asarray(grid, dtype=float)])

    def computation_tail(self, grid):
        comp = self.computations
        return np.array([(comp > c).mean() for c in np.asarray(grid, dtype=float)])

    def summary(self, quantiles=(0.5, 0.9, 0.99)):
        ok = self.decoded_mask
        lat = self.latencies[ok]
        comp = self.computations[ok]
        out = {
            "strategy": self.spec.variant,
            "trials": len(self.outcomes),
            "failures": self.failures,
            "mean_T": float(lat.mean()) if lat.size else math.nan,
            "std_T": float(lat.std(ddof=1)) if lat.size > 1 else 0.0,
            "mean_C": float(comp.mean()) if comp.size else math.nan,
            "std_C": float(comp.std(ddof=1)) if comp.size > 1 else 0.0,
        }
        for q in quantiles:
            out[f"T_q{q:g}"] = float(np.quantile(lat, q)) if lat.size else math.nan
            out[f"C_q{q:g}"] = float(np.quantile(comp, q)) if comp.size else math.nan
        if self.spec.variant == strategies.LT:
            md = self.thresholds[ok]
            out["mean_m_d"] = float(md.mean()) if md.size else math.nan
            out["cap_binding_rate"] = float(np.mean([o.cap_bound for o in self.outcomes]))
        return out


def run_monte_carlo(spec, m, params, trials, seed=None, m_d_mode=None, start_sampler=None):
    """Independent trials of ``spec``; trial t draws from the t-th child of ``seed``."""
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if spec.p != params.p:
        raise InvalidParameterError(f"strategy has p={spec.p} but delay model has p={params.p}")
    children = spawn(seed, trials)
    outcomes = []
    if spec.variant == strategies.LT:
        mode = m_d_mode if m_d_mode is not None else Coupled(spec.c, spec.delta)
        dist = None
        if isinstance(mode, Coupled):
            dist = ltcode.build_degree_distribution(m, mode.c, mode.delta)
        for child in children:
            outcomes.append(simulate_lt_trial(m, params, spec.alpha, mode, seed=child,
                                              start_sampler=start_sampler, dist=dist))
    elif spec.variant == strategies.MDS:
        for child in children:
            outcomes.append(simulate_mds_trial(m, params, spec.k, seed=child,
                                               start_sampler=start_sampler))
    else:
        for child in children:
            outcomes.append(simulate_rep_trial(m, params, spec.replicas, seed=child,
                                               start_sampler=start_sampler))
    return MonteCarloResult(spec=spec, m=m, params=params, outcomes=outcomes)
