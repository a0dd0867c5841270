"""LT (Luby Transform) coding of matrix rows over the reals.

Encoded row ``j`` is the sum of the source rows listed in ``graph.neighbors(j)``.
Because matrix-vector products are linear, the same graph maps ``A @ x`` to
``A_e @ x`` and the peeling decoder recovers ``A @ x`` from any large enough
subset of encoded products.
"""

from collections import deque
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .utils import spawn
from .exceptions import (
    DimensionMismatchError,
    DuplicateSymbolError,
    InvalidIndexError,
    InvalidParameterError,
    NeedMoreSymbols,
)

DEFAULT_C = 0.03
DEFAULT_DELTA = 0.5


@dataclass(frozen=True)
class DegreeDistribution:
    """Normalized Robust Soliton pmf; ``pmf[d - 1]`` is Pr(degree = d)."""

    m: int
    c: float
    delta: float
    R: float
    pmf: np.ndarray = field(repr=False)
    ideal: bool = False

    @property
    def spike(self):
        """Degree carrying the extra mass; None in ideal mode or when it exceeds m."""
        if self.ideal:
            return None
        spike = math.ceil(self.m / self.R)
        return spike if spike <= self.m else None

    @property
    def degrees(self):
        return np.arange(1, self.m + 1)

    def mean(self):
        return float(np.dot(self.degrees, self.pmf))


def robust_soliton_weights(m, c, delta, ideal=False):
    """Unnormalized weights ``rho(d) + t(d)`` for ``d = 1..m`` and the spike parameter R."""
    d = np.arange(1, m + 1, dtype=float)
    rho = np.empty(m)
    rho[0] = 1.0 / m
    rho[1:] = 1.0 / (d[1:] * (d[1:] - 1.0))
    R = c * math.log(m / delta) * math.sqrt(m)
    if ideal:
        return rho, R
    if R >= m:
        raise InvalidParameterError(
            f"R = {R:.4g} >= m = {m}: spike index m/R falls below degree 1"
        )
    spike = math.ceil(m / R)
    t = np.zeros(m)
    t[: spike - 1] = R / (d[: spike - 1] * m)
    if spike <= m:
        t[spike - 1] = R * math.log(R / delta) / m
    # for R < 1 the spike lies beyond degree m and only the 1/d tail remains
    return rho + t, R


def build_degree_distribution(m, c=DEFAULT_C, delta=DEFAULT_DELTA, ideal=False):
    """Robust Soliton distribution over degrees 1..m.

    With ``ideal=True`` the spike term is dropped, leaving the ideal soliton
    ``[1/m, 1/2, 1/6, ...]`` (the ``c -> 0`` limit).
    """
    if int(m) != m or m < 2:
        raise InvalidParameterError(f"m must be an integer >= 2, got {m}")
    if c <= 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    if not 0 < delta <= 1:
        raise InvalidParameterError(f"delta must lie in (0, 1], got {delta}")
    m = int(m)
    weights, R = robust_soliton_weights(m, c, delta, ideal=ideal)
    pmf = weights / weights.sum()
    pmf.setflags(write=False)
    return DegreeDistribution(m=m, c=float(c), delta=float(delta), R=R, pmf=pmf, ideal=ideal)


@dataclass(frozen=True, eq=False)
class EncodingGraph:
    """Bipartite encoding graph stored as CSR: encoded row j -> sorted source rows."""

    m: int
    m_e: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    seed: object = None

    def neighbors(self, j):
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    def degree(self, j):
        return int(self.indptr[j + 1] - self.indptr[j])

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def __eq__(self, other):
        if not isinstance(other, EncodingGraph):
            return NotImplemented
        return (
            self.m == other.m
            and self.m_e == other.m_e
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    @classmethod
    def from_neighbor_sets(cls, m, sets, seed=None):
        """Build a graph from explicit 0-based neighbor sets (mainly for tests)."""
        indptr = [0]
        indices = []
        for s in sets:
            row = sorted(set(int(i) for i in s))
            if not row:
                raise InvalidParameterError("every encoded row needs at least one source")
            if row[0] < 0 or row[-1] >= m:
                raise InvalidParameterError(f"source index out of range [0, {m})")
            indices.extend(row)
            indptr.append(len(indices))
        return cls(
            m=m,
            m_e=len(indptr) - 1,
            indptr=np.asarray(indptr, dtype=np.int64),
            indices=np.asarray(indices, dtype=np.int64),
            seed=seed,
        )


def encoded_row_count(m, alpha):
    return math.ceil(alpha * m)


def generate_graph(m, alpha, dist, seed=None, m_e=None):
    """Draw an LT encoding graph with ``ceil(alpha * m)`` encoded rows.

    Each row draws a degree from ``dist`` and then that many distinct sources
    uniformly at random.  ``m_e`` overrides the row count when a caller needs
    it rounded to a multiple of the worker count.
    """
    if dist.m != m:
        raise InvalidParameterError(f"distribution built for m={dist.m}, graph asked for m={m}")
    if m_e is None:
        if alpha * m < m + 1:
            raise InvalidParameterError(f"alpha * m must be at least m + 1 (alpha={alpha}, m={m})")
        m_e = encoded_row_count(m, alpha)
    if m_e < 1:
        raise InvalidParameterError("need at least one encoded row")
    rng = np.random.default_rng(seed)
    degrees = rng.choice(dist.degrees, size=m_e, p=dist.pmf).astype(np.int64)
    uniforms = rng.random(int(degrees.sum()))
    indptr, indices = _kernels.floyd_sample_rows(m, degrees, uniforms)
    return EncodingGraph(m=m, m_e=int(m_e), indptr=indptr, indices=indices, seed=seed)


def encode_matrix(A, graph):
    """Return ``A_e`` whose row j is the sum of A's rows in ``graph.neighbors(j)``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != graph.m:
        raise DimensionMismatchError(
            f"matrix has shape {A.shape}, graph expects {graph.m} rows"
        )
    rows = np.repeat(np.arange(graph.m_e), graph.degrees)
    out = np.zeros((graph.m_e, A.shape[1]), dtype=np.result_type(A.dtype, np.float64))
    np.add.at(out, rows, A[graph.indices])
    return out


class DecoderState:
    """Incremental peeling decoder.

    Feed encoded products one at a time with :meth:`ingest`; each call peels
    until the ripple (the queue of degree-one symbols) is empty.  Values may be
    scalars or numpy arrays of a common shape.
    """

    def __init__(self, graph):
        self.graph = graph
        self.m = graph.m
        self.received = 0
        self.decoded = {}
        self._seen = set()
        self._residual = {}
        self._value = {}
        self._by_source = [set() for _ in range(graph.m)]
        self.ripple = deque()
        self.trajectory = []

    @property
    def decoded_count(self):
        return len(self.decoded)

    @property
    def complete(self):
        return len(self.decoded) == self.m

    def residual_degree(self, j):
        return len(self._residual[j])

    @property
    def active(self):
        return list(self._residual)

    def ingest(self, encoded_index, value):
        """Add encoded symbol ``encoded_index`` with value ``value`` and peel.

        Raises :class:`DuplicateSymbolError` (state unchanged) for a repeated
        index and :class:`InvalidIndexError` for an index outside the graph.
        """
        j = int(encoded_index)
        if not 0 <= j < self.graph.m_e or j != encoded_index:
            raise InvalidIndexError(f"encoded index {encoded_index!r} not in [0, {self.graph.m_e})")
        if j in self._seen:
            raise DuplicateSymbolError(f"encoded index {j} already ingested")
        self._seen.add(j)
        self.received += 1

        residual = set()
        for i in self.graph.neighbors(j).tolist():
            if i in self.decoded:
                value = value - self.decoded[i]
            else:
                residual.add(i)
        if residual:
            self._residual[j] = residual
            self._value[j] = value
            for i in residual:
                self._by_source[i].add(j)
            if len(residual) == 1:
                self.ripple.append(j)
        self._peel()
        self.trajectory.append(len(self.decoded))
        return self

    def _retire(self, j):
        del self._residual[j]
        del self._value[j]

    def _peel(self):
        while self.ripple:
            j = self.ripple.popleft()
            residual = self._residual.get(j)
            if residual is None or len(residual) != 1:
                continue
            (src,) = residual
            val = self._value[j]
            self._by_source[src].discard(j)
            self._retire(j)
            self.decoded[src] = val
            for t in self._by_source[src]:
                res = self._residual[t]
                res.discard(src)
                self._value[t] = self._value[t] - val
                if not res:
                    self._retire(t)
                elif len(res) == 1:
                    self.ripple.append(t)
            self._by_source[src] = set()

    def result(self):
        """Decoded vector ordered by source index; only valid once complete."""
        if not self.complete:
            raise NeedMoreSymbols(self.decoded_count, self.received)
        return np.array([self.decoded[i] for i in range(self.m)])


def decoder_ingest(state, encoded_index, value, graph=None):
    if graph is not None and graph is not state.graph:
        raise InvalidParameterError("state was built for a different graph")
    return state.ingest(encoded_index, value)


def decode_full(symbols, graph):
    """Decode from an iterable of ``(encoded_index, value)`` pairs.

    Stops at the first point where every source is known and returns
    ``(b, used)``.  Raises :class:`NeedMoreSymbols` if the symbols run out.
    """
    state = DecoderState(graph)
    for j, value in symbols:
        state.ingest(j, value)
        if state.complete:
            return state.result(), state.received
    raise NeedMoreSymbols(state.decoded_count, state.received)


def symbols_needed(graph, order=None):
    """Arrival count at which peeling completes, or -1 if ``order`` is exhausted first.

    Structural shortcut for Monte-Carlo: no values are carried.
    """
    if order is None:
        order = np.arange(graph.m_e, dtype=np.int64)
    _, used = _kernels.peel_trajectory(graph.m, graph.indptr, graph.indices,
                                       np.asarray(order, dtype=np.int64))
    return int(used)


def decode_trajectory(graph, order=None):
    """Decoded-source count after each arrival (structural, no values)."""
    if order is None:
        order = np.arange(graph.m_e, dtype=np.int64)
    traj, used = _kernels.peel_trajectory(graph.m, graph.indptr, graph.indices,
                                          np.asarray(order, dtype=np.int64))
    return traj, int(used)


@dataclass
class OverheadEstimate:
    m: int
    c: float
    delta: float
    alpha: float
    symbols_used: np.ndarray
    trajectories: list = field(repr=False)
    failures: int = 0

    @property
    def completed(self):
        return self.symbols_used[self.symbols_used > 0]

    @property
    def mean_used(self):
        return float(self.completed.mean()) if self.completed.size else math.nan

    @property
    def max_used(self):
        return int(self.completed.max()) if self.completed.size else -1

    @property
    def epsilon(self):
        return self.mean_used / self.m - 1.0


def estimate_overhead(m, c=DEFAULT_C, delta=DEFAULT_DELTA, alpha=2.0, trials=100,
                      seed=None, ideal=False):
    """Empirical decoding threshold and avalanche curves over independent trials.

    Every trial draws a fresh graph and a uniformly random arrival order.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    dist = build_degree_distribution(m, c, delta, ideal=ideal)
    used = np.empty(trials, dtype=np.int64)
    trajectories = []
    for t, child in enumerate(spawn(seed, trials)):
        graph_seed, order_seed = child.spawn(2)
        graph = generate_graph(m, alpha, dist, seed=graph_seed)
        order = np.random.default_rng(order_seed).permutation(graph.m_e)
        traj, n = decode_trajectory(graph, order)
        used[t] = n
        trajectories.append(traj)
    return OverheadEstimate(
        m=m, c=c, delta=delta, alpha=alpha, symbols_used=used,
        trajectories=trajectories, failures=int((used < 0).sum()),
    )
