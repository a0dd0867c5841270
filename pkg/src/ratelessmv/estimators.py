"""Estimator-style facade: ``fit`` encodes a matrix, ``predict`` multiplies under stragglers.

Each ``predict`` call draws fresh shifted-exponential worker delays, collects
products in simulated arrival order and decodes from the earliest ones, so
the output is ``X @ A.T`` recovered exactly as the coded pipeline would.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import ltcode, strategies
from .exceptions import DecodeFailureError, InvalidParameterError
from .utils import check_positive


class CodedMatVec(BaseEstimator):
    """Straggler-tolerant matrix-vector multiplication.

    Parameters
    ----------
    strategy : {"lt", "mds", "replication", "uncoded"}
    p : number of workers
    alpha, c, delta : LT redundancy and Robust Soliton parameters
    k : MDS dimension (defaults to ``p // 2``)
    r : replication factor
    mu, tau : delay model, initial delay rate and time per row
    random_state : seed for the code construction and the delay draws

    After ``predict``, ``last_run_`` holds the latency, the total number of
    computed rows and the number of products the decoder consumed.
    """

    def __init__(self, strategy="lt", p=10, alpha=2.0, k=None, r=2, c=ltcode.DEFAULT_C,
                 delta=ltcode.DEFAULT_DELTA, mu=0.2, tau=0.005, random_state=None):
        self.strategy = strategy
        self.p = p
        self.alpha = alpha
        self.k = k
        self.r = r
        self.c = c
        self.delta = delta
        self.mu = mu
        self.tau = tau
        self.random_state = random_state

    def _spec(self):
        if self.strategy == "lt":
            return strategies.StrategySpec.lt(self.p, self.alpha, self.c, self.delta)
        if self.strategy == "mds":
            k = self.k if self.k is not None else max(self.p // 2, 1)
            return strategies.StrategySpec.mds(self.p, k)
        if self.strategy == "replication":
            return strategies.StrategySpec.replication(self.p, self.r)
        if self.strategy == "uncoded":
            return strategies.StrategySpec.uncoded(self.p)
        raise InvalidParameterError(f"unknown strategy {self.strategy!r}")

    def fit(self, A, y=None):
        A = check_array(A, dtype=np.float64)
        check_positive(self.mu, "mu")
        check_positive(self.tau, "tau")
        spec = self._spec()
        m = A.shape[0]
        code_seed, delay_seed = np.random.SeedSequence(self.random_state).spawn(2)
        self.spec_ = spec
        self.assignment_ = strategies.plan(spec, m)
        self.graph_ = None
        self.generator_ = None
        if spec.variant == strategies.LT:
            dist = ltcode.build_degree_distribution(m, spec.c, spec.delta)
            self.graph_ = ltcode.generate_graph(m, spec.alpha, dist, seed=code_seed,
                                                m_e=self.assignment_.m_e)
            self.encoded_ = ltcode.encode_matrix(A, self.graph_)
        elif spec.variant == strategies.MDS:
            seed = int(code_seed.generate_state(1)[0])
            self.encoded_, self.generator_ = strategies.mds_encode(A, spec.p, spec.k, seed=seed)
        else:
            self.encoded_ = A.copy()
        self._rng = np.random.default_rng(delay_seed)
        self.n_rows_, self.n_features_in_ = A.shape
        return self

    def predict(self, X):
        """``X @ A.T`` for a batch ``X`` of shape (q, n); a 1-d ``X`` returns shape (m,)."""
        check_is_fitted(self, "encoded_")
        one_d = np.ndim(X) == 1
        X = check_array(np.atleast_2d(X), dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidParameterError(f"X has {X.shape[1]} features, A has {self.n_features_in_}")
        products = self.encoded_ @ X.T
        if self.spec_.variant == strategies.LT:
            B = self._decode_lt(products)
        else:
            B = self._decode_blocks(products)
        B = np.asarray(B).reshape(self.n_rows_, -1).T
        return B[0] if one_d else B

    def _arrivals(self):
        a = self.assignment_
        starts = self._rng.exponential(1.0 / self.mu, size=a.p)
        rows = np.arange(a.rows_per_worker)
        times = starts[:, None] + self.tau * (rows[None, :] + 1)
        return starts, times

    def _decode_lt(self, products):
        a = self.assignment_
        _, times = self._arrivals()
        index = np.asarray(a.starts)[:, None] + np.arange(a.rows_per_worker)[None, :]
        order = np.argsort(times.ravel(), kind="stable")
        flat_times = times.ravel()[order]
        flat_index = index.ravel()[order]
        state = ltcode.DecoderState(self.graph_)
        for pos, j in enumerate(flat_index):
            state.ingest(int(j), products[j])
            if state.complete:
                T = flat_times[pos]
                self.last_run_ = {"latency": float(T), "computations": int((times <= T).sum()),
                                  "results_used": state.received}
                return state.result()
        raise DecodeFailureError(
            f"all {a.m_e} encoded products received but only {state.decoded_count} of "
            f"{self.n_rows_} sources decoded")

    def _decode_blocks(self, products):
        a = self.assignment_
        spec = self.spec_
        starts, times = self._arrivals()
        finish = times[:, -1]
        blocks = {}
        used = 0
        needed = spec.k if spec.variant == strategies.MDS else a.p // spec.replicas
        T = None
        for w in np.argsort(finish, kind="stable"):
            b = a.block_of[w]
            if b in blocks:
                continue
            blocks[b] = products[a.starts[w]:a.starts[w] + a.rows_per_worker]
            used += a.rows_per_worker
            if len(blocks) == needed:
                T = finish[w]
                break
        self.last_run_ = {"latency": float(T), "computations": int((times <= T + 1e-12).sum()),
                          "results_used": used}
        if spec.variant == strategies.MDS:
            ids = sorted(blocks)
            return strategies.mds_decode([blocks[b] for b in ids], ids, self.generator_)
        return strategies.replication_decode(blocks)
