"""Row-splitting strategies: uncoded, r-replication, (p, k) MDS, and LT.

Each strategy turns an ``m x n`` matrix into an encoded matrix plus an
:class:`Assignment` of contiguous, equal-sized row blocks to ``p`` workers.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import ltcode
from .exceptions import DecodeFailureError, DimensionMismatchError, InvalidParameterError

UNCODED = "uncoded"
REPLICATION = "replication"
MDS = "mds"
LT = "lt"
VARIANTS = (UNCODED, REPLICATION, MDS, LT)


@dataclass(frozen=True)
class StrategySpec:
    variant: str
    p: int
    r: int = 1
    k: int = 0
    alpha: float = 2.0
    c: float = ltcode.DEFAULT_C
    delta: float = ltcode.DEFAULT_DELTA

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown strategy {self.variant!r}; pick one of {VARIANTS}")
        if int(self.p) != self.p or self.p < 1:
            raise InvalidParameterError(f"p must be a positive integer, got {self.p}")
        if self.variant == REPLICATION and (self.r < 1 or self.p % self.r):
            raise InvalidParameterError(f"replication needs r >= 1 dividing p={self.p}, got r={self.r}")
        if self.variant == MDS and not 1 <= self.k <= self.p:
            raise InvalidParameterError(f"MDS needs 1 <= k <= p={self.p}, got k={self.k}")
        if self.variant == LT and not self.alpha > 1:
            raise InvalidParameterError(f"LT needs alpha > 1, got {self.alpha}")

    @classmethod
    def uncoded(cls, p):
        return cls(REPLICATION, p, r=1)

    @classmethod
    def replication(cls, p, r):
        return cls(REPLICATION, p, r=r)

    @classmethod
    def mds(cls, p, k):
        return cls(MDS, p, k=k)

    @classmethod
    def lt(cls, p, alpha=2.0, c=ltcode.DEFAULT_C, delta=ltcode.DEFAULT_DELTA):
        return cls(LT, p, alpha=alpha, c=c, delta=delta)

    @property
    def replicas(self):
        return 1 if self.variant == UNCODED else self.r

    def encoded_rows(self, m):
        if self.variant in (UNCODED, REPLICATION):
            return m
        if self.variant == MDS:
            return m * self.p // self.k
        return lt_encoded_rows(m, self.p, self.alpha)

    def to_dict(self):
        out = {"variant": self.variant, "p": self.p}
        if self.variant == REPLICATION:
            out["r"] = self.r
        elif self.variant == MDS:
            out["k"] = self.k
        elif self.variant == LT:
            out.update(alpha=self.alpha, c=self.c, delta=self.delta)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class Assignment:
    """Worker ``w`` holds encoded rows ``starts[w] : starts[w] + rows_per_worker``.

    ``block_of[w]`` names the logical block the worker holds; replicas of the
    same block share a block id (and a start index).
    """

    m_e: int
    rows_per_worker: int
    starts: tuple
    block_of: tuple = field(default=())

    @property
    def p(self):
        return len(self.starts)

    def rows(self, w):
        return np.arange(self.starts[w], self.starts[w] + self.rows_per_worker)

    def workers_for_block(self, b):
        return [w for w, blk in enumerate(self.block_of) if blk == b]


def replication_plan(m, p, r):
    """Split ``m`` rows into p/r blocks; workers ``b*r .. b*r + r - 1`` all hold block b."""
    if r < 1 or p % r:
        raise InvalidParameterError(f"r={r} must divide p={p}")
    groups = p // r
    if m % groups:
        raise InvalidParameterError(f"p/r={groups} must divide m={m}")
    size = m // groups
    block_of = tuple(w // r for w in range(p))
    return Assignment(m_e=m, rows_per_worker=size,
                      starts=tuple(b * size for b in block_of), block_of=block_of)


def contiguous_plan(m_e, p):
    if m_e % p:
        raise InvalidParameterError(f"p={p} must divide the {m_e} encoded rows")
    size = m_e // p
    return Assignment(m_e=m_e, rows_per_worker=size,
                      starts=tuple(w * size for w in range(p)), block_of=tuple(range(p)))


def mds_plan(m, p, k):
    _check_mds(m, p, k)
    return contiguous_plan(m * p // k, p)


def lt_encoded_rows(m, p, alpha):
    """ceil(alpha*m) rounded up to a multiple of p so every worker gets the same load."""
    return p * math.ceil(math.ceil(alpha * m) / p)


def lt_plan(m, p, alpha):
    return contiguous_plan(lt_encoded_rows(m, p, alpha), p)


def plan(spec, m):
    if spec.variant == UNCODED:
        return replication_plan(m, spec.p, 1)
    if spec.variant == REPLICATION:
        return replication_plan(m, spec.p, spec.r)
    if spec.variant == MDS:
        return mds_plan(m, spec.p, spec.k)
    return lt_plan(m, spec.p, spec.alpha)


def _check_mds(m, p, k):
    if not 1 <= k <= p:
        raise InvalidParameterError(f"need 1 <= k <= p, got k={k}, p={p}")
    if m % k:
        raise InvalidParameterError(f"k={k} must divide m={m}")


def mds_generator(p, k, seed=None, parity=None):
    """Systematic generator ``[I_k; P]`` with Gaussian parity rows unless ``parity`` is given."""
    if parity is None:
        parity = np.random.default_rng(seed).standard_normal((p - k, k))
    parity = np.asarray(parity, dtype=float).reshape(p - k, k)
    return np.vstack([np.eye(k), parity])


def mds_encode(A, p, k, seed=None, parity=None):
    """Encode A into p blocks of m/k rows; returns ``(A_e, G)`` with ``A_e`` of m*p/k rows.

    Block i of ``A_e`` is ``sum_j G[i, j] * A_j`` where ``A_j`` is the j-th row
    block of A, so blocks 0..k-1 are A itself.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {A.shape}")
    m = A.shape[0]
    _check_mds(m, p, k)
    G = mds_generator(p, k, seed=seed, parity=parity)
    blocks = A.reshape(k, m // k, A.shape[1])
    coded = np.einsum("ij,jrn->irn", G[k:], blocks)
    out = np.concatenate([A.astype(np.result_type(A.dtype, np.float64)),
                          coded.reshape(-1, A.shape[1])])
    return out, G


def mds_decode(results, block_ids, G):
    """Recover ``A @ x`` from any k block products ``results[i] = (A_e @ x)[block_ids[i]]``.

    Systematic blocks pass straight through; otherwise the k x k system formed
    by the matching rows of ``G`` is solved directly.
    """
    k = G.shape[1]
    block_ids = [int(b) for b in block_ids]
    if len(block_ids) != k or len(set(block_ids)) != k:
        raise InvalidParameterError(f"need exactly {k} distinct blocks, got {block_ids}")
    Y = np.asarray([np.asarray(r, dtype=float) for r in results])
    order = np.argsort(block_ids)
    block_ids = [block_ids[i] for i in order]
    Y = Y[order]
    if block_ids == list(range(k)):
        return Y.reshape(-1)
    sub = G[block_ids]
    try:
        flat = Y.reshape(k, -1)
        solved = np.linalg.solve(sub, flat)
    except np.linalg.LinAlgError as exc:
        raise DecodeFailureError(f"blocks {block_ids} give a singular system") from exc
    if not np.all(np.isfinite(solved)):
        raise DecodeFailureError(f"blocks {block_ids} give a singular system")
    return solved.reshape(-1)


def replication_decode(block_results):
    """Concatenate the first-finished replica of each block, in block order."""
    return np.concatenate([np.asarray(block_results[b], dtype=float)
                           for b in sorted(block_results)])
