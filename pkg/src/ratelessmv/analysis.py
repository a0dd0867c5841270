"""Closed-form latency means, bounds and computation tail bounds.

Setup: worker i starts after ``X_i ~ Exp(mu)`` and then spends ``tau`` per
row-vector product.  Everything below uses exact harmonic numbers; the
``*_approx`` helpers give the logarithmic shorthand for display.
"""

from dataclasses import dataclass
from fractions import Fraction
import math

from .exceptions import InvalidParameterError


@dataclass(frozen=True)
class DelayParams:
    """Shifted-exponential worker delay: Exp(``mu``) start, ``tau`` per task, ``p`` workers."""

    mu: float
    tau: float
    p: int

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive, got {self.mu}")
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if int(self.p) != self.p or self.p < 1:
            raise InvalidParameterError(f"p must be a positive integer, got {self.p}")


class HarmonicTable:
    """Cached harmonic numbers, ``table[j] = H_j`` with ``H_0 = 0``."""

    def __init__(self, size=0):
        self._values = [0.0]
        self.extend(size)

    def extend(self, j):
        total = self._values[-1]
        for v in range(len(self._values), j + 1):
            total += 1.0 / v
            self._values.append(total)

    def __getitem__(self, j):
        if j < 0:
            raise InvalidParameterError(f"harmonic index must be >= 0, got {j}")
        if j >= len(self._values):
            self.extend(j)
        return self._values[j]

    def __len__(self):
        return len(self._values)


_TABLE = HarmonicTable(64)


def harmonic(j):
    """H_j = 1 + 1/2 + ... + 1/j, and 0 for j = 0."""
    if int(j) != j or j < 0:
        raise InvalidParameterError(f"harmonic index must be a non-negative integer, got {j}")
    return _TABLE[int(j)]


def harmonic_exact(j):
    return sum((Fraction(1, v) for v in range(1, j + 1)), Fraction(0))


def exp_order_stat_mean(p, j, mu):
    """Mean of the j-th smallest of p iid Exp(mu) variables."""
    if not 1 <= j <= p:
        raise InvalidParameterError(f"need 1 <= j <= p, got j={j}, p={p}")
    return (harmonic(p) - harmonic(p - j)) / mu


def lt_latency_bounds(m_d, params):
    """(lower, upper) on the mean LT latency when ``m_d`` products are needed."""
    if m_d < 1:
        raise InvalidParameterError(f"m_d must be >= 1, got {m_d}")
    base = params.tau * m_d / params.p
    return base + 1.0 / (params.p * params.mu), base + 1.0 / params.mu + params.tau


def _check_replication(m, p, r):
    if r < 1 or p % r:
        raise InvalidParameterError(f"r={r} must divide p={p}")
    if m % (p // r):
        raise InvalidParameterError(f"p/r={p // r} must divide m={m}")


def _check_mds(m, p, k):
    if not 1 <= k <= p:
        raise InvalidParameterError(f"need 1 <= k <= p, got k={k}, p={p}")
    if m % k:
        raise InvalidParameterError(f"k={k} must divide m={m}")


def rep_latency_mean(m, params, r):
    """E[T] for r-replication: the slowest of p/r groups, each led by its fastest replica.

    The fastest of r Exp(mu) starts is Exp(r*mu), hence the 1/(r*mu) factor.
    """
    _check_replication(m, params.p, r)
    return params.tau * m * r / params.p + harmonic(params.p // r) / (r * params.mu)


def rep_latency_approx(m, params, r):
    return params.tau * m * r / params.p + math.log(params.p / r) / (r * params.mu)


def mds_latency_mean(m, params, k):
    """E[T] for a (p, k) MDS code: k-th fastest start plus m/k tasks."""
    _check_mds(m, params.p, k)
    return params.tau * m / k + exp_order_stat_mean(params.p, k, params.mu)


def mds_latency_approx(m, params, k):
    if k == params.p:
        return math.inf
    return params.tau * m / k + math.log(params.p / (params.p - k)) / params.mu


def uncoded_latency_mean(m, params):
    return rep_latency_mean(m, params, 1)


def mds_theta(params, k, C0):
    p, tau = params.p, params.tau
    return tau * C0 / (p - k) ** 2 - tau / (p - k)


def mds_comp_tail_bound(m, params, k, C0):
    """Lower bound on Pr(C_MDS >= m*p/k - C0); 0 when the bound is vacuous."""
    if k >= params.p:
        raise InvalidParameterError("tail bound undefined for k = p (no redundant workers)")
    _check_mds(m, params.p, k)
    theta = mds_theta(params, k, C0)
    if theta <= 0:
        return 0.0
    return -math.expm1(-params.mu * theta)


def rep_theta(params, r, C0):
    p, tau = params.p, params.tau
    return tau * C0 / (r - 1) ** 2 - tau * p / (r * (r - 1))


def erlang_sf(stages, rate, x):
    """Pr(sum of ``stages`` iid Exp(rate) > x)."""
    if x <= 0:
        return 1.0
    lam = rate * x
    term = math.exp(-lam)
    total = term
    for i in range(1, stages):
        term *= lam / i
        total += term
    return min(total, 1.0)


def rep_comp_tail_bound(m, params, r, C0):
    """Lower bound on Pr(C_rep >= r*m - C0); 0 when the bound is vacuous."""
    if r < 2:
        raise InvalidParameterError("tail bound undefined for r = 1 (uncoded C = m always)")
    _check_replication(m, params.p, r)
    theta = rep_theta(params, r, C0)
    if theta <= 0:
        return 0.0
    return max(0.0, 1.0 - erlang_sf(params.p // r, params.mu, theta))
