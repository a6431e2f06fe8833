"""Numerical forecast of the expected number of clusters.

Evaluates the recurrence T_i = T_{i-1} + P_i*, where P_i* bounds the
probability that read i fails to join any overlapping cluster and becomes an
anchor itself.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .cluster_engine import int_floor


@dataclass
class PredictorInputs:
    n_reads: int
    read_len: int
    genome_len: int
    alpha: float = 0.5
    beta: float = 0.95
    epsilon: float = 0.01

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if not 0.5 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0.5, 1]")

    @property
    def overlap_len(self):
        """Expected length of a valid overlap, rounded to integer support."""
        return int((1 + self.alpha) / 2 * self.read_len + 0.5)

    @property
    def max_mismatches(self):
        return int_floor((1 - self.beta) * self.overlap_len)


@dataclass
class ClusterForecast:
    t: np.ndarray  # T_0 .. T_N
    p: np.ndarray  # P_i* per step (p[0] unused)

    @property
    def total(self):
        return float(self.t[-1])

    def tau(self):
        return self.total / (len(self.t) - 1)


def log_binom_pmf(n, p):
    """log pmf of Binomial(n, p) over the whole support, in log space."""
    if p == 0.0 or p == 1.0:
        out = np.full(n + 1, -np.inf)
        out[n if p else 0] = 0.0
        return out
    k = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        return (
            gammaln(n + 1)
            - gammaln(k + 1)
            - gammaln(n - k + 1)
            + k * np.log(p)
            + (n - k) * np.log1p(-p)
        )


def binom_pmf(n, k, p):
    """Exact-support binomial pmf, evaluated in log space."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    return float(np.exp(log_binom_pmf(n, p)[k]))


def _log_tail_table(n, p):
    """log Pr[X >= j] for j in 0..n+1."""
    if p == 0.0:
        lt = np.full(n + 2, -np.inf)
        lt[0] = 0.0
        return lt
    lp = log_binom_pmf(n, p)
    lt = np.full(n + 2, -np.inf)
    acc = -np.inf
    for j in range(n, -1, -1):
        acc = np.logaddexp(acc, lp[j])
        lt[j] = acc
    lt[0] = 0.0
    return lt


def binom_tail(n, k, p):
    """Upper tail Pr[X >= k] for X ~ Binomial(n, p)."""
    if not 0 <= k <= n + 1:
        raise ValueError("need 0 <= k <= n+1")
    return float(np.exp(_log_tail_table(n, p)[k]))


class _Tables:
    """Memoized pieces of the anchor-probability formula.

    A read with x errors in the expected overlap joins a candidate whose own
    error count keeps the total at or below the allowed maximum m; the
    candidate therefore fails exactly when its errors reach m + 1 - x.
    """

    def __init__(self, inputs):
        n = inputs.overlap_len
        eps = inputs.epsilon
        self.m = inputs.max_mismatches
        self.log_pmf = log_binom_pmf(n, eps)
        self.log_tail = _log_tail_table(n, eps)
        self.c_per_anchor = (
            2 * (1 - inputs.alpha) * inputs.read_len / inputs.genome_len
        )
        # per-x pieces of the sum over x <= m
        self.pmf_x = np.exp(self.log_pmf[: self.m + 1])
        self.log_tail_mx = self.log_tail[self.m + 1 - np.arange(self.m + 1)]
        self.tail_m = float(np.exp(self.log_tail[self.m + 1]))

    def p_star(self, t_prev):
        c = self.c_per_anchor * t_prev
        if c == 0:
            return 1.0  # no candidate anchors: the sum telescopes to 1
        total = self.tail_m
        for x in range(self.m + 1):
            lt = self.log_tail_mx[x]
            if lt == -np.inf:
                term = 0.0  # failure impossible: the candidate always joins
            else:
                term = self.pmf_x[x] * math.exp(c * lt)
            total += term
        return min(total, 1.0)


def step_probability(t_prev, inputs):
    """P_i*: probability that the next read starts a new cluster, given the
    expected number of clusters so far."""
    if t_prev < 0:
        raise ValueError("t_prev must be >= 0")
    return _Tables(inputs).p_star(t_prev)


def expected_clusters(inputs):
    """Evaluate the cluster-count recurrence for all reads."""
    if inputs.n_reads < 1:
        raise ValueError("need at least one read")
    tables = _Tables(inputs)
    n = inputs.n_reads
    t = np.empty(n + 1)
    p = np.zeros(n + 1)
    t[0] = 0.0
    t[1] = 1.0
    p[1] = 1.0
    cur = 1.0
    # tight loop: pull pieces into locals
    m = tables.m
    pmf_x = tables.pmf_x
    log_tail_mx = tables.log_tail_mx
    tail_m = tables.tail_m
    c_per = tables.c_per_anchor
    exp = math.exp
    finite = [
        (float(pmf_x[x]), float(log_tail_mx[x]))
        for x in range(m + 1)
        if log_tail_mx[x] != -np.inf
    ]
    for i in range(2, n + 1):
        c = c_per * cur
        if c > 0:
            total = tail_m
            for w, lt in finite:
                total += w * exp(c * lt)
        else:
            total = 1.0  # no candidate anchors: the sum telescopes to 1
        if total > 1.0:
            total = 1.0
        p[i] = total
        cur += total
        t[i] = cur
    return ClusterForecast(t=t, p=p)


def suggest_beta(epsilon):
    """Similarity cutoff keeping same-locus reads joinable: 1 - 2*epsilon."""
    if not 0 <= epsilon < 0.25:
        raise ValueError("epsilon must be in [0, 0.25)")
    return 1.0 - 2.0 * epsilon
