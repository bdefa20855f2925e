"""Null AUC optimism and effective search complexity of lattice search.

Closed forms use the average-correlation approximation; the binary
building blocks (``r_L_exact``, ``rbar_binary_exact``) are computed exactly
in rational arithmetic; :func:`esc_monte_carlo` estimates everything by
exhaustive maximization on simulated null data. Logarithms are natural.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import BudgetExceededError, Dataset, batch_concordance
from .simgen import SimConfig, gen_null

ENUMERATION_BUDGET = 2**20
CONVOLUTION_BUDGET = 10**4


@dataclass(frozen=True)
class ComplexityEstimate:
    """Search-complexity summary for one ``(p, L[, n])`` cell."""

    p: int
    L: int
    esc: float
    m_eff: float
    rbar: Optional[float]
    source: str
    n: Optional[int] = None
    opt0: Optional[float] = None
    sigma2: Optional[float] = None
    mc_replicates: Optional[int] = None
    mc_se: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "L": self.L,
            "n": self.n,
            "source": self.source,
            "esc": self.esc,
            "opt0": self.opt0,
            "sigma2": self.sigma2,
            "m_eff": self.m_eff,
            "rbar": self.rbar,
            "mc_replicates": self.mc_replicates,
            "mc_se": self.mc_se,
        }


def rbar_closed_form(L: int) -> float:
    """Average AUC correlation ``(6/pi) asin(3L / (4(2L+1)))``."""
    return 6.0 / math.pi * math.asin(3.0 * L / (4.0 * (2 * L + 1)))


def esc_closed_form(p: int, L: int, n: Optional[int] = None) -> ComplexityEstimate:
    """Effective search complexity ``p (1 - rbar) ln(L + 1)`` and ``M_eff = exp(esc)``.

    When ``n`` is given the estimate also carries the matching null optimism
    and the continuous-score variance ``1 / (3n)``.
    """
    if p < 1 or L < 1:
        raise ValueError("need p >= 1 and L >= 1")
    rbar = rbar_closed_form(L)
    esc = p * (1.0 - rbar) * math.log(L + 1)
    return ComplexityEstimate(
        p=p,
        L=L,
        n=n,
        esc=esc,
        m_eff=math.exp(esc),
        rbar=rbar,
        source="closed_form",
        opt0=None if n is None else opt0_closed_form(p, L, n),
        sigma2=None if n is None else 1.0 / (3.0 * n),
    )


def opt0_closed_form(p: int, L: int, n: int) -> float:
    """Null optimism ``sqrt(2 ln M_eff / (3n))``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    esc = p * (1.0 - rbar_closed_form(L)) * math.log(L + 1)
    return math.sqrt(2.0 * esc / (3.0 * n))


def _product_sum_counts(count: int, L: int) -> list:
    """Integer counts of ``sum_{l<=count} B_l W_l`` over all ``(2(L+1))**count`` outcomes."""
    if count * L + 1 > CONVOLUTION_BUDGET:
        raise BudgetExceededError(f"support {count * L + 1} exceeds {CONVOLUTION_BUDGET}")
    single = [L + 2] + [1] * L  # value 0 from B=0 (L+1 ways) or W=0; 1..L once each
    dist = [1]
    for _ in range(count):
        out = [0] * (len(dist) + L)
        for u, a in enumerate(dist):
            if a:
                for v, b in enumerate(single):
                    out[u + v] += a * b
        dist = out
    return dist


def r_L_exact(r: int, p: int, L: int, exact: bool = False):
    """``P(left > right) + P(left = right) / 2`` for independent sums of
    ``r`` and ``p - r`` products ``B W`` with ``B ~ Bernoulli(1/2)`` and
    ``W ~ Uniform{0..L}``.

    Returns a :class:`fractions.Fraction` when ``exact`` is set.
    """
    if not 0 <= r <= p:
        raise ValueError("need 0 <= r <= p")
    left = _product_sum_counts(r, L)
    right = _product_sum_counts(p - r, L)
    right_cum = [0, *itertools.accumulate(right)]
    total = 0  # doubled: wins count 2, ties count 1
    for u, a in enumerate(left):
        below = right_cum[min(u, len(right))]
        tied = right[u] if u < len(right) else 0
        total += a * (2 * below + tied)
    value = Fraction(total, 2 * (2 * (L + 1)) ** p)
    return value if exact else float(value)


def rbar_binary_exact(p: int, L: int, exact: bool = False):
    """``12 (E_R[R_L(R)^2] - 1/4)`` with ``R ~ Binomial(p, 1/2)``, evaluated exactly."""
    expectation = sum(
        Fraction(math.comb(p, r), 2**p) * r_L_exact(r, p, L, exact=True) ** 2 for r in range(p + 1)
    )
    value = 12 * (expectation - Fraction(1, 4))
    return value if exact else float(value)


def _check_budget(p: int, L: int):
    if (L + 1) ** p > ENUMERATION_BUDGET:
        raise BudgetExceededError(f"(L+1)^p = {(L + 1) ** p} exceeds {ENUMERATION_BUDGET}")


def _lattice(p: int, L: int) -> np.ndarray:
    """All of ``{0..L}^p`` in lexicographic order, one vector per row."""
    return np.array(list(itertools.product(range(L + 1), repeat=p)), dtype=np.int64).reshape(-1, p)


def lattice_concordance(data: Dataset, lattice: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Doubled concordance count of every weight vector (row) in ``lattice``."""
    X = data.predictors.astype(np.int64)
    out = np.empty(len(lattice), dtype=np.int64)
    step = max(1, chunk * 200 // max(data.n, 1))
    for start in range(0, len(lattice), step):
        block = lattice[start : start + step]
        out[start : start + len(block)] = batch_concordance(block @ X.T, data.outcomes)
    return out


def exhaustive_max_auc(data: Dataset, L: int):
    """Exact maximizer of the tied AUC over ``{0..L}^p``.

    Ties go to the lexicographically smallest weight vector. Returns
    ``(weights, auc)``.
    """
    data.require_both_classes()
    _check_budget(data.p, L)
    lattice = _lattice(data.p, L)
    counts = lattice_concordance(data, lattice)
    best = int(np.argmax(counts))
    return lattice[best].copy(), int(counts[best]) / (2 * data.n1 * data.n0)


def esc_monte_carlo(p: int, L: int, n: int, replicates: int = 500, seed=0) -> ComplexityEstimate:
    """Monte Carlo null optimism and search complexity.

    Each replicate draws null data and evaluates the AUC of every rule in
    ``{0..L}^p`` (the zero rule scores 1/2). ``opt0`` is the mean of the
    replicate maxima minus 1/2 with its standard error; ``sigma2`` is the
    across-replicate variance of each rule's AUC averaged over all rules;
    ``esc = opt0**2 / (2 sigma2)``.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    _check_budget(p, L)
    lattice = _lattice(p, L)
    streams = np.random.SeedSequence(seed).spawn(replicates)
    aucs = np.empty((replicates, len(lattice)))
    for b, stream in enumerate(streams):
        data = gen_null(SimConfig("null_model", n, seed=stream, p=p)).data
        while data.n1 == 0 or data.n0 == 0:
            stream = stream.spawn(1)[0]
            data = gen_null(SimConfig("null_model", n, seed=stream, p=p)).data
        aucs[b] = lattice_concordance(data, lattice) / (2 * data.n1 * data.n0)
    maxima = aucs.max(axis=1)
    opt0 = float(maxima.mean() - 0.5)
    se = float(maxima.std(ddof=1) / math.sqrt(replicates))
    sigma2 = float(aucs.var(axis=0, ddof=1).mean())
    esc = opt0**2 / (2.0 * sigma2)
    return ComplexityEstimate(
        p=p,
        L=L,
        n=n,
        esc=esc,
        m_eff=math.exp(esc),
        rbar=None,
        source="monte_carlo",
        opt0=opt0,
        sigma2=sigma2,
        mc_replicates=replicates,
        mc_se=se,
    )


def null_fixed_rule_variance_bound(n: int) -> float:
    """Continuous-score null variance ``1 / (3n)`` of a fixed rule's AUC."""
    return 1.0 / (3.0 * n)
