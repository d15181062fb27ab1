"""Exact and asymptotic combinatorics of the two-point tree recursion.

Closed forms for the threshold constants, extended-precision binomial
tails, the Stirling-regime bound, the resulting dimension bound, and a
counter-based Monte Carlo simulator of the halving recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

__all__ = [
    "TreeParams",
    "alpha_of",
    "epsilon0_of",
    "mu_j",
    "z_of",
    "binomial_tail",
    "stirling_bound",
    "dimension_bound",
    "simulate_recursion",
]


@dataclass(frozen=True)
class TreeParams:
    """Parameters of the K-step tree recursion (d = 2 or 3 for formulas)."""

    delta0: float
    eps: float
    K: int
    d: int = 2
    N0: float = 4.0
    Nprime_root: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.delta0 < 1.0:
            raise ValueError("delta0 must be in (0,1)")
        if self.eps < 0 or self.K < 1 or self.d not in (2, 3):
            raise ValueError("bad tree parameters")
        if self.N0 <= 1:
            raise ValueError("N0 must exceed 1")
        if self.Nprime_root < self.N0 / 2:
            raise ValueError("root value must be >= N0/2")

    @property
    def M(self):
        return 2 ** ((self.d - 1) * self.K)


def alpha_of(delta0):
    """Solve delta0/(1-delta0) * (1-alpha)/alpha = 3 for alpha (< delta0)."""
    if not 0.0 < delta0 < 1.0:
        raise ValueError("delta0 must be in (0,1)")
    return delta0 / (3.0 - 2.0 * delta0)


def epsilon0_of(alpha):
    """Invert alpha = log(1+e0) / (log(1+e0) + log 2): e0 = 2^(a/(1-a)) - 1.

    Every eps < e0 then satisfies (1/2)^alpha (1+eps)^(1-alpha) < 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")
    return 2.0 ** (alpha / (1.0 - alpha)) - 1.0


def mu_j(j, Nprime_root, N0):
    """Per-step excess (1/j) log2(2 N'(root)/N0); nonnegative, -> 0."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if Nprime_root < N0 / 2:
        raise ValueError("root value must be >= N0/2")
    return math.log2(2.0 * Nprime_root / N0) / j


def z_of(beta, delta0):
    """Large-deviation base ((1-d0)^(1-b) d0^b)/(b^b (1-b)^(1-b)).

    Equals exp(-KL(Bernoulli(b) || Bernoulli(d0))): 1 at b = d0, below 1
    and increasing for b < d0.
    """
    if not (0.0 < beta < 1.0 and 0.0 < delta0 < 1.0):
        raise ValueError("beta and delta0 must be in (0,1)")
    return ((1 - delta0) ** (1 - beta) * delta0 ** beta) \
        / (beta ** beta * (1 - beta) ** (1 - beta))


def binomial_tail(j, beta, delta0):
    """Exact P[Bin(j, delta0) <= floor(j*beta)] in extended precision."""
    if j > 10 ** 4:
        raise ValueError("j must be <= 1e4")
    if beta >= 1.0:
        return 1.0
    if beta < 0.0:
        return 0.0
    kmax = math.floor(j * beta)
    with mpmath.workdps(40):
        p = mpmath.mpf(delta0)
        q = 1 - p
        total = mpmath.mpf(0)
        for i in range(kmax + 1):
            total += mpmath.binomial(j, i) * p ** i * q ** (j - i)
        return float(total)


def stirling_bound(j, beta, delta0, j_min=50):
    """The asymptotic tail bound 2/sqrt(2 pi b(1-b) j) * z(b)^j.

    Valid in the working window 2 < (d0/(1-d0)) * ((1-b)/b) < 4 and for
    j >= j_min (no value is canonical; 50 is the validated default).
    """
    ratio = (delta0 / (1 - delta0)) * ((1 - beta) / beta)
    if not 2.0 < ratio < 4.0:
        raise ValueError("outside the working window 2 < ratio < 4")
    if j < j_min:
        raise ValueError(f"asymptotic bound needs j >= {j_min}")
    return 2.0 / math.sqrt(2 * math.pi * beta * (1 - beta) * j) \
        * z_of(beta, delta0) ** j


def dimension_bound(params: TreeParams):
    """(d-1) (ln M + ln z(alpha)) / ln M, strictly below d-1."""
    alpha = alpha_of(params.delta0)
    # eps < eps0(alpha) in log form (eps0 overflows for alpha near 1)
    if not math.log1p(params.eps) < alpha / (1 - alpha) * math.log(2.0):
        raise ValueError("eps must be below eps0(alpha(delta0))")
    M = params.M
    return (params.d - 1) * (math.log(M) + math.log(z_of(alpha, params.delta0))) \
        / math.log(M)


def simulate_recursion(params: TreeParams, generations, trials, seed):
    """Monte Carlo of the two-point ratio law along random branches.

    Each trial draws `generations` steps: halve with probability delta0,
    grow by (1+eps) otherwise. Reports the empirical probability of the
    bad event F_j <= alpha + mu_j (goodness frequency too small) with a
    binomial standard error, next to the exact tail. Philox streams keyed
    by the 64-bit seed make runs bit-reproducible.
    """
    j = int(generations)
    alpha = alpha_of(params.delta0)
    mu = mu_j(j, params.Nprime_root, params.N0)
    beta = alpha + mu
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    threshold = math.floor(j * beta)
    # survival of the recursion value: root (1/2)^G (1+eps)^(j-G) >= N0/2
    lg2 = math.log(2.0)
    lge = math.log1p(params.eps)
    g_max = (math.log(2 * params.Nprime_root / params.N0) + j * lge) \
        / (lg2 + lge)
    bad = 0
    survive = 0
    chunk = 200_000
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        good = rng.binomial(j, params.delta0, size=n)
        bad += int(np.count_nonzero(good <= threshold))
        survive += int(np.count_nonzero(good <= g_max))
        done += n
    p_hat = bad / trials
    stderr = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / trials) / trials)
    exact = binomial_tail(j, beta, params.delta0) if j <= 10 ** 4 else None
    return {
        "j": j,
        "alpha": alpha,
        "mu_j": mu,
        "beta": beta,
        "p_bad": p_hat,
        "p_survive": survive / trials,
        "stderr": stderr,
        "exact_tail": exact,
        "trials": trials,
        "seed": int(seed),
    }
