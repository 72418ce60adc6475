"""Closed-form risk bounds and Kullback-Leibler quantities for the Poisson model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import BadEps, IndexOutOfRange, NoConvergence, NonPositiveRate, ValidationError

UPPER_QUADRATIC = 170.0
UPPER_LINEAR = 6.0
THM2_DENOMINATOR = 513.0
THM3_FACTOR = 2.0 ** -14
MAX_SERIES_TERMS = 10 ** 6

BOUND_KINDS = ("oracle_exact", "naive_exact", "ght_theorem1", "lower_thm2", "lower_thm3")


@dataclass(frozen=True)
class RiskBound:
    value: float
    kind: str
    condition_ok: bool

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if not self.value >= 0:
            raise ValueError(f"risk bound must be non-negative, got {self.value}")


def oracle_risk_exact(M, support, sigma):
    """Exact MSE of the oracle: ``sigma^2`` times the total intensity on ``support``."""
    M = np.asarray(M, dtype=np.float64)
    cols = sorted({int(i) for i in support})
    if cols and not (0 <= cols[0] and cols[-1] < M.shape[1]):
        raise IndexOutOfRange(f"support {cols} not within [0, {M.shape[1]})")
    return sigma * sigma * math.fsum(M[:, cols].ravel().tolist())


def naive_risk_exact(M, sigma):
    M = np.asarray(M, dtype=np.float64)
    return sigma * sigma * math.fsum(M.ravel().tolist())


def _log_term(n, p):
    return math.log(2 * n * p) ** 1.5


def theorem1_condition(n, p, sigma, mu_inf):
    """``sigma^3 mu_inf^-1.5 <= 40 log^1.5(2np) <= 0.9 sigma^-3 mu_inf^1.5``."""
    u = 40.0 * _log_term(n, p)
    ratio = (mu_inf / sigma ** 2) ** 1.5
    return bool(1.0 / ratio <= u <= 0.9 * ratio)


def ght_risk_bound(n, p, s, sigma, mu_inf):
    if s > n:
        raise ValidationError(f"s={s} exceeds n={n}")
    value = mu_inf * sigma ** 2 * (UPPER_QUADRATIC * s * s * math.sqrt(p) * _log_term(n, p)
                                   + UPPER_LINEAR * s * p)
    return RiskBound(value, "ght_theorem1", theorem1_condition(n, p, sigma, mu_inf))


def lower_bound_thm2(n, s, sigma, mu0_max):
    """Two-prior lower bound ``max(mu0) sigma^2 s^2 log(1 + n / 2s^2) / 513``; valid for s >= 128."""
    if s <= 0:
        return RiskBound(0.0, "lower_thm2", False)
    value = mu0_max / THM2_DENOMINATOR * sigma ** 2 * s * s * math.log1p(n / (2.0 * s * s))
    return RiskBound(value, "lower_thm2", s >= 128)


def lower_bound_thm3(s, p, sigma, mu_inf):
    """Packing lower bound ``2^-14 mu_inf sigma^2 s p``; valid for p >= 16."""
    if s <= 0:
        return RiskBound(0.0, "lower_thm3", False)
    return RiskBound(THM3_FACTOR * mu_inf * sigma ** 2 * s * p, "lower_thm3", p >= 16)


def _kl_shape(t):
    """``(1 + t) log(1 + t) - t`` without cancellation near ``t = 0``."""
    if abs(t) >= 0.5:
        return (1.0 + t) * math.log1p(t) - t
    # sum_{k >= 2} (-t)^k / (k (k - 1)); |t| < 0.5 needs at most ~50 terms
    total, power, k = 0.0, t * t, 2
    while True:
        term = power / (k * (k - 1))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total
        power *= -t
        k += 1


def poisson_kl(a, b):
    """KL(Poisson(a) || Poisson(b)) = a log(a/b) + b - a."""
    if not (a > 0 and b > 0):
        raise NonPositiveRate(f"Poisson rates must be positive, got a={a}, b={b}")
    return b * _kl_shape((a - b) / b)


def kl_packing_instance(T, s, eps, mu_inf, sigma):
    """KL between the data laws of the packing matrix ``M_T`` and ``M_empty``."""
    if not 0 < eps < 1:
        raise BadEps(f"eps must lie in (0, 1), got {eps}")
    size = len(set(T))
    # (1 - eps) log(1 - eps) + eps per affected entry
    return s * mu_inf / sigma ** 2 * size * _kl_shape(-eps)


def kl_mixture_bound(n, s, sigma, eps, mu0):
    """Upper bound ``(s^2 / 4n) (exp(sigma^2 eps^2 / mu0) - 1)`` on the two-prior KL."""
    if not mu0 > 0:
        raise NonPositiveRate(f"mu0 must be positive, got {mu0}")
    return s * s / (4.0 * n) * math.expm1(sigma ** 2 * eps ** 2 / mu0)


def _log_chernoff_tail(lam, k):
    # log of exp(-lam) (e lam / k)^k, a bound on P(Poisson(lam) >= k) for k > lam
    return -lam + k * (1.0 + math.log(lam) - math.log(k))


def truncation_point(rates, tol, max_terms=MAX_SERIES_TERMS):
    """Smallest ``K`` with every Poisson upper tail ``P(X >= K)`` below ``tol`` (Chernoff)."""
    top = max(rates)
    log_tol = math.log(tol)
    ok = lambda k: all(_log_chernoff_tail(r, k) < log_tol for r in rates)
    lo = math.floor(top) + 1
    hi = lo
    while not ok(hi):
        hi *= 2
        if hi > 2 * max_terms:
            raise NoConvergence(f"series needs more than {max_terms} terms at tol={tol}")
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    if hi > max_terms:
        raise NoConvergence(f"series needs {hi} > {max_terms} terms at tol={tol}")
    return hi


def kl_mixture_exact(n, s, sigma, eps, mu0, tol=1e-12, max_terms=MAX_SERIES_TERMS):
    """``n * KL(Q || Poisson(mu0/sigma^2))`` for the one-coordinate mixture

    ``Q = (1 - s/2n) Poisson(mu0/sigma^2) + (s/2n) Poisson(mu0/sigma^2 + eps)``,

    summed over ``k = 0..K`` with ``K`` from :func:`truncation_point`.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if not mu0 > 0:
        raise NonPositiveRate(f"mu0 must be positive, got {mu0}")
    w = s / (2.0 * n)
    if not 0 <= w <= 1:
        raise ValidationError(f"mixture weight s/2n={w} outside [0, 1]")
    if eps == 0 or w == 0:
        return 0.0
    a = mu0 / sigma ** 2
    b = a + eps
    K = truncation_point((a, b), tol, max_terms)
    k = np.arange(K + 1, dtype=np.float64)
    log_pa = k * math.log(a) - a - gammaln(k + 1.0)
    # log of d Q_b / d Q_a at k
    r = k * math.log1p(eps / a) - eps
    with np.errstate(over="ignore"):
        t = w * np.expm1(np.minimum(r, 700.0))
        log_ratio = np.where(r < 700.0, np.log1p(t),
                             math.log(w) + r + np.log1p((1.0 - w) / w * np.exp(-r)))
    terms = np.exp(log_pa + log_ratio) * log_ratio
    return n * math.fsum(terms.tolist())
