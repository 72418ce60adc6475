"""Monte Carlo checks of the Poisson tail inequality and the fourth-moment identity.

For a vector ``eta`` of independent ``Poisson(nu_j)`` counts the centred
statistic ``|eta - nu|_2^2 - |eta|_1`` has mean zero, and its upper tail
beyond ``max(nu) sqrt(p) u`` is at most ``(2p + 1) exp(-c u^(2/3))`` with
``c = 12^(1/3) / 6`` whenever ``max(nu)^-1.5 <= u <= 0.9 max(nu)^1.5``.

Replication ``r`` of every experiment here draws from the stream
``(seed, 0, r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .errors import ValidationError

TAIL_CONSTANT = 12.0 ** (1.0 / 3.0) / 6.0
MIN_TAIL_REPS = 1000
MIN_MOMENT_REPS = 10_000


def lemma1_bound(p, u):
    if not u > 0:
        raise ValidationError(f"u must be positive, got {u}")
    return (2 * p + 1) * math.exp(-TAIL_CONSTANT * u ** (2.0 / 3.0))


def admissible(nu_max, u):
    return nu_max ** -1.5 <= u <= 0.9 * nu_max ** 1.5


def centred_statistic(nu, reps, seed):
    """``|eta - nu|^2 - |eta|_1`` for ``reps`` independent draws of ``eta``."""
    nu = np.asarray(nu, dtype=np.float64)
    if nu.ndim != 1 or (nu <= 0).any():
        raise ValidationError("nu must be a vector of positive means")
    eta = rng.poisson_counts(np.repeat(nu[:, None], reps, axis=1), seed)[0].astype(np.float64)
    return ((eta - nu[:, None]) ** 2).sum(axis=0) - eta.sum(axis=0)


@dataclass(frozen=True)
class TailRow:
    u: float
    in_range: bool
    emp_freq: float
    ci_low: float
    ci_high: float
    bound: float
    replications: int

    @property
    def passed(self):
        """CI upper end below the bound; ``None`` where the inequality makes no claim."""
        if not self.in_range:
            return None
        return self.ci_high <= self.bound


@dataclass(frozen=True)
class TailReport:
    nu: np.ndarray
    rows: list
    replications: int
    seed: int
    stat_mean: float
    stat_se: float
    tail_constant: float = field(default=TAIL_CONSTANT)

    @property
    def u_grid(self):
        return [r.u for r in self.rows]

    @property
    def empirical_tail(self):
        return [(r.emp_freq, r.ci_low, r.ci_high) for r in self.rows]

    @property
    def analytic_bound(self):
        return [r.bound for r in self.rows]

    @property
    def in_range(self):
        return [r.in_range for r in self.rows]


def _tail_row(stat, nu_max, p, u, confidence):
    reps = stat.shape[0]
    hits = int((stat >= nu_max * math.sqrt(p) * u).sum())
    ci = stats.binomtest(hits, reps).proportion_ci(confidence, method="exact")
    return TailRow(u=float(u), in_range=admissible(nu_max, u), emp_freq=hits / reps,
                   ci_low=float(ci.low), ci_high=float(ci.high), bound=lemma1_bound(p, u),
                   replications=reps)


def lemma1_report(nu, u_grid, reps, seed, confidence=0.95):
    """Empirical tail frequencies over ``u_grid`` from one shared Monte Carlo sample."""
    if reps < MIN_TAIL_REPS:
        raise ValidationError(f"need at least {MIN_TAIL_REPS} replications, got {reps}")
    nu = np.asarray(nu, dtype=np.float64)
    stat = centred_statistic(nu, reps, seed)
    rows = [_tail_row(stat, nu.max(), nu.shape[0], u, confidence) for u in u_grid]
    return TailReport(nu=nu, rows=rows, replications=reps, seed=seed,
                      stat_mean=float(stat.mean()),
                      stat_se=float(stat.std(ddof=1) / math.sqrt(reps)))


def lemma1_tail_mc(nu, u, reps, seed, confidence=0.95):
    return lemma1_report(nu, [u], reps, seed, confidence).rows[0]


@dataclass(frozen=True)
class FourthMomentReport:
    mu: float
    sigma: float
    empirical: float
    exact: float
    se: float
    replications: int
    proof_bound: float
    proof_bound_applies: bool

    @property
    def z(self):
        return (self.empirical - self.exact) / self.se


def fourth_moment_check(mu, sigma, reps, seed, mu_inf=None):
    """Empirical ``E[xi^4]`` for ``xi = sigma (K - mu/sigma^2)``, ``K ~ Poisson(mu/sigma^2)``.

    The exact value is ``sigma^2 mu + 3 mu^2``. The standard error is taken
    from the sample variance of ``xi^4`` (an eighth-moment estimate). The
    report also carries ``(2 mu_inf)^2``, which dominates the exact value
    when ``sigma^2 <= 0.9^(1/3) mu_inf``.
    """
    if not (mu > 0 and sigma > 0):
        raise ValidationError("mu and sigma must be positive")
    if reps < MIN_MOMENT_REPS:
        raise ValidationError(f"need at least {MIN_MOMENT_REPS} replications, got {reps}")
    mu_inf = mu if mu_inf is None else mu_inf
    a = mu / sigma ** 2
    k = rng.poisson_counts(np.full((1, reps), a), seed)[0, 0].astype(np.float64)
    xi4 = (sigma * (k - a)) ** 4
    return FourthMomentReport(
        mu=mu, sigma=sigma, empirical=float(xi4.mean()), exact=sigma ** 2 * mu + 3 * mu ** 2,
        se=float(xi4.std(ddof=1) / math.sqrt(reps)), replications=reps,
        proof_bound=(2 * mu_inf) ** 2,
        proof_bound_applies=sigma ** 2 <= 0.9 ** (1.0 / 3.0) * mu_inf)
