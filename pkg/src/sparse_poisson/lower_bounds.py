"""Constructive lower-bound instances and checks of their hypotheses.

Two constructions are provided. The two-prior instance compares the Dirac
prior at ``[mu0, ..., mu0]`` with a prior that lifts one coordinate of each
column by ``sigma^2 eps`` with probability ``s / 2n``. The packing instance
builds one matrix ``M_T`` per set ``T`` of a Varshamov-Gilbert family of
row subsets.

The minimax infimum itself is not computable; what is checked here is every
numerical hypothesis the reduction needs (KL budgets, separations, prior mass
outside the class).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng
from .bounds import kl_mixture_bound, kl_mixture_exact, kl_packing_instance
from .errors import BadEps, EmptyClass, PackingBudgetExceeded, ValidationError
from .model import ModelSpec, linear_functional, validate_model

KL_BUDGET = 1.0 / 8.0
PACKING_ALPHA = 1.0 / 16.0
MAX_CANDIDATES = 10 ** 6


@dataclass(frozen=True)
class TwoPriorInstance:
    n: int
    s: int
    sigma: float
    mu0_max: float
    eps: float
    mixture_weight: float
    v: float
    m_var: float
    kl_bound: float
    kl_exact: float
    separation: float
    functional_mean_shift: np.ndarray
    functional_var: float
    outside_class_mass: float
    outside_class_bound: float
    outside_class_bernstein: float

    @property
    def condition_ok(self):
        return self.s >= 128

    def checks(self):
        """Name -> (observed, limit, passed) for each hypothesis of the reduction."""
        identity = 2 * self.v + 4 * math.sqrt(self.m_var)
        return {
            "kl_exact <= 1/8": (self.kl_exact, KL_BUDGET, self.kl_exact <= KL_BUDGET),
            "kl_bound <= 1/8": (self.kl_bound, KL_BUDGET, self.kl_bound <= KL_BUDGET * (1 + 1e-12)),
            "separation == 2v + 4 sqrt(M)": (
                self.separation, identity,
                math.isclose(self.separation, identity, rel_tol=1e-12)),
            "Var_pi1 L <= M": (self.functional_var, self.m_var, self.functional_var <= self.m_var),
            "P(zeta > s) <= exp(-3s/5)": (
                self.outside_class_mass, self.outside_class_bound,
                self.outside_class_mass <= self.outside_class_bound),
            # Bernstein with variance s/2 and deviation s/2 gives exp(-3s/16)
            "P(zeta > s) <= exp(-3s/16)": (
                self.outside_class_mass, self.outside_class_bernstein,
                self.outside_class_mass <= self.outside_class_bernstein),
            "1/8 - P(zeta > s) > 0": (
                KL_BUDGET - self.outside_class_mass, 0.0,
                KL_BUDGET - self.outside_class_mass > 0),
            "s >= 128": (self.s, 128, self.condition_ok),
        }

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "n", "s", "sigma", "mu0_max", "eps", "mixture_weight", "v", "m_var", "kl_bound",
            "kl_exact", "separation", "functional_var", "outside_class_mass",
            "outside_class_bound", "outside_class_bernstein")}
        out["functional_mean_shift"] = self.functional_mean_shift.tolist()
        out["condition_ok"] = self.condition_ok
        out["checks"] = {k: {"observed": float(a), "limit": float(b), "pass": bool(c)}
                         for k, (a, b, c) in self.checks().items()}
        return out


def thm2_instance(n, s, sigma, mu0_max, p=1, tol=1e-12):
    """Two-prior instance with ``eps^2 = (mu0_max / sigma^2) log(1 + n / 2s^2)``."""
    if s < 1 or n < 1:
        raise ValidationError(f"need s >= 1 and n >= 1, got s={s}, n={n}")
    eps = math.sqrt(mu0_max / sigma ** 2 * math.log1p(n / (2.0 * s * s)))
    weight = s / (2.0 * n)
    shift = np.zeros(p)
    shift[0] = 0.5 * s * sigma ** 2 * eps
    return TwoPriorInstance(
        n=n, s=s, sigma=sigma, mu0_max=mu0_max, eps=eps, mixture_weight=weight,
        v=s * sigma ** 2 * eps / 8.0,
        m_var=2.0 ** -8 * s * s * sigma ** 4 * eps ** 2,
        kl_bound=kl_mixture_bound(n, s, sigma, eps, mu0_max),
        kl_exact=kl_mixture_exact(n, s, sigma, eps, mu0_max, tol=tol),
        separation=s * sigma ** 2 * eps / 2.0,
        functional_mean_shift=shift,
        functional_var=0.5 * (1.0 - weight) * s * sigma ** 4 * eps ** 2,
        outside_class_mass=float(stats.binom.sf(s, n, weight)),
        outside_class_bound=math.exp(-0.6 * s),
        outside_class_bernstein=math.exp(-3.0 * s / 16.0),
    )


def sample_prior_pi1(instance, n, p, mu0, seed, coordinate=None):
    """Draw an intensity matrix from the mixture prior.

    Each column independently has its ``coordinate`` entry (default: the
    largest entry of ``mu0``) raised by ``sigma^2 eps`` with probability
    ``s / 2n``; column ``i`` decides with the stream ``(seed, 0, i)``.
    """
    mu0 = np.asarray(mu0, dtype=np.float64)
    if mu0.shape != (p,):
        raise ValidationError(f"mu0 must have length p={p}")
    if coordinate is None:
        coordinate = int(np.argmax(mu0))
    M = np.repeat(mu0[:, None], n, axis=1)
    if instance.mixture_weight > 0:
        u = rng.uniforms(seed, (1, n))[0, 0]
        M[coordinate, u < instance.mixture_weight] += instance.sigma ** 2 * instance.eps
    return M


@dataclass(frozen=True)
class PackingCode:
    p: int
    seed: int
    subsets: list
    m: int
    min_sym_diff: int
    required_diff: int
    condition_ok: bool
    candidates_used: int

    def to_dict(self):
        return {
            "p": self.p,
            "seed": self.seed,
            "m": self.m,
            "min_sym_diff": self.min_sym_diff,
            "required_diff": self.required_diff,
            "condition_ok": self.condition_ok,
            "candidates_used": self.candidates_used,
            # rows are 1-based in exported documents
            "subsets": [[j + 1 for j in T] for T in self.subsets],
        }


def target_size(p):
    """``floor(exp(p/8)) + 1``: the number of non-empty hypotheses required."""
    return math.floor(math.exp(p / 8.0)) + 1


def min_symmetric_difference(subsets):
    """Brute-force minimum ``|T_i ^ T_j|`` over all distinct pairs."""
    sets = [frozenset(T) for T in subsets]
    best = None
    for A, B in itertools.combinations(sets, 2):
        d = len(A ^ B)
        if best is None or d < best:
            best = d
    return best


def varshamov_gilbert_packing(p, seed, max_candidates=MAX_CANDIDATES, batch=4096):
    """Random greedy family ``T_0 = {}, T_1..T_m`` with ``|T_i ^ T_j| >= ceil(p/8)``.

    Uniform random subsets are kept when they are far enough from every kept
    set, until ``m = floor(exp(p/8)) + 1`` sets follow ``T_0``. The distance
    certificate is recomputed independently by :func:`min_symmetric_difference`.
    """
    m = target_size(p)
    need = math.ceil(p / 8.0)
    gen = np.random.default_rng(seed)
    kept = np.zeros((m + 1, p), dtype=bool)
    count = 1
    used = 0
    while count <= m:
        if used >= max_candidates:
            raise PackingBudgetExceeded(
                f"kept {count - 1} of {m} sets after {used} candidates", achieved=count - 1)
        draw = gen.integers(0, 2, size=(min(batch, max_candidates - used), p), dtype=np.int8)
        for cand in draw.astype(bool):
            used += 1
            if (kept[:count] != cand).sum(axis=1).min() >= need:
                kept[count] = cand
                count += 1
                if count > m:
                    break
    subsets = [tuple(int(j) for j in np.flatnonzero(row)) for row in kept]
    return PackingCode(p=p, seed=seed, subsets=subsets, m=m,
                       min_sym_diff=min_symmetric_difference(subsets), required_diff=need,
                       condition_ok=p >= 16, candidates_used=used)


@dataclass(frozen=True)
class PackingInstance:
    n: int
    p: int
    s: int
    sigma: float
    mu0: np.ndarray
    mu_inf: float
    eps: float
    code: PackingCode
    kl_values: np.ndarray
    separations: np.ndarray
    separations_explicit: np.ndarray
    min_separation: float
    kl_limit: float = field(default=0.0)

    def matrix(self, k):
        return packing_matrix(self.code.subsets[k], self.n, self.s, self.mu0, self.mu_inf, self.eps)

    @property
    def matrices(self):
        return [self.matrix(k) for k in range(len(self.code.subsets))]

    def checks(self):
        off = ~np.eye(len(self.code.subsets), dtype=bool)
        sep_min = float(self.separations[off].min())
        agree = np.allclose(self.separations, self.separations_explicit, rtol=1e-10, atol=0.0)
        kl_max = float(self.kl_values.max())
        return {
            "max KL <= log(m)/16": (kl_max, self.kl_limit, kl_max <= self.kl_limit),
            "min separation >= s^2 p eps^2 mu_inf^2 / 8": (
                sep_min, self.min_separation, sep_min >= self.min_separation),
            "explicit separations match closed form": (
                float(np.abs(self.separations - self.separations_explicit).max()), 0.0, agree),
            "min |T_i ^ T_j| >= p/8": (
                self.code.min_sym_diff, self.p / 8.0, self.code.min_sym_diff >= self.p / 8.0),
            "p >= 16": (self.p, 16, self.p >= 16),
        }

    def to_dict(self):
        return {
            "n": self.n, "p": self.p, "s": self.s, "sigma": self.sigma,
            "mu0": self.mu0.tolist(), "mu_inf": self.mu_inf, "eps": self.eps,
            "m": self.code.m,
            "kl_values": self.kl_values.tolist(),
            "kl_limit": self.kl_limit,
            "min_separation": self.min_separation,
            "checks": {k: {"observed": float(a), "limit": float(b), "pass": bool(c)}
                       for k, (a, b, c) in self.checks().items()},
            "packing": self.code.to_dict(),
        }


def packing_matrix(T, n, s, mu0, mu_inf, eps):
    """``M_T``: first ``s`` columns equal ``mu_inf`` with rows in ``T`` shrunk by ``1 - eps``."""
    mu0 = np.asarray(mu0, dtype=np.float64)
    M = np.repeat(mu0[:, None], n, axis=1)
    M[:, :s] = mu_inf
    M[list(T), :s] = mu_inf * (1.0 - eps)
    return M


def packing_model(T, n, s, sigma, mu0, mu_inf, eps):
    """The :class:`ModelSpec` whose intensity matrix is ``M_T``."""
    M = packing_matrix(T, n, s, mu0, mu_inf, eps)
    mu0 = np.asarray(mu0, dtype=np.float64)
    signals = {i: M[:, i] for i in range(s) if not np.array_equal(M[:, i], mu0)}
    return ModelSpec(n=n, p=len(mu0), sigma=sigma, mu0=mu0, mu_inf=mu_inf, signals=signals)


def thm3_instance(n, p, s, sigma, mu0, mu_inf, seed, max_candidates=MAX_CANDIDATES):
    """Packing instance with ``eps^2 = 2^-7 sigma^2 / (s mu_inf)``."""
    mu0 = np.asarray(mu0, dtype=np.float64)
    if mu0.shape != (p,):
        raise ValidationError(f"mu0 must have length p={p}")
    if p < 16:
        raise ValidationError(f"the packing construction needs p >= 16, got {p}")
    if not 1 <= s <= n:
        raise ValidationError(f"need 1 <= s <= n, got s={s}, n={n}")
    if mu_inf < mu0.max():
        raise EmptyClass(f"mu_inf={mu_inf} < max(mu0)={mu0.max()}")
    eps = math.sqrt(2.0 ** -7 * sigma ** 2 / (s * mu_inf))
    if not eps < 1:
        raise BadEps(f"eps={eps} >= 1 leaves non-positive intensities")
    code = varshamov_gilbert_packing(p, seed, max_candidates=max_candidates)
    for T in code.subsets:
        validate_model(packing_model(T, n, s, sigma, mu0, mu_inf, eps))

    kl = np.array([kl_packing_instance(T, s, eps, mu_inf, sigma) for T in code.subsets])
    sizes = np.array([[len(set(A) ^ set(B)) for B in code.subsets] for A in code.subsets])
    closed = s * s * sizes * eps ** 2 * mu_inf ** 2
    funcs = np.array([linear_functional(packing_matrix(T, n, s, mu0, mu_inf, eps), mu0)
                      for T in code.subsets])
    explicit = ((funcs[:, None, :] - funcs[None, :, :]) ** 2).sum(axis=-1)
    min_sep = s * s * p * eps ** 2 * mu_inf ** 2 / 8.0
    off = ~np.eye(len(code.subsets), dtype=bool)
    if closed[off].min() < min_sep:
        raise RuntimeError("packing separation below s^2 p eps^2 mu_inf^2 / 8")
    return PackingInstance(n=n, p=p, s=s, sigma=sigma, mu0=mu0, mu_inf=mu_inf, eps=eps,
                           code=code, kl_values=kl, separations=closed,
                           separations_explicit=explicit, min_separation=min_sep,
                           kl_limit=PACKING_ALPHA * math.log(code.m))
