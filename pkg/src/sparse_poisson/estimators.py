"""Estimators of the functional ``L(M) = sum_i (mu_i - mu0)``.

Single-sample functions take a ``(p, n)`` observation matrix (an
:class:`~sparse_poisson.model.ObservationMatrix` or any array). Column sums in
returned estimates are exactly rounded (``math.fsum``), so a value can be
recomputed bit-for-bit from the reported support in any column order.

The ``*_batch`` helpers operate on stacks of shape ``(..., p, n)`` and are
what the Monte Carlo harness uses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .bounds import theorem1_condition
from .errors import AllZero, DimensionMismatch, EmptySample, IndexOutOfRange, ValidationError

LAMBDA_SCALE = 40.0
GCD_RTOL = 1e-9
_BLOCK_ELEMENTS = 1 << 18


class Theorem1ConditionWarning(UserWarning):
    """The (sigma, mu_inf, n, p) regime lies outside the upper bound's hypothesis."""


@dataclass(frozen=True)
class FunctionalEstimate:
    value: np.ndarray
    support: Optional[tuple] = None
    lambda_used: Optional[float] = None
    tau: Optional[np.ndarray] = None

    def to_dict(self):
        return {
            "value": [float(v) for v in self.value],
            "support": None if self.support is None else [i + 1 for i in self.support],
            "lambda": self.lambda_used,
        }


def _check(X, mu0):
    X = np.asarray(X, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    if X.ndim < 2 or mu0.shape != (X.shape[-2],):
        raise DimensionMismatch(f"X has shape {X.shape} but mu0 has shape {mu0.shape}")
    return X, mu0


def _exact_sum(X, mu0, columns):
    centered = X[:, list(columns)] - mu0[:, None]
    return np.array([math.fsum(row) for row in centered.tolist()]).reshape(X.shape[0])


def naive_estimate(X, mu0):
    X, mu0 = _check(X, mu0)
    return FunctionalEstimate(_exact_sum(X, mu0, range(X.shape[1])))


def oracle_estimate(X, mu0, support):
    X, mu0 = _check(X, mu0)
    support = tuple(sorted({int(i) for i in support}))
    if support and not (0 <= support[0] and support[-1] < X.shape[1]):
        raise IndexOutOfRange(f"support {support} not within [0, {X.shape[1]})")
    return FunctionalEstimate(_exact_sum(X, mu0, support), support=support)


def default_lambda(n, p, mu0, lambda_scale=LAMBDA_SCALE):
    """Threshold ``scale * max(mu0) * sqrt(p) * log(2np)**1.5``."""
    mu0 = np.asarray(mu0, dtype=np.float64)
    return float(lambda_scale * mu0.max() * math.sqrt(p) * math.log(2 * n * p) ** 1.5)


def support_mask(X, mu0, sigma, lam):
    """Boolean ``(..., n)`` mask of columns with ``|X_i - mu0|^2 >= sigma^2 (|X_i|_1 + lam)``."""
    X, mu0 = _check(X, mu0)
    _check_threshold(sigma, lam)
    dist2, l1 = _column_norms(X, mu0)
    return dist2 >= sigma * sigma * (l1 + lam)


def _check_threshold(sigma, lam):
    if lam < 0:
        raise ValidationError(f"lambda must be non-negative, got {lam}")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")


def _column_norms(X, mu0):
    """``|X_i - mu0|^2`` and ``|X_i|_1`` per column, in cache-sized column blocks."""
    dist2 = np.empty(X.shape[:-2] + X.shape[-1:])
    l1 = np.empty_like(dist2)
    step = max(1, _BLOCK_ELEMENTS // max(1, X[..., :1].size))
    for a in range(0, X.shape[-1], step):
        B = X[..., a:a + step]
        dist2[..., a:a + step] = ((B - mu0[:, None]) ** 2).sum(axis=-2)
        l1[..., a:a + step] = np.abs(B).sum(axis=-2)
    return dist2, l1


def estimate_support(X, mu0, sigma, lam):
    mask = support_mask(X, mu0, sigma, lam)
    if mask.ndim != 1:
        raise DimensionMismatch("estimate_support takes a single (p, n) matrix")
    return tuple(int(i) for i in np.flatnonzero(mask))


def ght_estimate(X, mu0, sigma, lam=None, lambda_scale=LAMBDA_SCALE, mu_inf=None):
    """Group hard thresholding: sum the centred columns that clear the threshold.

    ``lam`` defaults to :func:`default_lambda` with ``lambda_scale``. When
    ``mu_inf`` is supplied, a :class:`Theorem1ConditionWarning` is issued if
    the regime falls outside the risk bound's hypothesis.
    """
    X, mu0 = _check(X, mu0)
    p, n = X.shape
    if lam is None:
        lam = default_lambda(n, p, mu0, lambda_scale)
    if mu_inf is not None and not theorem1_condition(n, p, sigma, mu_inf):
        warnings.warn(f"sigma={sigma}, mu_inf={mu_inf}, n={n}, p={p} violate the "
                      "upper bound's regime condition", Theorem1ConditionWarning, stacklevel=2)
    _check_threshold(sigma, lam)
    dist2, l1 = _column_norms(X, mu0)
    tau = sigma * sigma * (l1 + lam)
    support = tuple(int(i) for i in np.flatnonzero(dist2 >= tau))
    return FunctionalEstimate(_exact_sum(X, mu0, support), support=support,
                              lambda_used=float(lam), tau=tau)


def naive_batch(X, mu0):
    X, mu0 = _check(X, mu0)
    return (X - mu0[:, None]).sum(axis=-1)


def oracle_batch(X, mu0, support):
    X, mu0 = _check(X, mu0)
    return (X[..., list(support)] - mu0[:, None]).sum(axis=-1)


def ght_batch(X, mu0, sigma, lam):
    """Return ``(values, mask)`` for a stack of observation matrices."""
    mask = support_mask(X, mu0, sigma, lam)
    X, mu0 = _check(X, mu0)
    values = np.einsum("...pn,...n->...p", X - mu0[:, None], mask.astype(np.float64))
    return values, mask


def estimate_sigma(X, rtol=GCD_RTOL, max_denominator=10 ** 6):
    """Recover ``sigma`` from the lattice ``sigma**2 * N`` spanned by the data.

    Every positive value divided by the smallest one is a ratio of counts
    ``k_i / k_min``; reading each ratio back as a reduced fraction, the lcm
    ``L`` of the denominators gives the grid step ``min / L``. This avoids the
    error growth of a floating-point Euclid. When every count shares a factor
    ``k`` the step comes out ``k`` times too large; with many Poisson entries
    that is vanishingly rare.
    """
    vals = np.unique(np.asarray(X, dtype=np.float64).ravel())
    vals = vals[vals > 0]
    if vals.size == 0:
        raise AllZero("no strictly positive entry: the sigma grid is unidentifiable")
    L = 1
    for ratio in (vals / vals[0]).tolist():
        L = math.lcm(L, Fraction(ratio).limit_denominator(max_denominator).denominator)
        if L > max_denominator:
            break
    q = vals * (L / vals[0])
    if L > max_denominator or (np.abs(q - np.rint(q)) > rtol * q).any():
        raise ValidationError("observations do not lie on a common grid")
    # least-squares refinement on the identified integer multiples
    g = vals.sum() / np.rint(q).sum()
    return math.sqrt(g)


def estimate_background(aux):
    aux = np.asarray(aux, dtype=np.float64)
    if aux.size == 0:
        raise EmptySample("the auxiliary background sample is empty")
    if aux.ndim != 2:
        raise DimensionMismatch("auxiliary sample must be a list of equal-length vectors")
    return aux.mean(axis=0)
