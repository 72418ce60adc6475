"""Sparse scaled-Poisson intensity model.

Columns are indexed from 0 in the Python API. JSON documents use 1-based
column indices, which :meth:`ModelSpec.to_json` and
:meth:`ModelSpec.from_json` translate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import (BadIntensity, BadSparsity, DimensionMismatch, EmptyClass,
                     IndexOutOfRange, ValidationError)

GRID_RTOL = 1e-9


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpec:
    """A problem instance: ``n`` columns of ``p``-dimensional intensities.

    ``signals`` maps a column index to its intensity vector; every other
    column carries the background ``mu0``. ``mu_inf`` caps every intensity.
    Construction does not validate; call :func:`validate_model`.
    """

    n: int
    p: int
    sigma: float
    mu0: np.ndarray
    mu_inf: float
    signals: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mu0", _frozen(self.mu0))
        object.__setattr__(self, "signals",
                           {int(i): _frozen(v) for i, v in sorted(self.signals.items())})

    @property
    def support(self):
        return tuple(self.signals)

    @property
    def s(self):
        return len(self.signals)

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "sigma": self.sigma,
            "mu0": self.mu0.tolist(),
            "mu_inf": self.mu_inf,
            "signals": {str(i + 1): v.tolist() for i, v in self.signals.items()},
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        try:
            n, p = int(doc["n"]), int(doc["p"])
            mu0 = doc["mu0"]
            if np.isscalar(mu0):
                mu0 = [float(mu0)] * p
            signals = {}
            for key, vec in doc.get("signals", {}).items():
                idx = int(key)
                if idx < 1:
                    raise IndexOutOfRange(f"signal column {idx} is not a 1-based index")
                signals[idx - 1] = vec
            return cls(n=n, p=p, sigma=float(doc["sigma"]), mu0=mu0,
                       mu_inf=float(doc["mu_inf"]), signals=signals)
        except KeyError as exc:
            raise ValidationError(f"model document lacks field {exc}") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ObservationMatrix:
    """A ``p x n`` sample whose entries are ``sigma**2`` times Poisson counts."""

    values: np.ndarray
    sigma: float

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise DimensionMismatch("observations must form a 2-D (p, n) array")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def validate_model(spec):
    """Return ``spec`` unchanged if it describes a non-empty sparsity class member."""
    if spec.n < 1 or spec.p < 1:
        raise ValidationError(f"n and p must be positive, got n={spec.n}, p={spec.p}")
    if not spec.sigma > 0:
        raise ValidationError(f"sigma must be positive, got {spec.sigma}")
    if spec.mu0.shape != (spec.p,):
        raise DimensionMismatch(f"mu0 has shape {spec.mu0.shape}, expected ({spec.p},)")
    if (spec.mu0 <= 0).any():
        raise BadIntensity("background intensities must be strictly positive")
    if spec.mu_inf < spec.mu0.max():
        raise EmptyClass(f"mu_inf={spec.mu_inf} < max(mu0)={spec.mu0.max()}: the class is empty")
    if len(spec.signals) > spec.n:
        raise BadSparsity(f"{len(spec.signals)} signal columns exceed n={spec.n}")
    for i, vec in spec.signals.items():
        if not 0 <= i < spec.n:
            raise IndexOutOfRange(f"signal column {i} outside [0, {spec.n})")
        if vec.shape != (spec.p,):
            raise DimensionMismatch(f"signal column {i} has shape {vec.shape}")
        if (vec <= 0).any() or (vec > spec.mu_inf).any():
            raise BadIntensity(f"signal column {i} has entries outside (0, mu_inf]")
        if np.array_equal(vec, spec.mu0):
            raise BadSparsity(f"signal column {i} equals mu0")
    return spec


def intensity_matrix(spec):
    validate_model(spec)
    M = np.repeat(spec.mu0[:, None], spec.n, axis=1)
    for i, vec in spec.signals.items():
        M[:, i] = vec
    return M


def linear_functional(M, mu0):
    """Sum of the columns of ``M`` above the background: ``M @ 1 - n * mu0``."""
    M = np.asarray(M, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    if M.ndim != 2 or mu0.shape != (M.shape[0],):
        raise DimensionMismatch(f"M has shape {M.shape} but mu0 has shape {mu0.shape}")
    return (M - mu0[:, None]).sum(axis=1)


def sample_observations(M, sigma, seed, replication=0):
    """Draw ``X`` with ``X[j, i] = sigma**2 * Poisson(M[j, i] / sigma**2)``.

    Column ``i`` uses the random stream keyed by ``(seed, replication, i)``.
    """
    M = np.asarray(M, dtype=np.float64)
    if (M <= 0).any():
        raise BadIntensity("intensities must be strictly positive")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    s2 = sigma * sigma
    counts = rng.poisson_counts(M / s2, seed, replication)[0]
    return ObservationMatrix(s2 * counts, sigma)


def on_grid(X, sigma, rtol=GRID_RTOL):
    """True when every entry of ``X`` is a non-negative integer multiple of ``sigma**2``."""
    q = np.asarray(X, dtype=np.float64) / (sigma * sigma)
    k = np.rint(q)
    return bool(((k >= 0) & (np.abs(q - k) <= rtol * np.maximum(1.0, np.abs(q)))).all())
