"""Seeded Monte Carlo risk experiments, parameter sweeps and CSV persistence.

Replication ``r`` of an experiment with seed ``seed`` draws column ``i`` of
the observation matrix from the stream ``(seed, r, i)`` (see
:mod:`sparse_poisson.rng`); auxiliary background vectors for the plug-in
estimator use columns ``n, n + 1, ...`` of the same replication. Replications
are processed in chunks only to bound memory, so results do not depend on
the chunk size or on the number of threads.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng
from .bounds import (RiskBound, ght_risk_bound, lower_bound_thm2, lower_bound_thm3,
                     naive_risk_exact, oracle_risk_exact)
from .errors import GridTooLarge, ValidationError
from .estimators import (LAMBDA_SCALE, default_lambda, estimate_background, estimate_sigma,
                         ght_batch, naive_batch, oracle_batch)
from .model import ModelSpec, intensity_matrix, linear_functional, validate_model

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "p", "s", "sigma", "mu_inf", "estimator", "lambda_scale", "reps", "seed",
               "mse", "se", "oracle_exact", "naive_exact", "ght_bound", "lower_thm2",
               "lower_thm3", "condition_ok", "support_err")
ESTIMATOR_KINDS = ("naive", "oracle", "ght", "ght_plugin")
PRESETS = ("uniform_lift", "spike")
SWEEP_AXES = ("n", "p", "s", "sigma", "lambda_scale")
MAX_CELLS = 10_000
CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    lambda_scale: float = LAMBDA_SCALE
    m_aux: int = 0

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValidationError(f"unknown estimator {self.kind!r}; expected one of {ESTIMATOR_KINDS}")
        if self.kind == "ght_plugin" and self.m_aux < 1:
            raise ValidationError("ght_plugin needs m_aux >= 1")
        if self.lambda_scale < 0:
            raise ValidationError("lambda_scale must be non-negative")

    @property
    def thresholded(self):
        return self.kind in ("ght", "ght_plugin")

    @property
    def label(self):
        if self.kind == "ght_plugin":
            return f"ght_plugin:m_aux={self.m_aux}"
        return self.kind

    @classmethod
    def from_dict(cls, doc):
        if isinstance(doc, str):
            return cls(doc)
        return cls(kind=doc["kind"], lambda_scale=float(doc.get("lambda_scale", LAMBDA_SCALE)),
                   m_aux=int(doc.get("m_aux", 0)))


@dataclass(frozen=True)
class ModelTemplate:
    """Parametric signal configuration used to rebuild models inside sweeps.

    ``uniform_lift`` puts ``mu0 + delta`` in every coordinate of the first
    ``s`` columns; ``spike`` adds ``delta`` to the largest coordinate of
    ``mu0`` only. Neither is claimed to be a worst case.
    """

    n: int
    p: int
    sigma: float
    mu0_level: float
    kind: str
    s: int
    delta: float
    mu_inf: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ValidationError(f"unknown preset {self.kind!r}; expected one of {PRESETS}")

    def build(self, **overrides):
        t = replace(self, **overrides)
        mu0 = np.full(t.p, t.mu0_level)
        if t.s > t.n:
            raise ValidationError(f"s={t.s} exceeds n={t.n}")
        vec = mu0.copy()
        if t.kind == "uniform_lift":
            vec += t.delta
        else:
            vec[0] += t.delta
        signals = {i: vec for i in range(t.s)} if t.delta != 0 else {}
        mu_inf = t.mu_inf if t.mu_inf is not None else float(max(mu0.max(), vec.max()))
        return ModelSpec(n=t.n, p=t.p, sigma=t.sigma, mu0=mu0, mu_inf=mu_inf, signals=signals)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    estimators: tuple
    reps: int
    seed: int
    output_path: Optional[str] = None
    template: Optional[ModelTemplate] = None

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.reps < 1:
            raise ValidationError(f"reps must be >= 1, got {self.reps}")
        if not self.estimators:
            raise ValidationError("at least one estimator is required")
        labels = [e.label for e in self.estimators]
        if len(set(zip(labels, (e.lambda_scale for e in self.estimators)))) != len(labels):
            raise ValidationError("duplicate estimator entries")

    @classmethod
    def from_dict(cls, doc, output_path=None):
        try:
            mdoc = dict(doc["model"])
            template = None
            if "preset" in mdoc:
                pre = mdoc["preset"]
                mu0 = mdoc["mu0"]
                if not np.isscalar(mu0):
                    if len(set(mu0)) != 1:
                        raise ValidationError("presets need a constant background mu0")
                    mu0 = mu0[0]
                template = ModelTemplate(
                    n=int(mdoc["n"]), p=int(mdoc["p"]), sigma=float(mdoc["sigma"]),
                    mu0_level=float(mu0), kind=pre["kind"], s=int(pre["s"]),
                    delta=float(pre["delta"]),
                    mu_inf=None if mdoc.get("mu_inf") is None else float(mdoc["mu_inf"]))
                model = template.build()
            else:
                model = ModelSpec.from_dict(mdoc)
            return cls(model=model,
                       estimators=[EstimatorSpec.from_dict(e) for e in doc["estimators"]],
                       reps=int(doc["reps"]), seed=int(doc["seed"]),
                       output_path=output_path, template=template)
        except KeyError as exc:
            raise ValidationError(f"experiment config lacks field {exc}") from None

    def with_cell(self, cell):
        """Config for one sweep cell; ``cell`` maps axis name to value."""
        model_axes = {k: v for k, v in cell.items() if k in ("n", "p", "s", "sigma")}
        model = self.model
        if set(model_axes) - {"sigma"}:
            if self.template is None:
                raise ValidationError("sweeping n, p or s needs a preset model")
        if model_axes:
            if self.template is not None:
                casts = {"n": int, "p": int, "s": int, "sigma": float}
                model = self.template.build(**{k: casts[k](v) for k, v in model_axes.items()})
            else:
                model = replace(model, sigma=float(model_axes["sigma"]))
        estimators = self.estimators
        if "lambda_scale" in cell:
            estimators = tuple(replace(e, lambda_scale=float(cell["lambda_scale"]))
                               if e.thresholded else e for e in estimators)
        return replace(self, model=model, estimators=estimators)


@dataclass(frozen=True)
class EstimatorResult:
    estimator: EstimatorSpec
    mse: float
    se: float
    support_err: Optional[float] = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RiskReport:
    model: ModelSpec
    reps: int
    seed: int
    results: tuple
    bounds: dict

    def result(self, label):
        for r in self.results:
            if r.estimator.label == label:
                return r
        raise KeyError(label)

    def rows(self):
        m = self.model
        b = self.bounds
        for r in self.results:
            yield {
                "n": m.n, "p": m.p, "s": m.s, "sigma": m.sigma, "mu_inf": m.mu_inf,
                "estimator": r.estimator.label,
                "lambda_scale": r.estimator.lambda_scale if r.estimator.thresholded else None,
                "reps": self.reps, "seed": self.seed, "mse": r.mse, "se": r.se,
                "oracle_exact": b["oracle_exact"].value, "naive_exact": b["naive_exact"].value,
                "ght_bound": b["ght_theorem1"].value, "lower_thm2": b["lower_thm2"].value,
                "lower_thm3": b["lower_thm3"].value,
                "condition_ok": b["ght_theorem1"].condition_ok,
                "support_err": r.support_err,
            }


def attach_bounds(spec):
    """Every risk bound for ``spec``, recomputed from scratch."""
    M = intensity_matrix(spec)
    return {
        "oracle_exact": RiskBound(oracle_risk_exact(M, spec.support, spec.sigma), "oracle_exact", True),
        "naive_exact": RiskBound(naive_risk_exact(M, spec.sigma), "naive_exact", True),
        "ght_theorem1": ght_risk_bound(spec.n, spec.p, spec.s, spec.sigma, spec.mu_inf),
        "lower_thm2": lower_bound_thm2(spec.n, spec.s, spec.sigma, float(spec.mu0.max())),
        "lower_thm3": lower_bound_thm3(spec.s, spec.p, spec.sigma, spec.mu_inf),
    }


def _summary(errors):
    reps = errors.shape[0]
    se = float(errors.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    return float(errors.mean()), se


def run_risk_experiment(cfg):
    """Monte Carlo MSE of every configured estimator, with attached bounds."""
    spec = validate_model(cfg.model)
    M = intensity_matrix(spec)
    target = linear_functional(M, spec.mu0)
    s2 = spec.sigma ** 2
    means = M / s2
    true_mask = np.zeros(spec.n, dtype=bool)
    true_mask[list(spec.support)] = True

    m_aux = max((e.m_aux for e in cfg.estimators if e.kind == "ght_plugin"), default=0)
    per_rep = spec.p * (spec.n + m_aux)
    chunk = max(1, min(cfg.reps, CHUNK_ELEMENTS // per_rep))
    errors = {e: np.empty(cfg.reps) for e in cfg.estimators}
    sup_err = {e: np.empty(cfg.reps) for e in cfg.estimators if e.thresholded}
    mu0_hats = {e: np.empty((cfg.reps, spec.p)) for e in cfg.estimators if e.kind == "ght_plugin"}
    sigma_hats = {e: np.empty(cfg.reps) for e in cfg.estimators if e.kind == "ght_plugin"}

    for start in range(0, cfg.reps, chunk):
        ids = np.arange(start, min(cfg.reps, start + chunk))
        sl = slice(start, start + ids.shape[0])
        X = s2 * rng.poisson_counts(means, cfg.seed, ids)
        aux = None
        if m_aux:
            aux_means = np.repeat(spec.mu0[:, None] / s2, m_aux, axis=1)
            aux = s2 * rng.poisson_counts(aux_means, cfg.seed, ids, col_offset=spec.n)
        for est in cfg.estimators:
            if est.kind == "naive":
                values = naive_batch(X, spec.mu0)
            elif est.kind == "oracle":
                values = oracle_batch(X, spec.mu0, spec.support)
            elif est.kind == "ght":
                lam = default_lambda(spec.n, spec.p, spec.mu0, est.lambda_scale)
                values, mask = ght_batch(X, spec.mu0, spec.sigma, lam)
                sup_err[est][sl] = (mask != true_mask).sum(axis=-1)
            else:
                values = np.empty((ids.shape[0], spec.p))
                masks = np.empty((ids.shape[0], spec.n), dtype=bool)
                for k in range(ids.shape[0]):
                    mu0_hat = estimate_background(aux[k, :, :est.m_aux].T)
                    sigma_hat = estimate_sigma(np.concatenate(
                        [X[k].ravel(), aux[k, :, :est.m_aux].ravel()]))
                    lam = default_lambda(spec.n, spec.p, mu0_hat, est.lambda_scale)
                    values[k], masks[k] = ght_batch(X[k], mu0_hat, sigma_hat, lam)
                    mu0_hats[est][start + k] = mu0_hat
                    sigma_hats[est][start + k] = sigma_hat
                sup_err[est][sl] = (masks != true_mask).sum(axis=-1)
            errors[est][sl] = ((values - target) ** 2).sum(axis=-1)

    results = []
    for est in cfg.estimators:
        mse, se = _summary(errors[est])
        extras = {}
        if est.kind == "ght_plugin":
            extras = {"mu0_hat_mean": mu0_hats[est].mean(axis=0),
                      "sigma_hat_mean": float(sigma_hats[est].mean())}
        results.append(EstimatorResult(
            est, mse, se,
            support_err=float(sup_err[est].mean()) if est in sup_err else None,
            extras=extras))
    return RiskReport(spec, cfg.reps, cfg.seed, tuple(results), attach_bounds(spec))


def plugin_experiment(cfg, m_aux):
    """Compare GHT with known ``(mu0, sigma)`` against the plug-in version using ``m_aux``
    auxiliary background vectors; the report carries both rows."""
    if m_aux < 1:
        raise ValidationError(f"m_aux must be >= 1, got {m_aux}")
    scales = sorted({e.lambda_scale for e in cfg.estimators if e.thresholded}) or [LAMBDA_SCALE]
    ests = [e for e in cfg.estimators if not e.thresholded]
    for scale in scales:
        ests += [EstimatorSpec("ght", scale), EstimatorSpec("ght_plugin", scale, m_aux)]
    return run_risk_experiment(replace(cfg, estimators=tuple(ests)))


@dataclass(frozen=True)
class SweepGrid:
    axes: dict
    cap: int = MAX_CELLS

    def __post_init__(self):
        unknown = set(self.axes) - set(SWEEP_AXES)
        if unknown:
            raise ValidationError(f"unknown sweep axes {sorted(unknown)}; allowed {SWEEP_AXES}")
        if any(len(v) == 0 for v in self.axes.values()):
            raise ValidationError("sweep axes need at least one value")
        if self.size > self.cap:
            raise GridTooLarge(f"{self.size} cells exceed the cap of {self.cap}")

    @property
    def size(self):
        return math.prod(len(v) for v in self.axes.values())

    def cells(self):
        names = [a for a in SWEEP_AXES if a in self.axes]
        for values in itertools.product(*(self.axes[a] for a in names)):
            yield dict(zip(names, values))

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        cap = int(doc.pop("cap", MAX_CELLS))
        axes = doc.pop("axes", doc)
        return cls({k: list(v) for k, v in axes.items()}, cap=cap)


def run_sweep(grid, base, sink=None):
    """One :class:`RiskReport` per grid cell, in row-major axis order.

    Cells share ``base.seed``. When ``sink`` is given, each report is written
    (and flushed) as soon as its cell finishes.
    """
    reports = []
    for cell in grid.cells():
        cfg = base.with_cell(cell)
        report = run_risk_experiment(cfg)
        if not report.bounds["ght_theorem1"].condition_ok:
            log.info("cell %s outside the upper bound's regime condition", cell)
        if sink is not None:
            sink.write(report)
        reports.append(report)
    return reports


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


class CsvSink:
    """Append-only CSV writer with the fixed column order; every row is flushed."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_COLUMNS)
        self._flush()

    def _flush(self):
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def write(self, report):
        for row in report.rows():
            self._writer.writerow([format_value(row[c]) for c in CSV_COLUMNS])
            self._flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_reports(reports, path):
    with CsvSink(path) as sink:
        for report in reports:
            sink.write(report)


def load_config(path, output_path=None):
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh), output_path=output_path)
