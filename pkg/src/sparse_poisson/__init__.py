"""Estimation of the summed signal ``sum_i (mu_i - mu0)`` from sparse scaled-Poisson data."""

from .bounds import (RiskBound, ght_risk_bound, kl_mixture_bound, kl_mixture_exact,
                     kl_packing_instance, lower_bound_thm2, lower_bound_thm3, naive_risk_exact,
                     oracle_risk_exact, poisson_kl, theorem1_condition)
from .concentration import (FourthMomentReport, TailReport, TailRow, fourth_moment_check,
                            lemma1_bound, lemma1_report, lemma1_tail_mc)
from .errors import BudgetError, ValidationError
from .estimators import (FunctionalEstimate, default_lambda, estimate_background,
                         estimate_sigma, estimate_support, ght_estimate, naive_estimate,
                         oracle_estimate)
from .harness import (EstimatorSpec, ExperimentConfig, ModelTemplate, RiskReport, SweepGrid,
                      plugin_experiment, run_risk_experiment, run_sweep)
from .lower_bounds import (PackingCode, PackingInstance, TwoPriorInstance, sample_prior_pi1,
                           thm2_instance, thm3_instance, varshamov_gilbert_packing)
from .model import (ModelSpec, ObservationMatrix, intensity_matrix, linear_functional,
                    sample_observations, validate_model)

__version__ = "0.1.0"
