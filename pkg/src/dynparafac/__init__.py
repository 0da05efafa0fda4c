"""Nonparametric Bayesian dynamic Parafac factorization for time-indexed categorical data."""

from .baselines import (StaticDXConfig, fit_static_dx, fit_static_dx_by_time,
                        independence_baseline)
from .data_io import (CodebookSpec, DataValidationError, Dataset, ObservationBlock,
                      load_codebook, load_dataset, read_draws, write_dataset, write_draws,
                      write_rho_summary)
from .draws import PosteriorDraws
from .experiments import (SimulationSpec, evaluate_rho_recovery, forecast_table,
                          generate_loglinear_rw, generate_model_based, predictive_criteria,
                          true_rho)
from .links import LogitLink, ProbitLink, get_link
from .model import (CategoricalSchema, DirichletHyper, ParafacMixture, cell_probability,
                    dependence_measure, marginal_probability, prior_moments)
from .sampler import ChainConfig, ConfigurationError, NumericalAbort, run_chain, run_chains
from .sticks import StateHyper, forecast_states, truncation_level, weights_from_states

__version__ = "0.1.0"
