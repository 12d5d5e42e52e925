"""Stationary negative-binomial Markov count processes in continuous time."""
from nbmarkov.errors import (AccuracyError, ConvergenceFailure, DomainError, NBMarkovError, SeriesFormatError,
                             TruncationError)
from nbmarkov.forecast import ForecastEval, density_forecast, evaluate_rolling, point_forecast
from nbmarkov.inference import FitOptions, FitResult, StudySummary, fit_mle, log_likelihood, run_simulation_study
from nbmarkov.process import (BDIRates, ModelParams, TransitionRow, conditional_mean, conditional_variance,
                              from_rates, generator_rates, theta, to_rates, transition_log_pmf, transition_row)
from nbmarkov.simulate import Equal, Explicit, ExponentialArrivals, TimeSeries, replicate_datasets, simulate_path

__version__ = "0.1.0"
