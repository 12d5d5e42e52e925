import math

import numpy as np
import pytest
from nbmarkov.distributions import substream
from nbmarkov.errors import DomainError
from nbmarkov.inference import (FitOptions, fit_mle, from_unconstrained, log_likelihood, moment_estimates,
                                run_simulation_study, summaries_to_frame, to_unconstrained)
from nbmarkov.process import ModelParams, stationary_log_pmf, transition_log_pmf
from nbmarkov.simulate import Equal, ExponentialArrivals, TimeSeries, replicate_datasets, simulate_path

BASE = ModelParams(r=2.0, q=0.5, c=0.5)


def build_series(params=BASE, n=1000, seed=0, schedule=None):
    return simulate_path(substream(seed, 0), params, schedule or Equal(dt=1.0, n=n))


# --------- likelihood ---------
def test_two_point_likelihood_values():
    t_star = 1.0
    params = ModelParams(r=1.0, q=0.5, c=math.log(1.5))
    series = TimeSeries(np.array([0.0, t_star]), np.array([0, 0]))
    assert log_likelihood(params, series, include_initial=False) == pytest.approx(math.log(0.75))
    assert log_likelihood(params, series) == pytest.approx(math.log(0.5) + math.log(0.75))


def test_likelihood_is_product_of_pmfs():
    series = TimeSeries(np.array([0.0, 0.7, 1.9]), np.array([4, 1, 6]))
    p = ModelParams(r=3.0, q=0.4, c=1.3)
    expected = (stationary_log_pmf(p, 4) + transition_log_pmf(p, 0.7, 4, 1)
                + transition_log_pmf(p, 1.2, 1, 6))
    assert math.exp(log_likelihood(p, series)) == pytest.approx(math.exp(expected), rel=1e-12)


def test_likelihood_invariant_under_time_rescaling():
    series = build_series(n=200, schedule=ExponentialArrivals(rate=0.5, n=200))
    doubled = TimeSeries(series.times * 2.0, series.counts)
    halved = ModelParams(r=BASE.r, q=BASE.q, c=BASE.c / 2.0)
    assert log_likelihood(halved, doubled) == pytest.approx(log_likelihood(BASE, series), rel=1e-12)


def test_likelihood_needs_two_observations():
    with pytest.raises(DomainError, match="need at least 2 observations"):
        log_likelihood(BASE, TimeSeries(np.array([0.0]), np.array([3])))


# --------- reparameterisation and starts ---------
def test_unconstrained_round_trip():
    p = ModelParams(r=6.0865, q=0.6031, c=0.6848)
    assert from_unconstrained(to_unconstrained(p)).as_tuple() == pytest.approx(p.as_tuple(), rel=1e-12)


@pytest.mark.parametrize("z", [[800.0, 0.0, 0.0], [0.0, 50.0, 0.0], [0.0, 0.0, -800.0]])
def test_unconstrained_extremes_are_rejected(z):
    with pytest.raises(DomainError):
        from_unconstrained(z)


def test_moment_estimates():
    guess = moment_estimates(build_series(n=5000, seed=3))
    assert guess is not None
    assert guess.q == pytest.approx(0.5, abs=0.1)
    assert guess.c == pytest.approx(0.5, abs=0.15)
    flat = TimeSeries(np.arange(20.0), np.tile([1, 2], 10))
    assert moment_estimates(flat) is None


@pytest.mark.parametrize("kwargs", [
    {"n_starts": 0},
    {"max_iters": 0},
    {"f_tol": 0.0},
    {"min_length": 1},
    {"start_box": {"r": (0.2, 20.0), "q": (0.05, 1.5), "c": (0.05, 5.0)}},
    {"start_box": {"r": (5.0, 1.0), "q": (0.05, 0.95), "c": (0.05, 5.0)}},
])
def test_fit_options_validation(kwargs):
    with pytest.raises(DomainError):
        FitOptions(**kwargs)


# --------- fitting ---------
def test_fit_recovers_parameters_roughly():
    result = fit_mle(build_series(n=1000, seed=1))
    assert result.converged
    assert result.params_hat.r == pytest.approx(2.0, abs=0.8)
    assert result.params_hat.q == pytest.approx(0.5, abs=0.12)
    assert result.params_hat.c == pytest.approx(0.5, abs=0.16)
    assert result.loglik >= log_likelihood(BASE, build_series(n=1000, seed=1))


def test_fit_trace_never_decreases():
    result = fit_mle(build_series(n=300, seed=2), FitOptions(n_starts=2))
    assert len(result.trace) > 0
    assert np.all(np.diff(result.trace) >= 0)
    assert result.trace[-1] <= result.loglik + 1e-12


def test_refit_from_optimum_is_a_fixed_point():
    series = build_series(n=400, seed=4)
    first = fit_mle(series)
    again = fit_mle(series, FitOptions(initial=first.params_hat))
    assert again.loglik >= first.loglik
    assert again.loglik - first.loglik < 1e-5


def test_fit_conditional_likelihood_option():
    series = build_series(n=300, seed=6)
    result = fit_mle(series, FitOptions(include_initial=False, n_starts=2))
    assert result.loglik == pytest.approx(log_likelihood(result.params_hat, series, include_initial=False))


def test_fit_rejects_short_series():
    with pytest.raises(DomainError, match="need at least 10 observations"):
        fit_mle(build_series(n=5))


def test_fit_flags_constant_series():
    series = TimeSeries(np.arange(30.0), np.full(30, 3))
    with pytest.warns(RuntimeWarning, match="constant count series"):
        result = fit_mle(series, FitOptions(n_starts=2, max_iters=300))
    assert result.degenerate
    assert 0 < result.params_hat.q < 1


def test_fit_is_deterministic():
    series = build_series(n=200, seed=9)
    a = fit_mle(series, FitOptions(n_starts=3))
    b = fit_mle(series, FitOptions(n_starts=3))
    assert a.params_hat == b.params_hat
    assert a.start_used == b.start_used


# --------- simulation study ---------
def test_single_replicate_study_equals_fit():
    schedule = Equal(dt=1.0, n=300)
    options = FitOptions(n_starts=2)
    (summary,) = run_simulation_study(5, BASE, schedule, 1, [300], options=options)
    fit = fit_mle(replicate_datasets(5, BASE, schedule, 1)[0], options)
    row = summary.estimates.iloc[0]
    assert (row["r"], row["q"], row["c"]) == fit.params_hat.as_tuple()
    assert summary.sd == {"r": 0.0, "q": 0.0, "c": 0.0}


def test_study_frame_shape():
    summaries = run_simulation_study(1, BASE, Equal(dt=1.0, n=120), 3, [60, 120], options=FitOptions(n_starts=2))
    df = summaries_to_frame(summaries)
    assert list(df["size"]) == [60, 120]
    for col in ("mean_r", "sd_r", "mean_q", "sd_q", "mean_c", "sd_c", "n_used", "n_failed"):
        assert col in df.columns
    assert (df["n_used"] + df["n_failed"] == 3).all()


def test_study_rejects_sizes_beyond_schedule():
    with pytest.raises(DomainError):
        run_simulation_study(1, BASE, Equal(dt=1.0, n=100), 2, [200])


@pytest.mark.slow
def test_equal_spacing_study_matches_reported_means():
    reported = {"r": (2.0330, 0.2559), "q": (0.4963, 0.0369), "c": (0.5085, 0.0529)}
    (summary,) = run_simulation_study(2024, BASE, Equal(dt=1.0, n=1000), 20, [1000])
    for name, (mean, sd) in reported.items():
        assert abs(summary.mean[name] - mean) < 3 * sd / math.sqrt(20) + 0.1


@pytest.mark.slow
def test_high_q_study_matches_reported_means():
    reported = {"r": (5.0455, 0.4948), "q": (0.6992, 0.0210), "c": (0.5047, 0.0420)}
    (summary,) = run_simulation_study(2025, ModelParams(r=5.0, q=0.7, c=0.5), Equal(dt=1.0, n=1000), 20, [1000])
    for name, (mean, sd) in reported.items():
        assert abs(summary.mean[name] - mean) < 3 * sd / math.sqrt(20) + 0.1
    assert abs(summary.mean["q"] - 0.6992) < 0.02


@pytest.mark.slow
def test_single_dataset_within_reported_spread():
    truth = ModelParams(r=5.0, q=0.7, c=1.0)
    result = fit_mle(build_series(truth, n=1000, seed=77))
    for got, want, sd in zip(result.params_hat.as_tuple(), truth.as_tuple(), (0.3779, 0.0157, 0.0790)):
        assert abs(got - want) < 3 * sd


@pytest.mark.slow
def test_exponential_spacing_recovers_truth():
    (summary,) = run_simulation_study(31, BASE, ExponentialArrivals(rate=0.5, n=1000), 20, [1000])
    for name, true_value in zip(("r", "q", "c"), BASE.as_tuple()):
        assert abs(summary.mean[name] - true_value) <= 3 * summary.sd[name]


@pytest.mark.slow
def test_estimation_error_shrinks_with_length():
    errors = {}
    for size in (250, 4000):
        (summary,) = run_simulation_study(8, BASE, Equal(dt=1.0, n=size), 20, [size])
        used = summary.estimates[summary.estimates["converged"]]
        errors[size] = {name: float(np.median(np.abs(used[name] - true_value)))
                        for name, true_value in zip(("r", "q", "c"), BASE.as_tuple())}
    for name in ("r", "q", "c"):
        assert errors[4000][name] < errors[250][name]
