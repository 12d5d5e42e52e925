import math

import numpy as np
import pytest
from nbmarkov.diagnostics import chi_square_gof
from nbmarkov.distributions import (binom_log_pmf, binom_sample, log_binom_coeff, log_sum_exp, make_stream,
                                    nb_log_pmf, nb_log_sf, nb_sample, nb_tail_quantile, spawn_streams, substream)
from nbmarkov.errors import DomainError


def test_log_binom_coeff_values():
    assert log_binom_coeff(4, 2) == pytest.approx(math.log(6))
    assert log_binom_coeff(0, 0) == pytest.approx(0.0, abs=1e-15)
    # real a: (2.5 * 1.5) / 2
    assert log_binom_coeff(2.5, 2) == pytest.approx(math.log(2.1875))


def test_log_binom_coeff_rejects_negative_k():
    with pytest.raises(DomainError):
        log_binom_coeff(3, -1)


def test_nb_log_pmf_values():
    assert nb_log_pmf(0, 2, 0.0) == 0.0
    assert nb_log_pmf(1, 1, 0.5) == pytest.approx(math.log(0.25))
    # geometric case 0.5^{x+1}
    xs = np.arange(10)
    np.testing.assert_allclose(np.exp(nb_log_pmf(xs, 1.0, 0.5)), 0.5 ** (xs + 1), rtol=1e-12)


@pytest.mark.parametrize("r", [2, 3, 5, 12])
@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_nb_log_pmf_matches_integer_product_form(r, q):
    for x in range(41):
        exact = math.comb(x + r - 1, x) * q ** x * (1 - q) ** r
        assert math.exp(nb_log_pmf(x, float(r), q)) == pytest.approx(exact, rel=1e-12)


def test_nb_log_pmf_sums_to_one_on_tail_bound():
    r, q = 5.0, 0.7
    n = nb_tail_quantile(1e-13, r, q)
    total = np.exp(nb_log_pmf(np.arange(n + 1), r, q)).sum()
    assert total >= 1 - 1e-12
    assert total <= 1 + 1e-12


@pytest.mark.parametrize("r,q", [(0.0, 0.5), (-1.0, 0.5), (2.0, 1.0), (2.0, -0.1)])
def test_nb_log_pmf_rejects_bad_params(r, q):
    with pytest.raises(DomainError):
        nb_log_pmf(0, r, q)


def test_nb_log_pmf_rejects_non_integer_x():
    with pytest.raises(DomainError):
        nb_log_pmf(1.5, 2.0, 0.5)


def test_binom_log_pmf_values():
    assert binom_log_pmf(0, 0, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert binom_log_pmf(1, 2, 0.5) == pytest.approx(math.log(0.5))
    assert binom_log_pmf(2, 2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert binom_log_pmf(0, 3, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_binom_log_pmf_rejects_y_above_n():
    with pytest.raises(DomainError):
        binom_log_pmf(3, 2, 0.5)


def test_log_sum_exp():
    assert log_sum_exp([math.log(0.5), math.log(0.5)]) == pytest.approx(0.0, abs=1e-15)
    assert log_sum_exp([-np.inf, math.log(0.25)]) == pytest.approx(math.log(0.25))
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + math.log(2))
    assert log_sum_exp([-np.inf, -np.inf]) == -np.inf
    with pytest.raises(DomainError):
        log_sum_exp([])


def test_nb_tail_quantile_is_smallest():
    r, q, eps = 2.0, 0.5, 1e-6
    n = nb_tail_quantile(eps, r, q)
    assert math.exp(nb_log_sf(n, r, q)) < eps
    assert math.exp(nb_log_sf(n - 1, r, q)) >= eps
    assert nb_tail_quantile(eps, r, 0.0) == 0


def test_nb_sample_degenerate():
    rng = make_stream(0)
    assert all(nb_sample(rng, 1.0, 0.0) == 0 for _ in range(50))


def test_nb_sample_mean_and_gof():
    rng = make_stream(11)
    r, q = 2.0, 0.5
    draws = nb_sample(rng, r, q, size=100_000)
    assert draws.dtype == np.int64
    mean = r * q / (1 - q)
    se = math.sqrt(r * q / (1 - q) ** 2 / draws.size)
    assert abs(draws.mean() - mean) < 3 * se
    probs = np.exp(nb_log_pmf(np.arange(31), r, q))
    assert chi_square_gof(draws, probs) > 0.001


def test_binom_sample():
    rng = make_stream(3)
    assert binom_sample(rng, 0, 0.7) == 0
    assert binom_sample(rng, 5, 1.0) == 5
    draws = binom_sample(rng, 10, 0.3, size=100_000)
    se = math.sqrt(10 * 0.3 * 0.7 / draws.size)
    assert abs(draws.mean() - 3.0) < 3 * se
    probs = np.exp(binom_log_pmf(np.arange(11), 10, 0.3))
    assert chi_square_gof(draws, probs) > 0.001


@pytest.mark.parametrize("n,theta", [(1, 0.5), (7, 0.05), (25, 0.8)])
def test_binom_sample_gof(n, theta):
    draws = binom_sample(make_stream(n), n, theta, size=50_000)
    probs = np.exp(binom_log_pmf(np.arange(n + 1), n, theta))
    assert chi_square_gof(draws, probs) > 0.001


def test_substreams_are_reproducible_and_distinct():
    a = substream(42, 3).integers(0, 2**31, size=5)
    b = substream(42, 3).integers(0, 2**31, size=5)
    c = substream(42, 4).integers(0, 2**31, size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    streams = spawn_streams(42, 5)
    np.testing.assert_array_equal(streams[3].integers(0, 2**31, size=5), a)
