"""Log-space negative-binomial and binomial primitives.

NB(r, q) has pmf C(x+r-1, x) q^x (1-q)^r on x = 0, 1, 2, ... with real r > 0,
so scipy's ``nbinom(r, 1 - q)`` is the same law.
"""
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy
from scipy.stats import nbinom

from nbmarkov.errors import DomainError

Prob = float
LogProb = float
RandomStream = np.random.Generator
ArrayLike = Union[float, int, Sequence[float], np.ndarray]


def _scalar_or_array(out: np.ndarray):
    if np.ndim(out) == 0:
        return float(out)
    return out


def _check_counts(x: np.ndarray, name: str) -> None:
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise DomainError(f"{name} must be a non-negative integer, got {x}")


def _check_nb(r: np.ndarray, q: np.ndarray) -> None:
    if np.any(~(r > 0)):
        raise DomainError(f"r must be positive, got {r}")
    if np.any(~((q >= 0) & (q < 1))):
        raise DomainError(f"q must lie in [0, 1), got {q}")


def _check_prob(theta: np.ndarray, name: str = "theta") -> None:
    if np.any(~((theta >= 0) & (theta <= 1))):
        raise DomainError(f"{name} must lie in [0, 1], got {theta}")


def log_binom_coeff(a: ArrayLike, k: ArrayLike):
    """log C(a, k) for real a via log-gamma."""
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError(f"k must be non-negative, got {k}")
    if np.any(a - k <= -1):
        raise DomainError(f"log_binom_coeff needs a - k > -1, got a={a}, k={k}")
    return _scalar_or_array(gammaln(a + 1.0) - gammaln(k + 1.0) - gammaln(a - k + 1.0))


def nb_log_pmf(x: ArrayLike, r: ArrayLike, q: ArrayLike):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_counts(x, "x")
    _check_nb(r, q)
    out = gammaln(x + r) - gammaln(r) - gammaln(x + 1.0) + xlogy(x, q) + r * np.log1p(-q)
    return _scalar_or_array(out)


def binom_log_pmf(y: ArrayLike, n: ArrayLike, theta: ArrayLike):
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_counts(y, "y")
    _check_counts(n, "n")
    _check_prob(theta)
    if np.any(y > n):
        raise DomainError(f"binomial outcome y={y} exceeds trials n={n}")
    out = (
        gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
        + xlogy(y, theta) + xlog1py(n - y, -theta)
    )
    return _scalar_or_array(out)


def log_sum_exp(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("log_sum_exp needs at least one value")
    if np.all(values == -np.inf):
        return -np.inf
    return float(logsumexp(values))


def nb_log_sf(x: ArrayLike, r: float, q: Prob):
    """log P(X > x) under NB(r, q)."""
    _check_nb(np.asarray(r, dtype=float), np.asarray(q, dtype=float))
    if q == 0:
        return _scalar_or_array(np.full(np.shape(x), -np.inf))
    return _scalar_or_array(nbinom.logsf(x, r, 1.0 - q))


def nb_tail_quantile(eps: float, r: float, q: Prob) -> int:
    """Smallest N with P(X > N) < eps under NB(r, q)."""
    _check_nb(np.asarray(r, dtype=float), np.asarray(q, dtype=float))
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if q == 0:
        return 0
    dist = nbinom(r, 1.0 - q)
    guess = dist.isf(eps)
    n = int(guess) if np.isfinite(guess) and guess > 0 else 0
    while dist.sf(n) >= eps:
        n += 1
    while n > 0 and dist.sf(n - 1) < eps:
        n -= 1
    return n


# --------- random streams ---------
def make_stream(seed: Optional[int] = None) -> RandomStream:
    return np.random.default_rng(seed)


def substream(master_seed: int, index: int) -> RandomStream:
    """Stream number ``index`` derived from ``master_seed``; independent of how many are drawn."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def spawn_streams(master_seed: int, n: int) -> List[RandomStream]:
    return [substream(master_seed, i) for i in range(n)]


# --------- samplers ---------
def nb_sample(rng: RandomStream, r: ArrayLike, q: ArrayLike, size=None):
    """NB(r, q) draw as a gamma-Poisson mixture, exact for real r."""
    r_arr = np.asarray(r, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    _check_nb(r_arr, q_arr)
    rate = rng.gamma(shape=r_arr, scale=q_arr / (1.0 - q_arr), size=size)
    out = rng.poisson(rate)
    if np.ndim(out) == 0:
        return int(out)
    return out.astype(np.int64)


def binom_sample(rng: RandomStream, n: ArrayLike, theta: ArrayLike, size=None):
    n_arr = np.asarray(n)
    theta_arr = np.asarray(theta, dtype=float)
    _check_counts(n_arr, "n")
    _check_prob(theta_arr)
    out = rng.binomial(n_arr.astype(np.int64), theta_arr, size=size)
    if np.ndim(out) == 0:
        return int(out)
    return out.astype(np.int64)
