"""Stationary negative-binomial Markov process: parameters, theta_t and transition laws.

Given X_0 = x0, the state after time t is Y + Z with Y ~ Bin(x0, theta_t) and
Z ~ NB(r + Y, q(1 - theta_t)), where theta_t = (1 - q) / (e^{ct} - q). Summing
over y gives the finite-mixture transition pmf evaluated here in log space.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from nbmarkov.config import DEFAULT_EPS, LOG_THETA_SWITCH, MAX_SUPPORT
from nbmarkov.distributions import LogProb, Prob, nb_log_pmf, nb_tail_quantile
from nbmarkov.errors import DomainError, TruncationError

logger = logging.getLogger(__name__)


# --------- parameters ---------
@dataclass(frozen=True)
class ModelParams:
    r: float
    q: float
    c: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise DomainError(f"r must be positive, got {self.r}")
        if not 0 < self.q < 1:
            raise DomainError(f"q must lie in (0,1), got {self.q}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"c must be positive, got {self.c}")

    @property
    def stationary_mean(self) -> float:
        return self.r * self.q / (1.0 - self.q)

    @property
    def stationary_variance(self) -> float:
        return self.r * self.q / (1.0 - self.q) ** 2

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.r, self.q, self.c)


@dataclass(frozen=True)
class BDIRates:
    """Per-individual birth (lam), death (mu) and immigration (nu) rates."""
    lam: float
    mu: float
    nu: float

    def __post_init__(self):
        if self.lam < 0 or self.nu < 0:
            raise DomainError(f"birth and immigration rates must be non-negative, got lam={self.lam}, nu={self.nu}")
        if not self.mu > 0:
            raise DomainError(f"death rate must be positive, got mu={self.mu}")


@dataclass
class TransitionRow:
    x0: int
    t: float
    probs: np.ndarray
    truncation_mass: float

    @property
    def support(self) -> np.ndarray:
        return np.arange(len(self.probs))

    def prob(self, x: int) -> float:
        if 0 <= x < len(self.probs):
            return float(self.probs[x])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.support - m) ** 2, self.probs))

    def mode(self) -> int:
        return int(np.argmax(self.probs))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.support, "probability": self.probs})


# --------- theta_t ---------
def _theta_values(q: float, c: float, t: np.ndarray) -> np.ndarray:
    ct = c * np.asarray(t, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        direct = (1.0 - q) / (np.expm1(np.minimum(ct, LOG_THETA_SWITCH)) + (1.0 - q))
        far = np.exp(np.log1p(-q) - ct - np.log1p(-q * np.exp(-ct)))
    return np.where(ct > LOG_THETA_SWITCH, far, direct)


def theta(params: ModelParams, t) -> Prob:
    """Thinning probability (1 - q) / (e^{ct} - q); equals 1 at t = 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 0)):
        raise DomainError(f"t must be non-negative, got {t}")
    out = _theta_values(params.q, params.c, t_arr)
    if out.ndim == 0:
        return float(out)
    return out


# --------- transition kernel ---------
class TransitionBatch:
    """Transition log-pmfs for a fixed set of pairs (x0, x1).

    The parameter-free log-combinatorics are computed once, so repeated
    evaluation under different (r, q, theta) only touches the parameter terms.
    """

    def __init__(self, x0, x1):
        x0, x1 = np.broadcast_arrays(np.asarray(x0), np.asarray(x1))
        for name, arr in (("x0", x0), ("x1", x1)):
            if np.any(arr < 0) or np.any(arr != np.floor(arr)):
                raise DomainError(f"{name} must hold non-negative integers")
        self.shape = x0.shape
        x0 = x0.astype(float).ravel()[:, None]
        x1 = x1.astype(float).ravel()[:, None]
        low = np.minimum(x0, x1)
        width = int(low.max()) + 1 if low.size else 1
        y = np.minimum(np.arange(width, dtype=float)[None, :], low)

        self._mask = np.arange(width)[None, :] <= low
        self._y = y
        self._x1 = x1
        self._gap0 = x0 - y
        self._gap1 = x1 - y
        self._const = (
            gammaln(x0 + 1.0) - gammaln(y + 1.0) - gammaln(self._gap0 + 1.0)
            - gammaln(self._gap1 + 1.0)
        )

    def __len__(self) -> int:
        return self._x1.shape[0]

    def log_pmf(self, r: float, q: float, theta_value) -> np.ndarray:
        th = np.asarray(theta_value, dtype=float)
        if th.ndim > 0:
            th = th.ravel()[:, None]
        qt = q * (1.0 - th)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = (
                self._const + gammaln(self._x1 + r) - gammaln(r + self._y)
                + xlogy(self._gap1, qt) + (r + self._y) * np.log1p(-qt)
                + xlogy(self._y, th) + xlog1py(self._gap0, -th)
            )
            terms = np.where(self._mask, terms, -np.inf)
            out = logsumexp(terms, axis=1)
        return out.reshape(self.shape)


def discrete_transition_log_pmf(r: float, q: Prob, theta_value: Prob, x0, x1) -> LogProb:
    """log sum_y NB(x1 - y; r + y, q(1 - theta)) Bin(y; x0, theta)."""
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    if not 0 <= q < 1:
        raise DomainError(f"q must lie in [0, 1), got {q}")
    th = np.asarray(theta_value, dtype=float)
    if np.any(~((th >= 0) & (th <= 1))):
        raise DomainError(f"theta must lie in [0, 1], got {theta_value}")
    out = TransitionBatch(x0, x1).log_pmf(r, q, th)
    if np.ndim(out) == 0:
        return float(out)
    return out


def transition_log_pmf(params: ModelParams, t: float, x0, x1) -> LogProb:
    return discrete_transition_log_pmf(params.r, params.q, theta(params, t), x0, x1)


def support_bound(params: ModelParams, t: float, x0: int, eps: float = DEFAULT_EPS) -> int:
    """Smallest N with P(X_t > N | X_0 = x0) < eps, via X_t <= x0 + NB(r + x0, q(1 - theta_t))."""
    qt = params.q * (1.0 - theta(params, t))
    n = int(x0) + nb_tail_quantile(eps, params.r + x0, qt)
    if n > MAX_SUPPORT:
        raise TruncationError(f"transition row needs {n} support points, cap is {MAX_SUPPORT}")
    return n


def transition_row(params: ModelParams, t: float, x0: int, eps: float = DEFAULT_EPS) -> TransitionRow:
    if not 0 < eps <= 1e-4:
        raise DomainError(f"eps must lie in (0, 1e-4], got {eps}")
    if x0 < 0 or int(x0) != x0:
        raise DomainError(f"x0 must be a non-negative integer, got {x0}")
    x0 = int(x0)
    n = support_bound(params, t, x0, eps)
    logger.debug("transition row x0=%d t=%g spans %d points", x0, t, n + 1)
    probs = np.exp(transition_log_pmf(params, t, x0, np.arange(n + 1)))
    truncation_mass = max(0.0, 1.0 - float(probs.sum()))
    return TransitionRow(x0=x0, t=float(t), probs=probs, truncation_mass=truncation_mass)


def stationary_log_pmf(params: ModelParams, x) -> LogProb:
    return nb_log_pmf(x, params.r, params.q)


# --------- birth-death-immigration view ---------
def to_rates(params: ModelParams) -> BDIRates:
    scale = params.c / (1.0 - params.q)
    return BDIRates(lam=scale * params.q, mu=scale, nu=scale * params.q * params.r)


def from_rates(rates: BDIRates) -> ModelParams:
    if not rates.mu > rates.lam:
        raise DomainError(f"no stationary law unless mu > lam, got mu={rates.mu}, lam={rates.lam}")
    if not rates.lam > 0 or not rates.nu > 0:
        raise DomainError(f"lam and nu must be positive, got lam={rates.lam}, nu={rates.nu}")
    return ModelParams(r=rates.nu / rates.lam, q=rates.lam / rates.mu, c=rates.mu - rates.lam)


def generator_rates(params: ModelParams, i: int) -> Dict[int, float]:
    """Row i of the infinitesimal generator; the state -1 is left out at i = 0."""
    if i < 0:
        raise DomainError(f"state must be non-negative, got {i}")
    scale = params.c / (1.0 - params.q)
    down = scale * i
    up = scale * params.q * (i + params.r)
    rates: Dict[int, float] = {}
    if i > 0:
        rates[i - 1] = down
    rates[i + 1] = up
    rates[i] = -(down + up)
    return rates


# --------- conditional moments ---------
def conditional_mean(params: ModelParams, t: float, x0: float) -> float:
    """E[X_t | X_0 = x0] = x0 e^{-ct} + m (1 - e^{-ct})."""
    if not t >= 0:
        raise DomainError(f"t must be non-negative, got {t}")
    ct = params.c * t
    return x0 * math.exp(-ct) - params.stationary_mean * math.expm1(-ct)


def conditional_variance(params: ModelParams, t: float, x0: float) -> float:
    if not t >= 0:
        raise DomainError(f"t must be non-negative, got {t}")
    th = theta(params, t)
    qt = params.q * (1.0 - th)
    odds = qt / (1.0 - qt)
    return (params.r + x0 * th) * odds / (1.0 - qt) + (1.0 + odds) ** 2 * x0 * th * (1.0 - th)
