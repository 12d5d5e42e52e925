"""Distributional and descriptive checks for counts and count series."""
from typing import Dict, List

import numpy as np
from scipy.stats import chisquare

from nbmarkov.errors import DomainError
from nbmarkov.simulate import TimeSeries


def chi_square_gof(samples, probs, min_expected: float = 5.0) -> float:
    """p-value of a chi-square test of integer samples against pmf values probs[0..K-1].

    Adjacent cells are pooled left to right until each expects at least
    ``min_expected`` draws; the mass beyond K joins the last pooled cell.
    """
    samples = np.asarray(samples, dtype=np.int64).ravel()
    probs = np.asarray(probs, dtype=float)
    if samples.size == 0:
        raise DomainError("chi_square_gof needs at least one sample")
    if np.any(samples < 0):
        raise DomainError("samples must be non-negative integers")
    n = samples.size
    counts = np.bincount(samples, minlength=len(probs))

    observed: List[float] = []
    expected: List[float] = []
    acc_o = acc_e = 0.0
    for o, p in zip(counts[:len(probs)], probs):
        acc_o += o
        acc_e += n * p
        if acc_e >= min_expected:
            observed.append(acc_o)
            expected.append(acc_e)
            acc_o = acc_e = 0.0
    acc_o += counts[len(probs):].sum()
    acc_e += n * max(0.0, 1.0 - probs.sum())
    if observed:
        observed[-1] += acc_o
        expected[-1] += acc_e
    if len(observed) < 2:
        return 1.0
    exp = np.asarray(expected)
    exp *= n / exp.sum()
    return float(chisquare(np.asarray(observed), exp).pvalue)


def sample_acf(counts, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag."""
    x = np.asarray(counts, dtype=float)
    if max_lag < 0 or max_lag >= len(x):
        raise DomainError(f"max_lag must lie in [0, {len(x) - 1}], got {max_lag}")
    x = x - x.mean()
    denom = np.dot(x, x)
    if denom == 0:
        return np.concatenate([[1.0], np.zeros(max_lag)])
    return np.array([np.dot(x[:len(x) - k], x[k:]) / denom for k in range(max_lag + 1)])


def describe_series(series: TimeSeries, max_lag: int = 5) -> Dict[str, float]:
    counts = series.counts.astype(float)
    mean = float(counts.mean())
    variance = float(counts.var(ddof=1)) if len(counts) > 1 else 0.0
    out = {
        "n": float(len(counts)),
        "mean": mean,
        "variance": variance,
        "dispersion_index": variance / mean if mean > 0 else float("nan"),
        "mean_gap": float(series.gaps().mean()) if len(counts) > 1 else float("nan"),
    }
    lags = min(max_lag, len(counts) - 1)
    for k, value in enumerate(sample_acf(counts, lags)[1:], start=1):
        out[f"acf_{k}"] = float(value)
    return out
