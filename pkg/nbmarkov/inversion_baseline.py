"""Transition probabilities by inverting the conditional pgf on the unit circle.

This is the slow reference path the closed form is benchmarked against: each
transition needs its own set of pgf samples and an inverse DFT.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from nbmarkov.config import DEFAULT_EPS
from nbmarkov.distributions import nb_log_sf, substream
from nbmarkov.errors import AccuracyError, DomainError
from nbmarkov.inference import log_likelihood
from nbmarkov.process import ModelParams, TransitionRow, stationary_log_pmf, support_bound, theta, transition_row
from nbmarkov.simulate import Equal, TimeSeries, simulate_path

logger = logging.getLogger(__name__)

ALIASING_TOL = 1e-8

GRID_PRESETS: Dict[str, List[ModelParams]] = {
    "small": [
        ModelParams(r=2.0, q=0.5, c=0.5),
        ModelParams(r=5.0, q=0.7, c=1.0),
    ],
    "paper-like": [
        ModelParams(r=2.0, q=0.3, c=0.5),
        ModelParams(r=2.0, q=0.5, c=0.5),
        ModelParams(r=2.0, q=0.7, c=0.5),
        ModelParams(r=5.0, q=0.3, c=1.0),
        ModelParams(r=5.0, q=0.5, c=1.0),
        ModelParams(r=5.0, q=0.7, c=1.0),
        ModelParams(r=6.0, q=0.6, c=0.7),
        ModelParams(r=6.0865, q=0.6031, c=0.6848),
    ],
}


@dataclass(frozen=True)
class PgfQuery:
    params: ModelParams
    t: float
    x0: int
    n_points: int

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(f"t must be positive, got {self.t}")
        if self.x0 < 0 or int(self.x0) != self.x0:
            raise DomainError(f"x0 must be a non-negative integer, got {self.x0}")
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise DomainError(f"n_points must be a power of two >= 8, got {n}")


def default_n_points(params: ModelParams, t: float, x0: int, eps: float = DEFAULT_EPS,
                     min_support: int = 0) -> int:
    """Smallest power of two covering four times the truncated support."""
    n = max(support_bound(params, t, x0, eps), min_support) + 1
    return max(8, 1 << (4 * n - 1).bit_length())


def make_query(params: ModelParams, t: float, x0: int, n_points: Optional[int] = None) -> PgfQuery:
    return PgfQuery(params, float(t), int(x0), n_points or default_n_points(params, t, x0))


def pgf_eval(query: PgfQuery, z):
    """E[z^{X_t} | X_0 = x0] on |z| = 1, principal branch for the real power r."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(np.abs(z) - 1.0) > 1e-12):
        raise DomainError("pgf_eval is only defined here on the unit circle")
    params = query.params
    th = theta(params, query.t)
    qt = params.q * (1.0 - th)
    if not qt < 1.0:
        raise DomainError(f"pole 1/{qt} reaches the unit circle")
    xi = (1.0 - z) / (1.0 - qt * z)
    base = (1.0 - xi) / z
    if np.any(base.real <= 0):
        raise AccuracyError(f"NB factor left the right half-plane (min real part {base.real.min()})")
    out = np.power(base, params.r) * np.power(1.0 - th * xi, query.x0)
    if out.ndim == 0:
        return complex(out)
    return out


def _tail_beyond(query: PgfQuery, n: int) -> float:
    """Upper bound on P(X_t > n - 1 | X_0 = x0)."""
    k = n - 1 - query.x0
    if k < 0:
        return 1.0
    qt = query.params.q * (1.0 - theta(query.params, query.t))
    return float(np.exp(nb_log_sf(k, query.params.r + query.x0, qt)))


def invert_transition_row(query: PgfQuery, strict: bool = True) -> TransitionRow:
    n = query.n_points
    z = np.exp(2j * np.pi * np.arange(n) / n)
    probs = np.fft.fft(pgf_eval(query, z)).real / n
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()

    half = n // 2
    tail = _tail_beyond(query, half)
    if strict and tail > ALIASING_TOL:
        raise AccuracyError(f"tail mass {tail:.3g} beyond {half} points exceeds {ALIASING_TOL}; raise n_points")
    kept = probs[:half]
    return TransitionRow(x0=query.x0, t=query.t, probs=kept,
                         truncation_mass=max(0.0, 1.0 - float(kept.sum())))


def inversion_log_likelihood(params: ModelParams, series: TimeSeries, include_initial: bool = True) -> float:
    """Log-likelihood assembled from one inverted row per transition."""
    if len(series) < 2:
        raise DomainError(f"need at least 2 observations, got {len(series)}")
    total = stationary_log_pmf(params, int(series.counts[0])) if include_initial else 0.0
    for dt, x0, x1 in zip(series.gaps(), series.counts[:-1], series.counts[1:]):
        n_points = default_n_points(params, dt, int(x0), min_support=int(x1))
        row = invert_transition_row(make_query(params, dt, x0, n_points))
        with np.errstate(divide="ignore"):
            total += float(np.log(row.prob(int(x1))))
    return total


# --------- benchmark ---------
@dataclass
class BenchCell:
    label: str
    n_obs: int
    exact_time: float
    inversion_time: float
    max_diff: float
    loglik_diff: float

    @property
    def ratio(self) -> float:
        return self.inversion_time / self.exact_time


@dataclass
class BenchReport:
    grid: str
    repetitions: int
    cells: List[BenchCell] = field(default_factory=list)

    @property
    def max_discrepancy(self) -> float:
        return max(cell.max_diff for cell in self.cells)

    @property
    def min_ratio(self) -> float:
        return min(cell.ratio for cell in self.cells)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "cell": cell.label,
            "n_obs": cell.n_obs,
            "exact_time": cell.exact_time,
            "inversion_time": cell.inversion_time,
            "ratio": cell.ratio,
            "max_diff": cell.max_diff,
            "loglik_diff": cell.loglik_diff,
        } for cell in self.cells])


def _median_time(fn, repetitions: int) -> float:
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _row_discrepancy(params: ModelParams, t: float, x0: int) -> float:
    exact = transition_row(params, t, x0)
    inverted = invert_transition_row(make_query(params, t, x0))
    width = min(len(exact.probs), len(inverted.probs))
    return float(np.max(np.abs(exact.probs[:width] - inverted.probs[:width])))


def bench_compare(grid: Sequence[ModelParams], repetitions: int = 3, series_length: int = 240,
                  seed: int = 0, label: str = "custom") -> BenchReport:
    """Median wall time of the full likelihood, closed form against inversion, per grid cell."""
    if not grid:
        raise DomainError("bench grid must not be empty")
    if repetitions < 1:
        raise DomainError(f"repetitions must be at least 1, got {repetitions}")
    report = BenchReport(grid=label, repetitions=repetitions)
    for index, params in enumerate(grid):
        series = simulate_path(substream(seed, index), params, Equal(dt=1.0, n=series_length))
        exact_ll = log_likelihood(params, series)
        inversion_ll = inversion_log_likelihood(params, series)
        exact_time = _median_time(lambda: log_likelihood(params, series), repetitions)
        inversion_time = _median_time(lambda: inversion_log_likelihood(params, series), repetitions)
        probes = sorted({0, int(np.median(series.counts)), int(series.counts.max())})
        max_diff = max(_row_discrepancy(params, 1.0, x0) for x0 in probes)
        cell = BenchCell(
            label=f"r={params.r:g},q={params.q:g},c={params.c:g}",
            n_obs=series_length,
            exact_time=exact_time,
            inversion_time=inversion_time,
            max_diff=max_diff,
            loglik_diff=abs(exact_ll - inversion_ll),
        )
        logger.info("%s: exact %.4fs, inversion %.4fs, ratio %.1f", cell.label, exact_time,
                    inversion_time, cell.ratio)
        report.cells.append(cell)
    return report
