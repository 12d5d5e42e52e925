"""Exact path simulation through the branching equation X_t = Y + Z.

Each of the x0 individuals survives the interval independently with probability
theta_t (binomial thinning); immigration and births over the interval give
Z ~ NB(r + Y, q(1 - theta_t)).
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from nbmarkov.distributions import RandomStream, binom_sample, make_stream, nb_sample, substream
from nbmarkov.errors import DomainError
from nbmarkov.process import ModelParams, theta

logger = logging.getLogger(__name__)


# --------- schedules ---------
@dataclass(frozen=True)
class Equal:
    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.n < 1:
            raise DomainError(f"n must be at least 1, got {self.n}")

    def times(self, rng: Optional[RandomStream] = None) -> np.ndarray:
        return self.dt * np.arange(self.n, dtype=float)


@dataclass(frozen=True)
class ExponentialArrivals:
    """Cumulative arrival times with Exp(rate) gaps, starting at time 0."""
    rate: float
    n: int
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"rate must be positive, got {self.rate}")
        if self.n < 1:
            raise DomainError(f"n must be at least 1, got {self.n}")

    def times(self, rng: Optional[RandomStream] = None) -> np.ndarray:
        if self.seed is not None or rng is None:
            rng = make_stream(self.seed)
        gaps = rng.exponential(scale=1.0 / self.rate, size=self.n - 1)
        # a zero gap has probability zero but would break strict ordering
        gaps = np.maximum(gaps, np.finfo(float).tiny)
        return np.concatenate([[0.0], np.cumsum(gaps)])


@dataclass(frozen=True)
class Explicit:
    stamps: tuple

    def __post_init__(self):
        stamps = np.asarray(self.stamps, dtype=float)
        if stamps.size < 1:
            raise DomainError("explicit schedule needs at least one time stamp")
        if stamps[0] < 0:
            raise DomainError(f"time stamps must start at or after 0, got {stamps[0]}")
        if np.any(np.diff(stamps) <= 0):
            raise DomainError("time stamps must be strictly increasing")
        object.__setattr__(self, "stamps", tuple(stamps.tolist()))

    @property
    def n(self) -> int:
        return len(self.stamps)

    def times(self, rng: Optional[RandomStream] = None) -> np.ndarray:
        return np.asarray(self.stamps, dtype=float)


SampleSchedule = Union[Equal, ExponentialArrivals, Explicit]


# --------- observed path ---------
@dataclass
class TimeSeries:
    times: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        counts = np.asarray(self.counts)
        if self.times.ndim != 1 or counts.ndim != 1 or len(self.times) != len(counts):
            raise DomainError(f"times and counts must be 1-D of equal length, got {self.times.shape} and {counts.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")
        if np.any(counts < 0) or np.any(counts != np.floor(counts)):
            raise DomainError("counts must be non-negative integers")
        self.counts = counts.astype(np.int64)

    def __len__(self) -> int:
        return len(self.counts)

    def gaps(self) -> np.ndarray:
        return np.diff(self.times)

    def head(self, n: int) -> "TimeSeries":
        return TimeSeries(self.times[:n].copy(), self.counts[:n].copy())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "count": self.counts})

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "TimeSeries":
        return cls(df["time"].to_numpy(dtype=float), df["count"].to_numpy())


# --------- sampling ---------
def draw_stationary(rng: RandomStream, params: ModelParams, size=None):
    return nb_sample(rng, params.r, params.q, size=size)


def step(rng: RandomStream, params: ModelParams, x0, dt: float):
    """Advance state(s) x0 by dt; x0 may be an array of independent states."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    return _branch(rng, params, x0, theta(params, dt))


def _branch(rng: RandomStream, params: ModelParams, x0, th: float):
    survivors = binom_sample(rng, x0, th)
    return survivors + nb_sample(rng, params.r + np.asarray(survivors), params.q * (1.0 - th))


def simulate_path(rng: RandomStream, params: ModelParams, schedule: SampleSchedule,
                  x_init: Optional[int] = None) -> TimeSeries:
    times = schedule.times(rng)
    counts = np.empty(len(times), dtype=np.int64)
    if x_init is None:
        counts[0] = draw_stationary(rng, params)
    else:
        if x_init < 0:
            raise DomainError(f"x_init must be non-negative, got {x_init}")
        counts[0] = x_init
    thetas = np.atleast_1d(theta(params, np.diff(times)))
    for i, th in enumerate(thetas, start=1):
        counts[i] = _branch(rng, params, int(counts[i - 1]), float(th))
    return TimeSeries(times, counts)


def _replicate(args) -> TimeSeries:
    master_seed, index, params, schedule = args
    return simulate_path(substream(master_seed, index), params, schedule)


def replicate_datasets(master_seed: int, params: ModelParams, schedule: SampleSchedule,
                       n_rep: int, max_workers: Optional[int] = None) -> List[TimeSeries]:
    """Replicate i always uses substream i of master_seed, so results do not depend on max_workers."""
    if n_rep < 1:
        raise DomainError(f"n_rep must be at least 1, got {n_rep}")
    jobs = [(master_seed, i, params, schedule) for i in range(n_rep)]
    logger.info("simulating %d replicate paths of length %d", n_rep, schedule.n)
    if max_workers is None or max_workers <= 1:
        return [_replicate(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_replicate, jobs))
