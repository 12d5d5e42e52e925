"""h-step point and density forecasts and rolling-origin evaluation.

Point forecasts are conditional means (real valued). Density forecasts are the
h-step transition law itself, which is exact by the semigroup property, so no
one-step plug-in iteration is needed.
"""
import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd

from nbmarkov.config import DEFAULT_EPS, DEFAULT_HORIZONS
from nbmarkov.errors import DomainError
from nbmarkov.inference import FitOptions, FitResult, fit_mle
from nbmarkov.process import ModelParams, TransitionRow, conditional_mean, transition_log_pmf, transition_row
from nbmarkov.simulate import TimeSeries

logger = logging.getLogger(__name__)

Anchor = Literal["target", "origin"]


@dataclass
class ForecastEval:
    horizons: List[int]
    mse_per_h: List[float]
    pl_per_h: List[float]
    n_origins: int
    refit_each_origin: bool
    anchor: str = "target"
    n_fallbacks: int = 0
    notes: List[str] = field(default_factory=list, repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"horizon": self.horizons, "mse": self.mse_per_h, "pl": self.pl_per_h})


def point_forecast(params: ModelParams, x_last: int, horizon_time: float) -> float:
    if not horizon_time > 0:
        raise DomainError(f"horizon_time must be positive, got {horizon_time}")
    return conditional_mean(params, horizon_time, x_last)


def density_forecast(params: ModelParams, x_last: int, horizon_time: float,
                     eps: float = DEFAULT_EPS) -> TransitionRow:
    if not horizon_time > 0:
        raise DomainError(f"horizon_time must be positive, got {horizon_time}")
    return transition_row(params, horizon_time, x_last, eps)


def mse(predictions: Sequence[float], actuals: Sequence[float]) -> float:
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape or predictions.size == 0:
        raise DomainError("predictions and actuals must be non-empty and of equal length")
    return float(np.mean((predictions - actuals) ** 2))


def log_score(log_probs: Sequence[float]) -> float:
    log_probs = np.asarray(log_probs, dtype=float)
    if log_probs.size == 0:
        raise DomainError("log_score needs at least one value")
    return float(np.mean(log_probs))


def _pairs(n_series: int, n_train: int, horizons: List[int], n_origins: Optional[int],
           anchor: Anchor) -> Dict[int, List[tuple]]:
    """(origin, target) index pairs per horizon; every horizon gets the same count."""
    max_h = max(horizons)
    if n_train + max_h > n_series:
        raise DomainError(f"train window {n_train} plus horizon {max_h} exceeds series length {n_series}")
    if anchor == "target":
        if n_train < max_h:
            raise DomainError(f"train window {n_train} is shorter than horizon {max_h}")
        available = n_series - n_train
    elif anchor == "origin":
        available = n_series - n_train - max_h + 1
    else:
        raise DomainError(f"anchor must be 'target' or 'origin', got {anchor!r}")
    n_eval = available if n_origins is None else n_origins
    if not 1 <= n_eval <= available:
        raise DomainError(f"n_origins must lie in [1, {available}], got {n_origins}")

    pairs: Dict[int, List[tuple]] = {}
    for h in horizons:
        if anchor == "target":
            pairs[h] = [(n_train + i - h, n_train + i) for i in range(n_eval)]
        else:
            pairs[h] = [(n_train - 1 + i, n_train - 1 + i + h) for i in range(n_eval)]
    return pairs


def evaluate_rolling(series: TimeSeries, n_train: int,
                     horizons: Sequence[int] = DEFAULT_HORIZONS,
                     refit_each_origin: bool = True,
                     options: Optional[FitOptions] = None,
                     params: Optional[ModelParams] = None,
                     n_origins: Optional[int] = None,
                     anchor: Anchor = "target") -> ForecastEval:
    """Rolling-origin MSE and log predictive score per horizon.

    With anchor="target" the forecast of each target at horizon h conditions on
    the observation h steps before it; with anchor="origin" every horizon starts
    from the same origins. Refits use the data up to and including the origin,
    origins before the end of the training window included; an origin with fewer
    than options.min_length observations falls back to the in-sample fit.
    """
    horizons = sorted(int(h) for h in horizons)
    if not horizons or horizons[0] < 1:
        raise DomainError(f"horizons must be positive integers, got {horizons}")
    if params is not None and refit_each_origin:
        raise DomainError("fixed params cannot be combined with refit_each_origin")
    options = options or FitOptions()
    pairs = _pairs(len(series), n_train, horizons, n_origins, anchor)
    origins = sorted({o for plist in pairs.values() for o, _ in plist})

    notes: List[str] = []
    fitted: Dict[int, ModelParams] = {}
    if params is not None:
        fitted = {o: params for o in origins}
    else:
        base = fit_mle(series.head(n_train), options)
        if not base.converged:
            notes.append(f"in-sample fit on {n_train} observations did not converge")
            logger.warning(notes[-1])
        previous: FitResult = base
        for o in origins:
            if not refit_each_origin or o == n_train - 1:
                fitted[o] = base.params_hat
                continue
            if o + 1 < options.min_length:
                notes.append(f"origin {o} has fewer than {options.min_length} observations, using the in-sample fit")
                logger.warning(notes[-1])
                fitted[o] = base.params_hat
                continue
            warm = previous if o >= n_train else base
            result = fit_mle(series.head(o + 1), dataclasses.replace(options, initial=warm.params_hat))
            if result.converged:
                fitted[o] = result.params_hat
                if o >= n_train:
                    previous = result
                continue
            notes.append(f"refit at origin {o} did not converge, keeping the previous fit")
            logger.warning(notes[-1])
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            fitted[o] = warm.params_hat

    times, counts = series.times, series.counts
    mse_per_h: List[float] = []
    pl_per_h: List[float] = []
    for h in horizons:
        predictions, actuals, log_probs = [], [], []
        for o, j in pairs[h]:
            dt = float(times[j] - times[o])
            predictions.append(point_forecast(fitted[o], int(counts[o]), dt))
            actuals.append(int(counts[j]))
            log_probs.append(transition_log_pmf(fitted[o], dt, int(counts[o]), int(counts[j])))
        mse_per_h.append(mse(predictions, actuals))
        pl_per_h.append(log_score(log_probs))

    n_eval = len(next(iter(pairs.values())))
    return ForecastEval(horizons=horizons, mse_per_h=mse_per_h, pl_per_h=pl_per_h, n_origins=n_eval,
                        refit_each_origin=refit_each_origin, anchor=anchor,
                        n_fallbacks=sum("refit at origin" in n for n in notes), notes=notes)
