"""Maximum-likelihood fitting of (r, q, c) and the replicate simulation study."""
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit, logit
from scipy.stats import qmc

from nbmarkov.config import DEFAULT_START_BOX, MIN_FIT_LENGTH
from nbmarkov.diagnostics import sample_acf
from nbmarkov.errors import DomainError
from nbmarkov.process import ModelParams, TransitionBatch, stationary_log_pmf, theta
from nbmarkov.simulate import SampleSchedule, TimeSeries, replicate_datasets

logger = logging.getLogger(__name__)

PARAM_NAMES = ("r", "q", "c")


@dataclass
class FitOptions:
    include_initial: bool = True
    n_starts: int = 5
    max_iters: int = 2000
    f_tol: float = 1e-8
    x_tol: float = 1e-6
    start_box: Dict[str, Tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_START_BOX))
    moment_start: bool = True
    initial: Optional[ModelParams] = None
    min_length: int = MIN_FIT_LENGTH
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise DomainError(f"n_starts must be at least 1, got {self.n_starts}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be at least 1, got {self.max_iters}")
        if not (self.f_tol > 0 and self.x_tol > 0):
            raise DomainError(f"tolerances must be positive, got f_tol={self.f_tol}, x_tol={self.x_tol}")
        if self.min_length < 2:
            raise DomainError(f"min_length must be at least 2, got {self.min_length}")
        for name in PARAM_NAMES:
            lo, hi = self.start_box[name]
            if not 0 < lo < hi:
                raise DomainError(f"start box for {name} must satisfy 0 < lo < hi, got ({lo}, {hi})")
        _, hi_q = self.start_box["q"]
        if hi_q >= 1:
            raise DomainError(f"start box for q must stay below 1, got {hi_q}")


@dataclass
class FitResult:
    params_hat: ModelParams
    loglik: float
    converged: bool
    n_evals: int
    start_used: int
    n_iters: int = 0
    degenerate: bool = False
    message: str = ""
    trace: List[float] = field(default_factory=list, repr=False)

    def as_dict(self) -> Dict[str, object]:
        return {
            "r_hat": self.params_hat.r,
            "q_hat": self.params_hat.q,
            "c_hat": self.params_hat.c,
            "loglik": self.loglik,
            "converged": self.converged,
            "n_evals": self.n_evals,
            "start_used": self.start_used,
            "degenerate": self.degenerate,
        }


@dataclass
class StudySummary:
    true_params: ModelParams
    size: int
    n_requested: int
    n_failed: int
    mean: Dict[str, float]
    sd: Dict[str, float]
    estimates: pd.DataFrame = field(repr=False)

    @property
    def n_used(self) -> int:
        return self.n_requested - self.n_failed

    def to_row(self) -> Dict[str, float]:
        row: Dict[str, float] = {"size": self.size}
        for name in PARAM_NAMES:
            row[f"mean_{name}"] = self.mean[name]
            row[f"sd_{name}"] = self.sd[name]
        row["n_used"] = self.n_used
        row["n_failed"] = self.n_failed
        return row


# --------- likelihood ---------
def _check_series(series: TimeSeries, min_length: int = 2) -> None:
    if len(series) < min_length:
        raise DomainError(f"need at least {min_length} observations, got {len(series)}")
    if np.any(series.gaps() <= 0):
        raise DomainError("observation times must be strictly increasing")


def _loglik(params: ModelParams, batch: TransitionBatch, gaps: np.ndarray, x_first: int,
            include_initial: bool) -> float:
    total = float(batch.log_pmf(params.r, params.q, theta(params, gaps)).sum())
    if include_initial:
        total += stationary_log_pmf(params, x_first)
    return total


def log_likelihood(params: ModelParams, series: TimeSeries, include_initial: bool = True) -> float:
    _check_series(series)
    batch = TransitionBatch(series.counts[:-1], series.counts[1:])
    return _loglik(params, batch, series.gaps(), int(series.counts[0]), include_initial)


# --------- reparameterisation ---------
def to_unconstrained(params: ModelParams) -> np.ndarray:
    return np.array([math.log(params.r), float(logit(params.q)), math.log(params.c)])


def from_unconstrained(z: Sequence[float]) -> ModelParams:
    with np.errstate(over="ignore"):
        r, c = np.exp(z[0]), np.exp(z[2])
    return ModelParams(r=float(r), q=float(expit(z[1])), c=float(c))


def moment_estimates(series: TimeSeries) -> Optional[ModelParams]:
    """Method-of-moments (r, q, c), or None when the counts are not over-dispersed."""
    counts = series.counts.astype(float)
    mean = counts.mean()
    var = counts.var(ddof=1)
    if mean <= 0 or var <= mean:
        return None
    q = 1.0 - mean / var
    rho = float(np.clip(sample_acf(counts, 1)[1], 0.05, 0.95))
    try:
        return ModelParams(r=mean * (1.0 - q) / q, q=q, c=-math.log(rho) / float(series.gaps().mean()))
    except DomainError:
        return None


def _start_points(series: TimeSeries, options: FitOptions) -> List[np.ndarray]:
    box = options.start_box
    lo = np.array([math.log(box["r"][0]), float(logit(box["q"][0])), math.log(box["c"][0])])
    hi = np.array([math.log(box["r"][1]), float(logit(box["q"][1])), math.log(box["c"][1])])
    sampler = qmc.LatinHypercube(d=3, rng=np.random.default_rng(options.seed))
    starts = list(qmc.scale(sampler.random(options.n_starts), lo, hi))
    if options.moment_start:
        guess = moment_estimates(series)
        if guess is not None:
            starts.append(to_unconstrained(guess))
    if options.initial is not None:
        starts.append(to_unconstrained(options.initial))
    return starts


# --------- fitting ---------
def fit_mle(series: TimeSeries, options: Optional[FitOptions] = None) -> FitResult:
    options = options or FitOptions()
    _check_series(series, options.min_length)
    batch = TransitionBatch(series.counts[:-1], series.counts[1:])
    gaps = series.gaps()
    x_first = int(series.counts[0])

    def objective(z: np.ndarray) -> float:
        try:
            params = from_unconstrained(z)
        except DomainError:
            return np.inf
        value = _loglik(params, batch, gaps, x_first, options.include_initial)
        return -value if np.isfinite(value) else np.inf

    degenerate = bool(np.all(series.counts == series.counts[0]))
    if degenerate:
        msg = "constant count series: the likelihood has no interior maximum, returning a best-effort fit"
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    results: List[FitResult] = []
    for index, z0 in enumerate(_start_points(series, options)):
        trace: List[float] = []

        def record(intermediate_result):
            trace.append(-float(intermediate_result.fun))

        res = minimize(
            objective, z0, method="Nelder-Mead", callback=record,
            options={"maxiter": options.max_iters, "xatol": options.x_tol, "fatol": options.f_tol},
        )
        loglik = -float(res.fun)
        if not np.isfinite(loglik):
            logger.debug("start %d never reached a finite likelihood", index)
            continue
        results.append(FitResult(
            params_hat=from_unconstrained(res.x),
            loglik=loglik,
            converged=bool(res.status == 0),
            n_evals=int(res.nfev),
            start_used=index,
            n_iters=int(res.nit),
            degenerate=degenerate,
            message=str(res.message),
            trace=trace,
        ))
        logger.debug("start %d: loglik=%.6f converged=%s evals=%d", index, loglik, res.status == 0, res.nfev)

    if not results:
        logger.warning("no start reached a finite likelihood")
        return FitResult(
            params_hat=from_unconstrained(_start_points(series, options)[0]),
            loglik=-np.inf, converged=False, n_evals=0, start_used=0,
            degenerate=degenerate, message="no start reached a finite likelihood",
        )
    best = min(results, key=lambda fr: (-fr.loglik, fr.n_evals, fr.start_used))
    if not best.converged:
        logger.warning("simplex search stopped before tolerance: %s", best.message)
    return best


# --------- simulation study ---------
def _fit_job(args) -> FitResult:
    series, options = args
    return fit_mle(series, options)


def _summarise(true_params: ModelParams, size: int, fits: List[FitResult]) -> StudySummary:
    rows = [dict(zip(PARAM_NAMES, fr.params_hat.as_tuple()), loglik=fr.loglik, converged=fr.converged)
            for fr in fits]
    estimates = pd.DataFrame(rows, columns=[*PARAM_NAMES, "loglik", "converged"])
    used = estimates[estimates["converged"]]
    mean = {name: float(used[name].mean()) if len(used) else float("nan") for name in PARAM_NAMES}
    sd = {name: float(used[name].std(ddof=1)) if len(used) > 1 else 0.0 for name in PARAM_NAMES}
    return StudySummary(true_params=true_params, size=size, n_requested=len(fits),
                        n_failed=int((~estimates["converged"]).sum()), mean=mean, sd=sd,
                        estimates=estimates)


def run_simulation_study(master_seed: int, true_params: ModelParams, schedule: SampleSchedule,
                         n_rep: int, subsample_sizes: Sequence[int],
                         options: Optional[FitOptions] = None,
                         max_workers: Optional[int] = None) -> List[StudySummary]:
    """Fit every replicate on its first ``size`` observations, one summary per size."""
    options = options or FitOptions()
    sizes = list(subsample_sizes)
    for size in sizes:
        if not options.min_length <= size <= schedule.n:
            raise DomainError(f"subsample size {size} must lie in [{options.min_length}, {schedule.n}]")
    datasets = replicate_datasets(master_seed, true_params, schedule, n_rep, max_workers=max_workers)
    jobs = [(series.head(size), options) for size in sizes for series in datasets]
    logger.info("fitting %d replicate datasets at sizes %s", n_rep, sizes)
    if max_workers is None or max_workers <= 1:
        fits = [_fit_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            fits = list(pool.map(_fit_job, jobs))

    summaries = []
    for k, size in enumerate(sizes):
        summary = _summarise(true_params, size, fits[k * n_rep:(k + 1) * n_rep])
        if summary.n_failed:
            logger.warning("size %d: %d of %d replicate fits did not converge", size, summary.n_failed, n_rep)
        summaries.append(summary)
    return summaries


def summaries_to_frame(summaries: Sequence[StudySummary]) -> pd.DataFrame:
    return pd.DataFrame([s.to_row() for s in summaries])
