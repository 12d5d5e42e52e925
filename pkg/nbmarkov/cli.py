"""Command-line entry point: ``nbmarkov <subcommand> ...``.

Results go to stdout or --out; status lines go to stderr.
Exit codes: 0 success, 1 I/O, 2 validation, 3 non-convergence.
"""
import argparse
import logging
import sys
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from nbmarkov.config import DEFAULT_EPS, DEFAULT_HORIZONS, LOG_LEVEL
from nbmarkov.diagnostics import describe_series
from nbmarkov.distributions import substream
from nbmarkov.errors import AccuracyError, ConvergenceFailure, DomainError, SeriesFormatError, TruncationError
from nbmarkov.forecast import evaluate_rolling
from nbmarkov.inference import FitOptions, fit_mle, run_simulation_study, summaries_to_frame
from nbmarkov.inversion_baseline import GRID_PRESETS, bench_compare
from nbmarkov.process import ModelParams, transition_row
from nbmarkov.series_io import (ensure_parent, format_result, params_from_result, read_result, read_series,
                                write_result, write_series)
from nbmarkov.simulate import Equal, ExponentialArrivals, SampleSchedule, simulate_path

logger = logging.getLogger("nbmarkov")

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3


# --------- run configurations ---------
class ParamsConfig(BaseModel):
    r: float
    q: float
    c: float

    @field_validator("r")
    @classmethod
    def _r_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"r must be positive, got {v}")
        return v

    @field_validator("q")
    @classmethod
    def _q_open_unit(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError(f"q must lie in (0,1), got {v}")
        return v

    @field_validator("c")
    @classmethod
    def _c_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"c must be positive, got {v}")
        return v

    def to_params(self) -> ModelParams:
        return ModelParams(r=self.r, q=self.q, c=self.c)


class ScheduleConfig(BaseModel):
    schedule: Literal["equal", "exponential"] = "equal"
    n: int = Field(ge=1)
    dt: Optional[float] = Field(default=None, gt=0)
    rate: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_spacing(self):
        if self.schedule == "equal" and (self.dt is None or self.rate is not None):
            raise ValueError("--schedule equal needs --dt and no --rate")
        if self.schedule == "exponential" and (self.rate is None or self.dt is not None):
            raise ValueError("--schedule exponential needs --rate and no --dt")
        return self

    def build(self) -> SampleSchedule:
        if self.schedule == "equal":
            return Equal(dt=self.dt, n=self.n)
        return ExponentialArrivals(rate=self.rate, n=self.n)


class SimulateConfig(ParamsConfig, ScheduleConfig):
    seed: Optional[int] = Field(default=None, ge=0)
    out: str


class FitConfig(BaseModel):
    input: str
    include_initial: bool = True
    starts: int = Field(default=5, ge=1)
    out: Optional[str] = None


class StudyConfig(ParamsConfig, ScheduleConfig):
    reps: int = Field(ge=1)
    sizes: List[int]
    seed: Optional[int] = Field(default=None, ge=0)
    starts: int = Field(default=5, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)
    out: Optional[str] = None

    @model_validator(mode="after")
    def _sizes_fit(self):
        if not self.sizes:
            raise ValueError("--sizes needs at least one size")
        for size in self.sizes:
            if not 2 <= size <= self.n:
                raise ValueError(f"size {size} must lie in [2, {self.n}]")
        return self


class TransitionConfig(ParamsConfig):
    t: float = Field(ge=0)
    x0: int = Field(ge=0)
    eps: float = Field(default=DEFAULT_EPS, gt=0, le=1e-4)


class ForecastConfig(BaseModel):
    input: str
    train: int = Field(ge=2)
    horizons: List[int] = list(DEFAULT_HORIZONS)
    refit: bool = True
    params_file: Optional[str] = None
    anchor: Literal["target", "origin"] = "target"
    origins: Optional[int] = Field(default=None, ge=1)
    starts: int = Field(default=5, ge=1)
    out: Optional[str] = None

    @model_validator(mode="after")
    def _fixed_params_no_refit(self):
        if any(h < 1 for h in self.horizons):
            raise ValueError(f"horizons must be positive, got {self.horizons}")
        if self.params_file is not None and self.refit:
            raise ValueError("--params fixes the model; combine it with --no-refit")
        return self


class BenchConfig(BaseModel):
    grid_preset: Literal["small", "paper-like"] = "small"
    reps: int = Field(default=3, ge=1)
    length: int = Field(default=240, ge=2)
    seed: int = Field(default=0, ge=0)
    out: Optional[str] = None


# --------- helpers ---------
def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    seed = int(np.random.SeedSequence().entropy)
    print(f"🎲 no --seed given, using seed {seed}", file=sys.stderr)
    return seed


def _emit_frame(df, out: Optional[str]) -> None:
    if out:
        ensure_parent(out)
        df.to_csv(out, index=False)
        print(f"💾 wrote {out}", file=sys.stderr)
    else:
        df.to_csv(sys.stdout, index=False)


def _format_validation(err: ValidationError) -> str:
    return "; ".join(e["msg"].removeprefix("Value error, ") for e in err.errors())


# --------- subcommands ---------
def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = SimulateConfig(r=args.r, q=args.q, c=args.c, n=args.n, schedule=args.schedule,
                         dt=args.dt, rate=args.rate, seed=args.seed, out=args.out)
    seed = _resolve_seed(cfg.seed)
    print(f"🎯 simulating {cfg.n} observations ({cfg.schedule} spacing)", file=sys.stderr)
    series = simulate_path(substream(seed, 0), cfg.to_params(), cfg.build())
    write_series(series, cfg.out)
    print(f"💾 wrote {cfg.out}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = FitConfig(input=args.input, include_initial=not args.no_initial, starts=args.starts,
                    out=args.out)
    series = read_series(cfg.input)
    if len(series) < 2:
        raise DomainError(f"need at least 2 observations, got {len(series)}")
    print(f"🔍 fitting {len(series)} observations from {cfg.input}", file=sys.stderr)
    summary = describe_series(series, max_lag=1)
    print(f"📊 mean {summary['mean']:.3g}, variance {summary['variance']:.3g}, "
          f"dispersion {summary['dispersion_index']:.3g}, lag-1 acf {summary['acf_1']:.3g}",
          file=sys.stderr)
    result = fit_mle(series, FitOptions(include_initial=cfg.include_initial, n_starts=cfg.starts))
    values = {**result.as_dict(), "include_initial": cfg.include_initial, "n_obs": len(series)}
    sys.stdout.write(format_result(values))
    if cfg.out:
        write_result(values, cfg.out)
        print(f"💾 wrote {cfg.out}", file=sys.stderr)
    if not result.converged:
        raise ConvergenceFailure(f"fit did not converge: {result.message}")
    return EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    cfg = StudyConfig(r=args.r, q=args.q, c=args.c, n=args.n, schedule=args.schedule, dt=args.dt,
                      rate=args.rate, reps=args.reps, sizes=args.sizes or [args.n], seed=args.seed,
                      starts=args.starts, workers=args.workers, out=args.out)
    seed = _resolve_seed(cfg.seed)
    options = FitOptions(n_starts=cfg.starts, min_length=min(cfg.sizes))
    print(f"🧪 study: {cfg.reps} replicates, sizes {cfg.sizes}", file=sys.stderr)
    summaries = run_simulation_study(seed, cfg.to_params(), cfg.build(), cfg.reps, cfg.sizes,
                                     options=options, max_workers=cfg.workers)
    _emit_frame(summaries_to_frame(summaries), cfg.out)
    failed = sum(s.n_failed for s in summaries)
    if failed:
        print(f"⚠️  {failed} replicate fits did not converge and were left out", file=sys.stderr)
    return EXIT_OK


def cmd_transition(args: argparse.Namespace) -> int:
    cfg = TransitionConfig(r=args.r, q=args.q, c=args.c, t=args.t, x0=args.x0, eps=args.eps)
    row = transition_row(cfg.to_params(), cfg.t, cfg.x0, cfg.eps)
    row.to_frame().to_csv(sys.stdout, index=False)
    print(f"# truncation_mass = {row.truncation_mass!r}")
    return EXIT_OK


def cmd_forecast(args: argparse.Namespace) -> int:
    cfg = ForecastConfig(input=args.input, train=args.train, horizons=args.horizons, refit=args.refit,
                         params_file=args.params, anchor=args.anchor, origins=args.origins,
                         starts=args.starts, out=args.out)
    series = read_series(cfg.input)
    params = params_from_result(read_result(cfg.params_file)) if cfg.params_file else None
    mode = "fixed params" if params else ("refit per origin" if cfg.refit else "single fit")
    print(f"📈 forecasting horizons {cfg.horizons} after {cfg.train} observations ({mode})", file=sys.stderr)
    report = evaluate_rolling(series, cfg.train, horizons=cfg.horizons, refit_each_origin=cfg.refit,
                              options=FitOptions(n_starts=cfg.starts, min_length=min(10, cfg.train)),
                              params=params, n_origins=cfg.origins, anchor=cfg.anchor)
    _emit_frame(report.to_frame(), cfg.out)
    for note in report.notes:
        print(f"⚠️  {note}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = BenchConfig(grid_preset=args.grid_preset, reps=args.reps, length=args.length, seed=args.seed,
                      out=args.out)
    grid = GRID_PRESETS[cfg.grid_preset]
    print(f"⏱️  benchmarking {len(grid)} cells ({cfg.grid_preset}), {cfg.reps} repetitions", file=sys.stderr)
    report = bench_compare(grid, repetitions=cfg.reps, series_length=cfg.length, seed=cfg.seed,
                           label=cfg.grid_preset)
    _emit_frame(report.to_frame(), cfg.out)
    print(f"✅ max row discrepancy {report.max_discrepancy:.3g}, min speed-up {report.min_ratio:.1f}x",
          file=sys.stderr)
    return EXIT_OK


# --------- parser ---------
def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=float, required=True, help="NB shape r > 0")
    p.add_argument("--q", type=float, required=True, help="NB probability q in (0,1)")
    p.add_argument("--c", type=float, required=True, help="time-scale c > 0")


def _add_schedule(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="observations per path")
    p.add_argument("--schedule", choices=["equal", "exponential"], default="equal")
    p.add_argument("--dt", type=float, default=None, help="spacing for --schedule equal")
    p.add_argument("--rate", type=float, default=None, help="arrival rate for --schedule exponential")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbmarkov",
                                     description="Stationary negative-binomial Markov count processes")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one path to CSV")
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a time,count CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--no-initial", action="store_true", help="condition on the first observation")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("study", help="replicate simulation study")
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--sizes", type=_int_list, default=None, help="e.g. 250,500,1000")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_study)

    p = sub.add_parser("transition", help="print a transition row as CSV")
    _add_params(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x0", type=int, required=True)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.set_defaults(handler=cmd_transition)

    p = sub.add_parser("forecast", help="rolling-origin forecast evaluation")
    p.add_argument("--input", required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--horizons", type=_int_list, default=list(DEFAULT_HORIZONS))
    p.add_argument("--refit", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--params", default=None, help="fit result file to forecast with (needs --no-refit)")
    p.add_argument("--anchor", choices=["target", "origin"], default="target")
    p.add_argument("--origins", type=int, default=None)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_forecast)

    p = sub.add_parser("bench", help="closed form against pgf inversion")
    p.add_argument("--grid-preset", choices=sorted(GRID_PRESETS), default="small")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--length", type=int, default=240)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else LOG_LEVEL,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logger.debug("running %s", args.command)
    try:
        return args.handler(args)
    except ValidationError as e:
        print(f"❌ {_format_validation(e)}", file=sys.stderr)
        return EXIT_VALIDATION
    except SeriesFormatError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO
    except DomainError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceFailure, TruncationError, AccuracyError) as e:
        logger.debug("numerical failure", exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
