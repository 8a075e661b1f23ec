"""
Experiment Service Implementation
=================================

Parses experiment configs, runs their sweeps (points concurrently, results
in grid order), fits them against the predictions and writes
sweeps.csv, verdicts.csv and summary.json.
"""

import asyncio
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from schemas.command_schemas import get_experiment_config_schema
from services.cache_service import ProfileCache
from services.norm_service import PQPair
from services.oscillator_service import band_kernel
from services.rate_service import (
    VERDICT_COLUMNS,
    ExperimentOutcome,
    FitError,
    FitResult,
    NoClaim,
    Prediction,
    SweepError,
    band_prediction,
    crucial_point,
    crucial_setup,
    finish_crucial,
    finish_theorem,
    k12_exponential_check,
    lemma_exp_check,
    record_crucial_point,
    residual_experiment,
    sweep_point,
    theorem_setup,
    tolerance,
)
from services.spectra_service import QuadratureSpec
from services.symbol_service import DissipationSymbol, SymbolError, custom_symbol, model_zoo, symbol_fingerprint
from utils.formatting import render_csv, render_json, write_atomic
from utils.validation import parse_exponent, validate_arguments

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["symbol", "band", "n", "kind", "p", "q", "r", "t", "tau", "value", "quad_error", "failure"]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Raised when an experiment config does not parse or validate."""


@dataclass(frozen=True)
class SweepGrid:
    variable: str
    start: float
    stop: float
    points: int

    def values(self) -> np.ndarray:
        return np.geomspace(self.start, self.stop, self.points)

    def to_dict(self) -> Dict[str, Any]:
        return {"variable": self.variable, "start": self.start, "stop": self.stop, "points": self.points}


@dataclass(frozen=True)
class NoClaimExpectation:
    band: str
    n: Optional[int] = None
    pair: Optional[Tuple[float, float]] = None

    def covers(self, band: str, n: int, pair: Tuple[float, float]) -> bool:
        return (
            self.band == band
            and (self.n is None or self.n == n)
            and (self.pair is None or self.pair == pair)
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"band": self.band}
        if self.n is not None:
            data["n"] = self.n
        if self.pair is not None:
            data["pair"] = list(self.pair)
        return data


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: what to sweep, how to integrate, what to compare against."""

    name: str
    kind: str
    sweep: SweepGrid
    symbol: Dict[str, Any] = field(default_factory=dict)
    bands: Tuple[str, ...] = ("low",)
    pairs: Tuple[Tuple[float, float], ...] = ()
    dims: Tuple[int, ...] = (3,)
    window: Optional[Tuple[float, float]] = None
    quadrature: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    tolerance_scale: float = 1.0
    seed: int = 0
    threads: int = config.default_threads
    output: str = "results"
    transform: str = "hankel"
    use_cache: bool = True
    theta: float = 2.0
    eta: float = 0.0
    r: float = math.inf
    order: int = 0
    margin: float = 0.2
    expect_no_claim: Tuple[NoClaimExpectation, ...] = ()
    description: str = ""

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build and validate a config.

        Raises:
            ConfigError: schema violations or inconsistent settings
        """
        if not isinstance(data, dict):
            raise ConfigError("An experiment config must be a JSON object")
        validation = validate_arguments(data, get_experiment_config_schema())
        if not validation["valid"]:
            raise ConfigError("; ".join(validation["errors"]))

        window = data.get("window")
        cfg = cls(
            name=data["name"],
            kind=data["kind"],
            sweep=SweepGrid(**data["sweep"]),
            symbol=dict(data.get("symbol", {})),
            bands=tuple(data.get("bands", ["low"])),
            pairs=tuple((parse_exponent(p), parse_exponent(q)) for p, q in data.get("pairs", [])),
            dims=tuple(data.get("dims", [3])),
            window=(float(window[0]), float(window[1])) if window else None,
            quadrature=dict(data.get("quadrature", {})),
            tolerances={k: float(v) for k, v in data.get("tolerances", {}).items()},
            tolerance_scale=float(data.get("tolerance_scale", 1.0)),
            seed=int(data.get("seed", 0)),
            threads=int(data.get("threads", config.default_threads)),
            output=data.get("output", "results"),
            transform=data.get("transform", "hankel"),
            use_cache=bool(data.get("use_cache", True)),
            theta=float(data.get("theta", 2.0)),
            eta=float(data.get("eta", 0.0)),
            r=parse_exponent(data.get("r", "inf")),
            order=int(data.get("order", 0)),
            margin=float(data.get("margin", 0.2)),
            expect_no_claim=tuple(
                NoClaimExpectation(
                    band=item["band"],
                    n=item.get("n"),
                    pair=(parse_exponent(item["pair"][0]), parse_exponent(item["pair"][1])) if "pair" in item else None,
                )
                for item in data.get("expect_no_claim", [])
            ),
            description=data.get("description", ""),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def with_overrides(
        self,
        output: Optional[str] = None,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        tolerance_scale: Optional[float] = None,
    ) -> "ExperimentConfig":
        changes: Dict[str, Any] = {}
        if output is not None:
            changes["output"] = output
        if seed is not None:
            changes["seed"] = seed
        if threads is not None:
            if threads < 1:
                raise ConfigError("threads must be at least 1")
            changes["threads"] = threads
        if tolerance_scale is not None:
            if not tolerance_scale > 0:
                raise ConfigError("tolerance scale must be positive")
            changes["tolerance_scale"] = tolerance_scale
        return replace(self, **changes)

    def validate(self) -> None:
        """Semantic checks beyond the schema."""
        expected_variable = "tau" if self.kind == "crucial" else "t"
        if self.sweep.variable != expected_variable:
            raise ConfigError(f"Experiments of kind {self.kind!r} sweep {expected_variable!r}")
        lo, hi = sorted((self.sweep.start, self.sweep.stop))
        if math.log10(hi / lo) < 1.5:
            raise ConfigError("The sweep grid must span at least 1.5 decades")
        if self.kind in ("theorem", "crucial", "k12") and not self.pairs:
            raise ConfigError(f"Experiments of kind {self.kind!r} need at least one (p, q) pair")
        for p, q in self.pairs:
            try:
                PQPair(p, q)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        if self.kind != "crucial" and not self.symbol:
            raise ConfigError(f"Experiments of kind {self.kind!r} need a symbol")
        if self.symbol and ("model" in self.symbol) == ("custom" in self.symbol):
            raise ConfigError("symbol needs exactly one of 'model' and 'custom'")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ConfigError("window must be (lo, hi) with lo < hi")
        self.quad_spec()
        if self.kind == "theorem":
            self._check_claims()

    def quad_spec(self) -> QuadratureSpec:
        try:
            return QuadratureSpec(**self.quadrature)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid quadrature settings: {e}") from e

    def build_symbol(self, dim: int) -> DissipationSymbol:
        try:
            if "custom" in self.symbol:
                custom = self.symbol["custom"]
                return custom_symbol(
                    custom["expression"], custom["theta0"], custom["theta1"],
                    delta=custom["delta"], big_m=custom["M"],
                    a1=custom.get("a1", 1.0), radial=custom.get("radial", True), dim=dim,
                )
            return model_zoo(self.symbol["model"], self.symbol.get("params", {}), dim=dim)
        except (SymbolError, SyntaxError) as e:
            raise ConfigError(f"Invalid symbol: {e}") from e

    def _check_claims(self) -> None:
        """Every band and pair is covered by a prediction or listed as an expected no-claim."""
        for n in self.dims:
            sym = self.build_symbol(n)
            for band in self.bands:
                for pair in self.pairs:
                    prediction = band_prediction(sym, band, n, *pair)
                    expected = any(e.covers(band, n, pair) for e in self.expect_no_claim)
                    if isinstance(prediction, NoClaim) and not expected:
                        raise ConfigError(
                            f"No estimate covers band {band!r}, n={n}, pair {pair}: {prediction.reason}; "
                            f"list it under expect_no_claim"
                        )
                    if isinstance(prediction, Prediction) and expected:
                        logger.warning(f"Band {band!r}, n={n}, pair {pair} is listed as no-claim but has a prediction")

    def to_dict(self) -> Dict[str, Any]:
        """The settings that determine the results; output location and worker count are left out."""
        return {
            "name": self.name,
            "kind": self.kind,
            "symbol": self.symbol,
            "bands": list(self.bands),
            "pairs": [list(pair) for pair in self.pairs],
            "dims": list(self.dims),
            "sweep": self.sweep.to_dict(),
            "window": list(self.window) if self.window else None,
            "quadrature": self.quad_spec().to_dict(),
            "tolerances": self.tolerances,
            "tolerance_scale": self.tolerance_scale,
            "seed": self.seed,
            "transform": self.transform,
            "theta": self.theta,
            "eta": self.eta,
            "r": self.r,
            "order": self.order,
            "margin": self.margin,
            "expect_no_claim": [e.to_dict() for e in self.expect_no_claim],
        }


@dataclass
class CaseResult:
    """One (n, band, pair) case of a run."""

    label: str
    band: str
    n: int
    p: Optional[float] = None
    q: Optional[float] = None
    theta: Optional[float] = None
    outcome: Optional[ExperimentOutcome] = None
    fits: Dict[str, FitResult] = field(default_factory=dict)
    passed: bool = False
    aborted: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def verdict_rows(self) -> List[Dict[str, Any]]:
        rows = [fit.to_row(self.band, self.n, self.p, self.q, self.theta) for fit in self.fits.values()]
        prediction = self.outcome.prediction if self.outcome else None
        if isinstance(prediction, NoClaim):
            rows.append({
                "case": "NoClaim", "band": self.band, "n": self.n, "p": self.p, "q": self.q,
                "theta": self.theta, "verdict": "no_claim",
            })
        elif self.aborted or not rows:
            case = prediction.case if isinstance(prediction, Prediction) else ""
            rows.append({
                "case": case, "band": self.band, "n": self.n, "p": self.p, "q": self.q,
                "theta": self.theta, "verdict": "abort" if self.aborted else "fail",
            })
        return rows

    def to_dict(self) -> Dict[str, Any]:
        prediction = self.outcome.prediction if self.outcome else None
        return {
            "label": self.label,
            "band": self.band,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "theta": self.theta,
            "prediction": prediction.to_dict() if prediction is not None else None,
            "fits": {kind: fit_summary(fit) for kind, fit in self.fits.items()},
            "sandwich_ok": self.outcome.sandwich_ok if self.outcome else True,
            "passed": self.passed,
            "aborted": self.aborted,
            "notes": self.notes + (self.outcome.notes if self.outcome else []),
        }


def fit_summary(fit: FitResult) -> Dict[str, Any]:
    return {
        "law": fit.law,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual_rms": fit.residual_rms,
        "window": list(fit.window),
        "n_points": fit.n_points,
        "dropped": fit.dropped,
        "tolerance": fit.tolerance,
        "direction": fit.direction,
        "verdict": fit.verdict,
    }


@dataclass
class RunReport:
    status: int
    cases: List[CaseResult]
    sweep_rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    paths: Dict[str, str] = field(default_factory=dict)

    @property
    def verdict_rows(self) -> List[Dict[str, Any]]:
        return [row for case in self.cases for row in case.verdict_rows()]


def _prepare_output(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise ConfigError(f"Output directory {path} is not writable")


class ExperimentRunner:
    """Runs one config; reports are written by the runner alone."""

    def __init__(self, cfg: ExperimentConfig, cache: Optional[ProfileCache] = None):
        self.cfg = cfg
        self.quad = cfg.quad_spec()
        if cache is None and cfg.use_cache:
            cache = ProfileCache(seed=cfg.seed)
        self.cache = cache
        self._semaphore: Optional[asyncio.Semaphore] = None
        self._symbols: Dict[int, DissipationSymbol] = {}

    def symbol(self, n: int) -> DissipationSymbol:
        if n not in self._symbols:
            self._symbols[n] = self.cfg.build_symbol(n)
        return self._symbols[n]

    async def _points(self, fn: Callable[[float], Any], xs: Sequence[float]) -> List[Any]:
        """Evaluate fn at every x on worker threads; exceptions are returned in place."""
        assert self._semaphore is not None

        async def one(x: float) -> Any:
            async with self._semaphore:  # type: ignore[union-attr]
                try:
                    return await asyncio.to_thread(fn, x)
                except Exception as e:
                    return e

        return await asyncio.gather(*(one(float(x)) for x in xs))

    async def _call(self, fn: Callable[..., Any], *args: Any) -> Any:
        assert self._semaphore is not None
        async with self._semaphore:
            return await asyncio.to_thread(fn, *args)

    async def _theorem_case(self, n: int, band: str, pair: Tuple[float, float]) -> CaseResult:
        sym = self.symbol(n)
        p, q = pair
        theta = sym.theta1 if band == "high" else sym.theta0
        case = CaseResult(f"{sym.name}/{band}/n={n}/{PQPair(p, q).label()}", band, n, p, q, theta)
        outcome = theorem_setup(sym, band, p, q)
        case.outcome = outcome
        if isinstance(outcome.prediction, NoClaim):
            case.passed = True
            return case
        kind, sweep = next(iter(outcome.sweeps.items()))
        kernel = band_kernel(sym, band)
        invert = None
        if self.cache is not None and self.cfg.transform == "hankel":
            invert = self.cache.inverter(symbol_fingerprint(sym), band)

        def point(t: float) -> Any:
            return sweep_point(kernel, sweep.spec, t, self.cfg.transform, self.quad, invert=invert)

        xs = self.cfg.sweep.values()
        for t, result in zip(xs, await self._points(point, xs)):
            if isinstance(result, Exception):
                logger.warning(f"Sweep point t={t:g} of {case.label} failed: {result}")
                sweep.add(t, None, str(result))
            else:
                sweep.add(t, result)
        self._finish(case, lambda: finish_theorem(outcome, self.cfg.window, self.cfg.tolerance_scale, self.cfg.tolerances))
        return case

    async def _crucial_case(self, n: int, pair: Tuple[float, float]) -> CaseResult:
        p, q = pair
        theta = self.cfg.theta
        canon = PQPair(p, q).canonical()
        case = CaseResult(f"crucial/n={n}/{canon.label()}", "full", n, p, q, theta)
        outcome = crucial_setup(theta, n, p, q)
        case.outcome = outcome
        xs = self.cfg.sweep.values()
        results = await self._points(lambda tau: crucial_point(tau, theta, n, canon, self.quad), xs)
        for tau, result in zip(xs, results):
            record_crucial_point(outcome, float(tau), result)
        self._finish(case, lambda: finish_crucial(outcome, self.cfg.window, self.cfg.tolerance_scale, self.cfg.tolerances))
        return case

    def _finish(self, case: CaseResult, finish: Callable[[], ExperimentOutcome]) -> None:
        try:
            outcome = finish()
        except SweepError as e:
            logger.error(f"Sweep aborted for {case.label}: {e}")
            case.aborted = str(e)
            return
        except FitError as e:
            logger.warning(f"Fit failed for {case.label}: {e}")
            case.notes.append(f"fit failed: {e}")
            return
        case.fits = dict(outcome.fits)
        case.passed = outcome.passed

    async def _k12_case(self, n: int, pair: Tuple[float, float]) -> CaseResult:
        sym = self.symbol(n)
        p, q = pair
        case = CaseResult(f"{sym.name}/mid/n={n}/{PQPair(p, q).label()}", "mid", n, p, q, sym.theta0)
        try:
            fit = await self._call(k12_exponential_check, sym, p, q, self.cfg.sweep.values(), self.quad)
        except (FitError, SweepError) as e:
            case.aborted = str(e)
            return case
        case.fits["K12"] = fit
        case.passed = bool(fit.verdict)
        return case

    async def _lemma_exp_case(self, n: int) -> CaseResult:
        sym = self.symbol(n)
        band = self.cfg.bands[0]
        case = CaseResult(f"{sym.name}/exp/n={n}", band, n, 1.0, self.cfg.r, sym.theta0)
        tol = tolerance("lemma_exp", self.cfg.tolerances, self.cfg.tolerance_scale)
        try:
            fit = await self._call(
                lemma_exp_check, sym, self.cfg.r, self.cfg.sweep.values(), band, self.cfg.eta, self.quad, tol
            )
        except (FitError, SweepError) as e:
            case.aborted = str(e)
            return case
        case.fits["LemmaExp"] = fit
        case.passed = bool(fit.verdict)
        return case

    async def _residual_case(self, n: int) -> CaseResult:
        sym = self.symbol(n)
        case = CaseResult(f"{sym.name}/residual/n={n}", "low", n, 1.0, math.inf, sym.theta0)
        try:
            main, rest, dominated = await self._call(
                residual_experiment, sym, self.cfg.sweep.values(), self.cfg.order, self.cfg.margin, self.quad
            )
        except (FitError, SweepError) as e:
            case.aborted = str(e)
            return case
        main.verdict = True
        rest.verdict = dominated
        case.fits = {"main": main, "residual": rest}
        case.notes.append(f"residual slope must stay {self.cfg.margin:g} below the main-term slope")
        case.passed = dominated
        return case

    def _plan(self) -> List[Any]:
        cfg = self.cfg
        if cfg.kind == "theorem":
            return [self._theorem_case(n, band, pair) for n in cfg.dims for band in cfg.bands for pair in cfg.pairs]
        if cfg.kind == "crucial":
            return [self._crucial_case(n, pair) for n in cfg.dims for pair in cfg.pairs]
        if cfg.kind == "k12":
            return [self._k12_case(n, pair) for n in cfg.dims for pair in cfg.pairs]
        if cfg.kind == "lemma_exp":
            return [self._lemma_exp_case(n) for n in cfg.dims]
        return [self._residual_case(n) for n in cfg.dims]

    async def run(self, write: bool = True) -> RunReport:
        """
        Run every case and, unless write is False, publish the reports.

        Returns:
            RunReport with exit status 0 when all verdicts pass and no sweep
            aborted, 1 otherwise
        """
        cfg = self.cfg
        out = Path(cfg.output)
        if write:
            _prepare_output(out)
        logger.info(f"Running experiment {cfg.name!r} ({cfg.kind}) with {cfg.threads} worker(s)")
        self._semaphore = asyncio.Semaphore(cfg.threads)
        cases = list(await asyncio.gather(*self._plan()))

        sweep_rows: List[Dict[str, Any]] = []
        for case in cases:
            if case.outcome is None:
                continue
            for sweep in case.outcome.sweeps.values():
                for row, failure in zip(sweep.rows(), sweep.failures):
                    row.update(n=case.n, failure=failure)
                    sweep_rows.append(row)

        failed = [c for c in cases if not c.passed or c.aborted]
        status = EXIT_FAIL if failed else EXIT_PASS
        summary = self._summary(cases, status)
        report = RunReport(status, cases, sweep_rows, summary)
        if write:
            report.paths = {
                "sweeps": str(write_atomic(out / "sweeps.csv", render_csv(SWEEP_COLUMNS, sweep_rows, config.CSV_SCHEMA_VERSION))),
                "verdicts": str(write_atomic(out / "verdicts.csv", render_csv(VERDICT_COLUMNS, report.verdict_rows, config.CSV_SCHEMA_VERSION))),
                "summary": str(write_atomic(out / "summary.json", render_json(summary))),
            }
        if self.cache is not None:
            logger.info(f"Profile cache: {self.cache.hits} hit(s), {self.cache.misses} miss(es)")
        logger.info(f"Experiment {cfg.name!r} finished: {'pass' if status == EXIT_PASS else 'fail'}")
        return report

    def _summary(self, cases: List[CaseResult], status: int) -> Dict[str, Any]:
        symbols = {}
        if self.cfg.symbol:
            for n in self.cfg.dims:
                sym = self.symbol(n)
                symbols[str(n)] = {"name": sym.name, "hash": symbol_fingerprint(sym)}
        return {
            "code_version": config.CODE_VERSION,
            "schema_version": config.CSV_SCHEMA_VERSION,
            "normalization": config.NORMALIZATION_TAG,
            "config": self.cfg.to_dict(),
            "grid": [float(x) for x in self.cfg.sweep.values()],
            "symbols": symbols,
            "cases": [case.to_dict() for case in cases],
            "no_claims": [
                case.outcome.prediction.to_dict() | {"n": case.n, "p": case.p, "q": case.q}
                for case in cases
                if case.outcome is not None and isinstance(case.outcome.prediction, NoClaim)
            ],
            "aborted": [case.label for case in cases if case.aborted],
            "status": "pass" if status == EXIT_PASS else "fail",
        }


def run(cfg: ExperimentConfig, cache: Optional[ProfileCache] = None, write: bool = True) -> RunReport:
    """Synchronous entry point."""
    return asyncio.run(ExperimentRunner(cfg, cache).run(write))
