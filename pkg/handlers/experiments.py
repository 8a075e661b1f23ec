"""
Experiments Handler
===================

Command handlers for the crucial-multiplier experiment, single theorem
sweeps and full experiment configs.
"""

import asyncio
import logging
from typing import Any, Dict, Optional

import numpy as np

from services.cache_service import ProfileCache
from services.experiment_service import EXIT_FAIL, EXIT_PASS, ExperimentConfig, ExperimentRunner, fit_summary
from services.rate_service import ExperimentOutcome, crucial_experiment, theorem_experiment
from services.symbol_service import model_zoo, symbol_fingerprint
from utils.formatting import format_error_response, format_success_response
from utils.validation import parse_exponent

logger = logging.getLogger(__name__)


def _outcome_result(outcome: ExperimentOutcome) -> Dict[str, Any]:
    return {
        "prediction": outcome.prediction.to_dict(),
        "fits": {kind: fit_summary(fit) for kind, fit in outcome.fits.items()},
        "sandwich_ok": outcome.sandwich_ok,
        "passed": outcome.passed,
        "notes": outcome.notes,
        "exit_code": EXIT_PASS if outcome.passed else EXIT_FAIL,
    }


class ExperimentHandler:
    """Handler for experiment commands."""

    def __init__(self, cache: Optional[ProfileCache] = None):
        self.cache = cache

    async def crucial(
        self,
        n: int,
        p: Any,
        q: Any,
        theta: float = 2.0,
        tau_start: float = 1e-4,
        tau_stop: float = 1e-1,
        points: int = 13,
        tolerance_scale: float = 1.0,
    ) -> str:
        """
        Operator norms of sinc(|xi|) exp(-(tau|xi|)^theta) as tau -> 0.

        Args:
            n: Spatial dimension
            p: Source exponent
            q: Target exponent
            theta: Diffusion exponent
            tau_start: Smallest scale
            tau_stop: Largest scale
            points: Number of scales
            tolerance_scale: Multiplier for every fit tolerance

        Returns:
            Formatted prediction, fits and verdict as JSON string
        """
        try:
            p_value, q_value = parse_exponent(p), parse_exponent(q)
            logger.info(f"Crucial experiment n={n} p={p} q={q} theta={theta}")
            taus = np.geomspace(tau_start, tau_stop, points)
            outcome = await asyncio.to_thread(
                crucial_experiment, theta, n, p_value, q_value, taus,
                tolerance_scale=tolerance_scale,
            )
            result = _outcome_result(outcome)
            result["tau"] = taus
            return format_success_response(result)

        except Exception as e:
            logger.error(f"Error running crucial experiment: {e}")
            return format_error_response(e)

    async def sweep(
        self,
        model: str,
        band: str,
        p: Any,
        q: Any,
        params: Optional[Dict[str, Any]] = None,
        dim: int = 3,
        t_start: float = 10.0,
        t_stop: float = 1000.0,
        points: int = 17,
        transform: str = "hankel",
        tolerance_scale: float = 1.0,
    ) -> str:
        """
        Sweep one band of a symbol's kernel and fit it against the band prediction.

        Returns:
            Formatted prediction, fits and verdict as JSON string
        """
        try:
            logger.info(f"Sweeping {model}/{band} (n={dim}) over t in [{t_start:g}, {t_stop:g}]")
            sym = model_zoo(model, params, dim=dim)
            invert = None
            if self.cache is not None and transform == "hankel":
                invert = self.cache.inverter(symbol_fingerprint(sym), band)
            ts = np.geomspace(t_start, t_stop, points)
            outcome = await asyncio.to_thread(
                theorem_experiment, sym, band, parse_exponent(p), parse_exponent(q), ts,
                None, None, tolerance_scale, transform, invert,
            )
            result = _outcome_result(outcome)
            result["t"] = ts
            for kind, sweep in outcome.sweeps.items():
                result.setdefault("values", {})[kind] = [
                    None if report is None else report.value for report in sweep.reports
                ]
            return format_success_response(result)

        except Exception as e:
            logger.error(f"Error sweeping kernel: {e}")
            return format_error_response(e)

    async def run_config(
        self,
        config: str,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        tolerance_scale: Optional[float] = None,
    ) -> str:
        """
        Run an experiment config and write its reports.

        Returns:
            Formatted run status, report paths and verdict rows as JSON string
        """
        try:
            cfg = ExperimentConfig.load(config).with_overrides(out, seed, threads, tolerance_scale)
            logger.info(f"Running config {config} into {cfg.output}")
            cache = self.cache if self.cache is not None else (ProfileCache(seed=cfg.seed) if cfg.use_cache else None)
            report = await ExperimentRunner(cfg, cache).run()

            result = {
                "name": cfg.name,
                "status": report.summary["status"],
                "exit_code": report.status,
                "paths": report.paths,
                "verdicts": report.verdict_rows,
                "aborted": report.summary["aborted"],
            }
            return format_success_response(result)

        except Exception as e:
            logger.error(f"Error running experiment config: {e}")
            return format_error_response(e)
