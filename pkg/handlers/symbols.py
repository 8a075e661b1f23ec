"""
Symbols Handler
===============

Command handlers for the symbol catalogue and the Mikhlin-Hormander screen.
"""

import asyncio
import logging
from typing import Any, Dict, List, Optional

from services.symbol_service import mh_check, model_zoo, rotation_defect, symbol_fingerprint, zoo_catalog
from utils.formatting import format_error_response, format_success_response

logger = logging.getLogger(__name__)


class SymbolHandler:
    """Handler for symbol commands."""

    async def list_zoo(self, dim: int = 3) -> str:
        """
        List every catalogue symbol with its metadata.

        Args:
            dim: Spatial dimension used to verify the band radii

        Returns:
            Formatted catalogue as JSON string
        """
        try:
            logger.info(f"Listing symbol zoo for n={dim}")
            catalog = await asyncio.to_thread(zoo_catalog, dim)
            return format_success_response(catalog)

        except Exception as e:
            logger.error(f"Error listing symbol zoo: {e}")
            return format_error_response(e)

    async def mh_check(
        self,
        model: str,
        params: Optional[Dict[str, Any]] = None,
        dim: int = 3,
        bands: Optional[List[str]] = None,
        seed: int = 0,
    ) -> str:
        """
        Screen a symbol's Mikhlin-Hormander conditions.

        Args:
            model: Zoo model name
            params: Model parameters
            dim: Spatial dimension
            bands: Bands to screen, default low and high
            seed: Seed for the sample points

        Returns:
            Formatted per-band reports as JSON string
        """
        try:
            logger.info(f"Running Mikhlin-Hormander screen on {model} (n={dim})")
            sym = model_zoo(model, params, dim=dim)
            reports = {}
            for band in bands or ["low", "high"]:
                report = await asyncio.to_thread(mh_check, sym, band, seed=seed)
                reports[band] = report.to_dict()

            result = {
                "symbol": sym.name,
                "hash": symbol_fingerprint(sym),
                "dim": dim,
                "theta0": sym.theta0,
                "theta1": sym.theta1,
                "delta": sym.delta,
                "M": sym.big_m,
                "dissipative": sym.dissipative,
                "rotation_defect": rotation_defect(sym, seed=seed),
                "reports": reports,
                "passed": all(r["passed"] for r in reports.values()),
            }
            return format_success_response(result)

        except Exception as e:
            logger.error(f"Error checking symbol {model}: {e}")
            return format_error_response(e)
