"""
Kernels Handler
===============

Command handler that inverts one banded kernel at one time and emits its
radial profile CSV.
"""

import asyncio
import logging
from typing import Any, Dict, Optional

import numpy as np

from services.cache_service import ProfileCache
from services.oscillator_service import band_kernel
from services.spectra_service import hankel_inverse, kernel_multiplier, kernel_r_grid, profile_to_csv
from services.symbol_service import model_zoo, symbol_fingerprint
from utils.formatting import format_error_response, format_success_response, write_atomic

logger = logging.getLogger(__name__)


class KernelHandler:
    """Handler for kernel dumps."""

    def __init__(self, cache: Optional[ProfileCache] = None):
        self.cache = cache

    async def dump_kernel(
        self,
        model: str,
        t: float,
        params: Optional[Dict[str, Any]] = None,
        dim: int = 3,
        band: str = "full",
        points: int = 512,
        use_cache: bool = True,
        seed: int = 0,
        out: Optional[str] = None,
    ) -> str:
        """
        Invert a kernel and return (or write) its profile CSV.

        Args:
            model: Zoo model name
            t: Time
            params: Model parameters
            dim: Spatial dimension
            band: Frequency band (low, mid, high or full)
            points: Radial grid size
            use_cache: Read and fill the profile cache
            seed: Seed for cache revalidation
            out: Write the CSV here instead of returning it

        Returns:
            Formatted result as JSON string; carries the CSV text when out is not given
        """
        try:
            logger.info(f"Dumping {model}/{band} kernel at t={t:g} (n={dim})")
            sym = model_zoo(model, params, dim=dim)
            symbol_hash = symbol_fingerprint(sym)
            mult = kernel_multiplier(band_kernel(sym, band), t)
            grid = kernel_r_grid(mult, dim, points)

            invert = hankel_inverse
            if use_cache:
                cache = self.cache or ProfileCache(seed=seed)
                invert = cache.inverter(symbol_hash, band)
            profile = await asyncio.to_thread(invert, mult, dim, grid, None)
            profile.meta.update(t=t, band=band, symbol_hash=symbol_hash)
            text = profile_to_csv(profile)

            result: Dict[str, Any] = {
                "symbol": sym.name,
                "band": band,
                "t": t,
                "points": int(profile.r_grid.size),
                "max_quad_error": float(np.max(profile.quad_error)),
                "flags": profile.flags,
            }
            if out:
                result["path"] = str(write_atomic(out, text))
            else:
                result["csv"] = text
            return format_success_response(result)

        except Exception as e:
            logger.error(f"Error dumping kernel: {e}")
            return format_error_response(e)
