"""
Cache Service Implementation
============================

Disk cache of radial profiles keyed by a content hash of everything that
determines them. Entries are published atomically, so concurrent readers
never see a partial file.
"""

import hashlib
import json
import logging
import shutil
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np

import config
from services.spectra_service import (
    QuadratureSpec,
    RadialMultiplier,
    RadialProfile,
    hankel_inverse,
    profile_from_csv,
    profile_to_csv,
)
from utils.formatting import write_atomic

logger = logging.getLogger(__name__)

Inverter = Callable[[RadialMultiplier, int, Sequence[float], Optional[QuadratureSpec]], RadialProfile]


class CacheError(RuntimeError):
    """Raised when a cached profile disagrees with a fresh computation."""


def grid_digest(r_grid: Sequence[float]) -> str:
    data = np.ascontiguousarray(np.asarray(r_grid, dtype="<f8"))
    return hashlib.sha256(data.tobytes()).hexdigest()


@dataclass(frozen=True)
class CacheKey:
    symbol_hash: str
    band: str
    t: float
    r_grid: str
    quadrature: str
    dim: int = 0
    normalization: str = config.NORMALIZATION_TAG

    @classmethod
    def build(
        cls,
        symbol_hash: str,
        band: str,
        t: float,
        r_grid: Sequence[float],
        quad_spec: Optional[QuadratureSpec],
        dim: int,
    ) -> "CacheKey":
        quad = (quad_spec or QuadratureSpec()).to_dict()
        return cls(
            symbol_hash=symbol_hash,
            band=band,
            t=float(t),
            r_grid=grid_digest(r_grid),
            quadrature=json.dumps(quad, sort_keys=True),
            dim=dim,
        )

    def digest(self) -> str:
        payload = json.dumps(
            [self.symbol_hash, self.band, repr(self.t), self.r_grid, self.quadrature, self.dim, self.normalization]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _lazy_evaluator(
    mult: RadialMultiplier, dim: int, r_grid: np.ndarray, quad_spec: Optional[QuadratureSpec]
) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator for a cached profile; the quadrature is planned on first call."""
    spec = replace(quad_spec or QuadratureSpec(), layout_radius=float(np.max(r_grid)))
    planned: Dict[str, Callable[[np.ndarray], np.ndarray]] = {}

    def evaluate(radii: np.ndarray) -> np.ndarray:
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if "evaluator" not in planned:
            fresh = hankel_inverse(mult, dim, radii[:1], spec)
            assert fresh.evaluator is not None
            planned["evaluator"] = fresh.evaluator
        return planned["evaluator"](radii)

    return evaluate


class ProfileCache:
    """Content-addressed CSV store under root/<aa>/<digest>.csv."""

    def __init__(self, root: Optional[Union[str, Path]] = None, seed: int = 0):
        self.root = Path(root) if root is not None else config.cache_dir
        self.seed = seed
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self._revalidated = False
        self._lock = threading.Lock()

    def path_for(self, key: CacheKey) -> Path:
        digest = key.digest()
        return self.root / digest[:2] / f"{digest}.csv"

    def get(self, key: CacheKey) -> Optional[RadialProfile]:
        path = self.path_for(key)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        try:
            return profile_from_csv(text)
        except (ValueError, KeyError, IndexError) as e:
            logger.warning(f"Ignoring unreadable cache entry {path.name}: {e}")
            return None

    def put(self, key: CacheKey, profile: RadialProfile) -> Path:
        path = write_atomic(self.path_for(key), profile_to_csv(profile))
        logger.debug(f"Cached profile {path.name}")
        return path

    def evict(self, key: CacheKey) -> None:
        self.path_for(key).unlink(missing_ok=True)
        with self._lock:
            self.evictions += 1

    def info(self) -> Dict[str, Any]:
        entries = list(self.root.glob("*/*.csv")) if self.root.exists() else []
        return {
            "root": str(self.root),
            "entries": len(entries),
            "bytes": sum(p.stat().st_size for p in entries),
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
        }

    def clear(self) -> int:
        """Delete every entry; returns how many were removed."""
        if not self.root.exists():
            return 0
        removed = 0
        for shard in self.root.iterdir():
            if shard.is_dir() and len(shard.name) == 2:
                removed += sum(1 for _ in shard.glob("*.csv"))
                shutil.rmtree(shard)
        logger.info(f"Cleared {removed} cache entries from {self.root}")
        return removed

    def revalidate(
        self,
        cached: RadialProfile,
        mult: RadialMultiplier,
        quad_spec: Optional[QuadratureSpec],
    ) -> RadialProfile:
        """
        Recompute one seeded grid point and reattach an evaluator on the
        same quadrature plan.

        Raises:
            CacheError: the cached value differs from the fresh one by more
                than the revalidation tolerance
        """
        grid = cached.r_grid
        spec = replace(quad_spec or QuadratureSpec(), layout_radius=float(np.max(grid)))
        index = int(np.random.default_rng(self.seed).integers(grid.size))
        fresh = hankel_inverse(mult, cached.dim, grid[index:index + 1], spec)
        scale = max(float(np.max(np.abs(cached.values))), 1e-300)
        deviation = abs(float(fresh.values[0]) - float(cached.values[index]))
        if deviation > config.CACHE_REVALIDATION_TOL * scale:
            raise CacheError(
                f"Cached profile disagrees at r={grid[index]:g}: deviation {deviation:.3g}"
            )
        cached.evaluator = fresh.evaluator
        cached.meta.update({k: v for k, v in fresh.meta.items() if k not in cached.meta})
        return cached

    def inverter(self, symbol_hash: str, band: str) -> Inverter:
        """
        A drop-in replacement for hankel_inverse that reads and fills the
        cache. The multiplier's oscillation rate is its time.
        """

        def invert(
            mult: RadialMultiplier,
            dim: int,
            r_grid: Sequence[float],
            quad_spec: Optional[QuadratureSpec] = None,
        ) -> RadialProfile:
            t = float(mult.osc_rate)
            key = CacheKey.build(symbol_hash, band, t, r_grid, quad_spec, dim)
            cached = self.get(key)
            if cached is not None:
                with self._lock:
                    self.hits += 1
                    check = not self._revalidated
                    self._revalidated = True
                if check:
                    try:
                        return self.revalidate(cached, mult, quad_spec)
                    except CacheError as e:
                        logger.error(f"Evicting stale cache entry: {e}")
                        self.evict(key)
                else:
                    cached.evaluator = _lazy_evaluator(mult, dim, cached.r_grid, quad_spec)
                    return cached
            with self._lock:
                self.misses += 1
            profile = hankel_inverse(mult, dim, r_grid, quad_spec)
            profile.meta.update(t=t, band=band, symbol_hash=symbol_hash)
            self.put(key, profile)
            return profile

        return invert
