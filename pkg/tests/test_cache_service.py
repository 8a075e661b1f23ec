"""Tests for the content-addressed profile cache."""

import numpy as np
import pytest

from services.cache_service import CacheKey, ProfileCache, grid_digest
from services.spectra_service import RadialMultiplier, hankel_inverse

R_GRID = np.linspace(0.0, 3.0, 31)


def heat(t=1.0):
    return RadialMultiplier(lambda rho: np.exp(-t * rho * rho), label="heat")


def test_key_depends_on_grid_time_and_dimension():
    base = CacheKey.build("abc", "low", 1.0, R_GRID, None, 3)
    assert base.digest() == CacheKey.build("abc", "low", 1.0, R_GRID.copy(), None, 3).digest()
    assert base.digest() != CacheKey.build("abc", "low", 2.0, R_GRID, None, 3).digest()
    assert base.digest() != CacheKey.build("abc", "low", 1.0, R_GRID, None, 2).digest()
    assert base.digest() != CacheKey.build("abc", "high", 1.0, R_GRID, None, 3).digest()
    assert grid_digest(R_GRID) != grid_digest(R_GRID[:-1])


def test_miss_then_hit(cache):
    invert = cache.inverter("abc", "full")
    first = invert(heat(), 3, R_GRID)
    second = invert(heat(), 3, R_GRID)
    assert cache.misses == 1
    assert cache.hits == 1
    assert np.array_equal(first.values, second.values)
    assert second.meta["symbol_hash"] == "abc"


def test_later_hits_evaluate_lazily(cache):
    invert = cache.inverter("abc", "full")
    invert(heat(), 3, R_GRID)
    invert(heat(), 3, R_GRID)
    third = invert(heat(), 3, R_GRID)
    assert cache.hits == 2
    np.testing.assert_allclose(third.evaluator(R_GRID[3:6]), third.values[3:6], rtol=1e-14, atol=0)


def test_info_and_clear(cache):
    assert cache.info()["entries"] == 0
    cache.inverter("abc", "full")(heat(), 3, R_GRID)
    info = cache.info()
    assert info["entries"] == 1
    assert info["bytes"] > 0
    assert cache.clear() == 1
    assert cache.info()["entries"] == 0
    assert cache.clear() == 0


def test_tampered_entry_is_evicted_and_recomputed(isolated_cache_dir):
    writer = ProfileCache(isolated_cache_dir, seed=0)
    fresh = writer.inverter("abc", "full")(heat(), 3, R_GRID)

    key = CacheKey.build("abc", "full", 0.0, R_GRID, None, 3)
    stored = writer.get(key)
    stored.values = stored.values * 1.5
    writer.put(key, stored)

    reader = ProfileCache(isolated_cache_dir, seed=0)
    recomputed = reader.inverter("abc", "full")(heat(), 3, R_GRID)
    assert reader.evictions == 1
    assert reader.misses == 1
    assert np.array_equal(recomputed.values, fresh.values)
    assert np.array_equal(reader.get(key).values, fresh.values)


def test_unreadable_entry_counts_as_miss(cache):
    key = CacheKey.build("abc", "full", 0.0, R_GRID, None, 3)
    path = cache.path_for(key)
    path.parent.mkdir(parents=True)
    path.write_text("not a profile\n", encoding="utf-8")
    assert cache.get(key) is None
    profile = cache.inverter("abc", "full")(heat(), 3, R_GRID)
    assert cache.misses == 1
    assert np.array_equal(cache.get(key).values, profile.values)


def test_writes_leave_no_temporary_files(cache):
    invert = cache.inverter("abc", "full")
    for t in (0.5, 1.0, 2.0):
        invert(RadialMultiplier(lambda rho, t=t: np.exp(-t * rho * rho), osc_rate=t), 1, R_GRID)
    assert cache.info()["entries"] == 3
    assert list(cache.root.rglob("*.tmp")) == []


def test_cached_values_match_direct_inversion(cache):
    cached = cache.inverter("abc", "full")(heat(), 1, R_GRID)
    direct = hankel_inverse(heat(), 1, R_GRID)
    assert np.array_equal(cached.values, direct.values)
    assert cached.flagged == direct.flagged


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_revalidation_accepts_honest_entries(isolated_cache_dir, seed):
    ProfileCache(isolated_cache_dir, seed=seed).inverter("abc", "full")(heat(), 3, R_GRID)
    reader = ProfileCache(isolated_cache_dir, seed=seed)
    reader.inverter("abc", "full")(heat(), 3, R_GRID)
    assert reader.hits == 1
    assert reader.evictions == 0
