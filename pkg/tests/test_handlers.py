"""Tests for the async command handlers and their JSON envelopes."""

import json

import pytest

from handlers.cache import CacheHandler
from handlers.experiments import ExperimentHandler
from handlers.kernels import KernelHandler
from handlers.symbols import SymbolHandler
from services.spectra_service import profile_from_csv


def decode(response):
    payload = json.loads(response)
    assert "timestamp" in payload
    return payload


@pytest.mark.asyncio
async def test_list_zoo():
    payload = decode(await SymbolHandler().list_zoo(dim=2))
    assert payload["status"] == "success"
    assert payload["count"] >= 10
    assert any(entry["name"] == "double_dispersion" for entry in payload["data"])


@pytest.mark.asyncio
async def test_mh_check_reports_both_bands():
    payload = decode(await SymbolHandler().mh_check("viscoelastic", dim=3))
    data = payload["data"]
    assert set(data["reports"]) == {"low", "high"}
    assert data["passed"]
    assert data["theta0"] == 2.0


@pytest.mark.asyncio
async def test_mh_check_of_unknown_model_is_an_error_envelope():
    payload = decode(await SymbolHandler().mh_check("no_such_model"))
    assert payload["status"] == "error"
    assert payload["error"]["type"] == "SymbolError"


@pytest.mark.asyncio
async def test_kernel_dump_then_cache_clear_recomputes_same_values(cache, tmp_path):
    handler = KernelHandler(cache)
    first = decode(await handler.dump_kernel("classical", 1.0, dim=1, band="low", points=64))
    assert first["status"] == "success"
    assert cache.misses == 1

    cleared = decode(await CacheHandler(cache).clear())
    assert cleared["data"]["removed"] == 1

    out = tmp_path / "kernel.csv"
    second = decode(await handler.dump_kernel("classical", 1.0, dim=1, band="low", points=64, out=str(out)))
    assert second["data"]["path"] == str(out)
    assert cache.misses == 2

    before = profile_from_csv(first["data"]["csv"])
    after = profile_from_csv(out.read_text(encoding="utf-8"))
    assert (before.values == after.values).all()
    assert after.meta["band"] == "low"


@pytest.mark.asyncio
async def test_cache_info(cache):
    payload = decode(await CacheHandler(cache).info())
    assert payload["data"]["entries"] == 0
    assert payload["data"]["root"] == str(cache.root)


@pytest.mark.asyncio
async def test_sweep_of_control_symbol_is_a_no_claim(cache):
    payload = decode(await ExperimentHandler(cache).sweep("free_wave", "low", 1, "inf", points=8))
    data = payload["data"]
    assert data["prediction"]["case"] == "NoClaim"
    assert data["exit_code"] == 0
    assert data["notes"]


@pytest.mark.asyncio
async def test_crucial_refuses_short_scale_range():
    payload = decode(await ExperimentHandler().crucial(3, 1, "inf", tau_start=0.01, tau_stop=0.1))
    assert payload["status"] == "error"
    assert payload["error"]["type"] == "ValueError"


@pytest.mark.asyncio
async def test_run_config_writes_reports(cache, tmp_path, write_config):
    path = write_config({
        "name": "free_wave_control",
        "kind": "theorem",
        "symbol": {"model": "free_wave"},
        "bands": ["low"],
        "pairs": [[1, "inf"]],
        "dims": [3],
        "sweep": {"variable": "t", "start": 10, "stop": 1000, "points": 8},
        "expect_no_claim": [{"band": "low"}],
    })
    out = tmp_path / "results"
    payload = decode(await ExperimentHandler(cache).run_config(str(path), out=str(out)))
    data = payload["data"]
    assert data["exit_code"] == 0
    assert data["status"] == "pass"
    assert sorted(p.name for p in out.iterdir()) == ["summary.json", "sweeps.csv", "verdicts.csv"]
    assert data["verdicts"][0]["verdict"] == "no_claim"


@pytest.mark.asyncio
async def test_run_config_with_empty_pairs_writes_nothing(cache, tmp_path, write_config):
    path = write_config({
        "name": "empty",
        "kind": "theorem",
        "symbol": {"model": "viscoelastic"},
        "pairs": [],
        "sweep": {"variable": "t", "start": 10, "stop": 1000, "points": 8},
    })
    out = tmp_path / "results"
    payload = decode(await ExperimentHandler(cache).run_config(str(path), out=str(out)))
    assert payload["status"] == "error"
    assert payload["error"]["type"] == "ConfigError"
    assert not out.exists()


@pytest.mark.slow
@pytest.mark.asyncio
async def test_crucial_planar_pair_reports_log_law():
    payload = decode(await ExperimentHandler().crucial(2, 1, 2))
    data = payload["data"]
    assert data["prediction"]["case"] == "CrucialLog"
    assert data["fits"]["OpExactP1"]["law"] == "sqrt_log_inv_t"
