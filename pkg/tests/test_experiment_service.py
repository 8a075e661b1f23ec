"""Tests for experiment configs, the concurrent runner and its report files."""

import csv
import json
import math

import pytest

from services.cache_service import ProfileCache
from services.experiment_service import (
    EXIT_FAIL,
    EXIT_PASS,
    SWEEP_COLUMNS,
    ConfigError,
    ExperimentConfig,
    run,
)
from services.rate_service import VERDICT_COLUMNS

PRESETS = [
    "classical_diffusion",
    "crucial_n2_log",
    "crucial_n3",
    "effective_high_n3",
    "lemma_exp_heat",
    "midband_k12",
    "residual_viscoelastic",
    "viscoelastic_n3",
]


def no_claim_config(output):
    return {
        "name": "free_wave_control",
        "kind": "theorem",
        "symbol": {"model": "free_wave"},
        "bands": ["low"],
        "pairs": [[1, "inf"]],
        "dims": [3],
        "sweep": {"variable": "t", "start": 10, "stop": 1000, "points": 8},
        "expect_no_claim": [{"band": "low"}],
        "output": str(output),
    }


def heat_config(output):
    return {
        "name": "heat_scaling",
        "kind": "lemma_exp",
        "symbol": {"model": "fractional", "params": {"theta": 2.0}},
        "bands": ["full"],
        "dims": [1],
        "r": "inf",
        "sweep": {"variable": "t", "start": 0.1, "stop": 31.6, "points": 8},
        "output": str(output),
    }


def classical_config(output):
    return {
        "name": "classical_short",
        "kind": "theorem",
        "symbol": {"model": "classical"},
        "bands": ["low"],
        "pairs": [[1, "inf"]],
        "dims": [1],
        "sweep": {"variable": "t", "start": 10, "stop": 316.3, "points": 8},
        "output": str(output),
    }


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def snapshot(report):
    return {name: open(path, "rb").read() for name, path in report.paths.items()}


class TestConfigValidation:
    @pytest.mark.parametrize(
        "change",
        [
            {"pairs": []},
            {"bogus": 1},
            {"sweep": {"variable": "t", "start": 10, "stop": 100, "points": 8}},
            {"sweep": {"variable": "tau", "start": 10, "stop": 1000, "points": 8}},
            {"sweep": {"variable": "t", "start": 10, "stop": 1000, "points": 4}},
            {"pairs": [[2, 1]]},
            {"symbol": {"model": "free_wave", "custom": {"expression": "rho", "theta0": 1, "theta1": 1}}},
            {"window": [100, 10]},
            {"quadrature": {"engine": "simpson"}},
            {"symbol": {"model": "no_such_model"}},
        ],
    )
    def test_invalid_configs_are_refused(self, tmp_path, change):
        data = no_claim_config(tmp_path / "out")
        data.update(change)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)
        assert not (tmp_path / "out").exists()

    def test_unlisted_no_claim_is_refused(self, tmp_path):
        data = no_claim_config(tmp_path / "out")
        del data["expect_no_claim"]
        with pytest.raises(ConfigError, match="expect_no_claim"):
            ExperimentConfig.from_dict(data)

    def test_custom_symbol_config_carries_its_radii(self, tmp_path):
        data = classical_config(tmp_path / "out")
        data["dims"] = [3]
        data["symbol"] = {"custom": {"expression": "rho**2", "theta0": 2, "theta1": 2, "delta": 1, "M": 4}}
        cfg = ExperimentConfig.from_dict(data)
        sym = cfg.build_symbol(3)
        assert (sym.delta, sym.big_m) == (1.0, 4.0)

        data["symbol"]["custom"]["delta"] = 2
        with pytest.raises(ConfigError, match="normalization|overlap"):
            ExperimentConfig.from_dict(data)

        del data["symbol"]["custom"]["delta"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_exponents_accept_text(self, tmp_path):
        data = classical_config(tmp_path / "out")
        data["pairs"] = [["4/3", 4], [1, "inf"]]
        cfg = ExperimentConfig.from_dict(data)
        assert cfg.pairs[0] == (pytest.approx(4 / 3), 4.0)
        assert cfg.pairs[1] == (1.0, math.inf)

    def test_load_reports_unreadable_files(self, tmp_path, write_config):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(broken)
        cfg = ExperimentConfig.load(write_config(heat_config(tmp_path / "out")))
        assert cfg.kind == "lemma_exp"

    def test_overrides(self, tmp_path):
        cfg = ExperimentConfig.from_dict(heat_config(tmp_path / "out"))
        changed = cfg.with_overrides(output="elsewhere", seed=3, threads=2, tolerance_scale=1.5)
        assert (changed.output, changed.seed, changed.threads, changed.tolerance_scale) == ("elsewhere", 3, 2, 1.5)
        with pytest.raises(ConfigError):
            cfg.with_overrides(threads=0)
        with pytest.raises(ConfigError):
            cfg.with_overrides(tolerance_scale=0.0)

    def test_summary_settings_leave_out_location_and_workers(self, tmp_path):
        cfg = ExperimentConfig.from_dict(heat_config(tmp_path / "out"))
        settings = cfg.to_dict()
        assert "output" not in settings
        assert "threads" not in settings
        assert settings == cfg.with_overrides(output="x", threads=7).to_dict()

    @pytest.mark.parametrize("name", PRESETS)
    def test_presets_parse(self, preset, name):
        cfg = ExperimentConfig.from_dict(preset(name))
        assert cfg.name == name


def test_no_claim_run_is_reported_not_dropped(tmp_path, cache):
    cfg = ExperimentConfig.from_dict(no_claim_config(tmp_path / "out"))
    report = run(cfg, cache)
    assert report.status == EXIT_PASS

    verdicts = read_csv(report.paths["verdicts"])
    assert verdicts[0] == ["# schema_version", "1"]
    assert verdicts[1] == VERDICT_COLUMNS
    assert verdicts[2][VERDICT_COLUMNS.index("verdict")] == "no_claim"

    sweeps = read_csv(report.paths["sweeps"])
    assert sweeps[1] == SWEEP_COLUMNS
    assert len(sweeps) == 2

    summary = json.loads(open(report.paths["summary"], encoding="utf-8").read())
    assert summary["status"] == "pass"
    assert len(summary["no_claims"]) == 1
    assert "timestamp" not in summary
    assert summary["symbols"]["3"]["name"] == "free_wave"


def test_heat_scaling_run_passes_and_is_byte_identical(tmp_path, cache):
    first = run(ExperimentConfig.from_dict(heat_config(tmp_path / "a")), cache)
    second = run(ExperimentConfig.from_dict(heat_config(tmp_path / "b")), cache)
    assert first.status == EXIT_PASS
    assert first.verdict_rows[0]["verdict"] == "pass"
    assert first.verdict_rows[0]["fitted"] == pytest.approx(-0.5, abs=0.05)
    assert snapshot(first) == snapshot(second)


def test_dry_run_writes_nothing(tmp_path, cache):
    report = run(ExperimentConfig.from_dict(no_claim_config(tmp_path / "out")), cache, write=False)
    assert report.paths == {}
    assert not (tmp_path / "out").exists()


@pytest.mark.slow
def test_warm_cache_rerun_is_byte_identical(isolated_cache_dir, tmp_path):
    cold_cache = ProfileCache(isolated_cache_dir, seed=0)
    cold = run(ExperimentConfig.from_dict(classical_config(tmp_path / "cold")), cold_cache)
    assert cold_cache.misses == 8

    warm_cache = ProfileCache(isolated_cache_dir, seed=0)
    cfg = ExperimentConfig.from_dict(classical_config(tmp_path / "warm")).with_overrides(threads=4)
    warm = run(cfg, warm_cache)
    assert warm_cache.hits == 8
    assert warm_cache.misses == 0
    assert snapshot(cold) == snapshot(warm)


@pytest.mark.slow
def test_failing_verdict_sets_exit_status(tmp_path, cache):
    data = {
        "name": "free_wave_mid",
        "kind": "k12",
        "symbol": {"model": "free_wave"},
        "pairs": [[1, "inf"]],
        "dims": [1],
        "sweep": {"variable": "t", "start": 0.5, "stop": 25, "points": 8},
        "output": str(tmp_path / "out"),
    }
    report = run(ExperimentConfig.from_dict(data), cache)
    assert report.status == EXIT_FAIL
    assert report.verdict_rows[0]["verdict"] in ("fail", "abort")


@pytest.mark.slow
def test_viscoelastic_preset_rates(preset, cache):
    report = run(ExperimentConfig.from_dict(preset("viscoelastic_n3")), cache, write=False)
    assert report.status == EXIT_PASS
    slopes = {(row["p"], row["q"]): row["fitted"] for row in report.verdict_rows}
    assert slopes[(1.0, math.inf)] == pytest.approx(-1.5, abs=0.1)
    assert slopes[(1.0, 1.0)] == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
@pytest.mark.parametrize("name", PRESETS)
def test_presets_pass(preset, cache, name):
    report = run(ExperimentConfig.from_dict(preset(name)), cache, write=False)
    assert report.summary["aborted"] == []
    assert report.status == EXIT_PASS
