"""Shared fixtures for the lab test-suite."""

import json
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import config  # noqa: E402
from services.cache_service import ProfileCache  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_cache_dir(tmp_path, monkeypatch):
    """Point the default profile cache at a per-test directory."""
    root = tmp_path / "cache"
    monkeypatch.setattr(config, "cache_dir", root)
    return root


@pytest.fixture
def cache(isolated_cache_dir):
    return ProfileCache(isolated_cache_dir, seed=0)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict as JSON and return its path."""

    def _write(data, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def preset():
    def _load(name):
        return json.loads((ROOT / "presets" / f"{name}.json").read_text(encoding="utf-8"))

    return _load
