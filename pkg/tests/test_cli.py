"""Tests for the command-line surface and its exit statuses."""

import json
import math

import pytest

from main import build_parser, command_arguments, exit_code, main


def test_zoo_prints_catalogue(capsys):
    assert main(["zoo", "--dim", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    names = [entry["name"] for entry in payload["data"]]
    assert "double_dispersion" in names
    assert len(names) >= 10


def test_unknown_subcommand_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["plot"])
    assert excinfo.value.code == 2


def test_malformed_param_is_a_config_error(capsys):
    assert main(["mhcheck", "--model", "fractional", "--param", "theta"]) == 2
    assert json.loads(capsys.readouterr().out)["error"]["type"] == "ValidationError"


def test_unknown_model_is_a_config_error(capsys):
    assert main(["mhcheck", "--model", "no_such_model"]) == 2
    assert json.loads(capsys.readouterr().out)["error"]["type"] == "SymbolError"


def test_run_without_config_is_a_config_error(capsys):
    assert main(["run"]) == 2
    assert "config" in capsys.readouterr().out


def test_run_with_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert json.loads(capsys.readouterr().out)["error"]["type"] == "ConfigError"


def test_run_writes_reports_and_passes(tmp_path, write_config, capsys):
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
    assert main(["run", "--config", str(path), "--out", str(out), "--threads", "2"]) == 0
    assert (out / "verdicts.csv").exists()
    assert json.loads(capsys.readouterr().out)["data"]["exit_code"] == 0


def test_kernel_prints_profile_csv(capsys):
    argv = ["kernel", "--model", "classical", "--dim", "1", "--band", "low", "--t", "1", "--points", "64"]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# schema_version,1"
    assert "r,value,quad_error" in lines


def test_cache_info_and_clear(isolated_cache_dir, capsys):
    main(["kernel", "--model", "classical", "--dim", "1", "--band", "low", "--t", "1", "--points", "64"])
    capsys.readouterr()

    assert main(["cache", "info"]) == 0
    info = json.loads(capsys.readouterr().out)["data"]
    assert info["entries"] == 1
    assert info["root"] == str(isolated_cache_dir)

    assert main(["cache", "clear"]) == 0
    assert json.loads(capsys.readouterr().out)["data"]["removed"] == 1


def test_command_arguments_map_flags_to_schema_names():
    parser = build_parser()
    name, arguments = command_arguments(parser.parse_args(["crucial", "--n", "2", "--p", "1", "--q", "2"]))
    assert name == "crucial"
    assert (arguments["n"], arguments["p"], arguments["q"]) == (2, 1.0, 2.0)

    name, arguments = command_arguments(
        parser.parse_args(["sweep", "--model", "fractional", "--param", "theta=0.5", "--band", "low",
                           "--p", "4/3", "--q", "inf"])
    )
    assert name == "sweep"
    assert arguments["params"] == {"theta": 0.5}
    assert (arguments["p"], arguments["q"]) == ("4/3", math.inf)

    name, arguments = command_arguments(parser.parse_args(["cache", "clear"]))
    assert (name, arguments) == ("cache_clear", {})


def test_exit_code_of_envelopes():
    assert exit_code(json.dumps({"status": "success", "data": {"exit_code": 1}})) == 1
    assert exit_code(json.dumps({"status": "success", "data": []})) == 0
    assert exit_code(json.dumps({"status": "error", "error": {"type": "ConfigError"}})) == 2
    assert exit_code(json.dumps({"status": "error", "error": {"type": "QuadratureError"}})) == 1


def test_time_flag_is_not_taken_for_an_abbreviation():
    parser = build_parser()
    args = parser.parse_args(["kernel", "--model", "classical", "--t", "2", "--threads", "3"])
    assert args.t == 2.0
    assert args.threads == 3
    assert parser.parse_args(["kernel", "--model", "classical", "--time", "5"]).t == 5.0


def test_abbreviated_common_flags_are_refused():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["kernel", "--model", "classical", "--t", "1", "--thread", "2"])
    assert excinfo.value.code == 2
