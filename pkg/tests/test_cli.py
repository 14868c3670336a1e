import json
import math

import pytest

from lpkdv.cli import (
    ConfigError,
    DEFAULT_CONFIG,
    load_config,
    main,
    run,
    validate_config,
)


def read(path):
    with open(path) as fh:
        return json.load(fh)


class TestConfig:
    def test_defaults_validate(self):
        validate_config(load_config(None))

    def test_merge_nested(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"envelope": {"amplitude": 0.5}}))
        cfg = load_config(cfg_path)
        assert cfg["envelope"]["amplitude"] == 0.5
        assert cfg["envelope"]["width"] == DEFAULT_CONFIG["envelope"]["width"]

    def test_p_equals_q_rejected(self):
        cfg = load_config(None)
        cfg["q"] = cfg["p"]
        with pytest.raises(ConfigError, match="mu"):
            validate_config(cfg)

    def test_kappa_range(self):
        cfg = load_config(None)
        cfg["kappa"] = 4.0
        with pytest.raises(ConfigError, match="kappa"):
            validate_config(cfg)


class TestRun:
    def test_coeffs_values(self, tmp_path):
        out = tmp_path / "out"
        assert run("coeffs", None, str(out), quiet=True) == 0
        doc = read(out / "coefficients.json")
        assert abs(doc["M1"] - math.sqrt(5)) < 1e-6
        assert abs(doc["rho1"] - (-1.2)) < 1e-9
        assert abs(doc["rho2"] - 16.0 / 75.0) < 1e-6
        assert abs(doc["tau2"]["im"] - 1.0 / 3.0) < 1e-9

    def test_selftest_passes(self, tmp_path):
        assert run("selftest", None, str(tmp_path / "o"), quiet=True) == 0

    def test_invalid_params_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"p": 1.0, "q": 1.0}))
        code = run("dispersion", str(cfg), str(tmp_path / "o"), quiet=True)
        assert code == 2
        assert "mu" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert run("frobnicate") == 2

    def test_broken_json_exit_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        assert run("coeffs", str(cfg), str(tmp_path / "o"), quiet=True) == 2

    def test_reproducible_reports(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run("spectrum", None, str(out1), quiet=True) == 0
        assert run("spectrum", None, str(out2), quiet=True) == 0
        for name in ("manifest.json", "spectrum_report.json", "spectrum.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_simulate_artifacts_round_trip(self, tmp_path):
        from lpkdv.fieldio import load_field_binary, load_field_csv

        out = tmp_path / "sim"
        assert run("simulate", None, str(out), quiet=True) == 0
        f_csv = load_field_csv(out / "field.csv")
        f_bin = load_field_binary(out / "field.bin")
        assert f_csv == f_bin

    def test_flow_check(self, tmp_path):
        out = tmp_path / "fc"
        assert run("flow-check", None, str(out), quiet=True) == 0
        rep = read(out / "flow_check.json")
        assert rep["flow1"]["passed"] and rep["flow2"]["passed"]
        assert rep["negative_control"]["exponent"] < 2.0

    def test_manifest_contents(self, tmp_path):
        out = tmp_path / "m"
        run("coeffs", None, str(out), quiet=True)
        doc = read(out / "manifest.json")
        assert doc["passed"] is True
        assert "numpy" in doc["versions"] and "lpkdv" in doc["versions"]
        assert doc["config"]["p"] == 1.5
        timings = read(out / "timings.json")
        assert "wall_seconds" in timings


class TestEnvelopeConfigs:
    def test_plane_envelope(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "envelope": {"type": "plane", "amplitude": 0.3, "k": 2},
            "nls": {"L": 128, "period": 40.0, "tau_final": 0.2},
        }))
        out = tmp_path / "o"
        assert run("nls-evolve", str(cfg), str(out), quiet=True) == 0

    def test_file_envelope(self, tmp_path):
        import numpy as np

        from lpkdv.nls import envelope_to_json, gaussian_envelope

        env = gaussian_envelope(128, 0.0, 40.0, 0.5, 2.0, 20.0)
        env_path = tmp_path / "env.json"
        env_path.write_text(json.dumps(envelope_to_json(env)))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "envelope": {"type": "file", "path": str(env_path)},
            "nls": {"L": 128, "period": 40.0, "tau_final": 0.1},
        }))
        assert run("nls-evolve", str(cfg), str(tmp_path / "o"), quiet=True) == 0

    def test_random_boundary_simulate(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "boundary": {"kind": "random", "amplitude": 0.02,
                         "n_size": 60, "m_size": 8, "p": 1.5, "q": -0.5},
        }))
        assert run("simulate", str(cfg), str(tmp_path / "o"), quiet=True) == 0

    def test_unknown_envelope_type(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"envelope": {"type": "sawtooth"}}))
        assert run("nls-evolve", str(cfg), str(tmp_path / "o"), quiet=True) == 2


def test_main_entry(tmp_path, capsys):
    code = main(["coeffs", "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 0
