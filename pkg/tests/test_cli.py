import json
import math
import os
import xml.etree.ElementTree as ET

import pytest

from kerrcavity.cli import (OUTPUT_ENV_VAR, config_from_dict, config_from_preset,
                            main)
from kerrcavity.errors import ConfigError

GAMMA_EXCITED = [1.0, 0.0, 0.0, 0.0]


def base_config(**overrides):
    cfg = {
        "params": {"lambda": 1.0, "epsilon": 10.0, "delta": 10.0,
                   "chi1": 1.0, "chi2": 1.0, "gamma": GAMMA_EXCITED},
        "sweep": {"variable": "time", "range": [0.0, 1.0], "points": 5,
                  "observables": ["mandel_q_m1", "g2_m1"]},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfigParsing:
    def test_minimal_roundtrip(self):
        cfg = config_from_dict(base_config())
        assert cfg.spec.points == 5
        assert cfg.spec.params.chi1 == 1.0
        assert cfg.trunc.n_max == 14

    def test_complex_entries(self):
        raw = base_config()
        raw["params"]["alpha1"] = [0.5, -0.25]
        s = 1.0 / math.sqrt(2.0)
        raw["params"]["gamma"] = [[0.0, s], [0.0, 0.0], [0.0, 0.0], [s, 0.0]]
        cfg = config_from_dict(raw)
        assert cfg.spec.params.alpha1 == 0.5 - 0.25j
        assert cfg.spec.params.gamma1 == pytest.approx(1j * s)

    def test_error_paths_are_reported(self):
        raw = base_config()
        raw["params"]["gamma"] = [0.9, 0.0, 0.0, 0.0]
        with pytest.raises(ConfigError) as err:
            config_from_dict(raw)
        assert "params.gamma" in str(err.value)

    def test_sweep_and_point_exclusive(self):
        raw = base_config()
        raw["point"] = {"t": 1.0, "observables": ["norm"]}
        with pytest.raises(ConfigError):
            config_from_dict(raw)

    def test_explicit_n_max(self):
        raw = base_config(truncation={"n_max": 9})
        assert config_from_dict(raw).trunc.n_max == 9

    def test_deformation_variants(self):
        raw = base_config()
        raw["params"]["deformation"] = "sqrt"
        assert config_from_dict(raw).spec.params.deformation.kind == "sqrt"
        raw["params"]["deformation"] = {"custom": [1.0] * 40}
        assert config_from_dict(raw).spec.params.deformation.kind == "custom"

    def test_preset_config(self):
        cfg = config_from_preset("fig3b")
        assert cfg.spec.observables == ("mandel_q_m1",)
        assert cfg.label == "fig3b"


class TestMainRun:
    def test_csv_output_and_summary(self, tmp_path, capsys):
        out = str(tmp_path / "fig3b.csv")
        assert main(["--preset", "fig3b", "--format", "csv", "--out", out]) == 0
        lines = open(out, encoding="utf-8").read().splitlines()
        assert lines[0] == "t,mandel_q_m1,error"
        assert len(lines) == 102
        # 12 significant digits
        first = lines[1].split(",")
        assert len(first[1].split("e")[0].replace("-", "").replace(".", "")) == 12
        assert "101 points" in capsys.readouterr().out

    def test_csv_byte_identical(self, tmp_path):
        a = str(tmp_path / "a.csv")
        b = str(tmp_path / "b.csv")
        assert main(["--preset", "fig6a", "--out", a, "--seed", "3"]) == 0
        assert main(["--preset", "fig6a", "--out", b, "--seed", "3"]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_svg_well_formed(self, tmp_path):
        out = str(tmp_path / "plot.svg")
        assert main(["--preset", "fig5b", "--format", "svg", "--out", out]) == 0
        root = ET.parse(out).getroot()
        assert root.tag.endswith("svg")
        polylines = [e for e in root.iter() if e.tag.endswith("polyline")]
        assert len(polylines) >= 2   # sx and sp

    def test_json_output(self, tmp_path, monkeypatch):
        cfg = base_config(output={"format": "json"})
        path = write_config(tmp_path, cfg)
        out = str(tmp_path / "table.json")
        assert main(["--config", path, "--out", out]) == 0
        doc = json.loads(open(out, encoding="utf-8").read())
        assert doc["columns"][0] == "t"
        assert len(doc["rows"]) == 5

    def test_point_request(self, tmp_path):
        cfg = {
            "params": {"lambda": 1.0, "epsilon": 10.0, "delta": 10.0,
                       "gamma": GAMMA_EXCITED},
            "point": {"t": 0.0, "observables": ["mandel_q_m1", "g2_m1"]},
        }
        path = write_config(tmp_path, cfg)
        out = str(tmp_path / "point.csv")
        assert main(["--config", path, "--out", out]) == 0
        lines = open(out, encoding="utf-8").read().splitlines()
        assert len(lines) == 2
        values = lines[1].split(",")
        assert float(values[1]) == pytest.approx(0.0, abs=1e-9)   # Mandel Q
        assert float(values[2]) == pytest.approx(1.0, abs=1e-9)   # g2

    def test_env_var_overrides_output_path(self, tmp_path, monkeypatch):
        target = str(tmp_path / "env.csv")
        monkeypatch.setenv(OUTPUT_ENV_VAR, target)
        assert main(["--preset", "fig6a"]) == 0
        assert os.path.exists(target)

    def test_engine_flag_override(self, tmp_path):
        out = str(tmp_path / "both.csv")
        cfg = base_config()
        cfg["sweep"]["range"] = [0.0, 0.5]
        cfg["sweep"]["points"] = 3
        path = write_config(tmp_path, cfg)
        assert main(["--config", path, "--engine", "both", "--out", out]) == 0
        header = open(out, encoding="utf-8").read().splitlines()[0]
        assert "mandel_q_m1_oracle" in header
        assert "mandel_q_m1_delta" in header

    def test_exactly_one_source_required(self, tmp_path):
        assert main([]) == 2
        path = write_config(tmp_path, base_config())
        assert main(["--config", path, "--preset", "fig3b"]) == 2

    def test_invalid_gamma_exits_2(self, tmp_path, capsys):
        cfg = base_config()
        cfg["params"]["gamma"] = [0.9, 0.0, 0.0, 0.0]
        path = write_config(tmp_path, cfg)
        assert main(["--config", path]) == 2
        assert "gamma" in capsys.readouterr().err

    def test_lambda_zero_closed_form_exits_3(self, tmp_path, capsys):
        cfg = base_config()
        cfg["params"]["lambda"] = 0.0
        path = write_config(tmp_path, cfg)
        assert main(["--config", path]) == 3
        assert "LambdaZero" in capsys.readouterr().err

    def test_malformed_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["--config", str(path)]) == 2


class TestValidateMode:
    def test_preset_validate_passes(self, tmp_path, capsys):
        out = str(tmp_path / "report.json")
        assert main(["--preset", "fig6b", "--validate", "--seed", "11",
                     "--out", out]) == 0
        report = json.loads(open(out, encoding="utf-8").read())
        assert report["status"] == "pass"
        assert report["closed_vs_rwa_amplitude_delta"] < 1e-6
        statuses = {c["status"] for c in report["checks"]}
        assert statuses <= {"pass", "info"}
        assert "max closed-vs-oracle delta" in capsys.readouterr().out

    def test_literal_t4_divergence_is_informational(self, tmp_path):
        cfg = base_config()
        cfg["params"]["t4_convention"] = "paper_literal"
        cfg["sweep"]["range"] = [0.0, 0.5]
        cfg["sweep"]["points"] = 3
        path = write_config(tmp_path, cfg)
        out = str(tmp_path / "report.json")
        assert main(["--config", path, "--validate", "--seed", "2",
                     "--out", out]) == 0
        report = json.loads(open(out, encoding="utf-8").read())
        names = [c["name"] for c in report["checks"] if c["status"] == "info"]
        assert any("t4 convention" in n for n in names)

    def test_lambda_zero_validate_exits_3(self, tmp_path):
        cfg = base_config()
        cfg["params"]["lambda"] = 0.0
        path = write_config(tmp_path, cfg)
        assert main(["--config", path, "--validate"]) == 3
