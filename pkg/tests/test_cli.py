import json
import math
from pathlib import Path

import pytest

from nosignal import bob_total, ProtocolConfig, alice_total
from nosignal.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main


def write_config(path: Path, **overrides) -> str:
    cfg = {
        "schema_version": 1,
        "sg": {
            "mass": 1.0,
            "sigma0": 1.0,
            "moment": 1.0,
            "gradient": 210.4,
            "bias": 0.0,
            "transit": 0.002,
        },
        "omega_list": [math.pi / 2],
        "theta_list": [0.0, math.pi / 3, math.pi / 2],
        "model": "projected",
        "samples": 10_000,
        "root_seed": 11,
        "output_dir": str(path.parent / "runs"),
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


class TestConfigHandling:
    def test_malformed_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "schema_version": 1,\n  "oops"\n}', encoding="utf-8")
        code = main(["verify", "--config", str(bad)])
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        write_config(cfg)
        payload = json.loads(cfg.read_text())
        payload["samples_per_axis"] = 10
        cfg.write_text(json.dumps(payload))
        code = main(["verify", "--config", str(cfg)])
        assert code == EXIT_CONFIG
        assert "samples_per_axis" in capsys.readouterr().err

    def test_bad_model_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", model="exact")
        assert main(["verify", "--config", cfg]) == EXIT_CONFIG
        assert "model" in capsys.readouterr().err

    def test_wrong_schema_version(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", schema_version=99)
        assert main(["verify", "--config", cfg]) == EXIT_CONFIG
        assert "schema_version" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["verify", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG


class TestVerify:
    def test_passes_and_reports(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is True
        assert report["max_abs_residual"] < 1e-9
        assert report["max_phase_sum_dev"] < 1e-9
        assert len(report["cells"]) == 3
        assert (out / "run_meta.json").exists()

    def test_degenerate_device_still_passes_with_warning(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            sg={
                "mass": 1.0,
                "sigma0": 1.0,
                "moment": 1.0,
                "gradient": 0.0,
                "bias": 0.0,
                "transit": 0.002,
            },
        )
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is True
        assert any("gradient" in w for w in report["warnings"])

    def test_pure_model_also_passes(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", model="pure")
        out = tmp_path / "out"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is True and report["model"] == "pure"

    def test_injected_violation_fails(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        code = main(
            ["verify", "--config", cfg, "--out", str(out), "--inject-violation", "0.1"]
        )
        assert code == EXIT_CHECK_FAILED
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is False
        assert report["max_abs_cos_sum"] > 0.05


class TestSweep:
    def test_rows_match_closed_forms(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        lines = (out / "sweep.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header == [
            "omega", "theta", "Es", "phi_plus", "phi_minus", "pA_plus",
            "pA_minus", "PA_total", "PB_plus", "PB_minus", "PB_total",
            "residual", "model",
        ]
        assert len(lines) == 4
        for line in lines[1:]:
            row = dict(zip(header, line.split(",")))
            es, theta = float(row["Es"]), float(row["theta"])
            assert float(row["PB_total"]) == pytest.approx(
                bob_total(es, theta), abs=1e-12
            )
            cfg_obj = ProtocolConfig(
                omega=float(row["omega"]),
                theta=theta,
                Es=es,
                phi_plus=float(row["phi_plus"]),
                phi_minus=float(row["phi_minus"]),
            )
            assert float(row["PA_total"]) == pytest.approx(
                alice_total(cfg_obj), abs=1e-12
            )

    def test_aligned_theta_row_has_zero_residual(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        main(["sweep", "--config", cfg, "--out", str(out)])
        lines = (out / "sweep.csv").read_text().splitlines()
        theta0 = [l for l in lines[1:] if l.split(",")[1] == "0.0"]
        assert theta0 and all(row.split(",")[11] == "0.0" for row in theta0)

    def test_ideal_device_residual_column_is_zero(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            sg={
                "mass": 1.0,
                "sigma0": 1.0,
                "moment": 1.0,
                "gradient": 10000.0,
                "bias": 0.0,
                "transit": 0.002,
            },
        )
        out = tmp_path / "out"
        main(["sweep", "--config", cfg, "--out", str(out)])
        lines = (out / "sweep.csv").read_text().splitlines()
        assert all(l.split(",")[11] == "0.0" for l in lines[1:])
        assert all(l.split(",")[2] == "0.0" for l in lines[1:])  # Es underflows


class TestEstimate:
    def test_requires_enough_samples(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", samples=10)
        assert main(["estimate", "--config", cfg]) == EXIT_CONFIG

    def test_bound_contains_zero(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", samples=100_000)
        out = tmp_path / "out"
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        lines = [
            json.loads(l)
            for l in (out / "estimates.jsonl").read_text().splitlines()
        ]
        kinds = [l["kind"] for l in lines]
        assert kinds.count("record") == 4
        assert kinds.count("estimate") == 2
        bounds = [l for l in lines if l["kind"] == "bound"]
        assert len(bounds) == 1 and bounds[0]["consistent_with_zero"]

    def test_small_sample_interval_is_wider_but_consistent(self, tmp_path):
        widths = {}
        for n in (1000, 100_000):
            cfg = write_config(tmp_path / f"cfg{n}.json", samples=n)
            out = tmp_path / f"out{n}"
            assert main(["estimate", "--config", cfg, "--out", str(out)]) == EXIT_OK
            bound = [
                json.loads(l)
                for l in (out / "estimates.jsonl").read_text().splitlines()
                if json.loads(l)["kind"] == "bound"
            ][0]
            assert bound["consistent_with_zero"]
            widths[n] = bound["ci"][1] - bound["ci"][0]
        assert widths[1000] > widths[100_000]

    def test_injected_violation_excluded(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", samples=1_000_000)
        out = tmp_path / "out"
        code = main(
            [
                "estimate", "--config", cfg, "--out", str(out),
                "--inject-violation", "0.3",
            ]
        )
        assert code == EXIT_OK
        bound = [
            json.loads(l)
            for l in (out / "estimates.jsonl").read_text().splitlines()
            if json.loads(l)["kind"] == "bound"
        ][0]
        assert not bound["consistent_with_zero"]
        assert bound["point"] == pytest.approx(0.3, abs=0.01)

    def test_seed_changes_output(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", samples=10_000)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["estimate", "--config", cfg, "--out", str(out_a), "--seed", "1"])
        main(["estimate", "--config", cfg, "--out", str(out_b), "--seed", "2"])
        assert (out_a / "estimates.jsonl").read_bytes() != (
            out_b / "estimates.jsonl"
        ).read_bytes()

    def test_degenerate_omega_is_reported(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json", omega_list=[0.0], samples=10_000
        )
        out = tmp_path / "out"
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        lines = [
            json.loads(l)
            for l in (out / "estimates.jsonl").read_text().splitlines()
        ]
        assert lines[0]["kind"] == "degenerate"


class TestOracle:
    def test_free_particle_agreement(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            sg={
                "mass": 1.0,
                "sigma0": 1.0,
                "moment": 1.0,
                "gradient": 0.0,
                "bias": 0.0,
                "transit": 0.0,
            },
            oracle={
                "extent": 256.0,
                "points": 4096,
                "dt": 1e-3,
                "times": [1.0, 5.0, 15.0],
            },
        )
        out = tmp_path / "out"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "oracle.json").read_text())
        assert report["max_l1_density_diff"] < 1e-6
        assert report["max_abs_E_diff"] < 1e-9

    def test_impulsive_device_agreement(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            oracle={
                "extent": 384.0,
                "points": 8192,
                "dt": 2e-4,
                "times": [2.0, 10.0, 30.0],
            },
        )
        out = tmp_path / "out"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "oracle.json").read_text())
        assert report["max_abs_E_diff"] < 1e-3
        assert report["max_coherence_mod_diff"] < 1e-3

    def test_non_impulsive_disagreement_is_reported(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            sg={
                "mass": 1.0,
                "sigma0": 1.0,
                "moment": 1.0,
                "gradient": 0.6,
                "bias": 0.0,
                "transit": 0.7,
            },
            oracle={
                "extent": 256.0,
                "points": 4096,
                "dt": 1e-3,
                "times": [2.0, 8.0],
            },
        )
        out = tmp_path / "out"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "oracle.json").read_text())
        assert any("impulsive" in note for note in report["notes"])
        assert report["max_abs_E_diff"] > 0

    def test_boundary_leak_exits_numerical(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "cfg.json",
            oracle={
                "extent": 24.0,
                "points": 256,
                "dt": 1e-3,
                "times": [60.0],
            },
        )
        code = main(["oracle", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == EXIT_NUMERICAL
        assert "extent" in capsys.readouterr().err
