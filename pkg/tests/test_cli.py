import json

import numpy as np
import pytest

from curvlab.cli import (
    ConfigError,
    main,
    parse_polynomial_string,
    run_command,
)


def write_config(tmp_path, cfg, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestPolynomialStrings:
    @pytest.mark.parametrize("text,coeffs", [
        ("u^4", [0, 0, 0, 0, 1.0]),
        ("-u^4/6", [0, 0, 0, 0, -1 / 6]),
        ("u", [0, 1.0]),
        ("2u^3+0.5u", [0, 0.5, 0, 2.0]),
        ("5", [5.0]),
        ("u^2 - u", [0, -1.0, 1.0]),
    ])
    def test_parse(self, text, coeffs):
        np.testing.assert_allclose(parse_polynomial_string(text), coeffs)

    def test_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_polynomial_string("u^")
        with pytest.raises(ConfigError):
            parse_polynomial_string("")


class TestConfigValidation:
    def test_unknown_command(self):
        with pytest.raises(ConfigError, match="command"):
            run_command({"command": "fly", "family": 2, "s": 2,
                         "profiles": ["0"]})

    def test_bad_family(self):
        with pytest.raises(ConfigError, match="family"):
            run_command({"command": "verify", "family": 7})

    def test_missing_profiles(self):
        with pytest.raises(ConfigError, match="profiles"):
            run_command({"command": "verify", "family": 2, "s": 2})

    def test_wrong_point_length(self):
        with pytest.raises(ConfigError, match="length"):
            run_command({"command": "curvature", "family": 2, "s": 2,
                         "profiles": ["0"], "points": [[0, 0]]})

    def test_kp_needs_family3(self):
        with pytest.raises(ConfigError, match="family 3"):
            run_command({"command": "kp", "family": 2, "s": 2,
                         "profiles": ["0"], "points": [[0] * 6, [1] * 6]})

    def test_grid_validation(self):
        with pytest.raises(ConfigError, match="grid"):
            run_command({"command": "invariants", "family": 2, "s": 2,
                         "profiles": ["0"], "grid": {"axis": 0}})


class TestCommands:
    def test_curvature_payload(self):
        report = run_command({"command": "curvature", "family": 3, "r": 2,
                              "psi": "u^2", "points": [[0] * 6], "seed": 0})
        pkg = report["payload"]["packages"][0]
        nonzero = {tuple(e["idx"]): e["value"] for e in pkg["R"]}
        assert nonzero[(4, 1, 1, 4)] == 2.0
        assert report["summary"]["failed"] == 0

    def test_kp_command(self):
        report = run_command({
            "command": "kp", "family": 3, "r": 2, "psi": "u^4",
            "points": [[1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]], "seed": 0})
        blob = report["payload"]["kp"]
        assert blob["differ"] is True
        assert blob["P"]["label"] == "BothNonzero"
        assert blob["Q"]["label"] == "OnlyQuartic"

    def test_geodesic_trajectory(self):
        report = run_command({
            "command": "geodesic", "family": 1, "p": 2,
            "profiles": [{"kind": "polynomial",
                          "terms": [{"exponents": [2, 0], "coeff": 1.0},
                                    {"exponents": [0, 2], "coeff": 1.0}]}],
            "points": [[0.1, 0.2, 0.0, 0.0]],
            "initial_velocity": [0.1, 0.0, 0.05, 0.0],
            "t_max": 2.0, "samples": 9, "seed": 0})
        rows = report["payload"]["trajectory"]
        assert len(rows) == 9
        assert rows[0]["position"] == [0.1, 0.2, 0.0, 0.0]
        energies = [r["energy"] for r in rows]
        assert max(energies) - min(energies) < 1e-8

    def test_invariants_scan_is_a_finding_not_a_failure(self):
        report = run_command({
            "command": "invariants", "family": 2, "s": 3, "fi": "u^5",
            "grid": {"axis": 0, "from": 0.0, "to": 1.0, "steps": 5},
            "seed": 0})
        assert report["summary"]["failed"] == 0
        assert report["payload"]["scan"]["constant"] is False

    def test_probe_commands(self):
        base = {"family": 2, "s": 2, "profiles": ["0"], "seed": 1,
                "points": [[0.3, -0.2, 0.1, 0.4, -0.5, 0.2]],
                "sampler": {"count": 15}}
        report = run_command({**base, "command": "probe-osserman", "sign": -1})
        assert report["payload"]["probe_osserman"]["constant"] is False
        report = run_command({**base, "command": "probe-ip", "sign": 1})
        assert report["payload"]["probe_ip"]["detail"]["rank"] == 4

    def test_normalize_command(self):
        report = run_command({
            "command": "normalize", "family": 3, "r": 2, "psi": "u^2",
            "points": [[0.5, -0.3, 0.2, 0.1, 0.7, -0.2]], "seed": 0})
        entry = report["payload"]["normalizations"][0]
        assert entry["match"]["passed"] is True
        assert report["summary"]["failed"] == 0


class TestEndToEnd:
    def test_verify_exit_code_and_report(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"command": "verify", "family": 2, "s": 2,
                                      "profiles": ["0"], "seed": 1})
        out = str(tmp_path / "report.json")
        assert main(["--config", cfg, "--out", out, "--quiet"]) == 0
        report = json.loads(open(out).read())
        assert report["summary"]["failed"] == 0
        names = [row["name"] for row in report["checks"]]
        assert names == sorted(names)
        assert report["config"]["seed"] == 1

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["--config", str(bad)]) == 2
        cfg = write_config(tmp_path, {"command": "fly", "family": 2, "s": 2,
                                      "profiles": ["0"]})
        assert main(["--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "command" in err

    def test_seed_override(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"command": "kp", "family": 3, "r": 2,
                                      "psi": "u^4",
                                      "points": [[1, 0, 0, 0, 0, 0],
                                                 [0, 0, 0, 0, 0, 0]]})
        out = str(tmp_path / "r.json")
        assert main(["--config", cfg, "--seed", "9", "--out", out,
                     "--quiet"]) == 0
        assert json.loads(open(out).read())["config"]["seed"] == 9

    def test_reports_byte_identical_modulo_timings(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "command": "report", "family": 3, "r": 2, "psi": "u^2+0.1u^3",
            "seed": 3, "sampler": {"count": 8}})
        texts = []
        for k in range(2):
            out = str(tmp_path / f"rep{k}.json")
            assert main(["--config", cfg, "--out", out, "--quiet"]) == 0
            blob = json.loads(open(out).read())
            blob.pop("timings")
            texts.append(json.dumps(blob, sort_keys=True))
        assert texts[0] == texts[1]

    def test_failed_check_sets_exit_1(self, tmp_path, capsys):
        # an indefinite Hessian cannot be model-matched: the numerical failure
        # must surface as a failed check with a witness, not a crash
        cfg = write_config(tmp_path, {
            "command": "normalize", "family": 1, "p": 2,
            "profiles": [{"kind": "polynomial",
                          "terms": [{"exponents": [2, 0], "coeff": 1.0},
                                    {"exponents": [0, 2], "coeff": -1.0}]}],
            "points": [[0.5, 0.5, 0.0, 0.0]], "seed": 0})
        out = str(tmp_path / "fail.json")
        assert main(["--config", cfg, "--out", out, "--quiet"]) == 1
        report = json.loads(open(out).read())
        failed = [r for r in report["checks"] if r["status"] == "fail"]
        assert failed and failed[0]["witness"] is not None
