import json
import math

import numpy as np
import pytest

from scrambler import cli
from scrambler.errors import NumericalError


def run_cli(*argv):
    return cli.main(list(argv))


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [list(map(float, line.split(","))) for line in lines[1:]]
    return header, np.asarray(rows)


class TestGreensCommand:
    def test_schema_and_values(self, tmp_path):
        out = tmp_path / "greens.csv"
        cfg = {"menu": {"intra": {"4": 1.0}}, "n": 0.5,
               "t_grid": [0.0, 1.0, 2.0]}
        assert run_cli("greens", "--config", json.dumps(cfg),
                       "--out", str(out)) == 0
        header, rows = read_csv(out)
        assert header == ["t", "Guu", "Gud", "Gdu", "Gdd", "ReGR", "ImGR"]
        assert rows[0][1] == 0.5
        assert rows[0][6] == -1.0
        # Gamma = 0.25: envelope e^{-t/8} at t = 1
        assert rows[1][3] == pytest.approx(0.5 * math.exp(-0.125), rel=1e-12)
        manifest = json.loads((tmp_path / "greens.csv.manifest.json").read_text())
        assert manifest["gamma"] == pytest.approx(0.25)

    def test_byte_identical_reruns(self, tmp_path):
        cfg = {"menu": {"intra": {"4": 1.0}}, "n": 0.37,
               "t_grid": {"start": 0.0, "stop": 3.0, "num": 7}}
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("greens", "--config", json.dumps(cfg), "--out", str(a))
        run_cli("greens", "--config", json.dumps(cfg), "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestPhaseDiagramCommand:
    def test_boundary_curve(self, tmp_path):
        out = tmp_path / "pd.csv"
        cfg = {"u3": 1.0, "n_grid": {"start": 0.1, "stop": 0.9, "num": 9}}
        assert run_cli("phase-diagram", "--config", json.dumps(cfg),
                       "--out", str(out)) == 0
        header, rows = read_csv(out)
        assert header == ["n", "u1_critical"]
        assert np.allclose(rows[:, 1], rows[:, 0] * (1.0 - rows[:, 0]),
                           atol=1e-15)
        manifest = json.loads((tmp_path / "pd.csv.manifest.json").read_text())
        point = manifest["points"][0]
        assert set(point) == {"n", "u1_critical", "kappa", "r",
                              "classification"}
        assert point["classification"] == "Critical"

    def test_off_critical_summary(self, tmp_path):
        out = tmp_path / "pd.csv"
        cfg = {"u3": 1.0, "n_grid": [0.5], "u1": 0.125}
        run_cli("phase-diagram", "--config", json.dumps(cfg), "--out", str(out))
        manifest = json.loads((tmp_path / "pd.csv.manifest.json").read_text())
        assert manifest["points"][0]["classification"] == "Scrambling"
        assert manifest["points"][0]["r"] == pytest.approx(0.5)


class TestSizeEvolveCommand:
    def test_scrambling_phase_plateau(self, tmp_path):
        # r = 1/2 model: the weight on s = 0 approaches r
        out = tmp_path / "se.csv"
        kappa = 0.125
        cfg = {"u1": 0.125, "u3": 1.0, "n": 0.5,
               "t_grid": [0.0, 20.0 / kappa], "s_max": 48, "tail_budget": 1.0}
        assert run_cli("size-evolve", "--config", json.dumps(cfg),
                       "--out", str(out)) == 0
        header, rows = read_csv(out)
        assert header == ["t", "s", "P"]
        late = rows[rows[:, 0] > 0.0]
        p0 = late[late[:, 1] == 0.0][0, 2]
        assert p0 == pytest.approx(0.5, abs=1e-3)

    def test_growth_indicator_in_manifest(self, tmp_path):
        out = tmp_path / "se.csv"
        cfg = {"u1": 0.0, "u3": 1.0, "n": 0.5, "t_grid": [0.0, 10.0],
               "s_max": 32, "N": 100, "tail_budget": 1.0}
        run_cli("size-evolve", "--config", json.dumps(cfg), "--out", str(out))
        manifest = json.loads((tmp_path / "se.csv.manifest.json").read_text())
        assert manifest["growth_over_modes_max"] == pytest.approx(
            math.exp(0.25 * 10.0) / 100.0, rel=1e-12)
        assert manifest["kappa"] == pytest.approx(0.25)


class TestClosedFormCommand:
    def test_distribution_mode(self, tmp_path):
        out = tmp_path / "cf.csv"
        cfg = {"r": 0.5, "kappa": 0.125, "t_grid": [math.log(2.0) / 0.125],
               "s_max": 4}
        run_cli("closed-form", "--config", json.dumps(cfg), "--out", str(out))
        header, rows = read_csv(out)
        assert header == ["t", "s", "P"]
        assert rows[1][2] == pytest.approx(2.0 / 9.0, rel=1e-12)

    def test_generating_mode(self, tmp_path):
        out = tmp_path / "cf.csv"
        cfg = {"u1": 0.125, "u3": 1.0, "n": 0.5, "t_grid": [0.0],
               "x_points": [0.0, 0.5, 1.0]}
        run_cli("closed-form", "--config", json.dumps(cfg), "--out", str(out))
        header, rows = read_csv(out)
        assert header == ["t", "x", "Z"]
        assert np.allclose(rows[:, 2], rows[:, 1], atol=1e-14)


class TestScramblonCommand:
    def test_header_and_support(self, tmp_path):
        out = tmp_path / "sc.csv"
        cfg = {"r": 0.5, "n": 0.5, "n_modes": 10 ** 6, "kappa": 0.125,
               "lambda": 100.0,
               "sigma_grid": {"start": 0.0, "stop": 1.0, "num": 11}}
        assert run_cli("scramblon", "--config", json.dumps(cfg),
                       "--out", str(out)) == 0
        header, rows = read_csv(out)
        assert header == ["sigma", "density"]
        manifest = json.loads((tmp_path / "sc.csv.manifest.json").read_text())
        assert manifest["s_sc"] == pytest.approx(0.5)
        assert manifest["singular_weight"] == pytest.approx(0.5)
        assert manifest["lambda"] == pytest.approx(100.0)
        beyond = rows[rows[:, 0] > 0.5]
        assert np.all(beyond[:, 1] == 0.0)


class TestOracleCommand:
    CFG = {"n_sys": 2, "n_env": 1,
           "menu": {"cross": [{"p": [1, 0, 0, 1], "u": 1.0}]},
           "n": 0.5, "dt": 0.004, "t_final": 0.2, "realizations": 4,
           "seed": 5, "times": [0.0, 0.2]}

    def test_output_schema_and_manifest(self, tmp_path):
        out = tmp_path / "oracle.csv"
        assert run_cli("oracle", "--config", json.dumps(self.CFG),
                       "--out", str(out)) == 0
        header, rows = read_csv(out)
        assert header == ["t", "s", "P_mean", "P_stderr"]
        start = rows[rows[:, 0] == 0.0]
        assert start[1][2] == pytest.approx(1.0, abs=1e-12)
        manifest = json.loads((tmp_path / "oracle.csv.manifest.json").read_text())
        for key in ("seed", "dt", "realizations", "wall_time_s",
                    "unitarity_max_dev"):
            assert key in manifest

    def test_seed_override_and_determinism(self, tmp_path):
        a, b, c = (tmp_path / name for name in ("a.csv", "b.csv", "c.csv"))
        run_cli("oracle", "--config", json.dumps(self.CFG), "--out", str(a),
                "--seed", "77")
        run_cli("oracle", "--config", json.dumps(self.CFG), "--out", str(b),
                "--seed", "77")
        run_cli("oracle", "--config", json.dumps(self.CFG), "--out", str(c),
                "--seed", "78")
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()


class TestDispatch:
    def test_unknown_subcommand(self, capsys):
        assert run_cli("not-a-command") == 1
        capsys.readouterr()

    def test_malformed_config(self):
        assert run_cli("greens", "--config", "{not json") == 1

    def test_missing_config_file(self):
        assert run_cli("greens", "--config", "/no/such/file.json") == 1

    def test_invalid_menu_maps_to_exit_one(self):
        cfg = {"menu": {"cross": [{"p": [2, 1, 0, 0], "u": 1.0}]}, "n": 0.5}
        assert run_cli("greens", "--config", json.dumps(cfg)) == 1

    def test_numerical_failure_maps_to_exit_two(self, monkeypatch):
        def explode(cfg, emitter):
            raise NumericalError("synthetic numerical failure")

        monkeypatch.setitem(cli._HANDLERS, "greens", explode)
        assert run_cli("greens", "--config", '{"n": 0.5, "menu": {}}') == 2

    def test_json_format(self, tmp_path, capsys):
        cfg = {"menu": {"intra": {"4": 1.0}}, "n": 0.5, "t_grid": [1.0]}
        assert run_cli("greens", "--config", json.dumps(cfg),
                       "--format", "json") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["t"] == "1"
        assert set(payload[0]) == {"t", "Guu", "Gud", "Gdu", "Gdd", "ReGR",
                                   "ImGR"}


class TestValidateCommand:
    def test_clean_build_passes(self, capsys):
        assert run_cli("validate") == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "invariant suites passed" in out
