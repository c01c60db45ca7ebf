"""Scenario parsing, config hashing, and the four CLI subcommands."""

import csv
import io
import subprocess
import sys

import pytest

from moldetect.cli import EXIT_CAP, EXIT_CONFIG, EXIT_OK, main
from moldetect.errors import ConfigError
from moldetect.fusion import Method
from moldetect.scenario import config_hash, load_scenario, scenario_from_dict

MINIMAL = """
m_snm: 2
noise:
  n: 5
  spatial_base: null
detector:
  eta1: 1.0e-3
"""

CORRELATED = """
m_snm: 3
noise:
  n: 9
  p: 2
  rho_profile: [0.2]
  spatial_base: 0.25
feature:
  k: 2.0
detector:
  eta1: 1.0e-4
fusion:
  g: 1.0
  sigma_mcc: 0.1
"""


@pytest.fixture
def minimal_file(tmp_path):
    path = tmp_path / "minimal.yaml"
    path.write_text(MINIMAL)
    return str(path)


@pytest.fixture
def correlated_file(tmp_path):
    path = tmp_path / "correlated.yaml"
    path.write_text(CORRELATED)
    return str(path)


class TestScenarioParsing:
    def test_minimal_defaults(self, minimal_file):
        scenario = load_scenario(minimal_file)
        assert scenario.m_snm == 2
        assert scenario.config.n == 5
        assert scenario.config.spatial_base is None
        assert scenario.config.eta1 == 1e-3
        assert scenario.config.prior_h1 == 0.5

    def test_unknown_key_named_in_error(self):
        with pytest.raises(ConfigError, match="sigma_mc"):
            scenario_from_dict({"m_snm": 1, "fusion": {"sigma_mc": 0.1}})

    def test_vote_exceeding_array_size_rejected(self):
        with pytest.raises(ConfigError, match="vote_m"):
            scenario_from_dict({"m_snm": 2, "fusion": {"vote_m": 3}})

    def test_rho_profile_span_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="rho_profile"):
            scenario_from_dict({"m_snm": 1, "noise": {"n": 5, "p": 3, "rho_profile": [0.1]}})

    def test_method_parse(self):
        scenario = scenario_from_dict({"m_snm": 1, "method": "approx"})
        assert scenario.config.method is Method.APPROX
        with pytest.raises(ConfigError, match="method"):
            scenario_from_dict({"m_snm": 1, "method": "nonsense"})

    def test_physics_front_end_supplies_healthy_feature(self):
        scenario = scenario_from_dict({"m_snm": 1, "ncc": {"kappa1": 1.0, "t_tn": 2.0}})
        assert scenario.ncc is not None
        assert scenario.config.nh > 0.0 and scenario.config.nh != 1.0

    def test_hash_is_stable_and_sensitive(self, minimal_file):
        a = load_scenario(minimal_file)
        b = load_scenario(minimal_file)
        assert config_hash(a) == config_hash(b)
        changed = scenario_from_dict({"m_snm": 2, "noise": {"n": 6, "spatial_base": None},
                                      "detector": {"eta1": 1e-3}})
        assert config_hash(a) != config_hash(changed)


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAnalyze:
    def test_minimal_single_row(self, minimal_file, capsys):
        code, out, _ = run_cli(["analyze", minimal_file], capsys)
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 1
        assert rows[0]["m_snm"] == "2"
        assert 0.0 <= float(rows[0]["p_d"]) <= 1.0

    def test_malformed_config_exits_two(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("m_snm: -3\n")
        code, _, err = run_cli(["analyze", str(path)], capsys)
        assert code == EXIT_CONFIG
        assert "m_snm" in err

    def test_exact_above_cap_exits_three(self, tmp_path, capsys):
        path = tmp_path / "big.yaml"
        path.write_text("m_snm: 30\nmethod: exact\n")
        code, _, err = run_cli(["analyze", str(path)], capsys)
        assert code == EXIT_CAP
        assert "approx" in err

    def test_plot_dir_renders_figures(self, minimal_file, tmp_path, capsys):
        plot_dir = tmp_path / "figs"
        plot_dir.mkdir()
        code, _, _ = run_cli(["analyze", minimal_file, "--plot-dir", str(plot_dir)], capsys)
        assert code == EXIT_OK
        assert sorted(p.name for p in plot_dir.iterdir()) == ["rates_pf.png", "rates_pm.png"]


class TestSimulate:
    def test_deterministic_output(self, minimal_file, tmp_path, capsys):
        outputs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            code, _, _ = run_cli(
                ["simulate", minimal_file, "--trials", "100000", "--seed", "7",
                 "-o", str(path)],
                capsys,
            )
            assert code == EXIT_OK
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_zero_trials_usage_error(self, minimal_file, capsys):
        code, _, _ = run_cli(["simulate", minimal_file, "--trials", "0"], capsys)
        assert code == EXIT_CONFIG


class TestOptimize:
    def test_feasible_design_reported(self, tmp_path, capsys):
        path = tmp_path / "design.yaml"
        path.write_text(
            "m_snm: 1\n"
            "noise: {n: 9, spatial_base: null}\n"
            "detector: {eta1: 1.0e-4}\n"
            "design: {xi: 0.9, gamma: 1.0e-2, m_max: 16}\n"
        )
        code, out, _ = run_cli(["optimize", str(path)], capsys)
        assert code == EXIT_OK
        assert "M*=" in out

    def test_infeasible_is_exit_zero(self, tmp_path, capsys):
        path = tmp_path / "design.yaml"
        path.write_text(
            "m_snm: 1\n"
            "noise: {n: 3, spatial_base: null}\n"
            "fusion: {sigma_mcc: 2.0}\n"
        )
        code, out, _ = run_cli(
            ["optimize", str(path), "--xi", "0.999999999999", "--gamma", "1e-12",
             "--m-max", "6"],
            capsys,
        )
        assert code == EXIT_OK
        assert "INFEASIBLE" in out

    def test_missing_design_section_exits_two(self, minimal_file, capsys):
        code, _, _ = run_cli(["optimize", minimal_file], capsys)
        assert code == EXIT_CONFIG


class TestSweep:
    def test_grid_rows(self, minimal_file, capsys):
        code, out, _ = run_cli(
            ["sweep", minimal_file, "--vary", "n=1:2:9"], capsys
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [row["n"] for row in rows] == ["1", "3", "5", "7", "9"]
        # every row carries a resolved config hash
        assert all(len(row["config_hash"]) == 12 for row in rows)

    def test_cartesian_product_of_axes(self, minimal_file, capsys):
        code, out, _ = run_cli(
            ["sweep", minimal_file, "--vary", "n=3:2:5", "--vary", "k=1.0:1.0:2.0"],
            capsys,
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 4

    def test_empty_grid_exits_two(self, minimal_file, capsys):
        code, _, _ = run_cli(["sweep", minimal_file, "--vary", "n=9:2:1"], capsys)
        assert code == EXIT_CONFIG

    def test_row_reproducibility(self, correlated_file, capsys):
        code, first, _ = run_cli(["sweep", correlated_file, "--vary", "m_snm=2:1:3"], capsys)
        assert code == EXIT_OK
        code, second, _ = run_cli(["sweep", correlated_file, "--vary", "m_snm=2:1:3"], capsys)
        assert first == second


class TestEntryPoint:
    def test_installed_console_script(self, minimal_file):
        proc = subprocess.run(
            [sys.executable, "-m", "moldetect.cli", "analyze", minimal_file],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("config_hash,")
