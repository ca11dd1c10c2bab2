import csv

import numpy as np
import pytest

from hygroplan.cli import (
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_USAGE,
    run_cli,
)


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestExitCodes:
    def test_no_subcommand_is_usage_error(self):
        assert run_cli([]) == EXIT_USAGE

    def test_unknown_flag_is_usage_error(self):
        assert run_cli(["--definitely-not-a-flag"]) == EXIT_USAGE

    def test_missing_config_is_usage_error(self, tmp_path):
        rc = run_cli(
            ["--out-dir", str(tmp_path), "simulate", "--config", "/no/such/file.ini"]
        )
        assert rc == EXIT_USAGE

    def test_unknown_design_is_domain_error(self, tmp_path):
        rc = run_cli(["--out-dir", str(tmp_path), "simulate", "--design", "99"])
        assert rc == EXIT_DOMAIN

    def test_degenerate_pdf_is_domain_error(self, tmp_path):
        rc = run_cli(
            ["--out-dir", str(tmp_path), "pdf", "--theta", "0", "--p-nominal", "1"]
        )
        assert rc == EXIT_DOMAIN


class TestSimulate:
    def test_upward_step_monotone(self, tmp_path):
        rc = run_cli(
            [
                "--out-dir", str(tmp_path),
                "simulate", "--design", "2", "--sensor-x", "0.05",
                "--n-cells", "40", "--dt", "7200",
            ]
        )
        assert rc == EXIT_OK
        rows = _read_rows(tmp_path / "simulate_s2.csv")
        assert rows[0] == ["time_s", "phi"]
        phi = np.array([float(r[1]) for r in rows[1:]])
        # tolerance-level relaxation before the front arrives is allowed
        assert np.all(np.diff(phi) > -2e-5)
        assert phi[-1] > phi[0]


class TestOed:
    def test_single_step_d0_first_row_design_2(self, tmp_path):
        rc = run_cli(
            [
                "--out-dir", str(tmp_path),
                "oed", "--params", "d0", "--designs", "single", "--n-cells", "40",
            ]
        )
        assert rc == EXIT_OK
        rows = _read_rows(tmp_path / "oed_ranking.csv")
        assert rows[1][1] == "s2"
        psi = [float(r[3]) for r in rows[1:]]
        assert psi == sorted(psi, reverse=True)

    def test_jobs_flag_gives_same_ranking(self, tmp_path):
        argv = ["oed", "--params", "d0", "--designs", "s1,s2", "--n-cells", "40"]
        run_cli(["--out-dir", str(tmp_path / "a")] + argv)
        run_cli(["--out-dir", str(tmp_path / "b"), "--jobs", "2"] + argv)
        a = (tmp_path / "a" / "oed_ranking.csv").read_bytes()
        b = (tmp_path / "b" / "oed_ranking.csv").read_bytes()
        assert a == b


class TestSynthAndEstimate:
    def test_synth_deterministic_and_estimate_runs(self, tmp_path):
        argv = [
            "--seed", "3",
            "synth", "--design", "s1", "--sensor-x", "0.04",
            "--sampling-interval", "14400", "--noise-sigma", "0.005",
            "--n-cells", "40",
        ]
        assert run_cli(["--out-dir", str(tmp_path / "a")] + argv) == EXIT_OK
        assert run_cli(["--out-dir", str(tmp_path / "b")] + argv) == EXIT_OK
        a = (tmp_path / "a" / "synth_s1.csv").read_bytes()
        b = (tmp_path / "b" / "synth_s1.csv").read_bytes()
        assert a == b

        rc = run_cli(
            [
                "--out-dir", str(tmp_path),
                "estimate", "--n-cells", "40",
                "--dataset", f"{tmp_path / 'a' / 'synth_s1.csv'}:s1:0.04:d0",
                "--max-forward-solves", "60",
            ]
        )
        assert rc == EXIT_OK
        rows = {r[0]: r[1] for r in _read_rows(tmp_path / "estimate.csv")[1:]}
        assert float(rows["cost_final"]) <= float(rows["cost_initial"])
        assert (tmp_path / "residuals_0_s1.csv").exists()


class TestSweep:
    def test_winner_counts_written(self, tmp_path):
        rc = run_cli(
            [
                "--out-dir", str(tmp_path),
                "sweep", "--params", "d0", "--designs", "s1,s2",
                "--n-samples", "2", "--n-cells", "40",
            ]
        )
        assert rc == EXIT_OK
        rows = _read_rows(tmp_path / "sweep_winners.csv")
        assert rows[0] == ["design_id", "wins", "n_samples", "n_failures"]
        total = sum(int(r[1]) for r in rows[1:])
        assert total == 2


class TestSensitivitySubcommand:
    def test_writes_theta_columns(self, tmp_path):
        rc = run_cli(
            [
                "--out-dir", str(tmp_path),
                "sensitivity", "--design", "s1", "--sensor-x", "0.05",
                "--params", "d0,a", "--n-cells", "40", "--dt", "14400",
            ]
        )
        assert rc == EXIT_OK
        rows = _read_rows(tmp_path / "sensitivity_s1.csv")
        assert rows[0] == ["time_s", "theta_d0", "theta_a"]
        first = [float(v) for v in rows[1]]
        assert first[1] == 0.0 and first[2] == 0.0
