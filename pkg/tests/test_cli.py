import json
import subprocess
import sys

import numpy as np
import pytest

from nafe import cli
from nafe.errors import SingularDesignError

UNBALANCED = "unit,time,y,x1\nA,1,1,1\nA,2,2,2\nB,1,3,3\n"


def run_cli(*argv):
    return cli.main(list(argv))


class TestEstimate:
    def test_demo_smoke_one_row_per_coefficient(self, tmp_path, capsys):
        out = tmp_path / "est.csv"
        code = run_cli("estimate", "--data", "demo", "--tau", "0.5",
                       "--x-star", "mean", "--method", "nafe", "--out", str(out))
        assert code == 0
        assert "seed: 0" in capsys.readouterr().out
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "method,tau,coefficient,estimate,se"
        assert len(lines) == 3  # const + x1
        assert (tmp_path / "est.csv.meta.json").exists()

    def test_fe_on_noiseless_demo_recovers_slope(self, tmp_path):
        out = tmp_path / "fe.csv"
        assert run_cli("estimate", "--data", "demo", "--method", "fe",
                       "--out", str(out)) == 0
        row = [r for r in out.read_text().strip().split("\n")[1:] if r.startswith("fe")][0]
        slope = float(row.split(",")[3])
        assert slope == pytest.approx(2.0, abs=1e-10)

    def test_tau_outside_open_interval_exits_1(self, tmp_path, capsys):
        code = run_cli("estimate", "--data", "demo", "--tau", "1.5",
                       "--out", str(tmp_path / "x.csv"))
        assert code == 1
        assert "(0, 1)" in capsys.readouterr().err

    def test_unknown_method_exits_1(self, tmp_path):
        assert run_cli("estimate", "--data", "demo", "--method", "ols",
                       "--out", str(tmp_path / "x.csv")) == 1

    def test_unbalanced_data_exits_2(self, tmp_path, tmp_csv):
        path = tmp_csv(UNBALANCED)
        assert run_cli("estimate", "--data", str(path), "--out", str(tmp_path / "x.csv")) == 2

    def test_invalid_panel_exits_2(self, tmp_path, tmp_csv):
        # x1 constant within each unit: per-unit collinearity with the intercept
        text = "unit,time,y,x1\nA,1,1,5\nA,2,2,5\nB,1,3,7\nB,2,4,7\n"
        code = run_cli("estimate", "--data", str(tmp_csv(text)), "--out", str(tmp_path / "x.csv"))
        assert code == 2

    def test_numerical_failure_exits_3(self, tmp_path, monkeypatch):
        def boom(d):
            raise SingularDesignError("rank-deficient design for unit(s) ['C01']")

        monkeypatch.setattr(cli, "within_fe", boom)
        code = run_cli("estimate", "--data", "demo", "--method", "fe",
                       "--out", str(tmp_path / "x.csv"))
        assert code == 3

    def test_x_star_wrong_length_exits_1(self, tmp_path):
        assert run_cli("estimate", "--data", "demo", "--x-star", "1,2,3",
                       "--out", str(tmp_path / "x.csv")) == 1

    def test_bootstrap_se_columns_filled(self, tmp_path):
        out = tmp_path / "se.csv"
        assert run_cli("estimate", "--data", "demo", "--tau", "0.5",
                       "--method", "nafe,fe", "--se", "bootstrap", "--B", "20",
                       "--seed", "5", "--out", str(out)) == 0
        body = out.read_text().strip().split("\n")[1:]
        assert all(row.split(",")[4] != "" for row in body)

    def test_writes_only_out_and_manifest(self, tmp_path):
        out = tmp_path / "only.csv"
        assert run_cli("estimate", "--data", "demo", "--out", str(out)) == 0
        created = sorted(p.name for p in tmp_path.iterdir())
        assert created == ["only.csv", "only.csv.meta.json"]


class TestSimulate:
    def test_custom_grid_and_manifest(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = run_cli("simulate", "--table", "custom", "--family", "baseline",
                       "--n", "20", "--T", "6", "--rho", "1", "--sigma-v", "1",
                       "--x-star", "1,4.5", "--tau", "0.5", "--estimators", "nafe",
                       "--reps", "5", "--seed", "3", "--out", str(out))
        assert code == 0
        manifest = json.loads((tmp_path / "sim.csv.meta.json").read_text())
        assert manifest["seed"] == 3 and manifest["command"] == "simulate"
        assert manifest["resolved"]["reps"] == 5
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3  # header + const + x1

    def test_reps_zero_exits_1(self, tmp_path):
        assert run_cli("simulate", "--table", "t1", "--reps", "0",
                       "--out", str(tmp_path / "x.csv")) == 1

    def test_custom_without_grid_exits_1(self, tmp_path):
        assert run_cli("simulate", "--table", "custom", "--reps", "3",
                       "--out", str(tmp_path / "x.csv")) == 1

    def test_t1_budget_skips_cells(self, tmp_path):
        out = tmp_path / "t1.csv"
        code = run_cli("simulate", "--table", "t1", "--reps", "1", "--budget", "3000",
                       "--seed", "1", "--out", str(out))
        assert code == 0
        manifest = json.loads((tmp_path / "t1.csv.meta.json").read_text())
        assert manifest["resolved"]["skipped_cells"]
        assert len(out.read_text().strip().split("\n")) > 1

    def test_t8_preset_includes_fe_rows(self, tmp_path):
        out = tmp_path / "t8.csv"
        assert run_cli("simulate", "--table", "t8", "--reps", "1", "--seed", "2",
                       "--out", str(out)) == 0
        rows = out.read_text().strip().split("\n")[1:]
        fe_rows = [r for r in rows if ",fe,," in r]
        assert fe_rows and all(r.startswith("multiplicative,") for r in fe_rows)

    def test_threads_do_not_change_bytes(self, tmp_path):
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"sim{threads}.csv"
            assert run_cli("simulate", "--table", "custom", "--family", "baseline",
                           "--n", "15", "--T", "5", "--rho", "1", "--sigma-v", "1",
                           "--x-star", "1,4.5", "--tau", "0.25,0.75",
                           "--estimators", "nafe,fe", "--reps", "12", "--seed", "8",
                           "--threads", threads, "--out", str(out)) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestBootstrapCmd:
    def test_demo_bootstrap(self, tmp_path, capsys):
        out = tmp_path / "bse.csv"
        code = run_cli("bootstrap", "--data", "demo", "--tau", "0.5", "--B", "20",
                       "--seed", "4", "--out", str(out))
        assert code == 0
        assert "seed: 4" in capsys.readouterr().out
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "tau,coefficient,se,B,seed,failed_replicates"
        assert len(lines) == 3

    def test_B_below_two_exits_1(self, tmp_path):
        assert run_cli("bootstrap", "--data", "demo", "--B", "1",
                       "--out", str(tmp_path / "x.csv")) == 1


class TestProbe:
    def test_identification_summary(self, tmp_path, capsys):
        out = tmp_path / "id.csv"
        code = run_cli("probe", "--which", "identification", "--n", "2000",
                       "--tau", "0.5", "--seed", "2", "--out", str(out))
        assert code == 0
        assert "|p_hat - tau|" in capsys.readouterr().out
        assert out.read_text().startswith("tau,p_hat,abs_err,n,seed")

    def test_spacing_columns_and_flag(self, tmp_path):
        out = tmp_path / "sp.csv"
        code = run_cli("probe", "--which", "spacing", "--n", "10", "--reps", "500",
                       "--points", "5", "--seed", "2", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "n,x,empirical,bound,within_bound,reps,seed"
        assert all(line.split(",")[4] in ("true", "false") for line in lines[1:])

    def test_permutation_probe(self, tmp_path):
        out = tmp_path / "perm.csv"
        code = run_cli("probe", "--which", "permutation", "--n", "30", "--rate", "0.5",
                       "--sigma-v", "0", "--reps", "5", "--seed", "2", "--out", str(out))
        assert code == 0
        rows = out.read_text().strip().split("\n")[1:]
        assert rows[0].split(",")[5] == "1.0"

    def test_unknown_probe_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("probe", "--which", "mystery", "--out", str(tmp_path / "x.csv"))
        assert exc_info.value.code == 1

    def test_unknown_flag_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc_info:
            run_cli("estimate", "--data", "demo", "--frobnicate", "--out",
                    str(tmp_path / "x.csv"))
        assert exc_info.value.code == 1


class TestHelp:
    @pytest.mark.parametrize(
        "argv",
        [["--help"], ["estimate", "--help"], ["simulate", "--help"],
         ["bootstrap", "--help"], ["probe", "--help"]],
    )
    def test_help_exits_zero(self, argv, capsys):
        with pytest.raises(SystemExit) as exc_info:
            run_cli(*argv)
        assert exc_info.value.code == 0
        assert "--out" in capsys.readouterr().out or argv == ["--help"]

    def test_console_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "nafe.cli", "estimate", "--data", "demo",
             "--tau", "0.5", "--out", str(tmp_path / "e.csv")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "seed: 0" in proc.stdout


class TestSeedReproducibility:
    def test_same_seed_same_bytes(self, tmp_path):
        blobs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert run_cli("bootstrap", "--data", "demo", "--tau", "0.5", "--B", "15",
                           "--seed", "99", "--out", str(out)) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
