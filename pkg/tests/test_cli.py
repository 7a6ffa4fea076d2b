import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from fblqos.channel import ChannelParams, QosSpec
from fblqos.cli import main
from fblqos.effective import VariableRate, effective_rate
from fblqos.optimize import optimal_eps

from test_optimize import RF_GRID_STEP, RF_STAR_GRID


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestRate:
    def test_operating_point(self, capsys):
        code, out, _ = run(capsys, "rate", "--snr-db", "0", "--m", "1000", "--theta", "0.01", "--eps", "0.0061")
        assert code == 0
        row = rows(out)[0]
        assert float(row["R_E_bits_per_cu"]) == pytest.approx(0.2246, abs=2e-4)
        assert int(row["quadrature_nodes"]) > 0

    def test_zero_theta(self, capsys):
        code, out, _ = run(capsys, "rate", "--theta", "0", "--eps", "0.0171")
        assert code == 0 and float(rows(out)[0]["R_E_bits_per_cu"]) == pytest.approx(0.7750, abs=1e-4)

    def test_block_rate_at_given_gain(self, capsys):
        _, out, _ = run(capsys, "rate", "--eps", "0.01", "--z", "1.0", "--theta", "0.01")
        assert float(rows(out)[0]["rbar_bits_per_cu"]) == pytest.approx(0.908086388940728, abs=1e-12)

    @pytest.mark.parametrize("eps", ["1.0", "0", "-0.5"])
    def test_eps_outside_open_interval(self, capsys, eps):
        code, out, err = run(capsys, "rate", "--eps", eps)
        assert code == 2 and out == ""
        assert "--eps" in err and "(0, 1)" in err

    @pytest.mark.parametrize("argv,field", [
        (["--eps", "0.1", "--theta", "-1"], "--theta"),
        (["--eps", "0.1", "--snr", "-2"], "--snr"),
        (["--eps", "0.1", "--m", "0"], "--m"),
        (["--strategy", "fixed"], "--rate-fixed"),
        (["--eps", "0.1", "--nodes", "4"], "--nodes"),
        (["--eps", "0.1", "--fading", "nakagami"], "--fading"),
    ])
    def test_domain_errors_name_the_field(self, capsys, argv, field):
        code, _, err = run(capsys, "rate", *argv)
        assert code == 2 and field in err

    def test_linear_snr_overrides_db(self, capsys):
        _, a, _ = run(capsys, "rate", "--eps", "0.01", "--snr", "10", "--snr-db", "0")
        _, b, _ = run(capsys, "rate", "--eps", "0.01", "--snr-db", "10")
        assert float(rows(a)[0]["R_E_bits_per_cu"]) == pytest.approx(float(rows(b)[0]["R_E_bits_per_cu"]), rel=1e-14)

    def test_clamp_flag(self, capsys):
        _, a, _ = run(capsys, "rate", "--eps", "1e-5", "--theta", "0.01")
        _, b, _ = run(capsys, "rate", "--eps", "1e-5", "--theta", "0.01", "--clamp-nonnegative")
        assert float(rows(b)[0]["R_E_bits_per_cu"]) > float(rows(a)[0]["R_E_bits_per_cu"])

    def test_json_output(self, capsys):
        _, out, _ = run(capsys, "rate", "--eps", "0.0061", "--theta", "0.01", "--format", "json")
        doc = json.loads(out)
        assert doc["rows"][0]["R_E_bits_per_cu"] == pytest.approx(0.2246, abs=2e-4)

    def test_solver_failure_exit_code(self, capsys):
        code, _, err = run(capsys, "rate", "--strategy", "power", "--snr", "1e6", "--theta", "1", "--eps", "0.1")
        assert code == 3 and "cutoff" in err

    def test_byte_identical_reruns(self, tmp_path, capsys):
        args = ["rate", "--eps", "0.02", "--theta", "0.05", "--strategy", "parallel"]
        run(capsys, *args, "--out", str(tmp_path / "a.csv"))
        run(capsys, *args, "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestOptimize:
    def test_low_theta(self, capsys):
        code, out, _ = run(capsys, "optimize", "--theta", "0.001")
        row = rows(out)[0]
        assert code == 0
        assert float(row["eps_star"]) == pytest.approx(0.0127, abs=5e-5)
        assert float(row["R_E_star_bits_per_cu"]) == pytest.approx(0.6256, abs=1e-4)
        assert int(row["iterations"]) > 0

    def test_matches_library_at_high_theta(self, capsys):
        _, out, _ = run(capsys, "optimize", "--theta", "0.1")
        lib = optimal_eps(VariableRate, ChannelParams(1.0, 1000), QosSpec(0.1))
        assert float(rows(out)[0]["eps_star"]) == lib.arg

    def test_fixed_rate_matches_grid_scan(self, capsys):
        _, out, _ = run(capsys, "optimize", "--theta", "0", "--strategy", "fixed")
        assert abs(float(rows(out)[0]["r_f_star_bits_per_cu"]) - RF_STAR_GRID) <= RF_GRID_STEP


class TestSweep:
    def test_log_grid(self, capsys):
        code, out, _ = run(capsys, "sweep", "--axis", "theta", "--grid", "log:0.001:0.1:5")
        r = rows(out)
        assert code == 0 and len(r) == 5
        assert float(r[0]["theta"]) == pytest.approx(0.001) and float(r[-1]["theta"]) == pytest.approx(0.1)
        vals = [float(x["R_E_star_bits_per_cu"]) for x in r]
        assert vals == sorted(vals, reverse=True)

    def test_evaluates_given_strategy(self, capsys):
        _, out, _ = run(capsys, "sweep", "--axis", "m", "--grid", "500,1000", "--eps", "0.0061", "--theta", "0.01")
        r = rows(out)
        assert "R_E_bits_per_cu" in r[0]
        assert float(r[1]["R_E_bits_per_cu"]) == pytest.approx(0.2246, abs=2e-4)

    def test_row_errors_kept(self, capsys):
        code, out, _ = run(capsys, "sweep", "--axis", "eps", "--grid", "0.1,0.5,2", "--theta", "0.01")
        r = rows(out)
        assert code == 0 and r[2]["error"].startswith("DomainError")

    def test_workers_keep_grid_order(self, capsys):
        _, a, _ = run(capsys, "sweep", "--axis", "snr_db", "--grid", "lin:-5:10:4", "--theta", "0.01")
        _, b, _ = run(capsys, "sweep", "--axis", "snr_db", "--grid", "lin:-5:10:4", "--theta", "0.01", "--workers", "2")
        assert a == b

    @pytest.mark.parametrize("grid", ["0.2,0.1", "log:1:2", "a,b"])
    def test_bad_grid(self, capsys, grid):
        code, _, err = run(capsys, "sweep", "--axis", "theta", "--grid", grid)
        assert code == 2 and "--grid" in err


class TestFigure:
    def test_optimum_non_increasing_in_theta(self, capsys):
        _, out, _ = run(capsys, "figure", "3")
        vals = [float(r["R_E_star_bits_per_cu"]) for r in rows(out)]
        assert len(vals) > 10 and np.all(np.diff(vals) <= 0)

    def test_blocklength_figure_has_both_series(self, capsys):
        _, out, _ = run(capsys, "figure", "5")
        r = [x for x in rows(out) if float(x["theta_per_bit"]) == 0.001]
        gap = [float(x["R_E_ideal_bits_per_cu"]) - float(x["R_E_star_bits_per_cu"]) for x in r]
        assert all(g > 0 for g in gap)
        assert np.all(np.diff(gap) < 0)

    def test_psi_argmin_column(self, capsys):
        _, out, _ = run(capsys, "figure", "1")
        stars = {float(x["eps_star"]) for x in rows(out) if float(x["theta_per_bit"]) == 0.01}
        assert len(stars) == 1 and stars.pop() == pytest.approx(0.0061, abs=5e-5)

    def test_unknown_id(self, capsys):
        code, _, err = run(capsys, "figure", "14")
        assert code == 2 and "figure_id" in err

    def test_json_carries_title(self, capsys):
        _, out, _ = run(capsys, "figure", "4", "--format", "json")
        doc = json.loads(out)
        assert doc["figure"] == 4 and "theta" in doc["title"] and len(doc["rows"]) > 0


class TestSimulate:
    def test_seed_repeat_is_byte_identical(self, tmp_path, capsys):
        args = ["simulate", "--eps", "0.0061", "--arrival", "220", "--blocks", "200000", "--seed", "5"]
        _, s1, _ = run(capsys, *args, "--out", str(tmp_path / "a.csv"))
        _, s2, _ = run(capsys, *args, "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert s1 == s2

    def test_zero_arrival(self, capsys):
        code, out, _ = run(capsys, "simulate", "--eps", "0.0061", "--arrival", "0", "--blocks", "100000")
        row = rows(out)[0]
        assert code == 0 and row["note"] == "empty tail" and row["theta_hat_per_bit"] == ""

    def test_arrival_from_theta(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate", "--eps", "0.0061", "--arrival-theta", "0.01",
                           "--blocks", "2000000", "--out", str(tmp_path / "t.csv"))
        row = rows(out)[0]
        a = 1000 * effective_rate(VariableRate(0.0061), ChannelParams(1.0, 1000), QosSpec(0.01)).rate
        assert code == 0 and float(row["arrival_bits_per_block"]) == pytest.approx(a, rel=1e-14)
        assert float(row["theta_hat_per_bit"]) == pytest.approx(0.01, rel=0.15)

    def test_instability_still_writes_trace(self, tmp_path, capsys):
        path = tmp_path / "t.csv"
        code, _, err = run(capsys, "simulate", "--eps", "0.0061", "--arrival", "900", "--blocks", "100000",
                           "--out", str(path))
        assert code == 4 and "does not drain" in err
        assert path.read_text().startswith("q_bits,count_Q_ge_q,P_Q_ge_q")

    def test_needs_exactly_one_arrival(self, capsys):
        code, _, err = run(capsys, "simulate", "--eps", "0.01", "--blocks", "100000")
        assert code == 2 and "--arrival" in err

    def test_blocks_lower_bound(self, capsys):
        code, _, err = run(capsys, "simulate", "--eps", "0.01", "--arrival", "10", "--blocks", "10")
        assert code == 2 and "num_blocks" in err


class TestConfigFile:
    def test_sections_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[DEFAULT]\nm = 1000\nsnr_db = 0\n\n[rate]\ntheta = 0.01\neps = 0.0061\n")
        _, a, _ = run(capsys, "rate", "--config", str(cfg))
        assert float(rows(a)[0]["R_E_bits_per_cu"]) == pytest.approx(0.2246, abs=2e-4)
        _, b, _ = run(capsys, "rate", "--config", str(cfg), "--theta", "0")
        assert float(rows(b)[0]["R_E_bits_per_cu"]) == pytest.approx(
            effective_rate(VariableRate(0.0061), ChannelParams(1.0, 1000), QosSpec(0.0)).rate, rel=1e-14)

    def test_default_section_for_other_commands(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[DEFAULT]\ntheta = 0.001\n\n[rate]\neps = 0.5\n")
        _, out, _ = run(capsys, "optimize", "--config", str(cfg))
        assert float(rows(out)[0]["eps_star"]) == pytest.approx(0.0127, abs=5e-5)

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "rate", "--config", "/nonexistent.ini", "--eps", "0.1")
        assert code == 2 and "--config" in err

    def test_bad_value(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[rate]\nm = lots\n")
        code, _, err = run(capsys, "rate", "--config", str(cfg), "--eps", "0.1")
        assert code == 2 and "m" in err


def test_console_entry_point_and_usage_error():
    proc = subprocess.run([sys.executable, "-m", "fblqos", "rate", "--eps", "0.0061", "--theta", "0.01"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "R_E_bits_per_cu" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "fblqos", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 2
