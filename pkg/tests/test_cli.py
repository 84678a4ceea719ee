"""Run configuration parsing and the command-line driver."""

import csv
import io
import json
import math

import numpy as np
import pytest

from cavity_teleport import cli
from cavity_teleport.config import ConfigError, RunConfig


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestRunConfig:
    def test_defaults_stable(self):
        c = RunConfig()
        assert (c.g_mhz, c.kappa_mhz, c.gamma_mhz, c.eta) == (34.0, 4.1, 2.6, 0.6)
        assert c.t1_us is None and c.dt1_frac == 0.0 and c.n_traj == 1000

    def test_bundled(self):
        c = RunConfig.bundled()
        assert (c.g_mhz, c.kappa_mhz, c.gamma_mhz, c.eta) == (34.0, 4.1, 2.6, 0.6)
        assert (c.omega_over_g, c.delta_over_omega, c.dt1_frac) == (300.0, 10.0, 0.05)
        assert c.cf_re == pytest.approx(math.sqrt(0.5)) and c.cg_re == pytest.approx(math.sqrt(0.5))

    def test_round_trip(self):
        c = RunConfig.bundled().with_values(tau1_us=0.4, cg_im=0.0, seed=2 ** 63 + 5)
        again = RunConfig.from_json(c.to_json())
        assert again == c
        assert again.effective() == c.effective()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="kapa_mhz"):
            RunConfig.from_json('{"kapa_mhz": 4.1}')

    def test_syntax_error_location(self):
        with pytest.raises(ConfigError, match="line 2"):
            RunConfig.from_json('{\n  "eta": ,\n}')

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            RunConfig.from_json("[1, 2]")

    @pytest.mark.parametrize("kw", [dict(eta=1.2), dict(n_traj=0), dict(seed=-1), dict(seed=1.5),
                                    dict(cf_re=1.0), dict(g_mhz="34"), dict(g_mhz=math.nan),
                                    dict(n_traj=True)])
    def test_invalid_values(self, kw):
        with pytest.raises(ConfigError):
            RunConfig().with_values(**kw)

    def test_mhz_conversion(self):
        p = RunConfig().params()
        assert p.g == pytest.approx(2 * math.pi * 34) and p.kappa == pytest.approx(2 * math.pi * 4.1)

    def test_effective_fills_schedule(self):
        eff = RunConfig().effective()
        assert eff["t1_us"] == pytest.approx(7.405e-3, rel=1e-3)
        assert eff["t2_us"] == eff["t1_us"]
        assert all(eff[k] is not None for k in ("tau1_us", "tau2_us", "td_us"))


class TestAnalytic:
    def test_bundled_headline_numbers(self, capsys):
        rep = run_json(capsys, "analytic")
        r = rep["results"]
        assert r["t1"] == pytest.approx(7.4e-3, rel=0.015)
        assert r["P_prime"] == pytest.approx(0.15, abs=0.01)
        assert r["raman_leakage"] == pytest.approx(2.74e-3, abs=1e-5)
        assert r["timing_budget"]["total_us"] == pytest.approx(1.35, rel=0.05)
        assert 0.99 < r["F_plus"] < 1.0 and r["F_minus"] == pytest.approx(1.0, abs=1e-12)

    def test_report_header(self, capsys):
        rep = run_json(capsys, "analytic")
        assert rep["command"] == "analytic"
        assert "MHz" in rep["units"]["rates"] and rep["units"]["times"] == "us"
        assert set(RunConfig.keys()) <= set(rep["config"])

    def test_exact_timing(self, capsys):
        r = run_json(capsys, "analytic", "--set", "dt1_frac=0")["results"]
        assert r["F_plus"] == pytest.approx(1.0, abs=1e-12)
        assert r["F_minus"] == pytest.approx(1.0, abs=1e-12)

    def test_lossless(self, capsys):
        # without loss the default first wait is unbounded, so a finite one is supplied;
        # the detection window stays infinite, where the success probability is 1/2
        r = run_json(capsys, "analytic", "--set", "kappa_mhz=0", "--set", "gamma_mhz=0",
                     "--set", "dt1_frac=0", "--set", "tau1_us=0.1")["results"]
        assert r["P"] == pytest.approx(0.5, abs=1e-12)
        assert r["F_plus"] == pytest.approx(1.0, abs=1e-12)
        assert r["F_minus"] == pytest.approx(1.0, abs=1e-12)

    def test_csv_report(self, capsys):
        code, out, _ = run_cli(capsys, "analytic", "--format", "csv")
        assert code == 0
        rows = {r["key"]: r["value"] for r in read_csv(out)}
        assert rows["command"] == "analytic"
        assert rows["config.g_mhz"] == "34"
        assert float(rows["P_prime"]) == pytest.approx(0.154, abs=1e-3)

    def test_params(self, capsys):
        r = run_json(capsys, "params")["results"]
        assert r["beta"] == pytest.approx(213.6153, rel=1e-6)
        assert r["purge_residual"] == pytest.approx(math.exp(-10), rel=1e-9)


class TestSweep:
    def test_header_and_format(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--key", "dt1_frac", "--values", "0,0.05")
        assert code == 0
        assert out.splitlines()[0] == ",".join(cli.SWEEP_COLUMNS)
        rows = read_csv(out)
        assert [r["value"] for r in rows] == ["0", "0.05"]
        assert rows[0]["F_plus"] == "1"
        assert len(rows[1]["F_plus"].replace("0.", "", 1)) <= 12

    def test_dt1_rows(self, capsys):
        values = ",".join(f"{x:.2f}" for x in np.arange(0, 0.11, 0.01))
        _, out, _ = run_cli(capsys, "sweep", "--key", "dt1_frac", "--values", values)
        rows = read_csv(out)
        assert len(rows) == 11
        assert float(rows[0]["F_plus"]) == pytest.approx(1.0, abs=1e-12)
        assert all(float(r["F_plus"]) < 1 for r in rows[1:])

    def test_input_dependence(self):
        rows = cli.cmd_sweep(RunConfig.bundled(), "cg_re", [0.2, 0.5, 0.8])
        assert len({round(r["F_plus"], 9) for r in rows}) == 3

    def test_amplitude_renormalized(self):
        cfg = cli._renormalized(RunConfig.bundled(), "cg_re", 0.6)
        assert cfg.cg_re == 0.6 and cfg.cf_re == pytest.approx(0.8)

    def test_amplitude_too_large(self):
        with pytest.raises(ConfigError):
            cli._renormalized(RunConfig.bundled(), "cf_re", 1.5)

    def test_tau1_period(self, cs):
        period = math.pi / cs.beta
        taus = 2 / cs.kappa + np.linspace(-period, 2 * period, 121)
        f = np.array([r["F_plus"] for r in cli.cmd_sweep(RunConfig.bundled(), "tau1_us", list(taus))])
        minima = [taus[i] for i in range(1, len(f) - 1) if f[i] < f[i - 1] and f[i] < f[i + 1]]
        assert len(minima) >= 2
        np.testing.assert_allclose(np.diff(minima), period, rtol=0.05)

    def test_unknown_key(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--key", "nope", "--values", "1")
        assert code == cli.EXIT_CONFIG and "nope" in err


class TestTrajectories:
    def test_report_fields(self, capsys):
        r = run_json(capsys, "trajectories", "--n-traj", "40", "--seed", "3")["results"]
        ens = r["ensemble"]
        assert ens["n_traj"] == 40 and ens["n_success"] + ens["n_discarded"] == 40
        assert {"P", "P_prime", "integrated_success_probability", "cavity_branching_fraction"} <= set(r["analytic"])

    def test_byte_identical_files(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            code, _, _ = run_cli(capsys, "trajectories", "--seed", "1", "--n-traj", "1000", "--out", str(path))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_workers_do_not_change_output(self, capsys):
        _, one, _ = run_cli(capsys, "trajectories", "--n-traj", "60", "--workers", "1")
        _, two, _ = run_cli(capsys, "trajectories", "--n-traj", "60", "--workers", "2")
        assert one == two


class TestCheckpoints:
    def test_exact_timing(self, capsys):
        r = run_json(capsys, "checkpoints", "--set", "dt1_frac=0")["results"]
        assert len(r["checkpoints"]) == 5
        assert r["min_fidelity"] >= 1 - 1e-8


class TestExitCodes:
    def test_config_file(self, capsys, tmp_path):
        path = tmp_path / "run.config"
        path.write_text(RunConfig().with_values(eta=1.0).to_json(), encoding="utf-8")
        rep = run_json(capsys, "params", "--config", str(path))
        assert rep["config"]["eta"] == 1.0

    def test_flag_overrides_file(self, capsys, tmp_path):
        path = tmp_path / "run.config"
        path.write_text('{"seed": 5}', encoding="utf-8")
        rep = run_json(capsys, "params", "--config", str(path), "--seed", "9")
        assert rep["config"]["seed"] == 9

    def test_bad_json(self, capsys, tmp_path):
        path = tmp_path / "bad.config"
        path.write_text('{"eta": 0.5,,}', encoding="utf-8")
        code, _, err = run_cli(capsys, "analytic", "--config", str(path))
        assert code == cli.EXIT_CONFIG and "line 1" in err

    def test_unknown_set_key(self, capsys):
        code, _, err = run_cli(capsys, "analytic", "--set", "foo=1")
        assert code == cli.EXIT_CONFIG and "foo" in err

    def test_malformed_set(self, capsys):
        assert run_cli(capsys, "analytic", "--set", "eta")[0] == cli.EXIT_CONFIG

    def test_overdamped(self, capsys):
        code, _, err = run_cli(capsys, "analytic", "--set", "kappa_mhz=200")
        assert code == cli.EXIT_REGIME and "overdamped" in err

    def test_insufficient_purge(self, capsys):
        assert run_cli(capsys, "checkpoints", "--set", "tau2_us=0.01")[0] == cli.EXIT_CONFIG

    def test_missing_config(self, capsys, tmp_path):
        assert run_cli(capsys, "analytic", "--config", str(tmp_path / "none"))[0] == cli.EXIT_IO

    def test_unwritable_out(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "params", "--out", str(tmp_path / "no" / "such" / "dir.json"))
        assert code == cli.EXIT_IO

    def test_non_finite_values_serialized(self, capsys):
        rep = run_json(capsys, "params", "--set", "kappa_mhz=0", "--set", "gamma_mhz=0")
        assert rep["config"]["tau1_us"] == "inf"
