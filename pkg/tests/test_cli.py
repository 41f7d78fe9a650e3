import json
from pathlib import Path

import numpy as np
import pytest

from ddspectro import io
from ddspectro.cli import main


def write_config(path: Path, **overrides) -> Path:
    config = {
        "model": {"kind": "white", "level": 2.0},
        "sequence": {"family": "cpmg"},
        "tau_max": 1e-3,
        "m": 2,
        "engine": "analytic",
        "points": 6,
        "fit": {"tau_b_hint": 5e-5},
    }
    config.update(overrides)
    cfg = path / "config.json"
    cfg.write_text(json.dumps(config, indent=2))
    return cfg


def lorentzian_config(path: Path, **overrides) -> Path:
    base = dict(
        model={"kind": "lorentzian", "coupling_sq": 1e6, "correlation_time": 1e-4},
        tau_max=2e-3,
        m=12,
        points=12,
        fit={"tau_b_hint": 1e-4, "tail_window": [7, 12]},
    )
    base.update(overrides)
    return write_config(path, **base)


class TestSimulate:
    def test_minimal_suite(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "suite"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        files = sorted(p.name for p in out.glob("curve_*.csv"))
        assert files == ["curve_n01.csv", "curve_n02.csv"]
        manifest = io.read_manifest(out)
        assert manifest["m"] == 2
        assert manifest["command"] == "simulate"

    def test_forty_divisor_suite(self, tmp_path):
        cfg = lorentzian_config(
            tmp_path,
            m=40,
            points=4,
            model={"kind": "lorentzian", "coupling_sq": 1e7, "correlation_time": 1e-4},
        )
        out = tmp_path / "suite40"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert len(list(out.glob("curve_*.csv"))) == 40
        taus = [entry["tau_s"] for entry in io.read_manifest(out)["curves"]]
        assert max(taus) == pytest.approx(2e-3)
        assert min(taus) == pytest.approx(50e-6)

    def test_deterministic_rerun_byte_identical(self, tmp_path):
        cfg = write_config(
            tmp_path,
            model={"kind": "lorentzian", "coupling_sq": 1e7, "correlation_time": 1e-4},
            engine="monte_carlo",
            trials=120,
            seed=3,
            tau_max=4e-4,
            points=4,
        )
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out_a)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out_b)]) == 0
        files_a = sorted(p.name for p in out_a.iterdir())
        assert files_a == sorted(p.name for p in out_b.iterdir())
        for name in files_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_missing_config_is_actionable(self, tmp_path, capsys):
        rc = main(["simulate", "--config", str(tmp_path / "nope.json")])
        assert rc == 2
        assert "config" in capsys.readouterr().err

    def test_bad_engine_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, engine="magic")
        assert main(["simulate", "--config", str(cfg)]) == 2
        assert "engine" in capsys.readouterr().err

    def test_gnuplot_script(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "suite"
        main(["simulate", "--config", str(cfg), "--out", str(out), "--gnuplot"])
        assert (out / "plot_curves.gp").exists()

    def test_tabulated_model_from_csv(self, tmp_path):
        omega = np.geomspace(1e2, 3e6, 50)
        io.write_tabulated_model_csv(tmp_path / "model.csv", omega, 1e3 / (1 + (omega * 1e-4) ** 2))
        cfg = write_config(
            tmp_path,
            model={"kind": "tabulated", "csv": "model.csv", "tail_rule": "power_law"},
            fit={"tau_b_hint": 1e-4},
        )
        out = tmp_path / "suite_tab"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        # the manifest embeds the resolved grid: reproducible without model.csv
        manifest = io.read_manifest(out)
        assert manifest["config"]["model"]["kind"] == "tabulated"
        assert len(manifest["config"]["model"]["omega"]) == 50

    def test_missing_tabulated_csv_is_actionable(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path, model={"kind": "tabulated", "csv": "missing.csv"}
        )
        assert main(["simulate", "--config", str(cfg)]) == 2
        assert "missing.csv" in capsys.readouterr().err

    def test_too_few_trials_rejected_before_any_work(self, tmp_path, capsys):
        cfg = write_config(tmp_path, engine="monte_carlo", trials=10)
        out = tmp_path / "nothing"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
        assert "100 trials" in capsys.readouterr().err
        assert not out.exists()


@pytest.fixture()
def lorentzian_suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite_root")
    cfg = lorentzian_config(root)
    out = root / "suite"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    return out


class TestInvert:
    def test_corrected_pipeline(self, lorentzian_suite, tmp_path):
        out = tmp_path / "spectrum.csv"
        rc = main(["invert", "--suite", str(lorentzian_suite), "--out", str(out)])
        assert rc == 0
        est = io.read_spectrum(out)
        assert est.method == "corrected"
        manifest = json.loads(out.with_suffix(".manifest.json").read_text())
        assert manifest["tail"]["exponent"] > 1.0
        assert (tmp_path / "spectrum_rates.csv").exists()

    def test_first_harmonic_tag(self, lorentzian_suite, tmp_path):
        out = tmp_path / "fh.csv"
        rc = main(
            ["invert", "--suite", str(lorentzian_suite), "--method", "first-harmonic",
             "--out", str(out)]
        )
        assert rc == 0
        assert io.read_spectrum(out).method == "first_harmonic"

    def test_external_rates_csv(self, lorentzian_suite, tmp_path):
        spectrum = tmp_path / "s.csv"
        main(["invert", "--suite", str(lorentzian_suite), "--out", str(spectrum)])
        rates_csv = tmp_path / "s_rates.csv"
        out2 = tmp_path / "from_rates.csv"
        rc = main(
            ["invert", "--rates", str(rates_csv), "--method", "naive", "--out", str(out2)]
        )
        assert rc == 0
        assert io.read_spectrum(out2).method == "naive"

    def test_malformed_rates_row_numbered(self, tmp_path, capsys):
        bad = tmp_path / "rates.csv"
        bad.write_text(
            "# ddspectro rate-set v1\n"
            "n,tau_s,R_per_s,sigma_R,r_squared\n"
            "1,0.002,10.0,0.1,0.99\n"
            "2,0.001,oops,0.1,0.99\n"
        )
        rc = main(["invert", "--rates", str(bad), "--method", "naive", "--out",
                   str(tmp_path / "x.csv")])
        assert rc == 2
        err = capsys.readouterr().err
        assert ":4:" in err and "oops" in err

    def test_hz_flag_writes_extra_file(self, lorentzian_suite, tmp_path):
        out = tmp_path / "sp.csv"
        main(["invert", "--suite", str(lorentzian_suite), "--out", str(out), "--hz"])
        assert (tmp_path / "sp_hz.csv").exists()

    def test_requires_exactly_one_source(self, tmp_path, capsys):
        assert main(["invert", "--method", "naive"]) == 2
        assert "exactly one" in capsys.readouterr().err


class TestCompare:
    def test_reference_round_trip_is_exact(self, lorentzian_suite, tmp_path, capsys):
        out = tmp_path / "sp.csv"
        main(["invert", "--suite", str(lorentzian_suite), "--out", str(out)])
        report_path = tmp_path / "report.json"
        rc = main(
            ["compare", "--estimate", str(out), "--reference", str(out),
             "--out", str(report_path)]
        )
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["max_abs_rel_error"] < 1e-9

    def test_model_comparison_within_bounds(self, lorentzian_suite, tmp_path):
        out = tmp_path / "sp.csv"
        main(["invert", "--suite", str(lorentzian_suite), "--out", str(out)])
        model_json = tmp_path / "model.json"
        model_json.write_text(
            json.dumps({"kind": "lorentzian", "coupling_sq": 1e6, "correlation_time": 1e-4})
        )
        report_path = tmp_path / "report.json"
        rc = main(
            ["compare", "--estimate", str(out), "--model", str(model_json),
             "--out", str(report_path)]
        )
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["max_abs_rel_error"] < 0.05

    def test_grid_mismatch_is_explicit(self, lorentzian_suite, tmp_path, capsys):
        out = tmp_path / "sp.csv"
        main(["invert", "--suite", str(lorentzian_suite), "--out", str(out)])
        # build a reference on a different grid
        other = tmp_path / "other.csv"
        omega_min = np.pi / 1e-3
        other.write_text(
            "# ddspectro spectrum v1\n"
            "j,omega_rad_per_s,S,sigma_S,method\n"
            + "".join(
                f"{j},{j * omega_min},1.0,0.0,naive\n" for j in range(1, 13)
            )
        )
        rc = main(["compare", "--estimate", str(out), "--reference", str(other)])
        assert rc == 2
        assert "grid" in capsys.readouterr().err.lower()


class TestWeights:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "weights.csv"
        assert main(["weights", "--k-max", "7", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "k,A_k_sq"
        assert len(lines) == 9
        k3 = float(lines[4].split(",")[1])
        k1 = float(lines[2].split(",")[1])
        assert k3 / k1 == pytest.approx(1.0 / 9.0, rel=1e-12)

    def test_stdout_output(self, capsys):
        assert main(["weights", "--k-max", "3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "k,A_k_sq"
        for line in lines[1:]:
            k, val = line.split(",")
            float(val)  # plain numbers, parseable by any CSV consumer
        assert float(lines[1].split(",")[1]) == pytest.approx(1.0158981749478553)
