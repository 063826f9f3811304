"""Command-line workflows: file formats, exit codes, reproducibility."""

import hashlib
import json

import numpy as np
import pytest

from levelstats import (LevelSequence, LevelUnit, SParameterTrace, read_level_file,
                        read_statcurve_csv, sigma2_theory, write_level_file,
                        write_sparameter_csv)
from levelstats.cli import main
from conftest import poisson_spectra


def _hash_dir(path, suffix=".lvl"):
    digests = {}
    for f in sorted(path.glob(f"*{suffix}")):
        digests[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    return digests


class TestSimulate:
    def test_writes_files_and_manifest(self, tmp_path):
        out = tmp_path / "ens"
        code = main(["simulate", "--n", "80", "--count", "3", "--xi", "0.3",
                     "--phi", "1.0", "--seed", "7", "--out", str(out)])
        assert code == 0
        files = sorted(out.glob("*.lvl"))
        assert len(files) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["seed"] == 7
        assert len([p for p in manifest["outputs"] if p.endswith(".lvl")]) == 3
        # phi=1: bulk of 80 at 0.6 keeps ceil(48) levels, none decimated
        spec = read_level_file(files[0], LevelUnit.UNFOLDED)
        assert len(spec) == 48

    def test_identical_hashes_on_rerun(self, tmp_path):
        args = ["simulate", "--n", "80", "--count", "3", "--xi", "0.35",
                "--phi", "0.8", "--seed", "11"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert _hash_dir(a) == _hash_dir(b)

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--n", "80"])  # missing required flags
        assert err.value.code == 2

    def test_invalid_phi_is_data_error(self, tmp_path):
        code = main(["simulate", "--n", "80", "--count", "1", "--xi", "0.3",
                     "--phi", "1.5", "--seed", "3", "--out", str(tmp_path / "x")])
        assert code == 1


class TestAnalyze:
    @pytest.fixture()
    def level_dir(self, tmp_path):
        d = tmp_path / "levels"
        d.mkdir()
        for i, spec in enumerate(poisson_spectra(20, 400, seed=50)):
            write_level_file(d / f"p_{i:03d}.lvl", spec.values)
        return d

    def test_poisson_sigma2_close_to_length(self, level_dir, tmp_path):
        out = tmp_path / "stats"
        code = main(["analyze", "--in", str(level_dir / "*.lvl"),
                     "--stats", "sigma2", "--lgrid", "1:5:1", "--out", str(out)])
        assert code == 0
        curve = read_statcurve_csv(out / "sigma2.csv")
        assert np.all(np.abs(curve.y - curve.x) < 4 * curve.yerr)

    def test_all_statistics_written(self, level_dir, tmp_path):
        out = tmp_path / "stats"
        code = main(["analyze", "--in", str(level_dir / "*.lvl"),
                     "--stats", "nn,sigma2,delta3,power", "--lgrid", "1:5:1",
                     "--out", str(out)])
        assert code == 0
        for name in ("nn", "sigma2", "delta3", "power"):
            assert (out / f"{name}.csv").exists()
        power = read_statcurve_csv(out / "power.csv")
        assert power.meta["n_common"] == 400

    def test_unknown_statistic_usage_error(self, level_dir, tmp_path):
        code = main(["analyze", "--in", str(level_dir / "*.lvl"),
                     "--stats", "nn,bogus", "--out", str(tmp_path / "s")])
        assert code == 2

    def test_empty_glob_data_error(self, tmp_path, capsys):
        code = main(["analyze", "--in", str(tmp_path / "nothing*.lvl"),
                     "--out", str(tmp_path / "s")])
        assert code == 1
        assert "no files match" in capsys.readouterr().err


class TestTheoryCommand:
    def test_unitary_form_factor_is_identity(self, tmp_path):
        out = tmp_path / "K.csv"
        code = main(["theory", "--xi", "1.0", "--curve", "K",
                     "--grid", "0.1:0.9:0.1", "--out", str(out)])
        assert code == 0
        curve = read_statcurve_csv(out)
        assert np.allclose(curve.y, curve.x)

    def test_orthogonal_number_variance(self, tmp_path):
        out = tmp_path / "s2.csv"
        code = main(["theory", "--xi", "0", "--phi", "1", "--curve", "sigma2",
                     "--grid", "0.5:5:0.5", "--out", str(out)])
        assert code == 0
        curve = read_statcurve_csv(out)
        assert np.allclose(curve.y, sigma2_theory(curve.x, 0.0), rtol=1e-12)

    def test_missing_level_spacing_curve(self, tmp_path):
        out = tmp_path / "ps.csv"
        code = main(["theory", "--xi", "0.49", "--phi", "0.85", "--curve", "ps",
                     "--grid", "0:4:0.1", "--model-dim", "120",
                     "--model-count", "60", "--workers", "4", "--out", str(out)])
        assert code == 0
        curve = read_statcurve_csv(out)
        assert curve.meta["phi"] == 0.85
        assert np.all(curve.y >= 0)
        mass = np.trapezoid(curve.y, curve.x)
        assert mass == pytest.approx(1.0, abs=0.05)  # grid only reaches s=4

    def test_power_grid_endpoints_skipped(self, tmp_path, capsys):
        out = tmp_path / "pw.csv"
        code = main(["theory", "--xi", "0", "--curve", "power",
                     "--grid", "0:1:0.125", "--out", str(out)])
        assert code == 0
        assert "singular" in capsys.readouterr().err
        curve = read_statcurve_csv(out)
        assert curve.x[0] > 0 and curve.x[-1] < 1


class TestFitCommands:
    def test_fit_phi_json(self, tmp_path, capsys):
        from levelstats import missing_power_spectrum
        t = np.arange(1, 61) / 160.0
        y = missing_power_spectrum(t, 0.49, 0.85)
        from levelstats import StatCurve, write_statcurve_csv
        path = tmp_path / "power.csv"
        write_statcurve_csv(path, StatCurve(kind="power_spectrum", x=t, y=y,
                                            meta={"n_common": 160}))
        code = main(["fit", "phi", "--power", str(path), "--xi", "0.49"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) >= {"estimate", "stderr", "objective", "range"}
        assert payload["estimate"] == pytest.approx(0.85, abs=0.01)

    def test_fit_xi_json(self, tmp_path, capsys):
        from levelstats import StatCurve, write_statcurve_csv
        L = np.arange(0.5, 5.01, 0.25)
        y = sigma2_theory(L, 0.3)
        path = tmp_path / "s2.csv"
        write_statcurve_csv(path, StatCurve(kind="sigma2", x=L, y=y, meta={}))
        code = main(["fit", "xi", "--sigma2", str(path), "--phi", "1.0"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["estimate"] == pytest.approx(0.3, abs=0.02)


class TestUnfoldCommand:
    def test_round_trip_against_library(self, tmp_path):
        nu = np.linspace(6.5, 8.0, 110)
        src = tmp_path / "exp.lvl"
        write_level_file(src, nu)
        out = tmp_path / "unfolded.lvl"
        code = main(["unfold", "--in", str(src), "--area", "0.18285",
                     "--perimeter", "2.023", "--sign", "minus",
                     "--out", str(out)])
        assert code == 0
        from levelstats import BilliardGeometry, unfold_weyl
        expected = unfold_weyl(
            LevelSequence(values=nu, unit=LevelUnit.FREQUENCY_GHZ),
            BilliardGeometry(area=0.18285, perimeter=2.023))
        back = read_level_file(out, LevelUnit.UNFOLDED)
        assert np.allclose(back.values, expected.values, rtol=1e-15)

    def test_unfolded_unit_rejected(self, tmp_path):
        src = tmp_path / "x.lvl"
        write_level_file(src, np.arange(30.0))
        code = main(["unfold", "--in", str(src), "--unit", "unfolded",
                     "--area", "0.1", "--perimeter", "1.0",
                     "--out", str(tmp_path / "y.lvl")])
        assert code == 2


class TestCrosscorrCommand:
    def test_reciprocal_trace(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        n = 600
        s12 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        trace = SParameterTrace(freq_ghz=np.linspace(6, 9, n), s12=s12, s21=s12.copy())
        path = tmp_path / "trace.csv"
        write_sparameter_csv(path, trace)
        code = main(["crosscorr", "--in", str(path), "--window", "1.0"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["coefficients"]) == 3
        assert np.allclose(payload["coefficients"], 1.0)

    def test_missing_file_is_data_error(self, tmp_path):
        code = main(["crosscorr", "--in", str(tmp_path / "none.csv")])
        assert code == 1
