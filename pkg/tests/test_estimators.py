"""Empirical estimators against lattice, Poisson, and matrix-ensemble oracles."""

import numpy as np
import pytest

from levelstats import (StatCurve, UnfoldedSpectrum, delta3_theory, kth_neighbor_spacings,
                        number_variance, pooled_spacings, power_spectrum,
                        read_statcurve_csv, rigidity, sigma2_theory, spacing_cumulant,
                        spacing_histogram, write_statcurve_csv)
from conftest import poisson_spectra, unit_lattice
from oracles import dft_power_direct, lattice_delta3_exact


class TestKthNeighborSpacings:
    def test_unit_lattice_first_neighbor(self):
        sample = kth_neighbor_spacings(unit_lattice(50), k=1)
        assert np.allclose(sample.spacings, 1.0)

    def test_unit_lattice_third_neighbor(self):
        sample = kth_neighbor_spacings(unit_lattice(50), k=3)
        assert np.allclose(sample.spacings, 3.0)
        assert len(sample.spacings) == 47

    def test_poisson_second_neighbor_is_gamma(self):
        spec = poisson_spectra(1, 20000, seed=1)[0]
        sample = kth_neighbor_spacings(spec, k=2)
        # sum of two unit exponentials: mean 2, variance 2
        sigma_mean = np.sqrt(2.0 / len(sample.spacings))
        assert abs(sample.spacings.mean() - 2.0) < 3 * sigma_mean

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kth_neighbor_spacings(unit_lattice(5), k=5)

    def test_sample_mean_tracks_k(self, mid_ensemble):
        for k in (1, 2, 4):
            sample = pooled_spacings(mid_ensemble, k)
            sigma = sample.spacings.std() / np.sqrt(len(sample.spacings))
            assert abs(sample.spacings.mean() - k) < max(3 * sigma, 5e-3)


class TestSpacingHistogram:
    def test_degenerate_sample_normalization(self):
        sample = kth_neighbor_spacings(unit_lattice(1001), k=1)
        hist = spacing_histogram(sample, bin_width=0.1)
        assert hist.y[-1] == pytest.approx(10.0)
        assert np.sum(hist.y) * 0.1 == pytest.approx(1.0)

    def test_exponential_sample_l1(self):
        rng = np.random.default_rng(2)
        spec = UnfoldedSpectrum(values=np.cumsum(rng.exponential(1.0, 100000)))
        hist = spacing_histogram(kth_neighbor_spacings(spec, 1), bin_width=0.1)
        l1 = np.sum(np.abs(hist.y - np.exp(-hist.x))) * 0.1
        assert l1 < 0.05

    def test_bad_bin_width(self):
        sample = kth_neighbor_spacings(unit_lattice(10), 1)
        with pytest.raises(ValueError):
            spacing_histogram(sample, bin_width=0.0)


class TestSpacingCumulant:
    def test_limits(self):
        sample = kth_neighbor_spacings(unit_lattice(100), 1)
        curve = spacing_cumulant(sample, [1e-9, 0.5, 50.0])
        assert curve.y[0] == 0.0
        assert curve.y[-1] == 1.0

    def test_exponential_at_one(self):
        rng = np.random.default_rng(3)
        spec = UnfoldedSpectrum(values=np.cumsum(rng.exponential(1.0, 40000)))
        curve = spacing_cumulant(kth_neighbor_spacings(spec, 1), [1.0])
        p = 1.0 - np.exp(-1.0)
        sigma = np.sqrt(p * (1 - p) / 40000)
        assert abs(curve.y[0] - p) < 3 * sigma

    def test_grid_must_increase(self):
        sample = kth_neighbor_spacings(unit_lattice(10), 1)
        with pytest.raises(ValueError):
            spacing_cumulant(sample, [1.0, 0.5])


class TestNumberVariance:
    def test_unit_lattice_integer_lengths(self):
        spectra = [unit_lattice(600, offset=o) for o in (0.1, 0.37, 0.52)]
        curve = number_variance(spectra, [1.0, 2.0, 5.0])
        assert np.allclose(curve.y, 0.0, atol=1e-12)

    def test_poisson_linear_growth(self):
        spectra = poisson_spectra(60, 1500, seed=4)
        curve = number_variance(spectra, [0.5, 1.0, 2.0, 5.0, 10.0])
        assert np.all(np.abs(curve.y - curve.x) < 3 * curve.yerr)

    def test_goe_matches_theory_at_unit_length(self, goe_ensemble):
        curve = number_variance(goe_ensemble, [1.0])
        theory = sigma2_theory(1.0, 0.0)
        assert abs(curve.y[0] - theory) < 3 * curve.yerr[0]

    def test_short_spectra_omitted_with_warning(self):
        spectra = poisson_spectra(5, 60, seed=5)
        with pytest.warns(UserWarning, match="omitting"):
            curve = number_variance(spectra, [1.0, 20.0])
        assert np.array_equal(curve.x, [1.0])

    def test_all_lengths_omitted_is_error(self):
        spectra = poisson_spectra(3, 30, seed=6)
        with pytest.raises(ValueError):
            with pytest.warns(UserWarning):
                number_variance(spectra, [50.0])

    def test_shift_invariance(self, goe_ensemble):
        shifted = [UnfoldedSpectrum(values=s.values + 17.3, provenance=s.provenance,
                                    source_count=s.source_count)
                   for s in goe_ensemble[:10]]
        base = number_variance(goe_ensemble[:10], [1.0, 3.0])
        moved = number_variance(shifted, [1.0, 3.0])
        assert np.allclose(base.y, moved.y, rtol=1e-12)


class TestRigidity:
    def test_unit_lattice_approaches_one_twelfth(self):
        spectra = [unit_lattice(2500, offset=o) for o in np.linspace(0.05, 0.95, 8)]
        curve = rigidity(spectra, [40.0])
        oracle = lattice_delta3_exact(40.0)
        assert abs(curve.y[0] - oracle) < 2e-3
        assert abs(curve.y[0] - 1.0 / 12.0) < 2e-3

    def test_poisson_linear_growth(self):
        spectra = poisson_spectra(60, 1500, seed=7)
        curve = rigidity(spectra, [3.0, 7.5, 15.0])
        assert np.all(np.abs(curve.y - curve.x / 15.0) < 3 * curve.yerr)

    def test_goe_matches_theory(self, goe_ensemble):
        curve = rigidity(goe_ensemble, [5.0])
        theory = delta3_theory(5.0, 0.0)
        assert abs(curve.y[0] - theory) < 3 * curve.yerr[0]

    def test_smoothing_inequality(self, goe_ensemble):
        grid = [1.0, 2.0, 5.0, 10.0]
        s2 = number_variance(goe_ensemble, grid)
        d3 = rigidity(goe_ensemble, grid)
        assert np.all(d3.y <= s2.y / 2.0 + 3 * (d3.yerr + s2.yerr))


class TestPowerSpectrum:
    def test_perfect_lattice_vanishes(self):
        curve = power_spectrum([unit_lattice(64)], n_common=64)
        assert np.allclose(curve.y, 0.0, atol=1e-24)

    def test_two_level_hand_value(self):
        # N=2 has the single frequency tau=1: S = |d * exp(-i pi)|^2 / 2
        d = 0.37
        spec = UnfoldedSpectrum(values=np.array([0.0, 1.0 + d]))
        out = power_spectrum([spec], n_common=2)
        assert np.array_equal(out.x, [0.5])
        assert out.y[0] == pytest.approx(d**2 / 2.0, rel=1e-12)

    def test_matches_direct_dft(self):
        rng = np.random.default_rng(8)
        spec = UnfoldedSpectrum(values=np.cumsum(rng.exponential(1.0, 32)))
        curve = power_spectrum([spec], n_common=32)
        v = spec.values[:32]
        delta = v - v[0] - np.arange(32)
        for j, tau in enumerate(range(1, 17)):
            assert curve.y[j] == pytest.approx(dft_power_direct(delta, tau), rel=1e-10)

    def test_symmetry_under_tau_reflection(self):
        rng = np.random.default_rng(9)
        spec = UnfoldedSpectrum(values=np.cumsum(rng.exponential(1.0, 20)))
        v = spec.values[:20]
        delta = v - v[0] - np.arange(20)
        for tau in (3, 7):
            assert dft_power_direct(delta, tau) == pytest.approx(
                dft_power_direct(delta, 20 - tau), rel=1e-12)

    def test_gue_chaotic_slope(self, gue_ensemble):
        n_common = min(len(s) for s in gue_ensemble)
        curve = power_spectrum(gue_ensemble, n_common)
        mask = (curve.x >= 0.02) & (curve.x <= 0.2)
        slope = np.polyfit(np.log(curve.x[mask]), np.log(curve.y[mask]), 1)[0]
        assert abs(slope - (-1.0)) < 0.1

    def test_error_names_offending_spectrum(self):
        spectra = [unit_lattice(50), unit_lattice(20)]
        with pytest.raises(ValueError, match="spectrum 1"):
            power_spectrum(spectra, n_common=30)

    def test_shift_invariance(self):
        rng = np.random.default_rng(10)
        values = np.cumsum(rng.exponential(1.0, 40))
        a = power_spectrum([UnfoldedSpectrum(values=values)], 40)
        b = power_spectrum([UnfoldedSpectrum(values=values + 5.5)], 40)
        assert np.allclose(a.y, b.y, rtol=1e-12)


class TestStatCurveCsv:
    def test_round_trip_with_errors(self, tmp_path):
        path = tmp_path / "curve.csv"
        curve = StatCurve(kind="sigma2", x=np.array([0.5, 1.0]),
                          y=np.array([0.4, 0.6]), yerr=np.array([0.01, 0.02]),
                          meta={"xi": 0.35, "phi": 0.81, "n_spectra": 300})
        write_statcurve_csv(path, curve)
        back = read_statcurve_csv(path)
        assert back.kind == "sigma2"
        assert np.allclose(back.x, curve.x)
        assert np.allclose(back.y, curve.y)
        assert np.allclose(back.yerr, curve.yerr)
        assert back.meta["xi"] == 0.35
        assert back.meta["n_spectra"] == 300

    def test_round_trip_without_errors(self, tmp_path):
        path = tmp_path / "curve.csv"
        curve = StatCurve(kind="theory_y2", x=np.array([0.1, 0.2, 0.4]),
                          y=np.array([0.9, 0.7, 0.4]), meta={"xi": 0.0})
        write_statcurve_csv(path, curve)
        back = read_statcurve_csv(path)
        assert back.yerr is None
        assert back.meta == {"xi": 0.0}

    def test_header_line_preserved_format(self, tmp_path):
        path = tmp_path / "curve.csv"
        curve = StatCurve(kind="nn_pdf", x=np.array([0.1]), y=np.array([0.2]),
                          meta={"bin_width": 0.2})
        write_statcurve_csv(path, curve)
        first = path.read_text().splitlines()[0]
        assert first.startswith("# kind=nn_pdf")
