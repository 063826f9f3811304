"""Spectral fluctuation statistics of incomplete spectra across the GOE-GUE crossover.

The package has five layers:

- ``spectra``: raw level handling, unfolding, random decimation, and the
  two-port cross-correlation coefficient;
- ``rmt``: crossover random-matrix sampling and ensemble generation;
- ``estimators``: empirical spacing, number-variance, rigidity and
  power-spectrum statistics;
- ``theory``: the analytic counterparts, including the missing-level
  transforms;
- ``fitting``: recovery of the observed fraction and the crossover strength.
"""

__version__ = "0.1.0"

from .estimators import (SpacingSample, StatCurve, kth_neighbor_spacings,
                         number_variance, pooled_spacings, power_spectrum,
                         read_statcurve_csv, rigidity, spacing_cumulant,
                         spacing_histogram, write_statcurve_csv)
from .fitting import (FitConvergenceError, FitResult, UnidentifiableFitError,
                      fit_phi, fit_ptilde, fit_xi)
from .rmt import (CrossoverParams, EnsembleConfig, HermitianMatrix, bulk_select,
                  generate_ensemble, hermitian_eigenvalues, sample_crossover_matrix,
                  unfold_semicircle)
from .spectra import (BilliardGeometry, LevelSequence, LevelUnit, NumericalError,
                      SParameterTrace, UnfoldedSpectrum, cross_correlation,
                      cross_correlation_windows, decimate, read_level_file,
                      read_sparameter_csv, unfold_polynomial, unfold_weyl,
                      weyl_count, write_level_file, write_sparameter_csv)
from .theory import (NthNeighborModel, TheoryParams, build_nth_neighbor_model,
                     c_of_lambda, cluster_Y2, crossover_spacing_pdf, delta3_theory,
                     form_factor_K, form_factor_K_numeric, goe_delta3_asymptotic,
                     goe_form_factor_b, goe_sigma2_asymptotic, goe_spacing_pdf,
                     gue_delta3_asymptotic, gue_form_factor_b, gue_sigma2_asymptotic,
                     gue_spacing_pdf, missing_delta3, missing_power_spectrum,
                     missing_sigma2, missing_spacing_pdf, sigma2_theory, theory_curve)

__all__ = [name for name in dir() if not name.startswith("_")]
