"""Level sequences, unfolding, random decimation and S-matrix cross-correlation.

Raw levels are either measured resonance frequencies (GHz) or matrix
eigenvalues.  Unfolding maps them onto a dimensionless scale with unit mean
spacing, after which all fluctuation statistics apply.  Missing levels are
modelled by random decimation: every level survives independently with
probability ``phi`` and the survivors are rescaled by ``phi`` so the mean
spacing returns to one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as _SPEED_OF_LIGHT  # m/s


class NumericalError(RuntimeError):
    """An internal numerical contract was violated (ill-conditioning, overflow...)."""


class LevelUnit(str, enum.Enum):
    FREQUENCY_GHZ = "frequency-GHz"
    RAW_EIGENVALUE = "raw-eigenvalue"
    UNFOLDED = "unfolded"


def _check_strictly_increasing(values, what):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"{what} needs at least two values")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} contains NaN or infinite entries")
    if np.any(np.diff(v) <= 0):
        raise ValueError(f"{what} must be strictly increasing")
    return v


@dataclass(frozen=True)
class LevelSequence:
    """Ordered raw levels with their unit."""

    values: np.ndarray
    unit: LevelUnit = LevelUnit.RAW_EIGENVALUE

    def __post_init__(self):
        v = _check_strictly_increasing(self.values, "LevelSequence")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "unit", LevelUnit(self.unit))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class BilliardGeometry:
    """Flat-cavity geometry entering the smooth integrated level count.

    ``perimeter_sign`` selects the sign of the linear term: "minus" is the
    Dirichlet convention and the default; "plus" is kept switchable because
    published variants differ.
    """

    area: float                  # m^2
    perimeter: float             # m
    perimeter_sign: str = "minus"
    constant_offset: float = 0.0

    def __post_init__(self):
        if self.area <= 0 or self.perimeter <= 0:
            raise ValueError("area and perimeter must be positive")
        if self.perimeter_sign not in ("minus", "plus"):
            raise ValueError("perimeter_sign must be 'minus' or 'plus'")


@dataclass(frozen=True)
class UnfoldedSpectrum:
    """Levels rescaled to (approximately) unit mean spacing.

    ``provenance`` records the unfolding route; ``phi`` is set only for
    decimated spectra.  ``source_count`` is the number of raw levels the
    spectrum descends from.
    """

    values: np.ndarray
    provenance: str = "polynomial"
    source_count: int = 0
    phi: float | None = None

    _PROVENANCES = ("weyl", "polynomial", "semicircle", "decimated")

    def __post_init__(self):
        v = _check_strictly_increasing(self.values, "UnfoldedSpectrum")
        object.__setattr__(self, "values", v)
        if self.provenance not in self._PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.source_count == 0:
            object.__setattr__(self, "source_count", len(v))

    def __len__(self):
        return len(self.values)

    @property
    def mean_spacing(self):
        v = self.values
        return (v[-1] - v[0]) / (len(v) - 1)

    def check_mean_spacing(self, rtol=0.05):
        """Verify unit mean spacing; applies to complete unfolded spectra."""
        if self.source_count >= 100 and abs(self.mean_spacing - 1.0) > rtol:
            raise NumericalError(
                f"mean spacing {self.mean_spacing:.4f} deviates from 1 by more "
                f"than {rtol:.0%} ({self.provenance} unfolding, "
                f"{len(self)} levels)"
            )
        return self


@dataclass(frozen=True)
class SParameterTrace:
    """Two-port transmission amplitudes on a uniform frequency grid."""

    freq_ghz: np.ndarray
    s12: np.ndarray
    s21: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freq_ghz, dtype=float)
        s12 = np.asarray(self.s12, dtype=complex)
        s21 = np.asarray(self.s21, dtype=complex)
        if not (len(f) == len(s12) == len(s21)):
            raise ValueError("frequency grid and S-parameter arrays differ in length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "freq_ghz", f)
        object.__setattr__(self, "s12", s12)
        object.__setattr__(self, "s21", s21)

    def __len__(self):
        return len(self.freq_ghz)


# ---------------------------------------------------------------------------
# Smooth level count and unfolding
# ---------------------------------------------------------------------------

def weyl_count(geometry: BilliardGeometry, nu_ghz):
    """Smooth integrated level count of a flat cavity at frequency ``nu_ghz``.

    Quadratic area term plus signed linear perimeter term plus the constant
    offset carried by the geometry.  Monotone increasing above the (tiny)
    turning point when the sign is minus.
    """
    nu = np.asarray(nu_ghz, dtype=float) * 1e9
    if np.any(nu < 0):
        raise ValueError("frequency must be non-negative")
    sign = -1.0 if geometry.perimeter_sign == "minus" else 1.0
    n = (geometry.area * np.pi / _SPEED_OF_LIGHT**2) * nu**2 \
        + sign * geometry.perimeter / (2.0 * _SPEED_OF_LIGHT) * nu \
        + geometry.constant_offset
    return n if np.ndim(nu_ghz) else float(n)


def unfold_weyl(levels: LevelSequence, geometry: BilliardGeometry,
                calibrate: bool = False) -> UnfoldedSpectrum:
    """Unfold measured frequencies with the smooth level count.

    With ``calibrate`` the constant offset is adjusted so the lowest supplied
    level maps to 0.5; otherwise the geometry's offset is used unchanged (it
    cancels in every spacing-based statistic).
    """
    if levels.unit is not LevelUnit.FREQUENCY_GHZ:
        raise ValueError("unfold_weyl expects levels in GHz")
    eps = weyl_count(geometry, levels.values)
    if calibrate:
        eps = eps - eps[0] + 0.5
    if np.any(np.diff(eps) <= 0):
        raise NumericalError("smooth count is not increasing across the supplied levels")
    return UnfoldedSpectrum(values=eps, provenance="weyl", source_count=len(levels))


def unfold_polynomial(levels: LevelSequence, degree: int = 7) -> UnfoldedSpectrum:
    """Unfold by a least-squares polynomial fit of the integrated density.

    The staircase is sampled as N(eps_i) = i - 1/2 and fitted with a
    polynomial of the given degree on a scaled domain; the unfolded levels
    are the fitted values.
    """
    if not 3 <= degree <= 15:
        raise ValueError("degree must lie in [3, 15]")
    v = levels.values
    if len(v) <= 2 * degree:
        raise ValueError("need more than 2*degree levels for a stable fit")
    staircase = np.arange(1, len(v) + 1, dtype=float) - 0.5
    series, info = np.polynomial.Polynomial.fit(v, staircase, degree, full=True)
    rank = info[1]
    if rank < degree + 1:
        raise NumericalError(
            f"rank-deficient unfolding fit (rank {rank} < {degree + 1}); "
            "levels may be (nearly) degenerate"
        )
    eps = series(v)
    if np.any(np.diff(eps) <= 0):
        raise NumericalError("polynomial unfolding is not monotone; lower the degree")
    out = UnfoldedSpectrum(values=eps, provenance="polynomial", source_count=len(v))
    return out.check_mean_spacing()


def decimate(spectrum: UnfoldedSpectrum, phi: float,
             rng: np.random.Generator) -> UnfoldedSpectrum:
    """Keep each level independently with probability ``phi``, rescale by ``phi``.

    Rescaling uses the nominal fraction, not the realized one, matching the
    random-missing-level model.
    """
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    keep = rng.random(len(spectrum)) < phi
    survivors = spectrum.values[keep]
    if len(survivors) < 2:
        raise NumericalError(f"decimation left {len(survivors)} level(s); need >= 2")
    return UnfoldedSpectrum(values=survivors * phi, provenance="decimated",
                            source_count=spectrum.source_count, phi=phi)


def normalize_mean_spacing(spectrum: UnfoldedSpectrum) -> UnfoldedSpectrum:
    """Rescale so the observed mean spacing is exactly one.

    Observed sequences must sit at unit mean spacing before their fluctuation
    statistics are compared with theory; after random decimation this pins
    the realized (rather than nominal) density, which in particular removes
    the per-realization drift of the deviation series that would otherwise
    double the low-frequency power spectrum.
    """
    return UnfoldedSpectrum(values=spectrum.values / spectrum.mean_spacing,
                            provenance=spectrum.provenance,
                            source_count=spectrum.source_count, phi=spectrum.phi)


# ---------------------------------------------------------------------------
# Cross-correlation of the transmission amplitudes
# ---------------------------------------------------------------------------

def _window_slices(freq, window_ghz):
    lo, hi = freq[0], freq[-1]
    n_win = max(1, int(round((hi - lo) / window_ghz)))
    edges = lo + (hi - lo) * np.arange(n_win + 1) / n_win
    idx = np.searchsorted(freq, edges)
    idx[-1] = len(freq)
    return [(idx[i], idx[i + 1]) for i in range(n_win) if idx[i + 1] - idx[i] > 0]


def cross_correlation_windows(trace: SParameterTrace, window_ghz: float):
    """Per-window correlation of the fluctuating amplitudes.

    Within every window the mean amplitude is removed before correlating;
    returns window centers (GHz) and coefficients.
    """
    slices = _window_slices(trace.freq_ghz, window_ghz)
    step = np.min(np.diff(trace.freq_ghz))
    if window_ghz / step < 20:
        raise ValueError("window must cover at least 20 grid points")
    centers, coeffs = [], []
    for i, j in slices:
        f12 = trace.s12[i:j] - trace.s12[i:j].mean()
        f21 = trace.s21[i:j] - trace.s21[i:j].mean()
        p12 = np.mean(np.abs(f12) ** 2)
        p21 = np.mean(np.abs(f21) ** 2)
        if p12 == 0.0 or p21 == 0.0:
            raise ValueError("zero fluctuation power in a window; coefficient undefined")
        num = np.mean(f12 * np.conj(f21)).real
        centers.append(0.5 * (trace.freq_ghz[i] + trace.freq_ghz[j - 1]))
        coeffs.append(num / np.sqrt(p12 * p21))
    return np.array(centers), np.array(coeffs)


def cross_correlation(trace: SParameterTrace, window_ghz: float) -> float:
    """Pooled cross-correlation coefficient over the whole trace.

    Means are removed per window of ``window_ghz``; numerator and channel
    powers are pooled over all points before normalizing, so the result lies
    in [-1, 1].
    """
    slices = _window_slices(trace.freq_ghz, window_ghz)
    step = np.min(np.diff(trace.freq_ghz))
    if window_ghz / step < 20:
        raise ValueError("window must cover at least 20 grid points")
    num = 0.0
    p12 = 0.0
    p21 = 0.0
    for i, j in slices:
        f12 = trace.s12[i:j] - trace.s12[i:j].mean()
        f21 = trace.s21[i:j] - trace.s21[i:j].mean()
        num += np.sum(f12 * np.conj(f21)).real
        p12 += np.sum(np.abs(f12) ** 2)
        p21 += np.sum(np.abs(f21) ** 2)
    if p12 == 0.0 or p21 == 0.0:
        raise ValueError("zero fluctuation power; coefficient undefined")
    return float(num / np.sqrt(p12 * p21))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_level_file(path, unit: LevelUnit | str = LevelUnit.UNFOLDED):
    """Read one number per line; '#' starts a comment."""
    values = []
    with open(path) as fh:
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if text:
                values.append(float(text))
    unit = LevelUnit(unit)
    if unit is LevelUnit.UNFOLDED:
        return UnfoldedSpectrum(values=np.array(values))
    return LevelSequence(values=np.array(values), unit=unit)


def write_level_file(path, values, header: str | None = None):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for v in np.asarray(values, dtype=float):
            fh.write(f"{v:.17g}\n")


def read_sparameter_csv(path) -> SParameterTrace:
    """CSV with header ``freq_ghz,re_s12,im_s12,re_s21,im_s21``."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    required = ("freq_ghz", "re_s12", "im_s12", "re_s21", "im_s21")
    if data.dtype.names is None or tuple(data.dtype.names) != required:
        raise ValueError(f"S-parameter CSV must have header {','.join(required)}")
    return SParameterTrace(
        freq_ghz=data["freq_ghz"],
        s12=data["re_s12"] + 1j * data["im_s12"],
        s21=data["re_s21"] + 1j * data["im_s21"],
    )


def write_sparameter_csv(path, trace: SParameterTrace):
    with open(path, "w") as fh:
        fh.write("freq_ghz,re_s12,im_s12,re_s21,im_s21\n")
        for f, a, b in zip(trace.freq_ghz, trace.s12, trace.s21):
            fh.write(f"{f:.17g},{a.real:.17g},{a.imag:.17g},{b.real:.17g},{b.imag:.17g}\n")
