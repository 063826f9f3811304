"""Empirical fluctuation statistics of ensembles of unfolded spectra.

Every estimator is a pure function of its inputs, invariant under a global
shift of the levels, and deterministic: window dithering uses a fixed
low-discrepancy sequence rather than a random stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectra import UnfoldedSpectrum

_GOLDEN = 0.6180339887498949

STAT_KINDS = (
    "nn_pdf", "nn_cdf", "kth_pdf", "sigma2", "delta3", "power_spectrum",
    "form_factor", "theory_nn_pdf", "theory_sigma2", "theory_delta3",
    "theory_power_spectrum", "theory_y2", "theory_form_factor",
)


@dataclass
class StatCurve:
    """A sampled statistic: grid, values, optional errors, and metadata."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    yerr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.y = np.asarray(self.y, float)
        if self.yerr is not None:
            self.yerr = np.asarray(self.yerr, float)
        if self.kind not in STAT_KINDS:
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x grid must be strictly increasing")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y values must be finite")


@dataclass(frozen=True)
class SpacingSample:
    """Spacings between k-th neighbors of an unfolded spectrum."""

    spacings: np.ndarray
    k: int = 1

    def __post_init__(self):
        s = np.asarray(self.spacings, float)
        if s.size == 0:
            raise ValueError("empty spacing sample")
        if np.any(s <= 0):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "spacings", s)


def kth_neighbor_spacings(spectrum: UnfoldedSpectrum, k: int = 1) -> SpacingSample:
    """Spacings eps_{i+k} - eps_i for all valid i."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v = spectrum.values
    if k >= len(v):
        raise ValueError(f"k={k} too large for a spectrum of {len(v)} levels")
    return SpacingSample(spacings=v[k:] - v[:-k], k=k)


def pooled_spacings(spectra, k: int = 1) -> SpacingSample:
    """k-th neighbor spacings pooled over an ensemble."""
    pooled = np.concatenate([kth_neighbor_spacings(s, k).spacings for s in spectra])
    return SpacingSample(spacings=pooled, k=k)


def spacing_histogram(sample: SpacingSample, bin_width: float = 0.2) -> StatCurve:
    """Density-normalized histogram on bins of fixed width starting at 0."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    s = sample.spacings
    n_bins = int(np.ceil(s.max() / bin_width))
    edges = bin_width * np.arange(n_bins + 1)
    heights, _ = np.histogram(s, bins=edges, density=True)
    return StatCurve(kind="nn_pdf" if sample.k == 1 else "kth_pdf",
                     x=0.5 * (edges[1:] + edges[:-1]), y=heights,
                     meta={"k": sample.k, "bin_width": bin_width,
                           "n_spacings": len(s)})


def spacing_cumulant(sample: SpacingSample, grid) -> StatCurve:
    """Empirical CDF of the spacings, evaluated on the given grid."""
    grid = np.asarray(grid, float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    s = np.sort(sample.spacings)
    cdf = np.searchsorted(s, grid, side="right") / len(s)
    return StatCurve(kind="nn_cdf", x=grid, y=cdf,
                     meta={"k": sample.k, "n_spacings": len(s)})


# ---------------------------------------------------------------------------
# Windowed long-range statistics
# ---------------------------------------------------------------------------

def _window_starts(values, L, dither):
    """Window start positions: step L/4, dithered, windows fully inside the data."""
    lo = values[0] + dither * (L / 4.0)
    hi = values[-1] - L
    if hi < lo:
        return np.empty(0)
    n_win = int(np.floor((hi - lo) / (L / 4.0))) + 1
    return lo + (L / 4.0) * np.arange(n_win)


def _usable_lengths(spectra, L_grid):
    min_len = min(len(s) for s in spectra)
    L_grid = np.asarray(L_grid, float)
    usable = L_grid[min_len >= 10 * L_grid]
    skipped = L_grid[min_len < 10 * L_grid]
    if skipped.size:
        warnings.warn(
            f"omitting L={skipped.tolist()}: shortest spectrum has {min_len} "
            "levels (< 10*L)", stacklevel=3)
    if usable.size == 0:
        raise ValueError("all interval lengths omitted; spectra too short")
    return usable


def number_variance(spectra, L_grid) -> StatCurve:
    """Variance of the level count in intervals of length L.

    Intervals slide across each spectrum with step L/4 and a per-spectrum
    dither; the squared deviation of the count from L is averaged over
    windows and spectra.  The error bar is the standard error over spectra.
    """
    usable = _usable_lengths(spectra, L_grid)
    y = np.empty(len(usable))
    yerr = np.empty(len(usable))
    for j, L in enumerate(usable):
        per_spectrum = np.empty(len(spectra))
        for i, spec in enumerate(spectra):
            v = spec.values
            starts = _window_starts(v, L, (i * _GOLDEN) % 1.0)
            counts = np.searchsorted(v, starts + L) - np.searchsorted(v, starts)
            per_spectrum[i] = np.mean((counts - L) ** 2)
        y[j] = np.mean(per_spectrum)
        yerr[j] = np.std(per_spectrum, ddof=1) / np.sqrt(len(spectra)) \
            if len(spectra) > 1 else np.nan
    return StatCurve(kind="sigma2", x=usable, y=y,
                     yerr=yerr if len(spectra) > 1 else None,
                     meta={"n_spectra": len(spectra)})


def _rigidity_windows(v, L, dither):
    """Mean over windows of the least-squares staircase deviation.

    Uses the closed-form window formula built from prefix sums, so no
    numerical quadrature is involved.
    """
    starts = _window_starts(v, L, dither)
    if starts.size == 0:
        return np.nan
    lo = np.searchsorted(v, starts)
    hi = np.searchsorted(v, starts + L)
    p1 = np.concatenate([[0.0], np.cumsum(v)])
    p2 = np.concatenate([[0.0], np.cumsum(v * v)])
    pk = np.concatenate([[0.0], np.cumsum((np.arange(len(v)) + 1.0) * v)])
    n = (hi - lo).astype(float)
    c = starts + L / 2.0
    sv = p1[hi] - p1[lo]
    sv2 = p2[hi] - p2[lo]
    s1 = sv - n * c
    s2 = sv2 - 2.0 * c * sv + n * c * c
    # sum of (within-window rank) * centered position
    sixt = (pk[hi] - pk[lo]) - lo * sv - c * n * (n + 1.0) / 2.0
    d3 = (n * n / 16.0 - s1 * s1 / L**2 + 1.5 * n * s2 / L**2
          - 3.0 * s2 * s2 / L**4 + ((n + 1.0) * s1 - 2.0 * sixt) / L)
    return float(np.mean(d3))


def rigidity(spectra, L_grid) -> StatCurve:
    """Least-squares deviation of the staircase from a straight line over length L."""
    usable = _usable_lengths(spectra, L_grid)
    y = np.empty(len(usable))
    yerr = np.empty(len(usable))
    for j, L in enumerate(usable):
        per_spectrum = np.array([
            _rigidity_windows(spec.values, L, (i * _GOLDEN) % 1.0)
            for i, spec in enumerate(spectra)])
        y[j] = np.mean(per_spectrum)
        yerr[j] = np.std(per_spectrum, ddof=1) / np.sqrt(len(spectra)) \
            if len(spectra) > 1 else np.nan
    return StatCurve(kind="delta3", x=usable, y=y,
                     yerr=yerr if len(spectra) > 1 else None,
                     meta={"n_spectra": len(spectra)})


def power_spectrum(spectra, n_common: int) -> StatCurve:
    """Ensemble-averaged periodogram of the level-position deviations.

    Each spectrum is truncated to its first ``n_common`` levels; the
    deviation series is delta_q = eps_{q+1} - eps_1 - q for q = 0..N-1
    (delta_0 = 0 by construction).  The abscissa is tau/N for integer
    tau = 1..N//2; the transform of a real series is symmetric about N/2.
    """
    if n_common < 2:
        raise ValueError("n_common must be at least 2")
    for i, spec in enumerate(spectra):
        if len(spec) < n_common:
            raise ValueError(
                f"spectrum {i} has {len(spec)} levels < n_common={n_common}")
    n = n_common
    k = np.arange(1, n // 2 + 1)
    per_spec = np.empty((len(spectra), len(k)))
    for i, spec in enumerate(spectra):
        v = spec.values[:n]
        delta = v - v[0] - np.arange(n)
        amp = np.fft.rfft(delta)[1:n // 2 + 1]
        per_spec[i] = np.abs(amp) ** 2 / n
    y = per_spec.mean(axis=0)
    yerr = per_spec.std(axis=0, ddof=1) / np.sqrt(len(spectra)) \
        if len(spectra) > 1 else None
    return StatCurve(kind="power_spectrum", x=k / n, y=y, yerr=yerr,
                     meta={"n_common": n, "n_spectra": len(spectra)})


# ---------------------------------------------------------------------------
# CSV interchange format
# ---------------------------------------------------------------------------

def write_statcurve_csv(path, curve: StatCurve):
    """One curve per file: '# key=value, ...' header, then x,y,yerr rows."""
    items = [f"kind={curve.kind}"]
    for key in sorted(curve.meta):
        items.append(f"{key}={curve.meta[key]}")
    with open(path, "w") as fh:
        fh.write("# " + ", ".join(items) + "\n")
        fh.write("x,y,yerr\n")
        for i in range(len(curve.x)):
            err = "" if curve.yerr is None or not np.isfinite(curve.yerr[i]) \
                else f"{curve.yerr[i]:.17g}"
            fh.write(f"{curve.x[i]:.17g},{curve.y[i]:.17g},{err}\n")


def read_statcurve_csv(path) -> StatCurve:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing metadata header line")
        meta = {}
        for item in header.lstrip("# ").strip().split(", "):
            key, _, value = item.partition("=")
            try:
                parsed = float(value)
                if parsed.is_integer() and "." not in value and "e" not in value.lower():
                    parsed = int(parsed)
            except ValueError:
                parsed = value
            meta[key] = parsed
        kind = meta.pop("kind")
        columns = fh.readline().strip()
        if columns != "x,y,yerr":
            raise ValueError(f"{path}: expected column header 'x,y,yerr'")
        x, y, yerr = [], [], []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 2:
                continue
            x.append(float(parts[0]))
            y.append(float(parts[1]))
            yerr.append(float(parts[2]) if len(parts) > 2 and parts[2] else np.nan)
    yerr = np.array(yerr)
    return StatCurve(kind=kind, x=np.array(x), y=np.array(y),
                     yerr=None if np.all(np.isnan(yerr)) else yerr, meta=meta)
