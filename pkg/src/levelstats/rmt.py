"""Crossover random matrices interpolating between orthogonal and unitary symmetry.

A matrix is the sum of a real-symmetric Gaussian matrix and ``i*lam`` times a
real-antisymmetric Gaussian one, with ``lam = pi*xi/sqrt(n)``.  The symmetric
part uses the standard convention (off-diagonal variance 1, diagonal variance
2) so that ``xi`` measures the symmetry breaking in units of the mean level
spacing at the band center.  ``xi = 0`` is orthogonal; the transition to
unitary statistics is essentially complete near ``xi = 1``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .spectra import LevelSequence, LevelUnit, NumericalError, UnfoldedSpectrum, \
    decimate, unfold_polynomial

PAIR_GAP_RTOL = 1e-8


@dataclass(frozen=True)
class CrossoverParams:
    """Symmetry-breaking strength ``xi`` (mean-spacing units) and dimension ``n``."""

    xi: float
    n: int

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError("xi must be non-negative")
        if self.n < 2:
            raise ValueError("matrix dimension must be at least 2")

    @property
    def lam(self) -> float:
        return np.pi * self.xi / np.sqrt(self.n)


@dataclass(frozen=True)
class HermitianMatrix:
    """H = sym + i*asym with sym symmetric and asym antisymmetric (already scaled)."""

    sym: np.ndarray
    asym: np.ndarray

    def __post_init__(self):
        s, a = np.asarray(self.sym, float), np.asarray(self.asym, float)
        if s.shape != a.shape or s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sym and asym must be square matrices of equal shape")
        object.__setattr__(self, "sym", s)
        object.__setattr__(self, "asym", a)

    @property
    def dimension(self) -> int:
        return self.sym.shape[0]

    def to_complex(self) -> np.ndarray:
        return self.sym + 1j * self.asym


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything needed to regenerate an ensemble bit-for-bit."""

    n: int
    count: int
    xi: float
    phi: float = 1.0
    bulk_fraction: float = 0.6
    seed: int = 0
    unfolding: str = "polynomial"
    degree: int = 7

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one realization")
        if not 0.0 < self.bulk_fraction <= 1.0:
            raise ValueError("bulk_fraction must lie in (0, 1]")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError("phi must lie in (0, 1]")
        if self.unfolding not in ("polynomial", "semicircle"):
            raise ValueError("unfolding must be 'polynomial' or 'semicircle'")
        CrossoverParams(self.xi, self.n)  # validates xi, n


def sample_crossover_matrix(params: CrossoverParams,
                            rng: np.random.Generator) -> HermitianMatrix:
    """Draw one crossover matrix.

    Symmetric part: off-diagonal N(0,1), diagonal N(0,2).  Antisymmetric
    part: off-diagonal N(0,1), zero diagonal, scaled by ``lam``.
    """
    n = params.n
    m = rng.standard_normal((n, n))
    sym = (m + m.T) / np.sqrt(2.0)
    m = rng.standard_normal((n, n))
    asym = (m - m.T) / np.sqrt(2.0)
    return HermitianMatrix(sym=sym, asym=params.lam * asym)


def hermitian_eigenvalues(h: HermitianMatrix) -> np.ndarray:
    """All real eigenvalues, ascending, via the doubled real-symmetric embedding.

    For H = A + iB the real matrix [[A, -B], [B, A]] is symmetric and carries
    each eigenvalue of H twice; the doubled pairs are collapsed after checking
    that they actually pair up.
    """
    a, b = h.sym, h.asym
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise ValueError("matrix entries must be finite")
    if h.dimension == 1:
        return np.array([a[0, 0]])
    embedding = np.block([[a, -b], [b, a]])
    w = np.linalg.eigvalsh(embedding)
    radius = max(abs(w[0]), abs(w[-1]), np.finfo(float).tiny)
    gaps = w[1::2] - w[0::2]
    if np.max(gaps) > PAIR_GAP_RTOL * radius:
        raise NumericalError(
            f"embedding eigenvalues fail to pair: worst gap {np.max(gaps):.3e} "
            f"exceeds {PAIR_GAP_RTOL:.0e} * spectral radius {radius:.3e}"
        )
    return 0.5 * (w[1::2] + w[0::2])


def bulk_select(eigs: np.ndarray, bulk_fraction: float) -> np.ndarray:
    """Central ``ceil(bulk_fraction*n)`` eigenvalues, symmetric about the median index."""
    if not 0.0 < bulk_fraction <= 1.0:
        raise ValueError("bulk_fraction must lie in (0, 1]")
    eigs = np.asarray(eigs, float)
    n = len(eigs)
    m = int(np.ceil(bulk_fraction * n))
    if m < 1:
        raise ValueError("empty bulk selection")
    start = (n - m) // 2
    return eigs[start:start + m]


def unfold_semicircle(eigs: np.ndarray, params: CrossoverParams) -> UnfoldedSpectrum:
    """Unfold with the analytic integrated semicircle density.

    The element variance of the crossover matrix is ``1 + lam**2`` off the
    diagonal, giving a semicircle of radius ``2*sqrt(n*(1 + lam**2))``.
    """
    n = params.n
    radius = 2.0 * np.sqrt(n * (1.0 + params.lam ** 2))
    x = np.clip(np.asarray(eigs, float) / radius, -1.0, 1.0)
    counts = n * (0.5 + (x * np.sqrt(1.0 - x**2) + np.arcsin(x)) / np.pi)
    if np.any(np.diff(counts) <= 0):
        raise NumericalError("semicircle unfolding is not monotone (degenerate levels?)")
    return UnfoldedSpectrum(values=counts, provenance="semicircle",
                            source_count=len(counts))


def _realization(config: EnsembleConfig, index: int) -> UnfoldedSpectrum:
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(index,))
    rng = np.random.default_rng(ss)
    params = CrossoverParams(xi=config.xi, n=config.n)
    h = sample_crossover_matrix(params, rng)
    eigs = hermitian_eigenvalues(h)
    bulk = bulk_select(eigs, config.bulk_fraction)
    if config.unfolding == "semicircle":
        spectrum = unfold_semicircle(bulk, params)
    else:
        spectrum = unfold_polynomial(
            LevelSequence(values=bulk, unit=LevelUnit.RAW_EIGENVALUE), config.degree)
    if config.phi < 1.0:
        spectrum = decimate(spectrum, config.phi, rng)
    return spectrum


def generate_ensemble(config: EnsembleConfig, workers: int = 1) -> list[UnfoldedSpectrum]:
    """Generate ``config.count`` independent unfolded (and decimated) spectra.

    Every realization draws from its own counter-based substream of the
    master seed, so the output is a pure function of the config and is
    independent of ``workers`` and of execution order.
    """
    indices = range(config.count)

    def run(i):
        try:
            return _realization(config, i)
        except Exception as exc:
            raise type(exc)(f"realization {i}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, indices))
    return [run(i) for i in indices]
