"""Analytic fluctuation statistics across the orthogonal-unitary crossover.

All statistics are expressed on the unfolded scale (unit mean spacing).  The
crossover strength ``xi`` enters the two-point cluster function through the
pair of integrals

    D(L) = (1/pi) * int_0^pi  exp(+2 xi^2 x^2) x sin(Lx) dx
    J(L) = (1/pi) * int_pi^oo exp(-2 xi^2 x^2) sin(Lx)/x dx

and Y2(L) = s(L)^2 - D(L) J(L) with s(L) = sin(pi L)/(pi L).  The product
D*J is evaluated with a shared exponential rescaling so neither factor
overflows; evaluation is refused above ``xi = 1.5`` where the transition has
long been complete and the integrands lose all precision.  At ``xi = 0`` the
tail integral is taken via the sine integral instead of a quadrature because
the integrand no longer decays.

The form factor uses the convention ``b(t) = int Y2(r) exp(-2 pi i r t) dr``
(so the orthogonal and unitary closed forms hold literally, with K = 1 - b).

Missing levels: a fraction ``1 - phi`` of levels is removed at random and the
survivors are rescaled by ``phi``.  The observed nearest-neighbor density is
a geometrically weighted sum over k-th neighbor densities of the complete
spectrum; number variance, rigidity and the power spectrum transform in
closed form.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._quad import gauss_panels
from .estimators import StatCurve, pooled_spacings, spacing_histogram
from .rmt import EnsembleConfig, generate_ensemble
from .spectra import NumericalError

XI_MAX = 1.5          # cluster quadratures refused above (overflow regime)
_XI_ZERO = 1e-3       # below this the xi=0 path is numerically identical
_J_TRUNC_TOL = 1e-10  # truncation level for the decaying tail integral
_OSC_NODES = 10.0     # panel length = _OSC_NODES / max frequency

_LOCK = threading.Lock()
_FOURIER_CACHE: dict = {}
_MODEL_CACHE: dict = {}
_NORM_CACHE: dict = {}


@dataclass(frozen=True)
class TheoryParams:
    """Crossover strength, observed fraction, and quadrature controls."""

    xi: float
    phi: float = 1.0
    quad_tol: float = 1e-8
    r_max: float = 200.0

    def __post_init__(self):
        _check_xi(self.xi)
        if not 0.0 < self.phi <= 1.0:
            raise ValueError("phi must lie in (0, 1]")


def _check_xi(xi):
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if xi > XI_MAX:
        raise ValueError(
            f"xi={xi} refused: the cluster-function integrands overflow and the "
            f"transition is already complete near xi=1 (limit {XI_MAX})")


# ---------------------------------------------------------------------------
# Reference curves for the symmetry-class endpoints
# ---------------------------------------------------------------------------

def goe_spacing_pdf(s):
    s = np.asarray(s, float)
    return (np.pi / 2.0) * s * np.exp(-np.pi * s**2 / 4.0)


def gue_spacing_pdf(s):
    s = np.asarray(s, float)
    return (32.0 / np.pi**2) * s**2 * np.exp(-4.0 * s**2 / np.pi)


def goe_form_factor_b(t):
    t = np.abs(np.asarray(t, float))
    big = np.maximum(t, 1.0)
    return np.where(t <= 1.0,
                    1.0 - 2.0 * t + t * np.log1p(2.0 * t),
                    -1.0 + big * np.log((2.0 * big + 1.0) / (2.0 * big - 1.0)))


def gue_form_factor_b(t):
    t = np.abs(np.asarray(t, float))
    return np.maximum(1.0 - t, 0.0)


def goe_sigma2_asymptotic(L):
    L = np.asarray(L, float)
    return (2.0 / np.pi**2) * (np.log(2.0 * np.pi * L) + np.euler_gamma
                               + 1.0 - np.pi**2 / 8.0)


def gue_sigma2_asymptotic(L):
    L = np.asarray(L, float)
    return (1.0 / np.pi**2) * (np.log(2.0 * np.pi * L) + np.euler_gamma + 1.0)


def goe_delta3_asymptotic(L):
    L = np.asarray(L, float)
    return (1.0 / np.pi**2) * (np.log(2.0 * np.pi * L) + np.euler_gamma
                               - 5.0 / 4.0 - np.pi**2 / 8.0)


def gue_delta3_asymptotic(L):
    L = np.asarray(L, float)
    return (1.0 / (2.0 * np.pi**2)) * (np.log(2.0 * np.pi * L)
                                       + np.euler_gamma - 5.0 / 4.0)


# ---------------------------------------------------------------------------
# Crossover nearest-neighbor spacing distribution
# ---------------------------------------------------------------------------

def c_of_lambda(lam: float) -> float:
    """Normalization scale of the two-dimensional crossover surmise.

    Chosen so the spacing density below has unit mass and unit mean for
    every coupling; c(0) = sqrt(pi/2).
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return math.sqrt(np.pi * (2.0 + lam**2) / 4.0) * (
        1.0 - (2.0 / np.pi) * (math.atan(lam / math.sqrt(2.0))
                               - math.sqrt(2.0) * lam / (2.0 + lam**2)))


def crossover_spacing_pdf(s, xi: float):
    """Nearest-neighbor spacing density for crossover strength ``xi``.

    Uses the two-dimensional surmise with coupling ``lam = 2 xi``; exactly
    normalized with unit mean for any coupling.  Interpolates between the
    orthogonal (s-linear) and unitary (s-squared) small-s laws, so any
    ``xi >= 0`` is accepted here (unlike the cluster-function routines,
    which are capped).
    """
    s = np.asarray(s, float)
    if np.any(s < 0):
        raise ValueError("spacings must be non-negative")
    if xi < 0:
        raise ValueError("xi must be non-negative")
    lam = 2.0 * xi
    if lam == 0.0:
        out = goe_spacing_pdf(s)
    else:
        c = c_of_lambda(lam)
        out = (s * math.sqrt((2.0 + lam**2) / 2.0) * c**2
               * special.erf(s * c / lam) * np.exp(-s**2 * c**2 / 2.0))
    return out if s.ndim else float(out)


# ---------------------------------------------------------------------------
# Two-point cluster function and its integrals
# ---------------------------------------------------------------------------

def _sinc_pi(r):
    return np.sinc(r)  # sin(pi r)/(pi r)


def _y2_goe(r):
    r = np.asarray(r, float)
    safe = np.where(r == 0.0, 1.0, r)
    s = _sinc_pi(r)
    ds = np.where(r == 0.0, 0.0,
                  np.cos(np.pi * r) / safe - np.sin(np.pi * r) / (np.pi * safe**2))
    si = special.sici(np.pi * np.abs(r))[0] * np.sign(r)
    return s**2 + ds * (0.5 - si / np.pi)


def cluster_Y2(r, xi: float):
    """Two-point cluster function Y2(r; xi); even in r, Y2(0) = 1.

    For ``xi = 0`` the closed Si-based form is used; otherwise both crossover
    integrals are evaluated on shared Gauss-Legendre panels with the
    exponential scales factored out of the product.
    """
    _check_xi(xi)
    r_in = np.asarray(r, float)
    if not np.all(np.isfinite(r_in)):
        raise ValueError("r must be finite")
    flat = np.abs(r_in).ravel()
    if flat.size == 0:
        return np.empty(r_in.shape)
    if xi < _XI_ZERO:
        out = _y2_goe(flat)
        return out.reshape(r_in.shape) if r_in.ndim else float(out[0])

    s2 = _sinc_pi(flat) ** 2
    r_top = max(float(flat.max()), 1.0)
    panel = min(0.5, _OSC_NODES / r_top)
    x_d, w_d = gauss_panels(0.0, np.pi, panel, 12)
    f_d = np.exp(2.0 * xi**2 * (x_d**2 - np.pi**2)) * x_d / np.pi
    x_top = math.sqrt(np.pi**2 + math.log(1.0 / _J_TRUNC_TOL) / (2.0 * xi**2))
    x_j, w_j = gauss_panels(np.pi, x_top, panel, 12)
    f_j = np.exp(-2.0 * xi**2 * (x_j**2 - np.pi**2)) / x_j / np.pi

    out = np.empty_like(flat)
    block = max(1, (1 << 22) // max(x_d.size + x_j.size, 1))
    wd, wj = w_d * f_d, w_j * f_j
    for i in range(0, flat.size, block):
        rr = flat[i:i + block]
        d_scaled = np.sin(np.outer(rr, x_d)) @ wd
        j_scaled = np.sin(np.outer(rr, x_j)) @ wj
        out[i:i + block] = s2[i:i + block] - d_scaled * j_scaled
    return out.reshape(r_in.shape) if r_in.ndim else float(out[0])


def _weighted_y2_integral(L, xi, kernel):
    """int_0^L K(L, r) Y2(r) dr for all L at once, via r = L*u on [0, 1]."""
    L = np.atleast_1d(np.asarray(L, float))
    out = np.zeros_like(L)
    pos = L > 0
    if not np.any(pos):
        return out
    l_max = float(L[pos].max())
    u, wu = gauss_panels(0.0, 1.0, min(0.5, 0.5 / max(l_max, 1.0)), 24)
    y = cluster_Y2(np.outer(L[pos], u), xi)
    out[pos] = (kernel(u)[None, :] * y) @ wu
    return out


def sigma2_theory(L, xi: float):
    """Number variance of the complete crossover spectrum at interval length L."""
    L_in = np.asarray(L, float)
    if np.any(L_in < 0):
        raise ValueError("L must be non-negative")
    L1 = np.atleast_1d(L_in)
    integral = _weighted_y2_integral(L1, xi, lambda u: 1.0 - u)
    out = L1 - 2.0 * L1**2 * integral
    return out.reshape(L_in.shape) if L_in.ndim else float(out[0])


def delta3_theory(L, xi: float):
    """Spectral rigidity of the complete crossover spectrum at length L."""
    L_in = np.asarray(L, float)
    if np.any(L_in <= 0):
        raise ValueError("L must be positive")
    L1 = np.atleast_1d(L_in)
    integral = _weighted_y2_integral(
        L1, xi, lambda u: (1.0 - u)**3 * (2.0 - 9.0 * u - 3.0 * u**2))
    out = L1 / 15.0 - (L1**2 / 15.0) * integral
    return out.reshape(L_in.shape) if L_in.ndim else float(out[0])


# ---------------------------------------------------------------------------
# Form factor
# ---------------------------------------------------------------------------

def _fourier_cache(xi: float, r_max: float):
    key = (round(float(xi), 12), float(r_max))
    with _LOCK:
        hit = _FOURIER_CACHE.get(key)
    if hit is not None:
        return hit
    rn, rw = gauss_panels(0.0, r_max, 0.5, 24)
    y2 = cluster_Y2(rn, xi)
    # large-r model (a + b cos + c sin)/r^2 fitted on the outer quarter,
    # integrated analytically beyond r_max
    mask = rn >= 0.75 * r_max
    basis = np.column_stack([np.ones(mask.sum()),
                             np.cos(2.0 * np.pi * rn[mask]),
                             np.sin(2.0 * np.pi * rn[mask])]) / rn[mask, None]**2
    tail_coef = np.linalg.lstsq(basis, y2[mask], rcond=None)[0]
    entry = (rn, rw * y2, tail_coef)
    with _LOCK:
        _FOURIER_CACHE[key] = entry
    return entry


def _int_cos_over_r2(a, r_max):
    """int_{r_max}^oo cos(a r)/r^2 dr, vectorized; even in a."""
    a = np.abs(np.atleast_1d(np.asarray(a, float)))
    out = np.empty_like(a)
    zero = a == 0.0
    out[zero] = 1.0 / r_max
    az = a[~zero]
    si = special.sici(az * r_max)[0]
    out[~zero] = np.cos(az * r_max) / r_max - az * (np.pi / 2.0 - si)
    return out


def _int_sin_over_r2(a, r_max):
    """int_{r_max}^oo sin(a r)/r^2 dr, vectorized; odd in a."""
    a = np.atleast_1d(np.asarray(a, float))
    sign = np.sign(a)
    aa = np.abs(a)
    out = np.zeros_like(aa)
    nz = aa > 0.0
    si, ci = special.sici(aa[nz] * r_max)
    out[nz] = np.sin(aa[nz] * r_max) / r_max - aa[nz] * ci
    return sign * out


def form_factor_K_numeric(t, xi: float, r_max: float = 200.0):
    """K(t) by cosine transform of the cluster function, any xi in [0, 1.5].

    Used internally for intermediate couplings and exposed so the endpoint
    closed forms can be cross-checked against the quadrature route.
    """
    _check_xi(xi)
    t_in = np.asarray(t, float)
    t1 = np.atleast_1d(t_in)
    rn, wy2, (ca, cb, cc) = _fourier_cache(xi, r_max)
    core = 2.0 * (np.cos(2.0 * np.pi * np.outer(t1, rn)) @ wy2)
    w = 2.0 * np.pi * t1
    two_pi = 2.0 * np.pi
    tail = 2.0 * (ca * _int_cos_over_r2(w, r_max)
                  + 0.5 * cb * (_int_cos_over_r2(two_pi + w, r_max)
                                + _int_cos_over_r2(two_pi - w, r_max))
                  + 0.5 * cc * (_int_sin_over_r2(two_pi + w, r_max)
                                + _int_sin_over_r2(two_pi - w, r_max)))
    out = 1.0 - (core + tail)
    return out.reshape(t_in.shape) if t_in.ndim else float(out[0])


def form_factor_K(t, xi: float, r_max: float = 200.0):
    """Spectral form factor K(t) = 1 - b(t) for t in [0, 1].

    The orthogonal (xi = 0) and unitary (xi >= 1) endpoints use their closed
    forms; intermediate couplings use the numeric transform.
    """
    _check_xi(xi)
    t_in = np.asarray(t, float)
    if np.any(t_in < 0) or np.any(t_in > 1):
        raise ValueError("t must lie in [0, 1]")
    if xi < _XI_ZERO:
        out = 1.0 - goe_form_factor_b(t_in)
    elif xi >= 1.0:
        out = 1.0 - gue_form_factor_b(t_in)
    else:
        return form_factor_K_numeric(t_in, xi, r_max)
    return out if t_in.ndim else float(out)


# ---------------------------------------------------------------------------
# k-th neighbor spacing model for the missing-level sum
# ---------------------------------------------------------------------------

def _ptilde_pdf(s, gamma, mu, chi):
    s = np.asarray(s, float)
    with np.errstate(divide="ignore"):
        out = np.where(s > 0, gamma * s**mu * np.exp(-chi * s**2), 0.0)
    return out


def _ptilde_unit_mass_gamma(mu, chi):
    return 2.0 * chi**((mu + 1.0) / 2.0) / special.gamma((mu + 1.0) / 2.0)


def _ptilde_mean(mu, chi):
    return special.gamma((mu + 2.0) / 2.0) / (math.sqrt(chi)
                                              * special.gamma((mu + 1.0) / 2.0))


@dataclass(frozen=True)
class NthNeighborModel:
    """Per-gap components of the missing-level spacing sum at fixed ``xi``.

    Gap 0 is always the analytic crossover density.  Gaps 1 and 2 carry
    fitted (gamma, mu, chi) power-Gaussian forms, rescaled to exact unit
    mass and exact mean n+1.  Larger gaps use Gaussians centered at n+1
    whose variances follow from the number variance.
    """

    xi: float
    ptilde: dict
    config: EnsembleConfig
    histograms: dict = field(default_factory=dict, repr=False)

    def component_pdf(self, n: int, u):
        """Density of the (n+1)-st neighbor spacing of the complete spectrum."""
        if n == 0:
            return crossover_spacing_pdf(u, self.xi)
        if n in self.ptilde:
            return _ptilde_pdf(u, *self.ptilde[n])
        var = float(sigma2_theory(float(n), self.xi)) - 1.0 / 6.0
        u = np.asarray(u, float)
        return np.exp(-0.5 * (u - (n + 1.0))**2 / var) / math.sqrt(2.0 * np.pi * var)


def build_nth_neighbor_model(xi: float, sim_config: EnsembleConfig | None = None,
                             workers: int = 1) -> NthNeighborModel:
    """Fit the gap-1 and gap-2 spacing densities from a matrix ensemble.

    Results are cached per (xi, config); rebuilding with the same seed gives
    identical parameters.  The fitted shapes keep their exponent but are
    rescaled so each component has unit mass and mean exactly n+1, which the
    missing-level sum relies on.
    """
    _check_xi(xi)
    if sim_config is None:
        sim_config = EnsembleConfig(n=500, count=500, xi=xi, phi=1.0, seed=715)
    if abs(sim_config.xi - xi) > 1e-12:
        raise ValueError("sim_config.xi must equal xi")
    if sim_config.phi != 1.0:
        raise ValueError("neighbor models are fitted on complete spectra (phi=1)")
    key = (round(float(xi), 12), sim_config)
    with _LOCK:
        hit = _MODEL_CACHE.get(key)
    if hit is not None:
        return hit

    from .fitting import fit_ptilde  # deferred: fitting imports this module

    spectra = generate_ensemble(sim_config, workers=workers)
    ptilde = {}
    histograms = {}
    for n in (1, 2):
        hist = spacing_histogram(pooled_spacings(spectra, k=n + 1), bin_width=0.1)
        histograms[n] = hist
        try:
            gamma, mu, chi = fit_ptilde(hist)
        except Exception as exc:
            exc.histogram = hist
            raise
        mean = _ptilde_mean(mu, chi)
        if abs(mean - (n + 1.0)) > 0.02 * (n + 1.0):
            err = NumericalError(
                f"gap-{n} fit mean {mean:.3f} deviates from {n + 1} by more than 2%")
            err.histogram = hist
            raise err
        chi = (special.gamma((mu + 2.0) / 2.0)
               / ((n + 1.0) * special.gamma((mu + 1.0) / 2.0)))**2
        gamma = _ptilde_unit_mass_gamma(mu, chi)
        ptilde[n] = (gamma, mu, chi)
    model = NthNeighborModel(xi=xi, ptilde=ptilde, config=sim_config,
                             histograms=histograms)
    with _LOCK:
        _MODEL_CACHE[key] = model
    return model


# ---------------------------------------------------------------------------
# Missing-level transforms
# ---------------------------------------------------------------------------

def _missing_terms(phi: float, mass_tol: float = 1e-8) -> int:
    """Largest gap retained: geometric weights below mass_tol are dropped."""
    if phi == 1.0:
        return 0
    return int(math.ceil(math.log(mass_tol) / math.log1p(-phi)))


def _missing_pdf_raw(s, xi, phi, model):
    s = np.asarray(s, float)
    u = s / phi
    out = np.zeros_like(u)
    for n in range(_missing_terms(phi) + 1):
        out += (1.0 - phi)**n * model.component_pdf(n, u)
    return out


def missing_spacing_pdf(s, xi: float, phi: float,
                        model: NthNeighborModel | None = None):
    """Observed nearest-neighbor spacing density with a fraction phi identified.

    Geometric mixture over the k-th neighbor densities of the complete
    spectrum evaluated at s/phi; the truncated sum is renormalized to unit
    mass.  ``model`` must be built for the same xi; with phi = 1 the
    complete-spectrum density is returned and no model is needed.
    """
    _check_xi(xi)
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    s_in = np.asarray(s, float)
    if np.any(s_in < 0):
        raise ValueError("spacings must be non-negative")
    if phi == 1.0:
        return crossover_spacing_pdf(s, xi)
    if model is None:
        model = build_nth_neighbor_model(xi)
    if abs(model.xi - xi) > 1e-12:
        raise ValueError(f"model was built for xi={model.xi}, not xi={xi}")

    key = (round(xi, 12), round(phi, 12), id(model))
    with _LOCK:
        norm = _NORM_CACHE.get(key)
    if norm is None:
        n_max = _missing_terms(phi)
        s_top = phi * (n_max + 2.0 + 10.0)
        q, w = gauss_panels(0.0, s_top, 0.25, 12)
        norm = float(_missing_pdf_raw(q, xi, phi, model) @ w)
        with _LOCK:
            _NORM_CACHE[key] = norm
    out = _missing_pdf_raw(s_in, xi, phi, model) / norm
    return out if s_in.ndim else float(out)


def missing_sigma2(L, xi: float, phi: float):
    """Number variance of the incomplete spectrum."""
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    L = np.asarray(L, float)
    out = (1.0 - phi) * L + phi**2 * sigma2_theory(L / phi, xi)
    return out if L.ndim else float(out)


def missing_delta3(L, xi: float, phi: float):
    """Spectral rigidity of the incomplete spectrum."""
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    L = np.asarray(L, float)
    out = (1.0 - phi) * L / 15.0 + phi**2 * delta3_theory(L / phi, xi)
    return out if L.ndim else float(out)


def missing_power_spectrum(t, xi: float, phi: float):
    """Ensemble-averaged power spectrum of the deviation series, t in (0, 1).

    Symmetric under t <-> 1-t for phi = 1; diverges like 1/t^2 toward the
    endpoints, which are rejected as singular.
    """
    _check_xi(xi)
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must lie in (0, 1]")
    t_in = np.asarray(t, float)
    if np.any(t_in <= 0.0) or np.any(t_in >= 1.0):
        raise ValueError("t must lie strictly inside (0, 1); endpoints are singular")
    t1 = np.atleast_1d(t_in)
    k_lo = np.atleast_1d(form_factor_K(phi * t1, xi))
    k_hi = np.atleast_1d(form_factor_K(phi * (1.0 - t1), xi))
    out = (phi / (4.0 * np.pi**2) * ((k_lo - 1.0) / t1**2
                                     + (k_hi - 1.0) / (1.0 - t1)**2)
           + 1.0 / (4.0 * np.sin(np.pi * t1)**2) - phi**2 / 12.0)
    return out.reshape(t_in.shape) if t_in.ndim else float(out[0])


# ---------------------------------------------------------------------------
# Curve sampling for the CLI and the figure scripts
# ---------------------------------------------------------------------------

def theory_curve(curve: str, grid, xi: float, phi: float = 1.0,
                 model: NthNeighborModel | None = None) -> StatCurve:
    """Sample a named theory statistic on a grid into a StatCurve."""
    grid = np.asarray(grid, float)
    meta = {"xi": xi, "phi": phi}
    if curve == "ps":
        y = missing_spacing_pdf(grid, xi, phi, model) if phi < 1.0 \
            else crossover_spacing_pdf(grid, xi)
        return StatCurve(kind="theory_nn_pdf", x=grid, y=y, meta=meta)
    if curve == "sigma2":
        return StatCurve(kind="theory_sigma2", x=grid,
                         y=missing_sigma2(grid, xi, phi), meta=meta)
    if curve == "delta3":
        return StatCurve(kind="theory_delta3", x=grid,
                         y=missing_delta3(grid, xi, phi), meta=meta)
    if curve == "power":
        return StatCurve(kind="theory_power_spectrum", x=grid,
                         y=missing_power_spectrum(grid, xi, phi), meta=meta)
    if curve == "y2":
        return StatCurve(kind="theory_y2", x=grid, y=cluster_Y2(grid, xi), meta=meta)
    if curve == "K":
        return StatCurve(kind="theory_form_factor", x=grid,
                         y=form_factor_K(grid, xi), meta=meta)
    raise ValueError(f"unknown theory curve {curve!r}")
