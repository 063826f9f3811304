"""Shared fixtures: cached matrix ensembles and synthetic spectra."""

import os
from functools import lru_cache

import numpy as np
import pytest

from levelstats import BilliardGeometry, EnsembleConfig, UnfoldedSpectrum, \
    generate_ensemble

FULL_PROFILE = os.environ.get("LEVELSTATS_ACCEPTANCE", "ci").lower() == "full"


@lru_cache(maxsize=None)
def cached_ensemble(xi, phi=1.0, n=300, count=80, seed=101, bulk=0.6):
    config = EnsembleConfig(n=n, count=count, xi=xi, phi=phi,
                            bulk_fraction=bulk, seed=seed)
    return tuple(generate_ensemble(config, workers=4))


def poisson_spectra(count, length, seed=0):
    """Spectra with independent unit-mean exponential spacings."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        values = np.cumsum(rng.exponential(1.0, size=length))
        out.append(UnfoldedSpectrum(values=values, provenance="polynomial",
                                    source_count=length))
    return out


def unit_lattice(length, offset=0.25):
    return UnfoldedSpectrum(values=np.arange(length) + offset,
                            provenance="polynomial", source_count=length)


@pytest.fixture(scope="session")
def goe_ensemble():
    return cached_ensemble(xi=0.0)


@pytest.fixture(scope="session")
def mid_ensemble():
    return cached_ensemble(xi=0.35)


@pytest.fixture(scope="session")
def gue_ensemble():
    return cached_ensemble(xi=1.0)


@pytest.fixture(scope="session")
def paper_geometry():
    # quarter-bowtie cavity: area 1828.5 cm^2, perimeter 202.3 cm
    return BilliardGeometry(area=0.18285, perimeter=2.023)


@pytest.fixture(scope="session")
def reduced_model_config():
    def factory(xi):
        return EnsembleConfig(n=300, count=150, xi=xi, phi=1.0, seed=9090)
    return factory
