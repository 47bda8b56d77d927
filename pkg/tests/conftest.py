"""Shared helpers for the test suite."""

import numpy as np
import pytest

from funcscan.fdata import FunctionalDataset
from funcscan.geometry import SiteGrid, build_site_grid, enumerate_candidates

trapz = getattr(np, "trapezoid", None) or np.trapz


def random_grid(rng, n, span=10.0):
    """A random scatter of n sites with distinct pairwise distances."""
    xy = rng.uniform(0.0, span, size=(n, 2))
    return build_site_grid(
        (f"s{i:03d}", xy[i, 0], xy[i, 1]) for i in range(n)
    )


def random_dataset(rng, n, n_times, site_ids=None):
    """Smooth-ish random curves on [0, 1]; no structure, full variance."""
    t = np.linspace(0.0, 1.0, n_times)
    freq = rng.uniform(0.5, 3.0, size=(n, 1))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n, 1))
    curves = (
        rng.normal(size=(n, 1)) * np.sin(2 * np.pi * freq * t + phase)
        + rng.normal(scale=0.5, size=(n, n_times))
    )
    ids = tuple(f"s{i:03d}" for i in range(n)) if site_ids is None else tuple(site_ids)
    return FunctionalDataset(curves=curves, time_grid=t, site_ids=ids)


def random_case(seed, n=None, n_times=None):
    """(grid, dataset, candidates) for one random scan problem."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 16)) if n is None else n
    n_times = int(rng.integers(10, 30)) if n_times is None else n_times
    grid = random_grid(rng, n)
    ds = random_dataset(rng, n, n_times, site_ids=grid.ids)
    return grid, ds, enumerate_candidates(grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture
def small_case():
    return random_case(101, n=12, n_times=17)
