import numpy as np
import pytest

from densflow import Density, Grid, TangentDensity


@pytest.fixture
def grid64():
    return Grid(64)


def band_limited(grid, rng, kmax=4, amp=0.3):
    """Random real band-limited field, modes |k_i| <= kmax."""
    f = np.zeros(grid.shape)
    coords = grid.coords()
    for _ in range(2 * kmax + 2):
        kv = rng.integers(-kmax, kmax + 1, size=grid.dim)
        if not np.any(kv):
            continue
        arg = sum(k * c for k, c in zip(kv, coords))
        f += rng.normal(0.0, amp) * np.cos(arg + rng.uniform(0, 2 * np.pi))
    return f


def random_density(grid, rng, dev=0.3, kmax=3):
    f = band_limited(grid, rng, kmax=kmax, amp=dev / 2)
    f = np.clip(f, -0.7, 0.7)
    return Density.normalized(grid, 1.0 + f)


def random_tangent(grid, rng, kmax=4, amp=0.3):
    return TangentDensity.projected(grid, band_limited(grid, rng, kmax, amp))


def rel_err(a, b, floor=1e-30):
    return abs(a - b) / max(abs(a), abs(b), floor)
