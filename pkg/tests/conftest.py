import numpy as np
import pytest

from bqlim.spectral import Grid, GridField, SpectralField, dealias, to_spectral


def gronwall_oracle_batch(n_draws, seed, n_segments=16, nodes_per_segment=2048):
    """Random piecewise-constant linear ODEs y' = A y + B solved by RK4.

    Knots are duplicated in the time grid (left/right coefficient values),
    which makes the trapezoid integral of the step coefficients exact.
    Returns (times, A, B, y0, y) with draw-major 2-D coefficient arrays and
    the RK4 solution on the same grid (effectively exact: constant
    coefficients per step).
    """
    rng = np.random.default_rng(seed)
    knots = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n_segments - 1)), [1.0]])
    seg_a = rng.uniform(0.0, 0.8, size=(n_draws, n_segments))
    seg_b = rng.uniform(0.0, 0.8, size=(n_draws, n_segments))
    y0 = rng.uniform(0.0, 2.0, size=n_draws)

    times, seg_idx = [], []
    for j in range(n_segments):
        seg_nodes = np.linspace(knots[j], knots[j + 1], nodes_per_segment + 1)
        if j > 0:
            times.append(np.array([knots[j]]))  # duplicated knot, right value
            seg_idx.append(np.array([j]))
        times.append(seg_nodes)
        seg_idx.append(np.full(len(seg_nodes), j))
    times = np.concatenate(times)
    seg_idx = np.concatenate(seg_idx)
    A = seg_a[:, seg_idx]
    B = seg_b[:, seg_idx]

    y = np.empty((n_draws, len(times)))
    y[:, 0] = y0
    cur = y0.copy()
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        if h > 0.0:
            a, b = A[:, i], B[:, i]
            k1 = a * cur + b
            k2 = a * (cur + 0.5 * h * k1) + b
            k3 = a * (cur + 0.5 * h * k2) + b
            k4 = a * (cur + h * k3) + b
            cur = cur + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        y[:, i + 1] = cur
    return times, A, B, y0, y


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_grid_field(grid: Grid, rng, scale=1.0) -> GridField:
    return GridField(scale * rng.standard_normal((grid.n, grid.n)), grid)


def random_spectral_field(grid: Grid, rng, scale=1.0, band_limited=True) -> SpectralField:
    F = to_spectral(random_grid_field(grid, rng, scale))
    return dealias(F) if band_limited else F


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)
