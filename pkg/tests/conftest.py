import pytest

# Reference transition-layer locations over the (v, delta) grid, used across
# the suite. delta=0 cells are exact-zero limits (any value <= 1e-6 passes).
TABLE1 = {
    (0.1, 1e-1): 0.72322525,
    (0.1, 1e-2): 0.47492741,
    (0.1, 1e-3): 0.24142361,
    (0.1, 1e-4): 0.05266962,
    (0.1, 1e-5): 0.00550856,
    (0.1, 0.0): 0.0,
    (0.05, 1e-1): 0.86161262,
    (0.05, 1e-2): 0.73746015,
    (0.05, 1e-3): 0.62030957,
    (0.05, 1e-4): 0.50487264,
    (0.05, 1e-5): 0.38970223,
    (0.05, 0.0): 0.0,
}

# Reference large-sample moments at (v=0.1, eps=0.1), uniform draws, n=1e5.
V01_EPS01 = {
    "z_mean": 0.614420266306,
    "z_std": 0.105011650866,
    "d_mean": 0.0499427947961,
    "d_std": 0.0289104773543,
    "n": 100000,
}


@pytest.fixture(scope="session")
def table1():
    return TABLE1


@pytest.fixture(scope="session")
def v01_eps01_targets():
    return dict(V01_EPS01)
