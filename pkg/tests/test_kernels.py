"""The two kernel lanes (jitted loops vs vectorized numpy) must agree
exactly enough to be interchangeable; the loop implementations are called
raw here so both lanes are covered regardless of the environment flag."""

import numpy as np
import pytest
from scipy.integrate import cumulative_simpson as scipy_cumsimp

from curvlab import _kernels as K


@pytest.fixture
def data(rng):
    n = 5
    G = rng.normal(size=(n, n))
    G = G + G.T + 6 * np.eye(n)
    return {
        "G": G,
        "gamma2": rng.normal(size=(n, n, n)),
        "dgamma2": rng.normal(size=(n, n, n, n)),
        "T4": rng.normal(size=(n, n, n, n)),
        "dT4": rng.normal(size=(n, n, n, n, n)),
        "T5": rng.normal(size=(n, n, n, n, n)),
        "dT5": rng.normal(size=(n, n, n, n, n, n)),
    }


def test_backend_reports_a_lane():
    assert K.backend() in ("numba", "numpy")


def test_riemann_assemble_lanes_agree(data):
    np_fn, loop_fn = K.KERNEL_PAIRS["riemann_assemble"]
    a = np_fn(data["G"], data["gamma2"], data["dgamma2"])
    b = loop_fn(data["G"], data["gamma2"], data["dgamma2"])
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_covariant_derivative_lanes_agree(data):
    np4, loop4 = K.KERNEL_PAIRS["covariant_derivative4"]
    np.testing.assert_allclose(np4(data["dT4"], data["gamma2"], data["T4"]),
                               loop4(data["dT4"], data["gamma2"], data["T4"]),
                               atol=1e-12)
    np5, loop5 = K.KERNEL_PAIRS["covariant_derivative5"]
    np.testing.assert_allclose(np5(data["dT5"], data["gamma2"], data["T5"]),
                               loop5(data["dT5"], data["gamma2"], data["T5"]),
                               atol=1e-12)


def test_cumulative_simpson_lanes_and_scipy(rng):
    np_fn, loop_fn = K.KERNEL_PAIRS["cumulative_simpson"]
    y = rng.normal(size=65)
    dx = 0.37
    a = np_fn(y, dx)
    b = loop_fn(y.copy(), dx)
    np.testing.assert_allclose(a, b, atol=1e-14)
    ref = scipy_cumsimp(y, dx=dx, initial=0.0)
    np.testing.assert_allclose(a, ref, atol=1e-12)


def test_cumulative_simpson_cubic_accuracy():
    # full panels are cubic-exact; the half-panel correction at odd nodes is a
    # quadratic fit, so those carry a local O(h^4) error that refinement kills
    ts = np.linspace(0.0, 2.0, 17)
    y = 4 * ts ** 3 - 3 * ts ** 2 + 2 * ts - 1
    exact = ts ** 4 - ts ** 3 + ts ** 2 - ts
    out = K.cumulative_simpson(y, ts[1] - ts[0])
    np.testing.assert_allclose(out[::2], exact[::2], atol=1e-12)
    h = ts[1] - ts[0]
    assert np.max(np.abs(out[1::2] - exact[1::2])) < 2 * h ** 4


def test_cumulative_simpson_2d_columns(rng):
    y = rng.normal(size=(33, 3))
    dx = 0.11
    np_fn, _ = K.KERNEL_PAIRS["cumulative_simpson"]
    out = np_fn(y, dx)
    for col in range(3):
        np.testing.assert_allclose(out[:, col], np_fn(y[:, col], dx), atol=1e-14)


def test_integrand_kernel_lanes_agree(rng):
    n = 16
    p = s = r = 3
    np1, loop1 = K.KERNEL_PAIRS["integrand_family1"]
    vx = rng.normal(size=(n, p))
    hess = rng.normal(size=(n, p, p))
    grad = rng.normal(size=(n, p))
    np.testing.assert_allclose(np1(vx, hess, grad), loop1(vx, hess, grad),
                               atol=1e-13)

    np2, loop2 = K.KERNEL_PAIRS["integrand_family2"]
    args = [rng.normal(size=(n, s)) for _ in range(5)]
    np.testing.assert_allclose(np2(*args), loop2(*args), atol=1e-13)

    np3, loop3 = K.KERNEL_PAIRS["integrand_family3"]
    args = [rng.normal(size=(n, r)) for _ in range(4)]
    args += [rng.normal(size=n), rng.normal(size=n)]
    np.testing.assert_allclose(np3(*args), loop3(*args), atol=1e-13)


def test_selected_lane_matches_numpy_reference(data):
    # whatever lane is active, public kernels must equal the numpy reference
    ref = K.KERNEL_PAIRS["riemann_assemble"][0](
        data["G"], data["gamma2"], data["dgamma2"])
    np.testing.assert_allclose(
        K.riemann_assemble(data["G"], data["gamma2"], data["dgamma2"]),
        ref, atol=1e-12)
