import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsefront import _kernels_py as py
from pulsefront import kernels

ext = pytest.importorskip("pulsefront._kernels_ext")


def test_backend_selected():
    assert kernels.BACKEND == "cython"


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), shape=st.sampled_from([(7,), (5, 6), (3, 4, 2)]))
def test_reaction_backends_agree(seed, shape):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 1.5, shape)
    theta = rng.uniform(0.1, 0.9, shape)
    for a, b in zip(py.cubic_reaction(theta, u, 0.1, 0.05), ext.cubic_reaction(theta, u, 0.1, 0.05)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)
    # fuu divides by width^2 in the blend, so rounding differences grow
    np.testing.assert_allclose(py.cubic_reaction_fuu(theta, u, 0.1, 0.05),
                               ext.cubic_reaction_fuu(theta, u, 0.1, 0.05), rtol=1e-11, atol=1e-11)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(3, 40), m=st.integers(1, 5))
def test_tridiagonal_backends_agree_and_solve(seed, n, m):
    rng = np.random.default_rng(seed)
    sub = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    sup = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    diag = 4.0 + np.abs(sub) + np.abs(sup) + 1j * rng.normal(size=(n, m))
    rhs = rng.normal(size=(n, m)) + 0j
    x_py = py.tridiag_solve(*py.tridiag_factor(sub, diag, sup), sup, rhs)
    x_ext = ext.tridiag_solve(*ext.tridiag_factor(sub, diag, sup), sup, rhs)
    np.testing.assert_allclose(x_py, x_ext, rtol=1e-12, atol=1e-12)
    k = 0
    A = np.diag(diag[:, k]) + np.diag(sub[1:, k], -1) + np.diag(sup[:-1, k], 1)
    np.testing.assert_allclose(A @ x_py[:, k], rhs[:, k], atol=1e-10)


def test_ray_crossings_backends_agree():
    h = 0.1
    x = np.arange(-50, 51) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = 1.0 / (1.0 + np.exp(np.hypot(X, Y) - 3.0))
    ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    a = py.ray_crossings(u, (-5.0, -5.0), h, ang, 0.05, 120, [0.5, 0.9])
    b = ext.ray_crossings(u, (-5.0, -5.0), h, ang, 0.05, 120, [0.5, 0.9])
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert np.all(np.abs(a[:, 0] - 3.0) < 0.01)
