"""Interaction kernels and their convolutions."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflectmv.kernels import CallableKernel, CubicKernel, ZeroKernel


def _direct(kernel, x, y):
    """Oracle: explicit double loop."""
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(y.shape[0]):
            out[i] += kernel(x[i] - y[j])
    return out / y.shape[0]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_pairwise_and_moment_paths_match_direct_sum(d, rng):
    k = CubicKernel(0.3, 0.7)
    x = rng.normal(size=(17, d))
    y = rng.normal(size=(23, d))
    ref = _direct(k, x, y)
    np.testing.assert_allclose(k.convolve(x, y, method="pairwise"), ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(k.convolve(x, y, method="moments"), ref, rtol=1e-10, atol=1e-10)


def test_self_convolution_matches_direct_sum(rng):
    k = CallableKernel(lambda z: -np.sin(z))
    x = rng.normal(size=(700, 2))  # spans several tiles
    np.testing.assert_allclose(k.self_convolve(x), _direct(k, x, x), rtol=1e-11, atol=1e-12)


@given(st.integers(1, 8))
def test_self_convolution_bitwise_independent_of_workers(workers):
    x = np.random.default_rng(3).normal(size=(600, 2))
    k = CubicKernel(0.0, 1.0)
    base = k.self_convolve(x, method="pairwise", workers=1)
    np.testing.assert_array_equal(k.self_convolve(x, method="pairwise", workers=workers), base)


def test_cloud_example_sum():
    # cloud {0, 1, 2}, f = -x^3, particle 0: (f(-1) + f(-2)) / 3 = 3
    k = CubicKernel(0.0, 1.0)
    x = np.array([[0.0], [1.0], [2.0]])
    assert k.convolve(x[:1], x, method="pairwise")[0, 0] == pytest.approx(3.0, abs=1e-15)
    assert k.convolve(x[:1], x, method="moments")[0, 0] == pytest.approx(3.0, abs=1e-14)


def test_identical_cloud_gives_zero():
    k = CubicKernel(1.0, 1.0)
    x = np.full((5, 2), 0.7)
    np.testing.assert_array_equal(k.self_convolve(x, method="pairwise"), 0.0)


def test_symmetric_pair():
    k = CubicKernel(0.0, 0.5)
    a = 0.8
    x = np.array([[-a], [a]])
    np.testing.assert_allclose(k.convolve(x[1:], x, method="pairwise")[0], 0.5 * k(np.array([2 * a])))


@given(arrays(float, (4, 2), elements=st.floats(-10, 10)))
def test_cubic_kernel_is_odd_and_monotone(z):
    k = CubicKernel(0.2, 0.5)
    np.testing.assert_array_equal(k(-z), -k(z))
    w = np.roll(z, 1, axis=0)
    inner = np.sum((z - w) * (k(z) - k(w)), axis=1)
    assert np.all(inner <= 1e-9 * (1 + np.abs(z).max() ** 4))


def test_cubic_potential_gradient(rng):
    k = CubicKernel(0.3, 0.7)
    z = rng.normal(size=(20, 2))
    h = 1e-6
    grad = np.stack(
        [(k.potential(z + h * e) - k.potential(z - h * e)) / (2 * h) for e in np.eye(2)], axis=1
    )
    np.testing.assert_allclose(-grad, k(z), rtol=1e-6, atol=1e-8)


def test_summary_reproduces_convolution(rng):
    k = CubicKernel(0.0, 1.0)
    y = rng.normal(size=(1000, 2))
    x = rng.normal(size=(10, 2))
    np.testing.assert_allclose(k.convolve_summary(x, k.summarize(y)), k.convolve(x, y, method="pairwise"),
                               rtol=1e-10, atol=1e-10)
    c = CallableKernel(lambda z: -z)
    np.testing.assert_allclose(c.convolve_summary(x, c.summarize(y)), c.convolve(x, y), rtol=1e-12)


def test_zero_kernel():
    k = ZeroKernel()
    x = np.ones((3, 2))
    assert k.is_zero
    np.testing.assert_array_equal(k.convolve(x, x), 0.0)
    np.testing.assert_array_equal(k.self_convolve(x), 0.0)
