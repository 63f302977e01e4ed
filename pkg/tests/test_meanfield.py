"""Decoupled construction: stored fields, probe distances and the fixed point."""
from __future__ import annotations

import numpy as np
import pytest

from reflectmv.geometry import Box
from reflectmv.kernels import CallableKernel, CubicKernel
from reflectmv.meanfield import (
    ConvergenceError,
    GFunction,
    fixed_point,
    gamma_apply,
    gdistance,
    gnorm,
    one_sided_lipschitz_margin,
    probe_set,
)
from reflectmv.model import get_model


def test_empirical_field_matches_direct_average(rng):
    k = CubicKernel(0.3, 0.5)
    clouds = [rng.normal(size=(500, 2)), rng.normal(size=(500, 2)) + 1.0]
    g = GFunction.empirical([0.0, 1.0], clouds, k)
    x = rng.normal(size=(7, 2))
    for t, c in ((0.1, clouds[0]), (0.9, clouds[1])):
        direct = np.array([k(xi[None, :] - c).mean(axis=0) for xi in x])
        np.testing.assert_allclose(g(t, x), direct, rtol=1e-12, atol=1e-12)


def test_nearest_time_lookup():
    k = CallableKernel(lambda z: -z)
    g = GFunction.empirical([0.0, 0.5, 1.0], [np.full((3, 1), v) for v in (0.0, 1.0, 2.0)], k)
    assert g.time_index(0.24) == 0
    assert g.time_index(0.26) == 1
    assert g.time_index(5.0) == 2
    np.testing.assert_allclose(g(0.7, np.zeros((1, 1))), [[1.0]])


def test_thinning_for_kernels_without_moments(rng):
    k = CallableKernel(lambda z: -z)
    c = rng.normal(size=(5000, 1))
    g = GFunction.empirical([0.0], [c], k, m_store=100)
    assert g.clouds[0].shape[0] <= 100
    # strided subsample: deterministic
    np.testing.assert_array_equal(g.clouds[0], c[::50])


def test_zero_and_explicit_fields():
    z = GFunction.zero(2)
    np.testing.assert_array_equal(z(0.3, np.ones((4, 2))), 0.0)
    e = GFunction.explicit(lambda t, X: t * X, 2)
    np.testing.assert_allclose(e(2.0, np.ones((1, 2))), [[2.0, 2.0]])
    with pytest.raises(ValueError):
        z.time_index(0.0)


def test_nonfinite_field_raises():
    g = GFunction.explicit(lambda t, X: X / 0.0, 1)
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(FloatingPointError):
        g(0.0, np.zeros((1, 1)))


def test_probe_set_is_deterministic_and_inside():
    dom = Box([-2.0], [4.0])
    a = probe_set(dom, [0.0, 0.5, 1.0], anchors=[[3.0]])
    b = probe_set(dom, [0.0, 0.5, 1.0], anchors=[[3.0]])
    np.testing.assert_array_equal(a.points, b.points)
    assert np.all(dom.contains_points(a.points, 0.0))
    assert len(a) == 3 * a.points.shape[0]
    assert np.any(np.all(a.points == [3.0], axis=1))


def test_probe_set_unbounded_domain_uses_window():
    from reflectmv.geometry import Orthant

    p = probe_set(Orthant(2), [0.0], n_quasi=16, window=5.0)
    assert np.all(np.isfinite(p.points))
    assert np.all(p.points >= 0.0)


def test_gnorm_weighting():
    g = GFunction.explicit(lambda t, X: np.ones_like(X), 1, r=2.0, x0=[0.0])
    probes = [(0.0, np.array([[0.0], [1.0], [3.0]]))]
    # |g| = 1 everywhere, weight 1 + |x|^2 is smallest at x = 0
    assert gnorm(g, probes) == pytest.approx(1.0)
    h = GFunction.explicit(lambda t, X: X ** 3, 1, r=2.0, x0=[0.0])
    assert gnorm(h, probes) == pytest.approx(27.0 / 10.0)
    assert gdistance(h, h, probes) == 0.0
    assert gdistance(g, GFunction.zero(1), probes) == pytest.approx(1.0)


def test_one_sided_lipschitz_margin():
    probes = [(0.0, np.linspace(-1, 1, 9)[:, None])]
    g = GFunction.explicit(lambda t, X: -X ** 3, 1)
    assert one_sided_lipschitz_margin(g, probes, 0.0) >= 0.0
    h = GFunction.explicit(lambda t, X: 2.0 * X, 1)
    assert one_sided_lipschitz_margin(h, probes, 1.0) < 0.0


def test_gamma_is_deterministic_under_common_random_numbers():
    model = get_model("ou-cubic-1d")
    dom = model.default_domain
    g0 = GFunction.zero(1)
    a = gamma_apply(g0, model, dom, 256, 1e-2, 0.5, seed=11)
    b = gamma_apply(g0, model, dom, 256, 1e-2, 0.5, seed=11)
    c = gamma_apply(g0, model, dom, 256, 1e-2, 0.5, seed=12)
    probes = probe_set(dom, [0.0, 0.5, 1.0], anchors=[model.x0])
    assert gdistance(a, b, probes) == 0.0
    assert gdistance(a, c, probes) > 0.0
    assert a.audit.clean


def test_noiseless_fixed_point_tracks_the_ode():
    # with no noise every copy follows x' = -2(x - 1) from 3, so the stored law
    # is a point mass at 1 + 2 exp(-2t) and g(t, x) = -(x - m(t))^3 / 2
    model = get_model("ou-cubic-1d")
    res = fixed_point(model, model.default_domain, 8, 1e-3, 0.0, 1e-10, 5, seed=0)
    assert res.converged
    x = np.linspace(-2, 4, 13)[:, None]
    for t in (0.0, 0.25, 1.0):
        m = 1.0 + 2.0 * np.exp(-2.0 * t)
        np.testing.assert_allclose(res.g(t, x)[:, 0], -0.5 * (x[:, 0] - m) ** 3, rtol=5e-3, atol=5e-3)


def test_no_interaction_converges_in_one_iteration():
    model = get_model("ou-1d")
    res = fixed_point(model, model.default_domain, 64, 1e-2, 1.0, 1e-12, 3, seed=0)
    assert res.converged and len(res.history) == 1 and res.distances[0] == 0.0


def test_fixed_point_contracts_on_catalog_model():
    model = get_model("ou-cubic-1d")
    res = fixed_point(model, model.default_domain, 1024, 1e-2, 0.1, 1e-2, 20, seed=3)
    assert res.converged
    d = res.distances
    assert d[-1] < 1e-2
    assert d[-1] < d[0]
    # the iteration is a contraction: the tail is decreasing
    assert all(b <= a for a, b in zip(d[1:], d[2:]))
    assert res.to_dict()["converged"] is True


def test_convergence_error_carries_history():
    model = get_model("ou-cubic-1d")
    with pytest.raises(ConvergenceError) as info:
        fixed_point(model, model.default_domain, 64, 1e-2, 0.1, 1e-14, 2, seed=0)
    assert len(info.value.history) == 2
    assert isinstance(info.value.last, GFunction)
    res = fixed_point(model, model.default_domain, 64, 1e-2, 0.1, 1e-14, 2, seed=0, raise_on_failure=False)
    assert not res.converged


def test_fixed_point_argument_validation():
    model = get_model("ou-cubic-1d")
    with pytest.raises(ValueError):
        fixed_point(model, model.default_domain, 64, 1e-2, 0.1, 0.0, 2, seed=0)
    with pytest.raises(ValueError):
        fixed_point(model, model.default_domain, 64, 1e-2, 0.1, 1e-2, 0, seed=0)
    with pytest.raises(ValueError):
        gamma_apply(GFunction.zero(1), model, model.default_domain, 1, 1e-2, 0.1, seed=0)
