"""Model coefficients, catalog and assumption probes."""
from __future__ import annotations

import numpy as np
import pytest

from reflectmv.geometry import Box
from reflectmv.kernels import CallableKernel, CubicKernel
from reflectmv.model import (
    ExitModel,
    ModelCoefficients,
    builtin_exit_models,
    builtin_models,
    get_model,
    model_from_dict,
    probe_assumptions,
    probe_exit_model,
)


def _cubic_model(sign):
    return ModelCoefficients(
        name="cubic",
        dimension=1,
        drift=lambda t, X: -2.0 * (X - 1.0),
        kernel=CallableKernel(lambda z: sign * z**3),
        L=2.0,
        C=1.5,  # |z^3 - w^3| <= 1.5 |z - w| (z^2 + w^2)
        r=3.0,
        default_domain=Box([-2.0], [4.0]),
    )


@pytest.mark.parametrize("name", sorted(builtin_models()))
def test_catalog_models_pass_their_probes(name):
    model = get_model(name)
    report = probe_assumptions(model, model.default_domain, n_probes=4000, seed=1)
    assert report.passed, report.summary()


@pytest.mark.parametrize("name", sorted(builtin_exit_models()))
def test_exit_models_pass_their_probes(name):
    em = builtin_exit_models()[name]
    report = probe_exit_model(em, n_probes=4000, seed=2)
    assert report.passed, report.summary()


def test_attractive_cubic_is_odd_and_monotone():
    model = _cubic_model(-1.0)
    report = probe_exit_model(ExitModel(model, [1.0], 2.0), n_probes=10_000)
    assert report.passed, report.summary()
    assert report["f_odd"].passed
    assert report["f_monotone"].passed
    assert report["f_zero"].margin == 0.0


def test_repulsive_cubic_violates_monotonicity():
    report = probe_exit_model(ExitModel(_cubic_model(+1.0), [1.0], 2.0), n_probes=10_000)
    probe = report["f_monotone"]
    assert not probe.passed
    assert probe.status == "VIOLATED"
    # margins are bound minus observed: at z=1, w=0 the inner product is +1
    z, w = np.array([[1.0]]), np.array([[0.0]])
    f = CallableKernel(lambda v: v**3)
    assert float(-np.sum((z - w) * (f(z) - f(w)))) == -1.0


def test_linear_drift_saturates_contraction_probe():
    report = probe_exit_model(builtin_exit_models()["ou-cubic-1d"], n_probes=10_000)
    probe = report["b_contraction"]
    assert probe.passed
    assert abs(probe.margin) <= 1e-12


def test_growth_order_matches_catalog():
    for model in builtin_models().values():
        if model.kernel.is_zero:
            continue
        report = probe_assumptions(model, model.default_domain, n_probes=500)
        assert report["growth_order"].passed


def test_wrong_growth_order_is_flagged():
    model = ModelCoefficients("m", 1, lambda t, X: -X, kernel=CubicKernel(0.0, 1.0), r=2.0,
                              default_domain=Box([-1.0], [1.0]))
    assert not probe_assumptions(model, n_probes=500)["growth_order"].passed


def test_potential_gradients_checked():
    bad = ModelCoefficients("bad", 1, lambda t, X: -X, B_potential=lambda X: X[:, 0] ** 2,
                            default_domain=Box([-1.0], [1.0]))
    assert not probe_assumptions(bad, n_probes=500)["B_gradient"].passed


def test_sigma_matrix_shapes():
    model = ModelCoefficients("m", 2, lambda t, X: 0 * X, sigma=np.array([[1.0], [2.0]]))
    assert model.noise_dimension == 1
    X = np.zeros((3, 2))
    np.testing.assert_array_equal(model.diffuse(0.0, X, np.ones((3, 1))), [[1.0, 2.0]] * 3)
    with pytest.raises(ValueError):
        ModelCoefficients("m", 2, lambda t, X: X, sigma=np.ones((3, 3)))


def test_inline_model_matches_catalog(rng):
    spec = {
        "name": "inline",
        "dimension": 1,
        "b": ["-2*(x1 - 1)"],
        "B": "-(x1 - 1)**2",
        "f": ["-0.5*x1**3"],
        "F": "x1**4/8",
        "L": 2,
        "C": 1,
        "r": 3,
        "x0": [3.0],
        "domain": {"kind": "box", "params": {"lo": [-2.0], "hi": [4.0]}},
    }
    inline = model_from_dict(spec)
    ref = get_model("ou-cubic-1d")
    X = rng.uniform(-2, 4, size=(20, 1))
    np.testing.assert_allclose(inline.b(0.0, X), ref.b(0.0, X))
    np.testing.assert_allclose(inline.f(X), ref.f(X))
    np.testing.assert_allclose(inline.F(X), ref.F(X))
    assert probe_assumptions(inline, n_probes=1000).passed


def test_inline_model_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        model_from_dict({"dimension": 1, "drift": ["x1"]})


def test_invalid_parameters():
    with pytest.raises(ValueError):
        ModelCoefficients("m", 1, lambda t, X: X, r=1.0)
    with pytest.raises(ValueError):
        ModelCoefficients("m", 1, lambda t, X: X, holder_beta=0.0)
    with pytest.raises(KeyError):
        get_model("nope")
