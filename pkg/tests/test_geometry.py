"""Convex domains, projections and normals."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflectmv.geometry import (
    Ball,
    Box,
    DimensionError,
    HalfSpace,
    Orthant,
    Polyhedron,
    contains,
    domain_from_dict,
    domain_from_json,
    outward_normal,
    project,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def _domains():
    return [
        Box([0.0, 0.0], [1.0, 1.0]),
        Box([-np.inf, 0.0], [2.0, np.inf]),
        Orthant(2),
        HalfSpace(np.array([1.0, 2.0]), 0.5),
        Ball([0.5, -1.0], 2.0),
        Polyhedron(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.array([1.0, 1.0, 1.0])),
        Polyhedron(np.array([[1.0, 1.0], [-1.0, 1.0], [0.0, -1.0], [1.0, -3.0]]), np.array([2.0, 2.0, 0.5, 4.0])),
    ]


DOMAINS = _domains()


# -- specified examples -------------------------------------------------------

def test_contains_examples():
    assert contains(Box([0, 0], [1, 1]), [0.5, 0.5])
    assert not contains(HalfSpace(np.array([1.0, 0.0]), 1.0), [2.0, 0.0])
    assert contains(Ball([0.0, 0.0], 1.0), [1.0, 0.0], 0.0)


def test_project_examples():
    step = project(HalfSpace(np.array([1.0, 0.0]), 1.0), [2.0, 0.0])
    np.testing.assert_array_equal(step.projected_point, [1.0, 0.0])
    np.testing.assert_array_equal(step.k_increment, [1.0, 0.0])
    step = project(Orthant(2), [-1.0, -2.0])
    np.testing.assert_array_equal(step.projected_point, [0.0, 0.0])
    np.testing.assert_array_equal(step.k_increment, [-1.0, -2.0])
    step = project(Ball([0.0, 0.0], 1.0), [3.0, 4.0])
    np.testing.assert_allclose(step.projected_point, [0.6, 0.8], atol=1e-15)
    assert step.k_magnitude_increment == pytest.approx(4.0, abs=1e-14)


def test_ball_projection_matches_boundary_grid_oracle():
    # independent oracle: nearest of a dense boundary grid
    th = np.linspace(0, 2 * math.pi, 200_001)
    grid = np.stack([np.cos(th), np.sin(th)], axis=1)
    x = np.array([3.0, 4.0])
    best = grid[np.argmin(np.linalg.norm(grid - x, axis=1))]
    np.testing.assert_allclose(project(Ball([0.0, 0.0], 1.0), x).projected_point, best, atol=1e-4)


def test_outward_normal_examples(rng):
    box = Box([0.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(outward_normal(box, [1.0, 0.5]), [1.0, 0.0])
    n = outward_normal(box, [1.0, 1.0])
    np.testing.assert_allclose(n, [1 / math.sqrt(2), 1 / math.sqrt(2)])
    y = rng.uniform(0, 1, size=(10_000, 2))
    assert np.all((y - [1.0, 1.0]) @ n <= 1e-15)
    np.testing.assert_allclose(outward_normal(Ball([0.0, 0.0], 2.0), [0.0, 2.0]), [0.0, 1.0])


def test_outward_normal_errors():
    box = Box([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="interior"):
        outward_normal(box, [0.5, 0.5])
    with pytest.raises(ValueError, match="outside"):
        outward_normal(box, [2.0, 0.5])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        contains(Box([0, 0], [1, 1]), [0.5, 0.5, 0.5])


def test_invalid_domains():
    with pytest.raises(ValueError):
        Box([0.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)
    with pytest.raises(ValueError, match="empty interior"):
        Polyhedron(np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]))


# -- properties ----------------------------------------------------------------

@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: d.kind)
@given(x=arrays(float, (2,), elements=finite), y=arrays(float, (2,), elements=finite))
def test_projection_properties(dom, x, y):
    P, K = dom.project_points(np.stack([x, y]))
    assert np.all(dom.contains_points(P, 0.0))
    # exact idempotence
    P2, K2 = dom.project_points(P)
    np.testing.assert_array_equal(P2, P)
    assert np.all(K2 == 0.0)
    # nonexpansive
    assert np.linalg.norm(P[0] - P[1]) <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12
    # k vanishes exactly for interior raw points
    inside = dom.contains_points(np.stack([x, y]), 0.0)
    assert np.all((np.linalg.norm(K, axis=1) == 0.0) >= inside)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: d.kind)
def test_variational_inequality(dom, rng):
    x = rng.uniform(-20, 20, size=(300, 2))
    P, K = dom.project_points(x)
    Y = dom.sample(200, rng)
    vi = np.einsum("id,ijd->ij", K, Y[None, :, :] - P[:, None, :])
    scale = np.linalg.norm(K, axis=1)[:, None] * (1 + np.abs(Y).max())
    assert np.all(vi <= 1e-9 * scale + 1e-12)


@given(
    a=arrays(float, (3,), elements=st.floats(-3, 3)).filter(lambda v: np.linalg.norm(v) > 0.1),
    c=st.floats(-2, 2),
    x=arrays(float, (3,), elements=finite),
)
def test_polyhedron_single_active_face_matches_half_space(a, c, x):
    # two far-away extra faces never become active near x
    far = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    poly = Polyhedron(np.vstack([a, far]), np.array([c, 1e6, 1e6]))
    hs = HalfSpace(a, c)
    p_poly = poly.project_points(x[None, :])[0][0]
    p_hs = hs.project_points(x[None, :])[0][0]
    np.testing.assert_allclose(p_poly, p_hs, atol=1e-10 * max(1.0, np.abs(x).max()))


def test_polyhedron_box_equals_clip(rng):
    poly = Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.array([1.0, 2.0, 0.0, 1.0]))
    box = Box([0.0, -1.0], [1.0, 2.0])
    x = rng.uniform(-5, 5, size=(500, 2))
    np.testing.assert_allclose(poly.project_points(x)[0], box.project_points(x)[0], atol=1e-10)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: d.kind)
def test_depth_sign_and_distance(dom, rng):
    x = rng.uniform(-10, 10, size=(400, 2))
    d = dom.depth(x)
    inside = dom.contains_points(x, 0.0)
    assert np.all(d[~inside] < 0)
    assert np.all(d[inside] >= 0)
    P, _ = dom.project_points(x[~inside])
    np.testing.assert_allclose(-d[~inside], np.linalg.norm(x[~inside] - P, axis=1), rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: d.kind)
def test_json_round_trip(dom, rng):
    again = domain_from_json(json.dumps(dom.to_dict()))
    x = rng.uniform(-10, 10, size=(50, 2))
    np.testing.assert_allclose(again.project_points(x)[0], dom.project_points(x)[0], atol=1e-12)
    assert again.kind == dom.kind


def test_unknown_domain_kind():
    with pytest.raises(ValueError):
        domain_from_dict({"kind": "torus", "params": {}})


def test_shrink_and_interior_point():
    box = Box([0.0], [2.0])
    inner = box.shrink(0.2)
    np.testing.assert_allclose(inner.lo, [0.2])
    np.testing.assert_allclose(inner.hi, [1.8])
    for dom in DOMAINS:
        assert dom.depth(dom.interior_point()[None, :])[0] > 0


def test_boundary_points_lie_on_boundary(rng):
    ball = Ball([0.0, 0.0], 1.5)
    pts = ball.boundary_points(100, rng)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.5, rtol=1e-12)
    with pytest.raises(ValueError):
        Orthant(2).boundary_points(3)


def test_inside_open_excludes_boundary():
    box = Box([0.0], [2.0])
    assert not box.inside_open([0.0])
    assert box.inside_open([1e-9])
