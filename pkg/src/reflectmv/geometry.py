"""Closed convex domains, Euclidean projection and outward normals.

Every integrator in the package reflects through :meth:`ConvexDomain.project_points`,
which returns the projected points together with the push ``k = raw - projected``.
Projection is exact in the sense that the returned points always pass
:meth:`ConvexDomain.contains_points` with ``tol=0``; points already in the
domain are returned unchanged (bit-for-bit), so ``k`` is exactly zero for them.

Supported kinds: half-space, box (entries may be infinite), ball, orthant and
polyhedron (finite intersection of half-spaces).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DimensionError",
    "ProjectionError",
    "ReflectionStep",
    "ConvexDomain",
    "HalfSpace",
    "Box",
    "Orthant",
    "Ball",
    "Polyhedron",
    "contains",
    "project",
    "outward_normal",
    "domain_from_dict",
    "domain_from_json",
]

_EPS = np.finfo(float).eps


class DimensionError(ValueError):
    """Point dimension does not match the domain dimension."""


class ProjectionError(RuntimeError):
    """Iterative projection failed to land inside the domain."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ReflectionStep:
    """One-step Skorokhod decomposition ``raw = projected_point + k_increment``."""

    projected_point: np.ndarray
    k_increment: np.ndarray
    k_magnitude_increment: float


def _as_points(x, dimension):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(1, -1) if single else x
    if pts.ndim != 2 or pts.shape[1] != dimension:
        raise DimensionError(f"expected points of dimension {dimension}, got shape {x.shape}")
    return pts, single


def _encode_float(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode_float(v):
    return float(v)


def _faces(x, normals, offsets):
    """``x @ normals.T - offsets`` summed coordinate by coordinate.

    A fixed summation order (no BLAS) makes membership tests bit-identical
    for every batch size, so a point judged inside by a projection is judged
    inside by every later containment check.
    """
    acc = x[:, 0:1] * normals[None, :, 0]
    for k in range(1, x.shape[1]):
        acc = acc + x[:, k : k + 1] * normals[None, :, k]
    return acc - offsets


class ConvexDomain:
    """Base class; subclasses implement the vectorised primitives."""

    kind = "abstract"
    dimension: int

    # -- vectorised primitives -------------------------------------------------
    def contains_points(self, x, tol=0.0):
        raise NotImplementedError

    def project_points(self, x):
        """Return ``(projected, k)`` for an ``(n, d)`` array of raw points."""
        raise NotImplementedError

    def depth(self, x):
        """Signed distance to the boundary: positive inside, negative outside."""
        raise NotImplementedError

    def active_normals(self, x, tol):
        """Sum of unit normals of faces active at each point (unnormalised)."""
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def shrink(self, margin):
        """Return the inner parallel set ``{x : dist(x, complement) >= margin}``."""
        raise NotImplementedError

    def interior_point(self):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    # -- convenience ----------------------------------------------------------
    def contains(self, x, tol=0.0):
        pts, _ = _as_points(x, self.dimension)
        return bool(self.contains_points(pts, tol)[0])

    def inside_open(self, x):
        """Strict interior membership (used for open subdomains)."""
        pts, single = _as_points(x, self.dimension)
        out = self.depth(pts) > 0.0
        return bool(out[0]) if single else out

    def project(self, x):
        pts, _ = _as_points(x, self.dimension)
        p, k = self.project_points(pts)
        return ReflectionStep(p[0].copy(), k[0].copy(), float(np.linalg.norm(k[0])))

    def outward_normal(self, x, tol=1e-9):
        pts, _ = _as_points(x, self.dimension)
        if not self.contains_points(pts, tol)[0]:
            raise ValueError(f"point {pts[0]} lies outside the domain")
        if self.depth(pts)[0] > tol:
            raise ValueError(f"point {pts[0]} is interior; no outward normal")
        n = self.active_normals(pts, tol)[0]
        nrm = np.linalg.norm(n)
        if nrm == 0.0:
            raise ValueError(f"no active face at {pts[0]} within tol={tol}")
        return n / nrm

    def is_bounded(self):
        lo, hi = self.bounding_box()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def sample(self, n, rng, window=10.0):
        """Points of the domain: uniform draws in a finite window, projected in.

        Interior draws stay put, exterior ones land on the boundary, so the
        sample covers both.
        """
        lo, hi = self.bounding_box()
        c = self.interior_point()
        lo = np.where(np.isfinite(lo), lo, c - window)
        hi = np.where(np.isfinite(hi), hi, c + window)
        raw = rng.uniform(lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo), size=(n, self.dimension))
        return self.project_points(raw)[0]

    def boundary_points(self, n, rng=None):
        """Points on the boundary of a bounded domain, by projecting a far sphere."""
        if not self.is_bounded():
            raise ValueError("boundary sampling requires a bounded domain")
        rng = np.random.default_rng(0) if rng is None else rng
        c = self.interior_point()
        lo, hi = self.bounding_box()
        radius = 4.0 * float(np.max(hi - lo)) + 1.0
        u = rng.standard_normal((n, self.dimension))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.project_points(c + radius * u)[0]

    def to_json(self):
        return json.dumps(self.to_dict())

    def _nudge_halfspaces(self, p, normals, offsets, max_rounds=64, center=None):
        """Move points inward along violated faces until ``a.x <= c`` holds exactly.

        At acute corners the face-wise nudges can bounce between faces; given a
        strictly interior ``center``, remaining points are then pulled towards
        it by the smallest convex step that clears every violated face.
        """
        for _ in range(max_rounds):
            s = _faces(p, normals, offsets)
            bad = s > 0.0
            if not bad.any():
                return p
            scale = np.maximum(1.0, np.abs(p).max(axis=1, keepdims=True))
            step = np.where(bad, s + 4.0 * _EPS * scale, 0.0)
            p = p - step @ normals
        if center is not None:
            slack = offsets - normals @ center  # > 0 on every face
            for _ in range(max_rounds):
                s = _faces(p, normals, offsets)
                bad = s > 0.0
                if not bad.any():
                    return p
                # moving a fraction lam towards the centre lowers face i by lam (s_i + slack_i);
                # overshoot by a few ulps of the coordinates so rounding cannot undo it
                scale = np.maximum(1.0, np.abs(p).max(axis=1, keepdims=True))
                lam = np.where(bad, (s + 8.0 * _EPS * scale) / (s + slack), 0.0).max(axis=1)
                lam = np.minimum(1.0, lam)
                p = p + lam[:, None] * (center - p)
        viol = float(np.max(_faces(p, normals, offsets)))
        if viol > 0.0:
            raise ProjectionError("projection could not be made feasible", viol)
        return p


@dataclass(frozen=True, eq=False)
class HalfSpace(ConvexDomain):
    """``{x : <a, x> <= c}`` with ``a`` normalised to unit length."""

    a: np.ndarray
    c: float
    kind = "half-space"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        nrm = np.linalg.norm(a)
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValueError("half-space normal must be a finite non-zero vector")
        object.__setattr__(self, "a", a / nrm)
        object.__setattr__(self, "c", float(self.c) / nrm)

    @property
    def dimension(self):
        return self.a.size

    def contains_points(self, x, tol=0.0):
        return _faces(x, self.a[None, :], self.c)[:, 0] <= tol

    def project_points(self, x):
        s = _faces(x, self.a[None, :], self.c)[:, 0]
        out = s > 0.0
        p = x.copy()
        if out.any():
            q = x[out] - s[out, None] * self.a
            p[out] = self._nudge_halfspaces(q, self.a[None, :], np.array([self.c]))
        return p, x - p

    def depth(self, x):
        return -_faces(x, self.a[None, :], self.c)[:, 0]

    def active_normals(self, x, tol):
        act = np.abs(_faces(x, self.a[None, :], self.c)[:, 0]) <= tol
        return act[:, None] * self.a[None, :]

    def bounding_box(self):
        d = self.dimension
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
        # axis-aligned half-spaces have one finite side
        nz = np.flatnonzero(self.a)
        if nz.size == 1:
            i = nz[0]
            if self.a[i] > 0:
                hi[i] = self.c / self.a[i]
            else:
                lo[i] = self.c / self.a[i]
        return lo, hi

    def shrink(self, margin):
        return HalfSpace(self.a, self.c - margin)

    def interior_point(self):
        return (self.c - 1.0) * self.a

    def to_dict(self):
        return {"kind": self.kind, "params": {"a": self.a.tolist(), "c": self.c}}


@dataclass(frozen=True, eq=False)
class Box(ConvexDomain):
    """Axis-aligned box ``lo <= x <= hi``; entries may be infinite."""

    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be non-empty vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo >= hi):
            raise ValueError("box needs lo < hi componentwise (non-empty interior)")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self):
        return self.lo.size

    def contains_points(self, x, tol=0.0):
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=1)

    def project_points(self, x):
        p = np.clip(x, self.lo, self.hi)
        return p, x - p

    def depth(self, x):
        inner = np.minimum(x - self.lo, self.hi - x).min(axis=1)
        outside = inner < 0
        if outside.any():
            p = np.clip(x[outside], self.lo, self.hi)
            inner = inner.copy()
            inner[outside] = -np.linalg.norm(x[outside] - p, axis=1)
        return inner

    def active_normals(self, x, tol):
        return (np.abs(x - self.hi) <= tol).astype(float) - (np.abs(x - self.lo) <= tol).astype(float)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def shrink(self, margin):
        return Box(self.lo + margin, self.hi - margin)

    def interior_point(self):
        lo = np.where(np.isfinite(self.lo), self.lo, np.where(np.isfinite(self.hi), self.hi - 2.0, -1.0))
        hi = np.where(np.isfinite(self.hi), self.hi, lo + 2.0)
        return 0.5 * (lo + hi)

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": {"lo": [_encode_float(v) for v in self.lo], "hi": [_encode_float(v) for v in self.hi]},
        }


class Orthant(Box):
    """The nonnegative orthant ``[0, inf)^d``."""

    kind = "orthant"

    def __init__(self, dimension):
        super().__init__(np.zeros(int(dimension)), np.full(int(dimension), np.inf))

    def shrink(self, margin):
        return Box(self.lo + margin, self.hi)

    def to_dict(self):
        return {"kind": self.kind, "params": {"dimension": self.dimension}}


@dataclass(frozen=True, eq=False)
class Ball(ConvexDomain):
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError("ball radius must be positive and finite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dimension(self):
        return self.center.size

    def _norms(self, x):
        return np.linalg.norm(x - self.center, axis=1)

    def contains_points(self, x, tol=0.0):
        return self._norms(x) <= self.radius + tol

    def project_points(self, x):
        r = self._norms(x)
        out = r > self.radius
        p = x.copy()
        if out.any():
            v = x[out] - self.center
            q = self.center + v * (self.radius / r[out])[:, None]
            shrink = 1.0
            for _ in range(64):
                bad = self._norms(q) > self.radius
                if not bad.any():
                    break
                shrink -= 2.0 * _EPS
                q[bad] = self.center + (q[bad] - self.center) * shrink
            else:
                raise ProjectionError("ball projection overshoot", float(self._norms(q).max() - self.radius))
            p[out] = q
        return p, x - p

    def depth(self, x):
        return self.radius - self._norms(x)

    def active_normals(self, x, tol):
        v = x - self.center
        r = np.linalg.norm(v, axis=1)
        act = (np.abs(r - self.radius) <= tol) & (r > 0)
        safe = np.where(r > 0, r, 1.0)
        return act[:, None] * v / safe[:, None]

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def shrink(self, margin):
        return Ball(self.center, self.radius - margin)

    def interior_point(self):
        return self.center.copy()

    def to_dict(self):
        return {"kind": self.kind, "params": {"center": self.center.tolist(), "radius": self.radius}}


_MAX_FACE_SUBSETS = 512


def _face_subsets(m, d):
    from itertools import combinations

    return [S for k in range(1, min(m, d) + 1) for S in combinations(range(m), k)]


def _subset_projectors(A):
    """``(S, A_S, (A_S A_S^T)^{-1})`` for every well-conditioned face subset."""
    out = []
    for S in _face_subsets(*A.shape):
        As = A[list(S)]
        M = As @ As.T
        if np.linalg.cond(M) <= 1e12:
            out.append((np.array(S), As, np.linalg.inv(M)))
    return out


def _enumerate_projection(x, A, c, tol, projectors=None):
    """Exact projection by enumerating candidate active sets.

    The projection onto ``{A y <= c}`` is the projection onto the affine set
    of some linearly independent subset of at most ``d`` faces; it is the
    closest of those candidates that is feasible. Vectorised over points.
    """
    projectors = _subset_projectors(A) if projectors is None else projectors
    best = np.full(x.shape[0], np.inf)
    y = x.copy()
    xa = _faces(x, A, c)  # a_i.x - c_i for every face
    for S, As, Minv in projectors:
        mu = xa[:, S] @ Minv
        step = mu @ As
        # faces of the candidate: a_i.(x - step) - c_i
        viol = (xa - step @ A.T).max(axis=1)
        dist = np.einsum("ij,ij->i", step, step)
        take = (viol <= tol) & (dist < best)
        if take.any():
            best[take] = dist[take]
            y[take] = x[take] - step[take]
    if np.any(~np.isfinite(best)):
        raise ProjectionError("no feasible candidate active set", float("nan"))
    return y


_POLISH_SWEEPS = (4, 16, 64, 256)


def _polish(x, A, c, active, tol):
    """Exact projections for guessed active sets.

    For each point, project onto the affine set ``{a_i.y = c_i : i active}``
    and accept the result when it is feasible with non-negative multipliers
    (the KKT conditions). Points sharing an active pattern are solved together.
    Returns ``(accepted, y)``.
    """
    n, d = x.shape
    y = np.empty_like(x)
    ok = np.zeros(n, dtype=bool)
    keys = np.packbits(active, axis=1, bitorder="little")
    _, group = np.unique(keys, axis=0, return_inverse=True)
    for g in np.unique(group):
        idx = np.nonzero(group.ravel() == g)[0]
        S = np.nonzero(active[idx[0]])[0]
        if S.size == 0 or S.size > d:
            continue
        As = A[S]
        M = As @ As.T
        if np.linalg.cond(M) > 1e10:
            continue
        mu = np.linalg.solve(M, (x[idx] @ As.T - c[S]).T).T
        yg = x[idx] - mu @ As
        good = (mu.min(axis=1) >= 0.0) & (_faces(yg, A, c).max(axis=1) <= tol[idx])
        y[idx] = yg
        ok[idx] = good
    return ok, y


def _least_distance(x, A, c):
    """Exact projection of one point onto ``{y : A y <= c}``.

    Least-distance programming reduced to non-negative least squares
    (Lawson and Hanson): with ``u = y - x`` the constraints read
    ``-A u >= A x - c``; the residual of the NNLS problem
    ``min |[-A^T; (Ax - c)^T] w - e_{d+1}|, w >= 0`` yields ``u``. The NNLS is
    solved by bounded-variable least squares (``scipy.optimize.lsq_linear``).
    """
    from scipy.optimize import lsq_linear

    d = x.size
    h = A @ x - c
    E = np.vstack([-A.T, h[None, :]])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    w = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x
    r = E @ w - f
    if abs(r[-1]) < 1e-300:
        raise ProjectionError("least-distance program is infeasible", float("nan"))
    return x - r[:d] / r[-1]


@dataclass(frozen=True, eq=False)
class Polyhedron(ConvexDomain):
    """Intersection of half-spaces ``A x <= c``.

    Projection is exact: with few faces relative to the dimension, candidate
    active sets are enumerated (vectorised over points); otherwise cyclic
    Dykstra iteration with a KKT stopping rule is used, with exact polishing
    of guessed active sets and a least-distance solve for stragglers. Non-empty interior is verified on construction by a Chebyshev
    centre linear program.
    """

    normals: np.ndarray
    offsets: np.ndarray
    max_sweeps: int = 500
    tol: float = 1e-12
    _center: np.ndarray = field(default=None, repr=False)
    _projectors: list = field(default=None, repr=False)

    kind = "polyhedron"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        c = np.asarray(self.offsets, dtype=float).ravel()
        if A.shape[0] != c.size:
            raise ValueError("need one offset per face")
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise ValueError("face normals must be non-zero")
        A = A / nrm[:, None]
        c = c / nrm
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", c)
        object.__setattr__(self, "_center", self._chebyshev_center())

    @classmethod
    def from_halfspaces(cls, halfspaces, **kw):
        return cls(np.array([h.a for h in halfspaces]), np.array([h.c for h in halfspaces]), **kw)

    def _chebyshev_center(self):
        from scipy.optimize import linprog

        A, c = self.normals, self.offsets
        d = A.shape[1]
        # maximise s subject to A x + s <= c, s <= 1 (cap keeps unbounded sets finite)
        obj = np.zeros(d + 1)
        obj[-1] = -1.0
        A_ub = np.hstack([A, np.ones((A.shape[0], 1))])
        bounds = [(None, None)] * d + [(None, 1.0)]
        res = linprog(obj, A_ub=A_ub, b_ub=c, bounds=bounds, method="highs")
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise ValueError("polyhedron has empty interior")
        return res.x[:d]

    @property
    def dimension(self):
        return self.normals.shape[1]

    def contains_points(self, x, tol=0.0):
        return np.all(_faces(x, self.normals, self.offsets) <= tol, axis=1)

    def project_points(self, x):
        p = x.copy()
        out = ~self.contains_points(x)
        if out.any():
            A, c = self.normals, self.offsets
            if len(_face_subsets(*A.shape)) <= _MAX_FACE_SUBSETS:
                xo = x[out]
                tol = 1e-12 * np.maximum(1.0, np.abs(xo).max(axis=1))
                if self._projectors is None:
                    object.__setattr__(self, "_projectors", _subset_projectors(A))
                q = _enumerate_projection(xo, A, c, tol, self._projectors)
                p[out] = self._nudge_halfspaces(q, A, c, max_rounds=16, center=self._center)
            else:
                p[out] = self._dykstra(x[out])
        return p, x - p

    def _dykstra(self, x):
        """Cyclic Dykstra projection with a KKT stopping rule.

        The iteration keeps ``y = x - sum_i incr_i`` with ``incr_i = lam_i a_i``
        and ``lam_i >= 0``, so ``y`` is certified once it is feasible and the
        complementarity gap ``sum_i lam_i (c_i - a_i.y)`` is negligible; that
        gap bounds ``<x - y, z - y>`` for every ``z`` in the set.
        """
        A, c = self.normals, self.offsets
        m = A.shape[0]
        y = x.copy()
        incr = np.zeros((m,) + x.shape)
        scale = np.maximum(1.0, np.abs(x).max(axis=1))
        live = np.arange(x.shape[0])
        sweep = 0
        for _ in range(self.max_sweeps):
            if live.size == 0:
                break
            yl = y[live]
            for i in range(m):
                z = yl + incr[i, live]
                s = z @ A[i] - c[i]
                q = z - np.maximum(s, 0.0)[:, None] * A[i]
                incr[i, live] = z - q
                yl = q
            y[live] = yl
            slack = -_faces(yl, A, c)
            lam = np.einsum("mnd,md->nm", incr[:, live], A)
            gap = np.sum(lam * np.maximum(slack, 0.0), axis=1)
            tol = self.tol * scale[live]
            live = live[(-slack.min(axis=1) > tol) | (gap > tol * scale[live])]
            sweep += 1
            if live.size and sweep in _POLISH_SWEEPS:
                # candidate active sets: positive multipliers, nearly tight faces, both
                for rule in range(3):
                    positive = np.einsum("mnd,md->nm", incr[:, live], A) > 0
                    tight = -_faces(y[live], A, c) <= 1e-6 * scale[live, None]
                    guess = (positive, tight, positive & tight)[rule]
                    ok, ys = _polish(x[live], A, c, guess, self.tol * scale[live])
                    y[live[ok]] = ys[ok]
                    live = live[~ok]
                    if live.size == 0:
                        break
        # slow cases (near-parallel faces, sharp corners): exact least-distance solve
        for j in live:
            y[j] = _least_distance(x[j], A, c)
        return self._nudge_halfspaces(y, A, c, max_rounds=16, center=self._center)

    def depth(self, x):
        inner = (-_faces(x, self.normals, self.offsets)).min(axis=1)
        outside = inner < 0
        if outside.any():
            inner = inner.copy()
            p = self._dykstra(x[outside])
            inner[outside] = -np.linalg.norm(x[outside] - p, axis=1)
        return inner

    def active_normals(self, x, tol):
        act = np.abs(_faces(x, self.normals, self.offsets)) <= tol
        return act.astype(float) @ self.normals

    def bounding_box(self):
        from scipy.optimize import linprog

        d = self.dimension
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
        for i in range(d):
            for sign, target in ((1.0, lo), (-1.0, hi)):
                obj = np.zeros(d)
                obj[i] = sign
                res = linprog(obj, A_ub=self.normals, b_ub=self.offsets, bounds=[(None, None)] * d, method="highs")
                if res.status == 0:
                    target[i] = res.x[i]
        return lo, hi

    def shrink(self, margin):
        return Polyhedron(self.normals, self.offsets - margin, self.max_sweeps, self.tol)

    def interior_point(self):
        return self._center.copy()

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": {"normals": self.normals.tolist(), "offsets": self.offsets.tolist()},
        }


def domain_from_dict(spec):
    """Build a domain from ``{"kind": ..., "params": {...}}``."""
    try:
        kind = spec["kind"]
        params = dict(spec.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed domain description: {spec!r}") from exc
    if kind == "half-space":
        return HalfSpace(np.asarray(params["a"], float), float(params["c"]))
    if kind == "box":
        lo = [_decode_float(v) for v in params["lo"]]
        hi = [_decode_float(v) for v in params["hi"]]
        return Box(np.array(lo), np.array(hi))
    if kind == "orthant":
        return Orthant(int(params["dimension"]))
    if kind == "ball":
        return Ball(np.asarray(params["center"], float), float(params["radius"]))
    if kind == "polyhedron":
        return Polyhedron(np.asarray(params["normals"], float), np.asarray(params["offsets"], float))
    raise ValueError(f"unknown domain kind {kind!r}")


def domain_from_json(text):
    return domain_from_dict(json.loads(text))


def contains(domain, x, tol=0.0):
    return domain.contains(x, tol)


def project(domain, x):
    return domain.project(x)


def outward_normal(domain, x, tol=1e-9):
    return domain.outward_normal(x, tol)
