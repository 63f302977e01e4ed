"""Coefficients ``(b, sigma, f)`` of a reflected self-stabilizing diffusion.

The drift is evaluated on a whole cloud at once: ``drift(t, X)`` with ``X`` of
shape ``(N, d)`` returns ``(N, d)``. The diffusion coefficient is either a
scalar (a multiple of the identity, ``d' = d``), a constant ``(d, d')`` matrix,
or a callable ``(t, X) -> (N, d, d')``. The interaction force ``f`` is a
:class:`~reflectmv.kernels.Kernel`.

Sign conventions
----------------
``b = grad B`` (so a confining drift has a concave ``B``) and ``f = -grad F``
with ``F`` convex, i.e. ``f`` is attractive. :func:`probe_assumptions` reports
each standing inequality as a *margin* ``bound - observed``; a negative margin
means the inequality was falsified at the recorded witness points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Box, ConvexDomain
from .kernels import CallableKernel, CubicKernel, Kernel, ZeroKernel

__all__ = [
    "ModelCoefficients",
    "ExitModel",
    "ProbeResult",
    "AssumptionReport",
    "probe_assumptions",
    "probe_exit_model",
    "builtin_models",
    "builtin_exit_models",
    "get_model",
    "model_from_dict",
]


@dataclass
class ModelCoefficients:
    """Drift, diffusion and interaction of the particle dynamics.

    Attributes
    ----------
    drift : callable
        ``drift(t, X) -> (N, d)``.
    kernel : Kernel
        Odd interaction force ``f``.
    sigma : float, ndarray or callable
        Diffusion coefficient (see module docstring).
    B_potential : callable, optional
        ``B(X) -> (N,)`` with ``drift = grad B`` (time-homogeneous drifts only).
    L, C, r, holder_beta : float
        One-sided Lipschitz constant, growth constant, growth order and the
        time-Holder exponent of ``sigma``.
    x0 : ndarray
        Default deterministic initial condition.
    default_domain : ConvexDomain, optional
        Domain the model is meant to be run on.
    """

    name: str
    dimension: int
    drift: Callable
    kernel: Kernel = field(default_factory=ZeroKernel)
    sigma: object = 1.0
    noise_dimension: int | None = None
    B_potential: Callable | None = None
    L: float = 1.0
    C: float = 1.0
    r: float = 2.0
    holder_beta: float = 1.0
    x0: np.ndarray | None = None
    default_domain: ConvexDomain | None = None
    time_homogeneous: bool = True
    description: str = ""
    source: dict | None = None

    def __post_init__(self):
        d = int(self.dimension)
        self.dimension = d
        if self.x0 is None:
            self.x0 = np.zeros(d)
        self.x0 = np.asarray(self.x0, dtype=float).reshape(d)
        if self.r <= 1:
            raise ValueError("growth order r must exceed 1")
        if not 0 < self.holder_beta <= 1:
            raise ValueError("holder_beta must lie in (0, 1]")
        if callable(self.sigma):
            if self.noise_dimension is None:
                self.noise_dimension = d
        else:
            s = np.asarray(self.sigma, dtype=float)
            if s.ndim == 0:
                self.noise_dimension = d
            elif s.ndim == 2 and s.shape[0] == d:
                self.noise_dimension = s.shape[1]
            else:
                raise ValueError(f"sigma must be a scalar or a ({d}, d') matrix")
            self.sigma = s
        if self.default_domain is not None and self.default_domain.dimension != d:
            raise ValueError("default_domain dimension does not match the model")

    # -- evaluation --------------------------------------------------------------
    def b(self, t, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.drift(t, X), dtype=float).reshape(X.shape)

    def f(self, Z):
        return self.kernel(Z)

    def F(self, Z):
        return self.kernel.potential(Z)

    def B(self, X):
        if self.B_potential is None:
            return None
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.B_potential(X), dtype=float).reshape(X.shape[0])

    @property
    def sigma_is_constant(self):
        return not callable(self.sigma)

    @property
    def sigma_is_scalar(self):
        return not callable(self.sigma) and np.ndim(self.sigma) == 0

    def sigma_matrix(self, t, X):
        """Diffusion matrices, shape ``(N, d, d')``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        if callable(self.sigma):
            return np.asarray(self.sigma(t, X), dtype=float).reshape(n, self.dimension, self.noise_dimension)
        if np.ndim(self.sigma) == 0:
            return np.broadcast_to(float(self.sigma) * np.eye(self.dimension), (n, self.dimension, self.dimension))
        return np.broadcast_to(self.sigma, (n,) + self.sigma.shape)

    def diffuse(self, t, X, xi):
        """``sigma(t, X_i) @ xi_i`` for each row; ``xi`` has shape ``(N, d')``."""
        if self.sigma_is_scalar:
            return float(self.sigma) * xi
        if not callable(self.sigma):
            return xi @ self.sigma.T
        return np.einsum("nij,nj->ni", self.sigma_matrix(t, X), xi)

    def sigma_norm(self, t, X):
        """Frobenius norm of ``sigma(t, X_i)`` per row."""
        return np.linalg.norm(self.sigma_matrix(t, X), axis=(1, 2))

    def to_dict(self):
        if self.source is not None:
            return dict(self.source)
        return {"model_id": self.name}


@dataclass
class ExitModel:
    """A time-homogeneous model with a contracting stationary point ``x_tilde``."""

    base: ModelCoefficients
    x_tilde: np.ndarray
    L_contraction: float

    def __post_init__(self):
        self.x_tilde = np.asarray(self.x_tilde, dtype=float).reshape(self.base.dimension)
        if self.L_contraction <= 0:
            raise ValueError("L_contraction must be positive")
        if not self.base.time_homogeneous:
            raise ValueError("exit models need a time-homogeneous drift")

    @property
    def name(self):
        return self.base.name


# ---------------------------------------------------------------------------
# assumption probes


@dataclass
class ProbeResult:
    """Outcome of one inequality probe; ``margin < 0`` means falsified."""

    name: str
    statement: str
    margin: float
    witness: list = field(default_factory=list)
    n_checked: int = 0
    slack: float = 0.0

    @property
    def passed(self):
        """Round-off aware: saturated bounds (margin 0 up to ``slack``) pass."""
        return bool(self.margin >= -self.slack)

    @property
    def status(self):
        return "PASS" if self.passed else "VIOLATED"

    def to_dict(self):
        return {
            "name": self.name,
            "statement": self.statement,
            "margin": float(self.margin),
            "status": self.status,
            "witness": [np.asarray(w).tolist() for w in self.witness],
            "n_checked": int(self.n_checked),
            "slack": float(self.slack),
        }


@dataclass
class AssumptionReport:
    model: str
    probes: list

    @property
    def passed(self):
        return all(p.passed for p in self.probes)

    def __getitem__(self, name):
        for p in self.probes:
            if p.name == name:
                return p
        raise KeyError(name)

    def names(self):
        return [p.name for p in self.probes]

    def to_dict(self):
        return {"model": self.model, "passed": self.passed, "probes": [p.to_dict() for p in self.probes]}

    def summary(self):
        lines = [f"assumption report for {self.model}: {'PASS' if self.passed else 'VIOLATED'}"]
        for p in self.probes:
            lines.append(f"  {p.status:8s} {p.name:24s} margin={p.margin:+.3e}  ({p.statement})")
        return "\n".join(lines)


_ROUNDOFF = 64.0 * np.finfo(float).eps


def _cancel_scale(dx, u, v):
    """Magnitude of <dx, u - v> before cancellation."""
    return np.linalg.norm(dx, axis=1) * (np.linalg.norm(u, axis=1) + np.linalg.norm(v, axis=1))


def _worst(name, statement, margins, witnesses, scale=None):
    """Worst margin over a batch; ``scale`` is the size of the compared terms,
    used to grant a round-off slack of ``64 eps * scale``."""
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return ProbeResult(name, statement, np.inf, [], 0)
    bad = ~np.isfinite(margins)
    if bad.any():
        k = int(np.argmax(bad))
        return ProbeResult(name, statement, -np.inf, [w[k] for w in witnesses], margins.size)
    slack = np.zeros_like(margins) if scale is None else _ROUNDOFF * np.abs(np.asarray(scale, dtype=float))
    k = int(np.argmin(margins + slack))
    return ProbeResult(name, statement, float(margins[k]), [w[k] for w in witnesses], margins.size, float(slack[k]))


def _probe_points(domain, n, rng, window=10.0):
    """Interior/boundary samples plus the finite corners of the bounding box."""
    pts = domain.sample(n, rng, window=window)
    lo, hi = domain.bounding_box()
    c = domain.interior_point()
    lo = np.where(np.isfinite(lo), lo, c - window)
    hi = np.where(np.isfinite(hi), hi, c + window)
    d = domain.dimension
    if d <= 10:
        grid = np.array(np.meshgrid(*[[lo[i], hi[i]] for i in range(d)], indexing="ij")).reshape(d, -1).T
        corners = domain.project_points(grid)[0]
        pts = np.vstack([pts, corners])
    return pts


def _pairs(pts, n, rng):
    i = rng.integers(0, pts.shape[0], n)
    j = rng.integers(0, pts.shape[0], n)
    # adversarial pairs: every corner/last point against its neighbours
    return pts[i], pts[j]


def _growth_probe(kernel, r, dimension, rng):
    """Local log-log slope of ``|f|`` between radii 1e2 and 1e3."""
    u = rng.standard_normal((16, dimension))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    f1 = np.linalg.norm(kernel(1e2 * u), axis=1)
    f2 = np.linalg.norm(kernel(1e3 * u), axis=1)
    ok = (f1 > 0) & (f2 > 0)
    if not ok.any():
        return None
    slope = np.log(f2[ok] / f1[ok]) / np.log(10.0)
    k = int(np.argmax(np.abs(slope - r)))
    return ProbeResult(
        "growth_order",
        "log-log slope of |f| over |x| in [1e2, 1e3] equals r within 0.05",
        float(0.05 - abs(slope[k] - r)),
        [1e3 * u[ok][k], slope[k]],
        int(ok.sum()),
    )


def _gradient_probe(name, potential, field_fn, points, sign, rel_tol=1e-5):
    """Central differences of a potential against ``sign * field``."""
    x = np.asarray(points, dtype=float)
    n, d = x.shape
    grad = np.empty_like(x)
    for i in range(d):
        h = 1e-5 * np.maximum(1.0, np.abs(x[:, i]))
        e = np.zeros(d)
        e[i] = 1.0
        grad[:, i] = (potential(x + h[:, None] * e) - potential(x - h[:, None] * e)) / (2.0 * h)
    target = sign * field_fn(x)
    scale = np.maximum(np.linalg.norm(target, axis=1), 1.0)
    err = np.linalg.norm(grad - target, axis=1) / scale
    return _worst(name, f"central differences match the field to relative error {rel_tol:g}", rel_tol - err, [x])


def probe_assumptions(model, domain=None, n_probes=10_000, seed=0, times=None):
    """Falsification harness for the standing assumptions on ``(b, sigma, f)``.

    Each probe evaluates one inequality on ``n_probes`` random pairs of domain
    points (plus bounding-box corners) and records the worst margin
    ``bound - observed`` together with the witnessing points.

    Parameters
    ----------
    model : ModelCoefficients
    domain : ConvexDomain, optional
        Defaults to ``model.default_domain``.
    n_probes : int
    seed : int
    times : sequence of float, optional
        Time points at which time-dependent coefficients are probed.

    Returns
    -------
    AssumptionReport
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    domain = domain if domain is not None else model.default_domain
    if domain is None:
        domain = Box(np.full(model.dimension, -np.inf), np.full(model.dimension, np.inf))
    rng = np.random.default_rng(seed)
    pts = _probe_points(domain, max(64, n_probes // 8), rng)
    x, y = _pairs(pts, n_probes, rng)
    times = np.asarray([0.0, 0.5, 1.0] if times is None else times, dtype=float)
    L, C, r = model.L, model.C, model.r
    k = model.kernel
    probes = []

    # kernel: f(0) = 0 and oddness, evaluated on differences of domain points
    z = x - y
    f0 = np.linalg.norm(k(np.zeros((1, model.dimension))), axis=1)
    probes.append(_worst("f_zero", "f(0) = 0", -f0, [np.zeros((1, model.dimension))]))
    fz, fmz = k(z), k(-z)
    odd = np.linalg.norm(fz + fmz, axis=1)
    # vectorised powers are not exactly sign-symmetric; grant round-off on |f(z)|
    scale = np.linalg.norm(fz, axis=1) + np.linalg.norm(fmz, axis=1)
    probes.append(_worst("f_odd", "f(-z) = -f(z)", -odd, [z], scale))
    nz = np.linalg.norm(z, axis=1)
    probes.append(
        _worst("f_growth", "|f(z)| <= C(1 + |z|^r)", C * (1 + nz**r) - np.linalg.norm(k(z), axis=1), [z])
    )
    z2 = np.roll(z, 1, axis=0)
    dz = np.linalg.norm(z - z2, axis=1)
    lip = C * dz * (1 + np.linalg.norm(z, axis=1) ** (r - 1) + np.linalg.norm(z2, axis=1) ** (r - 1))
    probes.append(
        _worst(
            "f_local_lipschitz",
            "|f(z)-f(w)| <= C|z-w|(1+|z|^(r-1)+|w|^(r-1))",
            lip - np.linalg.norm(k(z) - k(z2), axis=1),
            [z, z2],
        )
    )
    g = _growth_probe(k, r, model.dimension, rng) if not k.is_zero else None
    if g is not None:
        probes.append(g)

    # drift and diffusion
    dx = x - y
    sq = np.sum(dx * dx, axis=1)
    m_b, m_s, w_b, sc_b = [], [], [], []
    for t in times:
        bx, by = model.b(t, x), model.b(t, y)
        inner = np.sum((bx - by) * dx, axis=1)
        m_b.append(L * sq - inner)
        sc_b.append(np.abs(L * sq) + _cancel_scale(dx, bx, by))
        ds = np.linalg.norm(model.sigma_matrix(t, x) - model.sigma_matrix(t, y), axis=(1, 2))
        m_s.append(L * np.sqrt(sq) - ds)
        w_b.append(np.full(len(x), t))
    probes.append(
        _worst(
            "b_one_sided_lipschitz",
            "<b(t,x)-b(t,y), x-y> <= L|x-y|^2",
            np.concatenate(m_b),
            [np.tile(x, (len(times), 1)), np.tile(y, (len(times), 1)), np.concatenate(w_b)],
            np.concatenate(sc_b),
        )
    )
    probes.append(
        _worst(
            "sigma_lipschitz",
            "|sigma(t,x)-sigma(t,y)| <= L|x-y|",
            np.concatenate(m_s),
            [np.tile(x, (len(times), 1)), np.tile(y, (len(times), 1))],
        )
    )
    if len(times) >= 2:
        ta, tb = np.meshgrid(times, times)
        mask = ta != tb
        ta, tb = ta[mask], tb[mask]
        xs = x[: max(1, min(len(x), 512))]
        margins, wx, wt = [], [], []
        for a, b_ in zip(ta, tb):
            diff = np.linalg.norm(model.sigma_matrix(a, xs) - model.sigma_matrix(b_, xs), axis=(1, 2))
            margins.append(L * abs(a - b_) ** model.holder_beta - diff)
            wx.append(xs)
            wt.append(np.full(len(xs), a))
        probes.append(
            _worst(
                "sigma_holder",
                "|sigma(t,x)-sigma(s,x)| <= L|t-s|^beta",
                np.concatenate(margins),
                [np.concatenate(wx), np.concatenate(wt)],
            )
        )

    # potentials
    interior = pts[domain.depth(pts) > 1e-4][:100]
    if interior.shape[0] == 0:
        interior = pts[:100]
    if model.B_potential is not None:
        probes.append(_gradient_probe("B_gradient", model.B, lambda X: model.b(0.0, X), interior, +1.0))
    if k.has_potential and not k.is_zero:
        probes.append(_gradient_probe("F_gradient", k.potential, k, interior - interior[::-1], -1.0))
    return AssumptionReport(model.name, probes)


def probe_exit_model(exit_model, domain=None, n_probes=10_000, seed=0):
    """Probes specific to the exit-time setting (stationary, contracting drift;
    monotone attractive kernel), appended to the generic report."""
    base = exit_model.base
    domain = domain if domain is not None else base.default_domain
    report = probe_assumptions(base, domain, n_probes, seed)
    rng = np.random.default_rng(seed + 1)
    pts = _probe_points(domain, max(64, n_probes // 8), rng)
    x, y = _pairs(pts, n_probes, rng)
    xt = exit_model.x_tilde[None, :]
    bx = np.linalg.norm(base.b(0.0, xt), axis=1)
    report.probes.append(_worst("stationary_point", "|b(x_tilde)| <= 1e-10", 1e-10 - bx, [xt]))
    depth = domain.depth(xt)
    report.probes.append(_worst("x_tilde_interior", "x_tilde in the open domain", depth, [xt]))
    dx = x - y
    bx, by = base.b(0.0, x), base.b(0.0, y)
    inner = np.sum(dx * (bx - by), axis=1)
    quad = exit_model.L_contraction * np.sum(dx * dx, axis=1)
    report.probes.append(
        _worst(
            "b_contraction",
            "<x-y, b(x)-b(y)> + L|x-y|^2 <= 0",
            -(inner + quad),
            [x, y],
            _cancel_scale(dx, bx, by) + quad,
        )
    )
    report.probes.append(_monotone_probe(base.kernel, x - y, np.roll(x - y, 1, axis=0)))
    return report


def _monotone_probe(kernel, z, w):
    fz, fw = kernel(z), kernel(w)
    inner = np.sum((z - w) * (fz - fw), axis=1)
    return _worst("f_monotone", "<z-w, f(z)-f(w)> <= 0", -inner, [z, w], _cancel_scale(z - w, fz, fw))


# ---------------------------------------------------------------------------
# catalog


def _linear_drift(rate, centre):
    centre = np.asarray(centre, dtype=float)

    def drift(t, X):
        return -rate * (X - centre)

    def potential(X):
        return -0.5 * rate * np.sum((X - centre) ** 2, axis=1)

    return drift, potential


def _zero_drift(t, X):
    return np.zeros_like(X)


def _zero_potential(X):
    return np.zeros(X.shape[0])


def builtin_models():
    """Named models shipped with the package.

    Returns
    -------
    dict of str -> ModelCoefficients
    """
    models = {}
    b, B = _linear_drift(2.0, [1.0])
    models["ou-cubic-1d"] = ModelCoefficients(
        name="ou-cubic-1d",
        dimension=1,
        drift=b,
        B_potential=B,
        kernel=CubicKernel(alpha=0.0, beta=0.5),
        sigma=1.0,
        L=2.0,
        C=1.0,
        r=3.0,
        x0=[3.0],
        default_domain=Box([-2.0], [4.0]),
        description="linear confinement towards 1 with cubic self-attraction f(z) = -z^3/2",
    )
    models["ou-1d"] = ModelCoefficients(
        name="ou-1d",
        dimension=1,
        drift=b,
        B_potential=B,
        kernel=ZeroKernel(),
        sigma=1.0,
        L=2.0,
        C=1.0,
        r=3.0,
        x0=[3.0],
        default_domain=Box([-2.0], [4.0]),
        description="the same confinement without interaction (f = 0)",
    )
    models["pure-reflection"] = ModelCoefficients(
        name="pure-reflection",
        dimension=1,
        drift=_zero_drift,
        B_potential=_zero_potential,
        kernel=ZeroKernel(),
        sigma=1.0,
        L=1.0,
        C=1.0,
        r=2.0,
        x0=[0.5],
        default_domain=Box([0.0], [1.0]),
        description="reflected Brownian motion on the unit interval",
    )
    b2, B2 = _linear_drift(2.0, [0.5, 0.5])
    models["quartic-2d"] = ModelCoefficients(
        name="quartic-2d",
        dimension=2,
        drift=b2,
        B_potential=B2,
        kernel=CubicKernel(alpha=0.0, beta=1.0),
        sigma=1.0,
        L=2.0,
        C=2.0,
        r=3.0,
        x0=[2.0, -1.0],
        default_domain=Box([-3.0, -3.0], [3.0, 3.0]),
        description="b = -grad |x - (1/2, 1/2)|^2 with f(z) = -z|z|^2 in the box [-3, 3]^2",
    )
    return models


def builtin_exit_models():
    """Exit-time views of the catalog models with a contracting stationary point."""
    cat = builtin_models()
    return {
        "ou-cubic-1d": ExitModel(cat["ou-cubic-1d"], [1.0], 2.0),
        "ou-1d": ExitModel(cat["ou-1d"], [1.0], 2.0),
        "quartic-2d": ExitModel(cat["quartic-2d"], [0.5, 0.5], 2.0),
    }


def get_model(model_id):
    cat = builtin_models()
    if model_id not in cat:
        raise KeyError(f"unknown model {model_id!r}; available: {sorted(cat)}")
    return cat[model_id]


_MODEL_KEYS = {"name", "dimension", "b", "B", "f", "F", "sigma", "L", "C", "r", "holder_beta", "x0", "domain"}


def model_from_dict(spec):
    """Build a model from an inline specification of polynomial expressions.

    Keys: ``dimension``, ``b`` (list of d expressions in ``x1..xd, t``),
    ``f`` (list of d expressions in ``x1..xd``, the kernel at ``z``),
    optional ``B``, ``F`` (scalar expressions), ``sigma`` (number or d x d'
    nested list of expressions), ``L``, ``C``, ``r``, ``holder_beta``, ``x0``,
    ``domain`` (domain dictionary), ``name``.
    """
    from .expressions import compile_expression, compile_matrix, compile_vector
    from .geometry import domain_from_dict

    unknown = set(spec) - _MODEL_KEYS
    if unknown:
        raise ValueError(f"unknown model keys: {sorted(unknown)}")
    d = int(spec["dimension"])
    b_expr = spec.get("b", ["0"] * d)
    bfun = compile_vector(b_expr, d)
    time_dep = any("t" in _names_in(s) for s in ([b_expr] if isinstance(b_expr, str) else b_expr))
    B = None
    if "B" in spec:
        Bf = compile_expression(spec["B"], d)
        B = lambda X: Bf(0.0, X)  # noqa: E731
    kernel = ZeroKernel()
    if "f" in spec:
        ff = compile_vector(spec["f"], d)
        Ff = compile_expression(spec["F"], d) if "F" in spec else None
        kernel = CallableKernel(
            lambda Z: _apply_flat(ff, Z),
            potential=(lambda Z: _apply_flat_scalar(Ff, Z)) if Ff is not None else None,
            label="inline",
        )
    sigma = spec.get("sigma", 1.0)
    if isinstance(sigma, list):
        flat = [s for row in sigma for s in row]
        if all(isinstance(s, (int, float)) for s in flat):
            sigma = np.asarray(sigma, dtype=float)
        else:
            sigma = compile_matrix(sigma, d)
            time_dep = time_dep or any("t" in _names_in(s) for s in flat)
    domain = domain_from_dict(spec["domain"]) if "domain" in spec else None
    return ModelCoefficients(
        name=spec.get("name", "inline"),
        dimension=d,
        drift=bfun,
        kernel=kernel,
        sigma=sigma,
        B_potential=B,
        L=float(spec.get("L", 1.0)),
        C=float(spec.get("C", 1.0)),
        r=float(spec.get("r", 2.0)),
        holder_beta=float(spec.get("holder_beta", 1.0)),
        x0=spec.get("x0"),
        default_domain=domain,
        time_homogeneous=not time_dep,
        source=dict(spec),
    )


def _names_in(text):
    import ast

    return {n.id for n in ast.walk(ast.parse(str(text), mode="eval")) if isinstance(n, ast.Name)}


def _apply_flat(fn, Z):
    Z = np.asarray(Z, dtype=float)
    shape = Z.shape
    return fn(0.0, Z.reshape(-1, shape[-1])).reshape(shape)


def _apply_flat_scalar(fn, Z):
    Z = np.asarray(Z, dtype=float)
    return fn(0.0, Z.reshape(-1, Z.shape[-1])).reshape(Z.shape[:-1])
