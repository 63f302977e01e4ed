"""Decoupled mean-field construction by fixed-point iteration.

For a field ``g(t, x)`` the map ``Gamma`` simulates ``M`` independent copies of
the reflected diffusion driven by ``b + g`` (no interaction between copies) and
returns the field ``x -> E f(x - X_t)`` of their law. A fixed point
``g = Gamma[g]`` yields the law of the self-stabilizing process.

Images of ``Gamma`` are stored *empirically*: for every grid time the law is
kept as a cloud thinned to at most ``m_store`` samples by strided subsampling,
and evaluated at the stored time nearest to the query. Kernels with an exact
moment expansion additionally keep the moments of the full cloud, so their
evaluation carries no thinning error.

Distances between fields use the weighted sup norm
``sup |g(t, x)| / (1 + |x - x0|^r)`` over a deterministic probe set.
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .engine import SimConfig, simulate_paths

__all__ = [
    "GFunction",
    "ProbeSet",
    "ConvergenceError",
    "FixedPointResult",
    "probe_set",
    "gnorm",
    "gdistance",
    "one_sided_lipschitz_margin",
    "gamma_apply",
    "fixed_point",
]


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach the tolerance; carries the history."""

    def __init__(self, message, history, last=None):
        super().__init__(message)
        self.history = history
        self.last = last


class GFunction:
    """A field ``g(t, x)``, explicit or represented by stored empirical laws.

    Use :meth:`zero`, :meth:`explicit` or :meth:`empirical` to construct.
    """

    def __init__(self, kind, dimension, fn=None, times=None, summaries=None, clouds=None, kernel=None,
                 r=2.0, x0=None):
        self.kind = kind
        self.dimension = int(dimension)
        self._fn = fn
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.summaries = summaries
        self.clouds = clouds
        self.kernel = kernel
        self.r = float(r)
        self.x0 = np.zeros(self.dimension) if x0 is None else np.asarray(x0, dtype=float)
        self.snapshots = []
        self.audit = None

    @classmethod
    def zero(cls, dimension, r=2.0, x0=None):
        return cls("zero", dimension, r=r, x0=x0)

    @classmethod
    def explicit(cls, fn, dimension, r=2.0, x0=None):
        """Wrap ``fn(t, X) -> (N, d)``."""
        return cls("explicit", dimension, fn=fn, r=r, x0=x0)

    @classmethod
    def empirical(cls, times, clouds, kernel, m_store=1024, r=2.0, x0=None):
        """``g(t, x) = mean_m f(x - Y_m(t))`` from clouds ``Y(t_k)`` (nearest time)."""
        clouds = [np.atleast_2d(np.asarray(c, dtype=float)) for c in clouds]
        summaries = [kernel.summarize(c) for c in clouds]
        thinned = [_thin(c, m_store) for c in clouds]
        if not kernel.supports_moments:
            summaries = [kernel.summarize(c) for c in thinned]
        return cls("empirical", clouds[0].shape[1], times=times, summaries=summaries, clouds=thinned,
                   kernel=kernel, r=r, x0=x0)

    def time_index(self, t):
        if self.times is None:
            raise ValueError("only empirical fields have stored times")
        return int(np.argmin(np.abs(self.times - float(t))))

    def __call__(self, t, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(X)
        if self.kind == "explicit":
            out = np.asarray(self._fn(t, X), dtype=float).reshape(X.shape)
        else:
            out = self.kernel.convolve_summary(X, self.summaries[self.time_index(t)])
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite g value at t={t}")
        return out

    def __sub__(self, other):
        a, b = self, other
        return GFunction.explicit(lambda t, X: a(t, X) - b(t, X), self.dimension, self.r, self.x0)


def _thin(cloud, m_store):
    if m_store is None or cloud.shape[0] <= m_store:
        return cloud.copy()
    stride = int(np.ceil(cloud.shape[0] / m_store))
    return cloud[::stride].copy()


@dataclass
class ProbeSet:
    """Product probe grid ``times x points``."""

    times: np.ndarray
    points: np.ndarray

    def __len__(self):
        return len(self.times) * len(self.points)


def probe_set(domain, times, anchors=(), n_quasi=32, window=10.0):
    """Deterministic probes: anchors (e.g. ``x_tilde``, ``x0``), the corners of the
    (finite part of the) bounding box and ``n_quasi`` Halton points, all projected
    into the domain."""
    d = domain.dimension
    lo, hi = domain.bounding_box()
    c = domain.interior_point()
    lo = np.where(np.isfinite(lo), lo, c - window)
    hi = np.where(np.isfinite(hi), hi, c + window)
    pts = [np.atleast_2d(np.asarray(a, dtype=float)).reshape(-1, d) for a in anchors]
    if d <= 10:
        corners = np.array(np.meshgrid(*[[lo[i], hi[i]] for i in range(d)], indexing="ij")).reshape(d, -1).T
        pts.append(corners)
    if n_quasi:
        u = qmc.Halton(d, scramble=False).random(n_quasi + 1)[1:]
        pts.append(lo + u * (hi - lo))
    P = domain.project_points(np.vstack(pts))[0]
    return ProbeSet(np.asarray(times, dtype=float), P)


def _as_probe_list(probes):
    if isinstance(probes, ProbeSet):
        return [(t, probes.points) for t in probes.times]
    out = []
    for t, x in probes:
        out.append((float(t), np.atleast_2d(np.asarray(x, dtype=float))))
    if not out:
        raise ValueError("probe set is empty")
    return out


def gnorm(g, probes, r=None, x0=None):
    """``max |g(t, x)| / (1 + |x - x0|^r)`` over the probes."""
    r = g.r if r is None else float(r)
    x0 = g.x0 if x0 is None else np.asarray(x0, dtype=float)
    best = 0.0
    for t, X in _as_probe_list(probes):
        val = np.linalg.norm(g(t, X), axis=1)
        if not np.all(np.isfinite(val)):
            raise FloatingPointError("non-finite g value on the probe set")
        w = 1.0 + np.linalg.norm(X - x0, axis=1) ** r
        best = max(best, float(np.max(val / w)))
    return best


def gdistance(g1, g2, probes, r=None, x0=None):
    """Weighted sup distance ``gnorm(g1 - g2)``."""
    return gnorm(g1 - g2, probes, r if r is not None else g1.r, x0 if x0 is not None else g1.x0)


def one_sided_lipschitz_margin(g, probes, L):
    """Worst ``L|x-y|^2 - <x-y, g(t,x)-g(t,y)>`` over probe pairs (negative = violated)."""
    worst = np.inf
    for t, X in _as_probe_list(probes):
        G = g(t, X)
        dx = X[:, None, :] - X[None, :, :]
        dg = G[:, None, :] - G[None, :, :]
        m = L * np.sum(dx * dx, axis=-1) - np.sum(dx * dg, axis=-1)
        worst = min(worst, float(m.min()))
    return worst


def gamma_apply(g, model, domain, M, dt, epsilon, seed, t_end=1.0, initial=None, m_store=1024,
                snapshot_times=(), workers=1):
    """Monte Carlo image ``Gamma[g]`` from ``M`` independent copies driven by ``b + g``.

    Returns an empirical :class:`GFunction` over the simulation grid. Full
    (unthinned) clouds at ``snapshot_times`` are attached as ``.snapshots`` and
    the run's domain audit as ``.audit``.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    n = max(1, int(round(t_end / dt)))
    cfg = SimConfig(dt=dt, t_end=t_end, epsilon=epsilon, N=M, seed=seed, interaction="frozen_g",
                    frozen_g=g, workers=workers, moment_powers=(),
                    snapshot_times=tuple(np.arange(n + 1) * dt))
    kernel = model.kernel
    want = set(int(round(s / dt)) for s in snapshot_times)
    times, summaries, thinned, snaps = [], [], [], []

    def record(cloud):
        times.append(cloud.time)
        summaries.append(kernel.summarize(cloud.positions) if kernel.supports_moments
                         else kernel.summarize(_thin(cloud.positions, m_store)))
        thinned.append(_thin(cloud.positions, m_store))
        if cloud.step in want:
            snaps.append(cloud.copy())

    res = simulate_paths(model, domain, cfg, recorder=record, initial=initial)
    out = GFunction("empirical", model.dimension, times=np.asarray(times), summaries=summaries, clouds=thinned,
                    kernel=kernel, r=model.r, x0=model.x0)
    out.snapshots = snaps
    out.audit = res.audit
    out.final_cloud = res.cloud
    return out


@dataclass
class FixedPointResult:
    g: GFunction
    history: list = field(default_factory=list)
    converged: bool = True

    @property
    def distances(self):
        return [h["distance"] for h in self.history]

    def to_dict(self):
        return {"converged": self.converged, "iterations": self.history}


def fixed_point(model, domain, M, dt, epsilon, tol, max_iter, seed, t_end=1.0, initial=None, m_store=1024,
                probes=None, snapshot_times=(), workers=1, x_tilde=None, raise_on_failure=True):
    """Iterate ``g_{k+1} = Gamma[g_k]`` from ``g_0 = 0`` until the probe distance is below ``tol``.

    Every iteration reuses the same noise streams (common random numbers), so
    the measured distances reflect the map rather than fresh Monte Carlo noise.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations without reaching ``tol`` (unless
        ``raise_on_failure`` is false); the distance history is attached.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if probes is None:
        from .engine import n_steps_for

        n = n_steps_for(t_end, dt)
        nodes = np.unique(np.linspace(0, n, min(n, 20) + 1).round()) * dt
        anchors = [model.x0] + ([x_tilde] if x_tilde is not None else [])
        probes = probe_set(domain, nodes, anchors=anchors)
    g = GFunction.zero(model.dimension, model.r, model.x0)
    history = []
    for it in range(1, max_iter + 1):
        t0 = _time.perf_counter()
        g_new = gamma_apply(g, model, domain, M, dt, epsilon, seed, t_end=t_end, initial=initial,
                            m_store=m_store, snapshot_times=snapshot_times, workers=workers)
        dist = gdistance(g_new, g, probes, model.r, model.x0)
        history.append({"iteration": it, "distance": dist, "wall_time": _time.perf_counter() - t0})
        g = g_new
        if dist < tol:
            return FixedPointResult(g, history, True)
    if raise_on_failure:
        raise ConvergenceError(
            f"fixed point not reached after {max_iter} iterations; distances {[h['distance'] for h in history]}",
            history,
            g,
        )
    return FixedPointResult(g, history, False)
