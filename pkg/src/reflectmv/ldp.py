"""Small-noise machinery: the noiseless path, controlled skeletons and the action.

All integrators are projected explicit Euler schemes on a uniform grid of step
``dt``:

``psi``
    ``psi' = b(t, psi)`` reflected on the domain.
``skeleton``
    ``H' = b(t, H) + f(H - psi) + sigma(t, H) h'`` reflected, for a control
    ``h`` that is piecewise linear on the grid with ``h(0) = 0``.
``euler_skeleton``
    As ``skeleton`` but with ``sigma`` frozen at the coarse nodes ``iT/n`` and
    the control replaced by its linear interpolation between those nodes, i.e.
    on coarse cell ``i`` the control enters through the slope
    ``(n / T) (h((i+1)T/n) - h(iT/n))``.

``action(h) = 1/2 sum_k |h'_k|^2 dt`` is the energy of a piecewise-linear
control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import SimConfig, n_steps_for, simulate_paths
from .io import write_csv

__all__ = [
    "ControlPath",
    "PathGrid",
    "psi",
    "skeleton",
    "euler_skeleton",
    "action",
    "ConcentrationRow",
    "concentration_check",
    "fit_concentration_constant",
    "write_concentration_csv",
]


def _grid(T, dt):
    n = n_steps_for(T, dt)
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    return n, np.arange(n + 1) * dt


@dataclass
class ControlPath:
    """A control ``h`` on a uniform grid: node values with ``h(0) = 0``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.times.size or self.times.size < 2:
            raise ValueError("control needs one value per grid node and at least two nodes")
        if np.any(v[0] != 0.0):
            raise ValueError("a control must start at h(0) = 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        steps = np.diff(self.times)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.max():
            raise ValueError("control grid must be uniform and increasing")
        self.values = v

    @classmethod
    def from_function(cls, fn, T, dt, dimension=1):
        """Sample ``fn(t) -> (d',)`` on the grid and shift so that ``h(0) = 0``."""
        _, t = _grid(T, dt)
        v = np.array([np.atleast_1d(fn(s)) for s in t], dtype=float).reshape(t.size, -1)
        return cls(t, v - v[0])

    @classmethod
    def linear(cls, slope, T, dt):
        a = np.atleast_1d(np.asarray(slope, dtype=float))
        _, t = _grid(T, dt)
        return cls(t, t[:, None] * a[None, :])

    @classmethod
    def zero(cls, T, dt, dimension=1):
        _, t = _grid(T, dt)
        return cls(t, np.zeros((t.size, dimension)))

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def dimension(self):
        return self.values.shape[1]

    @property
    def derivative(self):
        """Piecewise-constant slopes, one per cell."""
        return np.diff(self.values, axis=0) / self.dt

    def norm(self):
        """Cameron-Martin norm ``(int |h'|^2)^(1/2)``."""
        return math.sqrt(2.0 * action(self))


@dataclass
class PathGrid:
    """Node values of a reflected path and its accumulated local time."""

    times: np.ndarray
    values: np.ndarray
    local_time: np.ndarray

    def sup_distance(self, other):
        if self.values.shape != other.values.shape:
            raise ValueError("paths live on different grids")
        return float(np.max(np.linalg.norm(self.values - other.values, axis=1)))

    def at(self, t):
        k = int(round(t / (self.times[1] - self.times[0])))
        return self.values[k]

    def to_csv(self, path):
        d = self.values.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(d)] + ["k_abs"]
        rows = ([float(t)] + [float(v) for v in x] + [float(k)]
                for t, x, k in zip(self.times, self.values, self.local_time))
        return write_csv(path, header, rows)


def _integrate(model, domain, x0, n_steps, dt, t0, increment):
    """Projected Euler loop: ``x_{k+1} = P(x_k + increment(k, t_k, x_k))``."""
    d = model.dimension
    x = np.asarray(x0, dtype=float).reshape(1, d).copy()
    if not domain.contains_points(x, 0.0)[0]:
        raise ValueError("x0 must lie in the domain")
    vals = np.empty((n_steps + 1, d))
    lt = np.zeros(n_steps + 1)
    vals[0] = x[0]
    for k in range(n_steps):
        t = t0 + k * dt
        inc = increment(k, t, x)
        if not np.all(np.isfinite(inc)):
            raise FloatingPointError(f"non-finite increment at step {k}, t={t:.6g}, x={x[0]}")
        raw = x + inc
        if domain.contains_points(raw, 0.0)[0]:
            x = raw
            dk = 0.0
        else:
            x, kvec = domain.project_points(raw)
            dk = float(np.linalg.norm(kvec[0]))
        vals[k + 1] = x[0]
        lt[k + 1] = lt[k] + dk
    return PathGrid(t0 + np.arange(n_steps + 1) * dt, vals, lt)


def psi(model, domain, x0, dt, T):
    """Noiseless reflected path ``psi' = b(t, psi)``."""
    n, _ = _grid(T, dt)
    return _integrate(model, domain, x0, n, dt, 0.0, lambda k, t, x: model.b(t, x) * dt)


def _check_control(h, dt, T=None):
    if abs(h.dt - dt) > 1e-12 * dt:
        raise ValueError(f"control grid step {h.dt} differs from dt={dt}")
    if T is not None and abs(h.T - T) > 1e-9:
        raise ValueError("control horizon differs from T")


def skeleton(model, domain, x0, h, dt, psi_path=None):
    """Controlled skeleton ``H[h]`` on the grid of ``h``.

    ``psi_path`` (the noiseless path from the same ``x0`` on the same grid) is
    computed when not supplied.
    """
    _check_control(h, dt)
    if h.dimension != model.noise_dimension:
        raise ValueError("control dimension must equal the noise dimension")
    n = h.times.size - 1
    ref = psi_path if psi_path is not None else psi(model, domain, x0, dt, h.T)
    hdot = h.derivative

    def inc(k, t, x):
        drift = model.b(t, x) + model.f(x - ref.values[k][None, :])
        return (drift + model.diffuse(t, x, hdot[k][None, :])) * dt

    return _integrate(model, domain, x0, n, dt, 0.0, inc)


def euler_skeleton(model, domain, x0, h, n, dt, psi_path=None):
    """``H^n[h]``: diffusion frozen on the coarse mesh ``{iT/n}`` and the control
    linearly interpolated between coarse nodes.

    The number of grid steps must be a multiple of ``n``. With ``n`` equal to
    the number of steps this coincides with :func:`skeleton`.
    """
    _check_control(h, dt)
    if n < 1:
        raise ValueError("n must be >= 1")
    steps = h.times.size - 1
    if steps % n:
        raise ValueError(f"{steps} grid steps are not divisible by n={n}")
    per = steps // n
    ref = psi_path if psi_path is not None else psi(model, domain, x0, dt, h.T)
    coarse_slope = (h.values[per::per] - h.values[:-per:per]) / (per * dt)
    frozen = {}

    def inc(k, t, x):
        i = k // per
        if k % per == 0:
            frozen[i] = model.sigma_matrix(t, x)[0]
        drift = model.b(t, x) + model.f(x - ref.values[k][None, :])
        return (drift + (frozen[i] @ coarse_slope[i])[None, :]) * dt

    return _integrate(model, domain, x0, steps, dt, 0.0, inc)


def action(h):
    """``1/2 sum_k |h'_k|^2 dt`` for a piecewise-linear control."""
    hd = h.derivative
    return float(0.5 * np.sum(hd * hd) * h.dt)


@dataclass
class ConcentrationRow:
    epsilon: float
    estimate: float
    stderr: float
    t_sup: float
    paths: int


def concentration_check(model, domain, x0, eps_list, dt, paths, T=1.0, seed=0, workers=1,
                        interaction="particle_mean"):
    """``sup_t E|X^eps_t - psi_t|^2`` for each noise level.

    The particle system with ``N = paths`` is run for each ``eps`` with the same
    seed; the expectation at each grid time is the sample mean over particles.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be nonincreasing")
    ref = psi(model, domain, x0, dt, T)
    rows = []
    for eps in eps_list:
        if eps == 0.0:
            sim_paths = 1
        else:
            sim_paths = int(paths)
        sq = []

        def rec(c):
            sq.append(np.sum((c.positions - ref.values[c.step]) ** 2, axis=1))

        n, _ = _grid(T, dt)
        cfg = SimConfig(dt=dt, t_end=T, epsilon=eps, N=sim_paths, seed=seed, interaction=interaction,
                        workers=workers, moment_powers=(), snapshot_times=tuple(np.arange(n + 1) * dt))
        simulate_paths(model, domain, cfg, recorder=rec, initial=np.tile(np.asarray(x0, float), (sim_paths, 1)))
        means = np.array([v.mean() for v in sq])
        k = int(np.argmax(means))
        se = float(sq[k].std(ddof=1) / math.sqrt(sq[k].size)) if sq[k].size > 1 else 0.0
        rows.append(ConcentrationRow(eps, float(means[k]), se, float(ref.times[k]), sim_paths))
    return rows


def fit_concentration_constant(rows, T):
    """Smallest ``c`` with ``estimate <= eps T e^{cT}`` on the given rows."""
    vals = [math.log(r.estimate / (r.epsilon * T)) / T for r in rows if r.epsilon > 0 and r.estimate > 0]
    if not vals:
        raise ValueError("need at least one row with positive epsilon and estimate")
    return max(vals)


def write_concentration_csv(path, rows):
    return write_csv(
        path,
        ["epsilon", "sup_mean_sq_dev", "stderr", "t_sup", "paths"],
        [(r.epsilon, r.estimate, r.stderr, r.t_sup, r.paths) for r in rows],
    )
