"""Distances and statistics between empirical measures.

``wasserstein2`` offers three methods:

``exact_1d``
    Quantile coupling of sorted samples. For equal sizes this pairs the order
    statistics; for unequal sizes the two step quantile functions are merged
    and integrated exactly.
``exact_assignment``
    Optimal permutation for the squared-distance cost matrix, solved by
    ``scipy.optimize.linear_sum_assignment`` (a Jonker-Volgenant variant).
    Equal sizes, ``M <= 512``.
``sliced``
    Average over ``K`` random directions of the squared 1-D distance of the
    projections, square-rooted. An *estimator* of a different (smaller or
    equal) distance, not a bound on the exact one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

from .io import write_csv, write_json

__all__ = [
    "EmpiricalMeasure",
    "wasserstein2",
    "sup_moment",
    "MomentEstimate",
    "RateFit",
    "poc_rate_fit",
    "write_rate_csv",
    "write_rate_json",
    "ASSIGNMENT_MAX",
]

ASSIGNMENT_MAX = 512


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniform-weight atomic measure on the rows of ``samples``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError("an empirical measure needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def size(self):
        return self.samples.shape[0]

    @property
    def dimension(self):
        return self.samples.shape[1]


def _measure(m):
    return m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure(m)


def _w2sq_1d(x, y):
    x = np.sort(x)
    y = np.sort(y)
    if x.size == y.size:
        d = x - y
        return float(np.dot(d, d) / x.size)
    # merge the breakpoints of both quantile functions on (0, 1]
    ex = np.arange(1, x.size + 1) / x.size
    ey = np.arange(1, y.size + 1) / y.size
    edges = np.union1d(ex, ey)
    widths = np.diff(np.concatenate([[0.0], edges]))
    mids = edges - 0.5 * widths
    qx = x[np.minimum(np.floor(mids * x.size).astype(int), x.size - 1)]
    qy = y[np.minimum(np.floor(mids * y.size).astype(int), y.size - 1)]
    return float(np.sum(widths * (qx - qy) ** 2))


def _w2sq_assignment(X, Y):
    cost = np.sum((X[:, None, :] - Y[None, :, :]) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / X.shape[0])


def wasserstein2(mu, nu, method="exact_1d", n_projections=64, seed=0, squared=False):
    """Wasserstein-2 distance between two empirical measures.

    Parameters
    ----------
    mu, nu : EmpiricalMeasure or array_like
    method : {"exact_1d", "exact_assignment", "sliced"}
    n_projections, seed : int
        Number of directions and their seed for ``"sliced"``.
    squared : bool
        Return ``W2^2`` instead of ``W2``.
    """
    mu, nu = _measure(mu), _measure(nu)
    if mu.dimension != nu.dimension:
        raise ValueError(f"dimension mismatch: {mu.dimension} vs {nu.dimension}")
    if method == "exact_1d":
        if mu.dimension != 1:
            raise ValueError("exact_1d requires one-dimensional samples")
        val = _w2sq_1d(mu.samples[:, 0], nu.samples[:, 0])
    elif method == "exact_assignment":
        if mu.size != nu.size:
            raise ValueError("exact_assignment requires equal sample counts")
        if mu.size > ASSIGNMENT_MAX:
            raise ValueError(f"exact_assignment is limited to M <= {ASSIGNMENT_MAX} (got {mu.size})")
        val = _w2sq_assignment(mu.samples, nu.samples)
    elif method == "sliced":
        if n_projections < 1:
            raise ValueError("n_projections must be >= 1")
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((n_projections, mu.dimension))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pm, pn = mu.samples @ u.T, nu.samples @ u.T
        val = float(np.mean([_w2sq_1d(pm[:, k], pn[:, k]) for k in range(n_projections)]))
    else:
        raise ValueError(f"unknown method {method!r}")
    val = max(val, 0.0)
    return val if squared else math.sqrt(val)


@dataclass
class MomentEstimate:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray

    @property
    def sup(self):
        return float(np.max(self.mean))

    @property
    def argsup(self):
        return int(np.argmax(self.mean))

    @property
    def sup_stderr(self):
        return float(self.stderr[self.argsup])


def sup_moment(snapshots, p, x_ref):
    """Per-time sample means of ``|X_t - x_ref|^p`` with standard errors.

    ``snapshots`` is a sequence of clouds (objects with ``.positions`` and
    ``.time``) or ``(t, positions)`` pairs.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    x_ref = np.asarray(x_ref, dtype=float)
    times, means, errs = [], [], []
    for s in snapshots:
        if hasattr(s, "positions"):
            t, X = s.time, s.positions
        else:
            t, X = s
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != x_ref.size:
            X = X.reshape(-1, x_ref.size)
        v = np.linalg.norm(X - x_ref, axis=1) ** p
        times.append(float(t))
        means.append(float(v.mean()))
        errs.append(float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0)
    return MomentEstimate(np.array(times), np.array(means), np.array(errs))


@dataclass
class RateFit:
    slope: float
    intercept: float
    stderr: float
    n: int

    def ci(self, level=0.95):
        if self.n <= 2:
            return (-math.inf, math.inf)
        q = stats.t.ppf(0.5 + level / 2, self.n - 2)
        return (self.slope - q * self.stderr, self.slope + q * self.stderr)

    def to_dict(self):
        lo, hi = self.ci()
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr, "n": self.n,
                "ci95": [lo, hi]}


def poc_rate_fit(pairs):
    """Least-squares slope of ``log(error)`` against ``log(N)``.

    Parameters
    ----------
    pairs : sequence of (N, error)

    Returns
    -------
    RateFit
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("expected (N, error) pairs")
    N, err = arr[:, 0], arr[:, 1]
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ValueError("errors must be positive and finite")
    if np.unique(N).size < 3:
        raise ValueError("need at least three distinct N values")
    res = stats.linregress(np.log(N), np.log(err))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), int(N.size))


def write_rate_csv(path, rows):
    """Rows of ``(N, error, stderr)``."""
    return write_csv(path, ["N", "sup_w2_squared", "stderr"], [(int(n), float(e), float(s)) for n, e, s in rows])


def write_rate_json(path, fit, extra=None):
    obj = fit.to_dict()
    if extra:
        obj.update(extra)
    return write_json(path, obj)
