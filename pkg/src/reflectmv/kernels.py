"""Odd interaction kernels ``f`` and their convolutions against point clouds.

``convolve(x, y)`` returns ``(1/M) sum_j f(x_i - y_j)`` for every row of ``x``.
The generic path evaluates all pairs in fixed-size tiles; the self-interaction
of a cloud uses antisymmetry ``f(x_i - x_j) = -f(x_j - x_i)`` so each unordered
pair is evaluated once. Tile sizes do not depend on the worker count, and the
per-tile partial sums are reduced in a fixed order, so results are bitwise
independent of how many threads are used.

:class:`CubicKernel` additionally has an exact moment expansion that costs
O(N + M) instead of O(N M).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["Kernel", "ZeroKernel", "CubicKernel", "CallableKernel", "TILE"]

TILE = 256


def _tiles(n, size=TILE):
    return [(a, min(a + size, n)) for a in range(0, n, size)]


class Kernel:
    """Base class. Subclasses implement ``__call__`` on ``(..., d)`` arrays."""

    is_zero = False
    supports_moments = False
    name = "kernel"

    def __call__(self, z):
        raise NotImplementedError

    def potential(self, z):
        """Convex potential ``F`` with ``f = -grad F``; ``None`` when unknown."""
        return None

    @property
    def has_potential(self):
        return False

    # -- generic pairwise paths ---------------------------------------------
    def _pair_rows(self, x, y, a, b):
        diff = x[a:b, None, :] - y[None, :, :]
        return self(diff).sum(axis=1)

    def convolve(self, x, y, method="auto", workers=1):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        if method == "moments" or (method == "auto" and self.supports_moments):
            return self._convolve_moments(x, y)
        tiles = _tiles(x.shape[0])
        out = np.empty_like(x)
        acc = [None] * len(tiles)

        def job(k):
            a, b = tiles[k]
            parts = [self._pair_rows(x, y[c:e], a, b) for c, e in _tiles(y.shape[0])]
            acc[k] = _ordered_sum(parts)

        _run(job, len(tiles), workers)
        for (a, b), v in zip(tiles, acc):
            out[a:b] = v
        return out / y.shape[0]

    def self_convolve(self, x, method="auto", workers=1):
        """``(1/N) sum_j f(x_i - x_j)`` including ``j = i`` (``f(0) = 0``)."""
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        if method == "moments" or (method == "auto" and self.supports_moments):
            return self._convolve_moments(x, x)
        tiles = _tiles(x.shape[0])
        nt = len(tiles)
        pairs = [(i, j) for i in range(nt) for j in range(i, nt)]
        row_sums = {}
        col_sums = {}

        def job(k):
            i, j = pairs[k]
            a, b = tiles[i]
            c, e = tiles[j]
            block = self(x[a:b, None, :] - x[None, c:e, :])
            row_sums[(i, j)] = block.sum(axis=1)
            if i != j:
                col_sums[(i, j)] = -block.sum(axis=0)

        _run(job, len(pairs), workers)
        out = np.empty_like(x)
        for t, (a, b) in enumerate(tiles):
            parts = []
            for s in range(nt):
                if s < t:
                    parts.append(col_sums[(s, t)])
                else:
                    parts.append(row_sums[(t, s)])
            out[a:b] = _ordered_sum(parts)
        return out / x.shape[0]

    def _convolve_moments(self, x, y):
        raise NotImplementedError(f"{type(self).__name__} has no moment expansion")

    # -- stored laws ----------------------------------------------------------
    def summarize(self, y):
        """Compact representation of a cloud sufficient for :meth:`convolve_summary`.

        The generic summary is the cloud itself; kernels with a moment expansion
        keep only the (exact) moments, whatever the cloud size.
        """
        return np.array(y, dtype=float, copy=True)

    def convolve_summary(self, x, summary, method="auto", workers=1):
        return self.convolve(x, summary, method=method, workers=workers)

    def to_dict(self):
        raise NotImplementedError


def _ordered_sum(parts):
    total = parts[0].copy()
    for p in parts[1:]:
        total += p
    return total


def _run(job, n, workers):
    if workers <= 1 or n <= 1:
        for k in range(n):
            job(k)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(job, range(n)))


class ZeroKernel(Kernel):
    is_zero = True
    name = "zero"

    def __call__(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def potential(self, z):
        return np.zeros(np.asarray(z).shape[:-1])

    @property
    def has_potential(self):
        return True

    def to_dict(self):
        return {"kind": "zero"}


class CubicKernel(Kernel):
    """``f(z) = -alpha z - beta z |z|^2``, the gradient flow of
    ``F(z) = alpha |z|^2 / 2 + beta |z|^4 / 4``.

    Odd, with ``f(0) = 0`` and ``<f(x) - f(y), x - y> <= 0`` for
    ``alpha, beta >= 0``.
    """

    supports_moments = True
    name = "cubic"

    def __init__(self, alpha=0.0, beta=1.0):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.is_zero = self.alpha == 0.0 and self.beta == 0.0

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        sq = np.sum(z * z, axis=-1, keepdims=True)
        return -(self.alpha + self.beta * sq) * z

    def potential(self, z):
        z = np.asarray(z, dtype=float)
        sq = np.sum(z * z, axis=-1)
        return 0.5 * self.alpha * sq + 0.25 * self.beta * sq * sq

    @property
    def has_potential(self):
        return True

    def radial_profile(self, s):
        """``G`` with ``F(z) = G(|z|)``."""
        s = np.asarray(s, dtype=float)
        return 0.5 * self.alpha * s**2 + 0.25 * self.beta * s**4

    @staticmethod
    def _moments(y):
        y = np.asarray(y, dtype=float)
        m1 = y.mean(axis=0)
        if y.shape[1] == 1:
            yy = y[:, 0]
            y2 = yy * yy
            return ("1d", m1, y2.mean(), (y2 * yy).mean())
        ny2 = np.sum(y * y, axis=1)
        return ("nd", m1, ny2.mean(), (y.T @ y) / y.shape[0], (y * ny2[:, None]).mean(axis=0))

    def _apply_moments(self, x, mom):
        # E_y[(x-y)|x-y|^2] = x|x|^2 - 2x(x.m1) + x s2 - m1|x|^2 + 2 S x - m3
        if mom[0] == "1d":
            _, m1, m2, m3 = mom
            xx = x[:, 0]
            cubic = xx * (xx * (xx - 3.0 * m1[0]) + 3.0 * m2) - m3
            lin = xx - m1[0]
            return (-(self.alpha * lin + self.beta * cubic))[:, None]
        _, m1, s2, S, m3 = mom
        nx2 = np.sum(x * x, axis=1, keepdims=True)
        cubic = x * nx2 - 2.0 * x * (x @ m1)[:, None] + x * s2 - m1[None, :] * nx2 + 2.0 * x @ S - m3[None, :]
        return -(self.alpha * (x - m1) + self.beta * cubic)

    def _convolve_moments(self, x, y):
        return self._apply_moments(x, self._moments(y))

    def summarize(self, y):
        return self._moments(y)

    def convolve_summary(self, x, summary, method="auto", workers=1):
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        return self._apply_moments(x, summary)

    def to_dict(self):
        return {"kind": "cubic", "alpha": self.alpha, "beta": self.beta}


class CallableKernel(Kernel):
    """Wrap a vectorised callable ``f(z)`` (and optionally its potential)."""

    name = "callable"

    def __init__(self, func, potential=None, label=None):
        self._func = func
        self._potential = potential
        self.label = label

    def __call__(self, z):
        return np.asarray(self._func(np.asarray(z, dtype=float)), dtype=float)

    def potential(self, z):
        if self._potential is None:
            return None
        return np.asarray(self._potential(np.asarray(z, dtype=float)), dtype=float)

    @property
    def has_potential(self):
        return self._potential is not None

    def to_dict(self):
        return {"kind": "callable", "label": self.label}
