"""Counter-based Gaussian streams keyed by (seed, particle, step).

Each standard normal is a pure function of ``(seed, tag, particle, step,
component)``: the 64-bit seed is the Philox4x32-10 key and the remaining
coordinates fill the 128-bit counter. Draws are therefore reproducible
whatever order, chunking or number of workers is used to produce them.

Counter layout (four 32-bit words)::

    c0 = step & 0xffffffff
    c1 = step >> 32
    c2 = particle & 0xffffffff
    c3 = tag << 24 | (particle >> 32 & 0xff) << 16 | component_pair

One Philox call yields four 32-bit words, turned into two 53-bit uniforms
and then two normals by Box-Muller.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

__all__ = ["philox4x32", "gaussian_block", "derive_seed", "TAG_DYNAMICS", "TAG_INITIAL", "TAG_AUX"]

TAG_DYNAMICS = 0
TAG_INITIAL = 1
TAG_AUX = 2

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)


@numba.njit(cache=True, nogil=True, inline="always")
def _philox(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> np.uint64(32)) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> np.uint64(32)) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def _philox_array(ctr, key):
    out = np.empty(4, dtype=np.uint64)
    a, b, c, d = _philox(
        np.uint64(ctr[0]), np.uint64(ctr[1]), np.uint64(ctr[2]), np.uint64(ctr[3]),
        np.uint64(key[0]), np.uint64(key[1]),
    )
    out[0] = a
    out[1] = b
    out[2] = c
    out[3] = d
    return out


def philox4x32(counter, key):
    """Raw Philox4x32-10 block for a 4-word counter and 2-word key."""
    return _philox_array(np.asarray(counter, dtype=np.uint64), np.asarray(key, dtype=np.uint64)).astype(np.uint32)


@numba.njit(cache=True, nogil=True)
def _gauss_kernel(k0, k1, tag, particles, step0, n_steps, dim, out):
    two_pi = 2.0 * np.pi
    inv53 = 1.0 / 9007199254740992.0
    npairs = (dim + 1) // 2
    for s in range(n_steps):
        step = np.uint64(step0 + s)
        c0 = step & _MASK
        c1 = step >> np.uint64(32)
        for i in range(particles.size):
            pid = np.uint64(particles[i])
            c2 = pid & _MASK
            hi = (pid >> np.uint64(32)) & np.uint64(0xFF)
            for q in range(npairs):
                c3 = (np.uint64(tag) << np.uint64(24)) | (hi << np.uint64(16)) | np.uint64(q)
                w0, w1, w2, w3 = _philox(c0, c1, c2, c3, k0, k1)
                u1 = ((w0 >> np.uint64(5)) * np.uint64(67108864) + (w1 >> np.uint64(6))) * inv53
                u2 = ((w2 >> np.uint64(5)) * np.uint64(67108864) + (w3 >> np.uint64(6))) * inv53
                rad = np.sqrt(-2.0 * np.log(1.0 - u1))
                ang = two_pi * u2
                j = 2 * q
                out[s, i, j] = rad * np.cos(ang)
                if j + 1 < dim:
                    out[s, i, j + 1] = rad * np.sin(ang)


def _split_seed(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def gaussian_block(seed, particles, step0, n_steps, dim, tag=TAG_DYNAMICS, workers=1):
    """Standard normals of shape ``(n_steps, len(particles), dim)``.

    Entry ``[s, i, j]`` depends only on ``(seed, tag, particles[i], step0 + s, j)``.
    """
    particles = np.ascontiguousarray(particles, dtype=np.int64)
    if particles.size and (particles.min() < 0 or particles.max() >= 1 << 40):
        raise ValueError("particle ids must lie in [0, 2**40)")
    if dim > 2 * 0xFFFF:
        raise ValueError("noise dimension too large for the counter layout")
    k0, k1 = _split_seed(seed)
    out = np.empty((int(n_steps), particles.size, int(dim)))
    workers = max(1, int(workers))
    if workers == 1 or particles.size < 2 * workers:
        _gauss_kernel(k0, k1, int(tag), particles, int(step0), int(n_steps), int(dim), out)
        return out
    bounds = np.linspace(0, particles.size, workers + 1).astype(int)
    parts = [(bounds[w], bounds[w + 1]) for w in range(workers) if bounds[w + 1] > bounds[w]]
    bufs = [np.empty((int(n_steps), b - a, int(dim))) for a, b in parts]

    def run(job):
        (a, b), buf = job
        _gauss_kernel(k0, k1, int(tag), particles[a:b], int(step0), int(n_steps), int(dim), buf)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, zip(parts, bufs)))
    for (a, b), buf in zip(parts, bufs):
        out[:, a:b, :] = buf
    return out


def derive_seed(seed, *labels):
    """Deterministic 64-bit child seed from a parent seed and string/int labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for lab in labels:
        h.update(b"\x00" + str(lab).encode())
    return int.from_bytes(h.digest(), "little")
