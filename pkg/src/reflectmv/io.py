"""Snapshot recording and artifact writing.

Two snapshot formats are supported (see ``docs/formats.md``):

* CSV with header ``t,particle_id,x1..xd,k_abs``; floats written with
  ``repr`` precision (17 significant digits), so files round-trip exactly.
* A binary block format: the 8-byte magic ``RMVSNAP1``, a little-endian
  ``uint32`` header length, a UTF-8 JSON header ``{"dimension", "dtype",
  "columns", "blocks": [{"t", "n", "offset"}...]}`` and then one contiguous
  little-endian float64 block per snapshot with the columns of the CSV.

All files are written atomically: to a temporary file in the target directory
which is then renamed over the destination.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import struct
import tempfile

import numpy as np

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_csv",
    "read_csv",
    "write_json",
    "SnapshotRecorder",
    "write_snapshots_csv",
    "read_snapshots_csv",
    "write_snapshots_binary",
    "read_snapshots_binary",
    "sha256_file",
    "format_float",
]

MAGIC = b"RMVSNAP1"


def format_float(v):
    """Shortest round-tripping representation of a float."""
    v = float(v)
    if v != v:
        return "nan"
    if v in (float("inf"), float("-inf")):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text):
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path, header, rows):
    """Write rows atomically; floats are formatted to round-trip exactly."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(path, obj):
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rows(cloud):
    n, d = cloud.positions.shape
    tcol = np.full((n, 1), float(cloud.time))
    ids = cloud.particle_ids.astype(float)[:, None]
    return np.hstack([tcol, ids, cloud.positions, cloud.local_time_magnitude[:, None]])


def _columns(d):
    return ["t", "particle_id"] + [f"x{i + 1}" for i in range(d)] + ["k_abs"]


class SnapshotRecorder:
    """Callable recorder for :func:`reflectmv.engine.simulate_paths`.

    Keeps copies of the recorded clouds (thinned to ``max_particles`` by
    strided subsampling when given) and can write them in either format.
    """

    def __init__(self, max_particles=None):
        self.max_particles = max_particles
        self.clouds = []

    def __call__(self, cloud):
        c = cloud.copy()
        if self.max_particles is not None and c.N > self.max_particles:
            idx = np.linspace(0, c.N - 1, self.max_particles).round().astype(int)
            c.positions = c.positions[idx]
            c.local_time_magnitude = c.local_time_magnitude[idx]
            c.local_time_vector = c.local_time_vector[idx]
            c.particle_ids = c.particle_ids[idx]
        self.clouds.append(c)

    @property
    def times(self):
        return np.array([c.time for c in self.clouds])

    def write_csv(self, path):
        return write_snapshots_csv(path, self.clouds)

    def write_binary(self, path):
        return write_snapshots_binary(path, self.clouds)


def write_snapshots_csv(path, clouds):
    if not clouds:
        raise ValueError("no snapshots to write")
    d = clouds[0].dimension
    buf = _io.StringIO()
    buf.write(",".join(_columns(d)) + "\n")
    for c in clouds:
        for row in _rows(c):
            vals = [format_float(row[0]), str(int(row[1]))] + [format_float(v) for v in row[2:]]
            buf.write(",".join(vals) + "\n")
    return atomic_write_text(path, buf.getvalue())


def read_snapshots_csv(path):
    """Return a list of ``(t, ids, positions, k_abs)`` tuples, one per snapshot time."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for t in np.unique(data[:, 0]):
        blk = data[data[:, 0] == t]
        out.append((float(t), blk[:, 1].astype(np.int64), blk[:, 2:-1], blk[:, -1]))
    return out


def write_snapshots_binary(path, clouds):
    if not clouds:
        raise ValueError("no snapshots to write")
    d = clouds[0].dimension
    blocks, payload, offset = [], [], 0
    for c in clouds:
        arr = np.ascontiguousarray(_rows(c), dtype="<f8")
        blocks.append({"t": float(c.time), "n": int(arr.shape[0]), "offset": offset})
        payload.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"dimension": d, "dtype": "<f8", "columns": _columns(d), "blocks": blocks}).encode()
    data = MAGIC + struct.pack("<I", len(header)) + header + b"".join(payload)
    return atomic_write_bytes(path, data)


def read_snapshots_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValueError("not a snapshot file (bad magic)")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + hlen].decode())
    base = 12 + hlen
    ncol = len(header["columns"])
    out = []
    for b in header["blocks"]:
        arr = np.frombuffer(raw, dtype="<f8", count=b["n"] * ncol, offset=base + b["offset"]).reshape(b["n"], ncol)
        out.append((b["t"], arr[:, 1].astype(np.int64), arr[:, 2:-1].copy(), arr[:, -1].copy()))
    return out
