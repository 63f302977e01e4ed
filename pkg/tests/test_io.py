"""Snapshot formats and atomic writers."""
from __future__ import annotations

import os

import numpy as np
import pytest

from reflectmv.engine import SimConfig, simulate_paths
from reflectmv.io import (
    SnapshotRecorder,
    atomic_write_text,
    format_float,
    read_csv,
    read_snapshots_binary,
    read_snapshots_csv,
    sha256_file,
    write_csv,
    write_json,
)
from reflectmv.model import get_model


@pytest.fixture
def recorder():
    model = get_model("quartic-2d")
    rec = SnapshotRecorder()
    cfg = SimConfig(dt=0.01, t_end=0.1, N=7, seed=1, snapshot_times=(0.0, 0.05, 0.1))
    simulate_paths(model, model.default_domain, cfg, recorder=rec)
    return rec


def test_csv_round_trip_is_exact(recorder, tmp_path):
    path = recorder.write_csv(tmp_path / "s.csv")
    header, _ = read_csv(path)
    assert header == ["t", "particle_id", "x1", "x2", "k_abs"]
    snaps = read_snapshots_csv(path)
    assert len(snaps) == 3
    for (t, ids, pos, k), c in zip(snaps, recorder.clouds):
        assert t == c.time
        np.testing.assert_array_equal(ids, c.particle_ids)
        np.testing.assert_array_equal(pos, c.positions)
        np.testing.assert_array_equal(k, c.local_time_magnitude)


def test_binary_round_trip_is_exact(recorder, tmp_path):
    path = recorder.write_binary(tmp_path / "s.bin")
    with open(path, "rb") as fh:
        assert fh.read(8) == b"RMVSNAP1"
    for (t, ids, pos, k), c in zip(read_snapshots_binary(path), recorder.clouds):
        assert t == c.time
        np.testing.assert_array_equal(pos, c.positions)
        np.testing.assert_array_equal(k, c.local_time_magnitude)


def test_bad_magic(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOTSNAP!" + b"\0" * 10)
    with pytest.raises(ValueError, match="magic"):
        read_snapshots_binary(p)


def test_thinning_recorder():
    model = get_model("ou-1d")
    rec = SnapshotRecorder(max_particles=10)
    simulate_paths(model, model.default_domain, SimConfig(dt=0.1, t_end=0.2, N=100, snapshot_times=(0.2,)),
                   recorder=rec)
    assert rec.clouds[0].N == 10
    assert rec.clouds[0].particle_ids[-1] == 99


def test_format_float_round_trips():
    for v in [0.1, 1 / 3, 1e-300, -2.5e17, float("inf")]:
        assert float(format_float(v)) == v
    assert format_float(float("nan")) == "nan"


def test_atomic_writes_leave_no_temporaries(tmp_path):
    write_csv(tmp_path / "a.csv", ["x"], [(1.0,), (2.0,)])
    write_json(tmp_path / "a.json", {"v": np.float64(1.5), "arr": np.arange(3)})
    atomic_write_text(tmp_path / "sub" / "b.txt", "hi")
    names = sorted(os.listdir(tmp_path))
    assert names == ["a.csv", "a.json", "sub"]
    assert (tmp_path / "a.csv").read_text() == "x\n1.0\n2.0\n"
    assert len(sha256_file(tmp_path / "a.csv")) == 64
