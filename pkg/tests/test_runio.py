import json
import os

import numpy as np
import pytest

from kpsim import runio
from kpsim.config import RunConfig, ScaleInfo
from kpsim.grid import Grid2D, RealField2D, forward


@pytest.fixture
def grid():
    return Grid2D(nx=64, ny=8, lx=32.0, ly=16.0)


def test_snapshot_round_trip(tmp_path, grid):
    cfg = RunConfig()
    sink = runio.SnapshotSink(str(tmp_path), cfg, ScaleInfo(1.0), field_name="u", run_id="rt")
    rng = np.random.default_rng(0)
    f = RealField2D(grid, rng.standard_normal((grid.ny, grid.nx)))
    spec = forward(f)
    sink(0, 0.0, f, spec)
    back, meta = runio.read_snapshot(str(tmp_path), 0, "u")
    assert np.array_equal(back.values, f.values)
    assert meta["field_name"] == "u" and meta["run_id"] == "rt"
    assert meta["nx"] == grid.nx and meta["lx"] == grid.lx
    assert "frame_speed" in meta and "t" in meta


def test_sidecar_rescales_to_user_units(tmp_path, grid):
    cfg = RunConfig()
    sc = ScaleInfo(0.5)  # c0 = 8 problem
    sink = runio.SnapshotSink(str(tmp_path), cfg, sc, field_name="u", run_id="sc")
    f = RealField2D(grid, np.ones((grid.ny, grid.nx)))
    sink(0, 1.0, f, forward(f))
    back, meta = runio.read_snapshot(str(tmp_path), 0, "u")
    assert meta["t"] == pytest.approx(1.0 * sc.t_factor)
    assert meta["lx"] == pytest.approx(grid.lx * sc.x_factor)
    # stored values are user-frame: u_user = u_internal / u_factor
    assert back.values[0, 0] == pytest.approx(1.0 * sc.u_factor)


def test_resume_state_exact(tmp_path, grid):
    cfg = RunConfig()
    sink = runio.SnapshotSink(str(tmp_path), cfg, ScaleInfo(1.0), field_name="u", run_id="rs")
    rng = np.random.default_rng(1)
    f = RealField2D(grid, rng.standard_normal((grid.ny, grid.nx)))
    spec = forward(f)
    sink(7, 0.35, f, spec)
    step, t, back = runio.load_resume_state(str(tmp_path), grid)
    assert step == 7 and t == 0.35
    assert np.array_equal(back.coeffs, spec.coeffs)


def test_manifest_appends_and_skips_duplicates(tmp_path, grid):
    cfg = RunConfig()
    sink = runio.SnapshotSink(str(tmp_path), cfg, ScaleInfo(1.0), field_name="u", run_id="m")
    f = RealField2D(grid, np.zeros((grid.ny, grid.nx)))
    spec = forward(f)
    sink(0, 0.0, f, spec)
    sink(5, 0.5, f, spec)
    sink(5, 0.5, f, spec)  # duplicate ignored
    man = runio.read_manifest(os.path.join(str(tmp_path), "manifest.json"))
    assert [s["step"] for s in man["snapshots"]] == [0, 5]
    assert man["status"] == "running"
    sink.mark("complete")
    man = runio.read_manifest(os.path.join(str(tmp_path), "manifest.json"))
    assert man["status"] == "complete"
    assert "config" in man and "code_version" in man
