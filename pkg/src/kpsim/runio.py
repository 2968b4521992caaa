"""Run directories: snapshot files, manifests, and resume state.

Snapshot format (external interface): one file per field, row-major
little-endian float64, with a JSON sidecar carrying
{nx, ny, lx, ly, t, frame_speed, field_name, run_id}.  Values and geometry in
the sidecar and .bin are in user units (rescaled from the internal c0 = 2
frame when applicable).  A run stays resumable from its last snapshot via an
exact complex spectrum dump (state_latest.bin) in internal units; manifests
are rewritten atomically with an append-only snapshot index.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import RunConfig, ScaleInfo
from .grid import ComplexSpectrum2D, Grid2D, RealField2D


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_manifest(path: str, manifest: dict) -> None:
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True).encode())


def read_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def new_manifest(cfg: RunConfig, run_id: str) -> dict:
    return {
        "run_id": run_id,
        "code_version": __version__,
        "config": {k: v for k, v in cfg.to_dict().items()},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "updated": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "snapshots": [],
        "status": "running",
    }


@dataclass
class SnapshotSink:
    """Writes field snapshots + resume state and maintains the manifest."""

    directory: str
    cfg: RunConfig
    scale: ScaleInfo
    field_name: str = "u"
    run_id: str = "run"
    frame_speed: float = 0.0

    def __post_init__(self) -> None:
        os.makedirs(self.directory, exist_ok=True)
        self.manifest_path = os.path.join(self.directory, "manifest.json")
        if os.path.exists(self.manifest_path):
            self.manifest = read_manifest(self.manifest_path)
        else:
            self.manifest = new_manifest(self.cfg, self.run_id)
            write_manifest(self.manifest_path, self.manifest)

    def __call__(self, step: int, t: float, field: RealField2D, spectrum: ComplexSpectrum2D) -> None:
        if any(s["step"] == step for s in self.manifest["snapshots"]):
            return  # resumed over an already-written snapshot
        g = field.grid
        name = f"{self.field_name}_{step:08d}"
        bin_path = os.path.join(self.directory, name + ".bin")
        values_user = field.values * self.scale.u_factor if not self.scale.is_identity else field.values
        _atomic_write(bin_path, np.ascontiguousarray(values_user, dtype="<f8").tobytes())
        sidecar = {
            "nx": g.nx,
            "ny": g.ny,
            "lx": g.lx * self.scale.x_factor,
            "ly": g.ly * self.scale.y_factor,
            "t": t * self.scale.t_factor,
            "frame_speed": self.frame_speed,
            "field_name": self.field_name,
            "run_id": self.run_id,
        }
        _atomic_write(os.path.join(self.directory, name + ".json"), json.dumps(sidecar, indent=2).encode())
        _atomic_write(
            os.path.join(self.directory, "state_latest.bin"),
            np.ascontiguousarray(spectrum.coeffs, dtype="<c16").tobytes(),
        )
        _atomic_write(
            os.path.join(self.directory, "state_latest.json"),
            json.dumps({"step": step, "t": t}).encode(),
        )
        self.manifest["snapshots"].append({"step": step, "t": t * self.scale.t_factor, "file": name + ".bin"})
        self.manifest["updated"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        write_manifest(self.manifest_path, self.manifest)

    def mark(self, status: str) -> None:
        self.manifest["status"] = status
        self.manifest["updated"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        write_manifest(self.manifest_path, self.manifest)


def read_snapshot(directory: str, step: int, field_name: str = "u") -> tuple[RealField2D, dict]:
    name = f"{field_name}_{step:08d}"
    with open(os.path.join(directory, name + ".json")) as fh:
        meta = json.load(fh)
    vals = np.frombuffer(
        open(os.path.join(directory, name + ".bin"), "rb").read(), dtype="<f8"
    ).reshape(meta["ny"], meta["nx"])
    grid = Grid2D(nx=meta["nx"], ny=meta["ny"], lx=meta["lx"], ly=meta["ly"])
    return RealField2D(grid, vals.copy()), meta


def read_snapshot_internal(directory: str, step: int, scale: ScaleInfo, field_name: str = "u"):
    """Snapshot mapped back to the canonical c0 = 2 frame.

    Returns (field, t, meta) with an internal-unit grid, field values, and
    time (identity when the run was already at c0 = 2).
    """
    fld, meta = read_snapshot(directory, step, field_name)
    if scale.is_identity:
        return fld, meta["t"], meta
    grid = Grid2D(
        nx=meta["nx"], ny=meta["ny"],
        lx=meta["lx"] / scale.x_factor, ly=meta["ly"] / scale.y_factor,
    )
    return (
        RealField2D(grid, fld.values / scale.u_factor),
        meta["t"] / scale.t_factor,
        meta,
    )


def list_snapshots(directory: str) -> list[dict]:
    manifest = read_manifest(os.path.join(directory, "manifest.json"))
    return manifest["snapshots"]


def load_resume_state(directory: str, grid: Grid2D):
    """(step, t, spectrum) of the most recent snapshot, in internal units."""
    with open(os.path.join(directory, "state_latest.json")) as fh:
        meta = json.load(fh)
    raw = np.frombuffer(open(os.path.join(directory, "state_latest.bin"), "rb").read(), dtype="<c16")
    coeffs = raw.reshape(grid.ny, grid.nxr).copy()
    return meta["step"], meta["t"], ComplexSpectrum2D(grid, coeffs)
