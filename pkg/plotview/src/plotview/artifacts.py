"""Readers for the run-directory artifact formats.

Everything here parses the documented on-disk interfaces only: field
manifests with raw little-endian float64 payloads, landscape grid CSVs with
their JSON meta sidecars, training-history CSVs, and run manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class GriddedField:
    """A gridded solution export: axes, snapshot times, per-field arrays."""

    axes: list[np.ndarray]
    times: np.ndarray
    values: dict[str, np.ndarray]   # [time, y?, x]
    fields: list[str]
    meta: dict = field(default_factory=dict)
    mask: np.ndarray | None = None

    @property
    def spatial_dim(self) -> int:
        return len(self.axes)


def load_field(directory, name: str) -> GriddedField:
    d = Path(directory)
    manifest_path = d / f"{name}.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"missing field manifest {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    axes = [np.asarray(a, dtype=np.float64) for a in manifest["axes"]]
    times = np.asarray(manifest["times"], dtype=np.float64)
    shape = (len(times),) + tuple(len(a) for a in reversed(axes))
    values = {}
    for fname in manifest["fields"]:
        payload = d / f"{name}_{fname}.bin"
        if not payload.exists():
            raise FileNotFoundError(f"missing field payload {payload}")
        values[fname] = np.frombuffer(payload.read_bytes(), dtype="<f8").reshape(shape)
    mask = None
    if manifest.get("has_mask"):
        mask = (
            np.frombuffer((d / f"{name}_mask.bin").read_bytes(), dtype=np.uint8)
            .reshape(shape[1:])
            .astype(bool)
        )
    return GriddedField(
        axes=axes,
        times=times,
        values=values,
        fields=list(manifest["fields"]),
        meta=manifest.get("meta", {}),
        mask=mask,
    )


@dataclass
class LandscapeGrid:
    alphas: np.ndarray
    betas: np.ndarray
    logloss: np.ndarray
    center_loss: float
    meta: dict


def load_grid(directory, name: str = "grid") -> LandscapeGrid:
    d = Path(directory)
    csv_path = d / f"{name}.csv"
    if not csv_path.exists():
        raise FileNotFoundError(f"missing landscape grid {csv_path}")
    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",")
    if header[0] != "beta/alpha":
        raise ValueError(f"malformed grid CSV header in {csv_path}")
    alphas = np.array([float(v) for v in header[1:]])
    betas, rows = [], []
    for line in lines[1:]:
        cells = line.split(",")
        betas.append(float(cells[0]))
        rows.append([float(v) for v in cells[1:]])
    logloss = np.array(rows)
    if logloss.shape != (len(betas), len(alphas)):
        raise ValueError(f"malformed grid CSV body in {csv_path}")
    meta = json.loads((d / f"{name}_meta.json").read_text())
    return LandscapeGrid(
        alphas=alphas,
        betas=np.array(betas),
        logloss=logloss,
        center_loss=float(meta["center_loss"]),
        meta=meta,
    )


def load_history(run_dir) -> dict[str, np.ndarray]:
    path = Path(run_dir) / "history.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing history {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name], dtype=np.float64) for name in data.dtype.names}


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"missing manifest {path}")
    return json.loads(path.read_text())
