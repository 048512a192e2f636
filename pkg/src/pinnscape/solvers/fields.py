"""Gridded reference solutions: container, interpolation, serialization.

A :class:`SolutionField` stores per-field arrays indexed [time, y?, x] over
strictly increasing coordinate axes.  On disk a field is a JSON manifest plus
one raw little-endian float64 array per field (and a uint8 mask when cells
are blanked out), with an optional long-format CSV export for plotting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator


class SolverError(RuntimeError):
    """A numerical oracle failed (instability, CFL violation, divergence)."""


@dataclass
class SolutionField:
    """Reference solution on a space-time grid.

    ``grid`` holds the per-axis coordinates in (x, y?) order, ``times`` the
    snapshot instants, and ``values[name]`` an array shaped
    (len(times), len(y)?, len(x)).  ``mask`` (y?, x) marks valid fluid nodes;
    None means everything is valid.
    """

    grid: tuple[np.ndarray, ...]
    times: np.ndarray
    values: dict[str, np.ndarray]
    fields: tuple[str, ...]
    meta: dict = dc_field(default_factory=dict)
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.grid = tuple(np.asarray(g, dtype=np.float64) for g in self.grid)
        for g in self.grid:
            if np.any(np.diff(g) <= 0):
                raise ValueError("grid axes must be strictly increasing")
        expect = (len(self.times),) + tuple(len(g) for g in reversed(self.grid))
        for name in self.fields:
            arr = self.values[name]
            if arr.shape != expect:
                raise ValueError(f"field {name!r} has shape {arr.shape}, expected {expect}")
            if not np.all(np.isfinite(arr)):
                raise SolverError(f"field {name!r} contains non-finite values")

    @property
    def spatial_dim(self) -> int:
        return len(self.grid)

    def node_points(self) -> np.ndarray:
        """All (x[, y], t) node coordinates, one row per (snapshot, node)."""
        axes = [*self.grid, self.times]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def node_values(self, name: str) -> np.ndarray:
        """Values aligned with :meth:`node_points` row order."""
        arr = self.values[name]
        # stored as [t, y?, x]; node_points iterates x-major, then y, then t
        moved = np.moveaxis(arr, 0, -1)  # -> [y?, x, t]
        if self.spatial_dim == 2:
            moved = np.moveaxis(moved, 0, 1)  # -> [x, y, t]
        return moved.ravel()

    def valid_node_index(self) -> np.ndarray:
        """Boolean selector over node_points rows honoring the mask."""
        n_nodes = int(np.prod([len(g) for g in self.grid]))
        if self.mask is None:
            return np.ones(n_nodes * len(self.times), dtype=bool)
        m = self.mask
        if self.spatial_dim == 2:
            m = np.moveaxis(m, 0, 1)  # [y, x] -> [x, y]
        m = m.ravel()
        return np.repeat(m, len(self.times))


def sample_field(field: SolutionField, points) -> np.ndarray:
    """Multilinear space-time interpolation at (x[, y], t) query points.

    Points outside the grid hull raise ValueError.  Exactly-on-node queries
    reproduce stored values bit for bit.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != field.spatial_dim + 1:
        raise ValueError(f"points must have {field.spatial_dim + 1} columns")
    # interpolator axes follow storage order [t, y?, x]
    axes = (field.times,) + tuple(reversed(field.grid))
    if field.spatial_dim == 1:
        q = np.stack([pts[:, 1], pts[:, 0]], axis=1)
    else:
        q = np.stack([pts[:, 2], pts[:, 1], pts[:, 0]], axis=1)
    out = np.empty((len(pts), len(field.fields)))
    for j, name in enumerate(field.fields):
        interp = RegularGridInterpolator(axes, field.values[name], method="linear",
                                         bounds_error=True)
        try:
            out[:, j] = interp(q)
        except ValueError as exc:
            raise ValueError(f"query point outside the field hull: {exc}") from exc
    return out


# --- on-disk format ----------------------------------------------------------


def save_field(directory, field: SolutionField, name: str = "field") -> None:
    """Write manifest JSON + per-field .bin payloads (+ CSV export)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": name,
        "axes": [list(map(float, g)) for g in field.grid],
        "times": list(map(float, field.times)),
        "fields": list(field.fields),
        "meta": field.meta,
        "dtype": "float64",
        "byte_order": "little",
        "has_mask": field.mask is not None,
    }
    with open(d / f"{name}.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for fname in field.fields:
        (d / f"{name}_{fname}.bin").write_bytes(field.values[fname].astype("<f8").tobytes())
    if field.mask is not None:
        (d / f"{name}_mask.bin").write_bytes(field.mask.astype(np.uint8).tobytes())
    _write_csv(d / f"{name}.csv", field)


def load_field(directory, name: str = "field") -> SolutionField:
    d = Path(directory)
    with open(d / f"{name}.json") as fh:
        manifest = json.load(fh)
    grid = tuple(np.array(a) for a in manifest["axes"])
    times = np.array(manifest["times"])
    shape = (len(times),) + tuple(len(g) for g in reversed(grid))
    values = {}
    for fname in manifest["fields"]:
        raw = (d / f"{name}_{fname}.bin").read_bytes()
        values[fname] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    mask = None
    if manifest.get("has_mask"):
        raw = (d / f"{name}_mask.bin").read_bytes()
        mask = np.frombuffer(raw, dtype=np.uint8).reshape(shape[1:]).astype(bool)
    return SolutionField(
        grid=grid,
        times=times,
        values=values,
        fields=tuple(manifest["fields"]),
        meta=manifest.get("meta", {}),
        mask=mask,
    )


def _write_csv(path, field: SolutionField) -> None:
    cols = ["t"] + (["x"] if field.spatial_dim == 1 else ["x", "y"]) + list(field.fields)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for it, t in enumerate(field.times):
            if field.spatial_dim == 1:
                x = field.grid[0]
                data = [field.values[f][it] for f in field.fields]
                for i in range(len(x)):
                    row = [t, x[i]] + [d[i] for d in data]
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            else:
                x, y = field.grid
                data = [field.values[f][it] for f in field.fields]
                for jy in range(len(y)):
                    for ix in range(len(x)):
                        row = [t, x[ix], y[jy]] + [d[jy, ix] for d in data]
                        fh.write(",".join(repr(float(v)) for v in row) + "\n")
