"""Training point generation: QMC collocation batches and data regulators.

Collocation, initial and boundary points come from scrambled Sobol sequences
with independent per-region streams.  Regulators are labelled solution
samples pulled from a :class:`~pinnscape.solvers.SolutionField` in one of
three ways: a random sparse fraction of all stored nodes, every node of a
coarse-solver run, or vertical line probes at fixed x positions mimicking a
diagnostic instrument.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .pde import Domain, PdeProblem
from .solvers import SolutionField, sample_field

_REGIONS = ("interior", "initial", "boundary")
_REGULATOR_KINDS = ("sparse", "coarse", "line_probe", "external")


@dataclass
class RegulatorSet:
    """Labelled (X_s, t) -> u(X_s, t) samples added as a reconstruction term."""

    pts: np.ndarray
    targets: np.ndarray
    kind: str
    weight: float = 1.0

    def __post_init__(self):
        self.pts = np.atleast_2d(np.asarray(self.pts, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if len(self.pts) != len(self.targets):
            raise ValueError("pts and targets must have the same length")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("regulator targets must be finite")
        if self.weight <= 0:
            raise ValueError("regulator weight must be positive")
        if self.kind not in _REGULATOR_KINDS:
            raise ValueError(f"unknown regulator kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.pts)

    def to_csv(self, path, field_names: tuple[str, ...] = ()) -> None:
        """Columns: coordinates..., t, one target column per field."""
        d = self.pts.shape[1] - 1
        coords = ["x", "y"][:d]
        names = list(field_names) if field_names else [f"f{k}" for k in range(self.targets.shape[1])]
        with open(path, "w") as fh:
            fh.write(",".join(coords + ["t"] + names) + "\n")
            for row, tgt in zip(self.pts, self.targets):
                fh.write(",".join(repr(float(v)) for v in (*row, *tgt)) + "\n")

    @staticmethod
    def from_csv(path, kind: str = "external", weight: float = 1.0) -> "RegulatorSet":
        data = np.genfromtxt(path, delimiter=",", names=True)
        cols = list(data.dtype.names)
        t_idx = cols.index("t")
        pts = np.stack([data[c] for c in cols[: t_idx + 1]], axis=1)
        targets = np.stack([data[c] for c in cols[t_idx + 1 :]], axis=1)
        return RegulatorSet(pts=np.atleast_2d(pts), targets=np.atleast_2d(targets),
                            kind=kind, weight=weight)


@dataclass
class TrainSet:
    """One optimisation batch: collocation, initial, boundary and data points."""

    domain_pts: np.ndarray
    ic_pts: np.ndarray
    bc_pts: np.ndarray
    regulator: Optional[RegulatorSet] = None


def _sobol(n: int, dim: int, seed) -> np.ndarray:
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    pts = eng.random(n)
    # guard the open-interval invariant against rounding at the box edge
    tiny = np.finfo(np.float64).tiny
    return np.clip(pts, tiny, 1.0 - np.finfo(np.float64).eps)


def _region_seed(seed: int, region: str, salt: int = 0):
    ss = np.random.SeedSequence(
        entropy=abs(int(seed)), spawn_key=(_REGIONS.index(region), salt)
    )
    return np.random.default_rng(ss)


def _boundary_faces(domain: Domain, geometry) -> list[tuple[int, float, float, float]]:
    """Faces as (axis, fixed_value, lo, hi) of the free coordinate, plus measure."""
    faces = []
    if domain.spatial_dim == 1:
        (lo, hi) = domain.spatial_bounds[0]
        faces = [(0, lo, 0.0, 0.0), (0, hi, 0.0, 0.0)]  # measure handled uniformly
        return faces
    (xl, xh), (yl, yh) = domain.spatial_bounds
    faces = [
        (0, xl, yl, yh),  # x = xl, y free
        (0, xh, yl, yh),
        (1, yl, xl, xh),  # y = yl, x free
        (1, yh, xl, xh),
    ]
    if geometry is not None:
        bx, by = geometry.x, geometry.y
        faces += [
            (0, bx[0], by[0], by[1]),
            (0, bx[1], by[0], by[1]),
            (1, by[0], bx[0], bx[1]),
            (1, by[1], bx[0], bx[1]),
        ]
    return faces


def qmc_points(
    domain: Domain,
    n: int,
    region: str,
    seed: int,
    geometry=None,
    salt: int = 0,
) -> np.ndarray:
    """Low-discrepancy points in the interior, on the t=0 slab, or on the boundary.

    Deterministic per (seed, region, n); ``salt`` decorrelates repeated draws
    (fresh batches per epoch).  Boundary points carry exact face coordinates;
    for flow problems the block faces are sampled too, proportionally to face
    length.
    """
    if region not in _REGIONS:
        raise ValueError(f"unknown region {region!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    sd = domain.spatial_dim
    ss = _region_seed(seed, region, salt)
    if region == "interior":
        raw = _sobol(n, sd + 1, ss)
        lo, hi = domain.lo(), domain.hi()
        return lo + (hi - lo) * raw
    if region == "initial":
        raw = _sobol(n, sd, ss)
        lo, hi = domain.lo()[:sd], domain.hi()[:sd]
        pts = lo + (hi - lo) * raw
        return np.hstack([pts, np.zeros((n, 1))])
    # boundary: one Sobol column picks the face, the rest place the point
    faces = _boundary_faces(domain, geometry)
    if sd == 1:
        raw = _sobol(n, 2, ss)
        (lo, hi) = domain.spatial_bounds[0]
        xs = np.where(raw[:, 0] < 0.5, lo, hi)
        ts = domain.time_bounds[0] + (domain.time_bounds[1] - domain.time_bounds[0]) * raw[:, 1]
        return np.stack([xs, ts], axis=1)
    raw = _sobol(n, 3, ss)
    lengths = np.array([hi - lo for (_, _, lo, hi) in faces])
    cuts = np.cumsum(lengths) / lengths.sum()
    face_idx = np.searchsorted(cuts, raw[:, 0], side="right")
    face_idx = np.minimum(face_idx, len(faces) - 1)
    pts = np.empty((n, sd + 1))
    for k, (axis, fixed, lo, hi) in enumerate(faces):
        m = face_idx == k
        if not np.any(m):
            continue
        free = lo + (hi - lo) * raw[m, 1]
        pts[m, axis] = fixed
        pts[m, 1 - axis] = free
    t0, t1 = domain.time_bounds
    pts[:, sd] = t0 + (t1 - t0) * raw[:, 2]
    return pts


def extract_sparse(field: SolutionField, fraction: float, seed: int, weight: float = 1.0) -> RegulatorSet:
    """Uniform draw without replacement over all stored (node, snapshot) pairs.

    Count is floor(fraction * N) over the valid (unmasked) samples.  Draws
    are prefixes of one seeded permutation, so sweeps over growing fractions
    at a fixed seed give nested point sets.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    pts = field.node_points()
    valid = np.nonzero(field.valid_node_index())[0]
    count = int(np.floor(fraction * len(valid)))
    if count < 1:
        raise ValueError(
            f"fraction {fraction} of {len(valid)} samples yields zero points"
        )
    rng = np.random.default_rng(seed)
    chosen = valid[rng.permutation(len(valid))[:count]]
    targets = np.stack([field.node_values(f)[chosen] for f in field.fields], axis=1)
    return RegulatorSet(pts=pts[chosen], targets=targets, kind="sparse", weight=weight)


def extract_coarse(coarse_field: SolutionField, weight: float = 0.5) -> RegulatorSet:
    """Every valid node/snapshot of a coarse-solver run, down-weighted by default."""
    pts = coarse_field.node_points()
    valid = coarse_field.valid_node_index()
    targets = np.stack(
        [coarse_field.node_values(f)[valid] for f in coarse_field.fields], axis=1
    )
    return RegulatorSet(pts=pts[valid], targets=targets, kind="coarse", weight=weight)


def extract_line_probe(
    field: SolutionField,
    x_positions,
    time_stride: int,
    weight: float = 1.0,
) -> RegulatorSet:
    """Vertical profiles at fixed x positions, every ``time_stride``-th snapshot.

    All y-grid nodes are sampled at each probe line (linear interpolation in
    x between grid columns); snapshots 0, stride, 2*stride, ... are used.
    """
    if field.spatial_dim != 2:
        raise ValueError("line probes require a 2-D field")
    x, y = field.grid
    for xp in x_positions:
        if not (x[0] <= xp <= x[-1]):
            raise ValueError(f"probe x={xp} outside the spatial hull")
    if time_stride < 1:
        raise ValueError("time_stride must be >= 1")
    snap_ids = np.arange(0, len(field.times), time_stride)
    rows = []
    targets = []
    for it in snap_ids:
        t = field.times[it]
        for xp in x_positions:
            col = np.interp(xp, x, np.arange(len(x)))
            i0 = int(np.floor(col))
            i1 = min(i0 + 1, len(x) - 1)
            w = col - i0
            for jy in range(len(y)):
                if field.mask is not None and not (field.mask[jy, i0] and field.mask[jy, i1]):
                    continue
                rows.append((xp, y[jy], t))
                targets.append(
                    [
                        (1.0 - w) * field.values[f][it, jy, i0] + w * field.values[f][it, jy, i1]
                        for f in field.fields
                    ]
                )
    return RegulatorSet(
        pts=np.array(rows), targets=np.array(targets), kind="line_probe", weight=weight
    )


class TrainSetSource:
    """Per-epoch batch supplier: fresh QMC draws plus the full regulator set.

    With ``resample=False`` the epoch-0 batch is reused forever (fixed-once
    collocation).  Deterministic for a fixed (seed, epoch).
    """

    def __init__(
        self,
        problem: PdeProblem,
        n_domain: int,
        n_initial: int,
        n_boundary: int,
        regulator: Optional[RegulatorSet] = None,
        seed: int = 0,
        resample: bool = True,
    ):
        self.problem = problem
        self.n_domain = n_domain
        self.n_initial = n_initial
        self.n_boundary = n_boundary
        self.regulator = regulator
        self.seed = seed
        self.resample = resample

    def for_epoch(self, epoch: int) -> TrainSet:
        salt = epoch if self.resample else 0
        dom = self.problem.domain
        geo = self.problem.geometry
        return TrainSet(
            domain_pts=qmc_points(dom, self.n_domain, "interior", self.seed, geo, salt),
            ic_pts=qmc_points(dom, self.n_initial, "initial", self.seed, geo, salt),
            bc_pts=qmc_points(dom, self.n_boundary, "boundary", self.seed, geo, salt),
            regulator=self.regulator,
        )
