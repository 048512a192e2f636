"""Error metrics between a trained network and a gridded reference solution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets
from .nets import NetworkParams
from .solvers import SolutionField


@dataclass
class L2Report:
    """Relative and absolute L2 errors over all valid grid nodes and snapshots."""

    relative: float
    absolute: float
    per_field: dict = field(default_factory=dict)
    n_points: int = 0

    def as_dict(self) -> dict:
        return {
            "relative": self.relative,
            "absolute": self.absolute,
            "per_field": {k: dict(v) for k, v in self.per_field.items()},
            "n_points": self.n_points,
        }


def l2_error(
    params: NetworkParams,
    field_ref: SolutionField,
    mask: np.ndarray | None = None,
    chunk: int = 65536,
) -> L2Report:
    """||prediction - truth||_2 / ||truth||_2 over the reference grid.

    Masked nodes (the flow problem's block) are excluded; a caller-supplied
    ``mask`` further restricts the evaluation region.  Multi-field problems
    report per-field errors alongside the aggregate.
    """
    pts = field_ref.node_points()
    valid = field_ref.valid_node_index()
    if mask is not None:
        valid = valid & np.asarray(mask, dtype=bool)
    pts = pts[valid]
    if len(pts) == 0:
        raise ValueError("no valid evaluation points")

    preds = np.empty((len(pts), len(field_ref.fields)))
    for lo in range(0, len(pts), chunk):
        preds[lo : lo + chunk] = nets.forward(params, pts[lo : lo + chunk])

    num_all = 0.0
    den_all = 0.0
    per_field = {}
    for k, name in enumerate(field_ref.fields):
        truth = field_ref.node_values(name)[valid]
        diff2 = float(np.sum((preds[:, k] - truth) ** 2))
        ref2 = float(np.sum(truth ** 2))
        per_field[name] = {
            "absolute": float(np.sqrt(diff2)),
            "relative": float(np.sqrt(diff2 / ref2)) if ref2 > 0 else float("inf"),
        }
        num_all += diff2
        den_all += ref2
    if den_all == 0.0:
        raise ValueError("reference field has zero norm")
    return L2Report(
        relative=float(np.sqrt(num_all / den_all)),
        absolute=float(np.sqrt(num_all)),
        per_field=per_field,
        n_points=len(pts),
    )
