"""Loss-landscape extraction around a trained parameter vector.

Two random directions are drawn, orthogonalised and filter-normalised per
neuron (one weight row plus its bias) so that each direction slice carries
exactly the norm of the trained neuron's slice.  Orthogonalisation happens
inside each neuron slice; that keeps the global inner product at zero even
after the per-neuron rescaling, which a global Gram-Schmidt pass would not.
The loss is then mapped over a 2-D grid of displacements on one frozen
evaluation point set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .losses import loss_terms, total_from_terms
from .nets import NetworkArch, NetworkParams


@dataclass
class DirectionPair:
    """Filter-normalised orthogonal displacement directions in weight space."""

    delta1: np.ndarray
    delta2: np.ndarray
    seed: int
    degenerate: list = field(default_factory=list)  # zero-norm neuron slices


def _neuron_views(values: np.ndarray, arch: NetworkArch):
    """Yield (weight_row_slice, bias_index) flat views per neuron, layer order."""
    i = 0
    for out, inp in arch.layer_shapes():
        w0 = i
        b0 = i + out * inp
        for r in range(out):
            yield slice(w0 + r * inp, w0 + (r + 1) * inp), b0 + r
        i = b0 + out


def sample_directions(params: NetworkParams, seed: int) -> DirectionPair:
    """Draw Gaussian directions, orthogonalise and filter-normalise per neuron.

    For every neuron slice (its weight row and bias), the two direction
    slices are made mutually orthogonal and rescaled to the trained slice's
    norm.  Zero-norm neurons get zero direction slices and are recorded.
    """
    rng = np.random.default_rng(seed)
    n = params.values.size
    g1 = rng.standard_normal(n)
    g2 = rng.standard_normal(n)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    degenerate = []
    for neuron_id, (wsl, bi) in enumerate(_neuron_views(params.values, params.arch)):
        idx = np.r_[np.arange(wsl.start, wsl.stop), bi]
        ref = np.linalg.norm(params.values[idx])
        if ref == 0.0:
            degenerate.append(neuron_id)
            continue
        a = g1[idx]
        b = g2[idx]
        a = a / np.linalg.norm(a)
        b = b - (b @ a) * a
        b = b / np.linalg.norm(b)
        d1[idx] = ref * a
        d2[idx] = ref * b
    return DirectionPair(delta1=d1, delta2=d2, seed=seed, degenerate=degenerate)


def grid_coordinates(half_range: float, resolution: int) -> np.ndarray:
    """Exactly antisymmetric displacement coordinates with 0 at the center.

    Built so that -coords[i] == coords[res-1-i] bitwise, which makes the
    direction-negation symmetry of the grid exact in floating point.
    """
    if resolution < 3 or resolution % 2 == 0:
        raise ValueError("resolution must be odd and >= 3")
    if half_range <= 0:
        raise ValueError("half_range must be positive")
    half = np.linspace(0.0, half_range, (resolution + 1) // 2)[1:]
    return np.concatenate([-half[::-1], [0.0], half])


@dataclass
class LandscapeGrid:
    """(alpha, beta) -> log10(loss) surface around a trained parameter vector."""

    alphas: np.ndarray
    betas: np.ndarray
    logloss: np.ndarray           # [len(betas)][len(alphas)]
    center_loss: float
    saturated: np.ndarray         # cells clamped at the ceiling
    meta: dict = field(default_factory=dict)


def evaluate_grid(
    params: NetworkParams,
    dirs: DirectionPair,
    loss_eval: Callable[[np.ndarray], float],
    half_range: float = 1.0,
    resolution: int = 51,
    ceiling: float = 10.0,
) -> LandscapeGrid:
    """Map log10 loss over theta* + alpha d1 + beta d2 on one fixed closure.

    ``loss_eval`` must evaluate the same frozen point set for every call.
    Non-positive or non-finite losses are clamped at ``ceiling`` and flagged.
    """
    coords = grid_coordinates(half_range, resolution)
    theta = params.values
    logloss = np.empty((resolution, resolution))
    saturated = np.zeros((resolution, resolution), dtype=bool)
    for j, beta in enumerate(coords):
        for i, alpha in enumerate(coords):
            val = loss_eval(theta + alpha * dirs.delta1 + beta * dirs.delta2)
            if not np.isfinite(val) or val <= 0.0:
                logloss[j, i] = ceiling
                saturated[j, i] = True
            else:
                logloss[j, i] = np.log10(val)
                if logloss[j, i] > ceiling:
                    logloss[j, i] = ceiling
                    saturated[j, i] = True
    center = loss_eval(theta)
    return LandscapeGrid(
        alphas=coords.copy(),
        betas=coords.copy(),
        logloss=logloss,
        center_loss=float(center),
        saturated=saturated,
        meta={
            "seed": dirs.seed,
            "half_range": half_range,
            "resolution": resolution,
            "ceiling": ceiling,
            "degenerate_neurons": list(dirs.degenerate),
        },
    )


def make_loss_eval(problem, arch: NetworkArch, eval_set, weights=None) -> Callable[[np.ndarray], float]:
    """Loss closure over one frozen evaluation TrainSet (no autograd)."""
    from .losses import effective_weights

    w = effective_weights(eval_set, weights)

    def fn(theta_np: np.ndarray) -> float:
        theta = torch.from_numpy(np.ascontiguousarray(theta_np))
        with torch.no_grad():
            terms = loss_terms(theta, problem, eval_set, arch)
            return float(total_from_terms(terms, w))

    return fn


# --- grid files: CSV body plus a JSON meta sidecar ---------------------------


def save_grid(directory, grid: LandscapeGrid, name: str = "grid") -> None:
    """CSV: header row of alphas, first column betas, body log-losses."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / f"{name}.csv", "w") as fh:
        fh.write("beta/alpha," + ",".join(repr(float(a)) for a in grid.alphas) + "\n")
        for j, beta in enumerate(grid.betas):
            fh.write(
                repr(float(beta))
                + ","
                + ",".join(repr(float(v)) for v in grid.logloss[j])
                + "\n"
            )
    meta = dict(grid.meta)
    meta["center_loss"] = grid.center_loss
    meta["saturated_cells"] = [[int(j), int(i)] for j, i in np.argwhere(grid.saturated)]
    with open(d / f"{name}_meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_grid(directory, name: str = "grid") -> LandscapeGrid:
    d = Path(directory)
    with open(d / f"{name}.csv") as fh:
        header = fh.readline().strip().split(",")
        alphas = np.array([float(v) for v in header[1:]])
        betas = []
        rows = []
        for line in fh:
            cells = line.strip().split(",")
            betas.append(float(cells[0]))
            rows.append([float(v) for v in cells[1:]])
    with open(d / f"{name}_meta.json") as fh:
        meta = json.load(fh)
    logloss = np.array(rows)
    saturated = np.zeros_like(logloss, dtype=bool)
    for j, i in meta.get("saturated_cells", []):
        saturated[j, i] = True
    center = meta.pop("center_loss")
    meta.pop("saturated_cells", None)
    return LandscapeGrid(
        alphas=alphas,
        betas=np.array(betas),
        logloss=logloss,
        center_loss=center,
        saturated=saturated,
        meta=meta,
    )
