"""Composite PINN objective: residual + initial + boundary (+ data) terms.

Every term is the mean of squared mismatches over its point set, so point
budgets and term weights stay decoupled.  The data term reconstructs
regulator samples; an empty regulator contributes exactly zero.  All torch
paths run in float64 and stay differentiable with respect to the flat
parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import torch

from . import nets
from .nets import JetBatch, NetworkArch, NetworkParams, axis_names
from .pde import PdeProblem, evaluate_ic_bc, periodic_partner
from .sampling import TrainSet

DEFAULT_WEIGHTS = {"domain": 1.0, "initial": 1.0, "boundary": 1.0, "data": 1.0}

_FACE_TOL = 1e-9


class LossNotFinite(FloatingPointError):
    """A loss term evaluated to a non-finite value."""

    def __init__(self, term: str, value: float):
        super().__init__(f"loss term {term!r} is non-finite ({value})")
        self.term = term
        self.value = value


@dataclass
class LossReport:
    """Weighted decomposition of one objective evaluation."""

    total: float
    domain: float
    initial: float
    boundary: float
    data: float
    weights: dict

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "domain": self.domain,
            "initial": self.initial,
            "boundary": self.boundary,
            "data": self.data,
            "weights": dict(self.weights),
        }


def _jet_graph(theta: torch.Tensor, pts: torch.Tensor, arch: NetworkArch, request) -> JetBatch:
    """Torch JetBatch (graph preserved) for the requested partials."""
    firsts, seconds, thirds = nets._parse_request(request, arch.input_dim, max_order=3)
    v, f, s, t3 = nets.jet_apply(theta, pts, arch, firsts, seconds, thirds)
    names = axis_names(arch.input_dim)
    jb = JetBatch(points=pts, values=v)
    for k, a in enumerate(firsts):
        jb.first[names[a]] = f[k]
    for k, a in enumerate(seconds):
        jb.second[names[a] * 2] = s[k]
    for k, a in enumerate(thirds):
        jb.third[names[a] * 3] = t3[k]
    return jb


def _mixed_ns_mismatch(jet: JetBatch, problem: PdeProblem) -> list[torch.Tensor]:
    """Per-face boundary conditions for the flow problem, as mismatch columns.

    Inflow u = inflow, v = 0; outflow du/dx = dv/dx = 0 with p = 0 reference;
    free-slip walls v = 0, du/dy = 0; no-slip block faces u = v = 0.
    """
    pts = jet.points
    xy = pts.detach().numpy() if isinstance(pts, torch.Tensor) else np.asarray(pts)
    (xl, xh), (yl, yh) = problem.domain.spatial_bounds
    scale = max(xh - xl, yh - yl)
    tol = _FACE_TOL * scale
    inflow = problem.constants.get("inflow", 1.0)

    on_in = np.abs(xy[:, 0] - xl) <= tol
    on_out = np.abs(xy[:, 0] - xh) <= tol
    on_wall = (np.abs(xy[:, 1] - yl) <= tol) | (np.abs(xy[:, 1] - yh) <= tol)
    on_wall &= ~(on_in | on_out)
    on_block = ~(on_in | on_out | on_wall)
    if problem.geometry is None and np.any(on_block):
        raise ValueError("boundary points off the outer faces with no block defined")

    u, v, p = jet.values[:, 0], jet.values[:, 1], jet.values[:, 2]
    u_x, v_x = jet.d("x")[:, 0], jet.d("x")[:, 1]
    u_y = jet.d("y")[:, 0]

    def pick(arr, mask):
        idx = torch.from_numpy(np.nonzero(mask)[0])
        return arr[idx]

    parts = []
    if np.any(on_in):
        parts += [pick(u, on_in) - inflow, pick(v, on_in)]
    if np.any(on_out):
        parts += [pick(u_x, on_out), pick(v_x, on_out), pick(p, on_out)]
    if np.any(on_wall):
        parts += [pick(v, on_wall), pick(u_y, on_wall)]
    if np.any(on_block):
        parts += [pick(u, on_block), pick(v, on_block)]
    return parts


def loss_terms(
    theta: torch.Tensor,
    problem: PdeProblem,
    train: TrainSet,
    arch: NetworkArch,
) -> dict[str, torch.Tensor]:
    """Unweighted torch scalars for the four objective terms."""
    dom_pts = torch.as_tensor(np.asarray(train.domain_pts, dtype=np.float64))
    jet = _jet_graph(theta, dom_pts, arch, problem.jet_request)
    r = problem.residual(jet)
    terms = {"domain": (r ** 2).mean()}

    ic_pts = np.asarray(train.ic_pts, dtype=np.float64)
    targets = evaluate_ic_bc(problem, ic_pts, "initial")
    ic_t = torch.as_tensor(ic_pts)
    if targets.rate is not None:
        jb = _jet_graph(theta, ic_t, arch, ("t",))
        vals = jb.values
        rate = jb.d("t")
        initial = ((vals - torch.as_tensor(targets.values)) ** 2).mean() + (
            (rate - torch.as_tensor(targets.rate)) ** 2
        ).mean()
    else:
        vals, _, _, _ = nets.jet_apply(theta, ic_t, arch)
        initial = ((vals - torch.as_tensor(targets.values)) ** 2).mean()
    terms["initial"] = initial

    bc_pts = np.asarray(train.bc_pts, dtype=np.float64)
    bc_t = torch.as_tensor(bc_pts)
    if problem.boundary_kind == "dirichlet":
        g = evaluate_ic_bc(problem, bc_pts, "boundary").values
        vals, _, _, _ = nets.jet_apply(theta, bc_t, arch)
        terms["boundary"] = ((vals - torch.as_tensor(g)) ** 2).mean()
    elif problem.boundary_kind == "periodic":
        partner = periodic_partner(problem, bc_pts)
        both = torch.cat([bc_t, torch.as_tensor(partner)], dim=0)
        jb = _jet_graph(theta, both, arch, ("x",))
        n = len(bc_pts)
        mism = torch.cat(
            [
                (jb.values[:n] - jb.values[n:]).reshape(-1),
                (jb.d("x")[:n] - jb.d("x")[n:]).reshape(-1),
            ]
        )
        terms["boundary"] = (mism ** 2).mean()
    else:  # mixed_ns
        jb = _jet_graph(theta, bc_t, arch, ("x", "y"))
        parts = _mixed_ns_mismatch(jb, problem)
        mism = torch.cat([p.reshape(-1) for p in parts])
        terms["boundary"] = (mism ** 2).mean()

    if train.regulator is not None and len(train.regulator) > 0:
        reg_pts = torch.as_tensor(np.asarray(train.regulator.pts, dtype=np.float64))
        vals, _, _, _ = nets.jet_apply(theta, reg_pts, arch)
        tgt = torch.as_tensor(train.regulator.targets)
        terms["data"] = ((vals - tgt) ** 2).mean()
    else:
        terms["data"] = torch.zeros((), dtype=torch.float64)
    return terms


def effective_weights(train: TrainSet, weights: Optional[dict] = None) -> dict:
    """Term weights with the regulator's own weight folded into the data term."""
    w = dict(DEFAULT_WEIGHTS)
    if weights:
        w.update(weights)
    if train.regulator is not None:
        w["data"] = w["data"] * train.regulator.weight
    return w


def total_from_terms(terms: dict, weights: dict) -> torch.Tensor:
    return (
        weights["domain"] * terms["domain"]
        + weights["initial"] * terms["initial"]
        + weights["boundary"] * terms["boundary"]
        + weights["data"] * terms["data"]
    )


def composite_loss(
    params: NetworkParams,
    problem: PdeProblem,
    train: TrainSet,
    weights: Optional[dict] = None,
) -> LossReport:
    """Evaluate the full objective; raises :class:`LossNotFinite` with the
    offending term identified."""
    theta = torch.from_numpy(params.values)
    with torch.no_grad():
        terms = loss_terms(theta, problem, train, params.arch)
    w = effective_weights(train, weights)
    vals = {}
    for name, t in terms.items():
        v = float(t)
        if not np.isfinite(v):
            raise LossNotFinite(name, v)
        vals[name] = v
    total = (
        w["domain"] * vals["domain"]
        + w["initial"] * vals["initial"]
        + w["boundary"] * vals["boundary"]
        + w["data"] * vals["data"]
    )
    return LossReport(total=total, weights=w, **vals)


def make_loss_fn(
    problem: PdeProblem,
    arch: NetworkArch,
    train: TrainSet,
    weights: Optional[dict] = None,
) -> Callable[[torch.Tensor], torch.Tensor]:
    """Differentiable objective over the flat parameter tensor for a fixed batch."""
    w = effective_weights(train, weights)

    def fn(theta: torch.Tensor) -> torch.Tensor:
        terms = loss_terms(theta, problem, train, arch)
        return total_from_terms(terms, w)

    return fn
