"""Problem definitions: residual operators, initial/boundary data, domains.

Three problems are built in: viscous Burgers on a periodic interval, the 2-D
wave equation with homogeneous Dirichlet walls, and 2-D incompressible
Navier-Stokes flow past a rectangular block.  Residual operators act on
:class:`~pinnscape.nets.JetBatch`-shaped objects and work identically on
numpy arrays and torch tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .nets import JetBatch, NetworkArch

BOUNDARY_KINDS = ("dirichlet", "periodic", "mixed_ns")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned space-time box: per-axis [lo, hi] plus [0, T]."""

    spatial_bounds: tuple[tuple[float, float], ...]
    time_bounds: tuple[float, float]

    def __post_init__(self):
        for lo, hi in self.spatial_bounds:
            if not lo < hi:
                raise ValueError(f"degenerate spatial bounds [{lo}, {hi}]")
        t0, t1 = self.time_bounds
        if not (t0 == 0.0 and t1 > 0.0):
            raise ValueError("time_bounds must be [0, T] with T > 0")

    @property
    def spatial_dim(self) -> int:
        return len(self.spatial_bounds)

    def lo(self) -> np.ndarray:
        """Lower corner including time."""
        return np.array([b[0] for b in self.spatial_bounds] + [self.time_bounds[0]])

    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.spatial_bounds] + [self.time_bounds[1]])


@dataclass(frozen=True)
class BlockSpec:
    """Rectangular obstacle [x0, x1] x [y0, y1] inside the flow domain."""

    x: tuple[float, float]
    y: tuple[float, float]

    def contains(self, px, py):
        return (px >= self.x[0]) & (px <= self.x[1]) & (py >= self.y[0]) & (py <= self.y[1])


@dataclass
class Targets:
    """Initial/boundary targets; ``rate`` is the du/dt target (wave only)."""

    values: np.ndarray
    rate: Optional[np.ndarray] = None


@dataclass
class PdeProblem:
    """A well-posed PDE setup the engine can train against.

    ``residual`` maps a jet to an (n, n_equations) batch; ``jet_request``
    names the partials that jet must contain.  ``constants`` threads the
    physical coefficients so nothing is hard-coded downstream.
    """

    name: str
    domain: Domain
    residual: Callable[[JetBatch], object]
    jet_request: tuple[str, ...]
    initial_fn: Callable[[np.ndarray], np.ndarray]
    boundary_fn: Callable[[np.ndarray], np.ndarray]
    boundary_kind: str
    field_names: tuple[str, ...]
    constants: dict = field(default_factory=dict)
    initial_rate_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    geometry: Optional[BlockSpec] = None
    max_jet_order: int = 2

    def __post_init__(self):
        if self.boundary_kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary_kind {self.boundary_kind!r}")

    @property
    def input_dim(self) -> int:
        return self.domain.spatial_dim + 1

    @property
    def output_dim(self) -> int:
        return len(self.field_names)


# --- residual operators -----------------------------------------------------


def burgers_residual(jet: JetBatch, nu: float, third_order: bool = False):
    """r = u_t + u u_x - nu u_xx  (or the verbatim third-derivative reading).

    The third-order form r = u_t + u u_x - u_xxx is kept behind a flag and is
    off by default; it needs a jet built with max_order=3.
    """
    u = jet.values[:, 0]
    u_t = jet.d("t")[:, 0]
    u_x = jet.d("x")[:, 0]
    if third_order:
        r = u_t + u * u_x - jet.d("xxx")[:, 0]
    else:
        r = u_t + u * u_x - nu * jet.d("xx")[:, 0]
    return r.reshape(-1, 1)


def wave_residual(jet: JetBatch, c: float = 1.0):
    """r = u_tt - c (u_xx + u_yy)."""
    r = jet.d("tt")[:, 0] - c * (jet.d("xx")[:, 0] + jet.d("yy")[:, 0])
    return r.reshape(-1, 1)


def ns_residuals(jet: JetBatch, nu: float, rho: float):
    """Momentum and pressure residuals for 2-D incompressible flow.

    Columns: u-momentum, v-momentum, and the pressure-Poisson residual
    p_xx + p_yy + rho (u_x^2 + 2 u_x v_y + v_y^2) in its printed form (the
    cross term uses u_x v_y; sensitivity to this choice is untested here).
    """
    v = jet.values
    dx, dy, dt = jet.d("x"), jet.d("y"), jet.d("t")
    dxx, dyy = jet.d("xx"), jet.d("yy")
    u, vv, _ = v[:, 0], v[:, 1], v[:, 2]
    ru = dt[:, 0] + u * dx[:, 0] + vv * dy[:, 0] + dx[:, 2] / rho - nu * (dxx[:, 0] + dyy[:, 0])
    rv = dt[:, 1] + u * dx[:, 1] + vv * dy[:, 1] + dy[:, 2] / rho - nu * (dxx[:, 1] + dyy[:, 1])
    rp = dxx[:, 2] + dyy[:, 2] + rho * (dx[:, 0] ** 2 + 2.0 * dx[:, 0] * dy[:, 1] + dy[:, 1] ** 2)
    if isinstance(ru, np.ndarray):
        return np.stack([ru, rv, rp], axis=1)
    return torch.stack((ru, rv, rp), dim=1)


# --- initial / boundary evaluation ------------------------------------------


def evaluate_ic_bc(problem: PdeProblem, points: np.ndarray, region: str) -> Targets:
    """Targets f (initial) or g (boundary) at the given points.

    Initial points must sit at t = 0 and boundary points on the spatial
    boundary; anything else raises.  For periodic problems the boundary
    target is the zero of the paired difference u(x) - u(partner(x)).
    """
    pts = np.asarray(points, dtype=np.float64)
    sd = problem.domain.spatial_dim
    X, t = pts[:, :sd], pts[:, sd]
    if region == "initial":
        if np.any(t != 0.0):
            raise ValueError("initial points must have t = 0")
        values = problem.initial_fn(X)
        rate = None
        if problem.initial_rate_fn is not None:
            rate = problem.initial_rate_fn(X)
        return Targets(values=values, rate=rate)
    if region == "boundary":
        if not np.all(on_boundary(problem, X)):
            raise ValueError("boundary points must lie on the domain boundary")
        if problem.boundary_kind == "periodic":
            return Targets(values=np.zeros((len(pts), problem.output_dim)))
        return Targets(values=problem.boundary_fn(pts))
    raise ValueError(f"unknown region {region!r}")


def on_boundary(problem: PdeProblem, X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """True where a spatial point lies on the outer boundary or block faces."""
    X = np.atleast_2d(X)
    hit = np.zeros(len(X), dtype=bool)
    for a, (lo, hi) in enumerate(problem.domain.spatial_bounds):
        hit |= np.abs(X[:, a] - lo) <= tol
        hit |= np.abs(X[:, a] - hi) <= tol
    blk = problem.geometry
    if blk is not None:
        inside = blk.contains(X[:, 0], X[:, 1])
        edge = (
            (np.abs(X[:, 0] - blk.x[0]) <= tol)
            | (np.abs(X[:, 0] - blk.x[1]) <= tol)
            | (np.abs(X[:, 1] - blk.y[0]) <= tol)
            | (np.abs(X[:, 1] - blk.y[1]) <= tol)
        )
        hit |= inside & edge
    return hit


def periodic_partner(problem: PdeProblem, points: np.ndarray) -> np.ndarray:
    """Map each periodic-boundary point to its opposite-face partner."""
    pts = np.array(points, dtype=np.float64, copy=True)
    (lo, hi) = problem.domain.spatial_bounds[0]
    on_lo = np.abs(pts[:, 0] - lo) <= 1e-9
    on_hi = np.abs(pts[:, 0] - hi) <= 1e-9
    if not np.all(on_lo | on_hi):
        raise ValueError("periodic partner requested for a non-boundary point")
    pts[on_lo, 0] = hi
    pts[on_hi, 0] = lo
    return pts


# --- built-in problems -------------------------------------------------------


def burgers_problem(nu: float = 0.01 / np.pi, third_order: bool = False) -> PdeProblem:
    """Viscous Burgers on x in [-1, 1], t in [0, 1], periodic."""

    def initial(X):
        x = X[:, 0]
        return (-np.sin(np.pi * x) + 1.0 / np.cosh(x)).reshape(-1, 1)

    request = ("t", "x", "xxx") if third_order else ("t", "x", "xx")
    return PdeProblem(
        name="burgers1d",
        domain=Domain(((-1.0, 1.0),), (0.0, 1.0)),
        residual=lambda jet: burgers_residual(jet, nu, third_order),
        jet_request=request,
        initial_fn=initial,
        boundary_fn=lambda pts: np.zeros((len(pts), 1)),
        boundary_kind="periodic",
        field_names=("u",),
        constants={"nu": nu, "third_order": third_order},
        max_jet_order=3 if third_order else 2,
    )


def wave_problem(
    center: tuple[float, float] = (0.4, 0.0),
    sharpness: float = 40.0,
    c: float = 1.0,
) -> PdeProblem:
    """2-D wave equation on [-1, 1]^2 with a Gaussian pulse released at rest.

    The default pulse center (0.4, 0) keeps the bump inside the domain; it is
    configurable for other placements.
    """

    cx, cy = center

    def initial(X):
        r2 = (X[:, 0] - cx) ** 2 + (X[:, 1] - cy) ** 2
        return np.exp(-sharpness * r2).reshape(-1, 1)

    return PdeProblem(
        name="wave2d",
        domain=Domain(((-1.0, 1.0), (-1.0, 1.0)), (0.0, 1.0)),
        residual=lambda jet: wave_residual(jet, c),
        jet_request=("tt", "xx", "yy"),
        initial_fn=initial,
        boundary_fn=lambda pts: np.zeros((len(pts), 1)),
        boundary_kind="dirichlet",
        field_names=("u",),
        constants={"c": c, "center": center, "sharpness": sharpness},
        initial_rate_fn=lambda X: np.zeros((len(X), 1)),
    )


def ns_problem(
    nu: float = 0.04,
    rho: float = 1.0,
    inflow: float = 1.0,
    block: tuple[tuple[float, float], tuple[float, float]] = ((7.0, 9.0), (4.0, 6.0)),
    bounds: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 20.0), (0.0, 10.0)),
) -> PdeProblem:
    """Flow past a rectangular block: inflow left, zero-gradient outflow right,
    free-slip top/bottom, no-slip block faces, p = 0 reference at the outlet."""

    blk = BlockSpec(x=block[0], y=block[1])

    def initial(X):
        out = np.zeros((len(X), 3))
        solid = blk.contains(X[:, 0], X[:, 1])
        out[:, 0] = np.where(solid, 0.0, inflow)
        return out

    def boundary(pts):
        # Dirichlet components only; the mixed-face handling lives in the loss.
        return np.zeros((len(pts), 3))

    return PdeProblem(
        name="ns2d_block",
        domain=Domain(bounds, (0.0, 1.0)),
        residual=lambda jet: ns_residuals(jet, nu, rho),
        jet_request=("t", "x", "y", "xx", "yy"),
        initial_fn=initial,
        boundary_fn=boundary,
        boundary_kind="mixed_ns",
        field_names=("u", "v", "p"),
        constants={"nu": nu, "rho": rho, "inflow": inflow, "Re": inflow * (block[1][1] - block[1][0]) / nu},
        geometry=blk,
    )


PROBLEM_BUILDERS = {
    "burgers1d": burgers_problem,
    "wave2d": wave_problem,
    "ns2d_block": ns_problem,
}


def make_problem(name: str, **overrides) -> PdeProblem:
    """Instantiate a named problem, passing constant overrides through."""
    try:
        builder = PROBLEM_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; expected one of {sorted(PROBLEM_BUILDERS)}")
    return builder(**overrides)


def default_arch(problem: PdeProblem, width: int = 64, blocks: int = 2, layers_per_block: int = 2) -> NetworkArch:
    """Standard ResNet arch for a problem, with inputs normalized to [-1, 1]."""
    lo = tuple(b[0] for b in problem.domain.spatial_bounds) + (problem.domain.time_bounds[0],)
    hi = tuple(b[1] for b in problem.domain.spatial_bounds) + (problem.domain.time_bounds[1],)
    return NetworkArch(
        input_dim=problem.input_dim,
        output_dim=problem.output_dim,
        blocks=blocks,
        layers_per_block=layers_per_block,
        width=width,
        input_lo=lo,
        input_hi=hi,
    )
