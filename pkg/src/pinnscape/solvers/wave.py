"""Chebyshev collocation solver for the 2-D wave equation with leapfrog time.

Tensor-product Chebyshev differentiation on [-1, 1]^2, homogeneous Dirichlet
walls, zero initial velocity.  The startup step uses the second-order
expansion u1 = u0 + dt^2/2 L u0 consistent with the rest state.
"""

from __future__ import annotations

import numpy as np

from .fields import SolutionField, SolverError


def chebyshev_diff(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collocation points cos(pi i / n) and the differentiation matrix, size n+1."""
    if n == 0:
        return np.ones(1), np.zeros((1, 1))
    i = np.arange(n + 1)
    x = np.cos(np.pi * i / n)
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** i
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights matching the Chebyshev points of chebyshev_diff."""
    if n == 0:
        return np.array([2.0])
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    for k in range(1, n // 2 + 1):
        factor = 2.0 if 2 * k != n else 1.0
        theta = np.pi * np.arange(1, n) / n
        v -= factor * np.cos(2.0 * k * theta) / (4.0 * k * k - 1.0)
    w[0] = w[n] = 1.0 / (n * n - 1.0 + (n % 2))
    w[1:n] = 2.0 * v / n
    return w


def solve_wave_chebyshev(
    res: int = 32,
    dt: float = 1e-3,
    c: float = 1.0,
    center: tuple[float, float] = (0.4, 0.0),
    sharpness: float = 40.0,
    t_end: float = 1.0,
    n_snapshots: int = 11,
    initial=None,
) -> SolutionField:
    """Solve u_tt = c (u_xx + u_yy) on [-1, 1]^2 from a Gaussian at rest.

    ``res`` is the per-axis point count (so polynomial degree res - 1).
    ``initial(X, Y)`` overrides the default Gaussian pulse.  Snapshots
    include t = 0, t_end/2 and t_end exactly; the discrete energy
    integral(u_t^2 + c |grad u|^2) is recorded per snapshot in meta["energy"].
    """
    if res < 16:
        raise ValueError(f"res must be >= 16 points per axis, got {res}")
    n = res - 1
    xc, D = chebyshev_diff(n)
    D2 = D @ D
    w1d = _clenshaw_curtis_weights(n)

    # work in collocation (descending) order internally; flip on output
    X, Y = np.meshgrid(xc, xc, indexing="xy")  # rows vary y, cols vary x
    if initial is None:
        u0 = np.exp(-sharpness * ((X - center[0]) ** 2 + (Y - center[1]) ** 2))
    else:
        u0 = np.asarray(initial(X, Y), dtype=np.float64)
    u0 = u0.copy()
    u0[0, :] = u0[-1, :] = 0.0
    u0[:, 0] = u0[:, -1] = 0.0

    # leapfrog stability: dt < 2 / sqrt(c * rho(L)) over the Dirichlet interior
    Din = D2[1:-1, 1:-1]
    lam = np.max(np.abs(np.linalg.eigvals(Din)))
    dt_max = 2.0 / np.sqrt(c * 2.0 * lam)
    if dt >= dt_max:
        raise SolverError(
            f"leapfrog unstable: dt={dt:g} exceeds stability bound {dt_max:.3e} "
            f"for res={res}"
        )

    def laplacian(u):
        return u @ D2.T + D2 @ u  # x along columns, y along rows

    def apply_bc(u):
        u[0, :] = u[-1, :] = 0.0
        u[:, 0] = u[:, -1] = 0.0
        return u

    times = np.linspace(0.0, t_end, n_snapshots)
    # one dt_eff so every snapshot interval is an integer step count
    span = times[1] - times[0]
    steps_per = max(1, round(span / dt))
    dt_eff = span / steps_per
    if dt_eff >= dt_max:
        raise SolverError(f"snapshot-aligned dt {dt_eff:g} exceeds stability bound {dt_max:.3e}")

    def energy(ut, u):
        ux = u @ D.T
        uy = D @ u
        dens = ut * ut + c * (ux * ux + uy * uy)
        return float(w1d @ dens @ w1d)

    snaps = [u0.copy()]
    energies = [energy(np.zeros_like(u0), u0)]  # released from rest: u_t(0) = 0

    u_prev = u0.copy()
    u_now = apply_bc(u_prev + 0.5 * dt_eff * dt_eff * c * laplacian(u_prev))
    step = 1
    for j in range(1, n_snapshots):
        target = j * steps_per
        while step < target:
            u_prev, u_now = u_now, apply_bc(
                2.0 * u_now - u_prev + dt_eff * dt_eff * c * laplacian(u_now)
            )
            step += 1
        # one extra step so the u_t difference is centered on the snapshot
        u_next = apply_bc(2.0 * u_now - u_prev + dt_eff * dt_eff * c * laplacian(u_now))
        if not np.all(np.isfinite(u_next)):
            raise SolverError(
                f"wave solve went non-finite near t={times[j]:.4g} (res={res}, dt={dt_eff:g})"
            )
        energies.append(energy((u_next - u_prev) / (2.0 * dt_eff), u_now))
        snaps.append(u_now.copy())
        u_prev, u_now = u_now, u_next
        step += 1

    # flip to increasing axes for storage: collocation order is descending
    axis = xc[::-1].copy()
    data = np.stack([s[::-1, ::-1] for s in snaps])
    return SolutionField(
        grid=(axis, axis),
        times=times,
        values={"u": data},
        fields=("u",),
        meta={
            "solver": "wave_chebyshev",
            "res": res,
            "dt": dt_eff,
            "c": c,
            "center": list(center),
            "sharpness": sharpness,
            "energy": [float(e) for e in energies],
        },
    )


def field_energy(field: SolutionField) -> np.ndarray:
    """Per-snapshot discrete wave energy recorded by the solver."""
    try:
        return np.array(field.meta["energy"], dtype=np.float64)
    except KeyError:
        raise ValueError("field carries no recorded energy series")
