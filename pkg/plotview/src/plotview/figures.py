"""Figure builders: solution triptychs, training curves, landscape surfaces.

All writers are deterministic: fixed figure sizes and DPI, no timestamps,
and the PNG metadata stripped so byte-identical output comes out of
byte-identical input artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import GriddedField, LandscapeGrid, load_field, load_grid, load_history, load_manifest

TRIPTYCH_TIMES = (0.0, 0.5, 1.0)
DPI = 150
_SAVE_KW = {"dpi": DPI, "metadata": {"Software": None}}


def _nearest_time(times: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(times - t)))


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_triptych(run_dir, out_dir=None) -> list[Path]:
    """Network vs oracle panels at the initial, middle and final times.

    1-D problems render line plots; 2-D problems render paired images per
    field on a shared color scale, with the block outline when one exists.
    """
    run = Path(run_dir)
    out = Path(out_dir) if out_dir else run / "figures"
    oracle = load_field(run / "fields", "oracle")
    pinn = load_field(run / "fields", "pinn")
    try:
        manifest = load_manifest(run)
        l2 = manifest.get("l2", {}).get("relative")
    except FileNotFoundError:
        l2 = None

    outputs = []
    if oracle.spatial_dim == 1:
        fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2), sharey=True)
        x = oracle.axes[0]
        for ax, t in zip(axes, TRIPTYCH_TIMES):
            it = _nearest_time(oracle.times, t)
            ax.plot(x, oracle.values["u"][it], "k-", lw=1.8, label="numerical")
            ax.plot(x, pinn.values["u"][it], "r--", lw=1.4, label="network")
            ax.set_title(f"t = {oracle.times[it]:g}")
            ax.set_xlabel("x")
        axes[0].set_ylabel("u")
        axes[0].legend(frameon=False, fontsize=8)
        if l2 is not None:
            fig.suptitle(f"relative L2 error {l2:.4g}", fontsize=10)
        fig.tight_layout()
        outputs.append(_save(fig, out / "triptych_u.png"))
        return outputs

    x, y = oracle.axes
    extent = (x[0], x[-1], y[0], y[-1])
    block = (oracle.meta or {}).get("block")
    for fname in oracle.fields:
        fig, axes = plt.subplots(2, 3, figsize=(11.5, 6.0))
        vmin = min(oracle.values[fname].min(), pinn.values[fname].min())
        vmax = max(oracle.values[fname].max(), pinn.values[fname].max())
        for col, t in enumerate(TRIPTYCH_TIMES):
            it = _nearest_time(oracle.times, t)
            for row, (label, field) in enumerate((("numerical", oracle), ("network", pinn))):
                ax = axes[row, col]
                im = ax.imshow(
                    field.values[fname][it],
                    origin="lower",
                    extent=extent,
                    vmin=vmin,
                    vmax=vmax,
                    cmap="viridis",
                    aspect="auto",
                )
                if block is not None:
                    (bx0, bx1), (by0, by1) = block
                    ax.add_patch(
                        plt.Rectangle(
                            (bx0, by0), bx1 - bx0, by1 - by0,
                            fill=False, edgecolor="white", lw=1.0,
                        )
                    )
                if col == 0:
                    ax.set_ylabel(label)
                if row == 0:
                    ax.set_title(f"t = {oracle.times[it]:g}")
        fig.colorbar(im, ax=axes, shrink=0.85, label=fname)
        if l2 is not None:
            fig.suptitle(f"{fname}: relative L2 error {l2:.4g}", fontsize=10)
        outputs.append(_save(fig, out / f"triptych_{fname}.png"))
    return outputs


def plot_history(run_dir, out_dir=None) -> list[Path]:
    """Per-term loss curves over the training epochs, log scale."""
    run = Path(run_dir)
    out = Path(out_dir) if out_dir else run / "figures"
    hist = load_history(run)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for term in ("total", "domain", "initial", "boundary", "data"):
        vals = hist[term]
        if term == "data" and np.all(vals == 0.0):
            continue
        ax.semilogy(hist["epoch"], np.maximum(vals, 1e-16), lw=1.2, label=term)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(frameon=False, fontsize=8, ncol=2)
    fig.tight_layout()
    return [_save(fig, out / "history.png")]


def plot_landscape(grid_dirs, out_path, titles=None, shared_scale=True) -> Path:
    """3-D log-loss surfaces, one panel per grid, optional shared z-scale."""
    grid_dirs = [Path(g) for g in np.atleast_1d(grid_dirs)]
    grids = [load_grid(g) for g in grid_dirs]
    n = len(grids)
    ncols = min(n, 2)
    nrows = (n + ncols - 1) // ncols
    fig = plt.figure(figsize=(5.4 * ncols, 4.2 * nrows))
    zmin = min(g.logloss.min() for g in grids)
    zmax = max(g.logloss.max() for g in grids)
    for k, grid in enumerate(grids):
        ax = fig.add_subplot(nrows, ncols, k + 1, projection="3d")
        A, B = np.meshgrid(grid.alphas, grid.betas)
        ax.plot_surface(A, B, grid.logloss, rstride=1, cstride=1, cmap="viridis",
                        edgecolor="none")
        ci = len(grid.alphas) // 2
        ax.scatter([0.0], [0.0], [grid.logloss[ci, ci]], color="red", s=12)
        if shared_scale and n > 1:
            ax.set_zlim(zmin, zmax)
        if titles:
            ax.set_title(titles[k], fontsize=10)
        ax.set_xlabel("alpha")
        ax.set_ylabel("beta")
        ax.set_zlabel("log10 loss")
    out_path = Path(out_path)
    return _save(fig, out_path)


def render_run_report(run_dirs, out_dir=None) -> list[Path]:
    """Render every figure the artifacts in each run directory support."""
    outputs: list[Path] = []
    runs = [Path(r) for r in run_dirs]
    for run in runs:
        target = Path(out_dir) / run.name if out_dir else run / "figures"
        if (run / "fields" / "oracle.json").exists():
            outputs += plot_triptych(run, target)
        if (run / "history.csv").exists():
            outputs += plot_history(run, target)
        if (run / "landscape" / "grid.csv").exists():
            outputs.append(
                plot_landscape([run / "landscape"], target / "landscape.png", titles=[run.name])
            )
    if len(runs) > 1:
        with_grids = [r for r in runs if (r / "landscape" / "grid.csv").exists()]
        if len(with_grids) > 1:
            base = Path(out_dir) if out_dir else with_grids[0].parent
            outputs.append(
                plot_landscape(
                    [r / "landscape" for r in with_grids],
                    base / "landscape_panel.png",
                    titles=[r.name for r in with_grids],
                )
            )
    return outputs
