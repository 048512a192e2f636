"""Run orchestration: build oracles, train, extract landscapes, evaluate.

One directory per run: manifest.json, history.csv, checkpoint.json,
fields/ (oracle and network samples), landscape/ (grid CSV + meta) and
regulator.csv for regulated runs.  Every writer is deterministic, so a
re-run with the same config and seed reproduces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from . import nets
from .config import ExperimentConfig, problem_overrides, regulator_weight
from .landscape import evaluate_grid, make_loss_eval, sample_directions, save_grid
from .losses import composite_loss
from .metrics import l2_error
from .nets import NetworkArch, NetworkParams
from .pde import PdeProblem, default_arch, make_problem
from .sampling import (
    RegulatorSet,
    TrainSet,
    TrainSetSource,
    extract_coarse,
    extract_line_probe,
    extract_sparse,
    qmc_points,
)
from .solvers import (
    SolutionField,
    load_field,
    sample_field,
    save_field,
    solve_burgers_spectral,
    solve_ns_ftcs,
    solve_wave_chebyshev,
)
from .training import TrainConfig, train, write_manifest


def build_problem(cfg: ExperimentConfig) -> PdeProblem:
    return make_problem(cfg.problem["name"], **problem_overrides(cfg))


def build_arch(cfg: ExperimentConfig, problem: PdeProblem) -> NetworkArch:
    t = cfg.train
    return default_arch(
        problem,
        width=t["width"],
        blocks=t["blocks"],
        layers_per_block=t["layers_per_block"],
    )


def solve_oracle(cfg: ExperimentConfig, coarse_factor: int = 1) -> SolutionField:
    """Run the configured reference solver; coarse_factor shrinks the mesh."""
    name = cfg.problem["name"]
    res = cfg.problem["oracle_res"]
    dt = cfg.problem["oracle_dt"]
    snaps = cfg.problem["snapshots"]
    over = problem_overrides(cfg)
    if name == "burgers1d":
        r = int(res) // coarse_factor
        return solve_burgers_spectral(
            res=r, dt=dt, nu=over.get("nu", 0.01 / np.pi), n_snapshots=snaps
        )
    if name == "wave2d":
        r = int(res) // coarse_factor
        return solve_wave_chebyshev(
            res=r,
            dt=dt,
            c=over.get("c", 1.0),
            center=over.get("center", (0.4, 0.0)),
            sharpness=over.get("sharpness", 40.0),
            n_snapshots=snaps,
        )
    nx, ny = res
    kw = {k: over[k] for k in ("nu", "rho", "inflow", "block", "bounds") if k in over}
    return solve_ns_ftcs(
        res=(int(nx) // coarse_factor, int(ny) // coarse_factor),
        dt=dt,
        n_snapshots=snaps,
        **kw,
    )


def run_reference(cfg: ExperimentConfig, out_dir, coarse_factor: int = 1) -> SolutionField:
    """reference command: solve and persist the oracle field."""
    field = solve_oracle(cfg, coarse_factor=coarse_factor)
    out = Path(out_dir)
    save_field(out, field, name="field")
    write_manifest(
        out / "manifest.json",
        {
            "kind": "reference",
            "config": cfg.as_dict(),
            "coarse_factor": coarse_factor,
            "solver_meta": field.meta,
        },
    )
    return field


def build_regulator(
    cfg: ExperimentConfig,
    reference: Optional[SolutionField],
    problem: PdeProblem,
) -> Optional[RegulatorSet]:
    """Materialise the configured regulator from the reference solution."""
    reg = cfg.regulator
    kind = reg["kind"]
    if kind == "none":
        return None
    weight = regulator_weight(cfg)
    if kind == "csv":
        return RegulatorSet.from_csv(reg["path"], kind="external", weight=weight)
    if reference is None:
        raise FileNotFoundError(
            f"regulator kind {kind!r} needs a reference solution; pass --reference"
        )
    if kind == "sparse":
        return extract_sparse(reference, float(reg["fraction"]), int(reg["seed"]), weight=weight)
    if kind == "coarse":
        coarse = solve_oracle(cfg, coarse_factor=int(reg["coarse_factor"]))
        return extract_coarse(coarse, weight=weight)
    # line_probe
    xpos = reg["x_positions"]
    if xpos is None:
        blk = problem.geometry
        if blk is None:
            raise ValueError("line_probe needs x_positions for problems without a block")
        xpos = [blk.x[0] - 1.5, blk.x[1] + 1.5]
    return extract_line_probe(reference, list(xpos), int(reg["stride"]), weight=weight)


def network_field(params: NetworkParams, ref: SolutionField) -> SolutionField:
    """Sample the network on the reference grid/snapshots for export."""
    pts = ref.node_points()
    values = {}
    preds = np.empty((len(pts), len(ref.fields)))
    chunk = 65536
    for lo in range(0, len(pts), chunk):
        preds[lo : lo + chunk] = nets.forward(params, pts[lo : lo + chunk])
    n_nodes_shape = tuple(len(g) for g in ref.grid)  # (nx, ny?)
    nt = len(ref.times)
    for k, name in enumerate(ref.fields):
        block = preds[:, k].reshape(n_nodes_shape + (nt,))
        # stored layout is [t, y?, x]
        if ref.spatial_dim == 1:
            values[name] = np.moveaxis(block, -1, 0)
        else:
            values[name] = np.transpose(block, (2, 1, 0))
    return SolutionField(
        grid=ref.grid,
        times=ref.times,
        values=values,
        fields=ref.fields,
        meta={"solver": "network_samples"},
        mask=None if ref.mask is None else ref.mask.copy(),
    )


def run_train(
    cfg: ExperimentConfig,
    out_dir,
    reference_dir=None,
) -> dict:
    """train command: build the train set, optimise, evaluate, persist."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    arch = build_arch(cfg, problem)

    reference = None
    if reference_dir is not None:
        reference = load_field(Path(reference_dir), name="field")
    regulator = build_regulator(cfg, reference, problem)

    t = cfg.train
    source = TrainSetSource(
        problem,
        n_domain=int(cfg.problem["n_domain"]),
        n_initial=int(cfg.problem["n_initial"]),
        n_boundary=int(cfg.problem["n_boundary"]),
        regulator=regulator,
        seed=int(t["seed"]),
        resample=bool(t["resample"]),
    )
    tc = TrainConfig(
        epochs=int(t["epochs"]),
        lr0=float(t["lr0"]),
        gamma=float(t["gamma"]),
        step_every=int(t["step_every"]),
        seed=int(t["seed"]),
        snapshot_every=int(t["snapshot_every"]),
        weights=dict(t["weights"]),
        wane_data=bool(t["wane_data"]),
    )
    params, history = train(problem, source, tc, arch=arch, out_dir=out)

    manifest = {
        "kind": "train",
        "config": cfg.as_dict(),
        "problem": problem.name,
        "arch": arch.to_dict(),
        "param_count": arch.param_count(),
        "epochs": tc.epochs,
        "final_loss": history[-1],
        "regulator": None
        if regulator is None
        else {"kind": regulator.kind, "count": len(regulator), "weight": regulator.weight},
    }
    if regulator is not None:
        regulator.to_csv(out / "regulator.csv", field_names=problem.field_names)
    if reference is not None:
        fields_dir = out / "fields"
        save_field(fields_dir, reference, name="oracle")
        save_field(fields_dir, network_field(params, reference), name="pinn")
        manifest["l2"] = l2_error(params, reference).as_dict()
    write_manifest(out / "manifest.json", manifest)
    return manifest


def frozen_eval_set(cfg: ExperimentConfig, problem: PdeProblem, run_dir) -> TrainSet:
    """The fixed evaluation point set shared by every landscape grid cell."""
    ls = cfg.landscape
    seed = int(ls["seed"])
    geo = problem.geometry
    regulator = None
    reg_csv = Path(run_dir) / "regulator.csv"
    if reg_csv.exists():
        with open(Path(run_dir) / "manifest.json") as fh:
            man = json.load(fh)
        info = man.get("regulator") or {}
        regulator = RegulatorSet.from_csv(
            reg_csv, kind=info.get("kind", "external"), weight=info.get("weight", 1.0)
        )
    return TrainSet(
        domain_pts=qmc_points(problem.domain, int(ls["eval_interior"]), "interior", seed, geo),
        ic_pts=qmc_points(problem.domain, int(ls["eval_initial"]), "initial", seed, geo),
        bc_pts=qmc_points(problem.domain, int(ls["eval_boundary"]), "boundary", seed, geo),
        regulator=regulator,
    )


def run_landscape(
    run_dir,
    checkpoint: Optional[str] = None,
    seed: Optional[int] = None,
    half_range: Optional[float] = None,
    resolution: Optional[int] = None,
) -> dict:
    """landscape command: grid of log-losses around a trained checkpoint."""
    run = Path(run_dir)
    with open(run / "manifest.json") as fh:
        manifest = json.load(fh)
    cfg = ExperimentConfig(**manifest["config"])
    problem = build_problem(cfg)
    params, meta = nets.load_checkpoint(checkpoint or run / "checkpoint.json")
    expect = build_arch(cfg, problem)
    if params.arch.to_dict() != expect.to_dict():
        raise ValueError(
            f"checkpoint arch {params.arch.to_dict()} does not match run config arch"
        )
    ls = cfg.landscape
    if seed is not None:
        ls = dict(ls, seed=seed)
        cfg.landscape = ls
    hr = float(half_range if half_range is not None else ls["half_range"])
    res = int(resolution if resolution is not None else ls["resolution"])

    eval_set = frozen_eval_set(cfg, problem, run)
    loss_eval = make_loss_eval(problem, params.arch, eval_set, cfg.train["weights"])
    dirs = sample_directions(params, int(ls["seed"]))
    grid = evaluate_grid(
        params, dirs, loss_eval, half_range=hr, resolution=res, ceiling=float(ls["ceiling"])
    )
    grid.meta["checkpoint_epoch"] = meta["epoch"]
    save_grid(run / "landscape", grid, name="grid")
    return {"center_loss": grid.center_loss, "resolution": res, "half_range": hr}


def run_evaluate(run_dir, reference_dir=None) -> dict:
    """evaluate command: L2 metrics of a run's checkpoint against a reference."""
    run = Path(run_dir)
    params, _ = nets.load_checkpoint(run / "checkpoint.json")
    if reference_dir is not None:
        ref = load_field(Path(reference_dir), name="field")
    else:
        ref = load_field(run / "fields", name="oracle")
    report = l2_error(params, ref).as_dict()
    with open(run / "manifest.json") as fh:
        manifest = json.load(fh)
    manifest["l2"] = report
    write_manifest(run / "manifest.json", manifest)
    return report
