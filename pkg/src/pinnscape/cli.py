"""Command-line front end: reference, train, landscape, evaluate, report.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.  The only
environment knob is PINNSCAPE_THREADS (torch thread count, default 1, which
keeps re-runs byte-for-byte reproducible).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .config import ConfigError, ExperimentConfig, load_config, resolve
from .losses import LossNotFinite
from .solvers import SolverError
from .training import TrainingAborted

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _setup_threads() -> None:
    import torch

    torch.set_num_threads(int(os.environ.get("PINNSCAPE_THREADS", "1")))


_PROBLEM_ALIASES = {
    "burgers": "burgers1d",
    "burgers1d": "burgers1d",
    "wave": "wave2d",
    "wave2d": "wave2d",
    "ns": "ns2d_block",
    "ns2d_block": "ns2d_block",
}


def _load(config_path, overrides: dict, problem: str | None = None) -> ExperimentConfig:
    """Config file, bare --problem defaults, or the file with flag overrides."""
    if config_path is None:
        if problem is None:
            raise ConfigError("pass --config or --problem")
        name = _PROBLEM_ALIASES.get(problem)
        if name is None:
            raise ConfigError(f"unknown problem {problem!r}")
        cfg = resolve({"problem": {"name": name}})
    else:
        cfg = load_config(config_path)
        if problem is not None:
            cfg.problem["name"] = _PROBLEM_ALIASES.get(problem, problem)
    for section, kv in overrides.items():
        for key, val in kv.items():
            if val is not None:
                getattr(cfg, section)[key] = val
    return resolve(cfg.as_dict())


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except FileNotFoundError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (SolverError, TrainingAborted, LossNotFinite) as exc:
        click.echo(f"numerical abort: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
def main() -> None:
    """Data-regulated PINN experiments and loss-landscape extraction."""
    _setup_threads()


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(), default=None)
@click.option("--problem", type=str, default=None, help="Problem name instead of a config file.")
@click.option("--out", required=True, type=click.Path())
@click.option("--coarse", default=1, show_default=True, help="Mesh reduction factor per axis.")
def reference(config_path, problem, out, coarse):
    """Run the configured numerical oracle and write the field artifacts."""
    from .runs import run_reference

    cfg = _run(_load, config_path, {}, problem)
    _run(run_reference, cfg, out, coarse_factor=coarse)
    click.echo(f"reference written to {out}")


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(), default=None)
@click.option("--problem", type=str, default=None, help="Problem name instead of a config file.")
@click.option("--out", required=True, type=click.Path())
@click.option("--reference", "reference_dir", type=click.Path(), default=None,
              help="Directory holding the oracle field (required for regulated runs).")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--regulator", "reg_kind", type=str, default=None)
@click.option("--fraction", type=float, default=None)
@click.option("--stride", type=int, default=None)
def train(config_path, problem, out, reference_dir, epochs, seed, reg_kind, fraction, stride):
    """Train a network per the config; writes checkpoint, history and manifest."""
    from .runs import run_train

    cfg = _run(
        _load,
        config_path,
        {
            "train": {"epochs": epochs, "seed": seed},
            "regulator": {"kind": reg_kind, "fraction": fraction, "stride": stride},
        },
        problem,
    )
    manifest = _run(run_train, cfg, out, reference_dir=reference_dir)
    line = f"trained {manifest['problem']} for {manifest['epochs']} epochs; "
    line += f"final loss {manifest['final_loss']['total']:.6g}"
    if "l2" in manifest:
        line += f"; relative L2 {manifest['l2']['relative']:.6g}"
    click.echo(line)


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--half-range", type=float, default=None)
@click.option("--resolution", type=int, default=None)
def landscape(run_dir, checkpoint, seed, half_range, resolution):
    """Extract the loss-landscape grid around a run's trained checkpoint."""
    from .runs import run_landscape

    try:
        info = _run(
            run_landscape,
            run_dir,
            checkpoint=checkpoint,
            seed=seed,
            half_range=half_range,
            resolution=resolution,
        )
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(
        f"landscape grid {info['resolution']}x{info['resolution']} written; "
        f"center loss {info['center_loss']:.6g}"
    )


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--reference", "reference_dir", type=click.Path(), default=None)
def evaluate(run_dir, reference_dir):
    """Relative/absolute L2 of a trained run against the reference field."""
    from .runs import run_evaluate

    report = _run(run_evaluate, run_dir, reference_dir=reference_dir)
    click.echo(json.dumps(report, indent=1, sort_keys=True))


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(), multiple=True)
@click.option("--out", type=click.Path(), default=None)
def report(run_dir, out):
    """Render figures from run artifacts (needs the pinnscape-plotview package)."""
    try:
        from plotview import render_run_report
    except ImportError:
        click.echo(
            "config error: the 'pinnscape-plotview' package is not installed; "
            "install it to render reports",
            err=True,
        )
        sys.exit(EXIT_CONFIG)
    outputs = render_run_report([Path(r) for r in run_dir], Path(out) if out else None)
    for f in outputs:
        click.echo(str(f))


if __name__ == "__main__":
    main()
