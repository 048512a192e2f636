"""Adam optimisation of the composite objective with a step LR schedule.

One epoch = one Adam update on one fresh QMC batch plus the full regulator
set.  The learning rate starts at lr0 and decays by gamma every
``step_every`` epochs.  Runs are bitwise deterministic for a fixed
(config, problem, data, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import nets
from .losses import LossNotFinite, LossReport, effective_weights, loss_terms, total_from_terms
from .nets import NetworkArch, NetworkParams
from .pde import PdeProblem, default_arch
from .sampling import TrainSetSource


@dataclass
class TrainConfig:
    epochs: int
    lr0: float = 1e-3
    gamma: float = 0.9
    step_every: int = 5000
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    snapshot_every: int = 0          # 0 disables intermediate checkpoints
    weights: dict = field(default_factory=dict)
    wane_data: bool = False          # linearly fade the data term to zero

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n), step=0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update (Kingma & Ba, Algorithm 1)."""
    if params.shape != grads.shape:
        raise ValueError("params and grads must have matching shapes")
    b1, b2 = betas
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m=m, v=v, step=t)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 1-indexed epoch under the step schedule."""
    return config.lr0 * config.gamma ** (epoch // config.step_every)


class TrainingAborted(RuntimeError):
    """Training halted on a non-finite loss; last good state was kept."""

    def __init__(self, epoch: int, term: str, checkpoint: Optional[str]):
        msg = f"non-finite loss term {term!r} at epoch {epoch}"
        if checkpoint:
            msg += f"; last good checkpoint at {checkpoint}"
        super().__init__(msg)
        self.epoch = epoch
        self.term = term
        self.checkpoint = checkpoint


def train(
    problem: PdeProblem,
    source: TrainSetSource,
    config: TrainConfig,
    arch: Optional[NetworkArch] = None,
    out_dir=None,
) -> tuple[NetworkParams, list[dict]]:
    """Optimise a fresh network against the composite loss.

    Returns the trained parameters and a per-epoch history of loss reports
    (dicts with epoch, term values and the lr used).  When ``out_dir`` is
    given, intermediate checkpoints land in ``out_dir/checkpoints`` every
    ``snapshot_every`` epochs and the history is written as history.csv.
    """
    if arch is None:
        arch = default_arch(problem)
    params = nets.init_params(arch, config.seed)
    theta = params.values.copy()
    state = AdamState.zeros(theta.size)
    history: list[dict] = []
    out_path = Path(out_dir) if out_dir is not None else None
    last_ckpt = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        if config.snapshot_every > 0:
            (out_path / "checkpoints").mkdir(exist_ok=True)

    for epoch in range(1, config.epochs + 1):
        batch = source.for_epoch(epoch)
        w = effective_weights(batch, config.weights)
        if config.wane_data and batch.regulator is not None:
            w["data"] *= max(0.0, 1.0 - epoch / config.epochs)
        lr = lr_at(epoch, config)

        theta_t = torch.from_numpy(theta.copy()).requires_grad_(True)
        terms = loss_terms(theta_t, problem, batch, arch)
        bad = next((k for k, v in terms.items() if not torch.isfinite(v)), None)
        if bad is None:
            total = total_from_terms(terms, w)
            (grad,) = torch.autograd.grad(total, theta_t)
            if not torch.all(torch.isfinite(grad)):
                bad = "gradient"
        if bad is not None:
            if out_path is not None:
                last_ckpt = str(out_path / "checkpoint_abort.json")
                nets.save_checkpoint(last_ckpt, NetworkParams(theta, arch), config.seed, epoch - 1)
            raise TrainingAborted(epoch, bad, last_ckpt)

        report = LossReport(
            total=float(total.detach()),
            domain=float(terms["domain"].detach()),
            initial=float(terms["initial"].detach()),
            boundary=float(terms["boundary"].detach()),
            data=float(terms["data"].detach()),
            weights=w,
        )
        history.append({"epoch": epoch, "lr": lr, **report.as_dict()})

        theta, state = adam_step(theta, grad.numpy(), state, lr, config.adam_betas, config.adam_eps)

        if out_path is not None and config.snapshot_every > 0 and epoch % config.snapshot_every == 0:
            ck = out_path / "checkpoints" / f"epoch_{epoch:06d}.json"
            nets.save_checkpoint(ck, NetworkParams(theta, arch), config.seed, epoch)
            last_ckpt = str(ck)

    trained = NetworkParams(theta, arch)
    if out_path is not None:
        nets.save_checkpoint(out_path / "checkpoint.json", trained, config.seed, config.epochs)
        write_history_csv(out_path / "history.csv", history)
    return trained, history


def write_history_csv(path, history: list[dict]) -> None:
    """epoch, total, domain, initial, boundary, data, lr — one row per epoch."""
    cols = ("epoch", "total", "domain", "initial", "boundary", "data", "lr")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in history:
            fh.write(
                ",".join(
                    (str(row["epoch"]),)
                    + tuple(repr(float(row[c])) for c in cols[1:])
                )
                + "\n"
            )


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1, default=float)
        fh.write("\n")
