"""Experiment configuration: one TOML file fully captures a run.

Sections: [problem] (which PDE, constants, oracle resolution), [train]
(budget, schedule, seed, point counts), [regulator] (kind and its knobs)
and [landscape] (grid extraction).  Anything omitted falls back to the
documented defaults; CLI flags override file values.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


_PROBLEM_DEFAULTS = {
    "burgers1d": {
        "oracle_res": 512,
        "oracle_dt": 1e-4,
        "snapshots": 11,
        "n_domain": 4096,
        "n_initial": 512,
        "n_boundary": 512,
    },
    "wave2d": {
        "oracle_res": 32,
        "oracle_dt": 1e-3,
        "snapshots": 11,
        "n_domain": 4096,
        "n_initial": 512,
        "n_boundary": 512,
    },
    "ns2d_block": {
        "oracle_res": [200, 100],
        "oracle_dt": 2e-3,
        "snapshots": 11,
        "n_domain": 8192,
        "n_initial": 1024,
        "n_boundary": 1024,
    },
}

_TRAIN_DEFAULTS = {
    "epochs": 5000,
    "lr0": 1e-3,
    "gamma": 0.9,
    "step_every": 5000,
    "seed": 0,
    "snapshot_every": 0,
    "resample": True,
    "wane_data": False,
    "width": 64,
    "blocks": 2,
    "layers_per_block": 2,
    "weights": {"domain": 1.0, "initial": 1.0, "boundary": 1.0, "data": 1.0},
}

_REGULATOR_DEFAULTS = {
    "kind": "none",
    "fraction": 0.01,
    "seed": 0,
    "weight": None,  # None -> per-kind default (coarse 0.5, others 1.0)
    "coarse_factor": 10,
    "stride": 10,
    "x_positions": None,  # None -> block faces +- 1.5
    "path": None,
}

_LANDSCAPE_DEFAULTS = {
    "seed": 0,
    "half_range": 1.0,
    "resolution": 51,
    "ceiling": 10.0,
    "eval_interior": 4096,
    "eval_initial": 512,
    "eval_boundary": 512,
}

_PROBLEM_CONSTANT_KEYS = {
    "burgers1d": {"nu", "third_order"},
    "wave2d": {"center", "sharpness", "c"},
    "ns2d_block": {"nu", "rho", "inflow", "block", "bounds"},
}


@dataclass
class ExperimentConfig:
    problem: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    regulator: dict = field(default_factory=dict)
    landscape: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "problem": dict(self.problem),
            "train": dict(self.train),
            "regulator": dict(self.regulator),
            "landscape": dict(self.landscape),
        }


def _merge(defaults: dict, given: dict, section: str) -> dict:
    out = dict(defaults)
    for key, val in given.items():
        if key not in out:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        if key == "weights" and isinstance(val, dict):
            w = dict(out["weights"])
            w.update(val)
            out["weights"] = w
        else:
            out[key] = val
    return out


def resolve(raw: dict) -> ExperimentConfig:
    """Apply defaults and validate a raw config mapping."""
    for section in raw:
        if section not in ("problem", "train", "regulator", "landscape"):
            raise ConfigError(f"unknown section [{section}]")
    prob = dict(raw.get("problem", {}))
    name = prob.get("name")
    if name not in _PROBLEM_DEFAULTS:
        raise ConfigError(
            f"[problem].name must be one of {sorted(_PROBLEM_DEFAULTS)}, got {name!r}"
        )
    merged_prob = dict(_PROBLEM_DEFAULTS[name])
    allowed = _PROBLEM_CONSTANT_KEYS[name] | set(merged_prob) | {"name"}
    for key in prob:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [problem] for {name}")
    merged_prob.update(prob)

    cfg = ExperimentConfig(
        problem=merged_prob,
        train=_merge(_TRAIN_DEFAULTS, raw.get("train", {}), "train"),
        regulator=_merge(_REGULATOR_DEFAULTS, raw.get("regulator", {}), "regulator"),
        landscape=_merge(_LANDSCAPE_DEFAULTS, raw.get("landscape", {}), "landscape"),
    )
    kind = cfg.regulator["kind"]
    if kind not in ("none", "sparse", "coarse", "line_probe", "csv"):
        raise ConfigError(f"unknown regulator kind {kind!r}")
    if kind == "csv" and not cfg.regulator.get("path"):
        raise ConfigError("[regulator].path is required for kind 'csv'")
    if cfg.train["epochs"] < 1:
        raise ConfigError("[train].epochs must be >= 1")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse failure in {p}: {exc}") from exc
    return resolve(raw)


def problem_overrides(cfg: ExperimentConfig) -> dict:
    """Constant overrides to pass to the problem builder."""
    name = cfg.problem["name"]
    keys = _PROBLEM_CONSTANT_KEYS[name]
    out = {}
    for key in keys:
        if key in cfg.problem:
            val = cfg.problem[key]
            if key in ("center",):
                val = tuple(val)
            if key in ("block", "bounds"):
                val = tuple(tuple(b) for b in val)
            out[key] = val
    return out


def regulator_weight(cfg: ExperimentConfig) -> float:
    w = cfg.regulator.get("weight")
    if w is not None:
        return float(w)
    return 0.5 if cfg.regulator["kind"] == "coarse" else 1.0
