"""Fully-connected ResNet with tanh activations and its differentiation engine.

The network maps spatio-temporal coordinates to field values.  Parameters
live in a single flat float64 vector with a fixed canonical layout (per
layer: weight row-major, then bias), so checkpoints and landscape
directions stay portable.  Input derivatives up to third order (diagonal)
are propagated as forward duals through the layers; gradients of scalar
losses with respect to the parameters come from reverse-mode AD over that
same tape.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

DTYPE = torch.float64

_AXIS_NAMES = {1: ("x",), 2: ("x", "t"), 3: ("x", "y", "t")}


def axis_names(input_dim: int) -> tuple[str, ...]:
    """Coordinate names for a given input dimension (spatial first, time last)."""
    try:
        return _AXIS_NAMES[input_dim]
    except KeyError:
        raise ValueError(f"unsupported input_dim {input_dim}; expected 1, 2 or 3")


@dataclass(frozen=True)
class NetworkArch:
    """Shape of the ResNet MLP.

    ``input_lo``/``input_hi``, when set, define a fixed affine map taking each
    input coordinate into [-1, 1] before the first layer.  The map is part of
    the network definition (derivatives account for it); it carries no
    trainable parameters.
    """

    input_dim: int
    output_dim: int
    blocks: int = 2
    layers_per_block: int = 2
    width: int = 64
    activation: str = "tanh"
    input_lo: tuple[float, ...] | None = None
    input_hi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if self.blocks < 1 or self.layers_per_block < 1 or self.width < 1:
            raise ValueError("blocks, layers_per_block and width must be >= 1")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if (self.input_lo is None) != (self.input_hi is None):
            raise ValueError("input_lo and input_hi must be set together")
        if self.input_lo is not None:
            if len(self.input_lo) != self.input_dim or len(self.input_hi) != self.input_dim:
                raise ValueError("input normalization bounds must match input_dim")
            if any(hi <= lo for lo, hi in zip(self.input_lo, self.input_hi)):
                raise ValueError("input_hi must exceed input_lo on every axis")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) of every fully-connected layer in canonical order.

        Order: stem, block layers (block-major), interface, output head.
        """
        shapes = [(self.width, self.input_dim)]
        shapes += [(self.width, self.width)] * (self.blocks * self.layers_per_block)
        shapes += [(self.width, self.width)]          # interface before the head
        shapes += [(self.output_dim, self.width)]     # linear head, no activation
        return shapes

    def param_count(self) -> int:
        """Exact flat-vector length: sum of out*(in+1) over layers."""
        return sum(o * (i + 1) for o, i in self.layer_shapes())

    def to_dict(self) -> dict:
        d = {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "blocks": self.blocks,
            "layers_per_block": self.layers_per_block,
            "width": self.width,
            "activation": self.activation,
        }
        if self.input_lo is not None:
            d["input_lo"] = list(self.input_lo)
            d["input_hi"] = list(self.input_hi)
        return d

    @staticmethod
    def from_dict(d: dict) -> "NetworkArch":
        kw = dict(d)
        if "input_lo" in kw:
            kw["input_lo"] = tuple(kw["input_lo"])
            kw["input_hi"] = tuple(kw["input_hi"])
        return NetworkArch(**kw)


@dataclass
class NetworkParams:
    """Flat float64 weight/bias store for one :class:`NetworkArch`."""

    values: np.ndarray
    arch: NetworkArch

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("values must be a flat 1-D array")
        if self.values.size != self.arch.param_count():
            raise ValueError(
                f"values has {self.values.size} entries, arch requires "
                f"{self.arch.param_count()}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")


def init_params(arch: NetworkArch, seed: int) -> NetworkParams:
    """Deterministic Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for out, inp in arch.layer_shapes():
        bound = np.sqrt(6.0 / (inp + out))
        chunks.append(rng.uniform(-bound, bound, size=out * inp))
        chunks.append(np.zeros(out))
    return NetworkParams(np.concatenate(chunks), arch)


def _unpack(theta: torch.Tensor, arch: NetworkArch):
    """Split the flat vector into (weight, bias) views; consumes every entry once."""
    ws, i = [], 0
    for out, inp in arch.layer_shapes():
        w = theta[i : i + out * inp].view(out, inp)
        i += out * inp
        b = theta[i : i + out]
        i += out
        ws.append((w, b))
    if i != theta.shape[0]:
        raise ValueError(f"parameter vector length {theta.shape[0]} != consumed {i}")
    return ws


def _input_affine(arch: NetworkArch, x: torch.Tensor):
    """Map raw coordinates into [-1, 1]; returns (mapped, per-axis scale)."""
    if arch.input_lo is None:
        return x, None
    lo = torch.tensor(arch.input_lo, dtype=x.dtype)
    hi = torch.tensor(arch.input_hi, dtype=x.dtype)
    scale = 2.0 / (hi - lo)
    return (x - lo) * scale - 1.0, scale


class JetRequestError(ValueError):
    """A requested partial derivative is not supported."""


def _parse_request(request: Sequence[str], input_dim: int, max_order: int):
    """Split derivative specs into first/second/third diagonal axis indices.

    Specs are strings over the axis names, e.g. ``"t"``, ``"xx"``, ``"xxx"``.
    Mixed partials and orders above ``max_order`` are rejected.
    """
    names = axis_names(input_dim)
    firsts: list[int] = []
    seconds: list[int] = []
    thirds: list[int] = []
    for spec in request:
        if not spec or any(c not in names for c in spec):
            raise JetRequestError(f"unknown axis in derivative spec {spec!r}")
        if len(set(spec)) != 1:
            raise JetRequestError(f"mixed partial {spec!r} is not supported")
        order = len(spec)
        if order > max_order:
            raise JetRequestError(
                f"derivative {spec!r} has order {order} > max_order {max_order}"
            )
        a = names.index(spec[0])
        if order == 1:
            firsts.append(a)
        elif order == 2:
            seconds.append(a)
        elif order == 3:
            thirds.append(a)
        else:
            raise JetRequestError(f"derivative {spec!r} exceeds order 3")
    # second/third duals need the lower-order duals of the same axis
    for a in thirds:
        if a not in seconds:
            seconds.append(a)
    for a in seconds:
        if a not in firsts:
            firsts.append(a)
    return firsts, seconds, thirds


def jet_apply(
    theta: torch.Tensor,
    x: torch.Tensor,
    arch: NetworkArch,
    first_axes: Sequence[int] = (),
    second_axes: Sequence[int] = (),
    third_axes: Sequence[int] = (),
):
    """Network output plus requested diagonal input-derivatives as forward duals.

    Works on torch tensors and stays differentiable with respect to ``theta``,
    so composite losses built from these jets can be trained by reverse AD.
    Returns ``(value, firsts, seconds, thirds)`` where the lists follow the
    axis order given (seconds/thirds aligned with ``second_axes``/``third_axes``).
    """
    ws = _unpack(theta, arch)
    n = x.shape[0]
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"inputs have {x.shape[1]} columns, arch expects {arch.input_dim}")
    sec_pos = [list(first_axes).index(a) for a in second_axes]
    thr_pos = [list(second_axes).index(a) for a in third_axes]

    v, scale = _input_affine(arch, x)
    f = []
    for a in first_axes:
        e = torch.zeros(n, arch.input_dim, dtype=x.dtype)
        e[:, a] = 1.0 if scale is None else scale[a]
        f.append(e)
    s = [torch.zeros(n, arch.input_dim, dtype=x.dtype) for _ in second_axes]
    t3 = [torch.zeros(n, arch.input_dim, dtype=x.dtype) for _ in third_axes]

    def lin(w, b, v, f, s, t3):
        wt = w.T
        return (
            torch.addmm(b, v, wt),
            [d @ wt for d in f],
            [d @ wt for d in s],
            [d @ wt for d in t3],
        )

    def act(v, f, s, t3):
        # y = tanh(z); with sp = 1 - y^2:
        #   y_a   = sp z_a
        #   y_aa  = sp z_aa - 2 y sp z_a^2
        #   y_aaa = sp z_aaa - 6 y sp z_a z_aa - 2 sp (sp - 2 y^2) z_a^3
        y = torch.tanh(v)
        sp = 1.0 - y * y
        yf = [sp * d for d in f]
        ys = [
            sp * s[k] - 2.0 * y * sp * f[sec_pos[k]] * f[sec_pos[k]]
            for k in range(len(s))
        ]
        yt = []
        for k in range(len(t3)):
            za = f[sec_pos[thr_pos[k]]]
            zaa = s[thr_pos[k]]
            yt.append(
                sp * t3[k]
                - 6.0 * y * sp * za * zaa
                - 2.0 * sp * (sp - 2.0 * y * y) * za * za * za
            )
        return y, yf, ys, yt

    v, f, s, t3 = lin(*ws[0], v, f, s, t3)
    v, f, s, t3 = act(v, f, s, t3)
    li = 1
    for _ in range(arch.blocks):
        rv, rf, rs, rt = v, list(f), list(s), list(t3)
        for _ in range(arch.layers_per_block):
            v, f, s, t3 = lin(*ws[li], v, f, s, t3)
            v, f, s, t3 = act(v, f, s, t3)
            li += 1
        v = rv + v
        f = [a + b for a, b in zip(rf, f)]
        s = [a + b for a, b in zip(rs, s)]
        t3 = [a + b for a, b in zip(rt, t3)]
    v, f, s, t3 = lin(*ws[li], v, f, s, t3)
    v, f, s, t3 = act(v, f, s, t3)
    v, f, s, t3 = lin(*ws[li + 1], v, f, s, t3)
    return v, f, s, t3


@dataclass
class JetBatch:
    """Network values and requested partial derivatives at a batch of points.

    ``first`` maps axis names ("x", "y", "t") to (n, output_dim) arrays;
    ``second`` and ``third`` map diagonal specs ("xx", "tt", "xxx") likewise.
    Arrays may be numpy (public :func:`jet`) or torch (loss pipeline).
    """

    points: np.ndarray
    values: np.ndarray
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)
    third: dict = field(default_factory=dict)

    def d(self, spec: str):
        """Look up a derivative by spec string; raises KeyError when absent."""
        for store in (self.first, self.second, self.third):
            if spec in store:
                return store[spec]
        raise KeyError(f"jet does not contain the partial {spec!r}")


def _as_tensor(a) -> torch.Tensor:
    if isinstance(a, torch.Tensor):
        return a.to(DTYPE)
    return torch.as_tensor(np.asarray(a, dtype=np.float64))


def forward(params: NetworkParams, inputs) -> np.ndarray:
    """Evaluate the network; one row per input point, output_dim columns."""
    x = _as_tensor(inputs)
    if x.ndim != 2:
        raise ValueError("inputs must be a 2-D batch")
    theta = torch.from_numpy(params.values)
    with torch.no_grad():
        v, _, _, _ = jet_apply(theta, x, params.arch)
    return v.numpy()


def jet(
    params: NetworkParams,
    inputs,
    request: Sequence[str],
    max_order: int = 2,
) -> JetBatch:
    """Exact derivatives of the forward map at each input point.

    ``request`` lists derivative specs over the axis names, e.g.
    ``["t", "x", "xx"]``.  Orders above ``max_order`` (default 2) raise
    :class:`JetRequestError`; pass ``max_order=3`` to enable third-order
    diagonal partials.
    """
    x = _as_tensor(inputs)
    firsts, seconds, thirds = _parse_request(request, params.arch.input_dim, max_order)
    theta = torch.from_numpy(params.values)
    with torch.no_grad():
        v, f, s, t3 = jet_apply(theta, x, params.arch, firsts, seconds, thirds)
    names = axis_names(params.arch.input_dim)
    out = JetBatch(points=x.numpy(), values=v.numpy())
    for k, a in enumerate(firsts):
        out.first[names[a]] = f[k].numpy()
    for k, a in enumerate(seconds):
        out.second[names[a] * 2] = s[k].numpy()
    for k, a in enumerate(thirds):
        out.third[names[a] * 3] = t3[k].numpy()
    for store in (out.first, out.second, out.third):
        for key, arr in store.items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite partial {key!r} in jet")
    return out


def grad_params(params: NetworkParams, loss_fn: Callable[[torch.Tensor], torch.Tensor]) -> np.ndarray:
    """Gradient of a scalar loss with respect to every parameter entry.

    ``loss_fn`` receives the flat parameter vector as a torch tensor
    (requires_grad set) and must return a torch scalar built from it.
    """
    theta = torch.from_numpy(params.values.copy()).requires_grad_(True)
    loss = loss_fn(theta)
    if not torch.isfinite(loss):
        raise FloatingPointError(f"loss is non-finite: {float(loss.detach())}")
    (g,) = torch.autograd.grad(loss, theta)
    return g.numpy()


# --- checkpoint files: JSON header + base64 little-endian float64 payload ---


def save_checkpoint(path, params: NetworkParams, seed: int, epoch: int) -> None:
    """Write a checkpoint; the flat values are base64 of little-endian float64."""
    payload = params.values.astype("<f8").tobytes()
    doc = {
        "arch": params.arch.to_dict(),
        "seed": seed,
        "epoch": epoch,
        "dtype": "float64",
        "byte_order": "little",
        "values_b64": base64.b64encode(payload).decode("ascii"),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    """Read a checkpoint; returns (params, meta) with meta = {seed, epoch}."""
    with open(path) as fh:
        doc = json.load(fh)
    arch = NetworkArch.from_dict(doc["arch"])
    raw = base64.b64decode(doc["values_b64"])
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return NetworkParams(values, arch), {"seed": doc["seed"], "epoch": doc["epoch"]}
