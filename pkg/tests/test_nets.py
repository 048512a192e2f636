"""Network core: parameter layout, forward algebra, jets, weight gradients."""

import numpy as np
import pytest
import sympy as sp
import torch

from pinnscape import nets
from pinnscape.nets import (
    JetRequestError,
    NetworkArch,
    NetworkParams,
    forward,
    grad_params,
    init_params,
    jet,
    load_checkpoint,
    save_checkpoint,
)


def closed_form_count(d_in, d_out, blocks, layers, width):
    # stem + block layers + interface + linear head, each out*(in+1)
    return (
        width * (d_in + 1)
        + blocks * layers * width * (width + 1)
        + width * (width + 1)
        + d_out * (width + 1)
    )


def numpy_forward(values, arch, x):
    """Independent plain-numpy reimplementation of the layer algebra."""
    ws, i = [], 0
    for out, inp in arch.layer_shapes():
        w = values[i : i + out * inp].reshape(out, inp)
        i += out * inp
        b = values[i : i + out]
        i += out
        ws.append((w, b))
    assert i == values.size
    if arch.input_lo is not None:
        lo = np.array(arch.input_lo)
        hi = np.array(arch.input_hi)
        x = (x - lo) * (2.0 / (hi - lo)) - 1.0
    h = np.tanh(x @ ws[0][0].T + ws[0][1])
    li = 1
    for _ in range(arch.blocks):
        f = h
        for _ in range(arch.layers_per_block):
            f = np.tanh(f @ ws[li][0].T + ws[li][1])
            li += 1
        h = h + f
    h = np.tanh(h @ ws[li][0].T + ws[li][1])
    li += 1
    return h @ ws[li][0].T + ws[li][1]


class TestParamCount:
    def test_minimal_arch_matches_closed_form(self):
        arch = NetworkArch(input_dim=1, output_dim=1, blocks=1, layers_per_block=1, width=1)
        assert arch.param_count() == closed_form_count(1, 1, 1, 1, 1) == 8
        assert init_params(arch, 0).values.size == 8

    @pytest.mark.parametrize("d_in,d_out", [(2, 1), (3, 1), (3, 3)])
    def test_default_arch_count(self, d_in, d_out):
        arch = NetworkArch(input_dim=d_in, output_dim=d_out)
        assert arch.param_count() == closed_form_count(d_in, d_out, 2, 2, 64)

    def test_unpack_consumes_every_entry_once(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        theta = torch.zeros(arch.param_count(), dtype=torch.float64)
        ws = nets._unpack(theta, arch)
        assert sum(w.numel() + b.numel() for w, b in ws) == arch.param_count()
        with pytest.raises(ValueError):
            nets._unpack(torch.zeros(arch.param_count() + 1, dtype=torch.float64), arch)

    def test_wrong_length_rejected(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        with pytest.raises(ValueError):
            NetworkParams(np.zeros(arch.param_count() - 1), arch)


class TestInit:
    def test_deterministic(self):
        arch = NetworkArch(input_dim=3, output_dim=1)
        a = init_params(arch, 7)
        b = init_params(arch, 7)
        assert np.array_equal(a.values, b.values)

    def test_init_bounds_and_zero_biases(self):
        arch = NetworkArch(input_dim=3, output_dim=1)
        for seed in (0, 1, 12345):
            p = init_params(arch, seed)
            i = 0
            for out, inp in arch.layer_shapes():
                bound = np.sqrt(6.0 / (inp + out))
                w = p.values[i : i + out * inp]
                i += out * inp
                b = p.values[i : i + out]
                i += out
                assert np.all(np.abs(w) < bound)
                assert np.all(np.abs(w) < 1.0)
                assert np.all(b == 0.0)

    def test_different_seeds_differ(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        assert not np.array_equal(init_params(arch, 0).values, init_params(arch, 1).values)


class TestForward:
    def test_zero_params_zero_output(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        p = NetworkParams(np.zeros(arch.param_count()), arch)
        x = np.random.default_rng(0).uniform(-1, 1, (20, 2))
        assert np.all(forward(p, x) == 0.0)

    def test_linear_head(self):
        # the output layer is linear: scaling its weights and bias scales the output
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        p = init_params(arch, 3)
        rng = np.random.default_rng(5)
        p.values[:] = rng.standard_normal(p.values.size) * 0.4
        x = rng.uniform(-1, 1, (10, 2))
        base = forward(p, x)
        head = arch.output_dim * (arch.width + 1)
        scaled = NetworkParams(np.concatenate([p.values[:-head], 3.0 * p.values[-head:]]), arch)
        assert np.allclose(forward(scaled, x), 3.0 * base, rtol=0, atol=1e-14)

    @pytest.mark.parametrize("d_in,d_out,width,norm", [(2, 1, 8, False), (3, 3, 16, True)])
    def test_matches_independent_reimplementation(self, d_in, d_out, width, norm):
        kw = {}
        if norm:
            kw = {"input_lo": tuple([-2.0] * d_in), "input_hi": tuple([3.0] * d_in)}
        arch = NetworkArch(input_dim=d_in, output_dim=d_out, width=width, **kw)
        rng = np.random.default_rng(11)
        p = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
        x = rng.uniform(-1.5, 2.5, (40, d_in))
        got = forward(p, x)
        want = numpy_forward(p.values, arch, x)
        assert np.allclose(got, want, rtol=1e-13, atol=1e-13)

    def test_pure_function(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        p = init_params(arch, 1)
        x = np.random.default_rng(2).uniform(-1, 1, (7, 2))
        assert np.array_equal(forward(p, x), forward(p, x))

    def test_dimension_mismatch_raises(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        p = init_params(arch, 0)
        with pytest.raises(ValueError):
            forward(p, np.zeros((4, 3)))


def fd_jet(p, x, spec, h=1e-4):
    """Central finite differences of forward along one axis spec."""
    names = nets.axis_names(p.arch.input_dim)
    a = names.index(spec[0])
    e = np.zeros(p.arch.input_dim)
    e[a] = 1.0
    if len(spec) == 1:
        return (forward(p, x + h * e) - forward(p, x - h * e)) / (2 * h)
    return (forward(p, x + h * e) - 2 * forward(p, x) + forward(p, x - h * e)) / (h * h)


class TestJet:
    def test_constant_network_zero_partials(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=8)
        vals = np.zeros(arch.param_count())
        vals[-1] = 0.7  # output bias only: constant net
        p = NetworkParams(vals, arch)
        x = np.random.default_rng(0).uniform(-1, 1, (10, 2))
        jb = jet(p, x, ["x", "t", "xx", "tt"])
        assert np.allclose(jb.values, 0.7)
        for spec in ("x", "t", "xx", "tt"):
            assert np.all(jb.d(spec) == 0.0)

    def test_symbolic_oracle_width_one(self):
        # width-1 net: the whole map is an explicit scalar expression sympy can
        # differentiate exactly, including the residual skip
        arch = NetworkArch(input_dim=1, output_dim=1, blocks=1, layers_per_block=1, width=1)
        rng = np.random.default_rng(9)
        vals = rng.standard_normal(8) * 0.8
        p = NetworkParams(vals, arch)
        ws, bs, w1, b1, wi, bi, wo, bo = vals
        xs = sp.Symbol("x")
        h = sp.tanh(ws * xs + bs)
        blk = h + sp.tanh(w1 * h + b1)
        expr = wo * sp.tanh(wi * blk + bi) + bo
        d1 = sp.lambdify(xs, sp.diff(expr, xs), "numpy")
        d2 = sp.lambdify(xs, sp.diff(expr, xs, 2), "numpy")
        d3 = sp.lambdify(xs, sp.diff(expr, xs, 3), "numpy")
        x = rng.uniform(-2, 2, (25, 1))
        jb = jet(p, x, ["x", "xx", "xxx"], max_order=3)
        assert np.allclose(jb.d("x")[:, 0], d1(x[:, 0]), rtol=1e-12, atol=1e-12)
        assert np.allclose(jb.d("xx")[:, 0], d2(x[:, 0]), rtol=1e-12, atol=1e-12)
        assert np.allclose(jb.d("xxx")[:, 0], d3(x[:, 0]), rtol=1e-11, atol=1e-11)

    @pytest.mark.parametrize("d_in", [2, 3])
    def test_finite_difference_oracle(self, d_in):
        arch = NetworkArch(input_dim=d_in, output_dim=1, width=8)
        rng = np.random.default_rng(100 + d_in)
        p = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
        x = rng.uniform(-0.8, 0.8, (30, d_in))
        names = nets.axis_names(d_in)
        request = list(names) + [n * 2 for n in names]
        jb = jet(p, x, request)
        for n in names:
            got = jb.d(n)
            want = fd_jet(p, x, n)
            rel = np.abs(got - want) / (np.abs(want) + 1e-12)
            assert rel.max() < 1e-5
        for n in names:
            got = jb.d(n * 2)
            want = fd_jet(p, x, n * 2)
            rel = np.abs(got - want) / (np.abs(want) + 1e-9)
            assert rel.max() < 1e-3

    def test_matches_nested_autograd(self):
        # independent derivative route: torch autograd over the plain forward
        arch = NetworkArch(input_dim=2, output_dim=1, width=8,
                           input_lo=(-1.0, 0.0), input_hi=(1.0, 1.0))
        rng = np.random.default_rng(42)
        p = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
        x = rng.uniform(0.05, 0.95, (12, 2))
        jb = jet(p, x, ["x", "t", "xx", "tt"])

        theta = torch.from_numpy(p.values)
        xt = torch.from_numpy(x).requires_grad_(True)
        v, _, _, _ = nets.jet_apply(theta, xt, arch)
        (g,) = torch.autograd.grad(v.sum(), xt, create_graph=True)
        (gxx,) = torch.autograd.grad(g[:, 0].sum(), xt, create_graph=True)
        (gtt,) = torch.autograd.grad(g[:, 1].sum(), xt, create_graph=True)
        assert np.allclose(jb.d("x")[:, 0], g[:, 0].detach().numpy(), atol=1e-13)
        assert np.allclose(jb.d("t")[:, 0], g[:, 1].detach().numpy(), atol=1e-13)
        assert np.allclose(jb.d("xx")[:, 0], gxx[:, 0].detach().numpy(), atol=1e-12)
        assert np.allclose(jb.d("tt")[:, 0], gtt[:, 1].detach().numpy(), atol=1e-12)

    def test_unsupported_orders_rejected(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        p = init_params(arch, 0)
        x = np.zeros((3, 2))
        with pytest.raises(JetRequestError):
            jet(p, x, ["xxx"])  # order 3 needs explicit opt-in
        with pytest.raises(JetRequestError):
            jet(p, x, ["xt"])  # mixed partials unsupported
        with pytest.raises(JetRequestError):
            jet(p, x, ["xxxx"], max_order=3)
        with pytest.raises(JetRequestError):
            jet(p, x, ["y"])  # no such axis in 2-D inputs


class TestGradParams:
    def test_quadratic_gradient_is_values(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        p = init_params(arch, 5)
        g = grad_params(p, lambda th: 0.5 * (th ** 2).sum())
        assert np.allclose(g, p.values, atol=1e-15)

    def test_untouched_parameter_has_zero_gradient(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        p = init_params(arch, 5)
        g = grad_params(p, lambda th: (th[3] ** 2) + th[10] * 2.0)
        expect = np.zeros_like(p.values)
        expect[3] = 2.0 * p.values[3]
        expect[10] = 2.0
        assert np.allclose(g, expect, atol=1e-15)

    def test_composite_loss_fd_oracle(self):
        # tiny net so central differences over every coordinate stay cheap
        from pinnscape import burgers_problem
        from pinnscape.losses import make_loss_fn
        from pinnscape.sampling import TrainSetSource

        problem = burgers_problem()
        arch = NetworkArch(input_dim=2, output_dim=1, blocks=1, layers_per_block=1, width=4,
                           input_lo=(-1.0, 0.0), input_hi=(1.0, 1.0))
        rng = np.random.default_rng(8)
        p = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
        batch = TrainSetSource(problem, 64, 16, 16, seed=0).for_epoch(0)
        loss_fn = make_loss_fn(problem, arch, batch)
        g = grad_params(p, loss_fn)

        def loss_at(vals):
            with torch.no_grad():
                return float(loss_fn(torch.from_numpy(vals)))

        h = 1e-6
        fd = np.zeros_like(g)
        for i in range(p.values.size):
            up = p.values.copy()
            dn = p.values.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (loss_at(up) - loss_at(dn)) / (2 * h)
        cos = (g @ fd) / (np.linalg.norm(g) * np.linalg.norm(fd))
        assert cos > 1 - 1e-8
        rel = np.abs(g - fd) / (np.abs(fd) + 1e-8)
        assert np.median(rel) < 1e-4

    def test_non_finite_loss_raises(self):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        p = init_params(arch, 0)
        with pytest.raises(FloatingPointError):
            grad_params(p, lambda th: th.sum() / 0.0)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tmp_path):
        arch = NetworkArch(input_dim=3, output_dim=3, width=8,
                           input_lo=(0.0, 0.0, 0.0), input_hi=(20.0, 10.0, 1.0))
        rng = np.random.default_rng(77)
        p = NetworkParams(rng.standard_normal(arch.param_count()), arch)
        path = tmp_path / "ck.json"
        save_checkpoint(path, p, seed=9, epoch=123)
        q, meta = load_checkpoint(path)
        assert np.array_equal(q.values, p.values)
        assert q.arch == arch
        assert meta == {"seed": 9, "epoch": 123}

    def test_rewrite_is_idempotent(self, tmp_path):
        arch = NetworkArch(input_dim=2, output_dim=1, width=4)
        p = init_params(arch, 1)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(a, p, seed=1, epoch=5)
        save_checkpoint(b, p, seed=1, epoch=5)
        assert a.read_bytes() == b.read_bytes()
