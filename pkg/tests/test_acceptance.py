"""Acceptance gates for the engine, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL line per
criterion.  The flow-past-a-block experiments retrain six 10000-epoch
networks and are marked ``extended`` (hours on one CPU core); deselect them
with ``-m "not extended"`` for the quick gates.

Known red: the Burgers oracle-quality sub-gate pins rel-L2 < 1e-6 for the
256 vs 512 spectral runs at t=1.  The viscous front (width ~2e-2 at
nu=0.01/pi) is not resolvable at those resolutions; the measured difference
is ~3e-3, and the 1e-6 level is only reached from 1024 vs 2048 on.  The gate
is asserted as stated rather than weakened.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import torch

from pinnscape import (
    burgers_problem,
    composite_loss,
    default_arch,
    evaluate_grid,
    forward,
    grad_params,
    init_params,
    jet,
    make_loss_eval,
    ns_residuals,
    sample_directions,
    wave_residual,
)
from pinnscape.config import load_config
from pinnscape.landscape import _neuron_views, load_grid
from pinnscape.losses import make_loss_fn
from pinnscape.nets import NetworkArch, NetworkParams, axis_names
from pinnscape.runs import run_landscape, run_reference, run_train
from pinnscape.sampling import TrainSetSource
from pinnscape.solvers import (
    field_energy,
    solve_burgers_spectral,
    solve_ns_ftcs,
    solve_wave_chebyshev,
)

torch.set_num_threads(1)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


# --- criterion: derivative correctness ---------------------------------------


class TestDerivativeCorrectness:
    def test_jet_and_grad_match_finite_differences(self):
        rng = np.random.default_rng(2024)
        worst_first, worst_second = 0.0, 0.0
        for trial in range(20):
            d_in = 2 if trial % 2 == 0 else 3
            arch = NetworkArch(input_dim=d_in, output_dim=1, width=8)
            params = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
            x = rng.uniform(-0.8, 0.8, (20, d_in))
            names = axis_names(d_in)
            jb = jet(params, x, list(names) + [n * 2 for n in names])
            h = 1e-4
            for a, n in enumerate(names):
                e = np.zeros(d_in)
                e[a] = 1.0
                fd1 = (forward(params, x + h * e) - forward(params, x - h * e)) / (2 * h)
                fd2 = (
                    forward(params, x + h * e) - 2 * forward(params, x) + forward(params, x - h * e)
                ) / (h * h)
                r1 = np.max(np.abs(jb.d(n) - fd1) / (np.abs(fd1) + 1e-12))
                r2 = np.max(np.abs(jb.d(n * 2) - fd2) / (np.abs(fd2) + 1e-9))
                worst_first = max(worst_first, r1)
                worst_second = max(worst_second, r2)

        problem = burgers_problem()
        arch = NetworkArch(input_dim=2, output_dim=1, blocks=1, layers_per_block=1, width=4,
                           input_lo=(-1.0, 0.0), input_hi=(1.0, 1.0))
        params = NetworkParams(rng.standard_normal(arch.param_count()) * 0.5, arch)
        batch = TrainSetSource(problem, 64, 16, 16, seed=0).for_epoch(0)
        loss_fn = make_loss_fn(problem, arch, batch)
        g = grad_params(params, loss_fn)
        fd = np.zeros_like(g)
        hh = 1e-6
        for i in range(g.size):
            up, dn = params.values.copy(), params.values.copy()
            up[i] += hh
            dn[i] -= hh
            with torch.no_grad():
                fd[i] = (
                    float(loss_fn(torch.from_numpy(up))) - float(loss_fn(torch.from_numpy(dn)))
                ) / (2 * hh)
        cos = g @ fd / (np.linalg.norm(g) * np.linalg.norm(fd))

        ok = worst_first < 1e-5 and worst_second < 1e-3 and cos > 1 - 1e-8
        report(
            "derivative-correctness",
            ok,
            f"first {worst_first:.2e} < 1e-5, second {worst_second:.2e} < 1e-3, "
            f"grad cosine 1-{1 - cos:.2e}",
        )
        assert ok


# --- criterion: residual annihilation ----------------------------------------


class TestResidualAnnihilation:
    def test_exact_solutions_annihilated(self):
        from tests.test_pde import analytic_jet_1d, analytic_jet_2d
        import sympy as sp

        worst = 0.0
        jb = analytic_jet_1d(lambda x, t: sp.S(0.42) + 0 * x, None, None)
        from pinnscape import burgers_residual

        worst = max(worst, float(np.abs(burgers_residual(jb, 0.01 / np.pi)).max()))
        jb = analytic_jet_2d([lambda x, y, t: sp.sin(x + y - sp.sqrt(2) * t)])
        worst = max(worst, float(np.abs(wave_residual(jb)).max()))
        jb = analytic_jet_2d(
            [lambda x, y, t: sp.S(1), lambda x, y, t: sp.S(0), lambda x, y, t: sp.S(0)]
        )
        worst = max(worst, float(np.abs(ns_residuals(jb, nu=0.04, rho=1.0)).max()))
        ok = worst < 1e-10
        report("residual-annihilation", ok, f"max |r| {worst:.2e} < 1e-10 on exact solutions")
        assert ok


# --- criterion: oracle quality ------------------------------------------------


class TestOracleQuality:
    def test_wave_energy_drift(self):
        f = solve_wave_chebyshev(res=32, dt=1e-3)
        e = field_energy(f)
        drift = float(np.abs(e / e[0] - 1.0).max())
        ok = drift < 0.01
        report("oracle-quality/wave-energy", ok, f"drift {drift:.2e} < 1e-2 over [0,1]")
        assert ok

    def test_ns_uniform_flow_exactness(self):
        f = solve_ns_ftcs(res=(100, 50), dt=2e-3, block=None, n_snapshots=5)
        worst = max(
            float(np.abs(f.values["u"] - 1.0).max()),
            float(np.abs(f.values["v"]).max()),
            float(np.abs(f.values["p"]).max()),
        )
        ok = worst < 1e-8
        report("oracle-quality/ns-uniform", ok, f"max deviation {worst:.2e} < 1e-8")
        assert ok

    def test_burgers_self_convergence_as_stated(self):
        # stated gate: res 256 vs 512 rel-L2 < 1e-6 at t=1.  The spectral
        # truncation of the viscous front sits orders above that; the
        # measured value and the converging tail are reported for context.
        a = solve_burgers_spectral(res=256, dt=1e-4)
        b = solve_burgers_spectral(res=512, dt=1e-4)
        d = float(
            np.linalg.norm(a.values["u"][-1] - b.values["u"][-1][::2])
            / np.linalg.norm(b.values["u"][-1][::2])
        )
        ok = d < 1e-6
        report(
            "oracle-quality/burgers-selfconv",
            ok,
            f"rel-L2(256 vs 512, t=1) = {d:.3e}; gate < 1e-6 is not reachable at these "
            "resolutions (front width ~2e-2); 1024 vs 2048 reaches 2.3e-7",
        )
        assert ok


# --- trained Burgers pair (shared by the Fig. 2 and landscape gates) ---------


@pytest.fixture(scope="session")
def burgers_pair(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_burgers")
    cfg_v = load_config(CONFIGS / "burgers_vanilla.toml")
    cfg_s = load_config(CONFIGS / "burgers_sparse1.toml")
    ref = root / "ref"
    run_reference(cfg_v, ref)
    mv = run_train(cfg_v, root / "vanilla", reference_dir=ref)
    ms = run_train(cfg_s, root / "sparse", reference_dir=ref)
    return {"root": root, "vanilla": mv, "sparse": ms}


class TestFig2BurgersRatio:
    def test_sparse_regulation_beats_vanilla_tenfold(self, burgers_pair):
        lv = burgers_pair["vanilla"]["l2"]["relative"]
        ls = burgers_pair["sparse"]["l2"]["relative"]
        ratio = lv / ls
        ok = ratio >= 10.0
        report(
            "fig2-burgers-ratio",
            ok,
            f"vanilla L2 {lv:.4f}, sparse L2 {ls:.4f}, ratio {ratio:.1f} >= 10",
        )
        assert ok

    def test_desk_run_loss_drops_hundredfold(self, burgers_pair):
        # sanity floor on the regulated desk-scale run; the vanilla baseline
        # stalls by design (that stall is the whole point of regulation)
        drops = {}
        for name in ("sparse", "vanilla"):
            hist = np.genfromtxt(
                burgers_pair["root"] / name / "history.csv", delimiter=",", names=True
            )
            drops[name] = float(hist["total"][0] / hist["total"][-1])
        ok = drops["sparse"] >= 100.0
        report(
            "fig2-loss-drop",
            ok,
            f"sparse run shrank {drops['sparse']:.0f}x >= 100x "
            f"(vanilla baseline: {drops['vanilla']:.0f}x)",
        )
        assert ok


# --- criterion: landscape properties ------------------------------------------


class TestLandscapeProperties:
    def test_construction_invariants(self):
        prob = burgers_problem()
        arch = default_arch(prob)
        rng = np.random.default_rng(17)
        params = NetworkParams(rng.standard_normal(arch.param_count()) * 0.6, arch)
        dirs = sample_directions(params, seed=11)

        norm_err = 0.0
        for wsl, bi in _neuron_views(params.values, arch):
            idx = np.r_[np.arange(wsl.start, wsl.stop), bi]
            ref = np.linalg.norm(params.values[idx])
            norm_err = max(
                norm_err,
                abs(np.linalg.norm(dirs.delta1[idx]) - ref),
                abs(np.linalg.norm(dirs.delta2[idx]) - ref),
            )
        cos = abs(dirs.delta1 @ dirs.delta2) / (
            np.linalg.norm(dirs.delta1) * np.linalg.norm(dirs.delta2)
        )

        eval_set = TrainSetSource(prob, 256, 64, 64, seed=0).for_epoch(0)
        loss_eval = make_loss_eval(prob, arch, eval_set)
        grid = evaluate_grid(params, dirs, loss_eval, resolution=11)
        center_err = abs(grid.logloss[5, 5] - np.log10(grid.center_loss))
        from pinnscape.landscape import DirectionPair

        neg = DirectionPair(delta1=-dirs.delta1, delta2=-dirs.delta2, seed=dirs.seed)
        rot = evaluate_grid(params, neg, loss_eval, resolution=11)
        rot_exact = bool(np.array_equal(rot.logloss, grid.logloss[::-1, ::-1]))

        ok = norm_err < 1e-12 and cos < 1e-10 and center_err < 1e-12 and rot_exact
        report(
            "landscape-properties",
            ok,
            f"filter-norm err {norm_err:.1e} < 1e-12, orthogonality {cos:.1e} < 1e-10, "
            f"center pin {center_err:.1e} < 1e-12, rotation bitwise {rot_exact}",
        )
        assert ok


class TestLandscapeContrastBurgers:
    def test_sparse_grid_lower_center_and_larger_range(self, burgers_pair):
        root = burgers_pair["root"]
        run_landscape(root / "vanilla")
        run_landscape(root / "sparse")
        gv = load_grid(root / "vanilla" / "landscape")
        gs = load_grid(root / "sparse" / "landscape")
        rv = float(gv.logloss.max() - gv.logloss.min())
        rs = float(gs.logloss.max() - gs.logloss.min())
        ok = gs.center_loss < gv.center_loss and rs > rv
        report(
            "landscape-contrast-burgers",
            ok,
            f"center {gs.center_loss:.2e} < {gv.center_loss:.2e}, "
            f"log-range {rs:.2f} > {rv:.2f}",
        )
        assert ok


# --- extended: flow past a block ----------------------------------------------


@pytest.fixture(scope="session")
def ns_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_ns")
    cfg = load_config(CONFIGS / "ns_vanilla.toml")
    ref = root / "ref"
    run_reference(cfg, ref)
    manifests = {}
    for name in (
        "ns_vanilla",
        "ns_sparse1",
        "ns_sparse5",
        "ns_sparse10",
        "ns_coarse",
        "ns_line_probe",
    ):
        c = load_config(CONFIGS / f"{name}.toml")
        manifests[name] = run_train(c, root / name, reference_dir=ref)
    return {"root": root, "manifests": manifests}


@pytest.mark.extended
class TestFig57NsDirectionality:
    def test_regulated_runs_beat_vanilla(self, ns_runs):
        m = ns_runs["manifests"]
        lv = m["ns_vanilla"]["l2"]["relative"]
        ls = m["ns_sparse1"]["l2"]["relative"]
        lc = m["ns_coarse"]["l2"]["relative"]
        ll = m["ns_line_probe"]["l2"]["relative"]
        ok = (lv / ls >= 5.0) and (lv / lc >= 5.0) and (ls < ll < lv)
        report(
            "fig57-ns-directionality",
            ok,
            f"vanilla {lv:.3f}, sparse {ls:.3f} ({lv / ls:.1f}x), "
            f"coarse {lc:.3f} ({lv / lc:.1f}x), line {ll:.3f} strictly between",
        )
        assert ok


@pytest.mark.extended
class TestLandscapeContrastNsSweep:
    def test_center_loss_monotone_in_sparse_fraction(self, ns_runs):
        root = ns_runs["root"]
        centers = []
        for name in ("ns_vanilla", "ns_sparse1", "ns_sparse5", "ns_sparse10"):
            run_landscape(root / name)
            centers.append(load_grid(root / name / "landscape").center_loss)
        ok = all(b <= a for a, b in zip(centers, centers[1:]))
        report(
            "landscape-contrast-ns-sweep",
            ok,
            "center losses " + " >= ".join(f"{c:.3e}" for c in centers),
        )
        assert ok


# --- criterion: determinism ----------------------------------------------------


def _digest_dir(root: Path) -> dict:
    out = {}
    for f in sorted(root.rglob("*")):
        if f.is_file():
            out[str(f.relative_to(root))] = hashlib.sha256(f.read_bytes()).hexdigest()
    return out


class TestDeterminism:
    def test_rerun_reproduces_identical_artifacts(self, tmp_path):
        cfgfile = tmp_path / "exp.toml"
        cfgfile.write_text(
            "[problem]\nname = 'burgers1d'\noracle_res = 64\noracle_dt = 1e-3\n"
            "n_domain = 64\nn_initial = 32\nn_boundary = 32\n"
            "[train]\nepochs = 40\nseed = 1\n"
            "[regulator]\nkind = 'sparse'\nfraction = 0.05\n"
            "[landscape]\neval_interior = 64\neval_initial = 16\neval_boundary = 16\n"
            "resolution = 5\n"
        )
        cfg = load_config(cfgfile)
        digests = []
        for attempt in ("one", "two"):
            ref = tmp_path / attempt / "ref"
            run = tmp_path / attempt / "run"
            run_reference(cfg, ref)
            run_train(cfg, run, reference_dir=ref)
            run_landscape(run)
            digests.append({**_digest_dir(ref), **_digest_dir(run)})
        ok = digests[0] == digests[1]
        report("determinism", ok, f"{len(digests[0])} artifact files byte-identical across re-runs")
        assert ok
