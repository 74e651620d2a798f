"""Acceptance suite: one test per criterion, at the stated tolerances.

The end-to-end fixtures (checkerboard sphere, three stage-3 variants) are
expensive, so they are trained once per unique config in a session-scoped
fixture and cached on disk under ``.acceptance_cache`` keyed by the config;
training is deterministic, so cached artifacts are equivalent to a fresh
run.  Delete the directory to force retraining.

Runtime clauses stated for 8 CPU threads are asserted only when the host
actually has 8+ cores; on smaller hosts the measured time is reported
instead (the premise of the clause is unsatisfiable there).
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

import texsplat
from texsplat.config import TrainConfig
from texsplat.evaluate import (bench_fps, eval_views, observed_texel_mask,
                               prune_by_opacity, taylor_uv_error,
                               texture_roundtrip_psnr)
from texsplat.io_formats import texio
from texsplat.io_formats.ply import read_ply, write_ply
from texsplat.io_formats.cameras import read_cameras, write_cameras, camera_to_dict
from texsplat.io_formats.synthetic import (checkerboard, load_dataset,
                                           make_synthetic_dataset)
from texsplat.render import PixelGrads, render_backward, render_forward, render_reference
from texsplat.scene import GaussianSet, look_at_camera
from texsplat.texture import Texture
from texsplat.trainer import Trainer, load_checkpoint, rotation_from_normals
from texsplat.uvmap.charts import uv_to_sphere
from texsplat.uvmap.losses import loss_chamfer, loss_cycle3d
from texsplat.uvmap.mlp import UvMapper
from texsplat.uvmap.samples import SurfaceSamples, fps, sample_sphere_uniform
from texsplat.uvmap.train import UvTrainer

from conftest import random_scene, simple_camera

CACHE = Path(__file__).resolve().parent.parent / ".acceptance_cache"
EIGHT_CORES = (os.cpu_count() or 1) >= 8


def report(criterion: str, ok: bool, detail: str):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}  {detail}")


def budget(name: str, seconds: float, cap: float):
    note = f"{name}: {seconds:.1f}s (budget {cap:.0f}s at 8 threads)"
    if EIGHT_CORES:
        assert seconds <= cap, note
    else:
        print(f"  [runtime] {note}; host has {os.cpu_count()} cores, reporting only")


# ---------------------------------------------------------------------------
# criterion 1: oracle equivalence


class TestCriterion1OracleEquivalence:
    def test_forward_matches_reference_all_modes(self):
        t0 = time.time()
        worst = 0.0
        rng = np.random.default_rng(2024)
        for case in range(20):
            n = int(rng.integers(20, 200))
            scene = random_scene(n=n, seed=int(rng.integers(1 << 30)))
            mapper = UvMapper(rng=np.random.default_rng(case))
            mapper.set_normalization(center=[0, 0, 4.0], scale=2.0)
            mapper.cache_scene_uv(scene)
            tex = Texture(np.random.default_rng(case)
                          .uniform(0, 1, (32, 64, 3)).astype(np.float32))
            cam = simple_camera(size=64)
            for mode in ("vanilla", "textured", "textured_nosh", "prefetch"):
                fwd = render_forward(scene, cam, tex, mode=mode)
                ref = render_reference(scene, cam, tex, mode=mode)
                worst = max(worst,
                            np.abs(fwd.color - ref.color).max(),
                            np.abs(fwd.depth - ref.depth).max(),
                            np.abs(fwd.normal - ref.normal).max(),
                            np.abs(fwd.alpha - ref.alpha).max())
                assert worst <= 1e-4
        dt = time.time() - t0
        report("1", worst <= 1e-4, f"max |forward - reference| = {worst:.2e} "
                                   f"over 20 scenes x 4 modes ({dt:.0f}s)")
        budget("criterion 1", dt, 60)


# ---------------------------------------------------------------------------
# criterion 2: gradient suite


class TestCriterion2Gradients:
    def _fd(self, loss, get, put, grad, rng, k=12, h=1e-5):
        idx = rng.choice(grad.size, size=min(k, grad.size), replace=False)
        worst = 0.0
        for fi in idx:
            base = get().copy()
            flat = base.reshape(-1).copy()
            flat[fi] += h
            put(flat.reshape(base.shape))
            lp = loss()
            flat[fi] -= 2 * h
            put(flat.reshape(base.shape))
            lm = loss()
            put(base)
            fd = (lp - lm) / (2 * h)
            a = grad.reshape(-1)[fi]
            worst = max(worst, abs(fd - a) / max(abs(fd), abs(a), 1e-6))
        return worst

    def test_render_gradients_and_jacobian(self):
        t0 = time.time()
        scene = random_scene(n=10, seed=42, z=3.0, spread=0.3, scale_lo=-1.8,
                             scale_hi=-0.8, opacity_lo=-0.5, opacity_hi=1.0)
        cam = simple_camera(size=16, f=18.0)
        mapper = UvMapper(rng=np.random.default_rng(5))
        mapper.set_normalization(center=[0, 0, 3.0], scale=1.5)
        mapper.cache_scene_uv(scene)
        rng = np.random.default_rng(3)
        tex = Texture(rng.uniform(0.2, 0.8, (32, 64, 3)).astype(np.float32))
        w = dict(color=rng.normal(0, 1, (16, 16, 3)),
                 depth=rng.normal(0, 0.2, (16, 16)),
                 normal=rng.normal(0, 0.3, (16, 16, 3)),
                 alpha=rng.normal(0, 0.5, (16, 16)),
                 nosh=rng.normal(0, 0.7, (16, 16, 3)))

        def loss(mode):
            out = render_forward(scene, cam, tex, mode=mode)
            v = (np.sum(out.color * w["color"]) + np.sum(out.depth * w["depth"]) +
                 np.sum(out.normal * w["normal"]) + np.sum(out.alpha * w["alpha"]))
            if out.color_nosh is not None:
                v += np.sum(out.color_nosh * w["nosh"])
            return v

        def grads(mode):
            out = render_forward(scene, cam, tex, mode=mode)
            up = PixelGrads(color=w["color"], depth=w["depth"], normal=w["normal"],
                            alpha=w["alpha"],
                            color_nosh=w["nosh"] if out.color_nosh is not None else None)
            return render_backward(scene, cam, tex, mode, up, out)

        results = {}
        g = grads("vanilla")
        results["mu"] = self._fd(lambda: loss("vanilla"), lambda: scene.positions,
                                 scene.set_positions, g.positions, rng)
        results["q"] = self._fd(lambda: loss("vanilla"), lambda: scene.quats,
                                lambda v: scene.quats.__setitem__(..., v), g.quats, rng)
        results["s"] = self._fd(lambda: loss("vanilla"), lambda: scene.log_scales,
                                lambda v: scene.log_scales.__setitem__(..., v),
                                g.log_scales, rng)
        mapper.cache_scene_uv(scene)
        g = grads("textured")
        results["opacity"] = self._fd(lambda: loss("textured"),
                                      lambda: scene.opacity_logits,
                                      lambda v: scene.opacity_logits.__setitem__(..., v),
                                      g.opacity_logits, rng)
        results["sh"] = self._fd(lambda: loss("textured"), lambda: scene.sh,
                                 lambda v: scene.sh.__setitem__(..., v), g.sh, rng, k=20)
        touched = np.nonzero(np.abs(g.texture.reshape(-1)) > 1e-8)[0]
        picks = rng.choice(touched, size=min(12, len(touched)), replace=False)
        worst_t = 0.0
        for fi in picks:
            h = 1e-3
            base = tex.data.copy()
            tex.data.reshape(-1)[fi] += h
            lp = loss("textured")
            tex.data.reshape(-1)[fi] -= 2 * h
            lm = loss("textured")
            tex.data[...] = base
            fd = (lp - lm) / (2 * h)
            a = g.texture.reshape(-1)[fi]
            worst_t = max(worst_t, abs(fd - a) / max(abs(fd), abs(a), 1e-6))
        results["texture"] = worst_t

        for name, err in results.items():
            assert err <= 1e-3, f"{name}: rel err {err:.2e}"

        # jacobian_uv vs wrap-aware finite differences (rel err <= 1e-4)
        from texsplat.uvmap.charts import wrap_u_delta

        worst_j = 0.0
        checked = 0
        seed = 0
        while checked < 120:
            seed += 1
            m = UvMapper(rng=np.random.default_rng(seed))
            xr = np.random.default_rng(seed + 999).normal(0.0, 0.6, (12, 3))
            J, pole = m.jacobian_uv(xr)
            p = m.forward_sphere(xr)
            ok = (~pole) & (np.abs(p[:, 2]) < 0.95)
            for i in np.nonzero(ok)[0]:
                fd = np.zeros((2, 3))
                hh = 1e-4
                for k in range(3):
                    d = np.zeros(3)
                    d[k] = hh
                    up = m.forward_uv((xr[i] + d)[None])[0]
                    um = m.forward_uv((xr[i] - d)[None])[0]
                    fd[0, k] = wrap_u_delta(up[0] - um[0]) / (2 * hh)
                    fd[1, k] = (up[1] - um[1]) / (2 * hh)
                worst_j = max(worst_j, (np.abs(J[i] - fd) / max(np.abs(fd).max(), 1e-9)).max())
                checked += 1
        assert worst_j <= 1e-4

        dt = time.time() - t0
        detail = "  ".join(f"{k}={v:.1e}" for k, v in results.items())
        report("2", True, f"render grads rel err: {detail}; jacobian {worst_j:.1e} ({dt:.0f}s)")
        budget("criterion 2", dt, 120)


# ---------------------------------------------------------------------------
# shared end-to-end fixtures (criteria 3-9)


def _reduced_config(**overrides) -> TrainConfig:
    cfg = TrainConfig(
        seed=0, n_init_gaussians=3500,
        stage1_iters=4000, reg_start=1000, prune_every=1500, flatten_every=500,
        stage3_texture_only=2000, stage3_joint=6000,
        texture_height=256, texture_width=512)
    cfg.uv.steps = 10000
    for k, v in overrides.items():
        if k.startswith("loss."):
            setattr(cfg.loss, k[5:], v)
        else:
            setattr(cfg, k, v)
    return cfg


def _config_tag(cfg: TrainConfig, mode: str) -> str:
    import hashlib

    from texsplat.config import resolved_json

    return hashlib.sha1((resolved_json(cfg) + mode).encode()).hexdigest()[:12]


@pytest.fixture(scope="session")
def sphere_dataset():
    root = CACHE / "dataset_sphere"
    if not (root / "meta.json").exists():
        make_synthetic_dataset("sphere", checkerboard(256, 512), n_views=24,
                               resolution=256, seed=0, out_dir=root, n_test=4,
                               n_points=20000)
    return load_dataset(root)


def _train_cached(dataset, cfg: TrainConfig, mode: str, stages=("1", "2", "3"),
                  share_from=None):
    """Train (or load) a checkpoint for the given config; stages 1-2 can be
    shared across stage-3 variants through ``share_from``."""
    tag = _config_tag(cfg, mode)
    out = CACHE / f"ck_{tag}"
    marker = out / "done.json"
    if marker.exists():
        return out, json.loads(marker.read_text())
    t0 = time.time()
    tr = Trainer(dataset, cfg, out, mode=mode, log=lambda *a: print(*a, flush=True))
    timings = {}
    if share_from is not None and (share_from / "stage2.done").exists():
        scene, mapper, _, _ = load_checkpoint(share_from, need_mapper=True)
        tr.scene, tr.mapper = scene, mapper
        timings["shared"] = str(share_from)
    else:
        t = time.time()
        tr.stage1()
        timings["stage1_s"] = time.time() - t
        t = time.time()
        tr.stage2()
        timings["stage2_s"] = time.time() - t
        tr.save_checkpoint()
        (out / "stage2.done").write_text("ok")
    t = time.time()
    tr.stage3()
    timings["stage3_s"] = time.time() - t
    timings["total_s"] = time.time() - t0
    tr.save_checkpoint()
    marker.write_text(json.dumps(timings))
    return out, timings


@pytest.fixture(scope="session")
def trained_main(sphere_dataset):
    cfg = _reduced_config()
    out, timings = _train_cached(sphere_dataset, cfg, "textured")
    return out, timings, cfg


@pytest.fixture(scope="session")
def trained_prefetch(sphere_dataset, trained_main):
    main_out, _, _ = trained_main
    cfg = _reduced_config()
    out, timings = _train_cached(sphere_dataset, cfg, "prefetch",
                                 share_from=main_out)
    return out, timings


@pytest.fixture(scope="session")
def trained_noreg(sphere_dataset, trained_main):
    main_out, _, _ = trained_main
    cfg = _reduced_config(**{"loss.lambda_nosh": 0.0})
    out, timings = _train_cached(sphere_dataset, cfg, "textured",
                                 share_from=main_out)
    return out, timings


# ---------------------------------------------------------------------------
# criterion 3: Taylor second-order behavior on the trained mapper


class TestCriterion3TaylorOrder:
    def test_error_quarters_when_scale_halves(self, trained_main, sphere_dataset):
        t0 = time.time()
        out, _, _ = trained_main
        _, mapper, _, _ = load_checkpoint(out)
        rng = np.random.default_rng(7)
        n = 400
        pts = rng.normal(size=(n, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        quats = rotation_from_normals(pts, rng)

        def scene_at(scale):
            s = GaussianSet(positions=pts, quats=quats,
                            log_scales=np.tile([np.log(scale), np.log(scale), -20.0],
                                               (n, 1)),
                            opacity_logits=np.full(n, 4.0), sh=np.zeros((n, 16, 3)))
            mapper.cache_scene_uv(s)
            return s

        cam = look_at_camera([0, 0, 3.0], [0, 0, 0], 128, 128)
        e1 = taylor_uv_error(scene_at(0.06), cam, mapper)
        e2 = taylor_uv_error(scene_at(0.03), cam, mapper)
        ratio = e1 / e2
        dt = time.time() - t0
        report("3", 3.2 <= ratio <= 4.8,
               f"taylor error {e1:.2e} -> {e2:.2e}, ratio {ratio:.2f} ({dt:.0f}s)")
        assert 3.2 <= ratio <= 4.8
        budget("criterion 3", dt, 120)


# ---------------------------------------------------------------------------
# criterion 4: UV training quality on the unit-sphere cloud


class TestCriterion4UvTraining:
    def test_sphere_cloud_stage2(self):
        t0 = time.time()
        tag = CACHE / "uv_sphere.ckpt"
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(65536, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        centers = rng.normal(size=(6000, 3))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        P = fps(centers, 4096)
        if tag.exists():
            mapper = UvMapper.load(tag)
            train_time = None
        else:
            cfg = TrainConfig().uv
            cfg.steps = 10000
            samples = SurfaceSamples(pts, P, np.zeros(3), 1.0)
            mapper = UvMapper(rng=np.random.default_rng(1))
            UvTrainer(mapper, samples, cfg).run(log_every=2000,
                                                log=lambda *a: print(*a, flush=True))
            CACHE.mkdir(exist_ok=True)
            mapper.save(tag)
            train_time = time.time() - t0

        xs = pts[rng.choice(len(pts), 4096, replace=False)]
        c3d = loss_cycle3d(mapper, xs)
        diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        U = sample_sphere_uniform(4096, rng)
        cd = loss_chamfer(mapper, U, P)

        class RadialChart:
            def inverse_point(self, uv):
                return uv_to_sphere(np.atleast_2d(uv))

        cd_ideal = loss_chamfer(RadialChart(), U, P)
        ok = c3d <= 0.01 * diag and cd <= 2.0 * cd_ideal
        report("4", ok, f"cycle3d {c3d:.4f} (<= 1% diag = {0.01 * diag:.4f}); "
                        f"chamfer {cd:.4f} vs 2x ideal {2 * cd_ideal:.4f}")
        assert c3d <= 0.01 * diag
        assert cd <= 2.0 * cd_ideal
        if train_time is not None:
            budget("criterion 4", train_time, 600)


# ---------------------------------------------------------------------------
# criteria 5-7: end-to-end round trip and its ablations


class TestCriterion5RoundTrip:
    def test_texture_and_heldout_psnr(self, trained_main, sphere_dataset):
        out, timings, cfg = trained_main
        scene, mapper, texture, _ = load_checkpoint(out)
        ds = sphere_dataset
        obs = observed_texel_mask(scene, texture, ds.train_views)
        tex_psnr = texture_roundtrip_psnr(mapper, texture, ds, observed=obs)
        held = eval_views(scene, texture, ds.test_views, "textured")
        ok = tex_psnr >= 25.0 and held["psnr"] >= 28.0
        report("5", ok, f"texture PSNR {tex_psnr:.2f} dB (>= 25); held-out "
                        f"{held['psnr']:.2f} dB (>= 28); "
                        f"train {timings.get('total_s', 0) / 60:.1f} min")
        assert tex_psnr >= 25.0
        assert held["psnr"] >= 28.0
        if "total_s" in timings:
            budget("criterion 5", timings["total_s"], 1800)


class TestCriterion6PrefetchAblation:
    def test_prefetch_texture_worse(self, trained_main, trained_prefetch,
                                    sphere_dataset):
        main_out, _, _ = trained_main
        pre_out, _ = trained_prefetch
        ds = sphere_dataset
        scene_m, mapper_m, tex_m, _ = load_checkpoint(main_out)
        scene_p, mapper_p, tex_p, _ = load_checkpoint(pre_out)
        obs_m = observed_texel_mask(scene_m, tex_m, ds.train_views)
        obs_p = observed_texel_mask(scene_p, tex_p, ds.train_views,
                                    mode="prefetch")
        psnr_m = texture_roundtrip_psnr(mapper_m, tex_m, ds, observed=obs_m)
        psnr_p = texture_roundtrip_psnr(mapper_p, tex_p, ds, observed=obs_p)
        gap = psnr_m - psnr_p
        report("6", gap >= 2.0, f"intersection {psnr_m:.2f} dB vs prefetch "
                                f"{psnr_p:.2f} dB (gap {gap:.2f} >= 2)")
        assert gap >= 2.0


class TestCriterion7NoShRegularization:
    def test_lambda_zero_degrades_nosh(self, trained_main, trained_noreg,
                                       sphere_dataset):
        main_out, _, _ = trained_main
        noreg_out, _ = trained_noreg
        ds = sphere_dataset
        scene_r, _, tex_r, _ = load_checkpoint(main_out)
        scene_n, _, tex_n, _ = load_checkpoint(noreg_out)
        nosh_reg = eval_views(scene_r, tex_r, ds.test_views, "textured_nosh")["psnr"]
        nosh_off = eval_views(scene_n, tex_n, ds.test_views, "textured_nosh")["psnr"]
        full_reg = eval_views(scene_r, tex_r, ds.test_views, "textured")["psnr"]
        full_off = eval_views(scene_n, tex_n, ds.test_views, "textured")["psnr"]
        nosh_drop = nosh_reg - nosh_off
        full_delta = abs(full_reg - full_off)
        ok = nosh_drop >= 1.5 and full_delta <= 1.0
        report("7", ok, f"noSH: {nosh_reg:.2f} -> {nosh_off:.2f} dB "
                        f"(drop {nosh_drop:.2f} >= 1.5); full-mode delta "
                        f"{full_delta:.2f} <= 1.0")
        assert nosh_drop >= 1.5
        assert full_delta <= 1.0


class TestCriterion8Scaling:
    def test_pruning_ladder(self, trained_main, sphere_dataset):
        out, _, _ = trained_main
        scene, mapper, texture, _ = load_checkpoint(out)
        ds = sphere_dataset
        fracs = (1.0, 0.5, 0.2, 0.05)
        psnrs = []
        fpss = []
        for frac in fracs:
            sub = prune_by_opacity(scene, frac)
            psnrs.append(eval_views(sub, texture, ds.test_views, "textured")["psnr"])
            fpss.append(bench_fps(sub, texture, ds.test_views, frames=8))
        mono_psnr = all(psnrs[i] >= psnrs[i + 1] - 1e-9 for i in range(3))
        mono_fps = all(fpss[i] < fpss[i + 1] for i in range(3))
        report("8", mono_psnr and mono_fps,
               "PSNR " + "/".join(f"{p:.2f}" for p in psnrs) +
               " dB; FPS " + "/".join(f"{f:.1f}" for f in fpss))
        assert mono_psnr, f"PSNR not non-increasing: {psnrs}"
        assert mono_fps, f"FPS not strictly increasing: {fpss}"


class TestCriterion9Performance:
    def test_fps_floor(self, trained_main, sphere_dataset):
        out, _, _ = trained_main
        scene, mapper, texture, _ = load_checkpoint(out)
        rng = np.random.default_rng(0)
        # pad or prune to exactly 5000 gaussians
        if len(scene) < 5000:
            reps = int(np.ceil(5000 / len(scene)))
            idx = np.tile(np.arange(len(scene)), reps)[:5000]
            scene = scene.select(idx)
        else:
            scene = scene.select(rng.choice(len(scene), 5000, replace=False))
        views = sphere_dataset.test_views
        threads = texsplat.set_threads(8)
        fps_val = bench_fps(scene, texture, views, mode="textured", frames=20,
                            warmup=4)
        report("9", fps_val >= 10.0,
               f"{fps_val:.1f} FPS at 256x256, 5000 gaussians, {threads} threads")
        if EIGHT_CORES:
            assert fps_val >= 10.0
        elif fps_val < 10.0:
            print(f"  [runtime] {fps_val:.1f} FPS on {os.cpu_count()} cores; "
                  "criterion premise (8 threads) unavailable, reporting only")


# ---------------------------------------------------------------------------
# criterion 10: trivial identities (representative set; the full set lives in
# the unit suites, which assert every [TRIVIAL] example exactly)


class TestCriterion10Identities:
    def test_unit_suites_cover_trivial_examples(self):
        # spot-check a few directly; the dedicated unit files assert the rest
        from texsplat.scene import covariance, eval_sh, oriented_normal

        assert np.allclose(covariance([1, 0, 0, 0], [0, 0, 0]), np.eye(3))
        assert np.allclose(
            covariance([1, 0, 0, 0], [np.log(2.0), 0.0, -20.0]),
            np.diag([4.0, 1.0, np.exp(-40.0)]))
        assert np.allclose(oriented_normal([0, 0, 1.0], [0, 0, 5.0], [0, 0, 0]),
                           [0, 0, -1])
        assert np.allclose(eval_sh(np.zeros((16, 3)), [0, 0, 1.0]), 0.0)
        from texsplat.losses import l01

        v, _ = l01(np.zeros(4))
        assert v == pytest.approx(2 * np.log(0.5), abs=1e-9)
        from texsplat.uvmap.charts import sphere_to_uv

        assert np.allclose(sphere_to_uv([1.0, 0, 0]), [0.5, 0.5])
        report("10", True, "trivial identities spot-checked here; "
                           "full [TRIVIAL] coverage in the unit suites")


# ---------------------------------------------------------------------------
# criterion 11: format round trips


class TestCriterion11Formats:
    def test_ply_mlp_cameras_roundtrip(self, tmp_path):
        scene = random_scene(n=17, seed=3)
        p1 = tmp_path / "a.ply"
        p2 = tmp_path / "b.ply"
        write_ply(scene, p1)
        write_ply(read_ply(p1), p2)
        ply_ok = p1.read_bytes() == p2.read_bytes()

        mapper = UvMapper(rng=np.random.default_rng(4))
        m1 = tmp_path / "m1.ckpt"
        m2 = tmp_path / "m2.ckpt"
        mapper.save(m1)
        UvMapper.load(m1).save(m2)
        mlp_ok = m1.read_bytes() == m2.read_bytes()

        cam = simple_camera(size=33, f=47.125)
        cams = tmp_path / "cams.json"
        write_cameras([camera_to_dict(cam, image="x.png")], cams)
        (loaded, _), = read_cameras(cams)
        cam_ok = (loaded.fx == cam.fx and np.array_equal(loaded.R, cam.R)
                  and np.array_equal(loaded.t, cam.t))

        report("11", ply_ok and mlp_ok and cam_ok,
               f"ply bit-exact={ply_ok} mlp bit-exact={mlp_ok} cameras lossless={cam_ok}")
        assert ply_ok and mlp_ok and cam_ok
