"""Three-stage reconstruction pipeline.

Stage 1 fits vanilla-mode Gaussians with the photometric + regularization
loss, pruning semi-transparent Gaussians and pinning the shortest scale
axis to ``e^-20`` on a fixed cadence.  Stage 2 freezes the scene, renders
depth maps, and fits the UV mapping pair on back-projected surface points.
Stage 3 freezes the UV MLP, reconstructs the texture (texture-only phase,
then joint), refreshing the per-Gaussian UV cache whenever centers move.
Structural edits (prune/flatten) stay off in stage 3 so the cache and the
optimizer state remain coherent.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .config import TrainConfig, resolved_json, save_config
from .io_formats import texio
from .io_formats.ply import read_ply, write_ply
from .io_formats.synthetic import Dataset, load_dataset
from .losses import smoothness_weights, total_loss
from .optim import Adam
from .render import PixelGrads, render_backward, render_forward
from .scene import GaussianSet, normalize_quats
from .texture import Texture
from .uvmap.mlp import UvMapper
from .uvmap.samples import SurfaceSamples, backproject_depth, fps
from .uvmap.train import TrainingDiverged, UvTrainer

PARAM_NAMES = ("positions", "quats", "log_scales", "opacity_logits", "sh")


class TrainingAborted(RuntimeError):
    pass


def rotation_from_normals(normals: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Quaternions whose third column is the given normal, random in-plane spin."""
    n = np.asarray(normals, dtype=np.float64)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    a = np.where(np.abs(n[:, 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    u = np.cross(a, n)
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v = np.cross(n, u)
    spin = rng.uniform(0.0, 2.0 * np.pi, len(n))
    cu, su = np.cos(spin)[:, None], np.sin(spin)[:, None]
    e0 = cu * u + su * v
    e1 = -su * u + cu * v
    R = np.stack([e0, e1, n], axis=-1)  # columns
    return rotmat_to_quat(R)


def rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Batched rotation-matrix to quaternion (w, x, y, z)."""
    R = np.asarray(R, dtype=np.float64)
    m00, m11, m22 = R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]
    q = np.empty((len(R), 4))
    t = m00 + m11 + m22
    # branch on the largest diagonal term for stability
    c0 = t > 0
    s = np.sqrt(np.maximum(t + 1.0, 1e-12)) * 2.0
    q[c0, 0] = 0.25 * s[c0]
    q[c0, 1] = (R[c0, 2, 1] - R[c0, 1, 2]) / s[c0]
    q[c0, 2] = (R[c0, 0, 2] - R[c0, 2, 0]) / s[c0]
    q[c0, 3] = (R[c0, 1, 0] - R[c0, 0, 1]) / s[c0]
    for i in np.nonzero(~c0)[0]:
        m = R[i]
        if m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s_ = np.sqrt(max(1.0 + m[0, 0] - m[1, 1] - m[2, 2], 1e-12)) * 2.0
            q[i] = [(m[2, 1] - m[1, 2]) / s_, 0.25 * s_,
                    (m[0, 1] + m[1, 0]) / s_, (m[0, 2] + m[2, 0]) / s_]
        elif m[1, 1] > m[2, 2]:
            s_ = np.sqrt(max(1.0 + m[1, 1] - m[0, 0] - m[2, 2], 1e-12)) * 2.0
            q[i] = [(m[0, 2] - m[2, 0]) / s_, (m[0, 1] + m[1, 0]) / s_,
                    0.25 * s_, (m[1, 2] + m[2, 1]) / s_]
        else:
            s_ = np.sqrt(max(1.0 + m[2, 2] - m[0, 0] - m[1, 1], 1e-12)) * 2.0
            q[i] = [(m[1, 0] - m[0, 1]) / s_, (m[0, 2] + m[2, 0]) / s_,
                    (m[1, 2] + m[2, 1]) / s_, 0.25 * s_]
    return normalize_quats(q)


def init_scene(dataset: Dataset, cfg: TrainConfig) -> GaussianSet:
    """Initialize Gaussians from the dataset's surface samples (SfM stand-in)."""
    pts, cols, nrms = dataset.points()
    rng = np.random.default_rng(cfg.seed)
    n = min(cfg.n_init_gaussians, len(pts))
    idx = rng.choice(len(pts), size=n, replace=False)
    pts, cols, nrms = pts[idx], cols[idx], nrms[idx]

    tree = cKDTree(pts)
    d, _ = tree.query(pts, k=4, workers=-1)
    mean_nn = np.maximum(d[:, 1:].mean(axis=1), 1e-6)

    quats = rotation_from_normals(nrms, rng)
    log_scales = np.stack([np.log(mean_nn * 0.8), np.log(mean_nn * 0.8),
                           np.log(mean_nn * 0.1)], axis=-1)
    logit = float(np.log(cfg.init_opacity / (1.0 - cfg.init_opacity)))
    sh = np.zeros((n, 16, 3))
    sh[:, 0, :] = (np.clip(cols, 0.0, 1.0) - 0.5) / 0.28209479177387814

    return GaussianSet(pts, quats, log_scales, np.full(n, logit), sh)


class Trainer:
    def __init__(self, dataset: Dataset, cfg: TrainConfig, out_dir,
                 mode: str = "textured", log=print):
        self.dataset = dataset
        self.cfg = cfg
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.log = log
        self.mode = mode  # color mode used in stage 3 (textured or prefetch)
        self.rng = np.random.default_rng(cfg.seed)
        self.scene: GaussianSet | None = None
        self.mapper: UvMapper | None = None
        self.texture: Texture | None = None
        self.history: dict[str, list[float]] = {"stage1": [], "stage3": []}

    # ------------------------------------------------------------------ helpers

    def _train_views(self):
        if not hasattr(self, "_view_cache"):
            cache = []
            for view in self.dataset.train_views:
                img = view.load_image()
                cache.append({
                    "camera": view.camera,
                    "image": img,
                    "mask": view.load_mask(),
                    "normal": view.load_normal(),
                    "sweights": smoothness_weights(img, self.cfg.loss.gamma),
                })
            self._view_cache = cache
        return self._view_cache

    def _gauss_params(self) -> dict[str, np.ndarray]:
        s = self.scene
        return {"positions": s._positions, "quats": s.quats,
                "log_scales": s.log_scales, "opacity_logits": s.opacity_logits,
                "sh": s.sh}

    def _gauss_lrs(self) -> dict[str, float]:
        c = self.cfg
        return {"positions": c.lr_position * self.dataset.scale,
                "quats": c.lr_quat, "log_scales": c.lr_scale,
                "opacity_logits": c.lr_opacity, "sh": c.lr_sh}

    # ------------------------------------------------------------------ stage 1

    def stage1(self, iters: int | None = None) -> GaussianSet:
        cfg = self.cfg
        iters = cfg.stage1_iters if iters is None else iters
        if self.scene is None:
            self.scene = init_scene(self.dataset, cfg)
        scene = self.scene
        opt = Adam(self._gauss_params(), self._gauss_lrs())
        views = self._train_views()
        t0 = time.time()

        for it in range(1, iters + 1):
            view = views[int(self.rng.integers(len(views)))]
            out = render_forward(scene, view["camera"], mode="vanilla")
            include_reg = it > cfg.reg_start
            value, parts, pix, d_logits = total_loss(
                out, view["image"], view["mask"],
                view["normal"] if include_reg else None,
                scene.opacity_logits, cfg.loss,
                include_reg=include_reg, include_nosh=False,
                smooth_weights=view["sweights"])
            if not np.isfinite(value):
                raise TrainingAborted(f"stage 1 loss became non-finite at iter {it}")
            g = render_backward(scene, view["camera"], None, "vanilla", pix, out)
            opt.step({"positions": g.positions, "quats": g.quats,
                      "log_scales": g.log_scales,
                      "opacity_logits": g.opacity_logits + d_logits, "sh": g.sh})
            scene.quats[...] = normalize_quats(scene.quats)
            scene.uv_fresh = False
            self.history["stage1"].append(value)

            if cfg.flatten_every and it % cfg.flatten_every == 0:
                self._flatten(opt)
            if cfg.prune_every and it % cfg.prune_every == 0:
                opt = self._prune(opt)
                scene = self.scene
            if it % 500 == 0 or it == iters:
                self.log(f"stage1 {it:6d}/{iters}  loss {value:.4f}  "
                         f"N {len(scene)}  [{time.time() - t0:.0f}s]")
        return scene

    def _flatten(self, opt: Adam) -> None:
        scene = self.scene
        k = np.argmin(scene.log_scales, axis=1)
        rows = np.arange(len(scene))
        scene.log_scales[rows, k] = self.cfg.flatten_value
        mask = np.zeros_like(scene.log_scales, dtype=bool)
        mask[rows, k] = True
        opt.zero_state_where("log_scales", mask)

    def _prune(self, opt: Adam) -> Adam:
        scene = self.scene
        keep = scene.opacities >= self.cfg.prune_threshold
        if not keep.any():
            raise TrainingAborted("pruning removed every Gaussian; "
                                  "check opacity regularization weights")
        if keep.all():
            return opt
        self.scene = scene.select(keep)
        new_opt = Adam(self._gauss_params(), self._gauss_lrs())
        for name in PARAM_NAMES:
            new_opt.m[name] = opt.m[name][keep]
            new_opt.v[name] = opt.v[name][keep]
        new_opt.t = opt.t
        self.log(f"  pruned to {len(self.scene)} Gaussians")
        return new_opt

    # ------------------------------------------------------------------ stage 2

    def build_surface_samples(self) -> SurfaceSamples:
        cfg = self.cfg
        pools = []
        for view in self._train_views():
            out = render_forward(self.scene, view["camera"], mode="vanilla")
            pts = backproject_depth(out.depth, view["camera"], out.alpha)
            pools.append(pts)
        pool = np.concatenate(pools, axis=0)
        if len(pool) == 0:
            raise TrainingAborted("no surface points: depth maps are empty")
        k = min(cfg.uv.n_pseudo, len(self.scene))
        pseudo = fps(np.asarray(self.scene.positions), k)
        return SurfaceSamples(surface_points=pool, pseudo_gt=pseudo,
                              bbox_center=self.dataset.center,
                              bbox_scale=self.dataset.scale * 1.2)

    def stage2(self, steps: int | None = None) -> UvMapper:
        if self.scene is None:
            raise TrainingAborted("stage 2 requires a stage-1 scene")
        samples = self.build_surface_samples()
        self.mapper = UvMapper(rng=np.random.default_rng(self.cfg.uv.seed))
        trainer = UvTrainer(self.mapper, samples, self.cfg.uv)
        n = steps if steps is not None else self.cfg.uv.steps
        log_every = max(n // 10, 1)
        trainer.run(steps=n, log_every=log_every, log=self.log)
        self.mapper.cache_scene_uv(self.scene)
        return self.mapper

    # ------------------------------------------------------------------ stage 3

    def stage3(self, texture_iters: int | None = None, joint_iters: int | None = None) -> Texture:
        cfg = self.cfg
        if self.scene is None or self.mapper is None:
            raise TrainingAborted("stage 3 requires stages 1-2 (scene + UV mapper)")
        scene = self.scene
        if self.texture is None:
            self.texture = Texture.constant(0.5, cfg.texture_height, cfg.texture_width)
            # stage-1 SH encoded absolute vanilla colors; the hybrid color
            # treats SH as a zero-rest residual on top of the texture, so the
            # appearance restarts in the texture
            scene.sh[...] = 0.0
        texture = self.texture
        self.mapper.cache_scene_uv(scene)
        views = self._train_views()

        tex_iters = cfg.stage3_texture_only if texture_iters is None else texture_iters
        joint = cfg.stage3_joint if joint_iters is None else joint_iters

        tex_opt = Adam({"texture": texture.data}, {"texture": cfg.lr_texture})
        gauss_opt = Adam(self._gauss_params(), self._gauss_lrs())
        t0 = time.time()

        for it in range(1, tex_iters + joint + 1):
            joint_phase = it > tex_iters
            view = views[int(self.rng.integers(len(views)))]
            out = render_forward(scene, view["camera"], texture, mode=self.mode)
            value, parts, pix, d_logits = total_loss(
                out, view["image"], view["mask"], view["normal"],
                scene.opacity_logits, cfg.loss, include_reg=True, include_nosh=True,
                smooth_weights=view["sweights"])
            if not np.isfinite(value):
                self.save_checkpoint()
                raise TrainingAborted(
                    f"stage 3 loss became non-finite at iter {it}; "
                    f"last checkpoint in {self.out}")
            g = render_backward(scene, view["camera"], texture, self.mode, pix, out,
                                want_geometry=joint_phase)
            tex_opt.step({"texture": g.texture})
            np.clip(texture.data, 0.0, 1.0, out=texture.data)
            if joint_phase:
                gauss_opt.step({"positions": g.positions, "quats": g.quats,
                                "log_scales": g.log_scales,
                                "opacity_logits": g.opacity_logits + d_logits,
                                "sh": g.sh})
                scene.quats[...] = normalize_quats(scene.quats)
                scene.uv_fresh = False
                self.mapper.cache_scene_uv(scene)
            self.history["stage3"].append(value)
            if it % 500 == 0 or it == tex_iters + joint:
                phase = "joint" if joint_phase else "tex"
                self.log(f"stage3[{phase}] {it:6d}/{tex_iters + joint}  "
                         f"loss {value:.4f}  [{time.time() - t0:.0f}s]")
        return texture

    # ------------------------------------------------------------------ persistence

    def save_checkpoint(self) -> Path:
        out = self.out
        if self.scene is not None:
            write_ply(self.scene, out / "scene.ply")
        if self.texture is not None:
            texio.save_texture_blob(self.texture.data, out / "texture.texf")
            texio.save_png(self.texture.data, out / "texture.png")
        if self.mapper is not None:
            self.mapper.save(out / "uvmap.ckpt")
        state = {
            "dataset": str(self.dataset.root),
            "mode": self.mode,
            "center": np.asarray(self.dataset.center).tolist(),
            "scale": float(self.dataset.scale),
            "n_gaussians": len(self.scene) if self.scene is not None else 0,
        }
        (out / "state.json").write_text(json.dumps(state, indent=1, sort_keys=True) + "\n")
        save_config(self.cfg, out / "config.json")
        return out


def load_checkpoint(path, need_mapper: bool = True):
    """Load (scene, mapper, texture, state) from a checkpoint directory."""
    path = Path(path)
    scene = read_ply(path / "scene.ply")
    state = json.loads((path / "state.json").read_text())
    mapper = None
    if (path / "uvmap.ckpt").exists():
        mapper = UvMapper.load(path / "uvmap.ckpt")
        mapper.cache_scene_uv(scene)
    elif need_mapper:
        raise FileNotFoundError(f"{path}: missing uvmap.ckpt")
    texture = None
    if (path / "texture.texf").exists():
        texture = Texture(texio.load_texture_blob(path / "texture.texf"))
    return scene, mapper, texture, state
