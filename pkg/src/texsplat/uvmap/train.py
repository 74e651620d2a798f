"""Stage-2 trainer: fit the UV mapping pair to the recovered surface.

Each step minimizes ``L_cycle3d + L_chamfer + L_cycle2d`` on a fresh batch:
a minibatch of back-projected surface points (the pool is redrawn every
``epoch_steps`` steps) plus freshly sampled area-uniform UVs.  Forward and
backward passes run fused in float32 through both networks; the gradients
flow through the chart into the grid encoding with pole-safe clamping.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..config import UvTrainConfig
from ..optim import Adam
from .charts import chart_jacobian, sphere_to_uv, uv_to_sphere
from .mlp import UvMapper, sphere_head, sphere_head_vjp
from .samples import SurfaceSamples, sample_sphere_uniform


class TrainingDiverged(RuntimeError):
    pass


class UvTrainer:
    def __init__(self, mapper: UvMapper, samples: SurfaceSamples, cfg: UvTrainConfig):
        self.mapper = mapper
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.pool_source = np.asarray(samples.surface_points, dtype=np.float64)
        self.pseudo_gt = np.asarray(samples.pseudo_gt, dtype=np.float64)
        self.gt_tree = cKDTree(self.pseudo_gt)

        mapper.set_normalization(samples.bbox_center, samples.bbox_scale)

        params = {}
        lrs = {}
        for tag, mlp in (("fwd", mapper.fwd), ("inv", mapper.inv)):
            for i, (W, b) in enumerate(zip(mlp.Ws, mlp.bs)):
                params[f"{tag}.W{i}"] = W
                params[f"{tag}.b{i}"] = b
                lrs[f"{tag}.W{i}"] = cfg.lr
                lrs[f"{tag}.b{i}"] = cfg.lr
        for i, plane in enumerate(mapper.grid.planes):
            params[f"grid.{i}"] = plane
            lrs[f"grid.{i}"] = cfg.lr
        self.opt = Adam(params, lrs)
        self._pool = None
        self.history: list[float] = []

    def _draw_pool(self):
        n = min(self.cfg.n_depth_pool, len(self.pool_source))
        idx = self.rng.choice(len(self.pool_source), size=n, replace=False)
        self._pool = self.pool_source[idx]

    def step(self) -> dict:
        cfg = self.cfg
        if self._pool is None or (len(self.history) % cfg.epoch_steps) == 0:
            self._draw_pool()
        m = self.mapper
        scale = m.scale

        bx = self._pool[self.rng.choice(len(self._pool),
                                        size=min(cfg.batch_points, len(self._pool)),
                                        replace=False)]
        U = sample_sphere_uniform(cfg.n_uv, self.rng)

        grads = {k: None for k in self.opt.params}

        def acc(mlp_tag, glist):
            for i, g in enumerate(glist):
                name = f"{mlp_tag}.{'W' if i % 2 == 0 else 'b'}{i // 2}"
                grads[name] = g if grads[name] is None else grads[name] + g

        plane_grads = [np.zeros_like(p, dtype=np.float64) for p in m.grid.planes]

        # ---- inverse branch on sampled UVs: chamfer + 2D cycle -----------------
        pU = uv_to_sphere(U).astype(np.float32)
        encU, enc_ctxU = m.grid.forward_fast(U)
        xinU = np.concatenate([pU, encU], axis=-1)
        outU, ictxU = m.inv.forward(xinU, want_ctx=True)
        xw = m.denormalize_points(outU)

        d1, j1 = self.gt_tree.query(xw, workers=-1)
        tree2 = cKDTree(xw)
        d2, i2 = tree2.query(self.pseudo_gt, workers=-1)
        l_cd = d1.mean() + d2.mean()

        g_xw = np.zeros_like(xw)
        diff1 = xw - self.pseudo_gt[j1]
        g_xw += diff1 / (np.maximum(d1, 1e-12)[:, None] * len(xw))
        diff2 = xw[i2] - self.pseudo_gt
        np.add.at(g_xw, i2, diff2 / (np.maximum(d2, 1e-12)[:, None] * len(self.pseudo_gt)))

        y2, fctx2 = m.fwd.forward(outU, want_ctx=True)
        p2 = sphere_head(y2)
        chord = p2 - pU
        cn = np.linalg.norm(chord, axis=-1)
        l_c2d = float(cn.mean())
        g_p2 = chord / (np.maximum(cn, 1e-12)[:, None] * len(chord))
        g_y2 = sphere_head_vjp(y2, g_p2)
        g_outU_c2d, fgrads2 = m.fwd.backward(fctx2, g_y2.astype(np.float32))
        acc("fwd", fgrads2)

        g_outU = (g_xw @ m.pre_rotation.T * scale + g_outU_c2d).astype(np.float32)
        g_xinU, igradsU = m.inv.backward(ictxU, g_outU)
        acc("inv", igradsU)
        m.grid.backward_fast(enc_ctxU, g_xinU[:, 3:], plane_grads)

        # ---- forward branch on surface points: 3D cycle ------------------------
        xn = m.normalize_points(bx).astype(np.float32)
        y1, fctx1 = m.fwd.forward(xn, want_ctx=True)
        p1 = sphere_head(y1)
        uv1 = sphere_to_uv(p1)
        enc1, enc_ctx1 = m.grid.forward_fast(uv1)
        xin1 = np.concatenate([p1.astype(np.float32), enc1], axis=-1)
        out1, ictx1 = m.inv.forward(xin1, want_ctx=True)
        res = out1 - xn
        rn = np.linalg.norm(res, axis=-1)
        l_c3d = float(rn.mean()) * scale
        g_out1 = (res / (np.maximum(rn, 1e-12)[:, None] * len(res))) * scale

        g_xin1, igrads1 = m.inv.backward(ictx1, g_out1.astype(np.float32))
        acc("inv", igrads1)
        g_uv1, _ = m.grid.backward_fast(enc_ctx1, g_xin1[:, 3:], plane_grads)
        Jc, _ = chart_jacobian(p1)
        g_p1 = g_xin1[:, :3].astype(np.float64)
        g_p1 += np.einsum("bji,bj->bi", Jc, g_uv1)
        g_y1 = sphere_head_vjp(y1, g_p1)
        _, fgrads1 = m.fwd.backward(fctx1, g_y1.astype(np.float32))
        acc("fwd", fgrads1)

        for i, pg in enumerate(plane_grads):
            grads[f"grid.{i}"] = pg

        total = l_c3d + l_cd + l_c2d
        if not np.isfinite(total):
            raise TrainingDiverged(
                f"UV loss became non-finite at step {len(self.history)}: "
                f"cycle3d={l_c3d} chamfer={l_cd} cycle2d={l_c2d}")
        self.opt.step(grads)
        self.history.append(total)
        return {"total": total, "cycle3d": l_c3d, "chamfer": float(l_cd), "cycle2d": l_c2d}

    def run(self, steps: int | None = None, log_every: int = 0, log=print) -> dict:
        steps = steps if steps is not None else self.cfg.steps
        last = {}
        base_lr = dict(self.opt.lrs)
        for i in range(steps):
            # cosine decay to lr/20 sharpens the final cycle errors
            fac = 0.05 + 0.95 * 0.5 * (1.0 + np.cos(np.pi * i / max(steps - 1, 1)))
            for k in self.opt.lrs:
                self.opt.lrs[k] = base_lr[k] * fac
            last = self.step()
            if log_every and (i % log_every == 0 or i == steps - 1):
                log(f"uv step {i:6d}  total {last['total']:.5f}  "
                    f"c3d {last['cycle3d']:.5f}  cd {last['chamfer']:.5f}  "
                    f"c2d {last['cycle2d']:.5f}")
        for k in self.opt.lrs:
            self.opt.lrs[k] = base_lr[k]
        return last


def train_uv(mapper: UvMapper, samples: SurfaceSamples, cfg: UvTrainConfig,
             log_every: int = 0) -> dict:
    """Fit the mapper pair on surface samples; returns the final loss parts."""
    trainer = UvTrainer(mapper, samples, cfg)
    return trainer.run(log_every=log_every)
