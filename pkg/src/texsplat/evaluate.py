"""Evaluation: held-out metrics, texture round-trip PSNR, Taylor error, bench.

The texture round-trip oracle reprojects the ground-truth appearance into
the *learned* chart: for each learned texel, the inverse map gives a 3D
point, which is snapped onto the analytic surface and looked up in the GT
texture.  That makes texture PSNR well defined even though the learned
chart may be an arbitrary rotation/warp of the canonical one.
"""

from __future__ import annotations

import time

import numpy as np

from .intersect import GRAZING_EPS
from .io_formats.metrics import l1_metric, psnr
from .io_formats.synthetic import Dataset
from .render import PixelGrads, render_backward, render_forward, prepare_frame
from .render.common import ALPHA_SKIP, POWER_CUTOFF, mode_id
from .scene import GaussianSet
from .texture import Texture
from .uvmap.charts import wrap_u_delta


def surface_project(surface, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Snap points onto the analytic surface; returns (points, gt_uv)."""
    kind = surface.kind
    pts = np.atleast_2d(pts)
    if kind == "sphere":
        rel = pts - surface.center
        r = np.linalg.norm(rel, axis=-1, keepdims=True)
        p = rel / np.maximum(r, 1e-12)
        from .uvmap.charts import sphere_to_uv

        return surface.center + surface.radius * p, sphere_to_uv(p)
    if kind == "plane":
        rel = pts - surface.origin
        uu = np.clip(rel @ surface.eu / (surface.eu @ surface.eu), 0.0, 1.0)
        vv = np.clip(rel @ surface.ev / (surface.ev @ surface.ev), 0.0, 1.0)
        proj = surface.origin + uu[:, None] * surface.eu + vv[:, None] * surface.ev
        return proj, np.stack([uu * 0.999, vv], axis=-1)
    if kind == "two_sphere":
        d = np.stack([s.distance(pts) for s in surface.spheres], axis=-1)
        pick = np.argmin(d, axis=-1)
        out_p = np.zeros_like(pts)
        out_uv = np.zeros((len(pts), 2))
        for si, s in enumerate(surface.spheres):
            m = pick == si
            if m.any():
                p, uv = surface_project(s, pts[m])
                uv[:, 1] = 0.5 * uv[:, 1] + 0.5 * si
                out_p[m] = p
                out_uv[m] = uv
        return out_p, out_uv
    raise ValueError(f"unknown surface kind {kind!r}")


def eval_views(scene: GaussianSet, texture: Texture | None, views, mode: str) -> dict:
    """Mean PSNR / L1 over views (clamped colors), full-image and masked."""
    ps, ls, ps_m = [], [], []
    for view in views:
        out = render_forward(scene, view.camera, texture, mode=mode)
        img = out.clamped_color()
        gt = view.load_image()
        ps.append(psnr(img, gt))
        ls.append(l1_metric(img, gt))
        mask = view.load_mask()
        if mask is not None and mask.any():
            ps_m.append(psnr(img, gt, mask=np.broadcast_to(mask[..., None], gt.shape)))
    return {"psnr": float(np.mean(ps)), "l1": float(np.mean(ls)),
            "psnr_fg": float(np.mean(ps_m)) if ps_m else None}


def observed_texel_mask(scene: GaussianSet, texture: Texture, views,
                        mode: str = "textured", rel_threshold: float = 1e-3) -> np.ndarray:
    """Texels with non-negligible accumulated rendering weight over the views."""
    accum = np.zeros((texture.height, texture.width, 3))
    for view in views:
        out = render_forward(scene, view.camera, texture, mode=mode)
        ones = PixelGrads(color=np.ones_like(out.color))
        g = render_backward(scene, view.camera, texture, mode, ones, out,
                            want_geometry=False)
        accum += np.abs(g.texture)
    w = accum.sum(axis=-1)
    return w > rel_threshold * w.max()


def texture_roundtrip_psnr(mapper, texture: Texture, dataset: Dataset,
                           observed: np.ndarray | None = None) -> float:
    """PSNR of the learned texture against GT reprojected into the learned chart."""
    surface = dataset.surface()
    gt_tex = Texture(dataset.gt_texture())
    H, W = texture.height, texture.width
    us = (np.arange(W) + 0.5) / W
    vs = (np.arange(H) + 0.5) / H
    uu, vv = np.meshgrid(us, vs)
    uv = np.stack([uu, vv], axis=-1).reshape(-1, 2)
    pts = mapper.inverse_point(uv)
    _, gt_uv = surface_project(surface, pts)
    expected = gt_tex.sample_bilinear(gt_uv).reshape(H, W, 3)
    mask = observed if observed is not None else np.ones((H, W), dtype=bool)
    return psnr(np.clip(texture.data, 0, 1), expected,
                mask=np.broadcast_to(mask[..., None], expected.shape))


def taylor_uv_error(scene: GaussianSet, cam, mapper, weight_cut: float = 0.05) -> float:
    """Weighted mean wrap-aware UV error of the Taylor lookup vs the exact map.

    Walks every retained Gaussian like the reference renderer, computes the
    clamped ray intersections for pixels where the Gaussian contributes more
    than ``weight_cut`` of opacity-weighted footprint, and compares the
    first-order UV against the exact forward map at the intersection.
    """
    prep = prepare_frame(scene, cam, mode_id("textured"))
    dirs = cam.ray_dirs()
    origin = cam.origin
    px = np.arange(cam.width) + 0.5
    py = np.arange(cam.height) + 0.5
    gx, gy = np.meshgrid(px, py)

    errs = []
    weights = []
    for g in range(len(prep.proj.indices)):
        dx = gx - prep.proj.mean2d[g, 0]
        dy = gy - prep.proj.mean2d[g, 1]
        a, b, c = prep.conic_packed[g]
        power = 0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        alpha = np.minimum(prep.opacity[g] * np.exp(-np.minimum(power, 80.0)), 0.99)
        sel = (power <= POWER_CUTOFF) & (alpha >= max(ALPHA_SKIP, weight_cut))
        if not sel.any():
            continue
        n = prep.normals[g]
        mu = prep.mu[g]
        d = dirs[sel]
        dn = d @ n
        ok = np.abs(dn) >= GRAZING_EPS
        if not ok.any():
            continue
        d = d[ok]
        dn = dn[ok]
        tau = ((mu - origin) @ n) / dn
        hit = origin + tau[:, None] * d
        local = (hit - mu) @ prep.rot[g]
        local = np.clip(local, -prep.bound[g], prep.bound[g])
        offset = local @ prep.rot[g].T

        uv_t = prep.uv_mu[g] + offset @ prep.jac_mu[g].T
        uv_t[:, 0] %= 1.0
        uv_t[:, 1] = np.clip(uv_t[:, 1], 0.0, 1.0)
        uv_e = mapper.forward_uv(mu + offset)
        du = wrap_u_delta(uv_t[:, 0] - uv_e[:, 0])
        dv = uv_t[:, 1] - uv_e[:, 1]
        err = np.sqrt(du * du + dv * dv)
        w = alpha[sel][ok]
        errs.append((err * w).sum())
        weights.append(w.sum())
    if not weights:
        return 0.0
    return float(np.sum(errs) / np.sum(weights))


def prune_by_opacity(scene: GaussianSet, fraction: float) -> GaussianSet:
    """Keep the top ``fraction`` of Gaussians ranked by opacity."""
    k = max(1, int(round(len(scene) * fraction)))
    order = np.argsort(-scene.opacities, kind="stable")
    return scene.select(np.sort(order[:k]))


def bench_fps(scene: GaussianSet, texture: Texture | None, cams, mode: str = "textured",
              frames: int = 12, warmup: int = 3) -> float:
    for i in range(warmup):
        render_forward(scene, cams[i % len(cams)].camera, texture, mode=mode)
    t0 = time.perf_counter()
    for i in range(frames):
        render_forward(scene, cams[i % len(cams)].camera, texture, mode=mode)
    return frames / (time.perf_counter() - t0)


def bench_scaling(scene: GaussianSet, texture: Texture | None, dataset: Dataset,
                  fractions=(1.0, 0.5, 0.2, 0.05), mode: str = "textured",
                  frames: int = 12) -> list[dict]:
    """FPS and held-out PSNR for opacity-ranked pruning fractions."""
    test = dataset.test_views or dataset.train_views
    rows = []
    for frac in fractions:
        sub = prune_by_opacity(scene, frac)
        fps_val = bench_fps(sub, texture, test, mode=mode, frames=frames)
        metrics = eval_views(sub, texture, test, mode=mode)
        rows.append({"fraction": frac, "n_gaussians": len(sub),
                     "fps": fps_val, **metrics})
    return rows
