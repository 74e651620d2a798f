"""Ray-traced synthetic datasets: the independent oracle for training runs.

Surfaces are analytic (sphere, plane, two spheres), textured through the
same equirectangular convention the renderer uses, and rendered by ray
tracing rather than splatting, so dataset images never share code with the
rasterizer under test.  Each dataset ships GT masks, analytic normal
maps, the GT texture and surface point samples (the SfM stand-in).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..scene import Camera
from ..uvmap.charts import sphere_to_uv, uv_to_sphere
from ..texture import Texture
from . import texio
from .cameras import camera_from_dict, camera_to_dict, read_cameras, write_cameras


# ---------------------------------------------------------------------------
# analytic surfaces

class SphereSurface:
    kind = "sphere"

    def __init__(self, center=(0.0, 0.0, 0.0), radius: float = 1.0):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def params(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}

    def intersect(self, origins, dirs):
        oc = origins - self.center
        b = np.sum(oc * dirs, axis=-1)
        c = np.sum(oc * oc, axis=-1) - self.radius ** 2
        disc = b * b - c
        hit = disc >= 0.0
        t = -b - np.sqrt(np.where(hit, disc, 0.0))
        hit &= t > 1e-6
        pts = origins + t[..., None] * dirs
        normals = (pts - self.center) / self.radius
        uv = sphere_to_uv(normals)
        return hit, np.where(hit[..., None], pts, 0.0), normals, uv

    def sample_points(self, n: int, rng: np.random.Generator):
        u = rng.random(n)
        v = np.arccos(1.0 - 2.0 * rng.random(n)) / np.pi
        p = uv_to_sphere(np.stack([u, v], axis=-1))
        return self.center + self.radius * p, p, np.stack([u, v], axis=-1)

    def distance(self, pts) -> np.ndarray:
        return np.abs(np.linalg.norm(pts - self.center, axis=-1) - self.radius)


class PlaneSurface:
    """Square patch spanned by two edge vectors; UV are patch coordinates."""

    kind = "plane"

    def __init__(self, origin=(-1.0, -1.0, 0.0), eu=(2.0, 0.0, 0.0), ev=(0.0, 2.0, 0.0)):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.eu = np.asarray(eu, dtype=np.float64)
        self.ev = np.asarray(ev, dtype=np.float64)
        n = np.cross(self.eu, self.ev)
        self.normal = n / np.linalg.norm(n)

    def params(self) -> dict:
        return {"origin": self.origin.tolist(), "eu": self.eu.tolist(), "ev": self.ev.tolist()}

    def intersect(self, origins, dirs):
        dn = dirs @ self.normal
        safe = np.abs(dn) > 1e-9
        t = ((self.origin - origins) @ self.normal) / np.where(safe, dn, 1.0)
        pts = origins + t[..., None] * dirs
        rel = pts - self.origin
        uu = rel @ self.eu / (self.eu @ self.eu)
        vv = rel @ self.ev / (self.ev @ self.ev)
        hit = safe & (t > 1e-6) & (uu >= 0) & (uu <= 1) & (vv >= 0) & (vv <= 1)
        normals = np.broadcast_to(self.normal, pts.shape).copy()
        uv = np.stack([np.clip(uu, 0, 1) * 0.999, np.clip(vv, 0, 1)], axis=-1)
        return hit, np.where(hit[..., None], pts, 0.0), normals, uv

    def sample_points(self, n: int, rng: np.random.Generator):
        uu = rng.random(n)
        vv = rng.random(n)
        pts = self.origin + uu[:, None] * self.eu + vv[:, None] * self.ev
        normals = np.broadcast_to(self.normal, pts.shape).copy()
        return pts, normals, np.stack([uu * 0.999, vv], axis=-1)

    def distance(self, pts) -> np.ndarray:
        return np.abs((pts - self.origin) @ self.normal)


class TwoSphereSurface:
    """Two disjoint spheres; each owns half the v range of the texture."""

    kind = "two_sphere"

    def __init__(self, centers=((-1.2, 0.0, 0.0), (1.2, 0.0, 0.0)), radius: float = 0.8):
        self.spheres = [SphereSurface(c, radius) for c in centers]

    def params(self) -> dict:
        return {"centers": [s.center.tolist() for s in self.spheres],
                "radius": self.spheres[0].radius}

    def intersect(self, origins, dirs):
        best_t = np.full(origins.shape[:-1], np.inf)
        hit = np.zeros(origins.shape[:-1], dtype=bool)
        pts = np.zeros(origins.shape)
        normals = np.zeros(origins.shape)
        uv = np.zeros(origins.shape[:-1] + (2,))
        for si, s in enumerate(self.spheres):
            h, p, nrm, u = s.intersect(origins, dirs)
            oc = p - origins
            t = np.where(h, np.linalg.norm(oc, axis=-1), np.inf)
            closer = h & (t < best_t)
            best_t = np.where(closer, t, best_t)
            hit |= closer
            pts = np.where(closer[..., None], p, pts)
            normals = np.where(closer[..., None], nrm, normals)
            u = u.copy()
            u[..., 1] = 0.5 * u[..., 1] + 0.5 * si
            uv = np.where(closer[..., None], u, uv)
        return hit, pts, normals, uv

    def sample_points(self, n: int, rng: np.random.Generator):
        half = n // 2
        out_p, out_n, out_uv = [], [], []
        for si, s in enumerate(self.spheres):
            k = half if si == 0 else n - half
            p, nrm, uv = s.sample_points(k, rng)
            uv = uv.copy()
            uv[:, 1] = 0.5 * uv[:, 1] + 0.5 * si
            out_p.append(p)
            out_n.append(nrm)
            out_uv.append(uv)
        return np.concatenate(out_p), np.concatenate(out_n), np.concatenate(out_uv)

    def distance(self, pts) -> np.ndarray:
        return np.minimum(*(s.distance(pts) for s in self.spheres))


SURFACES = {"sphere": SphereSurface, "plane": PlaneSurface, "two_sphere": TwoSphereSurface}


def surface_from_meta(meta: dict):
    kind = meta["kind"]
    if kind == "two_sphere":
        return TwoSphereSurface(centers=meta["params"]["centers"], radius=meta["params"]["radius"])
    return SURFACES[kind](**meta["params"])


# ---------------------------------------------------------------------------
# dataset container

@dataclass
class View:
    camera: Camera
    image_path: Path
    mask_path: Path | None
    normal_path: Path | None
    split: str = "train"

    def load_image(self) -> np.ndarray:
        return texio.load_png(self.image_path)

    def load_mask(self) -> np.ndarray | None:
        return texio.load_mask_png(self.mask_path) if self.mask_path else None

    def load_normal(self) -> np.ndarray | None:
        return np.load(self.normal_path) if self.normal_path else None


@dataclass
class Dataset:
    root: Path
    views: list[View]
    center: np.ndarray
    scale: float
    meta: dict = field(default_factory=dict)

    @property
    def train_views(self) -> list[View]:
        return [v for v in self.views if v.split == "train"]

    @property
    def test_views(self) -> list[View]:
        return [v for v in self.views if v.split == "test"]

    def surface(self):
        return surface_from_meta(self.meta["surface"]) if "surface" in self.meta else None

    def gt_texture(self) -> np.ndarray | None:
        p = self.root / "gt_texture.texf"
        return texio.load_texture_blob(p) if p.exists() else None

    def points(self):
        pts = np.load(self.root / "points.npy")
        cols = np.load(self.root / "point_colors.npy")
        nrms = np.load(self.root / "point_normals.npy")
        return pts, cols, nrms


def load_dataset(root) -> Dataset:
    root = Path(root)
    meta = json.loads((root / "meta.json").read_text())
    entries = read_cameras(root / "cameras.json")
    views = []
    for cam, info in entries:
        img = root / info["image"]
        if not img.exists():
            raise FileNotFoundError(f"dataset image missing: {img}")
        views.append(View(
            camera=cam, image_path=img,
            mask_path=root / info["mask"] if info.get("mask") else None,
            normal_path=root / info["normal"] if info.get("normal") else None,
            split=info.get("split", "train")))
    return Dataset(root=root, views=views, center=np.asarray(meta["center"]),
                   scale=float(meta["scale"]), meta=meta)


# ---------------------------------------------------------------------------
# generation

def _look_at(eye: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    z = target - eye
    z = z / np.linalg.norm(z)
    up = np.asarray(up, dtype=np.float64)
    if abs(np.dot(up, z)) > 0.98:
        up = np.array([1.0, 0.0, 0.0])
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    return R, -R @ eye


def _fibonacci_dirs(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + 5 ** 0.5) * i
    return np.stack([np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta),
                     np.cos(phi)], axis=-1)


def _shading_field(height: int, width: int) -> np.ndarray:
    """Smooth baked ambient-occlusion-like field over the texture domain."""
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    s = 0.55 + 0.45 * np.sin(np.pi * vv) * (0.6 + 0.4 * np.cos(4.0 * np.pi * uu))
    return np.clip(s, 0.0, 1.0)


def checkerboard(height: int = 256, width: int = 512, tiles_u: int = 8, tiles_v: int = 4,
                 color_a=(0.82, 0.78, 0.22), color_b=(0.16, 0.28, 0.75)) -> np.ndarray:
    u = ((np.arange(width) + 0.5) / width * tiles_u).astype(int)
    v = ((np.arange(height) + 0.5) / height * tiles_v).astype(int)
    uu, vv = np.meshgrid(u, v)
    par = (uu + vv) % 2
    out = np.where(par[..., None] == 0, np.asarray(color_a), np.asarray(color_b))
    return out.astype(np.float32)


def make_synthetic_dataset(kind: str, texture_image: np.ndarray, n_views: int,
                           resolution: int, seed: int, out_dir,
                           n_test: int = 4, view_radius: float = 3.0,
                           fov_deg: float = 50.0, n_points: int = 20000,
                           shading: str = "none") -> Dataset:
    """Ray-trace a textured analytic surface from cameras on a view sphere."""
    if n_views < 4:
        raise ValueError("need at least 4 views")
    if kind not in SURFACES:
        raise ValueError(f"unknown surface kind {kind!r}")
    rng = np.random.default_rng(seed)
    surface = SURFACES[kind]()

    tex_data = np.asarray(texture_image, dtype=np.float32)
    if shading == "baked":
        tex_data = (tex_data * _shading_field(*tex_data.shape[:2])[..., None]).astype(np.float32)
    elif shading != "none":
        raise ValueError(f"unknown shading mode {shading!r}")
    texture = Texture(tex_data)

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    (out / "normals").mkdir(exist_ok=True)

    total = n_views + n_test
    dirs = _fibonacci_dirs(total)
    order = rng.permutation(total)
    f = 0.5 * resolution / np.tan(np.radians(fov_deg) / 2.0)

    center = np.zeros(3)
    entries = []
    views = []
    for i in range(total):
        eye = center + view_radius * dirs[order[i]]
        R, t = _look_at(eye, center)
        cam = Camera(fx=f, fy=f, cx=resolution / 2.0, cy=resolution / 2.0,
                     width=resolution, height=resolution, R=R, t=t)
        ray_d = cam.ray_dirs()
        origins = np.broadcast_to(cam.origin, ray_d.shape)
        hit, pts, normals, uv = surface.intersect(origins, ray_d)
        rgb = texture.sample_bilinear(uv) * hit[..., None]
        normals = normals * hit[..., None]

        split = "train" if i < n_views else "test"
        img_rel = f"images/view_{i:03d}.png"
        mask_rel = f"masks/view_{i:03d}.png"
        nrm_rel = f"normals/view_{i:03d}.npy"
        texio.save_png(rgb, out / img_rel)
        texio.save_mask_png(hit, out / mask_rel)
        np.save(out / nrm_rel, normals.astype(np.float32))

        entry = camera_to_dict(cam, image=img_rel, mask=mask_rel, split=split)
        entry["normal"] = nrm_rel
        entries.append(entry)
        views.append(View(camera=cam, image_path=out / img_rel, mask_path=out / mask_rel,
                          normal_path=out / nrm_rel, split=split))

    write_cameras(entries, out / "cameras.json")

    pts, nrms, uvs = surface.sample_points(n_points, rng)
    cols = texture.sample_bilinear(uvs)
    np.save(out / "points.npy", pts.astype(np.float64))
    np.save(out / "point_colors.npy", cols.astype(np.float32))
    np.save(out / "point_normals.npy", nrms.astype(np.float64))
    texio.save_texture_blob(tex_data, out / "gt_texture.texf")
    texio.save_png(tex_data, out / "gt_texture.png")

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    center_ = 0.5 * (lo + hi)
    scale_ = float(np.max(hi - lo)) / 2.0
    meta = {
        "kind": kind, "seed": seed, "n_views": n_views, "n_test": n_test,
        "resolution": resolution, "view_radius": view_radius, "shading": shading,
        "center": center_.tolist(), "scale": scale_,
        "surface": {"kind": kind, "params": surface.params()},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return Dataset(root=out, views=views, center=center_, scale=scale_, meta=meta)
