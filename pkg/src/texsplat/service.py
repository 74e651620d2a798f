"""Interactive texture-editing HTTP service.

Single session per process: one loaded checkpoint, one current texture with
copy-on-write snapshots and a monotonically increasing edit version.
Renders grab a consistent snapshot and run outside the lock, so edits never
wait on renders; edits serialize on the session lock.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .io_formats import texio
from .render import render_forward
from .io_formats.cameras import CameraSchemaError, camera_from_dict
from .scene import orbit_camera
from .texture import Texture, swap_texture
from .trainer import load_checkpoint

RETAINED_VERSIONS = 8
RENDER_MODES = ("vanilla", "textured", "textured_nosh", "prefetch")


class VersionExpired(Exception):
    pass


class EditSession:
    def __init__(self, checkpoint_dir):
        scene, mapper, texture, state = load_checkpoint(checkpoint_dir)
        if texture is None:
            raise FileNotFoundError(f"{checkpoint_dir}: checkpoint has no texture")
        self.scene = scene
        self.mapper = mapper
        self.trained_texture = texture.copy()
        self.state = state
        self.target = np.asarray(state.get("center", [0, 0, 0]), dtype=np.float64)
        self._lock = threading.Lock()
        self._versions: deque[tuple[int, Texture]] = deque(maxlen=RETAINED_VERSIONS)
        self._versions.append((0, texture))

    @property
    def edit_version(self) -> int:
        with self._lock:
            return self._versions[-1][0]

    def snapshot(self, version: int | None = None) -> tuple[Texture, int]:
        with self._lock:
            if version is None:
                return self._versions[-1][1], self._versions[-1][0]
            for v, tex in reversed(self._versions):
                if v == version:
                    return tex, v
            raise VersionExpired(
                f"edit_version {version} is older than the retained history "
                f"(current {self._versions[-1][0]})")

    def mutate(self, fn) -> int:
        """Apply ``fn(texture_copy) -> texture`` under the edit lock."""
        with self._lock:
            current = self._versions[-1]
            new_tex = fn(current[1].copy())
            new_version = current[0] + 1
            self._versions.append((new_version, new_tex))
            return new_version


def create_app(checkpoint_dir, ui_dir=None) -> FastAPI:
    session = EditSession(checkpoint_dir)
    app = FastAPI(title="texsplat edit service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"], expose_headers=["X-Edit-Version"])
    app.state.session = session

    @app.get("/state")
    def get_state():
        tex, version = session.snapshot()
        return {"gaussian_count": len(session.scene),
                "texture_size": [tex.height, tex.width],
                "edit_version": version}

    @app.post("/render")
    async def post_render(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"detail": "malformed JSON body"}, status_code=400)
        mode = body.get("mode", "textured")
        if mode not in RENDER_MODES:
            return JSONResponse({"detail": f"unknown mode {mode!r}"}, status_code=400)
        width = int(body.get("width", 512))
        height = int(body.get("height", 512))
        if not (1 <= width <= 4096 and 1 <= height <= 4096):
            return JSONResponse({"detail": "width/height out of range"}, status_code=400)
        try:
            if "camera" in body:
                cam, _ = camera_from_dict(body["camera"], "$.camera")
            else:
                orbit = body.get("orbit", {})
                cam = orbit_camera(float(orbit.get("azimuth", 30.0)),
                                   float(orbit.get("elevation", 20.0)),
                                   float(orbit.get("radius", 3.0)),
                                   session.target, width, height)
        except (CameraSchemaError, ValueError, TypeError) as e:
            return JSONResponse({"detail": str(e)}, status_code=400)
        try:
            tex, version = session.snapshot(body.get("edit_version"))
        except VersionExpired as e:
            return JSONResponse({"detail": str(e)}, status_code=409)
        out = render_forward(session.scene, cam, tex, mode=mode)
        png = texio.png_bytes(out.clamped_color())
        return Response(content=png, media_type="image/png",
                        headers={"X-Edit-Version": str(version)})

    @app.get("/texture")
    def get_texture():
        tex, version = session.snapshot()
        return Response(content=texio.png_bytes(np.clip(tex.data, 0, 1)),
                        media_type="image/png",
                        headers={"X-Edit-Version": str(version)})

    @app.post("/texture")
    async def post_texture(request: Request):
        ctype = request.headers.get("content-type", "")
        shadow = False
        data = None
        if ctype.startswith("multipart/form-data"):
            form = await request.form()
            if "file" not in form:
                return JSONResponse({"detail": "missing 'file' part"}, status_code=400)
            data = await form["file"].read()
            shadow = str(form.get("shadow_preserve", "false")).lower() in ("1", "true")
        else:
            data = await request.body()
            shadow = request.query_params.get("shadow_preserve", "false").lower() in ("1", "true")
        if not data:
            return JSONResponse({"detail": "empty texture payload"}, status_code=400)
        try:
            img = texio.load_png_bytes(data)
        except Exception:
            return JSONResponse({"detail": "texture image could not be decoded"},
                                status_code=422)
        version = session.mutate(lambda tex: swap_texture(tex, img, shadow_preserve=shadow))
        return {"edit_version": version}

    @app.post("/paint")
    async def post_paint(request: Request):
        try:
            body = await request.json()
            u = float(body["u"])
            v = float(body["v"])
            radius = float(body["radius"])
            rgb = [float(x) for x in body["rgb"]]
            opacity = float(body.get("opacity", 1.0))
            if len(rgb) != 3:
                raise ValueError("rgb must have 3 components")
        except Exception as e:
            return JSONResponse({"detail": f"malformed paint body: {e}"}, status_code=400)
        if radius <= 0 or not 0.0 <= opacity <= 1.0:
            return JSONResponse({"detail": "radius must be > 0 and opacity in [0, 1]"},
                                status_code=400)

        def apply(tex: Texture) -> Texture:
            tex.paint((u, v), radius, rgb, opacity)
            return tex

        return {"edit_version": session.mutate(apply)}

    @app.post("/texture/reset")
    def post_reset():
        version = session.mutate(lambda _tex: session.trained_texture.copy())
        return {"edit_version": version}

    ui = Path(ui_dir) if ui_dir else Path(__file__).resolve().parents[2] / "frontend"
    if (ui / "index.html").exists() and (ui / "dist").is_dir():
        app.mount("/", StaticFiles(directory=str(ui), html=True), name="ui")
    return app
