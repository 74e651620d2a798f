"""Cameras JSON: a list of pinhole cameras with pose and asset paths."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..scene import Camera

_REQUIRED = ("fx", "fy", "cx", "cy", "width", "height", "R", "t")


class CameraSchemaError(ValueError):
    pass


def camera_to_dict(cam: Camera, image: str | None = None, mask: str | None = None,
                   split: str = "train") -> dict:
    d = {
        "fx": float(cam.fx), "fy": float(cam.fy),
        "cx": float(cam.cx), "cy": float(cam.cy),
        "width": int(cam.width), "height": int(cam.height),
        "R": [float(v) for v in cam.R.reshape(-1)],
        "t": [float(v) for v in cam.t],
        "image": image, "mask": mask, "split": split,
    }
    return d


def camera_from_dict(d: dict, path: str) -> tuple[Camera, dict]:
    for key in _REQUIRED:
        if key not in d:
            raise CameraSchemaError(f"{path}.{key}: missing required field")
    R = np.asarray(d["R"], dtype=np.float64)
    if R.size != 9:
        raise CameraSchemaError(f"{path}.R: expected 9 numbers, got {R.size}")
    t = np.asarray(d["t"], dtype=np.float64)
    if t.size != 3:
        raise CameraSchemaError(f"{path}.t: expected 3 numbers, got {t.size}")
    cam = Camera(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
                 width=int(d["width"]), height=int(d["height"]),
                 R=R.reshape(3, 3), t=t)
    meta = {"image": d.get("image"), "mask": d.get("mask"),
            "split": d.get("split", "train")}
    return cam, meta


def write_cameras(entries: list[dict], path) -> None:
    Path(path).write_text(json.dumps(entries, indent=1) + "\n")


def read_cameras(path) -> list[tuple[Camera, dict]]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise CameraSchemaError("$: expected a JSON array of cameras")
    out = []
    for i, d in enumerate(data):
        if not isinstance(d, dict):
            raise CameraSchemaError(f"$[{i}]: expected an object")
        out.append(camera_from_dict(d, f"$[{i}]"))
    return out
