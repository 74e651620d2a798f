"""Binary PLY scene files in the splatting-ecosystem vertex layout.

Properties per vertex (all float32, little endian): x, y, z, f_dc_0..2,
f_rest_0..44 (channel-major: 15 higher-order coefficients for R, then G,
then B), opacity (logit), scale_0..2 (log), rot_0..3 (quaternion wxyz).
External splat viewers open files written here.
"""

from __future__ import annotations

import numpy as np

from ..scene import GaussianSet

_PROPS = (["x", "y", "z"]
          + [f"f_dc_{i}" for i in range(3)]
          + [f"f_rest_{i}" for i in range(45)]
          + ["opacity"]
          + [f"scale_{i}" for i in range(3)]
          + [f"rot_{i}" for i in range(4)])


class PlyParseError(ValueError):
    pass


def write_ply(scene: GaussianSet, path) -> None:
    n = len(scene)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in _PROPS]
    header.append("end_header")

    data = np.empty((n, len(_PROPS)), dtype="<f4")
    data[:, 0:3] = scene.positions
    data[:, 3:6] = scene.sh[:, 0, :]
    data[:, 6:51] = scene.sh[:, 1:, :].transpose(0, 2, 1).reshape(n, 45)
    data[:, 51] = scene.opacity_logits
    data[:, 52:55] = scene.log_scales
    data[:, 55:59] = scene.quats

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(data.tobytes())


def read_ply(path) -> GaussianSet:
    with open(path, "rb") as f:
        raw = f.read()

    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise PlyParseError(f"{path}: not a PLY file (missing 'ply'/'end_header')")
    lines = raw[:end].decode("ascii", errors="replace").splitlines()

    n = None
    props: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise PlyParseError(f"{path}:{lineno}: unsupported format {parts[1]!r}")
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise PlyParseError(f"{path}:{lineno}: unsupported element {parts[1]!r}")
            n = int(parts[2])
        elif parts[0] == "property":
            if parts[1] != "float":
                raise PlyParseError(f"{path}:{lineno}: unsupported property type {parts[1]!r}")
            props.append(parts[2])
        else:
            raise PlyParseError(f"{path}:{lineno}: unrecognized header line {line!r}")
    if n is None:
        raise PlyParseError(f"{path}: missing 'element vertex' line")
    missing = [p for p in _PROPS if p not in props]
    if missing:
        raise PlyParseError(f"{path}: missing vertex property {missing[0]!r}")

    body = raw[end + len(b"end_header\n"):]
    expect = n * len(props) * 4
    if len(body) < expect:
        raise PlyParseError(f"{path}: truncated body ({len(body)} bytes, expected {expect})")
    data = np.frombuffer(body, dtype="<f4", count=n * len(props)).reshape(n, len(props))
    col = {p: i for i, p in enumerate(props)}

    sh = np.zeros((n, 16, 3), dtype=np.float64)
    for c in range(3):
        sh[:, 0, c] = data[:, col[f"f_dc_{c}"]]
        for j in range(15):
            sh[:, 1 + j, c] = data[:, col[f"f_rest_{c * 15 + j}"]]

    return GaussianSet(
        positions=np.stack([data[:, col[a]] for a in "xyz"], axis=-1),
        quats=np.stack([data[:, col[f"rot_{i}"]] for i in range(4)], axis=-1),
        log_scales=np.stack([data[:, col[f"scale_{i}"]] for i in range(3)], axis=-1),
        opacity_logits=data[:, col["opacity"]],
        sh=sh,
    )
