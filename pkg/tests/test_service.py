import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from texsplat.cli import main
from texsplat.io_formats import texio
from texsplat.service import create_app


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    ds = root / "ds"
    assert main(["synth", "--kind", "sphere", "--out", str(ds), "--n-views", "6",
                 "--n-test", "2", "--resolution", "48", "--seed", "0"]) == 0
    ck = root / "ck"
    assert main(["train", "--dataset", str(ds), "--out", str(ck), "--seed", "0",
                 "--set", "n_init_gaussians=300", "--set", "stage1_iters=20",
                 "--set", "reg_start=5", "--set", "prune_every=1000000",
                 "--set", "flatten_every=10", "--set", "uv.steps=20",
                 "--set", "uv.batch_points=128", "--set", "uv.n_uv=128",
                 "--set", "uv.n_pseudo=100", "--set", "stage3_texture_only=3",
                 "--set", "stage3_joint=3", "--set", "texture_height=16",
                 "--set", "texture_width=32"]) == 0
    return root, ck


@pytest.fixture()
def client(checkpoint):
    _, ck = checkpoint
    app = create_app(ck)
    with TestClient(app) as c:
        yield c


class TestStateAndRender:
    def test_state_reports_scene(self, client, checkpoint):
        _, ck = checkpoint
        from texsplat.io_formats.ply import read_ply

        n = len(read_ply(ck / "scene.ply"))
        state = client.get("/state").json()
        assert state["gaussian_count"] == n
        assert state["edit_version"] == 0
        assert state["texture_size"] == [16, 32]

    def test_render_orbit_png(self, client):
        r = client.post("/render", json={"orbit": {"azimuth": 30, "elevation": 20,
                                                   "radius": 3.0},
                                         "mode": "textured", "width": 48,
                                         "height": 48})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.headers["x-edit-version"] == "0"
        img = texio.load_png_bytes(r.content)
        assert img.shape == (48, 48, 3)

    def test_render_rejects_bad_mode(self, client):
        r = client.post("/render", json={"mode": "nope"})
        assert r.status_code == 400

    def test_render_malformed_json(self, client):
        r = client.post("/render", content=b"{not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400


class TestEdits:
    def _gray_png(self):
        return texio.png_bytes(np.full((16, 32, 3), 0.5, dtype=np.float32))

    def test_texture_swap_bumps_version(self, client):
        v0 = client.get("/state").json()["edit_version"]
        r = client.post("/texture", files={"file": ("t.png", self._gray_png(),
                                                    "image/png")})
        assert r.status_code == 200
        assert r.json()["edit_version"] == v0 + 1

    def test_texture_undecodable_422(self, client):
        r = client.post("/texture", files={"file": ("t.png", b"garbage", "image/png")})
        assert r.status_code == 422

    def test_paint_zero_opacity_bumps_version_same_bytes(self, client):
        before = client.get("/texture").content
        v0 = client.get("/state").json()["edit_version"]
        r = client.post("/paint", json={"u": 0.5, "v": 0.5, "radius": 0.1,
                                        "rgb": [1, 0, 0], "opacity": 0.0})
        assert r.status_code == 200
        assert r.json()["edit_version"] == v0 + 1
        after = client.get("/texture").content
        assert before == after

    def test_paint_changes_texture_and_frame(self, client):
        frame0 = client.post("/render", json={"orbit": {"azimuth": 10,
                                                        "elevation": 15,
                                                        "radius": 3.0},
                                              "width": 48, "height": 48}).content
        # radius 0.9 covers the whole wrapped UV domain, so the repaint is
        # visible no matter where the learned chart placed the object
        r = client.post("/paint", json={"u": 0.5, "v": 0.5, "radius": 0.9,
                                        "rgb": [1, 0, 0], "opacity": 1.0})
        assert r.status_code == 200
        frame1 = client.post("/render", json={"orbit": {"azimuth": 10,
                                                        "elevation": 15,
                                                        "radius": 3.0},
                                              "width": 48, "height": 48}).content
        assert frame0 != frame1

    def test_paint_rejects_bad_body(self, client):
        assert client.post("/paint", json={"u": 0.1}).status_code == 400
        assert client.post("/paint", json={"u": 0.5, "v": 0.5, "radius": -1,
                                           "rgb": [1, 0, 0]}).status_code == 400

    def test_reset_restores_trained_texture(self, client):
        client.post("/paint", json={"u": 0.2, "v": 0.2, "radius": 0.2,
                                    "rgb": [0, 1, 0], "opacity": 1.0})
        r = client.post("/texture/reset")
        assert r.status_code == 200

    def test_stale_version_render_409(self, client):
        for _ in range(10):  # push history past the retention window
            client.post("/paint", json={"u": 0.5, "v": 0.5, "radius": 0.05,
                                        "rgb": [0, 0, 1], "opacity": 0.5})
        r = client.post("/render", json={"edit_version": 0, "width": 32,
                                         "height": 32})
        assert r.status_code == 409

    def test_render_pinned_recent_version(self, client):
        v = client.post("/paint", json={"u": 0.5, "v": 0.5, "radius": 0.05,
                                        "rgb": [0, 0, 1], "opacity": 0.5}).json()["edit_version"]
        r = client.post("/render", json={"edit_version": v, "width": 32,
                                         "height": 32})
        assert r.status_code == 200
        assert r.headers["x-edit-version"] == str(v)


class TestCliParity:
    def test_swap_render_bit_identical(self, checkpoint, tmp_path):
        root, ck = checkpoint
        gray = np.full((16, 32, 3), 0.5, dtype=np.float32)
        png_path = tmp_path / "gray.png"
        texio.save_png(gray, png_path)

        # CLI route: swap into a copy, render one frame
        ck2 = tmp_path / "ck2"
        assert main(["swap", "--checkpoint", str(ck), "--texture", str(png_path),
                     "--out", str(ck2)]) == 0
        frame_path = tmp_path / "cli.png"
        assert main(["render", "--checkpoint", str(ck2), "--mode", "textured",
                     "--azimuth", "30", "--elevation", "20", "--radius", "3.0",
                     "--width", "48", "--height", "48",
                     "--out", str(frame_path)]) == 0

        # service route: same inputs over HTTP
        app = create_app(ck)
        with TestClient(app) as client:
            r = client.post("/texture", files={"file": ("g.png",
                                                        png_path.read_bytes(),
                                                        "image/png")})
            assert r.status_code == 200
            frame = client.post("/render",
                                json={"orbit": {"azimuth": 30, "elevation": 20,
                                                "radius": 3.0},
                                      "mode": "textured",
                                      "width": 48, "height": 48})
        assert frame.content == frame_path.read_bytes()

    def test_shadow_preserve_differs_on_shadowed_fixture(self, checkpoint, tmp_path):
        root, ck = checkpoint
        new = np.full((16, 32, 3), 0.8, dtype=np.float32)
        png = texio.png_bytes(new)
        dark = {"u": 0.5, "v": 0.5, "radius": 0.9, "rgb": [0.1, 0.1, 0.1],
                "opacity": 1.0}  # bake a "shadow" into the whole texture
        app = create_app(ck)
        with TestClient(app) as client:
            client.post("/paint", json=dark)
            client.post("/texture", files={"file": ("n.png", png, "image/png")})
            plain = client.post("/render", json={"width": 48, "height": 48}).content
            client.post("/texture/reset")
            client.post("/paint", json=dark)
            client.post("/texture", files={"file": ("n.png", png, "image/png")},
                        data={"shadow_preserve": "true"})
            shadowed = client.post("/render", json={"width": 48, "height": 48}).content
        assert plain != shadowed
