import numpy as np
import pytest

import texsplat
from texsplat.scene import Camera, GaussianSet
from texsplat.texture import Texture
from texsplat.uvmap.mlp import UvMapper

texsplat.set_threads()


def random_scene(n=50, seed=0, z=4.0, spread=0.5, scale_lo=-2.5, scale_hi=-1.2,
                 opacity_lo=-1.0, opacity_hi=2.0, sh_std=0.2):
    rng = np.random.default_rng(seed)
    scene = GaussianSet(
        positions=rng.normal(0.0, spread, (n, 3)) + [0.0, 0.0, z],
        quats=rng.normal(size=(n, 4)),
        log_scales=rng.uniform(scale_lo, scale_hi, (n, 3)),
        opacity_logits=rng.uniform(opacity_lo, opacity_hi, n),
        sh=rng.normal(0.0, sh_std, (n, 16, 3)),
    )
    scene.quats /= np.linalg.norm(scene.quats, axis=1, keepdims=True)
    return scene


def simple_camera(size=64, f=None, z=0.0):
    f = f if f is not None else size * 0.94
    return Camera(fx=f, fy=f, cx=size / 2, cy=size / 2, width=size, height=size,
                  R=np.eye(3), t=np.array([0.0, 0.0, z]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_scene():
    return random_scene(n=10, seed=42, z=3.0, spread=0.3, scale_lo=-1.8,
                        scale_hi=-0.8, opacity_lo=-0.5, opacity_hi=1.0)


@pytest.fixture
def small_camera():
    return simple_camera(size=16, f=18.0)


@pytest.fixture
def mapper_random():
    m = UvMapper(rng=np.random.default_rng(5))
    m.set_normalization(center=[0.0, 0.0, 3.0], scale=1.5)
    return m


@pytest.fixture
def random_texture(rng):
    return Texture(rng.uniform(0.2, 0.8, (32, 64, 3)).astype(np.float32))
