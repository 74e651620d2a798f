import numpy as np
import pytest

from texsplat.scene import Camera
from texsplat.uvmap.charts import uv_to_sphere
from texsplat.uvmap.losses import loss_chamfer, loss_cycle2d, loss_cycle3d
from texsplat.uvmap.samples import backproject_depth, fps, sample_sphere_uniform


class IdentityMapper:
    """Test double: forward/inverse are exact inverses through the sphere."""

    def forward_sphere(self, x):
        x = np.atleast_2d(x)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def inverse_from_sphere(self, p):
        return np.atleast_2d(p)

    def inverse_point(self, uv):
        return uv_to_sphere(np.atleast_2d(uv))


class OffsetMapper(IdentityMapper):
    def __init__(self, offset):
        self.offset = np.asarray(offset, dtype=np.float64)

    def inverse_from_sphere(self, p):
        return np.atleast_2d(p) + self.offset


class ConstantInverse(IdentityMapper):
    def __init__(self, point):
        self.point = np.asarray(point, dtype=np.float64)

    def inverse_point(self, uv):
        return np.tile(self.point, (len(np.atleast_2d(uv)), 1))


class TestCycle3d:
    def test_identity_is_zero(self, rng):
        x = rng.normal(size=(50, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        assert loss_cycle3d(IdentityMapper(), x) == pytest.approx(0.0, abs=1e-12)

    def test_offset_equals_norm(self):
        x = np.array([[1.0, 0.0, 0.0]])
        assert loss_cycle3d(OffsetMapper([0.3, 0, 0]), x) == pytest.approx(0.3)

    def test_matches_two_loop_oracle(self, mapper_random, rng):
        x = rng.normal(0, 0.4, (30, 3)) + [0, 0, 3.0]
        got = loss_cycle3d(mapper_random, x)
        total = 0.0
        for row in x:
            rec = mapper_random.inverse_from_sphere(
                mapper_random.forward_sphere(row[None]))[0]
            total += float(np.sqrt(((row - rec) ** 2).sum()))
        assert got == pytest.approx(total / len(x), abs=1e-7)


class TestChamfer:
    def test_equal_sets_zero(self, rng):
        uv = rng.random((64, 2))
        p = uv_to_sphere(uv)
        assert loss_chamfer(IdentityMapper(), uv, p) == pytest.approx(0.0, abs=1e-12)

    def test_single_point_distance_two(self):
        m = ConstantInverse([1.0, 0.0, 0.0])
        got = loss_chamfer(m, np.array([[0.3, 0.4]]), np.array([[0.0, 0.0, 0.0]]))
        assert got == pytest.approx(2.0)

    def test_matches_brute_force(self, mapper_random, rng):
        uv = rng.random((50, 2))
        p = rng.normal(size=(50, 3))
        got = loss_chamfer(mapper_random, uv, p)
        xw = mapper_random.inverse_point(uv)
        d = np.linalg.norm(xw[:, None] - p[None], axis=-1)
        expect = d.min(axis=1).mean() + d.min(axis=0).mean()
        assert got == pytest.approx(expect, abs=1e-7)


class TestCycle2d:
    def test_identity_zero(self, rng):
        uv = rng.random((64, 2))
        assert loss_cycle2d(IdentityMapper(), uv) == pytest.approx(0.0, abs=1e-12)

    def test_antipodal_is_two(self):
        class Antipode(IdentityMapper):
            def forward_sphere(self, x):
                x = np.atleast_2d(x)
                return -x / np.linalg.norm(x, axis=-1, keepdims=True)

        assert loss_cycle2d(Antipode(), np.array([[0.25, 0.5]])) == pytest.approx(2.0)

    def test_seam_safe(self):
        # u=0.999 vs u=0.001 at the equator measures the short way around
        class SeamShift(IdentityMapper):
            def forward_sphere(self, x):
                return uv_to_sphere(np.array([[0.001, 0.5]]))

        got = loss_cycle2d(SeamShift(), np.array([[0.999, 0.5]]))
        assert got == pytest.approx(2 * np.sin(np.pi * 0.002), abs=1e-6)
        assert got == pytest.approx(0.01257, abs=1e-4)


class TestFps:
    def test_k_equals_n_returns_all(self, rng):
        pts = rng.normal(size=(20, 3))
        got = fps(pts, 20)
        assert sorted(map(tuple, got)) == sorted(map(tuple, pts))

    def test_line_extremes(self):
        pts = np.stack([np.linspace(0, 9, 10), np.zeros(10), np.zeros(10)], axis=1)
        got = fps(pts, 2)
        assert np.allclose(got[0], [0, 0, 0])
        assert np.allclose(got[1], [9, 0, 0])

    def test_rejects_k_too_large(self):
        with pytest.raises(ValueError):
            fps(np.zeros((3, 3)), 4)

    def test_beats_random_subsets(self, rng):
        def min_pairwise(pts):
            d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
            return d[~np.eye(len(pts), dtype=bool)].min()

        for trial in range(20):
            cloud = np.random.default_rng(trial).normal(size=(100, 3))
            sel = fps(cloud, 8)
            fps_min = min_pairwise(sel)
            for _ in range(30):
                sub = cloud[rng.choice(100, size=8, replace=False)]
                assert fps_min >= min_pairwise(sub) - 1e-12


class TestSphereSampling:
    def test_ranges(self, rng):
        uv = sample_sphere_uniform(5000, rng)
        assert (uv[:, 0] >= 0).all() and (uv[:, 0] < 1).all()
        assert (uv[:, 1] >= 0).all() and (uv[:, 1] <= 1).all()

    def test_mean_near_origin(self, rng):
        n = 20000
        p = uv_to_sphere(sample_sphere_uniform(n, rng))
        assert np.linalg.norm(p.mean(axis=0)) <= 5.0 / np.sqrt(n)

    def test_octant_uniformity(self, rng):
        n = 80000
        p = uv_to_sphere(sample_sphere_uniform(n, rng))
        octant = ((p[:, 0] > 0).astype(int) + 2 * (p[:, 1] > 0) + 4 * (p[:, 2] > 0))
        counts = np.bincount(octant, minlength=8)
        expect = n / 8.0
        sigma = np.sqrt(n * (1 / 8) * (7 / 8))
        assert np.abs(counts - expect).max() <= 4.0 * sigma

    def test_requires_positive_n(self, rng):
        with pytest.raises(ValueError):
            sample_sphere_uniform(0, rng)


class TestBackproject:
    def _cam(self):
        return Camera(fx=50.0, fy=50.0, cx=32.0, cy=32.0, width=64, height=64,
                      R=np.eye(3), t=np.zeros(3))

    def test_principal_ray(self):
        cam = self._cam()
        depth = np.zeros((64, 64))
        alpha = np.zeros((64, 64))
        # pixel whose center coordinate is closest to the principal point
        depth[31, 31] = 5.0
        alpha[31, 31] = 1.0
        pts = backproject_depth(depth, cam, alpha)
        assert pts.shape == (1, 3)
        assert np.allclose(pts[0], [(31.5 - 32) / 50 * 5, (31.5 - 32) / 50 * 5, 5.0])

    def test_exact_center_with_matching_principal_point(self):
        cam = Camera(fx=50.0, fy=50.0, cx=31.5, cy=31.5, width=64, height=64,
                     R=np.eye(3), t=np.zeros(3))
        depth = np.zeros((64, 64))
        alpha = np.zeros((64, 64))
        depth[31, 31] = 5.0
        alpha[31, 31] = 1.0
        pts = backproject_depth(depth, cam, alpha)
        assert np.allclose(pts[0], [0.0, 0.0, 5.0], atol=1e-12)

    def test_zero_alpha_empty(self):
        cam = self._cam()
        pts = backproject_depth(np.ones((64, 64)), cam, np.zeros((64, 64)))
        assert pts.shape == (0, 3)

    def test_alpha_threshold(self):
        cam = self._cam()
        depth = np.ones((64, 64))
        alpha = np.full((64, 64), 0.49)
        alpha[10, 10] = 0.51
        pts = backproject_depth(depth, cam, alpha)
        assert len(pts) == 1
