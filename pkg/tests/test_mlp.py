import numpy as np
import pytest

from texsplat.uvmap.charts import sphere_to_uv, wrap_u_delta
from texsplat.uvmap.mlp import AffineUvMap, Mlp, UvMapper, sphere_head


def reference_forward_uv(mapper, x):
    """Independent re-implementation of the forward map (loops, no Mlp code)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xn = (x - mapper.center) @ mapper.pre_rotation.T / mapper.scale
    out = []
    for row in xn:
        a = row
        for i, (W, b) in enumerate(zip(mapper.fwd.Ws, mapper.fwd.bs)):
            z = W.astype(np.float64) @ a + b.astype(np.float64)
            if i < len(mapper.fwd.Ws) - 1:
                a = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0)
            else:
                a = z
        r = np.linalg.norm(a)
        g = np.log1p(np.exp(min(100.0 * r, 37.0))) / 100.0 if r <= 0.37 else r
        p = a / g
        u = (np.arctan2(p[1], p[0]) + np.pi) / (2 * np.pi) % 1.0
        v = np.arccos(np.clip(p[2], -1, 1)) / np.pi
        out.append([u, v])
    return np.asarray(out)


class TestForwardMap:
    def test_matches_independent_implementation(self, mapper_random, rng):
        x = rng.normal(0.0, 0.4, (20, 3)) + [0, 0, 3.0]
        got = mapper_random.forward_uv(x)
        ref = reference_forward_uv(mapper_random, x)
        assert np.allclose(wrap_u_delta(got[:, 0] - ref[:, 0]), 0.0, atol=1e-6)
        assert np.allclose(got[:, 1], ref[:, 1], atol=1e-6)

    def test_sphere_output_unit_norm(self, mapper_random, rng):
        x = rng.normal(0.0, 0.5, (200, 3)) + [0, 0, 3.0]
        p = mapper_random.forward_sphere(x)
        assert np.abs(np.linalg.norm(p, axis=1) - 1.0).max() <= 1e-6

    def test_inverse_zero_final_layer_maps_to_zero(self, mapper_random, rng):
        mapper_random.inv.Ws[-1][...] = 0.0
        mapper_random.inv.bs[-1][...] = 0.0
        mapper_random.set_normalization(center=[0, 0, 0], scale=1.0)
        uv = rng.random((50, 2))
        assert np.allclose(mapper_random.inverse_point(uv), 0.0)


class TestJacobian:
    def fd_jacobian(self, mapper, x, h=1e-4):
        J = np.zeros((2, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            up = mapper.forward_uv((x + d)[None])[0]
            um = mapper.forward_uv((x - d)[None])[0]
            J[0, k] = wrap_u_delta(up[0] - um[0]) / (2 * h)
            J[1, k] = (up[1] - um[1]) / (2 * h)
        return J

    def test_affine_hook_exact(self, rng):
        A = rng.normal(size=(3, 3))
        hook = AffineUvMap(A, rng.normal(size=3))
        x = rng.normal(size=(5, 3))
        J, pole = hook.jacobian_uv(x)
        assert np.allclose(J, np.broadcast_to(A[:2], (5, 2, 3)))
        assert not pole.any()

    def test_matches_finite_differences(self, mapper_random, rng):
        worst = 0.0
        for _ in range(25):
            x = rng.normal(0.0, 0.4, 3) + [0, 0, 3.0]
            J, pole = mapper_random.jacobian_uv(x[None])
            if pole[0]:
                continue
            fd = self.fd_jacobian(mapper_random, x)
            err = np.abs(J[0] - fd) / max(np.abs(fd).max(), 1e-9)
            worst = max(worst, err.max())
        assert worst <= 1e-4

    def test_property_many_random_nets(self):
        # spec property: 1000 random (weights, x) pairs away from poles
        count = 0
        worst = 0.0
        net_seed = 0
        while count < 1000:
            net_seed += 1
            m = UvMapper(rng=np.random.default_rng(net_seed))
            rng = np.random.default_rng(net_seed + 10000)
            x = rng.normal(0.0, 0.6, (25, 3))
            J, pole = m.jacobian_uv(x)
            p = m.forward_sphere(x)
            ok = (~pole) & (np.abs(p[:, 2]) < 0.95)
            for i in np.nonzero(ok)[0]:
                fd = self.fd_jacobian(m, x[i])
                scale = max(np.abs(fd).max(), 1e-9)
                worst = max(worst, (np.abs(J[i] - fd) / scale).max())
                count += 1
        assert worst <= 1e-4

    def test_rigid_preprocessing_transforms_jacobian(self, rng):
        # rotating the normalization transform rotates the jacobian by the inverse
        m1 = UvMapper(rng=np.random.default_rng(2))
        m2 = UvMapper(rng=np.random.default_rng(2))
        theta = 0.7
        c, s = np.cos(theta), np.sin(theta)
        Q = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        m1.set_normalization([0, 0, 0], 1.0)
        m2.set_normalization([0, 0, 0], 1.0, pre_rotation=Q)
        x = rng.normal(0.0, 0.5, (10, 3))
        J2, _ = m2.jacobian_uv(x)
        # phi2(x) = phi1(Q x): J2(x) = J1(Q x) Q
        J1_at, _ = m1.jacobian_uv(x @ Q.T)
        assert np.allclose(J2, J1_at @ Q, atol=1e-5)
        uv1 = m1.forward_uv(x @ Q.T)
        uv2 = m2.forward_uv(x)
        assert np.allclose(uv1, uv2, atol=1e-12)


class TestTaylorConsistency:
    def test_quadratic_error_decay(self, mapper_random, rng):
        # |phi(x) - (phi(mu) + J (x - mu))| must shrink ~4x when offsets halve
        mu = np.array([0.05, -0.1, 3.1])
        J, pole = mapper_random.jacobian_uv(mu[None])
        assert not pole[0]
        uv_mu = mapper_random.forward_uv(mu[None])[0]
        dirs = rng.normal(size=(400, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

        def mean_err(h):
            x = mu + h * dirs
            uv = mapper_random.forward_uv(x)
            lin_u = uv_mu[0] + dirs @ J[0, 0] * h
            lin_v = uv_mu[1] + dirs @ J[0, 1] * h
            du = wrap_u_delta(uv[:, 0] - lin_u)
            dv = uv[:, 1] - lin_v
            return np.sqrt(du ** 2 + dv ** 2).mean()

        e1 = mean_err(0.02)
        e2 = mean_err(0.01)
        assert 3.2 <= e1 / e2 <= 4.8


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path, mapper_random):
        p = tmp_path / "m.ckpt"
        mapper_random.save(p)
        loaded = UvMapper.load(p)
        for a, b in zip(mapper_random._arrays(), loaded._arrays()):
            assert a[0] == b[0]
            assert a[1].tobytes() == b[1].tobytes()
        assert np.allclose(loaded.center, mapper_random.center)
        assert loaded.scale == mapper_random.scale
        p2 = tmp_path / "m2.ckpt"
        loaded.save(p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError, match="checkpoint"):
            UvMapper.load(p)


class TestMlpBackward:
    def test_weight_gradients_match_fd(self, rng):
        mlp = Mlp((3, 16, 16, 2), np.random.default_rng(0), dtype=np.float64)
        x = rng.normal(size=(12, 3))
        w = rng.normal(size=(12, 2))

        def loss():
            return float(np.sum(mlp.forward(x) * w))

        out, ctx = mlp.forward(x, want_ctx=True)
        _, grads = mlp.backward(ctx, w)
        h = 1e-6
        for pi, p in enumerate(mlp.params()):
            flat = p.reshape(-1)
            for k in rng.choice(flat.size, size=min(5, flat.size), replace=False):
                old = flat[k]
                flat[k] = old + h
                lp = loss()
                flat[k] = old - h
                lm = loss()
                flat[k] = old
                fd = (lp - lm) / (2 * h)
                got = grads[pi].reshape(-1)[k]
                assert got == pytest.approx(fd, rel=1e-5, abs=1e-8)
