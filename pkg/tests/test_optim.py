import numpy as np
import pytest

from texsplat.optim import Adam


class TestAdam:
    def test_zero_grad_no_change(self):
        p = np.ones(5)
        opt = Adam({"p": p}, {"p": 0.1})
        opt.step({"p": np.zeros(5)})
        assert np.allclose(p, 1.0)

    def test_constant_grad_moves_against_sign(self):
        p = np.zeros(4)
        g = np.array([1.0, -2.0, 0.5, -0.1])
        opt = Adam({"p": p}, {"p": 0.01})
        for _ in range(25):
            opt.step({"p": g})
        assert (np.sign(p) == -np.sign(g)).all()

    def test_matches_torch_reference_trajectory(self):
        torch = pytest.importorskip("torch")
        rng = np.random.default_rng(0)
        p0 = rng.normal(size=(7, 3))
        grads = [rng.normal(size=(7, 3)) for _ in range(100)]

        p_np = p0.copy()
        opt = Adam({"p": p_np}, {"p": 1e-2})

        p_t = torch.tensor(p0.copy(), requires_grad=True)
        topt = torch.optim.Adam([p_t], lr=1e-2, betas=(0.9, 0.999), eps=1e-15)
        for g in grads:
            opt.step({"p": g})
            p_t.grad = torch.tensor(g)
            topt.step()
        assert np.abs(p_np - p_t.detach().numpy()).max() <= 1e-6

    def test_filter_and_zero_state(self):
        p = np.zeros((4, 2))
        opt = Adam({"p": p}, {"p": 0.1})
        opt.step({"p": np.ones((4, 2))})
        opt.filter_state("p", np.array([0, 2]))
        assert opt.m["p"].shape == (2, 2)
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, 0] = True
        opt.zero_state_where("p", mask)
        assert opt.m["p"][0, 0] == 0.0 and opt.m["p"][1, 1] != 0.0

    def test_missing_grad_skipped(self):
        p = np.ones(3)
        opt = Adam({"p": p}, {"p": 0.1})
        opt.step({"p": None})
        assert np.allclose(p, 1.0)
