import numpy as np

from cnav import tensor as T
from cnav.optim import Adam, adam_step


class TestAdamStep:
    def test_first_step_moves_by_lr(self):
        # with unit gradient the bias-corrected first step is lr/(1+eps)
        p = np.array([1.0])
        m = np.zeros(1)
        v = np.zeros(1)
        adam_step(p, np.array([1.0]), m, v, t=1, lr=0.1)
        np.testing.assert_allclose(p, [1.0 - 0.1 / (1.0 + 1e-8)], rtol=1e-12)

    def test_two_steps_hand_computed(self):
        p = np.array([0.0])
        m = np.zeros(1)
        v = np.zeros(1)
        g1, g2 = 0.5, -0.25
        adam_step(p, np.array([g1]), m, v, t=1, lr=0.01)
        adam_step(p, np.array([g2]), m, v, t=2, lr=0.01)
        # replicate the recurrence directly
        em = 0.1 * g1
        ev = 0.001 * g1 * g1
        x = -0.01 * (em / 0.1) / (np.sqrt(ev / 0.001) + 1e-8)
        em = 0.9 * em + 0.1 * g2
        ev = 0.999 * ev + 0.001 * g2 * g2
        x -= 0.01 * (em / (1 - 0.9**2)) / (np.sqrt(ev / (1 - 0.999**2)) + 1e-8)
        np.testing.assert_allclose(p, [x], rtol=1e-12)

    def test_descends_quadratic(self):
        w = T.Tensor(np.array([4.0, -3.0]), requires_grad=True)
        opt = Adam([("w", w)], lr=0.05)
        for _ in range(400):
            opt.zero_grad()
            with T.Tape() as tape:
                loss = T.reduce_sum(T.square(w))
            tape.backward(loss)
            opt.step()
        assert np.abs(w.data).max() < 1e-2


class TestAdamGroup:
    def test_none_grad_skipped(self):
        a = T.Tensor(np.ones(2), requires_grad=True)
        b = T.Tensor(np.ones(2), requires_grad=True)
        opt = Adam([("a", a), ("b", b)], lr=0.1)
        a.grad = np.ones(2)
        before = b.data.copy()
        opt.step()
        np.testing.assert_array_equal(b.data, before)
        assert not np.array_equal(a.data, np.ones(2))

    def test_state_round_trip(self):
        rng = np.random.default_rng(0)
        w = T.Tensor(rng.standard_normal(4).astype(np.float32), requires_grad=True)
        opt = Adam([("w", w)], lr=0.01)
        for _ in range(3):
            w.grad = rng.standard_normal(4).astype(np.float32)
            opt.step()
        saved = dict(opt.state_tensors("opt"))
        w2 = T.Tensor(w.data.copy(), requires_grad=True)
        opt2 = Adam([("w", w2)], lr=0.01)
        opt2.load_state("opt", saved)
        opt2.t = opt.t
        g = rng.standard_normal(4).astype(np.float32)
        w.grad = g.copy()
        w2.grad = g.copy()
        opt.step()
        opt2.step()
        assert w.data.tobytes() == w2.data.tobytes()
