import numpy as np
import pytest

from cnav import gradcheck
from cnav import tensor as T


class TestChecker:
    def test_matmul_adjoint_tight(self, rng):
        a = T.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        b = T.Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        err = gradcheck.check_gradients(
            lambda: T.reduce_sum(T.square(T.matmul(a, b))), [a, b]
        )
        assert err < 1e-6

    def test_conv2d_adjoint(self, rng):
        x = T.Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
        k = T.Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
        err = gradcheck.check_gradients(
            lambda: T.reduce_mean(T.square(T.conv2d(x, k, 2))), [x, k]
        )
        assert err < 1e-6

    def test_transpose_conv_is_conv_adjoint(self, rng):
        # <conv(x), y> == <x, conv_transpose(y)> for matching kernels
        x = rng.standard_normal((1, 2, 7, 9))
        k = rng.standard_normal((4, 2, 3, 3))
        y = rng.standard_normal((1, 4, 3, 4))
        lhs = np.sum(T.conv2d(T.Tensor(x), T.Tensor(k), 2).data * y)
        # the same array serves both roles: conv reads it as [C_out,C_in,kh,kw],
        # the transposed op as [C_in,C_out,kh,kw]
        rhs = np.sum(T.conv2d_transpose(T.Tensor(y), T.Tensor(k), 2).data * x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


class TestBattery:
    def test_primitive_battery_under_tolerance(self):
        results = gradcheck.run_battery(seed=3, include_composites=False)
        assert len(results) >= 18
        for name, err in results:
            assert err < 1e-6, f"{name}: rel err {err}"

    def test_corrupted_adjoint_is_caught_and_named(self, monkeypatch):
        real_tanh = T.tanh

        def bad_tanh(x):
            out = real_tanh(x)
            tape = T._active_tape()
            if tape is not None and tape._entries and tape._entries[-1][0] is out:
                entry_out, parents, backfn = tape._entries[-1]
                tape._entries[-1] = (
                    entry_out,
                    parents,
                    lambda g: tuple(None if p is None else 1.01 * p for p in backfn(g)),
                )
            return out

        monkeypatch.setattr(T, "tanh", bad_tanh)
        monkeypatch.setattr(gradcheck.T, "tanh", bad_tanh)
        results = dict(gradcheck.run_battery(seed=3, include_composites=False))
        assert results["tanh"] > 1e-4
        untouched = [n for n, e in results.items() if n != "tanh" and e < 1e-6]
        assert len(untouched) == len(results) - 1


class TestCompositeBattery:
    EXPECTED = ("critic_residual_composite", "policy_objective_composite",
                "reconstruction_objective_composite", "channel_gate_composite",
                "squashed_sample_logprob", "temperature_objective")

    def test_every_objective_is_covered(self):
        results = dict(gradcheck.run_battery(seed=0, include_composites=True))
        for name in self.EXPECTED:
            assert name in results

    @pytest.mark.parametrize("seed", [0, 7])
    def test_composites_under_tolerance(self, seed):
        results = gradcheck.run_battery(seed=seed, include_composites=True)
        for name, err in results:
            assert err < 1e-4, f"{name}: rel err {err}"
