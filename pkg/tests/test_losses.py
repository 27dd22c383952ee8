"""Training objectives: interpolation, FM regression, DDPM noise estimation."""

import numpy as np
import pytest

from flowpolicy.nn import Tensor
from flowpolicy.policy.losses import ddpm_forward_sample, ddpm_loss, fm_loss, interpolate
from flowpolicy.policy.normalizer import MinMaxNormalizer
from flowpolicy.policy.observation import Observation
from flowpolicy.policy.schedule import NoiseSchedule
from flowpolicy.rng import RngStream

TP, ACTD = 2, 1


class _ForcedModel:
    """Loss-function stand-in whose network output is dictated by the test."""

    def __init__(self, kind: str, out=None, schedule=None, k_train: int = 16):
        self.kind = kind
        self.schedule = schedule
        self.action_norm = MinMaxNormalizer.identity(ACTD)
        self.arch = type("A", (), {"k_train": k_train})()
        self.out = out  # None = echo the regression target shape with zeros
        self.last_input = None

    def encode_observations(self, observations):
        return None, None

    def forward_train(self, x_n, t_scaled, states, images):
        self.last_input = np.transpose(x_n, (0, 2, 1))
        if callable(self.out):
            return Tensor(self.out(self.last_input))
        val = np.zeros_like(self.last_input) if self.out is None else self.out
        return Tensor(np.asarray(val, dtype=np.float32))


OBS = Observation(state=np.zeros(1, dtype=np.float32))


class TestInterpolate:
    def test_endpoints(self):
        x0 = np.zeros((TP, ACTD), dtype=np.float32)
        x1 = np.full((TP, ACTD), 2.0, dtype=np.float32)
        assert np.array_equal(interpolate(x0, x1, 0.0), x0)
        assert np.array_equal(interpolate(x0, x1, 1.0), x1)

    def test_quarter_point(self):
        x0 = np.zeros((1, 1), dtype=np.float32)
        x1 = np.full((1, 1), 2.0, dtype=np.float32)
        assert np.allclose(interpolate(x0, x1, 0.25), 0.5)

    def test_t_outside_range_rejected(self):
        z = np.zeros((1, 1))
        with pytest.raises(ValueError):
            interpolate(z, z, 1.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            interpolate(np.zeros((2, 1)), np.zeros((3, 1)), 0.5)


class TestFmLoss:
    def _batch(self, n=1):
        traj = np.linspace(-0.5, 0.5, TP * ACTD, dtype=np.float32).reshape(TP, ACTD)
        return [(OBS, traj.copy()) for _ in range(n)]

    def _replay_draws(self, seed, shape, n):
        """Independently reproduce the loss function's stream consumption."""
        s = RngStream(seed)
        x0 = s.normal((n,) + shape)
        t = s.uniform((n,))
        return x0, t

    def test_forced_exact_target_gives_zero_loss(self):
        batch = self._batch(2)
        x1n = np.stack([t for _, t in batch])
        x0, _ = self._replay_draws(3, (TP, ACTD), 2)
        target = np.transpose(x1n - x0, (0, 2, 1))
        model = _ForcedModel("fm", out=target)
        loss = fm_loss(model, batch, RngStream(3))
        assert loss.item() < 1e-12

    def test_forced_zero_output_gives_target_power(self):
        batch = self._batch(2)
        x1n = np.stack([t for _, t in batch])
        x0, _ = self._replay_draws(4, (TP, ACTD), 2)
        model = _ForcedModel("fm")
        loss = fm_loss(model, batch, RngStream(4))
        assert np.isclose(loss.item(), np.mean((x1n - x0) ** 2), atol=1e-6)

    def test_single_element_hand_evaluation(self):
        # 1-element batch, 2x1 trajectory: loss evaluated by replaying the
        # definition (interpolant, target field, squared error) by hand.
        batch = self._batch(1)
        x1n = batch[0][1][None]
        x0, t = self._replay_draws(7, (TP, ACTD), 1)
        xt = t[0] * x1n + (1.0 - t[0]) * x0
        const_out = np.full((1, ACTD, TP), 0.25, dtype=np.float32)
        model = _ForcedModel("fm", out=const_out)
        loss = fm_loss(model, batch, RngStream(7))
        target = np.transpose(x1n - x0, (0, 2, 1))
        by_hand = float(np.mean((const_out - target) ** 2))
        assert np.isclose(loss.item(), by_hand, atol=1e-6)
        # the network must have been fed the interpolant at the drawn t
        assert np.allclose(model.last_input, np.transpose(xt, (0, 2, 1)).astype(np.float32), atol=1e-6)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            fm_loss(_ForcedModel("fm"), [], RngStream(0))

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            fm_loss(_ForcedModel("ddpm", schedule=NoiseSchedule.cosine(16)), self._batch(), RngStream(0))


class TestDdpmForwardSample:
    def test_alpha_bar_extremes(self):
        x0 = np.full((2, 1), 2.0)
        eps = np.ones((2, 1))
        sched_hi = NoiseSchedule(np.array([1e-8]), validate=False)  # ab ~ 1
        assert np.allclose(ddpm_forward_sample(x0, 0, eps, sched_hi), x0, atol=1e-3)
        sched_lo = NoiseSchedule(np.array([1.0 - 1e-9]), validate=False)  # ab ~ 0
        assert np.allclose(ddpm_forward_sample(x0, 0, eps, sched_lo), eps, atol=1e-3)

    def test_closed_formula(self):
        # ab = 0.25: 0.5*2 + sqrt(0.75)*1
        sched = NoiseSchedule(np.array([0.75]), validate=False)
        out = ddpm_forward_sample(np.array([[2.0]]), 0, np.array([[1.0]]), sched)
        assert np.isclose(out[0, 0], 0.5 * 2.0 + np.sqrt(0.75), atol=1e-6)

    def test_index_out_of_range(self):
        sched = NoiseSchedule.cosine(16)
        with pytest.raises(ValueError):
            ddpm_forward_sample(np.zeros((1, 1)), 16, np.zeros((1, 1)), sched)
        with pytest.raises(ValueError):
            ddpm_forward_sample(np.zeros((1, 1)), -1, np.zeros((1, 1)), sched)


class TestDdpmLoss:
    def _batch(self, n=2):
        traj = np.linspace(-0.8, 0.8, TP * ACTD, dtype=np.float32).reshape(TP, ACTD)
        return [(OBS, traj.copy()) for _ in range(n)]

    def test_forced_exact_noise_gives_zero_loss(self):
        batch = self._batch()
        s = RngStream(9)
        k = s.integers(0, 16, (2,))
        eps = s.normal((2, TP, ACTD))
        model = _ForcedModel("ddpm", out=np.transpose(eps, (0, 2, 1)), schedule=NoiseSchedule.cosine(16))
        loss = ddpm_loss(model, batch, RngStream(9))
        assert loss.item() < 1e-12

    def test_forced_zero_output_gives_noise_power(self):
        batch = self._batch()
        s = RngStream(10)
        _ = s.integers(0, 16, (2,))
        eps = s.normal((2, TP, ACTD))
        model = _ForcedModel("ddpm", schedule=NoiseSchedule.cosine(16))
        loss = ddpm_loss(model, batch, RngStream(10))
        assert np.isclose(loss.item(), np.mean(eps**2), atol=1e-6)

    def test_single_element_hand_evaluation(self):
        batch = self._batch(1)
        x1n = batch[0][1][None]
        sched = NoiseSchedule.cosine(16)
        s = RngStream(11)
        k = s.integers(0, 16, (1,))
        eps = s.normal((1, TP, ACTD))
        ab = sched.alpha_bars[k[0]]
        xk = np.sqrt(ab) * x1n + np.sqrt(1.0 - ab) * eps
        const_out = np.full((1, ACTD, TP), -0.1, dtype=np.float32)
        model = _ForcedModel("ddpm", out=const_out, schedule=sched)
        loss = ddpm_loss(model, batch, RngStream(11))
        by_hand = float(np.mean((const_out - np.transpose(eps, (0, 2, 1))) ** 2))
        assert np.isclose(loss.item(), by_hand, atol=1e-6)
        assert np.allclose(model.last_input, np.transpose(xk, (0, 2, 1)).astype(np.float32), atol=1e-5)

    def test_fm_model_rejected(self):
        with pytest.raises(ValueError):
            ddpm_loss(_ForcedModel("fm"), self._batch(), RngStream(0))
