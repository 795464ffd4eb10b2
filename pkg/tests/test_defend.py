"""
Nopeek, embedding obfuscation and gradient DP.
"""

import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform
from scipy.stats import spearmanr

from src.autodiff import Tensor, backward
from src.autodiff.gradcheck import numerical_gradient, relative_error
from src.defend import (
    DefenseConfig,
    DefensePipeline,
    dcor,
    dcor_tensor,
    dp_laplace_gradients,
    nopeek_loss,
    obfuscate_embeddings,
)
from src.defend.defenses import clip_l1_rows
from src.errors import ConfigError, ContractError


class TestDistanceCorrelation:

    def test_identical_is_one(self, rng):
        x = rng.normal(size=(30, 3))
        assert dcor(x, x) == pytest.approx(1.0)

    def test_invariant_to_scale_and_shift(self, rng):
        x = rng.normal(size=(30, 3))
        h = rng.normal(size=(30, 2))
        assert dcor(x, h) == pytest.approx(dcor(5.0 * x + 2.0, h))

    def test_independent_is_small(self, rng):
        assert dcor(rng.normal(size=(400, 3)), rng.normal(size=(400, 3))) < 0.2

    def test_nonlinear_dependence(self, rng):
        x = rng.normal(size=(200, 1))
        y = np.hstack([x ** 2, np.zeros_like(x)])
        assert dcor(np.hstack([x, x]), y) > 0.3

    def test_constant_side_is_zero(self, rng):
        assert dcor(rng.normal(size=(10, 2)), np.ones((10, 2))) == 0.0

    def test_matches_pairwise_distance_oracle(self, rng):
        x = rng.normal(size=(25, 3))
        h = x[:, :2] ** 2 + 0.5 * rng.normal(size=(25, 2))

        def centered(m):
            d = squareform(pdist(m))
            return d - d.mean(axis=0) - d.mean(axis=1)[:, None] + d.mean()

        a, b = centered(x), centered(h)
        expected = np.sqrt((a * b).mean() / np.sqrt((a * a).mean() * (b * b).mean()))
        assert dcor(x, h) == pytest.approx(expected, rel=1e-9)

    def test_invariant_under_rotation(self, rng):
        x = rng.normal(size=(30, 4))
        h = np.tanh(x[:, :3]) + 0.3 * rng.normal(size=(30, 3))
        rx = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        rh = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        assert dcor(x @ rx, h @ rh) == pytest.approx(dcor(x, h), abs=1e-9)

    def test_needs_three_rows(self, rng):
        with pytest.raises(ContractError):
            dcor(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)))

    def test_gradient_matches_finite_differences(self, rng):
        x = rng.normal(size=(6, 3))
        h = rng.normal(size=(6, 2))
        tensor = Tensor(h, requires_grad=True)
        grads = backward(dcor_tensor(x, tensor))
        numeric = numerical_gradient(lambda: dcor_tensor(x, h).item(), h)
        assert relative_error(grads[tensor], numeric) < 1e-5


class TestNopeek:

    def test_alpha_zero_is_task_loss(self, rng):
        task = Tensor(2.5)
        assert nopeek_loss(task, rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), 0.0) is task

    def test_alpha_one_is_dcor(self, rng):
        x, h = rng.normal(size=(8, 2)), rng.normal(size=(8, 2))
        assert nopeek_loss(Tensor(9.0), x, h, 1.0).item() == pytest.approx(dcor(x, h))

    def test_mix(self, rng):
        x, h = rng.normal(size=(8, 2)), rng.normal(size=(8, 2))
        value = nopeek_loss(Tensor(2.0), x, h, 0.25).item()
        assert value == pytest.approx(0.25 * dcor(x, h) + 0.75 * 2.0)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_alpha_range(self, rng, alpha):
        with pytest.raises(ConfigError):
            nopeek_loss(Tensor(1.0), rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), alpha)


class TestNoise:

    def test_zero_sigma_is_identity(self, rng):
        h = rng.normal(size=(4, 3))
        np.testing.assert_array_equal(obfuscate_embeddings(h, 0.0, seed=1), h)

    def test_sigma_sets_noise_scale(self, rng):
        h = np.zeros((200, 10))
        assert np.std(obfuscate_embeddings(h, 0.3, seed=1)) == pytest.approx(0.3, rel=0.05)

    def test_seeded(self):
        h = np.zeros((3, 3))
        np.testing.assert_array_equal(obfuscate_embeddings(h, 1.0, 4), obfuscate_embeddings(h, 1.0, 4))

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            obfuscate_embeddings(np.zeros((2, 2)), -1.0, 0)

    def test_l1_clip(self):
        g = np.array([[3.0, -1.0], [0.1, 0.1], [0.0, 0.0]])
        clipped = clip_l1_rows(g, 1.0)
        np.testing.assert_allclose(np.abs(clipped).sum(axis=1), [1.0, 0.2, 0.0])
        np.testing.assert_allclose(clipped[0], [0.75, -0.25])

    def test_infinite_epsilon_only_clips(self, rng):
        g = rng.normal(size=(20, 4))
        np.testing.assert_array_equal(dp_laplace_gradients(g, math.inf, 0.5, seed=0), clip_l1_rows(g, 0.5))

    def test_laplace_scale(self):
        noisy = dp_laplace_gradients(np.zeros((500, 20)), epsilon=2.0, clip=1.0, seed=3)
        # Laplace(0, b) has variance 2 b^2
        assert np.var(noisy) == pytest.approx(2 * 0.5 ** 2, rel=0.1)

    def test_smaller_epsilon_means_more_noise(self, rng):
        g = rng.normal(size=(200, 8))
        epsilons = [0.5, 1.0, 2.0, 5.0, 10.0]
        deviation = [np.abs(dp_laplace_gradients(g, eps, 1.0, seed=0) - clip_l1_rows(g, 1.0)).mean()
                     for eps in epsilons]
        rho, _ = spearmanr(epsilons, deviation)
        assert rho == pytest.approx(-1.0)

    def test_bad_epsilon(self):
        with pytest.raises(ConfigError):
            dp_laplace_gradients(np.zeros((2, 2)), 0.0, 1.0, 0)


class TestPipeline:

    def test_config_validation(self):
        errors = DefenseConfig(nopeek_alpha=2.0, noise_sigma=-1.0, dp_epsilon=0.0, dp_clip=0.0).validate()
        assert len(errors) == 4
        with pytest.raises(ConfigError):
            DefensePipeline(DefenseConfig(noise_sigma=-1.0), np.random.default_rng(0))

    def test_config_rejects_wrong_types(self):
        errors = DefenseConfig(nopeek_alpha="half", noise_sigma=None, dp_epsilon="small",
                               dp_clip=True, seed=1.5).validate()
        assert len(errors) == 5
        assert all("got" in message for message in errors)

    def test_enabled(self):
        assert DefenseConfig().enabled == []
        assert DefenseConfig(nopeek_alpha=0.5, noise_sigma=0.1, dp_epsilon=1.0).enabled == [
            "nopeek", "obfuscation", "dp_laplace"]

    def test_disabled_pipeline_passes_through(self, rng):
        pipeline = DefensePipeline(DefenseConfig(), rng)
        g = rng.normal(size=(3, 2))
        assert pipeline.on_download(g) is g
        assert pipeline.on_upload(g) is g

    def test_surrogate_gradient_is_received_gradient(self, rng):
        pipeline = DefensePipeline(DefenseConfig(), rng)
        h = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        received = rng.normal(size=(4, 3))
        grads = backward(pipeline.local_loss(h, received, rng.normal(size=(4, 2))))
        np.testing.assert_allclose(grads[h], received)

    def test_nopeek_skipped_for_tiny_batches(self, rng):
        pipeline = DefensePipeline(DefenseConfig(nopeek_alpha=0.5), rng)
        h = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        received = np.ones((2, 3))
        grads = backward(pipeline.local_loss(h, received, rng.normal(size=(2, 2))))
        np.testing.assert_allclose(grads[h], received)

    def test_config_seed_overrides_stream(self):
        config = DefenseConfig(noise_sigma=1.0, seed=11)
        a = DefensePipeline(config, np.random.default_rng(1)).on_upload(np.zeros((2, 2)))
        b = DefensePipeline(config, np.random.default_rng(2)).on_upload(np.zeros((2, 2)))
        np.testing.assert_array_equal(a, b)
