import json
import math
from pathlib import Path

import numpy as np
import pytest

from softstep.activations import SigmoidParams, SsfParams
from softstep.network import (
    CheckpointFormatError,
    CheckpointShapeError,
    DropoutMask,
    Gradients,
    HeadConfig,
    HeadNetwork,
    backward,
    forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from softstep.seeding import derive_rng
from softstep.training import soft_cross_entropy, soft_cross_entropy_gradient

from conftest import zero_network

FIXTURES = Path(__file__).parent / "fixtures"


def end_to_end_loss(net, features, target, clamp_eps=1e-7):
    prediction, _ = forward(net, features)
    return soft_cross_entropy(prediction, target, clamp_eps)


def analytic_gradients(net, features, target, clamp_eps=1e-7):
    prediction, cache = forward(net, features)
    upstream = soft_cross_entropy_gradient(prediction, target, clamp_eps)
    return backward(net, cache, upstream)


def finite_difference_gradients(net, features, target, h):
    """Central differences of the end-to-end loss over every parameter."""
    grads = Gradients.zeros(net.config)
    for name in ("w1", "b1", "w2"):
        param = getattr(net, name)
        grad = getattr(grads, name)
        iterator = np.nditer(param, flags=["multi_index"])
        for _ in iterator:
            index = iterator.multi_index
            original = param[index]
            param[index] = original + h
            up = end_to_end_loss(net, features, target)
            param[index] = original - h
            down = end_to_end_loss(net, features, target)
            param[index] = original
            grad[index] = (up - down) / (2.0 * h)
    original = net.b2
    net.b2 = original + h
    up = end_to_end_loss(net, features, target)
    net.b2 = original - h
    down = end_to_end_loss(net, features, target)
    net.b2 = original
    grads.b2 = (up - down) / (2.0 * h)
    return grads


def assert_gradients_close(analytic, numeric, rel):
    for name in ("w1", "b1", "w2", "b2"):
        got = np.atleast_1d(getattr(analytic, name)).ravel()
        expected = np.atleast_1d(getattr(numeric, name)).ravel()
        for g, e in zip(got, expected):
            assert abs(g - e) / max(1.0, abs(g)) < rel, f"{name}: analytic={g} fd={e}"


class TestInit:
    def test_biases_are_exactly_zero(self):
        net = init_network(HeadConfig(input_dim=4, hidden_width=20), seed=42)
        assert np.all(net.b1 == 0.0)
        assert net.b2 == 0.0

    def test_deterministic_per_seed(self):
        config = HeadConfig(input_dim=8, hidden_width=5)
        first = init_network(config, seed=7)
        second = init_network(config, seed=7)
        assert np.array_equal(first.w1, second.w1)
        assert np.array_equal(first.w2, second.w2)
        other = init_network(config, seed=8)
        assert not np.array_equal(first.w1, other.w1)

    def test_uniform_bounds_from_fan_in_and_out(self):
        net = init_network(HeadConfig(input_dim=16384, hidden_width=20), seed=3)
        bound1 = math.sqrt(6.0 / (16384 + 20))
        assert np.all(np.abs(net.w1) < bound1)
        bound2 = math.sqrt(6.0 / (20 + 1))
        assert np.all(np.abs(net.w2) < bound2)
        assert net.w1.shape == (20, 16384)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HeadConfig(input_dim=0)
        with pytest.raises(ValueError):
            HeadConfig(input_dim=4, dropout1=1.0)
        with pytest.raises(ValueError):
            HeadConfig(input_dim=4, output_activation="sigmoid")


class TestForward:
    def test_zero_network_sigmoid_outputs_half(self):
        net = zero_network(SigmoidParams())
        prediction, _ = forward(net, np.zeros(4))
        assert prediction == 0.5

    def test_zero_network_ssf_outputs_zero(self):
        net = zero_network(SsfParams(a=3, theta=0.05))
        prediction, _ = forward(net, np.zeros(4))
        assert prediction == 0.0

    def test_eval_forward_ignores_dropout_seeds(self, rng):
        config = HeadConfig(input_dim=6, hidden_width=4)
        net = init_network(config, seed=1)
        x = rng.uniform(-1, 1, size=6)
        # draw a few masks in between; the eval path must not care
        first, _ = forward(net, x)
        DropoutMask.for_example(config, seed=11, epoch=1, batch_index=0, example_index=0)
        DropoutMask.for_example(config, seed=99, epoch=2, batch_index=5, example_index=3)
        second, _ = forward(net, x)
        assert first == second

    def test_train_mode_masks_differ_by_coordinates(self):
        config = HeadConfig(input_dim=64, hidden_width=32)
        mask_a = DropoutMask.for_example(config, seed=1, epoch=1, batch_index=0, example_index=0)
        mask_b = DropoutMask.for_example(config, seed=1, epoch=1, batch_index=0, example_index=1)
        mask_a_again = DropoutMask.for_example(config, seed=1, epoch=1, batch_index=0, example_index=0)
        assert not np.array_equal(mask_a.input_mask, mask_b.input_mask)
        assert np.array_equal(mask_a.input_mask, mask_a_again.input_mask)
        assert np.array_equal(mask_a.hidden_mask, mask_a_again.hidden_mask)

    def test_mask_values_are_scaled_keeps(self):
        config = HeadConfig(input_dim=1000, hidden_width=10, dropout1=0.2, dropout2=0.15)
        mask = DropoutMask.sample(config, derive_rng(5))
        assert set(np.unique(mask.input_mask)) <= {0.0, 1.0 / 0.8}
        assert set(np.unique(mask.hidden_mask)) <= {0.0, 1.0 / 0.85}

    def test_dimension_mismatch(self):
        net = zero_network(SigmoidParams())
        with pytest.raises(ValueError):
            forward(net, np.zeros(5))

    def test_non_finite_features(self):
        net = zero_network(SigmoidParams())
        with pytest.raises(ValueError):
            forward(net, np.array([0.0, np.nan, 0.0, 0.0]))


class TestBackward:
    def _small_net(self, activation, bias2):
        config = HeadConfig(
            input_dim=3, hidden_width=2, dropout1=0.0, dropout2=0.0, output_activation=activation
        )
        net = init_network(config, seed=13)
        net.b1 = np.array([0.11, -0.07])
        net.b2 = bias2
        return net

    def test_zero_upstream_gives_zero_gradients(self, rng):
        net = self._small_net(SigmoidParams(), 0.2)
        x = rng.uniform(-1, 1, size=3)
        _, cache = forward(net, x)
        grads = backward(net, cache, 0.0)
        assert np.all(grads.w1 == 0.0) and np.all(grads.b1 == 0.0)
        assert np.all(grads.w2 == 0.0) and grads.b2 == 0.0

    def test_linearity_in_upstream_gradient(self, rng):
        net = self._small_net(SigmoidParams(), 0.2)
        x = rng.uniform(-1, 1, size=3)
        _, cache = forward(net, x)
        single = backward(net, cache, 1.3)
        double = backward(net, cache, 2.6)
        np.testing.assert_allclose(double.w1, 2.0 * single.w1, rtol=1e-14)
        np.testing.assert_allclose(double.w2, 2.0 * single.w2, rtol=1e-14)
        assert double.b2 == pytest.approx(2.0 * single.b2, rel=1e-14)

    @pytest.mark.parametrize(
        "activation,bias2",
        [(SigmoidParams(), 0.3), (SsfParams(a=3, theta=0.05), 0.5)],
        ids=["sigmoid", "ssf"],
    )
    def test_fixed_tiny_network_matches_finite_differences(self, activation, bias2):
        # bias2 parks the ssf pre-activation mid-segment, away from the kinks
        net = self._small_net(activation, bias2)
        x = np.array([0.4, -0.9, 0.7])
        _, cache = forward(net, x)
        assert np.all(np.abs(cache.z1) > 1e-3)
        if isinstance(activation, SsfParams):
            kinks = np.arange(activation.a + 1) / activation.a
            assert np.min(np.abs(cache.z2 - kinks)) > 1e-3
        analytic = analytic_gradients(net, x, target=0.8)
        numeric = finite_difference_gradients(net, x, target=0.8, h=1e-6)
        assert_gradients_close(analytic, numeric, rel=1e-5)

    @pytest.mark.parametrize(
        "activation",
        [SigmoidParams(), SsfParams(a=3, theta=0.05)],
        ids=["sigmoid", "ssf"],
    )
    def test_random_networks_match_finite_differences(self, activation):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 20:
            config = HeadConfig(
                input_dim=3, hidden_width=2, dropout1=0.0, dropout2=0.0, output_activation=activation
            )
            net = init_network(config, seed=int(rng.integers(2**31)))
            net.b1 = rng.uniform(-0.5, 0.5, size=2)
            net.b2 = float(rng.uniform(-0.5, 1.5))
            x = rng.uniform(-1.0, 1.0, size=3)
            target = float(rng.uniform(0.0, 1.0))
            _, cache = forward(net, x)
            if np.any(np.abs(cache.z1) < 1e-3):
                continue
            if isinstance(activation, SsfParams):
                kinks = np.arange(activation.a + 1) / activation.a
                if np.min(np.abs(cache.z2 - kinks)) < 1e-3:
                    continue
            prediction, _ = forward(net, x)
            if abs(prediction - 1e-7) < 1e-3 or abs(prediction - (1 - 1e-7)) < 1e-3:
                continue  # keep the loss clamp boundary out of the difference stencil
            analytic = analytic_gradients(net, x, target)
            numeric = finite_difference_gradients(net, x, target, h=1e-5)
            assert_gradients_close(analytic, numeric, rel=1e-4)
            checked += 1


class TestDropoutExpectation:
    def test_hidden_dropout_is_unbiased(self, rng):
        config = HeadConfig(input_dim=6, hidden_width=20, dropout1=0.0, dropout2=0.15)
        net = init_network(config, seed=5)
        net.b1 = rng.uniform(-0.3, 0.6, size=20)
        x = rng.uniform(-1.0, 1.0, size=6)
        _, eval_cache = forward(net, x)
        eval_hidden = eval_cache.hidden_dropped

        draws = 10_000
        mask_rng = derive_rng(77)
        samples = np.empty((draws, 20))
        for i in range(draws):
            mask = DropoutMask.sample(config, mask_rng)
            _, cache = forward(net, x, mask)
            samples[i] = cache.hidden_dropped
        mean = samples.mean(axis=0)
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(draws)
        for j in range(20):
            if stderr[j] == 0.0:
                assert mean[j] == eval_hidden[j]
            else:
                assert abs(mean[j] - eval_hidden[j]) <= 3.0 * stderr[j]

    def test_input_dropout_is_unbiased_before_the_nonlinearity(self, rng):
        config = HeadConfig(input_dim=30, hidden_width=8, dropout1=0.2, dropout2=0.0)
        net = init_network(config, seed=6)
        x = rng.uniform(-1.0, 1.0, size=30)
        eval_z1 = net.w1 @ x + net.b1

        draws = 10_000
        mask_rng = derive_rng(78)
        samples = np.empty((draws, 8))
        for i in range(draws):
            mask = DropoutMask.sample(config, mask_rng)
            samples[i] = net.w1 @ (x * mask.input_mask) + net.b1
        mean = samples.mean(axis=0)
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(draws)
        for j in range(8):
            assert abs(mean[j] - eval_z1[j]) <= 3.0 * stderr[j]


class TestCheckpoint:
    def _net(self):
        config = HeadConfig(
            input_dim=5, hidden_width=3, output_activation=SsfParams(a=4, theta=0.1)
        )
        return init_network(config, seed=21)

    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        net = self._net()
        path = tmp_path / "checkpoint.json"
        save_checkpoint(net, path, epoch=9, validation_loss=0.125, seed=21)
        loaded = load_checkpoint(path)
        assert np.array_equal(loaded.network.w1, net.w1)
        assert np.array_equal(loaded.network.b1, net.b1)
        assert np.array_equal(loaded.network.w2, net.w2)
        assert loaded.network.b2 == net.b2
        assert loaded.network.config == net.config
        assert (loaded.epoch, loaded.validation_loss, loaded.seed) == (9, 0.125, 21)
        x = rng.uniform(-1, 1, size=5)
        assert forward(loaded.network, x)[0] == forward(net, x)[0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_wrong_version(self, tmp_path):
        net = self._net()
        path = tmp_path / "checkpoint.json"
        save_checkpoint(net, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_truncated_weight_vector(self, tmp_path):
        net = self._net()
        path = tmp_path / "checkpoint.json"
        save_checkpoint(net, path)
        doc = json.loads(path.read_text())
        doc["weights"]["b1"] = doc["weights"]["b1"][:-1]
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointShapeError):
            load_checkpoint(path)

    def test_ragged_weight_matrix(self, tmp_path):
        net = self._net()
        path = tmp_path / "checkpoint.json"
        save_checkpoint(net, path)
        doc = json.loads(path.read_text())
        doc["weights"]["w1"][0] = doc["weights"]["w1"][0][:-2]
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointShapeError):
            load_checkpoint(path)

    def test_non_finite_weight(self, tmp_path):
        net = self._net()
        path = tmp_path / "checkpoint.json"
        save_checkpoint(net, path)
        text = path.read_text().replace(repr(float(net.w2[0])), "NaN", 1)
        path.write_text(text)
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(path)

    def test_regression_fixture(self):
        """Frozen prediction of a frozen checkpoint must never drift."""
        loaded = load_checkpoint(FIXTURES / "regression_checkpoint.json")
        case = json.loads((FIXTURES / "regression_case.json").read_text())
        prediction, _ = forward(loaded.network, np.array(case["input"]))
        assert prediction == pytest.approx(case["expected_output"], abs=1e-12)
