"""
Unit tests for fundusnet.training: SGD, sampling, the training loop and grid search
"""

import math

import numpy as np
import pytest
from scipy import stats

from fundusnet.core.ops import softmax
from fundusnet.dataset import stratified_indices, synth_dataset
from fundusnet.errors import ConfigError, EmptyConfigError, NonFiniteError, ShapeError
from fundusnet.metrics import confusion_matrix
from fundusnet.model import LayerParams, Parameters, edlm_compact_spec, init_parameters
from fundusnet.preprocess import EnhanceConfig, enhance_batch
from fundusnet.training import (
    EpochStats,
    Samples,
    TrainConfig,
    TrainHistory,
    evaluate,
    grid_search,
    sgd_step,
    shuffle_epoch,
    train,
    update_sample_weights,
)
from fundusnet.training import trainer
from fundusnet.training.trainer import _epoch_order
from tests.resources import fc_spec, tiny_spec


def scalar_params(weight: float, bias: float = 0.0) -> Parameters:
    return Parameters({0: LayerParams(np.array([[weight]]), np.array([bias]))})


def separable_samples(per_class: int = 10, features: int = 4, seed: int = 0) -> Samples:
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], per_class)
    inputs = rng.normal(0.0, 0.3, size=(2 * per_class, features, 1, 1))
    inputs[:, 0, 0, 0] += np.where(labels == 0, 1.0, -1.0)
    return Samples(inputs.astype(np.float32), labels)


class TestTrainConfig:
    """Test TrainConfig defaults and validation"""

    def test_defaults(self):
        """Test the default training settings"""
        cfg = TrainConfig()
        assert cfg.learning_rate == 0.001
        assert cfg.weight_decay == 5e-5
        assert cfg.batch_size == 1
        assert cfg.sampling_mode == "uniform"
        assert cfg.loss_form == "binary_sum"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": 0.0},
            {"weight_decay": -1.0},
            {"batch_size": 0},
            {"epochs": -1},
            {"sampling_mode": "hard"},
            {"loss_form": "hinge"},
            {"precision": "half"},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that out-of-range settings are refused"""
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_with_overrides_skips_none(self):
        """Test that None overrides leave the setting alone"""
        cfg = TrainConfig().with_overrides(learning_rate=0.01, epochs=None)
        assert cfg.learning_rate == 0.01
        assert cfg.epochs == 20

    def test_loss_alias(self):
        """Test that eq5 is accepted as the binary-sum loss"""
        assert TrainConfig(loss_form="eq5").loss_form == "binary_sum"
        assert TrainConfig.from_dict({"loss_form": "eq5"}) == TrainConfig()

    def test_from_dict_unknown_key(self):
        """Test that an unknown key is refused by name"""
        with pytest.raises(ConfigError, match="momentum"):
            TrainConfig.from_dict({"momentum": 0.9})


class TestSgdStep:
    """Test the parameter update rule"""

    def test_zero_gradient_no_decay(self):
        """Test that a zero gradient without decay changes nothing"""
        params = scalar_params(1.0, 0.5)
        out = sgd_step(params, scalar_params(0.0), 0.1, 0.0)
        assert out.bit_equal(params)

    def test_plain_step(self):
        """Test one step without weight decay"""
        out = sgd_step(scalar_params(1.0), scalar_params(0.5, 0.5), 0.1, 0.0)
        assert out[0].weight[0, 0] == pytest.approx(0.95)
        assert out[0].bias[0] == pytest.approx(-0.05)

    def test_weight_decay(self):
        """Test that decay shrinks weights but not biases"""
        out = sgd_step(scalar_params(1.0, 1.0), scalar_params(0.0), 0.1, 0.1)
        assert out[0].weight[0, 0] == pytest.approx(0.99)
        assert out[0].bias[0] == 1.0

    def test_keeps_dtype(self):
        """Test that single-precision parameters stay single precision"""
        params = init_parameters(tiny_spec(), 0)
        out = sgd_step(params, params, 0.01, 5e-5)
        assert out.dtype == np.float32

    def test_non_finite_gradient(self):
        """Test that a NaN gradient is a non-finite error"""
        with pytest.raises(NonFiniteError):
            sgd_step(scalar_params(1.0), scalar_params(float("nan")), 0.1, 0.0)

    def test_layer_mismatch(self):
        """Test that gradients for other layers are refused"""
        grads = Parameters({1: LayerParams(np.zeros((1, 1)), np.zeros(1))})
        with pytest.raises(ShapeError):
            sgd_step(scalar_params(1.0), grads, 0.1, 0.0)

    def test_shape_mismatch(self):
        """Test that gradients of another shape are refused"""
        grads = Parameters({0: LayerParams(np.zeros((2, 1)), np.zeros(1))})
        with pytest.raises(ShapeError):
            sgd_step(scalar_params(1.0), grads, 0.1, 0.0)


class TestSampling:
    """Test epoch shuffling and loss-proportional sample weights"""

    def test_single_sample(self):
        """Test shuffling a single sample"""
        np.testing.assert_array_equal(shuffle_epoch(1, np.random.default_rng(0)), [0])

    def test_deterministic(self):
        """Test that one generator state gives one permutation"""
        a = shuffle_epoch(50, np.random.default_rng(11))
        b = shuffle_epoch(50, np.random.default_rng(11))
        np.testing.assert_array_equal(a, b)
        assert sorted(a.tolist()) == list(range(50))

    def test_permutations_are_uniform(self):
        """Test that the six orders of three samples are equally frequent"""
        rng = np.random.default_rng(2024)
        counts: dict[tuple, int] = {}
        for _ in range(10000):
            key = tuple(shuffle_epoch(3, rng).tolist())
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 6
        assert stats.chisquare(list(counts.values())).pvalue > 1e-4

    def test_all_permutations_of_four_equally_likely(self):
        """Test that each of the 24 orders of four samples appears with frequency 1/24 +- 0.01"""
        rng = np.random.default_rng(77)
        trials = 24000
        counts: dict[tuple, int] = {}
        for _ in range(trials):
            key = tuple(shuffle_epoch(4, rng).tolist())
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 24
        for n in counts.values():
            assert abs(n / trials - 1 / 24) <= 0.01

    def test_empty(self):
        """Test that an empty epoch is refused"""
        with pytest.raises(ValueError):
            shuffle_epoch(0, np.random.default_rng(0))

    @pytest.mark.parametrize(
        "losses, expected",
        [
            ([1, 1, 1, 1], [0.25, 0.25, 0.25, 0.25]),
            ([3, 1], [0.75, 0.25]),
            ([0, 0, 0], [1 / 3, 1 / 3, 1 / 3]),
        ],
    )
    def test_weights(self, losses, expected):
        """Test sampling weights proportional to loss"""
        np.testing.assert_allclose(update_sample_weights(losses), expected)

    def test_negative_loss(self):
        """Test that a negative loss is refused"""
        with pytest.raises(ValueError):
            update_sample_weights([1.0, -0.5])

    def test_non_finite_loss(self):
        """Test that an infinite loss is a non-finite error"""
        with pytest.raises(NonFiniteError):
            update_sample_weights([1.0, float("inf")])

    def test_balanced_order_alternates_classes(self):
        """Test that balanced batches draw each class equally often"""
        labels = np.array([0] * 9 + [1])
        order = _epoch_order(labels, TrainConfig(balanced_batches=True), np.random.default_rng(0), np.full(10, 0.1))
        assert len(order) == 10
        assert int((labels[order] == 1).sum()) == 5

    def test_informative_order_follows_weights(self):
        """Test that informative sampling draws only weighted samples"""
        weights = np.zeros(5)
        weights[3] = 1.0
        order = _epoch_order(np.zeros(5, dtype=int), TrainConfig(sampling_mode="informative"), np.random.default_rng(0), weights)
        assert order.tolist() == [3] * 5


class TestTrain:
    """Test the training loop"""

    def test_zero_epochs_returns_initial_parameters(self):
        """Test that zero epochs return the seeded initial parameters"""
        spec = tiny_spec()
        data = Samples(np.zeros((2, 6, 6, 1), dtype=np.float32), np.array([0, 1]))
        params, history = train(data, spec, TrainConfig(epochs=0, seed=5))
        assert params.bit_equal(init_parameters(spec, 5))
        assert len(history) == 0

    def test_single_step_closed_form(self):
        """Test one categorical SGD step against its closed form"""
        spec = fc_spec(3, 2)
        x = np.array([0.5, -1.0, 2.0]).reshape(3, 1, 1)
        data = Samples(x[None], np.array([1]))
        cfg = TrainConfig(
            learning_rate=0.1, weight_decay=0.0, epochs=1, seed=3, loss_form="categorical", precision="double"
        )
        params, history = train(data, spec, cfg)

        start = init_parameters(spec, 3, "double")
        s = softmax(x.reshape(-1) @ start[1].weight + start[1].bias)
        delta = s - np.array([0.0, 1.0])
        np.testing.assert_allclose(params[1].weight, start[1].weight - 0.1 * np.outer(x.reshape(-1), delta), atol=1e-12)
        np.testing.assert_allclose(params[1].bias, start[1].bias - 0.1 * delta, atol=1e-12)
        assert history.losses[0] == pytest.approx(-np.log(s[1]))

    @pytest.mark.parametrize("sampling", ["uniform", "informative"])
    def test_deterministic(self, sampling):
        """Test that training is reproducible in every sampling mode"""
        data = separable_samples(per_class=4)
        spec = fc_spec(4, 2)
        cfg = TrainConfig(learning_rate=0.05, epochs=3, batch_size=2, seed=8, sampling_mode=sampling)
        a_params, a_hist = train(data, spec, cfg)
        b_params, b_hist = train(data, spec, cfg)
        assert a_params.bit_equal(b_params)
        assert a_hist == b_hist

    def test_history_and_callback(self):
        """Test that each epoch is recorded and reported"""
        seen: list[EpochStats] = []
        _, history = train(separable_samples(), fc_spec(4, 2), TrainConfig(learning_rate=0.1, epochs=4), on_epoch=seen.append)
        assert [e.epoch for e in history.epochs] == [1, 2, 3, 4]
        assert seen == history.epochs
        assert all(0.0 <= a <= 1.0 for a in history.accuracies)
        assert history.losses[-1] < history.losses[0]
        assert history.to_jsonl().count("\n") == 4

    def test_learns_separable_data(self):
        """Test that a linearly separable set is learned"""
        data = separable_samples(per_class=20)
        spec = fc_spec(4, 2)
        params, _ = train(data, spec, TrainConfig(learning_rate=0.1, epochs=10, balanced_batches=True))
        assert evaluate(spec, params, data).accuracy() >= 0.9

    def test_loss_non_increasing_over_twenty_epochs(self):
        """Test that full-batch training lowers the epoch loss at least 18 times in 20 epochs"""
        data = separable_samples(per_class=10)
        cfg = TrainConfig(learning_rate=0.1, weight_decay=0.0, batch_size=len(data), epochs=20, precision="double")
        _, history = train(data, fc_spec(4, 2), cfg)
        losses = history.losses
        assert len(losses) == 20
        steps = sum(b <= a for a, b in zip(losses, losses[1:]))
        assert steps >= 18
        assert losses[-1] < losses[0]

    @pytest.mark.parametrize("loss_form", ["binary_sum", "categorical"])
    def test_single_precision_compact_network_stays_finite(self, loss_form):
        """Test that a saturated float32 compact network yields finite losses and gradients"""
        synth = synth_dataset(2, 64, seed=7)
        data = Samples.from_images(synth.images, synth.grades)
        spec = edlm_compact_spec((64, 64, 3), 5)
        _, history = train(data, spec, TrainConfig(epochs=1, seed=0, loss_form=loss_form))
        assert len(history) == 1
        assert all(math.isfinite(loss) for loss in history.losses)

    def test_non_finite_input(self):
        """Test that NaN inputs stop training with the epoch and batch"""
        data = Samples(np.full((2, 3, 1, 1), np.nan, dtype=np.float32), np.array([0, 1]))
        with pytest.raises(NonFiniteError) as info:
            train(data, fc_spec(3, 2), TrainConfig(epochs=1))
        assert info.value.epoch == 1
        assert info.value.batch == 1

    def test_label_out_of_range(self):
        """Test that a label beyond the class count is refused"""
        data = Samples(np.zeros((1, 3, 1, 1), dtype=np.float32), np.array([2]))
        with pytest.raises(ValueError):
            train(data, fc_spec(3, 2), TrainConfig(epochs=1))

    def test_empty_dataset(self):
        """Test that an empty dataset is refused"""
        data = Samples(np.zeros((0, 3, 1, 1), dtype=np.float32), np.zeros(0, dtype=np.int64))
        with pytest.raises(ShapeError):
            train(data, fc_spec(3, 2), TrainConfig(epochs=1))

    def test_samples_validation(self):
        """Test that inputs and labels must have equal length"""
        with pytest.raises(ShapeError):
            Samples(np.zeros((2, 3, 1, 1)), np.array([0]))

    def test_samples_from_images(self):
        """Test that images become scaled inputs of the requested precision"""
        images = [np.full((4, 4, 3), 255, dtype=np.uint8), np.zeros((4, 4, 3), dtype=np.uint8)]
        samples = Samples.from_images(images, [1, 0], "double")
        assert samples.inputs.shape == (2, 4, 4, 3)
        assert samples.inputs.dtype == np.float64
        assert samples.inputs[0].max() == 1.0
        np.testing.assert_array_equal(samples.subset([1]).labels, [0])

    def test_epoch_stats_ignore_timing(self):
        """Test that epoch timing is left out of comparisons"""
        assert EpochStats(1, 0.5, 0.5, seconds=1.0) == EpochStats(1, 0.5, 0.5, seconds=2.0)
        assert TrainHistory().to_jsonl() == ""


class TestGridSearch:
    """Test hyper-parameter selection"""

    def _fixed_scores(self, monkeypatch, diverging_lr=None):
        def fake_train(dataset, spec, config, on_epoch=None):
            if config.learning_rate == diverging_lr:
                raise NonFiniteError("non-finite loss", 1, 1)
            return None, TrainHistory()

        def fake_evaluate(spec, params, dataset):
            return confusion_matrix([0, 1, 1, 0], [0, 1, 0, 0], classes=2)

        monkeypatch.setattr(trainer, "train", fake_train)
        monkeypatch.setattr(trainer, "evaluate", fake_evaluate)

    def test_empty_list(self):
        """Test that an empty grid is refused"""
        with pytest.raises(EmptyConfigError):
            grid_search([], separable_samples(), 0.2, fc_spec(4, 2))

    def test_single_config(self):
        """Test a grid of one config"""
        cfg = TrainConfig(learning_rate=0.1, epochs=2)
        best, rows = grid_search([cfg], separable_samples(), 0.2, fc_spec(4, 2))
        assert best == cfg
        assert len(rows) == 1
        assert rows[0].macro_f is not None

    def test_tie_goes_to_first(self, monkeypatch):
        """Test that equal scores pick the lower index"""
        self._fixed_scores(monkeypatch)
        configs = [TrainConfig(learning_rate=0.01), TrainConfig(learning_rate=0.02)]
        best, rows = grid_search(configs, separable_samples(), 0.2, fc_spec(4, 2))
        assert best is configs[0]
        assert rows[0].macro_f == rows[1].macro_f

    def test_diverged_config_skipped(self, monkeypatch):
        """Test that a diverging config scores nothing and is not chosen"""
        self._fixed_scores(monkeypatch, diverging_lr=100.0)
        configs = [TrainConfig(learning_rate=100.0), TrainConfig(learning_rate=0.001)]
        best, rows = grid_search(configs, separable_samples(), 0.2, fc_spec(4, 2))
        assert best is configs[1]
        assert rows[0].diverged and rows[0].macro_f is None
        assert rows[1].to_dict()["config"]["learning_rate"] == 0.001

    def test_overflowing_rate_loses_to_a_sane_one(self):
        """Test real training: a float32-overflowing rate diverges and the other config wins"""
        configs = [
            TrainConfig(learning_rate=1e39, epochs=2, seed=1),
            TrainConfig(learning_rate=0.1, epochs=5, seed=1),
        ]
        best, rows = grid_search(configs, separable_samples(per_class=20), 0.2, fc_spec(4, 2), seed=4)
        assert best is configs[1]
        assert rows[0].diverged
        assert rows[0].macro_f is None and rows[0].accuracy is None
        assert rows[1].macro_f is not None


@pytest.mark.slow
class TestDeskScale:
    """Test convergence of the compact network on the synthetic lesion dataset"""

    def test_compact_network_fits_and_generalises(self):
        """Test >= 95% training and >= 70% held-out accuracy after 20 epochs at 64x64"""
        synth = synth_dataset(100, 64, seed=7)
        images = enhance_batch(synth.images, EnhanceConfig())
        data = Samples.from_images(images, synth.grades)
        train_idx, test_idx = stratified_indices(data.labels, 0.2, seed=7)
        train_set, test_set = data.subset(train_idx), data.subset(test_idx)
        spec = edlm_compact_spec((64, 64, 3), 5)

        params, history = train(train_set, spec, TrainConfig(learning_rate=0.001, weight_decay=5e-5, epochs=20, seed=7))
        assert all(math.isfinite(loss) for loss in history.losses)
        assert evaluate(spec, params, train_set).accuracy() >= 0.95
        assert evaluate(spec, params, test_set).accuracy() >= 0.70

    def test_grid_prefers_small_rate_over_divergent_one(self):
        """Test that lr 0.001 is selected over lr 100 on the synthetic dataset"""
        synth = synth_dataset(20, 64, seed=7)
        data = Samples.from_images(synth.images, synth.grades)
        configs = [TrainConfig(learning_rate=0.001, epochs=5), TrainConfig(learning_rate=100.0, epochs=5)]
        best, rows = grid_search(configs, data, 0.2, edlm_compact_spec((64, 64, 3), 5), seed=7)
        assert best is configs[0]
        assert rows[0].macro_f is not None
        assert rows[1].diverged or (rows[1].macro_f or 0.0) < rows[0].macro_f
