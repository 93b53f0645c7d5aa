#!/usr/bin/env python3
"""
Bag classifier tests: attention pooling against a loop oracle, invariances,
input gradients, toy training and persistence
"""

import numpy as np
import pytest

from src.config import ClassifierConfig
from src.errors import CheckpointError, DatasetError, ShapeError
from src.models.classifier import BagAggregator, ClassifierModel, pad_bags, predicted_labels
from src.tensor import Tensor, finite_difference_check, ops
from src.training.classifier_trainer import LatentDataset, fit
from tests.conftest import tiny_classifier_config


def loop_oracle(E, key, value, query):
    """Attention pooling spelled out with Python loops"""
    k, m = E.shape
    h, d = query.shape
    keys = [[sum(E[i, a] * key[a, j] for a in range(m)) for j in range(d)] for i in range(k)]
    values = [[sum(E[i, a] * value[a, j] for a in range(m)) for j in range(d)] for i in range(k)]
    out = []
    for head in range(h):
        scores = [sum(query[head, j] * keys[i][j] for j in range(d)) for i in range(k)]
        top = max(scores)
        weights = [np.exp(s - top) for s in scores]
        total = sum(weights)
        for j in range(d):
            out.append(sum(weights[i] / total * values[i][j] for i in range(k)))
    return np.array(out)


@pytest.mark.unit
class TestAggregator:
    def test_singleton_bag_copies_value_vector(self, rng):
        print("[TEST] k=1 attention")
        aggregator = BagAggregator(4, 3, 5, rng)
        E = rng.normal(size=(1, 1, 4))
        weights = aggregator.attention(Tensor(E), np.ones((1, 1))).data
        assert np.all(weights == 1.0)
        pooled = aggregator(Tensor(E), np.ones((1, 1))).data[0]
        np.testing.assert_allclose(pooled, np.tile(E[0, 0] @ aggregator.value.data, 5), atol=1e-7)
        print("[OK] every head weight is 1")

    def test_output_length(self, rng):
        model = ClassifierModel(16, ClassifierConfig(heads=8, hidden_size=128, head_hidden=8))
        for k in (1, 3, 9):
            assert model.aggregate(rng.normal(size=(k, 16))).shape == (1024,)

    def test_matches_loop_oracle(self, rng):
        for _ in range(5):
            aggregator = BagAggregator(4, 2, 2, rng)
            E = rng.normal(size=(3, 4))
            pooled = aggregator(Tensor(E[None]), np.ones((1, 3))).data[0]
            expected = loop_oracle(E, aggregator.key.data, aggregator.value.data, aggregator.query.data)
            np.testing.assert_allclose(pooled, expected, rtol=1e-10, atol=1e-12)

    def test_attention_rows_sum_to_one_over_real_instances(self, rng):
        aggregator = BagAggregator(4, 3, 2, rng)
        batch, mask = pad_bags([rng.normal(size=(2, 4)), rng.normal(size=(5, 4))])
        weights = aggregator.attention(Tensor(batch), mask).data
        np.testing.assert_allclose(weights.sum(axis=-1), np.ones((2, 2)), atol=1e-12)
        assert np.all(weights[0, :, 2:] == 0.0)


@pytest.mark.unit
class TestClassify:
    @pytest.fixture
    def model(self):
        return ClassifierModel(4, tiny_classifier_config())

    def test_logits_and_label(self, model, rng):
        logits, label = model.classify(rng.normal(size=(3, 4)))
        assert logits.shape == (2,)
        assert label in (0, 1)

    def test_ties_go_to_benign(self):
        assert predicted_labels(np.array([0.5, 0.5])) == 0
        assert predicted_labels(np.array([0.1, 0.5])) == 1

    def test_permutation_invariance(self, model, rng):
        E = rng.normal(size=(6, 4))
        reference, _ = model.classify(E)
        for _ in range(100):
            permuted, _ = model.classify(E[rng.permutation(6)])
            np.testing.assert_allclose(permuted, reference, atol=1e-6)

    def test_duplication_invariance(self, model, rng):
        E = rng.normal(size=(4, 4))
        np.testing.assert_allclose(model.classify(np.vstack([E, E]))[0], model.classify(E)[0], atol=1e-6)

    def test_padding_does_not_change_logits(self, model, rng):
        bags = [rng.normal(size=(2, 4)), rng.normal(size=(6, 4))]
        together = model.logits_many(bags)
        np.testing.assert_allclose(together[0], model.classify(bags[0])[0], atol=1e-12)

    def test_latent_size_mismatch(self, model, rng):
        with pytest.raises(ShapeError):
            model.classify(rng.normal(size=(3, 5)))

    def test_mean_max_baseline(self, rng):
        model = ClassifierModel(4, tiny_classifier_config(aggregator="mean_max"))
        E = rng.normal(size=(3, 4))
        np.testing.assert_allclose(model.aggregate(E), np.concatenate([E.mean(axis=0), E.max(axis=0)]))
        assert model.classify(E)[0].shape == (2,)


@pytest.mark.unit
class TestInputGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = ClassifierModel(4, tiny_classifier_config(), seed=seed)
        E = rng.normal(size=(3, 4))
        label = int(rng.integers(2))
        loss, gradient = model.input_gradient(E, label)
        assert gradient.shape == E.shape

        inputs = Tensor(E[None].copy(), requires_grad=True)

        def closure():
            return ops.cross_entropy(model.forward(inputs, np.ones((1, 3))), np.array([label]))

        assert closure().item() == pytest.approx(loss)
        assert finite_difference_check(inputs, closure) < 1e-4

    def test_does_not_touch_parameter_gradients(self, rng):
        model = ClassifierModel(4, tiny_classifier_config())
        model.input_gradient(rng.normal(size=(2, 4)), 1)
        assert all(p.grad is None for p in model.parameters())


@pytest.mark.integration
class TestTraining:
    def test_separates_two_blobs(self):
        print("[TEST] two Gaussian blobs, bags of one")
        rng = np.random.default_rng(0)
        labels = np.array([0, 1] * 50)
        latents = [rng.normal(loc=2.0 if y else -2.0, size=(1, 4)) for y in labels]
        config = tiny_classifier_config(epochs=20, batch_size=16, learning_rate=0.01)
        model = ClassifierModel(4, config)
        report = fit(model, LatentDataset(latents, labels), config)
        assert report.final_train_accuracy >= 0.99
        assert len(report.epochs) == 20
        print(f"[OK] train accuracy {report.final_train_accuracy:.3f}")

    def test_single_class_rejected(self, rng):
        config = tiny_classifier_config()
        data = LatentDataset([rng.normal(size=(1, 4)) for _ in range(4)], [1, 1, 1, 1])
        with pytest.raises(DatasetError):
            fit(ClassifierModel(4, config), data, config)


@pytest.mark.unit
class TestPersistence:
    def test_round_trip(self, rng, tmp_path):
        model = ClassifierModel(4, tiny_classifier_config(), seed=9)
        restored = ClassifierModel.load(model.save(tmp_path / "classifier.npz"))
        E = rng.normal(size=(3, 4))
        assert np.array_equal(restored.classify(E)[0], model.classify(E)[0])
        assert restored.latent_size == 4

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "broken.npz"
        path.write_bytes(b"not a zip")
        with pytest.raises(CheckpointError):
            ClassifierModel.load(path)
