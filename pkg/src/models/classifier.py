"""
Multiple-instance classifier over bags of latent string vectors.

A bag arrives as a matrix E (k x m) of instance latents. The attention
aggregator projects keys and values, scores every instance against h learned
queries, normalises each query row over the instances and flattens the h
weighted value sums into one vector of size h*d. A one-hidden-layer head maps
that vector to two logits (benign, malicious).
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from ..config import ClassifierConfig
from ..data.dataset import BENIGN, MALICIOUS
from ..errors import ShapeError
from ..tensor import Module, Tensor, glorot_uniform, grad, no_grad, ops, parameter
from ..tensor.tensor import DTYPE
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Linear

MODEL_KIND = "classifier"
MASK_PENALTY = 1e30


def pad_bags(bags: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack (k_i, m) bags into (B, k_max, m) plus a (B, k_max) instance mask"""
    if not bags:
        raise ShapeError("pad_bags", detail="no bags")
    widths = {np.shape(b)[-1] for b in bags}
    if len(widths) != 1 or any(np.ndim(b) != 2 or len(b) == 0 for b in bags):
        raise ShapeError("pad_bags", *[np.shape(b) for b in bags], detail="bags must be non-empty k x m matrices")
    k_max = max(len(b) for b in bags)
    batch = np.zeros((len(bags), k_max, widths.pop()), dtype=DTYPE)
    mask = np.zeros((len(bags), k_max), dtype=DTYPE)
    for i, bag in enumerate(bags):
        batch[i, :len(bag)] = bag
        mask[i, :len(bag)] = 1.0
    return batch, mask


def predicted_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax over (benign, malicious); ties go to benign"""
    return np.where(logits[..., MALICIOUS] > logits[..., BENIGN], MALICIOUS, BENIGN)


class BagAggregator(Module):
    """Multi-head attention pooling with learned queries"""

    def __init__(self, latent_size: int, hidden_size: int, heads: int, rng: np.random.Generator):
        self.latent_size = latent_size
        self.hidden_size = hidden_size
        self.heads = heads
        self.key = parameter(glorot_uniform(rng, latent_size, hidden_size))
        self.value = parameter(glorot_uniform(rng, latent_size, hidden_size))
        self.query = parameter(glorot_uniform(rng, heads, hidden_size))

    @property
    def output_size(self) -> int:
        return self.heads * self.hidden_size

    def attention(self, E: Tensor, mask: np.ndarray) -> Tensor:
        """(B, h, k) weights; each row sums to one over the bag's real instances"""
        keys = ops.matmul(E, self.key)
        scores = ops.matmul(self.query, ops.swapaxes(keys, -1, -2))
        penalty = ((mask - 1.0) * MASK_PENALTY)[:, None, :]
        return ops.softmax(ops.add(scores, penalty), axis=-1)

    def __call__(self, E: Tensor, mask: np.ndarray) -> Tensor:
        values = ops.matmul(E, self.value)
        pooled = ops.matmul(self.attention(E, mask), values)
        return ops.reshape(pooled, (E.shape[0], self.output_size))


class MeanMaxAggregator(Module):
    """Baseline pooling: elementwise mean and max over instances, concatenated"""

    def __init__(self, latent_size: int):
        self.latent_size = latent_size

    @property
    def output_size(self) -> int:
        return 2 * self.latent_size

    def __call__(self, E: Tensor, mask: np.ndarray) -> Tensor:
        weights = (mask / mask.sum(axis=1, keepdims=True))[..., None]
        mean = ops.sum(ops.mul(E, weights), axis=1)
        maximum = ops.max(ops.add(E, ((mask - 1.0) * MASK_PENALTY)[..., None]), axis=1)
        return ops.concat([mean, maximum], axis=-1)


class ClassifierModel(Module):
    def __init__(self, latent_size: int, config: ClassifierConfig, seed: Optional[int] = None):
        self.config = config
        self.latent_size = latent_size
        rng = np.random.default_rng(config.seed if seed is None else seed)
        if config.aggregator == "mean_max":
            self.aggregator = MeanMaxAggregator(latent_size)
        else:
            self.aggregator = BagAggregator(latent_size, config.hidden_size, config.heads, rng)
        self.hidden = Linear(self.aggregator.output_size, config.head_hidden, rng)
        self.output = Linear(config.head_hidden, 2, rng)

    def _check(self, E: np.ndarray) -> None:
        if E.shape[-1] != self.latent_size:
            raise ShapeError("classify", E.shape, (self.latent_size,), detail="latent size differs from the model")

    def aggregate(self, E: np.ndarray) -> np.ndarray:
        """Pooled vector for one k x m bag"""
        E = np.asarray(E, dtype=DTYPE)
        self._check(E)
        batch, mask = pad_bags([E])
        with no_grad():
            return self.aggregator(Tensor(batch), mask).data[0]

    def forward(self, E: Tensor, mask: np.ndarray) -> Tensor:
        """(B, k, m) padded bags -> (B, 2) logits"""
        self._check(E.data)
        return self.output(ops.tanh(self.hidden(self.aggregator(E, mask))))

    def logits_many(self, bags: Sequence[np.ndarray]) -> np.ndarray:
        batch, mask = pad_bags([np.asarray(b, dtype=DTYPE) for b in bags])
        with no_grad():
            return self.forward(Tensor(batch), mask).data

    def classify(self, E: np.ndarray) -> Tuple[np.ndarray, int]:
        logits = self.logits_many([E])[0]
        return logits, int(predicted_labels(logits))

    def predict(self, bags: Sequence[np.ndarray], batch_size: int = 256) -> np.ndarray:
        labels = [predicted_labels(self.logits_many(bags[i:i + batch_size]))
                  for i in range(0, len(bags), batch_size)]
        return np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)

    def loss(self, bags: Sequence[np.ndarray], labels: Sequence[int], reduction: str = "mean") -> Tensor:
        batch, mask = pad_bags([np.asarray(b, dtype=DTYPE) for b in bags])
        return ops.cross_entropy(self.forward(Tensor(batch), mask), np.asarray(labels), reduction=reduction)

    def input_gradient(self, E: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
        """Classification loss of one bag and its gradient w.r.t. the instance latents.

        Uses the functional gradient, so parameters' .grad is untouched and
        concurrent calls are safe.
        """
        E = np.asarray(E, dtype=DTYPE)
        self._check(E)
        inputs = Tensor(E[None, ...], requires_grad=True)
        loss = ops.cross_entropy(self.forward(inputs, np.ones((1, E.shape[0]), dtype=DTYPE)), np.array([label]))
        return loss.item(), grad(loss, [inputs])[0][0]

    def save(self, path):
        hyperparameters = dict(self.config.model_dump(), latent_size=self.latent_size)
        return save_checkpoint(path, MODEL_KIND, hyperparameters, self.state_dict())

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        meta, state = load_checkpoint(path, expected_kind=MODEL_KIND)
        hyperparameters = dict(meta["hyperparameters"])
        latent_size = hyperparameters.pop("latent_size")
        model = cls(latent_size, ClassifierConfig.model_validate(hyperparameters))
        model.load_state_dict(state)
        return model


def build_classifier(config: ClassifierConfig, latent_size: int, seed: Optional[int] = None) -> ClassifierModel:
    return ClassifierModel(latent_size, config, seed=seed)
