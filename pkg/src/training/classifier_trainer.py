"""
Mini-batch training of the bag classifier on frozen codec latents.

The same epoch loop serves plain and adversarial training: an optional
adversary adds perturbed copies of the correctly classified examples of each
batch, and the summed gradient is divided by the batch size before the
optimizer step.
"""

from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from tqdm import tqdm

from ..config import ClassifierConfig, get_settings
from ..data.dataset import Bag
from ..errors import DatasetError
from ..models.autoencoder import StringAutoencoder
from ..models.classifier import ClassifierModel, build_classifier, pad_bags, predicted_labels
from ..tensor import Tensor, backward, build_optimizer, ops


class EpochReport(BaseModel):
    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: Optional[float] = None
    attacks_run: int = 0
    adversarial_examples: int = 0


class TrainingReport(BaseModel):
    mode: str = "standard"
    epochs: List[EpochReport] = Field(default_factory=list)
    first_epoch_losses: List[float] = Field(default_factory=list)

    @property
    def final_train_accuracy(self) -> float:
        return self.epochs[-1].train_accuracy if self.epochs else 0.0

    @property
    def final_test_accuracy(self) -> Optional[float]:
        return self.epochs[-1].test_accuracy if self.epochs else None


def encode_bags(codec: StringAutoencoder, bags: Sequence[Bag]) -> List[np.ndarray]:
    """Instance latents per bag, encoding every path of the dataset in one pass"""
    paths = [p for bag in bags for p in bag.paths]
    latents = codec.encode_many(paths)
    bounds = np.cumsum([bag.size for bag in bags])[:-1]
    return np.split(latents, bounds) if bags else []


class LatentDataset:
    """Bags together with their frozen-codec latents and labels"""

    def __init__(self, latents: Sequence[np.ndarray], labels: Sequence[int], bags: Optional[Sequence[Bag]] = None):
        self.latents = list(latents)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.bags = list(bags) if bags is not None else None

    @classmethod
    def from_bags(cls, codec: StringAutoencoder, bags: Sequence[Bag]) -> "LatentDataset":
        return cls(encode_bags(codec, bags), [bag.label for bag in bags], bags)

    def __len__(self) -> int:
        return len(self.latents)

    def require_both_classes(self) -> None:
        present = set(self.labels.tolist())
        if present != {0, 1}:
            raise DatasetError(f"Classifier training needs both classes, found labels {sorted(present)}")


class Adversary(Protocol):
    """Produces adversarial latent bags for selected dataset indices"""

    invocations: int

    def perturb(self, model: ClassifierModel, indices: List[int]) -> List[Tuple[np.ndarray, int]]:
        ...


def accuracy(model: ClassifierModel, data: LatentDataset) -> float:
    if not len(data):
        return 0.0
    return float(np.mean(model.predict(data.latents) == data.labels))


def run_epoch(model: ClassifierModel, optimizer, data: LatentDataset, batch_size: int,
              rng: np.random.Generator, adversary: Optional[Adversary] = None,
              description: str = "epoch") -> Tuple[List[float], int, int]:
    """One pass over shuffled mini-batches; returns (batch losses, attacks run, adversarial examples)"""
    params = model.parameters()
    order = rng.permutation(len(data))
    losses: List[float] = []
    attacks = produced = 0
    starts = range(0, len(order), batch_size)
    for start in tqdm(starts, desc=description, disable=not get_settings().progress, leave=False):
        idx = order[start:start + batch_size]
        batch, mask = pad_bags([data.latents[i] for i in idx])
        targets = data.labels[idx]

        model.zero_grad()
        logits = model.forward(Tensor(batch), mask)
        predictions = predicted_labels(logits.data)
        clean = ops.cross_entropy(logits, targets, reduction="sum")
        backward(clean)
        total = clean.item()

        if adversary is not None:
            # Only examples the live model gets right are attacked.
            eligible = [int(i) for i, p, y in zip(idx, predictions, targets) if p == y]
            adversarial = adversary.perturb(model, eligible) if eligible else []
            attacks += len(eligible)
            produced += len(adversarial)
            if adversarial:
                adv_loss = model.loss([a for a, _ in adversarial], [y for _, y in adversarial], reduction="sum")
                backward(adv_loss)
                total += adv_loss.item()

        for p in params:
            p.grad = p.grad / len(idx)
        optimizer.step()
        losses.append(total / len(idx))
    return losses, attacks, produced


def fit(model: ClassifierModel, train: LatentDataset, config: ClassifierConfig,
        test: Optional[LatentDataset] = None, adversary: Optional[Adversary] = None,
        mode: str = "standard") -> TrainingReport:
    """Train for config.epochs; shuffling is seeded from config.seed"""
    train.require_both_classes()
    optimizer = build_optimizer(config.optimizer, model.parameters(), config.learning_rate)
    rng = np.random.default_rng(config.seed + 1)
    logger.info(f"[{mode}] training {config.aggregator} classifier ({model.num_parameters()} parameters) "
                f"on {len(train)} bags for {config.epochs} epochs")
    report = TrainingReport(mode=mode)
    for epoch in range(config.epochs):
        losses, attacks, produced = run_epoch(model, optimizer, train, config.batch_size, rng, adversary,
                                              description=f"{mode} epoch {epoch + 1}/{config.epochs}")
        if epoch == 0:
            report.first_epoch_losses = losses
        entry = EpochReport(epoch=epoch + 1, loss=float(np.mean(losses)), train_accuracy=accuracy(model, train),
                            test_accuracy=accuracy(model, test) if test is not None else None,
                            attacks_run=attacks, adversarial_examples=produced)
        report.epochs.append(entry)
        test_part = f" test_acc={entry.test_accuracy:.4f}" if entry.test_accuracy is not None else ""
        adv_part = f" adversarial={produced}/{attacks}" if adversary is not None else ""
        logger.info(f"[{mode}] epoch {epoch + 1}: loss={entry.loss:.4f} "
                    f"train_acc={entry.train_accuracy:.4f}{test_part}{adv_part}")
    return report


def train_classifier(train_bags: Sequence[Bag], codec: StringAutoencoder, config: ClassifierConfig,
                     test_bags: Optional[Sequence[Bag]] = None,
                     model: Optional[ClassifierModel] = None) -> Tuple[ClassifierModel, TrainingReport]:
    """Standard training on the frozen encoder's latents"""
    train = LatentDataset.from_bags(codec, train_bags)
    test = LatentDataset.from_bags(codec, test_bags) if test_bags else None
    model = model or build_classifier(config, codec.latent_size)
    return model, fit(model, train, config, test)
