"""
Robust (minimax) classifier training and cross-model robustness evaluation.

Inner maximisation runs per correctly classified example, either purely in
latent space or through the full decode/re-encode attack; the outer step
descends on clean plus adversarial loss.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from ..attacks.config import AttackConfig, AttackResult
from ..attacks.engine import batch_attack, latent_perturbation, run_attack
from ..config import AdversarialConfig, ClassifierConfig
from ..data.dataset import Bag
from ..errors import ConfigError, DatasetError, ShapeError
from ..models.autoencoder import StringAutoencoder
from ..models.classifier import ClassifierModel, build_classifier
from .classifier_trainer import Adversary, LatentDataset, TrainingReport, encode_bags, fit, run_epoch


class TrainMode(BaseModel):
    kind: Literal["standard", "latent", "full"] = "standard"
    attack: Optional[AttackConfig] = None

    @classmethod
    def from_config(cls, config: AdversarialConfig, alpha: Optional[float] = None) -> "TrainMode":
        """Mode from the adversarial config section; `alpha` overrides the inner step size"""
        attack = config.inner_attack
        if alpha is not None:
            attack = attack.model_copy(update={"alpha": alpha})
        return cls(kind=config.mode, attack=attack)

    def check(self) -> None:
        if self.kind != "standard" and self.attack is None:
            raise ConfigError(f"Training mode '{self.kind}' needs an inner attack config")

    @property
    def label(self) -> str:
        if self.kind == "standard" or self.attack is None:
            return "standard"
        return f"{self.kind}-a{self.attack.alpha:g}"


class _ConcurrentAdversary:
    def __init__(self, data: LatentDataset, attack: AttackConfig, threads: int = 1):
        self.data = data
        self.attack = attack
        self.threads = max(1, threads)
        self.invocations = 0
        self.attacked: List[int] = []
        self._lock = threading.Lock()

    def _one(self, model: ClassifierModel, index: int) -> Optional[np.ndarray]:
        raise NotImplementedError

    def perturb(self, model: ClassifierModel, indices: List[int]) -> List[Tuple[np.ndarray, int]]:
        def work(index: int) -> Optional[np.ndarray]:
            return self._one(model, index)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                produced = list(pool.map(work, indices))
        else:
            produced = [work(i) for i in indices]
        with self._lock:
            self.invocations += len(indices)
            self.attacked.extend(indices)
        return [(latents, int(self.data.labels[i])) for i, latents in zip(indices, produced) if latents is not None]


class LatentAdversary(_ConcurrentAdversary):
    """Adversarial input is Z + delta with delta from latent-only PGD"""

    def _one(self, model: ClassifierModel, index: int) -> Optional[np.ndarray]:
        latents = self.data.latents[index]
        return latents + latent_perturbation(model, latents, int(self.data.labels[index]), self.attack)


class FullAdversary(_ConcurrentAdversary):
    """Adversarial input is the re-encoded bag of verified generated strings"""

    def __init__(self, data: LatentDataset, codec: StringAutoencoder, attack: AttackConfig, threads: int = 1):
        if data.bags is None:
            raise ConfigError("Full-mode adversarial training needs the raw bags")
        super().__init__(data, attack, threads)
        self.codec = codec

    def _one(self, model: ClassifierModel, index: int) -> Optional[np.ndarray]:
        result = run_attack(model, self.codec, self.data.bags[index], self.attack, self.data.latents[index])
        if not result.success:
            return None
        return self.codec.encode_many(result.realized_paths)


def build_adversary(mode: TrainMode, data: LatentDataset, codec: StringAutoencoder,
                    threads: int = 1) -> Optional[Adversary]:
    mode.check()
    if mode.kind == "latent":
        return LatentAdversary(data, mode.attack, threads)
    if mode.kind == "full":
        return FullAdversary(data, codec, mode.attack, threads)
    return None


def adversarial_epoch(model: ClassifierModel, optimizer, data: LatentDataset, codec: StringAutoencoder,
                      mode: TrainMode, batch_size: int, rng: np.random.Generator,
                      threads: int = 1) -> Tuple[List[float], int, int]:
    """One minimax epoch; reduces to plain mini-batch training for the standard mode"""
    adversary = build_adversary(mode, data, codec, threads)
    return run_epoch(model, optimizer, data, batch_size, rng, adversary, description=mode.label)


def train_robust(train_bags: Sequence[Bag], codec: StringAutoencoder, mode: TrainMode, config: ClassifierConfig,
                 test_bags: Optional[Sequence[Bag]] = None,
                 threads: int = 1) -> Tuple[ClassifierModel, TrainingReport]:
    """Adversarially train a fresh classifier; the standard mode matches train_classifier exactly"""
    train = LatentDataset.from_bags(codec, train_bags)
    test = LatentDataset.from_bags(codec, test_bags) if test_bags else None
    model = build_classifier(config, codec.latent_size)
    adversary = build_adversary(mode, train, codec, threads)
    logger.info(f"Robust training mode={mode.label} on {len(train)} bags")
    return model, fit(model, train, config, test, adversary, mode=mode.label)


class CrossEvaluation(BaseModel):
    attacker: str
    target: str
    robustness: float
    support: int
    target_misclassified: int
    zero_support: bool


def _check_dims(models: Sequence[ClassifierModel], codec: StringAutoencoder) -> None:
    for model in models:
        if model.latent_size != codec.latent_size:
            raise ShapeError("cross_evaluate", (model.latent_size,), (codec.latent_size,),
                             detail="classifier and codec latent sizes differ")


def robustness_against(target: ClassifierModel, codec: StringAutoencoder, results: Sequence[AttackResult],
                       attacker: str = "attacker", target_name: str = "target") -> CrossEvaluation:
    """1 - share of the attacker's successful bags that the target also misclassifies"""
    successes = [r for r in results if r.success]
    fooled = 0
    for r in successes:
        _, label = target.classify(codec.encode_many(r.realized_paths))
        fooled += int(label != r.true_label)
    support = len(successes)
    return CrossEvaluation(attacker=attacker, target=target_name,
                           robustness=1.0 - fooled / support if support else 1.0,
                           support=support, target_misclassified=fooled, zero_support=support == 0)


def cross_evaluate(attacker: ClassifierModel, target: ClassifierModel, eval_bags: Sequence[Bag],
                   codec: StringAutoencoder, attack: AttackConfig, threads: int = 1) -> CrossEvaluation:
    _check_dims([attacker, target], codec)
    results, _ = batch_attack(attacker, codec, eval_bags, attack, threads=threads,
                              latents=encode_bags(codec, eval_bags))
    return robustness_against(target, codec, results)


def cross_matrix(models: Dict[str, ClassifierModel], eval_bags: Sequence[Bag], codec: StringAutoencoder,
                 attack: AttackConfig, threads: int = 1) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Robustness matrix (rows: attackers, columns: targets) and its support counts"""
    if len(models) < 2:
        raise ConfigError("Cross evaluation needs at least two models")
    if not eval_bags:
        raise DatasetError("Cross evaluation needs a non-empty evaluation set")
    _check_dims(list(models.values()), codec)
    latents = encode_bags(codec, eval_bags)
    names = list(models)
    rows = pd.Index(names, name="attacker")
    robustness = pd.DataFrame(np.ones((len(names), len(names))), index=rows, columns=names)
    support = pd.DataFrame(np.zeros((len(names), len(names)), dtype=np.int64), index=rows, columns=names)
    for attacker in names:
        results, _ = batch_attack(models[attacker], codec, eval_bags, attack, threads=threads, latents=latents)
        for target in names:
            cell = robustness_against(models[target], codec, results, attacker, target)
            robustness.loc[attacker, target] = cell.robustness
            support.loc[attacker, target] = cell.support
            logger.info(f"{attacker} -> {target}: robustness {cell.robustness:.4f} over {cell.support} bags")
    return robustness, support
