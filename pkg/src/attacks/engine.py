"""
Latent-space attacks on bags of strings.

Both methods perturb the instance latents of a bag, decode the perturbed
latents back to strings, re-encode those strings and re-classify the bag.
Only a bag that is still misclassified after this round trip counts as a
successful adversarial example.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from ..config import get_settings
from ..data.dataset import Bag
from ..errors import ConfigError, DatasetError
from ..metrics.strings import bag_rld
from ..models.autoencoder import StringAutoencoder
from ..models.classifier import ClassifierModel
from ..tensor import ops
from .config import AttackConfig, AttackMethod, AttackOutcome, AttackResult, AttackSummary
from .projections import project, radius
from .trace_logger import AttackTraceLogger


def _require(config: AttackConfig, method: AttackMethod) -> None:
    if config.method != method:
        raise ConfigError(f"Attack config is {config.method.value}, expected {method.value}")


def _normalized_step(gradient: np.ndarray, config: AttackConfig) -> np.ndarray:
    """alpha times the gradient scaled to unit L2 norm over the whole bag"""
    return config.alpha * gradient / (ops.l2_norm(gradient).item() + config.gamma)


def verify(classifier: ClassifierModel, codec: StringAutoencoder, paths: Sequence[str],
           true_label: int) -> Tuple[bool, List[str]]:
    """Re-encode decoded strings and check the bag is misclassified.

    Empty decodes are dropped first; a bag with nothing left is not a success.
    """
    realized = [p for p in paths if p]
    if not realized:
        return False, realized
    _, label = classifier.classify(codec.encode_many(realized))
    return label != true_label, realized


def _already_misclassified(classifier: ClassifierModel, latents: np.ndarray, bag: Bag) -> Optional[AttackResult]:
    _, label = classifier.classify(latents)
    if label == bag.label:
        return None
    return AttackResult(outcome=AttackOutcome.ALREADY_MISCLASSIFIED, true_label=bag.label,
                        original_paths=list(bag.paths), adversarial_paths=list(bag.paths))


def pgd_attack(classifier: ClassifierModel, codec: StringAutoencoder, bag: Bag, config: AttackConfig,
               latents: Optional[np.ndarray] = None) -> AttackResult:
    """Projected normalised-gradient ascent on the bag's latents with decode verification"""
    _require(config, AttackMethod.PGD)
    Z = codec.encode_many(bag.paths) if latents is None else latents
    early = _already_misclassified(classifier, Z, bag)
    if early is not None:
        return early

    caps = codec.decode_caps(bag.paths, config.decode_length_factor)
    delta = np.zeros_like(Z)
    losses: List[float] = []
    radii: List[float] = []
    for iteration in range(1, config.iterations + 1):
        loss, gradient = classifier.input_gradient(Z + delta, bag.label)
        losses.append(loss)
        delta = project(delta + _normalized_step(gradient, config), config.epsilon, config.projection)
        radii.append(radius(delta, config.projection))
        candidate = codec.decode_many(Z + delta, caps)
        fooled, realized = verify(classifier, codec, candidate, bag.label)
        if fooled:
            return AttackResult(outcome=AttackOutcome.SUCCESS, true_label=bag.label,
                                original_paths=list(bag.paths), adversarial_paths=candidate,
                                iterations_used=iteration, epsilon_used=config.epsilon, perturbation=delta,
                                losses=losses, iterate_radii=radii,
                                dropped_instances=len(candidate) - len(realized))
    return AttackResult(outcome=AttackOutcome.FAILURE, true_label=bag.label, original_paths=list(bag.paths),
                        iterations_used=config.iterations, epsilon_used=config.epsilon,
                        losses=losses, iterate_radii=radii)


def fgsm_attack(classifier: ClassifierModel, codec: StringAutoencoder, bag: Bag, config: AttackConfig,
                latents: Optional[np.ndarray] = None) -> AttackResult:
    """One gradient sign at the clean latents, swept over growing step sizes"""
    _require(config, AttackMethod.FGSM)
    Z = codec.encode_many(bag.paths) if latents is None else latents
    early = _already_misclassified(classifier, Z, bag)
    if early is not None:
        return early

    caps = codec.decode_caps(bag.paths, config.decode_length_factor)
    loss, gradient = classifier.input_gradient(Z, bag.label)
    direction = ops.sign(gradient).data
    epsilons = config.fgsm_epsilons()
    for j, epsilon in enumerate(epsilons, start=1):
        perturbation = epsilon * direction
        candidate = codec.decode_many(Z + perturbation, caps)
        fooled, realized = verify(classifier, codec, candidate, bag.label)
        if fooled:
            return AttackResult(outcome=AttackOutcome.SUCCESS, true_label=bag.label,
                                original_paths=list(bag.paths), adversarial_paths=candidate,
                                iterations_used=j, epsilon_used=epsilon, perturbation=perturbation,
                                losses=[loss], dropped_instances=len(candidate) - len(realized))
    return AttackResult(outcome=AttackOutcome.FAILURE, true_label=bag.label, original_paths=list(bag.paths),
                        iterations_used=len(epsilons), epsilon_used=config.epsilon_max, losses=[loss])


def run_attack(classifier: ClassifierModel, codec: StringAutoencoder, bag: Bag, config: AttackConfig,
               latents: Optional[np.ndarray] = None) -> AttackResult:
    if config.method == AttackMethod.FGSM:
        return fgsm_attack(classifier, codec, bag, config, latents)
    return pgd_attack(classifier, codec, bag, config, latents)


def latent_perturbation(classifier: ClassifierModel, latents: np.ndarray, label: int,
                        config: AttackConfig) -> np.ndarray:
    """Inner maximisation in latent space only: no decoding, final iterate returned"""
    if config.method == AttackMethod.FGSM:
        _, gradient = classifier.input_gradient(latents, label)
        return config.epsilon_max * ops.sign(gradient).data
    delta = np.zeros_like(latents)
    for _ in range(config.iterations):
        _, gradient = classifier.input_gradient(latents + delta, label)
        delta = project(delta + _normalized_step(gradient, config), config.epsilon, config.projection)
    return delta


def summarize(results: Sequence[AttackResult], config: AttackConfig) -> AttackSummary:
    """Success rate over attempted bags (already-misclassified excluded) and RLD over successes"""
    successes = [r for r in results if r.success]
    failures = sum(r.outcome == AttackOutcome.FAILURE for r in results)
    already = sum(r.outcome == AttackOutcome.ALREADY_MISCLASSIFIED for r in results)
    attempted = len(successes) + failures
    rlds, empty = [], 0
    for r in successes:
        score, dropped = bag_rld(r.original_paths, r.adversarial_paths)
        rlds.append(score)
        empty += dropped
    return AttackSummary(method=config.label, total=len(results), successes=len(successes), failures=failures,
                         already_misclassified=already,
                         success_rate=len(successes) / attempted if attempted else None,
                         mean_rld=float(np.mean(rlds)) if rlds else None, rlds=rlds, empty_decodes=empty)


def batch_attack(classifier: ClassifierModel, codec: StringAutoencoder, bags: Sequence[Bag],
                 config: AttackConfig, threads: int = 1, trace: Optional[AttackTraceLogger] = None,
                 latents: Optional[Sequence[np.ndarray]] = None) -> Tuple[List[AttackResult], AttackSummary]:
    """Attack every bag (concurrently when threads > 1); results keep input order"""
    bags = list(bags)
    if not bags:
        raise DatasetError("No bags to attack")
    latents = list(latents) if latents is not None else [None] * len(bags)

    def attack_one(index: int) -> AttackResult:
        result = run_attack(classifier, codec, bags[index], config, latents[index])
        logger.debug(f"{config.label} bag {index}: {result.outcome.value} after {result.iterations_used} steps")
        return result

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(tqdm(pool.map(attack_one, range(len(bags))), total=len(bags), desc=config.slug,
                            disable=not get_settings().progress, leave=False))

    if trace is not None:
        trace.start(config)
        for index, result in enumerate(results):
            trace.log_result(index, result, config)
        trace.check_complete(config, len(results))

    summary = summarize(results, config)
    logger.info(f"{config.label}: success rate {summary.success_rate_display} "
                f"({summary.successes}/{summary.successes + summary.failures}, "
                f"{summary.already_misclassified} already misclassified), mean RLD "
                f"{'n/a' if summary.mean_rld is None else f'{summary.mean_rld:.3f}'}")
    return results, summary
