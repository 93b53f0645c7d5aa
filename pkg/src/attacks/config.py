"""
Attack configuration and result types
"""

from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ConfigError


class AttackMethod(str, Enum):
    PGD = "modified-pgd"
    FGSM = "modified-fgsm"


class Projection(str, Enum):
    L2 = "l2"
    LINF = "linf"
    NONE = "none"


class AttackOutcome(str, Enum):
    ALREADY_MISCLASSIFIED = "already-misclassified"
    SUCCESS = "success"
    FAILURE = "failure"


class AttackConfig(BaseModel):
    """Hyperparameters of one latent-space attack method"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    method: AttackMethod = AttackMethod.PGD
    alpha: float = Field(default=2.0, gt=0, description="PGD step size")
    epsilon: float = Field(default=10.0, gt=0, description="Perturbation budget")
    epsilon_max: float = Field(default=1.0, gt=0, description="FGSM sweep upper bound")
    epsilon_step: float = Field(default=0.01, gt=0, description="FGSM sweep increment")
    iterations: int = Field(default=50, ge=1, description="PGD iteration cap T")
    projection: Projection = Projection.LINF
    gamma: float = Field(default=1e-12, gt=0, description="Gradient normalisation guard")
    decode_length_factor: int = Field(default=2, ge=1,
                                      description="Decode cap as a multiple of the padded input length")

    @model_validator(mode="after")
    def _check_sweep(self) -> "AttackConfig":
        if self.method == AttackMethod.FGSM and self.epsilon_step > self.epsilon_max:
            raise ValueError("FGSM sweep starts at epsilon_step, which must not exceed epsilon_max")
        return self

    @property
    def label(self) -> str:
        """Method label in the layout of the attack summary table"""
        if self.method == AttackMethod.FGSM:
            return f"FGSM(delta: {self.epsilon_step:.2f}, max_eps: {self.epsilon_max:.2f})"
        return f"PGD(alpha: {self.alpha:.2f}, eps: {self.epsilon:.2f}, projection: {self.projection.value})"

    @property
    def slug(self) -> str:
        """Filesystem-friendly identifier"""
        if self.method == AttackMethod.FGSM:
            return f"fgsm_d{self.epsilon_step:g}_max{self.epsilon_max:g}"
        return f"pgd_a{self.alpha:g}_e{self.epsilon:g}_{self.projection.value}"

    def fgsm_epsilons(self) -> List[float]:
        """Sweep values delta, 2*delta, ... up to epsilon_max, computed without drift"""
        count = int(np.floor(self.epsilon_max / self.epsilon_step + 1e-9))
        return [self.epsilon_step * j for j in range(1, count + 1)]

    @classmethod
    def parse(cls, text: str) -> "AttackConfig":
        """Parse compact specs such as `pgd:alpha=2,eps=10,proj=linf` or `fgsm:delta=0.01,max_eps=1`"""
        aliases = {"eps": "epsilon", "proj": "projection", "delta": "epsilon_step",
                   "max_eps": "epsilon_max", "t": "iterations", "steps": "iterations"}
        head, _, tail = text.strip().partition(":")
        methods = {"pgd": AttackMethod.PGD, "fgsm": AttackMethod.FGSM}
        if head.lower() not in methods:
            raise ConfigError(f"Unknown attack method in '{text}'")
        fields: Dict[str, Any] = {"method": methods[head.lower()]}
        for item in filter(None, (part.strip() for part in tail.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"Malformed attack parameter '{item}' in '{text}'")
            fields[aliases.get(key.strip(), key.strip())] = value.strip()
        try:
            return cls(**fields)
        except ValueError as e:
            raise ConfigError(f"Invalid attack spec '{text}': {e}") from e


def table_grid() -> List[AttackConfig]:
    """FGSM plus PGD over alpha x epsilon x projection, as in the method comparison table"""
    grid = [AttackConfig(method=AttackMethod.FGSM, epsilon_step=0.01, epsilon_max=1.0)]
    for projection in (Projection.L2, Projection.LINF):
        for alpha in (0.5, 1.0, 2.0):
            for epsilon in (2.0, 5.0, 10.0):
                grid.append(AttackConfig(alpha=alpha, epsilon=epsilon, projection=projection))
    return grid


class AttackResult(BaseModel):
    """Outcome of attacking one bag"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    outcome: AttackOutcome
    true_label: int
    original_paths: List[str]
    adversarial_paths: List[str] = Field(default_factory=list)
    iterations_used: int = 0
    epsilon_used: Optional[float] = None
    perturbation: Optional[np.ndarray] = None
    losses: List[float] = Field(default_factory=list)
    iterate_radii: List[float] = Field(default_factory=list)
    dropped_instances: int = 0

    @property
    def success(self) -> bool:
        return self.outcome == AttackOutcome.SUCCESS

    @property
    def realized_paths(self) -> List[str]:
        """Adversarial bag as classified: instances that decoded to nothing are dropped"""
        return [p for p in self.adversarial_paths if p]


class AttackSummary(BaseModel):
    """Aggregate over a batch of attack results"""

    method: str
    total: int
    successes: int
    failures: int
    already_misclassified: int
    success_rate: Optional[float] = None
    mean_rld: Optional[float] = None
    rlds: List[float] = Field(default_factory=list)
    empty_decodes: int = 0

    @property
    def success_rate_display(self) -> str:
        return "n/a" if self.success_rate is None else f"{100.0 * self.success_rate:.2f}%"
