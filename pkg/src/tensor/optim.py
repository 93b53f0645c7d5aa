"""
Parameter update rules
"""

from typing import List

import numpy as np

from .tensor import Tensor


def clip_grad_norm(params: List[Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their joint L2 norm is at most max_norm"""
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return total


class SGD:
    """theta <- theta - lr * grad"""

    def __init__(self, params: List[Tensor], lr: float = 1e-2):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad


class Adam:
    """Adaptive moment estimation with bias correction"""

    def __init__(self, params: List[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * p.grad
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * p.grad * p.grad
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


def build_optimizer(name: str, params: List[Tensor], lr: float, beta1: float = 0.9, beta2: float = 0.999):
    if name == "adam":
        return Adam(params, lr=lr, beta1=beta1, beta2=beta2)
    if name == "sgd":
        return SGD(params, lr=lr)
    raise ValueError(f"Unsupported optimizer: {name}")
