"""
Building blocks shared by the string autoencoder and the bag classifier
"""

import numpy as np

from ..errors import ShapeError
from ..tensor import Module, Tensor, glorot_uniform, ops, parameter
from ..tensor.tensor import DTYPE


class Embedding(Module):
    """Lookup table mapping byte ids to dense vectors"""

    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator):
        self.weight = parameter(rng.normal(0.0, 0.1, size=(num_embeddings, dim)).astype(DTYPE))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ops.embedding(self.weight, ids)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.weight = parameter(glorot_uniform(rng, in_features, out_features))
        self.bias = parameter(np.zeros(out_features, dtype=DTYPE)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul(x, self.weight)
        return out if self.bias is None else ops.add(out, self.bias)


class StridedConv1d(Module):
    """1D convolution whose stride equals its kernel width.

    Windows never overlap, so the convolution is a reshape of the sequence
    into consecutive n-grams followed by one matrix product.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_width: int, rng: np.random.Generator):
        self.kernel_width = kernel_width
        self.in_channels = in_channels
        self.weight = parameter(glorot_uniform(rng, kernel_width * in_channels, out_channels))
        self.bias = parameter(np.zeros(out_channels, dtype=DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        # x: (batch, length, in_channels) with length a multiple of kernel_width
        batch, length, channels = x.shape
        if channels != self.in_channels or length % self.kernel_width:
            raise ShapeError("strided_conv1d", x.shape, (self.kernel_width, self.in_channels),
                             detail="length must be a multiple of the kernel width")
        windows = ops.reshape(x, (batch, length // self.kernel_width, self.kernel_width * channels))
        return ops.add(ops.matmul(windows, self.weight), self.bias)


class TransposedConv1d(Module):
    """Transposed counterpart of StridedConv1d: each input step expands to kernel_width outputs"""

    def __init__(self, in_channels: int, out_channels: int, kernel_width: int, rng: np.random.Generator):
        self.kernel_width = kernel_width
        self.out_channels = out_channels
        self.weight = parameter(glorot_uniform(rng, in_channels, kernel_width * out_channels))
        self.bias = parameter(np.zeros(kernel_width * out_channels, dtype=DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        # x: (batch, ..., in_channels) -> (batch, ..., kernel_width, out_channels)
        out = ops.add(ops.matmul(x, self.weight), self.bias)
        return ops.reshape(out, tuple(x.shape[:-1]) + (self.kernel_width, self.out_channels))


class GRUCell(Module):
    """Gated recurrent cell with update and reset gates and a tanh candidate"""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.hidden_size = hidden_size
        self.input_weight = parameter(glorot_uniform(rng, input_size, 3 * hidden_size))
        self.gate_weight = parameter(glorot_uniform(rng, hidden_size, 2 * hidden_size))
        self.candidate_weight = parameter(glorot_uniform(rng, hidden_size, hidden_size))
        self.bias = parameter(np.zeros(3 * hidden_size, dtype=DTYPE))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        d = self.hidden_size
        projected = ops.add(ops.matmul(x, self.input_weight), self.bias)
        gates = ops.add(projected[..., :2 * d], ops.matmul(h, self.gate_weight))
        update = ops.sigmoid(gates[..., :d])
        reset = ops.sigmoid(gates[..., d:])
        candidate = ops.tanh(ops.add(projected[..., 2 * d:], ops.matmul(ops.mul(reset, h), self.candidate_weight)))
        return ops.add(ops.mul(ops.sub(1.0, update), candidate), ops.mul(update, h))
