# Tensor core: arrays with reverse-mode gradients
from .tensor import DTYPE, Tensor, as_tensor, backward, grad, is_grad_enabled, no_grad
from .module import Module, glorot_uniform, parameter
from .optim import SGD, Adam, build_optimizer, clip_grad_norm
from .gradcheck import finite_difference_check
from . import ops
