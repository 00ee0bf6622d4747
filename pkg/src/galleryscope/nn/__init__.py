from .layers import (
    ShapeError,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
    softmax_cross_entropy_batch,
)
from .network import (
    ForwardCache,
    LayerSpec,
    NetworkSpec,
    Params,
    check_params,
    conv,
    dense,
    init_params,
    maxpool,
    network_backward,
    network_forward,
    relu,
    vgg_nano,
)
from .optim import sgd_momentum_step, zero_velocity
from .gradcheck import GradCheckReport, finite_diff_grad_check

__all__ = [
    "ShapeError", "conv2d_forward", "conv2d_backward", "maxpool2x2_forward",
    "maxpool2x2_backward", "dense_forward", "dense_backward", "relu_forward",
    "relu_backward", "softmax", "softmax_cross_entropy", "softmax_cross_entropy_batch",
    "LayerSpec", "NetworkSpec", "Params", "ForwardCache", "conv", "relu", "maxpool",
    "dense", "vgg_nano", "init_params", "check_params", "network_forward",
    "network_backward", "sgd_momentum_step", "zero_velocity",
    "finite_diff_grad_check", "GradCheckReport",
]
