"""Small numpy network engine: layers, residual stacks, SGD and exporters."""

from .checkpoint import load_checkpoint, save_checkpoint
from .export import CHANNEL, NEURON, histogram_via_forward, network_mask, network_to_dag
from .layers import (
    AvgPool2d,
    BatchNorm,
    ChannelPReLU,
    Conv2d,
    Dense,
    Flatten,
    Parameter,
    ReLU,
    ResidualBegin,
    ResidualEnd,
    prelu_apply,
    prelu_backward,
    softmax_cross_entropy,
)
from .network import Network, build_network, conv_resnet_config, dense_resnet_config
from .optim import SGD, multistep_lr, scaled_milestones

__all__ = [name for name in dir() if not name.startswith("_")]
