"""Activations and output links of the network."""
from enum import Enum

import torch
import torch.nn as nn


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


class OutputLink(str, Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"


# `nn.ReLU` has a zero subgradient at 0.
ACTIVATIONS: dict[Activation, type[nn.Module]] = {
    Activation.RELU: nn.ReLU,
    Activation.TANH: nn.Tanh,
    Activation.SIGMOID: nn.Sigmoid,
    Activation.IDENTITY: nn.Identity,
}

LINKS = {
    OutputLink.LINEAR: lambda z: z,
    OutputLink.SIGMOID: torch.sigmoid,
}
