import logging
import math
from typing import Any

import torch
import torch.nn as nn
from torchinfo import summary

from ..data import DTYPE, TaskKind
from ..errors import DimensionMismatch
from .constants import ACTIVATIONS, LINKS, Activation, OutputLink

logger = logging.getLogger(__name__)


class MLP(nn.Module):
    """Feed-forward network with a shared hidden activation and a scalar output.

    Hidden layer `l` computes `z_l = act(W_l z_{l-1} + b_l)` and the output is
    `link(W_out z_L + b_out)`. A sigmoid link reads the output as `P(Y=1 | x)`.
    """

    def __init__(
        self,
        n_inputs: int,
        widths: list[int],
        activation: Activation | str = Activation.RELU,
        output_link: OutputLink | str = OutputLink.LINEAR,
        seed: int = 0,
    ):
        super().__init__()
        assert len(widths) > 0, "The network needs at least one hidden layer."
        assert all(width > 0 for width in widths), "Widths must be positive."

        self.n_inputs = n_inputs
        self.widths = list(widths)
        self.activation_kind = Activation(activation)
        self.output_link = OutputLink(output_link)

        dims = [n_inputs, *widths, 1]
        self.layers = nn.ModuleList(
            [
                nn.Linear(fan_in, fan_out, dtype=DTYPE)
                for fan_in, fan_out in zip(dims[:-1], dims[1:])
            ]
        )
        self.activation = ACTIVATIONS[self.activation_kind]()
        self.loss_history: list[float] = []

        self.reset_parameters(seed)

    @classmethod
    def for_task(
        cls,
        task: TaskKind,
        n_inputs: int,
        widths: list[int],
        activation: Activation | str,
        seed: int,
    ) -> "MLP":
        link = (
            OutputLink.SIGMOID if task == TaskKind.CLASSIFICATION else OutputLink.LINEAR
        )
        return cls(n_inputs, widths, activation, link, seed)

    @torch.no_grad()
    def reset_parameters(self, seed: int):
        """Uniform Glorot initialization of the weights, zero biases."""
        rng = torch.Generator().manual_seed(seed)
        for layer in self.layers:
            fan_out, fan_in = layer.weight.shape
            bound = math.sqrt(6 / (fan_in + fan_out))
            weight = torch.rand(layer.weight.shape, generator=rng, dtype=DTYPE)
            layer.weight.copy_(bound * (2 * weight - 1))
            layer.bias.zero_()

    @property
    def n_hidden(self) -> int:
        return len(self.widths)

    def _check_inputs(self, x: torch.Tensor):
        if x.shape[-1] != self.n_inputs:
            raise DimensionMismatch(self.n_inputs, x.shape[-1])

    def hidden_outputs(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Post-activation outputs of every hidden layer.

        ---
        Args:
            x: The inputs.
                Shape of [batch_size, n_inputs] or [n_inputs,].

        ---
        Returns:
            The outputs `z_1, ..., z_L`.
                Shapes of [batch_size, width_l] or [width_l,].
        """
        self._check_inputs(x)
        outputs = []
        z = x
        for layer in self.layers[:-1]:
            z = self.activation(layer(z))
            outputs.append(z)
        return outputs

    def output_layer(self, z: torch.Tensor) -> torch.Tensor:
        """Map the last hidden output to the prediction, link included."""
        logits = self.layers[-1](z).squeeze(-1)
        return LINKS[self.output_link](logits)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        """Output before the link."""
        return self.layers[-1](self.hidden_outputs(x)[-1]).squeeze(-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return LINKS[self.output_link](self.logits(x))

    @torch.no_grad()
    def predict(self, x: torch.Tensor) -> torch.Tensor:
        """Predictions of the network, probabilities for a sigmoid link.

        ---
        Args:
            x: The inputs.
                Shape of [batch_size, n_inputs] or [n_inputs,].

        ---
        Returns:
            The predictions.
                Shape of [batch_size,] or [].
        """
        return self(x)

    def loss(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        """Mean squared error, or binary cross-entropy for a sigmoid link."""
        if self.output_link == OutputLink.SIGMOID:
            return nn.functional.binary_cross_entropy_with_logits(self.logits(x), y)
        return nn.functional.mse_loss(self(x), y)

    def summary(self):
        """Torchinfo summary."""
        dummy_input = torch.zeros((1, self.n_inputs), dtype=DTYPE)
        stats = summary(self, input_data=[dummy_input], depth=1, verbose=0)
        logger.info("MLP summary:\n%s", stats)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_inputs": self.n_inputs,
            "widths": self.widths,
            "activation": self.activation_kind.value,
            "output_link": self.output_link.value,
            "weights": [layer.weight.tolist() for layer in self.layers],
            "biases": [layer.bias.tolist() for layer in self.layers],
            "loss_history": self.loss_history,
        }

    @classmethod
    @torch.no_grad()
    def from_dict(cls, state: dict[str, Any]) -> "MLP":
        model = cls(
            state["n_inputs"],
            state["widths"],
            state["activation"],
            state["output_link"],
        )
        for layer, weight, bias in zip(model.layers, state["weights"], state["biases"]):
            layer.weight.copy_(torch.tensor(weight, dtype=DTYPE))
            layer.bias.copy_(torch.tensor(bias, dtype=DTYPE))
        model.loss_history = list(state["loss_history"])
        return model


def mlp_predict(model: MLP, x: torch.Tensor) -> torch.Tensor:
    return model.predict(x)
