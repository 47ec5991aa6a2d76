import logging

import torch
import torch.optim as optim
from tqdm import tqdm
from wandb.sdk.wandb_run import Run

from ..data import Dataset
from ..errors import ConfigError, DivergedLoss
from .constants import Activation
from .model import MLP

logger = logging.getLogger(__name__)


class MLPTrainer:
    """Plain mini-batch gradient descent on the training loss of an `MLP`."""

    def __init__(
        self,
        model: MLP,
        x: torch.Tensor,
        y: torch.Tensor,
        epochs: int,
        batch_size: int,
        learning_rate: float,
        seed: int,
    ):
        if epochs < 1:
            raise ConfigError(f"At least one epoch is required, got {epochs}.")
        if batch_size < 1:
            raise ConfigError(f"Batch size must be positive, got {batch_size}.")
        if learning_rate < 0 or not torch.isfinite(torch.tensor(learning_rate)):
            raise ConfigError(f"Invalid learning rate {learning_rate}.")
        assert x.shape[0] == y.shape[0], "Inputs and targets must have the same rows."

        self.model = model
        self.x = x
        self.y = y
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optim.SGD(model.parameters(), lr=learning_rate)
        self.rng = torch.Generator().manual_seed(seed)

    def do_epoch(self) -> float:
        """Runs one shuffled pass over the training set.

        ---
        Returns:
            The mean training loss over the batches of the epoch, weighted
            by batch size.
        """
        n = self.x.shape[0]
        permutation = torch.randperm(n, generator=self.rng)
        total_loss = 0.0

        self.model.train()
        for start in range(0, n, self.batch_size):
            batch = permutation[start : start + self.batch_size]
            self.optimizer.zero_grad()
            loss = self.model.loss(self.x[batch], self.y[batch])

            if not torch.isfinite(loss):
                raise DivergedLoss(
                    f"Non-finite training loss ({loss.item()}), "
                    "the learning rate is probably too high."
                )

            loss.backward()
            self.optimizer.step()
            total_loss += loss.item() * len(batch)

        return total_loss / n

    def launch_training(self, run: Run | None = None, disable_logs: bool = True):
        """Trains the model for the configured number of epochs.

        ---
        Args:
            run: Optional W&B run receiving the loss of each epoch.
            disable_logs: Hide the progress bar and the model summary.
        """
        if not disable_logs:
            self.model.summary()

        for epoch in tqdm(range(self.epochs), desc="Epoch", disable=disable_logs):
            loss = self.do_epoch()
            self.model.loss_history.append(loss)
            if run is not None:
                run.log({"mlp/loss": loss, "mlp/epoch": epoch})

        self.model.eval()
        logger.info(
            "MLP trained for %d epochs, final loss %.6g.",
            self.epochs,
            self.model.loss_history[-1],
        )


def train_mlp(
    train: Dataset,
    widths: list[int],
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
    activation: Activation | str = Activation.RELU,
    run: Run | None = None,
    disable_logs: bool = True,
) -> MLP:
    """Initializes and trains the co-supervising network on a dataset."""
    if len(widths) == 0:
        raise ConfigError("The network needs at least one hidden layer.")

    model = MLP.for_task(train.task, train.p, widths, activation, seed)
    trainer = MLPTrainer(
        model, train.x, train.y, epochs, batch_size, learning_rate, seed
    )
    trainer.launch_training(run, disable_logs)
    return model


def gradient_check(
    model: MLP,
    x: torch.Tensor,
    y: torch.Tensor,
    h: float = 1e-5,
    floor: float = 1e-3,
) -> tuple[float, bool]:
    """Compares backpropagation to central finite differences.

    The error of each parameter entry is `|g - fd| / max(|g|, |fd|, floor)`,
    so that vanishing gradients are compared in absolute terms.

    ---
    Args:
        model: The network to check. Its parameters are restored afterwards.
        x: The inputs of the batch.
            Shape of [batch_size, n_inputs].
        y: The targets of the batch.
            Shape of [batch_size,].
        h: The finite difference step.
        floor: The smallest denominator of the relative error.

    ---
    Returns:
        max_error: The maximum relative error over every parameter entry.
        finite: Whether the maximum error is finite.
    """
    assert 1e-8 < h < 1e-3, "The step must be in (1e-8, 1e-3)."

    model.zero_grad()
    model.loss(x, y).backward()

    errors = []
    with torch.no_grad():
        for parameter in model.parameters():
            flat = parameter.view(-1)
            gradients = parameter.grad.view(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + h
                loss_plus = model.loss(x, y)
                flat[i] = original - h
                loss_minus = model.loss(x, y)
                flat[i] = original

                estimate = (loss_plus - loss_minus) / (2 * h)
                gradient = gradients[i]
                scale = torch.stack(
                    [gradient.abs(), estimate.abs(), torch.tensor(floor, dtype=x.dtype)]
                ).max()
                errors.append((gradient - estimate).abs() / scale)

    model.zero_grad()
    max_error = torch.stack(errors).max().item()
    return max_error, bool(torch.isfinite(torch.tensor(max_error)))
