"""Layer cells and their combination into cells.

Each hidden layer is clustered independently. A sample is then labelled by the
sequence of its MAP components across layers, and the sequences are ranked in
lexicographic order. Only occupied ranks receive a compact cell id.
"""
import logging
from dataclasses import dataclass
from typing import Any

import torch
from tqdm import tqdm

from ..gmm import CovKind, Gmm, fit_gmm
from ..mlp import MLP

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerClusterings:
    """One Gaussian mixture per hidden layer."""

    per_layer: list[Gmm]

    @property
    def k_per_layer(self) -> list[int]:
        return [gmm.k for gmm in self.per_layer]

    @property
    def n_layers(self) -> int:
        return len(self.per_layer)

    def to_dict(self) -> dict[str, Any]:
        return {"per_layer": [gmm.to_dict() for gmm in self.per_layer]}

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "LayerClusterings":
        return cls([Gmm.from_dict(gmm) for gmm in state["per_layer"]])


@dataclass(frozen=True)
class CellPartition:
    """Compact cell ids of the training samples.

    ---
    Parameters:
        cell_of_sample: The cell of each sample, in [0, n_cells).
            Shape of [n,].
        sequences: The layer labels of each cell, in increasing
            lexicographic order.
            Shape of [n_cells, n_layers].
        k_per_layer: Number of layer cells of each layer.
    """

    cell_of_sample: torch.Tensor
    sequences: torch.Tensor
    k_per_layer: list[int]

    @property
    def n_cells(self) -> int:
        return self.sequences.shape[0]

    @property
    def n_possible(self) -> int:
        return int(torch.tensor(self.k_per_layer).prod())

    @property
    def sizes(self) -> torch.Tensor:
        return torch.bincount(self.cell_of_sample, minlength=self.n_cells)

    def members(self, cell: int) -> torch.Tensor:
        return (self.cell_of_sample == cell).nonzero().flatten()

    def to_dict(self) -> dict[str, Any]:
        return {
            "cell_of_sample": self.cell_of_sample.tolist(),
            "sequences": self.sequences.tolist(),
            "k_per_layer": self.k_per_layer,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "CellPartition":
        n_layers = len(state["k_per_layer"])
        return cls(
            cell_of_sample=torch.tensor(state["cell_of_sample"], dtype=torch.long),
            sequences=torch.tensor(state["sequences"], dtype=torch.long).reshape(-1, n_layers),
            k_per_layer=list(state["k_per_layer"]),
        )


@torch.no_grad()
def layer_cells(
    model: MLP,
    x: torch.Tensor,
    k_per_layer: list[int] | int,
    seed: int,
    cov_kind: CovKind | str = CovKind.FULL,
    max_iter: int = 100,
    tol: float = 1e-6,
    disable_logs: bool = True,
) -> LayerClusterings:
    """Cluster the hidden outputs of every layer.

    ---
    Args:
        model: The trained network.
        x: The training inputs.
            Shape of [n, p].
        k_per_layer: Number of components of each layer, or a single value
            shared by all layers.
        seed: Layer `l` is fitted with seed `seed + l`.
        cov_kind: The covariance structure of the mixtures.
        max_iter: Maximum number of EM steps.
        tol: EM tolerance.
        disable_logs: Hide the progress bar.

    ---
    Returns:
        The fitted mixtures.
    """
    if isinstance(k_per_layer, int):
        k_per_layer = [k_per_layer] * model.n_hidden
    assert len(k_per_layer) == model.n_hidden, "One K per hidden layer is required."

    hidden = model.hidden_outputs(x)
    per_layer = []
    for layer, (z, k) in enumerate(
        tqdm(zip(hidden, k_per_layer), desc="Layer", total=len(hidden), disable=disable_logs)
    ):
        gmm = fit_gmm(z, k, cov_kind, seed + layer, max_iter, tol)
        logger.info(
            "Layer %d clustered into %d components (log-likelihood %.6g).",
            layer,
            k,
            gmm.log_likelihood,
        )
        per_layer.append(gmm)

    return LayerClusterings(per_layer)


def lexicographic_ranks(labels: torch.Tensor, k_per_layer: list[int]) -> torch.Tensor:
    """Rank of each label sequence among all sequences in lexicographic order.

    ---
    Args:
        labels: The layer labels of each sample.
            Shape of [n, n_layers].
        k_per_layer: Number of layer cells of each layer.

    ---
    Returns:
        The ranks, in [0, prod(k_per_layer)).
            Shape of [n,].
    """
    strides = torch.ones(len(k_per_layer), dtype=torch.long)
    for layer in range(len(k_per_layer) - 2, -1, -1):
        strides[layer] = strides[layer + 1] * k_per_layer[layer + 1]
    return (labels * strides).sum(dim=1)


@torch.no_grad()
def layer_labels(layers: LayerClusterings, model: MLP, x: torch.Tensor) -> torch.Tensor:
    """MAP component of each sample at every layer, shape of [n, n_layers]."""
    hidden = model.hidden_outputs(x)
    assert len(hidden) == layers.n_layers, "Layer count mismatch."
    return torch.stack(
        [gmm.map_assign(z) for gmm, z in zip(layers.per_layer, hidden)], dim=1
    )


def assign_cells(layers: LayerClusterings, model: MLP, x: torch.Tensor) -> CellPartition:
    """Label each sample by its sequence of layer cells and compact the labels."""
    labels = layer_labels(layers, model, x)
    ranks = lexicographic_ranks(labels, layers.k_per_layer)
    occupied, cell_of_sample = torch.unique(ranks, sorted=True, return_inverse=True)

    # Samples of a cell share the same sequence, any of them is representative.
    representative = torch.empty(len(occupied), dtype=torch.long)
    representative[cell_of_sample] = torch.arange(len(ranks))
    partition = CellPartition(cell_of_sample, labels[representative], layers.k_per_layer)

    logger.info(
        "%d occupied cells out of %d possible.", partition.n_cells, partition.n_possible
    )
    return partition
