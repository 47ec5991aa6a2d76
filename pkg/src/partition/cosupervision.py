import logging
from dataclasses import dataclass

import torch
from tqdm import tqdm

from ..data import DTYPE
from ..errors import EmptyCell
from ..mlp import MLP, OutputLink
from .cells import CellPartition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoSupervisedSet:
    """Original samples of a cell plus samples labelled by the network.

    The combined view lists the originals first.
    """

    cell: int
    original_x: torch.Tensor
    original_y: torch.Tensor
    simulated_x: torch.Tensor
    simulated_y: torch.Tensor

    @property
    def n_original(self) -> int:
        return self.original_x.shape[0]

    @property
    def n_simulated(self) -> int:
        return self.simulated_x.shape[0]

    @property
    def inputs(self) -> torch.Tensor:
        return torch.cat([self.original_x, self.simulated_x], dim=0)

    @property
    def targets(self) -> torch.Tensor:
        return torch.cat([self.original_y, self.simulated_y], dim=0)


def cell_generator(seed: int, cell: int) -> torch.Generator:
    """Generator depending only on the global seed and the cell id."""
    return torch.Generator().manual_seed((seed * 1_000_003 + cell) % 2**63)


@torch.no_grad()
def cosupervise(
    cell: int,
    x: torch.Tensor,
    y: torch.Tensor,
    model: MLP,
    m: int,
    epsilon: float,
    seed: int,
    dummy_mask: torch.Tensor | None = None,
    perturb_dummies: bool = True,
) -> CoSupervisedSet:
    """Augment a cell with `m` points drawn around its mean and labelled by the network.

    The simulated inputs are `mean + sqrt(epsilon) * noise` with standard
    Gaussian noise. Regression labels are the network outputs, classification
    labels are 1 when the predicted probability is at least 0.5.

    ---
    Args:
        cell: The cell id, used to derive the random generator.
        x: The original inputs of the cell.
            Shape of [n_cell, p].
        y: The original targets of the cell.
            Shape of [n_cell,].
        model: The trained network.
        m: Number of simulated points.
        epsilon: Variance of the perturbation.
        seed: The global seed.
        dummy_mask: Which columns are dummies.
            Shape of [p,].
        perturb_dummies: When false, dummy columns stay at the cell mean.

    ---
    Returns:
        The co-supervised set of the cell.
    """
    assert m >= 0 and epsilon >= 0, "Invalid co-supervision parameters."
    if x.shape[0] == 0:
        raise EmptyCell(f"Cell {cell} has no sample.")

    mean = x.mean(dim=0)
    rng = cell_generator(seed, cell)
    noise = torch.randn((m, x.shape[1]), generator=rng, dtype=DTYPE)
    if dummy_mask is not None and not perturb_dummies:
        noise[:, dummy_mask] = 0.0

    simulated_x = mean + epsilon**0.5 * noise
    simulated_y = model.predict(simulated_x)
    if model.output_link == OutputLink.SIGMOID:
        simulated_y = (simulated_y >= 0.5).to(DTYPE)

    return CoSupervisedSet(cell, x, y, simulated_x, simulated_y)


def cosupervise_cells(
    partition: CellPartition,
    x: torch.Tensor,
    y: torch.Tensor,
    model: MLP,
    m: int,
    epsilon: float,
    seed: int,
    dummy_mask: torch.Tensor | None = None,
    perturb_dummies: bool = True,
    disable_logs: bool = True,
) -> list[CoSupervisedSet]:
    """Build the co-supervised set of every cell of the partition."""
    sets = []
    for cell in tqdm(range(partition.n_cells), desc="Co-supervision", disable=disable_logs):
        members = partition.members(cell)
        sets.append(
            cosupervise(
                cell, x[members], y[members], model, m, epsilon, seed, dummy_mask, perturb_dummies
            )
        )

    if model.output_link == OutputLink.SIGMOID:
        n_positive = sum(int(s.simulated_y.sum()) for s in sets)
        logger.info("%d of %d simulated labels are positive.", n_positive, m * len(sets))
    return sets
