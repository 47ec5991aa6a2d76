"""The mixture of linear models.

Each EPIC (explainable partition of the input space) groups cells, carries
a local linear model and a Gaussian mixture density built from the single
Gaussians of its cells. Predictions weight the local models by the posterior
probability of each EPIC.
"""
import logging
from dataclasses import dataclass
from typing import Any

import torch

from ..data import DTYPE, Dataset, Scaler, TaskKind
from ..errors import DimensionMismatch, NoStderr
from ..gmm import CovKind, Gmm, gmm_from_labels
from ..linmod import Intervals, LinearModel, confidence_intervals, fit_local
from ..partition import CellPartition, CoSupervisedSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Epic:
    """A group of cells sharing a local model.

    ---
    Parameters:
        local_model: The model refitted on the co-supervised sets of the cells.
        member_cells: The cells of the EPIC, sorted.
        prior: Fraction of the training samples in the EPIC.
        size: Number of training samples in the EPIC.
        density: Mixture of the cells' Gaussians, weighted within the EPIC.
        intervals: Confidence intervals of the local coefficients, if any.
    """

    local_model: LinearModel
    member_cells: list[int]
    prior: float
    size: int
    density: Gmm
    intervals: Intervals | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "local_model": self.local_model.to_dict(),
            "member_cells": self.member_cells,
            "prior": self.prior,
            "size": self.size,
            "density": self.density.to_dict(),
            "intervals": None if self.intervals is None else self.intervals.to_dict(),
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "Epic":
        intervals = state["intervals"]
        return cls(
            local_model=LinearModel.from_dict(state["local_model"]),
            member_cells=list(state["member_cells"]),
            prior=state["prior"],
            size=state["size"],
            density=Gmm.from_dict(state["density"]),
            intervals=None if intervals is None else Intervals.from_dict(intervals),
        )


@dataclass(frozen=True)
class MlmModel:
    """EPICs, in decreasing training size, with the scaler of the raw inputs.

    ---
    Parameters:
        epics: The EPICs.
        task: The task kind.
        scaler: Maps raw inputs to the standardized space of the densities
            and local models.
        train_epic_labels: The EPIC of each training sample.
            Shape of [n,].
        cov_kind: The covariance structure of the cell Gaussians.
    """

    epics: list[Epic]
    task: TaskKind
    scaler: Scaler
    train_epic_labels: torch.Tensor
    cov_kind: CovKind

    @property
    def n_epics(self) -> int:
        return len(self.epics)

    @property
    def p(self) -> int:
        return self.epics[0].local_model.p

    @property
    def priors(self) -> torch.Tensor:
        return torch.tensor([epic.prior for epic in self.epics], dtype=DTYPE)

    def _standardize(self, x_raw: torch.Tensor) -> torch.Tensor:
        if x_raw.shape[-1] != self.p:
            raise DimensionMismatch(self.p, x_raw.shape[-1])
        return self.scaler.transform(x_raw.to(DTYPE))

    def log_joint(self, x: torch.Tensor) -> torch.Tensor:
        """`log prior_j + log f_j(x)` for standardized inputs, shape of [..., n_epics]."""
        densities = [epic.density.log_density(x) for epic in self.epics]
        return torch.stack(densities, dim=-1) + torch.log(self.priors)

    def epic_posteriors(self, x: torch.Tensor) -> torch.Tensor:
        """Posterior probability of each EPIC, for standardized inputs.

        ---
        Args:
            x: The standardized inputs.
                Shape of [batch_size, p] or [p,].

        ---
        Returns:
            The posteriors.
                Shape of [batch_size, n_epics] or [n_epics,].
        """
        if x.shape[-1] != self.p:
            raise DimensionMismatch(self.p, x.shape[-1])
        return torch.softmax(self.log_joint(x), dim=-1)

    def local_predictions(self, x: torch.Tensor) -> torch.Tensor:
        """Prediction of every local model, shape of [..., n_epics]."""
        return torch.stack([epic.local_model.predict(x) for epic in self.epics], dim=-1)

    def posteriors(self, x_raw: torch.Tensor) -> torch.Tensor:
        return self.epic_posteriors(self._standardize(x_raw))

    def assign(self, x_raw: torch.Tensor) -> torch.Tensor:
        """MAP EPIC of raw inputs, ties going to the lowest index."""
        return torch.argmax(self.posteriors(x_raw), dim=-1)

    def predict_soft(self, x_raw: torch.Tensor) -> torch.Tensor:
        """Posterior-weighted local predictions, probabilities for classification."""
        x = self._standardize(x_raw)
        return (self.epic_posteriors(x) * self.local_predictions(x)).sum(dim=-1)

    def predict_hard(self, x_raw: torch.Tensor) -> torch.Tensor:
        """Prediction of the local model of the MAP EPIC."""
        x = self._standardize(x_raw)
        chosen = torch.argmax(self.epic_posteriors(x), dim=-1, keepdim=True)
        return torch.gather(self.local_predictions(x), -1, chosen).squeeze(-1)

    def predict(self, x_raw: torch.Tensor, hard: bool = False) -> torch.Tensor:
        return self.predict_hard(x_raw) if hard else self.predict_soft(x_raw)

    def to_dict(self) -> dict[str, Any]:
        return {
            "epics": [epic.to_dict() for epic in self.epics],
            "task": self.task.value,
            "scaler": self.scaler.to_dict(),
            "train_epic_labels": self.train_epic_labels.tolist(),
            "cov_kind": self.cov_kind.value,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "MlmModel":
        return cls(
            epics=[Epic.from_dict(epic) for epic in state["epics"]],
            task=TaskKind(state["task"]),
            scaler=Scaler.from_dict(state["scaler"]),
            train_epic_labels=torch.tensor(state["train_epic_labels"], dtype=torch.long),
            cov_kind=CovKind(state["cov_kind"]),
        )


def singleton_membership(n_cells: int) -> list[list[int]]:
    """Every cell in its own EPIC."""
    return [[cell] for cell in range(n_cells)]


def order_epics(membership: list[list[int]], sizes: torch.Tensor) -> list[list[int]]:
    """Sort groups of cells by decreasing size, ties by lowest member cell."""
    groups = [sorted(cells) for cells in membership]
    return sorted(groups, key=lambda cells: (-int(sizes[cells].sum()), cells[0]))


def build_mlm(
    train: Dataset,
    scaler: Scaler,
    partition: CellPartition,
    cosets: list[CoSupervisedSet],
    membership: list[list[int]],
    lasso_alpha: float,
    cov_kind: CovKind | str,
    level: float = 0.95,
) -> MlmModel:
    """Refit a local model per EPIC and assemble the cell densities.

    ---
    Args:
        train: The standardized training set the partition was built on.
        scaler: The scaler of the training set.
        partition: The cells of the training samples.
        cosets: The co-supervised set of each cell.
        membership: The cells of each EPIC. Must partition the cells.
        lasso_alpha: L1 penalty of the local models, 0 for unpenalized fits.
        cov_kind: The covariance structure of the cell Gaussians.
        level: Level of the coefficient confidence intervals.

    ---
    Returns:
        The mixture of linear models.
    """
    cov_kind = CovKind(cov_kind)
    covered = sorted(cell for cells in membership for cell in cells)
    assert covered == list(range(partition.n_cells)), "EPICs must partition the cells."
    assert len(cosets) == partition.n_cells, "One co-supervised set per cell is required."

    cell_density = gmm_from_labels(
        train.x, partition.cell_of_sample, partition.n_cells, cov_kind
    )
    sizes = partition.sizes

    epics = []
    epic_of_cell = torch.empty(partition.n_cells, dtype=torch.long)
    for epic_id, cells in enumerate(order_epics(membership, sizes)):
        index = torch.tensor(cells)
        epic_of_cell[index] = epic_id

        xs = torch.cat([cosets[cell].inputs for cell in cells], dim=0)
        ys = torch.cat([cosets[cell].targets for cell in cells], dim=0)
        local_model = fit_local(xs, ys, train.task, lasso_alpha)

        try:
            intervals = confidence_intervals(local_model, level, xs, ys)
        except NoStderr as error:
            logger.warning("No confidence intervals for EPIC %d: %s", epic_id, error)
            intervals = None

        prior = cell_density.priors[index].sum()
        density = Gmm(
            priors=cell_density.priors[index] / prior,
            means=cell_density.means[index],
            covariances=cell_density.covariances[index],
            cov_kind=cov_kind,
            flags=list(cell_density.flags),
        )
        epics.append(
            Epic(
                local_model=local_model,
                member_cells=cells,
                prior=prior.item(),
                size=int(sizes[index].sum()),
                density=density,
                intervals=intervals,
            )
        )

    logger.info(
        "Built %d EPICs of sizes %s.", len(epics), [epic.size for epic in epics]
    )
    return MlmModel(
        epics=epics,
        task=train.task,
        scaler=scaler,
        train_epic_labels=epic_of_cell[partition.cell_of_sample],
        cov_kind=cov_kind,
    )
