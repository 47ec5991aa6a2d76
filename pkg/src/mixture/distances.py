"""Distances between the local models of two cells."""
import logging

import torch
from tqdm import tqdm

from ..data import DTYPE, TaskKind
from ..linmod import LinearModel, fit_local
from ..partition import CoSupervisedSet

logger = logging.getLogger(__name__)

# Multiple of the largest finite distance replacing infinite ones.
INFINITE_DISTANCE_SCALE = 10.0


def cell_distance_regression(
    model_s: LinearModel,
    model_t: LinearModel,
    set_s: CoSupervisedSet,
    set_t: CoSupervisedSet,
) -> float:
    """Mean squared gap between both models over the samples of both cells."""
    total = 0.0
    for inputs in (set_s.inputs, set_t.inputs):
        total += ((model_s.predict(inputs) - model_t.predict(inputs)) ** 2).sum().item()
    return total / (set_s.inputs.shape[0] + set_t.inputs.shape[0])


def cell_distance_classification(
    model_s: LinearModel,
    model_t: LinearModel,
    set_s: CoSupervisedSet,
    set_t: CoSupervisedSet,
) -> float:
    """Inverse F1-score of the labels of one model against the other, minus one.

    Equals `(fp + fn) / (2 tp)`, and infinity when no sample is labelled
    positive by both models.
    """
    inputs = torch.cat([set_s.inputs, set_t.inputs], dim=0)
    labels_s = model_s.predict(inputs) >= 0.5
    labels_t = model_t.predict(inputs) >= 0.5

    tp = (labels_s & labels_t).sum().item()
    fp = (labels_s & ~labels_t).sum().item()
    fn = (~labels_s & labels_t).sum().item()
    if tp == 0:
        return float("inf")
    return (fp + fn) / (2 * tp)


def cell_models(
    cosets: list[CoSupervisedSet],
    task: TaskKind,
    lasso_alpha: float,
    disable_logs: bool = True,
) -> list[LinearModel]:
    """Fit the local model of every cell on its co-supervised set."""
    return [
        fit_local(coset.inputs, coset.targets, task, lasso_alpha)
        for coset in tqdm(cosets, desc="Cell models", disable=disable_logs)
    ]


def distance_matrix(
    models: list[LinearModel],
    cosets: list[CoSupervisedSet],
    task: TaskKind,
) -> torch.Tensor:
    """Symmetric matrix of pairwise cell distances.

    Infinite distances are replaced by `INFINITE_DISTANCE_SCALE` times the
    largest finite one, so that those pairs are merged last.

    ---
    Returns:
        The distances, with a zero diagonal.
            Shape of [n_cells, n_cells].
    """
    assert len(models) == len(cosets), "One model per cell is required."
    distance = (
        cell_distance_classification
        if task == TaskKind.CLASSIFICATION
        else cell_distance_regression
    )

    n_cells = len(models)
    distances = torch.zeros((n_cells, n_cells), dtype=DTYPE)
    for s in range(n_cells):
        for t in range(s + 1, n_cells):
            distances[s, t] = distances[t, s] = distance(models[s], models[t], cosets[s], cosets[t])

    infinite = torch.isinf(distances)
    if infinite.any():
        largest = distances[~infinite].max().item()
        replacement = INFINITE_DISTANCE_SCALE * largest if largest > 0 else 1.0
        distances[infinite] = replacement
        logger.warning(
            "%d cell pairs have no common positive prediction, their distance is set to %.6g.",
            int(infinite.sum()) // 2,
            replacement,
        )
    return distances
