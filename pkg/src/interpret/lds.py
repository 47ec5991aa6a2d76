"""Explainable dimensions of an EPIC.

A set of dimensions explains an EPIC when the marginal densities restricted to
those dimensions are enough to tell the EPIC apart from the others. The set
is grown greedily, one dimension at a time.
"""
import logging
from dataclasses import dataclass, field
from typing import Any

import torch
from tqdm import tqdm

from ..data import Dataset
from ..errors import ConfigError, EmptyEpic, UnknownEpic
from ..metrics import f1_score
from ..mixture import MlmModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExplainableDims:
    """Result of the greedy search for one EPIC.

    ---
    Parameters:
        epic: The explained EPIC.
        dims: The selected dimensions, in order of selection, 0-based.
        rate: F1-score of the marginal classification with `dims`.
        xi: The rate to exceed.
        found: Whether `rate > xi`.
        history: For each step, the selected dimensions so far, the rate
            and the score of every candidate extension.
    """

    epic: int
    dims: list[int]
    rate: float
    xi: float
    found: bool
    history: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self, feature_names: list[str] | None = None) -> dict[str, Any]:
        state = {
            "epic": self.epic,
            "dims": self.dims,
            "rate": self.rate,
            "xi": self.xi,
            "found": self.found,
            "history": self.history,
        }
        if feature_names is not None:
            state["names"] = [feature_names[dim] for dim in self.dims]
        return state


def check_epic(model: MlmModel, epic: int):
    if not 0 <= epic < model.n_epics:
        raise UnknownEpic(f"EPIC {epic} does not exist, the model has {model.n_epics}.")


def epic_indicator(model: MlmModel, epic: int) -> torch.Tensor:
    """Binary indicator of the training samples of an EPIC."""
    check_epic(model, epic)
    indicator = (model.train_epic_labels == epic).long()
    if indicator.sum() == 0:
        raise EmptyEpic(f"EPIC {epic} has no training sample.")
    return indicator


def marginal_map_classify(
    model: MlmModel, epic: int, dims: list[int], x: torch.Tensor
) -> torch.Tensor:
    """Tell whether points belong to an EPIC using only some dimensions.

    A point is assigned to the EPIC when its weighted marginal density is at
    least the SUM of the weighted marginal densities of all other EPICs,
    not their maximum. Ties go to the EPIC.

    ---
    Args:
        model: The mixture of linear models.
        epic: The EPIC to recognize.
        dims: The dimensions kept, 0-based.
        x: Standardized inputs.
            Shape of [batch_size, p] or [p,].

    ---
    Returns:
        The 0/1 decisions.
            Shape of [batch_size,] or [].
    """
    check_epic(model, epic)
    marginals = [e.density.marginal(dims) for e in model.epics]
    index = torch.tensor(list(dict.fromkeys(dims)))
    x_dims = x[..., index]

    log_weights = torch.stack(
        [m.log_density(x_dims) for m in marginals], dim=-1
    ) + torch.log(model.priors)
    own = log_weights[..., epic]
    if model.n_epics == 1:
        return torch.ones_like(own, dtype=torch.long)

    others = torch.cat([log_weights[..., :epic], log_weights[..., epic + 1 :]], dim=-1)
    return (own >= torch.logsumexp(others, dim=-1)).long()


def explainable_dimensions(
    model: MlmModel,
    train: Dataset,
    epic: int,
    xi: float,
    disable_logs: bool = True,
) -> ExplainableDims:
    """Greedy forward selection of the dimensions explaining an EPIC.

    Starting from no dimension, every one-dimension extension is scored by the
    F1-score of `marginal_map_classify` against the EPIC membership of the
    training samples, and the best extension is kept (lowest index on ties).
    The search stops as soon as the score exceeds `xi` or when every
    dimension is used.

    ---
    Args:
        model: The mixture of linear models.
        train: The training set the model was built on, in raw units.
        epic: The explained EPIC.
        xi: The rate to exceed, in (0, 1).
        disable_logs: Hide the progress bar.

    ---
    Returns:
        The explainable dimensions, `found` being false on failure.
    """
    if not 0 < xi < 1:
        raise ConfigError(f"xi must be in (0, 1), got {xi}.")
    q = epic_indicator(model, epic)
    assert len(q) == train.n, "The training set does not match the model."

    x = model.scaler.transform(train.x)
    selected: list[int] = []
    rate = 0.0
    history = []

    with tqdm(total=train.p, desc=f"LDS EPIC {epic}", disable=disable_logs) as progress:
        while rate <= xi and len(selected) < train.p:
            scores = {
                dim: f1_score(marginal_map_classify(model, epic, selected + [dim], x), q)
                for dim in range(train.p)
                if dim not in selected
            }
            best = max(scores, key=lambda dim: (scores[dim], -dim))
            selected.append(best)
            rate = scores[best]
            history.append({"dims": list(selected), "rate": rate, "scores": scores})
            progress.update()

    found = rate > xi
    if found:
        logger.info("EPIC %d explained by dimensions %s (rate %.3f).", epic, selected, rate)
    else:
        logger.info("No explainable dimensions for EPIC %d (best rate %.3f).", epic, rate)

    return ExplainableDims(epic, selected, rate, xi, found, history)
