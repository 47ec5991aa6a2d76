"""Prediction scores shared by the reports."""
import logging

import torch

logger = logging.getLogger(__name__)


def rmse(predictions: torch.Tensor, targets: torch.Tensor) -> float:
    assert predictions.shape == targets.shape, "Shapes must match."
    return ((predictions - targets) ** 2).mean().sqrt().item()


def agreement(predictions: torch.Tensor, reference: torch.Tensor) -> float:
    """RMSE between two predictors, e.g. an MLM and its co-supervising network."""
    return rmse(predictions, reference)


def accuracy(labels: torch.Tensor, targets: torch.Tensor) -> float:
    return (labels == targets).to(torch.float64).mean().item()


def f1_score(labels: torch.Tensor, targets: torch.Tensor) -> float:
    """F1-score of binary labels, 0 when no true positive exists."""
    labels, targets = labels.bool(), targets.bool()
    tp = (labels & targets).sum().item()
    fp = (labels & ~targets).sum().item()
    fn = (~labels & targets).sum().item()
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def roc_curve(scores: torch.Tensor, targets: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """False and true positive rates at every distinct score threshold.

    Tied scores are grouped into a single step of the curve.

    ---
    Returns:
        fpr: Starts at 0 and ends at 1.
            Shape of [n_thresholds + 1,].
        tpr: Starts at 0 and ends at 1.
            Shape of [n_thresholds + 1,].
    """
    targets = targets.bool()
    thresholds, inverse = torch.unique(scores, sorted=True, return_inverse=True)
    n_thresholds = len(thresholds)

    positives = torch.zeros(n_thresholds, dtype=torch.float64)
    negatives = torch.zeros(n_thresholds, dtype=torch.float64)
    positives.index_add_(0, inverse, targets.to(torch.float64))
    negatives.index_add_(0, inverse, (~targets).to(torch.float64))

    # From the highest threshold down.
    tps = torch.cat([torch.zeros(1, dtype=torch.float64), positives.flip(0).cumsum(0)])
    fps = torch.cat([torch.zeros(1, dtype=torch.float64), negatives.flip(0).cumsum(0)])
    return fps / fps[-1], tps / tps[-1]


def auc(scores: torch.Tensor, targets: torch.Tensor) -> float:
    """Area under the ROC curve by the trapezoidal rule.

    Returns NaN when a single class is present.
    """
    n_positives = int(targets.bool().sum())
    if n_positives in (0, len(targets)):
        logger.warning("AUC is undefined with a single class.")
        return float("nan")

    fpr, tpr = roc_curve(scores, targets)
    return torch.trapezoid(tpr, fpr).item()
