"""Explainable conditions: the regions found by pruned trees, written as rules."""
import logging
import math
from dataclasses import dataclass
from typing import Any

import torch

from ..data import LEVEL_SEPARATOR, Dataset
from ..errors import ConfigError
from ..mixture import MlmModel
from .lds import epic_indicator
from .tree import DecisionTree, TreeNode, grow_tree, prune_explainable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    """The half-open interval `(low, high]`."""

    low: float = -math.inf
    high: float = math.inf

    def contains(self, values: torch.Tensor) -> torch.Tensor:
        return (values > self.low) & (values <= self.high)

    def render(self, name: str) -> str:
        if self.low == -math.inf:
            return f"{name} <= {self.high:.4g}"
        if self.high == math.inf:
            return f"{name} > {self.low:.4g}"
        return f"{self.low:.4g} < {name} <= {self.high:.4g}"


@dataclass(frozen=True)
class ExplainableCondition:
    """A conjunction of intervals selecting a prominent region of an EPIC.

    ---
    Parameters:
        epic: The explained EPIC.
        intervals: The interval of each constrained variable, 0-based.
            Unconstrained variables are absent.
        covered: Number of training samples in the region.
        purity: Fraction of those samples belonging to the EPIC.
        depth: Depth of the region in the tree.
    """

    epic: int
    intervals: dict[int, Interval]
    covered: int
    purity: float
    depth: int

    def mask(self, x: torch.Tensor) -> torch.Tensor:
        """Rows of `x` satisfying the condition."""
        selected = torch.ones(len(x), dtype=torch.bool)
        for var, interval in self.intervals.items():
            selected &= interval.contains(x[:, var])
        return selected

    def clauses(
        self, feature_names: list[str], levels: dict[str, list[str]], fold: bool = True
    ) -> list[str]:
        """Human-readable clauses.

        Dummy variables are written `var = 0` or `var = 1`, or folded into a
        single clause per nominal column when `fold` is set.
        """
        numeric = []
        equal: dict[str, str] = {}
        excluded: dict[str, list[str]] = {}
        for var, interval in sorted(self.intervals.items()):
            name = feature_names[var]
            origin, _, level = name.rpartition(LEVEL_SEPARATOR)
            if origin not in levels:
                numeric.append(interval.render(name))
            elif not fold:
                numeric.append(f"{name} = {int(interval.low >= 0.5)}")
            elif interval.low >= 0.5:
                equal[origin] = level
            elif interval.high < 1:
                excluded.setdefault(origin, []).append(level)
            else:
                numeric.append(interval.render(name))

        nominal = []
        for origin in sorted(set(equal) | set(excluded)):
            if origin in equal:
                nominal.append(f"{origin} = {equal[origin]}")
                continue

            out = sorted(excluded[origin])
            remaining = [level for level in levels[origin] if level not in out]
            if len(remaining) == 1:
                nominal.append(f"{origin} = {remaining[0]}")
            elif len(out) == 1:
                nominal.append(f"{origin} != {out[0]}")
            else:
                nominal.append(f"{origin} not in {{{', '.join(out)}}}")

        return numeric + nominal

    def render(
        self, feature_names: list[str], levels: dict[str, list[str]], fold: bool = True
    ) -> str:
        clauses = self.clauses(feature_names, levels, fold)
        return " and ".join(clauses) if clauses else "always"

    def to_dict(self, feature_names: list[str] | None = None) -> dict[str, Any]:
        intervals = [
            {
                "var": var,
                "low": None if interval.low == -math.inf else interval.low,
                "high": None if interval.high == math.inf else interval.high,
            }
            for var, interval in sorted(self.intervals.items())
        ]
        if feature_names is not None:
            for entry in intervals:
                entry["name"] = feature_names[entry["var"]]
        return {
            "epic": self.epic,
            "intervals": intervals,
            "covered": self.covered,
            "purity": self.purity,
            "depth": self.depth,
        }


def path_to_condition(tree: DecisionTree, leaf: TreeNode, epic: int) -> ExplainableCondition:
    """Intersect the splits from the root to a node into one interval per variable.

    ---
    Args:
        tree: The tree holding the node.
        leaf: The node, usually returned by `prune_explainable`.
        epic: The explained EPIC.

    ---
    Returns:
        The condition selecting exactly the training samples of the node.
    """
    bounds: dict[int, tuple[float, float]] = {}
    node = tree.root
    for var, threshold, is_left in leaf.path:
        assert node.split_var == var and node.threshold == threshold, "Node not in the tree."
        low, high = bounds.get(var, (-math.inf, math.inf))
        if is_left:
            bounds[var] = (low, min(high, threshold))
            node = node.left
        else:
            bounds[var] = (max(low, threshold), high)
            node = node.right
    assert node is leaf, "Node not in the tree."

    return ExplainableCondition(
        epic=epic,
        intervals={var: Interval(low, high) for var, (low, high) in bounds.items()},
        covered=leaf.size,
        purity=leaf.purity,
        depth=leaf.depth,
    )


def explain_epic_pr(
    model: MlmModel, train: Dataset, epic: int, psi: float, eta: int
) -> list[ExplainableCondition]:
    """Explainable conditions of an EPIC, largest first.

    A fully grown tree separates the EPIC from the others in raw units, and
    is pruned at the first nodes reaching the purity `psi`.

    ---
    Args:
        model: The mixture of linear models.
        train: The training set the model was built on, in raw units.
        epic: The explained EPIC.
        psi: Minimal purity of the regions, in (0, 1].
        eta: The regions have strictly more than `eta` samples.

    ---
    Returns:
        The conditions, sorted by decreasing coverage. May be empty.
    """
    if not 0 < psi <= 1:
        raise ConfigError(f"psi must be in (0, 1], got {psi}.")
    if eta < 0:
        raise ConfigError(f"eta must be non-negative, got {eta}.")

    q = epic_indicator(model, epic)
    assert len(q) == train.n, "The training set does not match the model."

    tree = grow_tree(train.x, q)
    regions = prune_explainable(tree, q, psi, eta)
    conditions = [path_to_condition(tree, region, epic) for region in regions]
    conditions.sort(key=lambda condition: -condition.covered)

    logger.info(
        "EPIC %d: %d explainable conditions covering %s of %d samples (tree depth %d).",
        epic,
        len(conditions),
        [condition.covered for condition in conditions],
        int(q.sum()),
        tree.depth,
    )
    return conditions
