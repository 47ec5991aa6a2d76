"""Fully grown CART trees and their pruning into prominent regions.

Splits minimize the weighted Gini impurity. A split `(var, threshold)` sends
the samples with `x[var] <= threshold` to the left child.
"""
from dataclasses import dataclass, field
from typing import Iterator

import torch

from ..data import DTYPE


@dataclass(eq=False)
class TreeNode:
    """A node of the decision tree.

    ---
    Parameters:
        samples: Indices of the training samples reaching the node.
            Shape of [size,].
        positives: Number of class-1 samples reaching the node.
        depth: Depth of the node, 0 for the root.
        path: The splits from the root, as `(var, threshold, is_left)`.
        split_var: The split variable, `None` for leaves.
        threshold: The split threshold, `None` for leaves.
    """

    samples: torch.Tensor
    positives: int
    depth: int
    path: tuple[tuple[int, float, bool], ...] = ()
    split_var: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def purity(self) -> float:
        """Fraction of class-1 samples."""
        return self.positives / self.size

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def children(self) -> list["TreeNode"]:
        return [] if self.is_leaf else [self.left, self.right]


@dataclass
class DecisionTree:
    root: TreeNode
    n_features: int
    n_samples: int = field(init=False)

    def __post_init__(self):
        self.n_samples = self.root.size

    def nodes(self) -> Iterator[TreeNode]:
        """Depth-first traversal, left child first."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[TreeNode]:
        return [node for node in self.nodes() if node.is_leaf]

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes())


def gini_scores(values: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Weighted Gini impurity of every split position of sorted values.

    The split at position `i` separates the first `i + 1` sorted values from
    the others. Positions between equal values are not splits and score `inf`.

    ---
    Args:
        values: Sorted values of a variable.
            Shape of [n,].
        labels: The 0/1 labels, in the same order.
            Shape of [n,].

    ---
    Returns:
        The impurities, `a (n_l - a) / n_l + b (n_r - b) / n_r` with `a` and `b`
        the class-1 counts on each side.
            Shape of [n - 1,].
    """
    n = len(values)
    positives = labels.to(DTYPE).cumsum(dim=0)
    n_left = torch.arange(1, n, dtype=DTYPE)
    n_right = n - n_left
    a = positives[:-1]
    b = positives[-1] - a

    impurity = a * (n_left - a) / n_left + b * (n_right - b) / n_right
    distinct = values[1:] > values[:-1]
    return torch.where(distinct, impurity, torch.inf)


def best_split(x: torch.Tensor, labels: torch.Tensor) -> tuple[int, float] | None:
    """Split minimizing the weighted Gini impurity.

    Ties go to the lowest variable, then to the lowest threshold.

    ---
    Returns:
        The split variable and its threshold, the midpoint between two
        consecutive distinct values. `None` when all rows are identical.
    """
    best = None
    for var in range(x.shape[1]):
        values, order = torch.sort(x[:, var], stable=True)
        scores = gini_scores(values, labels[order])
        position = int(torch.argmin(scores))
        score = scores[position].item()
        if score == torch.inf:
            continue

        if best is None or score < best[0]:
            threshold = (values[position].item() + values[position + 1].item()) / 2
            best = (score, var, threshold)

    return None if best is None else (best[1], best[2])


def grow_tree(x: torch.Tensor, q: torch.Tensor) -> DecisionTree:
    """Grow a classification tree until every leaf is pure, a single
    sample, or a set of identical rows.

    ---
    Args:
        x: The covariates.
            Shape of [n, p].
        q: The 0/1 labels.
            Shape of [n,].

    ---
    Returns:
        The fully grown tree.
    """
    assert x.dim() == 2 and len(q) == len(x), "One label per row is required."
    q = q.long()
    root = TreeNode(torch.arange(len(x)), int(q.sum()), depth=0)

    stack = [root]
    while stack:
        node = stack.pop()
        if node.positives in (0, node.size) or node.size == 1:
            continue

        split = best_split(x[node.samples], q[node.samples])
        if split is None:
            continue

        var, threshold = split
        goes_left = x[node.samples, var] <= threshold
        children = []
        for is_left, mask in [(True, goes_left), (False, ~goes_left)]:
            samples = node.samples[mask]
            children.append(
                TreeNode(
                    samples=samples,
                    positives=int(q[samples].sum()),
                    depth=node.depth + 1,
                    path=node.path + ((var, threshold, is_left),),
                )
            )

        node.split_var, node.threshold = var, threshold
        node.left, node.right = children
        stack.extend(reversed(children))

    return DecisionTree(root, x.shape[1])


def prune_explainable(
    tree: DecisionTree, q: torch.Tensor, psi: float, eta: int
) -> list[TreeNode]:
    """Find the prominent regions of the class 1.

    Scanning from the root, the first node of each path whose class-1
    fraction reaches `psi` is kept as a leaf and its descendants are ignored.
    Only those of size greater than `eta` are returned. The returned nodes
    never share samples.

    ---
    Args:
        tree: The fully grown tree.
        q: The 0/1 labels the tree was grown on.
            Shape of [n,].
        psi: Minimal class-1 fraction, in (0, 1].
        eta: The returned nodes have strictly more than `eta` samples.

    ---
    Returns:
        The nodes, in depth-first order, left child first.
    """
    assert len(q) == tree.n_samples, "One label per training sample is required."
    q = q.to(DTYPE)

    regions = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if q[node.samples].mean().item() >= psi:
            if node.size > eta:
                regions.append(node)
            continue
        stack.extend(reversed(node.children))

    return regions
