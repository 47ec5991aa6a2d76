import math

import pytest
import torch

from ..data import DTYPE, ColumnKind, Dataset, Scaler, TaskKind
from ..errors import ConfigError, UnknownEpic
from ..gmm import CovKind, Gmm
from ..linmod import LinearModel
from ..mixture import Epic, MlmModel
from .conditions import ExplainableCondition, Interval, explain_epic_pr, path_to_condition
from .tree import DecisionTree, TreeNode, grow_tree, prune_explainable

LEVELS = {"season": ["A", "B", "C", "D"]}
NAMES = ["temp", "season:B", "season:C", "season:D"]


def labelled_model(labels: torch.Tensor, p: int) -> MlmModel:
    """A model whose only relevant part is the EPIC of the training samples."""
    epics = []
    for j in range(int(labels.max()) + 1):
        density = Gmm(
            priors=torch.ones(1, dtype=DTYPE),
            means=torch.zeros((1, p), dtype=DTYPE),
            covariances=torch.eye(p, dtype=DTYPE).unsqueeze(0),
            cov_kind=CovKind.FULL,
        )
        local_model = LinearModel(0.0, torch.zeros(p, dtype=DTYPE), TaskKind.REGRESSION)
        prior = (labels == j).to(DTYPE).mean().item()
        epics.append(Epic(local_model, [j], prior, int((labels == j).sum()), density))

    scaler = Scaler(
        torch.zeros(p, dtype=DTYPE),
        torch.ones(p, dtype=DTYPE),
        torch.zeros(p, dtype=torch.bool),
        torch.zeros(p, dtype=torch.bool),
    )
    return MlmModel(epics, TaskKind.REGRESSION, scaler, labels, CovKind.FULL)


def raw_dataset(x: torch.Tensor) -> Dataset:
    names = [f"x{i + 1}" for i in range(x.shape[1])]
    return Dataset(names, x, torch.zeros(len(x), dtype=DTYPE), TaskKind.REGRESSION, [ColumnKind.CONTINUOUS] * x.shape[1])


def test_interval_intersection():
    path = ((0, 5.0, True), (0, 3.0, True), (1, 1.0, False))
    leaf = TreeNode(torch.tensor([0]), 1, 3, path)
    inner = TreeNode(torch.tensor([0, 1]), 1, 2, path[:2], split_var=1, threshold=1.0)
    inner.left, inner.right = TreeNode(torch.tensor([1]), 0, 3, path[:2] + ((1, 1.0, True),)), leaf
    middle = TreeNode(torch.tensor([0, 1, 2]), 1, 1, path[:1], split_var=0, threshold=3.0)
    middle.left, middle.right = inner, TreeNode(torch.tensor([2]), 0, 2, path[:1] + ((0, 3.0, False),))
    root = TreeNode(torch.arange(4), 1, 0, split_var=0, threshold=5.0)
    root.left, root.right = middle, TreeNode(torch.tensor([3]), 0, 1, ((0, 5.0, False),))

    condition = path_to_condition(DecisionTree(root, 2), leaf, epic=0)
    assert condition.intervals == {0: Interval(-math.inf, 3.0), 1: Interval(1.0, math.inf)}
    assert condition.depth == 3
    assert condition.render(["x1", "x2"], {}) == "x1 <= 3 and x2 > 1"


@pytest.mark.parametrize(
    "intervals, fold, expected",
    [
        ({1: Interval(0.5, math.inf)}, True, "season = B"),
        ({1: Interval(0.5, math.inf)}, False, "season:B = 1"),
        ({2: Interval(-math.inf, 0.5)}, False, "season:C = 0"),
        ({2: Interval(-math.inf, 0.5)}, True, "season != C"),
        ({1: Interval(-math.inf, 0.5), 3: Interval(-math.inf, 0.5)}, True, "season not in {B, D}"),
        (
            {1: Interval(-math.inf, 0.5), 2: Interval(-math.inf, 0.5), 3: Interval(-math.inf, 0.5)},
            True,
            "season = A",
        ),
        ({0: Interval(10.0, 25.5), 2: Interval(0.5, math.inf)}, True, "10 < temp <= 25.5 and season = C"),
        ({}, True, "always"),
    ],
)
def test_render(intervals: dict[int, Interval], fold: bool, expected: str):
    condition = ExplainableCondition(0, intervals, covered=1, purity=1.0, depth=len(intervals))
    assert condition.render(NAMES, LEVELS, fold) == expected


@pytest.mark.parametrize("seed", range(4))
def test_condition_selects_node(seed: int):
    rng = torch.Generator().manual_seed(seed)
    x = torch.randn((60, 3), generator=rng, dtype=DTYPE)
    q = (x[:, 0] + 0.5 * torch.randn(60, generator=rng, dtype=DTYPE) > 0).long()
    tree = grow_tree(x, q)

    for node in tree.nodes():
        condition = path_to_condition(tree, node, epic=0)
        assert torch.equal(condition.mask(x).nonzero().flatten(), node.samples)
        assert condition.covered == node.size


def test_planted_region():
    rng = torch.Generator().manual_seed(0)
    x = 4 * torch.rand((200, 2), generator=rng, dtype=DTYPE)
    labels = (x[:, 0] > 2).long()
    model = labelled_model(labels, 2)

    conditions = explain_epic_pr(model, raw_dataset(x), 1, psi=1.0, eta=0)
    assert len(conditions) == 1
    condition = conditions[0]
    assert list(condition.intervals) == [0]
    assert abs(condition.intervals[0].low - 2) < 0.1
    assert condition.intervals[0].high == math.inf
    assert condition.covered == int(labels.sum())
    assert condition.purity == 1.0


@pytest.mark.parametrize("psi, eta", [(1.0, 2), (0.8, 4), (0.6, 10)])
def test_conditions_hold_on_raw_data(psi: float, eta: int):
    rng = torch.Generator().manual_seed(1)
    x = torch.randn((150, 3), generator=rng, dtype=DTYPE)
    labels = ((x[:, 0] > 0.3) | (x[:, 1] < -1)).long()
    labels = torch.where(torch.rand(150, generator=rng) < 0.1, 1 - labels, labels)
    model = labelled_model(labels, 3)

    conditions = explain_epic_pr(model, raw_dataset(x), 1, psi=psi, eta=eta)
    assert [c.covered for c in conditions] == sorted([c.covered for c in conditions], reverse=True)

    selected = torch.zeros(150, dtype=torch.long)
    for condition in conditions:
        mask = condition.mask(x)
        assert mask.sum().item() == condition.covered > eta
        assert labels[mask].to(DTYPE).mean().item() >= psi
        selected += mask.long()
    assert selected.max() <= 1

    tree = grow_tree(x, labels)
    sizes = sorted((node.size for node in prune_explainable(tree, labels, psi, eta)), reverse=True)
    assert [c.covered for c in conditions] == sizes


def test_large_eta_gives_nothing():
    x = torch.arange(10, dtype=DTYPE).unsqueeze(1)
    model = labelled_model((torch.arange(10) >= 5).long(), 1)
    assert explain_epic_pr(model, raw_dataset(x), 1, psi=1.0, eta=5) == []


def test_errors():
    x = torch.arange(4, dtype=DTYPE).unsqueeze(1)
    model = labelled_model(torch.tensor([0, 0, 1, 1]), 1)
    with pytest.raises(UnknownEpic):
        explain_epic_pr(model, raw_dataset(x), 2, psi=1.0, eta=0)
    with pytest.raises(ConfigError):
        explain_epic_pr(model, raw_dataset(x), 0, psi=0.0, eta=0)
    with pytest.raises(ConfigError):
        explain_epic_pr(model, raw_dataset(x), 0, psi=1.0, eta=-1)
