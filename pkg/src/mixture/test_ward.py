import itertools

import pytest
import torch

from ..errors import BadJ
from .ward import cut, merge_cells, ward_linkage


def random_distances(n: int, seed: int) -> torch.Tensor:
    rng = torch.Generator().manual_seed(seed)
    distances = torch.rand((n, n), generator=rng, dtype=torch.float64)
    distances = distances + distances.T
    distances.fill_diagonal_(0.0)
    return distances


def ward_distance(distances: torch.Tensor, a: list[int], b: list[int]) -> float:
    """Closed form of the Ward distance between two groups of items."""
    n_a, n_b = len(a), len(b)
    between = distances[a][:, b].sum().item() / (n_a * n_b)
    within_a = distances[a][:, a].sum().item() / (2 * n_a**2)
    within_b = distances[b][:, b].sum().item() / (2 * n_b**2)
    return 2 * n_a * n_b / (n_a + n_b) * (between - within_a - within_b)


def brute_force_ward(distances: torch.Tensor) -> list[tuple[list[int], float]]:
    """Merge sequence obtained by evaluating every pair of clusters at each step."""
    clusters = [[i] for i in range(distances.shape[0])]
    merges = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            distance = ward_distance(distances, clusters[a], clusters[b])
            if best is None or distance < best[0]:
                best = (distance, a, b)
        distance, a, b = best
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
        clusters.sort()
        merges.append((merged, distance))
    return merges


@pytest.mark.parametrize("n", [2, 3, 5, 7])
@pytest.mark.parametrize("seed", range(5))
def test_brute_force(n: int, seed: int):
    distances = random_distances(n, seed)
    merges = ward_linkage(distances)
    oracle = brute_force_ward(distances)

    assert len(merges) == n - 1
    for merge, (members, height) in zip(merges, oracle):
        assert list(merge.members) == members
        assert abs(merge.height - height) < 1e-9


def test_cut_extremes():
    distances = random_distances(5, seed=4)
    assert merge_cells(distances, 5) == [[0], [1], [2], [3], [4]]
    assert merge_cells(distances, 1) == [[0, 1, 2, 3, 4]]


def test_cut_partition():
    distances = random_distances(6, seed=5)
    merges = ward_linkage(distances)
    for n_clusters in range(1, 7):
        clusters = cut(6, merges, n_clusters)
        assert len(clusters) == n_clusters
        assert sorted(i for c in clusters for i in c) == list(range(6))


def test_ties():
    distances = torch.ones((4, 4), dtype=torch.float64)
    distances.fill_diagonal_(0.0)
    merges = ward_linkage(distances)
    assert (merges[0].left, merges[0].right) == (0, 1)


def test_obvious_groups():
    points = torch.tensor([0.0, 0.1, 0.2, 5.0, 5.1, 9.0], dtype=torch.float64)
    distances = (points.unsqueeze(0) - points.unsqueeze(1)) ** 2
    assert merge_cells(distances, 3) == [[0, 1, 2], [3, 4], [5]]


@pytest.mark.parametrize("n_epics", [0, 4])
def test_bad_j(n_epics: int):
    with pytest.raises(BadJ):
        merge_cells(random_distances(3, seed=0), n_epics)
