"""Agglomerative clustering of cells with Ward's linkage.

The Lance-Williams recurrence is applied directly on the model distances.
"""
from dataclasses import dataclass

import torch

from ..errors import BadJ


@dataclass(frozen=True)
class Merge:
    """Two clusters merged at some height.

    Clusters are identified by the slot of their lowest-slot member: the
    merged cluster keeps the slot `left`.
    """

    left: int
    right: int
    height: float
    members: tuple[int, ...]


def ward_update(
    d_ik: torch.Tensor,
    d_jk: torch.Tensor,
    d_ij: float,
    n_i: int,
    n_j: int,
    n_k: torch.Tensor,
) -> torch.Tensor:
    """Distance from the union of clusters i and j to every cluster k."""
    total = n_i + n_j + n_k
    return ((n_i + n_k) * d_ik + (n_j + n_k) * d_jk - n_k * d_ij) / total


def ward_linkage(distances: torch.Tensor) -> list[Merge]:
    """Merge the closest pair of clusters until a single one remains.

    Among equally close pairs, the lexicographically lowest `(i, j)` wins.

    ---
    Args:
        distances: Symmetric pairwise distances between the items.
            Shape of [n_items, n_items].

    ---
    Returns:
        The `n_items - 1` merges, in order.
    """
    n_items = distances.shape[0]
    assert distances.shape == (n_items, n_items), "Distances must be a square matrix."

    distances = distances.clone().to(torch.float64)
    sizes = torch.ones(n_items, dtype=torch.float64)
    members = {i: (i,) for i in range(n_items)}
    active = torch.ones(n_items, dtype=torch.bool)
    upper = torch.triu(torch.ones((n_items, n_items), dtype=torch.bool), diagonal=1)

    merges = []
    for _ in range(n_items - 1):
        candidates = upper & active.unsqueeze(0) & active.unsqueeze(1)
        masked = torch.where(candidates, distances, torch.inf)
        # `argmin` returns the first minimum in row-major order.
        flat = int(torch.argmin(masked))
        i, j = divmod(flat, n_items)
        height = distances[i, j].item()

        updated = ward_update(
            distances[i], distances[j], height, sizes[i].item(), sizes[j].item(), sizes
        )
        distances[i, :] = updated
        distances[:, i] = updated
        distances[i, i] = 0.0

        sizes[i] += sizes[j]
        active[j] = False
        members[i] = tuple(sorted(members[i] + members.pop(j)))
        merges.append(Merge(i, j, height, members[i]))

    return merges


def cut(n_items: int, merges: list[Merge], n_clusters: int) -> list[list[int]]:
    """Clusters obtained by applying the first `n_items - n_clusters` merges.

    ---
    Returns:
        The members of each cluster, clusters ordered by their lowest member.
    """
    if not 1 <= n_clusters <= n_items:
        raise BadJ(f"The number of EPICs must be in [1, {n_items}], got {n_clusters}.")

    clusters = {i: [i] for i in range(n_items)}
    for merge in merges[: n_items - n_clusters]:
        clusters[merge.left] = sorted(clusters[merge.left] + clusters.pop(merge.right))
    return sorted(clusters.values())


def merge_cells(distances: torch.Tensor, n_epics: int) -> list[list[int]]:
    """Group the cells into `n_epics` clusters with Ward's linkage."""
    n_cells = distances.shape[0]
    if not 1 <= n_epics <= n_cells:
        raise BadJ(f"The number of EPICs must be in [1, {n_cells}], got {n_epics}.")
    return cut(n_cells, ward_linkage(distances), n_epics)
