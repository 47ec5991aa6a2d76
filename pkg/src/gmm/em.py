"""Expectation-maximization for Gaussian mixtures.

The covariance floor enters the M-step as a fixed penalty
`-lambda / 2 * sum_k tr(Sigma_k^-1)`, with `lambda = n_points * reg`. Each
M-step is then an exact maximizer of the penalized objective, which EM keeps
non-decreasing. Every covariance has eigenvalues of at least `reg`.
"""
import logging

import torch
from einops import einsum, rearrange

from ..data import DTYPE
from ..errors import TooFewPoints
from .constants import EMPTY_COUNT, REG_SCALE, CovKind
from .gmm import Gmm, log_gaussian

logger = logging.getLogger(__name__)


def covariance_floor(points: torch.Tensor) -> float:
    """`REG_SCALE` times the mean variance of the points, or `REG_SCALE` for constant data."""
    mean_variance = points.var(dim=0, unbiased=False).mean().item()
    return REG_SCALE * mean_variance if mean_variance > 0 else REG_SCALE


def m_step(
    points: torch.Tensor,
    responsibilities: torch.Tensor,
    cov_kind: CovKind,
    reg: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Penalized maximization step.

    ---
    Args:
        points: The fitted points.
            Shape of [n_points, d].
        responsibilities: Soft or hard assignments of the points.
            Shape of [n_points, k].
        cov_kind: The covariance structure.
        reg: The covariance floor.

    ---
    Returns:
        priors: Shape of [k,].
        means: Shape of [k, d].
        covariances: Shape of [k, d, d].
    """
    n_points, d = points.shape
    penalty = n_points * reg
    eye = torch.eye(d, dtype=DTYPE)

    counts = responsibilities.sum(dim=0)
    priors = counts / n_points
    means = einsum(responsibilities, points, "n k, n d -> k d") / rearrange(counts, "k -> k 1")

    diffs = rearrange(points, "n d -> 1 n d") - rearrange(means, "k d -> k 1 d")
    scatters = einsum(responsibilities, diffs, diffs, "n k, k n i, k n j -> k i j")

    match cov_kind:
        case CovKind.FULL:
            covariances = (scatters + penalty * eye) / rearrange(counts, "k -> k 1 1")
        case CovKind.DIAGONAL:
            variances = torch.diagonal(scatters, dim1=1, dim2=2) + penalty
            covariances = torch.diag_embed(variances / rearrange(counts, "k -> k 1"))
        case CovKind.SPHERICAL:
            traces = torch.diagonal(scatters, dim1=1, dim2=2).sum(dim=1)
            variances = (traces + d * penalty) / (d * counts)
            covariances = rearrange(variances, "k -> k 1 1") * eye
        case CovKind.POOLED:
            pooled = (scatters.sum(dim=0) + penalty * eye) / n_points
            covariances = pooled.expand(len(counts), d, d).clone()

    # Exact symmetry.
    covariances = (covariances + covariances.transpose(1, 2)) / 2
    return priors, means, covariances


def penalized_objective(
    log_joint: torch.Tensor, covariances: torch.Tensor, cov_kind: CovKind, penalty: float
) -> tuple[float, float]:
    """Returns the data log-likelihood and the penalized objective."""
    log_likelihood = torch.logsumexp(log_joint, dim=1).sum()
    if cov_kind == CovKind.POOLED:
        covariances = covariances[:1]
    precision_traces = torch.diagonal(torch.linalg.inv(covariances), dim1=1, dim2=2).sum()
    objective = log_likelihood - 0.5 * penalty * precision_traces
    return log_likelihood.item(), objective.item()


def kmeans_plus_plus(points: torch.Tensor, k: int, rng: torch.Generator) -> torch.Tensor:
    """Seeded k-means++ choice of `k` initial centers.

    Falls back to uniform sampling when every point is already a center.

    ---
    Returns:
        The indices of the chosen points.
            Shape of [k,].
    """
    n_points = points.shape[0]
    centers = [int(torch.randint(n_points, (1,), generator=rng))]
    distances = ((points - points[centers[0]]) ** 2).sum(dim=1)

    for _ in range(1, k):
        if distances.sum() > 0:
            center = int(torch.multinomial(distances, 1, generator=rng))
        else:
            center = int(torch.randint(n_points, (1,), generator=rng))
        centers.append(center)
        distances = torch.minimum(distances, ((points - points[center]) ** 2).sum(dim=1))

    return torch.tensor(centers)


def _one_hot(labels: torch.Tensor, k: int) -> torch.Tensor:
    return torch.nn.functional.one_hot(labels, k).to(DTYPE)


def _reinitialize_empty(
    points: torch.Tensor, responsibilities: torch.Tensor, flags: list[str]
) -> torch.Tensor:
    """Moves each empty component onto the point it explains the least."""
    counts = responsibilities.sum(dim=0)
    max_responsibilities = responsibilities.max(dim=1).values.clone()
    for component in (counts < EMPTY_COUNT).nonzero().flatten().tolist():
        point = int(torch.argmin(max_responsibilities))
        max_responsibilities[point] = float("inf")
        logger.warning("Component %d is empty, reinitialized on point %d.", component, point)
        responsibilities = responsibilities.clone()
        responsibilities[point] = 0.0
        responsibilities[point, component] = 1.0
        if "reinitialized" not in flags:
            flags.append("reinitialized")
    return responsibilities


def fit_gmm(
    points: torch.Tensor,
    k: int,
    cov_kind: CovKind | str = CovKind.FULL,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> Gmm:
    """Fit a Gaussian mixture with EM from a k-means++ initialization.

    ---
    Args:
        points: The points to cluster.
            Shape of [n_points, d].
        k: Number of components.
        cov_kind: The covariance structure.
        seed: Seed of the initialization.
        max_iter: Maximum number of EM steps.
        tol: EM stops once the objective gains less than this.

    ---
    Returns:
        The fitted mixture.
    """
    cov_kind = CovKind(cov_kind)
    assert points.dim() == 2 and points.shape[1] >= 1, "Points must be a [n, d] matrix."
    assert k >= 1, "At least one component is required."
    n_points, d = points.shape
    if n_points < k:
        raise TooFewPoints(f"Cannot fit {k} components on {n_points} points.")

    points = points.to(DTYPE)
    reg = covariance_floor(points)
    penalty = n_points * reg
    flags = []

    # Hard initialization from the nearest seeded center.
    rng = torch.Generator().manual_seed(seed)
    centers = points[kmeans_plus_plus(points, k, rng)]
    distances = ((rearrange(points, "n d -> n 1 d") - centers) ** 2).sum(dim=2)
    responsibilities = _one_hot(torch.argmin(distances, dim=1), k)

    history = []
    for _ in range(max_iter + 1):
        responsibilities = _reinitialize_empty(points, responsibilities, flags)
        priors, means, covariances = m_step(points, responsibilities, cov_kind, reg)

        log_joint = log_gaussian(points, means, covariances) + torch.log(priors)
        log_likelihood, objective = penalized_objective(log_joint, covariances, cov_kind, penalty)
        history.append(objective)

        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        responsibilities = torch.softmax(log_joint, dim=1)

    counts = responsibilities.sum(dim=0)
    if torch.any(counts < d + 1):
        flags.append("floored")
        logger.warning(
            "Some components hold fewer than %d points, their covariances are floored.",
            d + 1,
        )

    return Gmm(
        priors=priors,
        means=means,
        covariances=covariances,
        cov_kind=cov_kind,
        log_likelihood=log_likelihood,
        objective_history=history,
        flags=flags,
    )


def gmm_from_labels(
    points: torch.Tensor,
    labels: torch.Tensor,
    k: int,
    cov_kind: CovKind | str,
    reg: float | None = None,
) -> Gmm:
    """One hard M-step: Gaussians estimated from a known partition of the points.

    ---
    Args:
        points: The points.
            Shape of [n_points, d].
        labels: The component of each point. Every component must hold a point.
            Shape of [n_points,].
        k: Number of components.
        cov_kind: The covariance structure.
        reg: The covariance floor. Defaults to the floor of the points.

    ---
    Returns:
        The mixture with priors `n_k / n_points`.
    """
    cov_kind = CovKind(cov_kind)
    points = points.to(DTYPE)
    responsibilities = _one_hot(labels.long(), k)
    assert torch.all(responsibilities.sum(dim=0) > 0), "Every component needs a point."

    reg = covariance_floor(points) if reg is None else reg
    priors, means, covariances = m_step(points, responsibilities, cov_kind, reg)
    log_joint = log_gaussian(points, means, covariances) + torch.log(priors)

    flags = []
    if torch.any(responsibilities.sum(dim=0) < points.shape[1] + 1):
        flags.append("floored")

    return Gmm(
        priors=priors,
        means=means,
        covariances=covariances,
        cov_kind=cov_kind,
        log_likelihood=torch.logsumexp(log_joint, dim=1).sum().item(),
        flags=flags,
    )
