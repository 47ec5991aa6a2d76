import math
from dataclasses import dataclass, field
from typing import Any

import torch
from einops import rearrange

from ..data import DTYPE
from ..errors import DegenerateComponent, DimensionMismatch, EmptySubset, IndexOutOfRange
from .constants import CovKind


def log_gaussian(
    x: torch.Tensor, means: torch.Tensor, covariances: torch.Tensor
) -> torch.Tensor:
    """Log density of each point under each Gaussian, through Cholesky factors.

    ---
    Args:
        x: The points.
            Shape of [n_points, d].
        means: The Gaussian means.
            Shape of [k, d].
        covariances: The Gaussian covariances.
            Shape of [k, d, d].

    ---
    Returns:
        The log densities.
            Shape of [n_points, k].
    """
    d = x.shape[1]
    cholesky, info = torch.linalg.cholesky_ex(covariances)
    if torch.any(info != 0):
        component = int(info.nonzero()[0, 0])
        raise DegenerateComponent(f"Covariance of component {component} is not positive definite.")

    diffs = rearrange(x, "n d -> 1 d n") - rearrange(means, "k d -> k d 1")
    solved = torch.linalg.solve_triangular(cholesky, diffs, upper=False)
    mahalanobis = (solved**2).sum(dim=1)
    log_det = 2 * torch.log(torch.diagonal(cholesky, dim1=1, dim2=2)).sum(dim=1)

    log_densities = -0.5 * (d * math.log(2 * math.pi) + rearrange(log_det, "k -> k 1") + mahalanobis)
    return rearrange(log_densities, "k n -> n k")


@dataclass(frozen=True)
class Gmm:
    """A fitted Gaussian mixture.

    Covariances are always stored as full matrices, whatever their structure.

    ---
    Parameters:
        priors: Mixing proportions.
            Shape of [k,].
        means: Component means.
            Shape of [k, d].
        covariances: Component covariances.
            Shape of [k, d, d].
        cov_kind: The covariance structure used during the fit.
        log_likelihood: Log-likelihood of the fitted points.
        objective_history: Penalized log-likelihood after each EM step.
        flags: Non-fatal conditions met during the fit.
    """

    priors: torch.Tensor
    means: torch.Tensor
    covariances: torch.Tensor
    cov_kind: CovKind
    log_likelihood: float = float("nan")
    objective_history: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def _as_batch(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.d:
            raise DimensionMismatch(self.d, x.shape[-1])
        return x.reshape(-1, self.d)

    def log_component_densities(self, x: torch.Tensor) -> torch.Tensor:
        """Log density of the points under each component, priors excluded.

        ---
        Args:
            x: The points.
                Shape of [n_points, d] or [d,].

        ---
        Returns:
            The log densities.
                Shape of [n_points, k] or [k,].
        """
        densities = log_gaussian(self._as_batch(x), self.means, self.covariances)
        return densities if x.dim() == 2 else densities[0]

    def log_joint(self, x: torch.Tensor) -> torch.Tensor:
        """`log pi_k + log phi(x | mu_k, Sigma_k)` for each component."""
        return self.log_component_densities(x) + torch.log(self.priors)

    def log_density(self, x: torch.Tensor) -> torch.Tensor:
        """Log density of the mixture, evaluated with log-sum-exp."""
        return torch.logsumexp(self.log_joint(x), dim=-1)

    def responsibilities(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.log_joint(x), dim=-1)

    def map_assign(self, x: torch.Tensor) -> torch.Tensor:
        """Most probable component of each point, ties going to the lowest index."""
        return torch.argmax(self.log_joint(x), dim=-1)

    def marginal(self, dims: list[int]) -> "Gmm":
        """Restrict every component to the given dimensions.

        ---
        Args:
            dims: The kept dimensions, 0-based.

        ---
        Returns:
            The marginal mixture, with unchanged priors.
        """
        if len(dims) == 0:
            raise EmptySubset("Cannot marginalize over an empty set of dimensions.")
        for dim in dims:
            if not 0 <= dim < self.d:
                raise IndexOutOfRange(f"Dimension {dim} is not in [0, {self.d}).")

        dims = list(dict.fromkeys(dims))
        index = torch.tensor(dims)
        return Gmm(
            priors=self.priors,
            means=self.means[:, index],
            covariances=self.covariances[:, index][:, :, index],
            cov_kind=self.cov_kind,
            flags=list(self.flags),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "cov_kind": self.cov_kind.value,
            "log_likelihood": self.log_likelihood,
            "objective_history": self.objective_history,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, state: dict[str, Any]) -> "Gmm":
        return cls(
            priors=torch.tensor(state["priors"], dtype=DTYPE),
            means=torch.tensor(state["means"], dtype=DTYPE),
            covariances=torch.tensor(state["covariances"], dtype=DTYPE),
            cov_kind=CovKind(state["cov_kind"]),
            log_likelihood=state["log_likelihood"],
            objective_history=list(state["objective_history"]),
            flags=list(state["flags"]),
        )
