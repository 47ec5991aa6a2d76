"""Generate random tables with planted piecewise-linear structure."""
import math

import pandas as pd
import torch

from .constants import DTYPE


def region_boundaries(n_regions: int, low: float, high: float) -> torch.Tensor:
    """Equally spaced boundaries along the first covariate."""
    return torch.linspace(low, high, n_regions + 1, dtype=DTYPE)[1:-1]


def planted_regions(
    n: int,
    p: int,
    n_regions: int,
    noise: float,
    generator: torch.Generator,
    warp: float = 0.0,
    coefficient_range: float = 3.0,
    nominal_levels: int = 0,
) -> tuple[pd.DataFrame, torch.Tensor, torch.Tensor]:
    """Generate a regression table whose law changes along `x1`.

    The covariates are uniform on [-2, 2]. Region `r` holds the rows whose
    `x1` falls between the `r`-th and `r+1`-th boundaries and follows its own
    linear law `alpha_r + x^T beta_r`, plus Gaussian noise.

    ---
    Args:
        n: Number of rows.
        p: Number of continuous covariates.
        n_regions: Number of planted regions.
        noise: Standard deviation of the Gaussian noise.
        generator: The random generator to use.
        warp: Amplitude of a nonlinear term `sin(pi * x2)` shared by all regions.
        coefficient_range: Coefficients are uniform on [-range, range].
        nominal_levels: If > 1, adds a nominal column `group` whose level
            shifts the intercept.

    ---
    Returns:
        frame: The table, columns `x1..xp` (and `group`) and target `y`.
        regions: The planted region of each row.
            Shape of [n,].
        coefficients: Intercept followed by slopes, per region.
            Shape of [n_regions, p + 1].
    """
    assert p >= 1 and n_regions >= 1
    assert warp == 0.0 or p >= 2, "The warp acts on x2."

    x = 4 * torch.rand((n, p), generator=generator, dtype=DTYPE) - 2
    coefficients = coefficient_range * (
        2 * torch.rand((n_regions, p + 1), generator=generator, dtype=DTYPE) - 1
    )
    regions = torch.bucketize(x[:, 0], region_boundaries(n_regions, -2.0, 2.0))

    intercepts = coefficients[regions, 0]
    slopes = coefficients[regions, 1:]
    y = intercepts + (x * slopes).sum(dim=1)
    y = y + warp * torch.sin(math.pi * x[:, 1])
    y = y + noise * torch.randn(n, generator=generator, dtype=DTYPE)

    columns = {f"x{j + 1}": x[:, j].tolist() for j in range(p)}
    if nominal_levels > 1:
        groups = torch.randint(nominal_levels, (n,), generator=generator)
        y = y + 0.5 * groups.to(DTYPE)
        columns["group"] = [f"g{g}" for g in groups.tolist()]
    columns["y"] = y.tolist()

    return pd.DataFrame(columns), regions, coefficients
