"""SVG figures of the interpretations."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import torch

from ..data import DTYPE
from ..mixture import MlmModel

COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]


def color_of(epic: int) -> str:
    return COLORS[epic % len(COLORS)]


def marginal_density_frame(
    model: MlmModel,
    dims: list[int],
    feature_names: list[str],
    low: torch.Tensor,
    high: torch.Tensor,
    n_points: int = 200,
) -> pd.DataFrame:
    """Weighted 1-D marginal densities of every EPIC, in raw units.

    ---
    Args:
        model: The mixture of linear models.
        dims: The dimensions to evaluate, 0-based.
        feature_names: Names of all the dimensions.
        low: Lower end of the grid of each dimension, in raw units.
            Shape of [p,].
        high: Upper end of the grid of each dimension, in raw units.
            Shape of [p,].
        n_points: Grid size per dimension.

    ---
    Returns:
        One row per grid point with the columns `feature`, `value` and
        `epic_<j>`, the density of EPIC j weighted by its prior.
    """
    frames = []
    for dim in dims:
        grid = torch.linspace(low[dim].item(), high[dim].item(), n_points, dtype=DTYPE)
        mean, std = model.scaler.means[dim], model.scaler.stds[dim]
        standardized = ((grid - mean) / std).unsqueeze(1)

        columns = {"feature": feature_names[dim], "value": grid.tolist()}
        for j, epic in enumerate(model.epics):
            density = epic.density.marginal([dim]).log_density(standardized).exp()
            columns[f"epic_{j}"] = (epic.prior * density / std).tolist()
        frames.append(pd.DataFrame(columns))

    return pd.concat(frames, ignore_index=True)


def draw_marginal_densities(frame: pd.DataFrame, epic: int, filename: Path | str):
    """Plot the curves of `marginal_density_frame`, one panel per feature."""
    features = list(dict.fromkeys(frame["feature"]))
    epic_columns = [column for column in frame.columns if column.startswith("epic_")]

    fig, axes = plt.subplots(1, len(features), figsize=(4 * len(features), 3), squeeze=False)
    for ax, feature in zip(axes[0], features):
        rows = frame[frame["feature"] == feature]
        for column in epic_columns:
            j = int(column.removeprefix("epic_"))
            ax.plot(
                rows["value"],
                rows[column],
                color=color_of(j),
                linewidth=2.5 if j == epic else 1.0,
                label=f"EPIC {j}",
            )
        ax.set_xlabel(feature)
    axes[0][0].set_ylabel("weighted density")
    axes[0][-1].legend()
    fig.suptitle(f"Marginal densities, EPIC {epic} highlighted")
    fig.tight_layout()
    fig.savefig(str(filename), format="svg")
    plt.close(fig)


def draw_joint_density(
    model: MlmModel,
    epic: int,
    dims: tuple[int, int],
    feature_names: list[str],
    low: torch.Tensor,
    high: torch.Tensor,
    filename: Path | str,
    n_points: int = 100,
):
    """Contours of the weighted 2-D marginal density of an EPIC against the
    sum over the other EPICs."""
    first, second = dims
    grid_x = torch.linspace(low[first].item(), high[first].item(), n_points, dtype=DTYPE)
    grid_y = torch.linspace(low[second].item(), high[second].item(), n_points, dtype=DTYPE)
    mesh_x, mesh_y = torch.meshgrid(grid_x, grid_y, indexing="xy")
    points = torch.stack([mesh_x.flatten(), mesh_y.flatten()], dim=1)

    index = torch.tensor([first, second])
    standardized = (points - model.scaler.means[index]) / model.scaler.stds[index]
    jacobian = model.scaler.stds[index].prod()

    own = torch.zeros(len(points), dtype=DTYPE)
    rest = torch.zeros(len(points), dtype=DTYPE)
    for j, e in enumerate(model.epics):
        density = e.prior * e.density.marginal([first, second]).log_density(standardized).exp()
        if j == epic:
            own += density / jacobian
        else:
            rest += density / jacobian

    fig = plt.figure()
    ax = fig.add_subplot(111)
    ax.contour(mesh_x.numpy(), mesh_y.numpy(), own.reshape(mesh_x.shape).numpy(), colors=color_of(epic))
    if model.n_epics > 1:
        ax.contour(
            mesh_x.numpy(),
            mesh_y.numpy(),
            rest.reshape(mesh_x.shape).numpy(),
            colors="gray",
            linestyles="dashed",
        )
    ax.set_xlabel(feature_names[first])
    ax.set_ylabel(feature_names[second])
    fig.suptitle(f"EPIC {epic} (solid) against the other EPICs (dashed)")
    fig.savefig(str(filename), format="svg")
    plt.close(fig)


def draw_coefficient_intervals(
    model: MlmModel, feature_names: list[str], filename: Path | str
):
    """Coefficients of every local model with their confidence intervals."""
    fig = plt.figure(figsize=(max(6, len(feature_names)), 4))
    ax = fig.add_subplot(111)

    width = 0.8 / model.n_epics
    positions = torch.arange(len(feature_names), dtype=DTYPE)
    for j, epic in enumerate(model.epics):
        offsets = (positions - 0.4 + (j + 0.5) * width).numpy()
        estimates = epic.local_model.coefficients.numpy()
        if epic.intervals is None:
            ax.scatter(offsets, estimates, color=color_of(j), label=f"EPIC {j}")
            continue

        errors = torch.stack(
            [epic.intervals.estimates - epic.intervals.low, epic.intervals.high - epic.intervals.estimates]
        )
        ax.errorbar(
            offsets,
            epic.intervals.estimates.numpy(),
            yerr=errors.numpy(),
            fmt="o",
            color=color_of(j),
            label=f"EPIC {j}",
        )

    ax.axhline(0.0, color="black", linewidth=0.5)
    ax.set_xticks(positions.numpy())
    ax.set_xticklabels(feature_names, rotation=45, ha="right")
    ax.set_ylabel("standardized coefficient")
    ax.legend()
    fig.tight_layout()
    fig.savefig(str(filename), format="svg")
    plt.close(fig)
