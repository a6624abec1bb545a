"""Figure rendering for the CLI report paths.

Every report-producing subcommand writes its figures next to the CSV
output it belongs to. The CSV files remain the machine contract; figures
are a convenience rendering of the same data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .assembly import SimplexOperator
from .mesh import Mesh, MeshQuality

__all__ = [
    "save_operator_nodes_plot",
    "save_spy_plot",
    "save_mesh_plot",
    "save_energy_plot",
    "save_convergence_plot",
    "save_maxdt_plot",
]


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_operator_nodes_plot(op: SimplexOperator, path: str | Path) -> Path:
    """Scatter the volume and facet nodes of an assembled operator."""
    fig, ax = plt.subplots(figsize=(4.5, 4.2))
    boundary = op.boundary_nodes()
    xy = op.coords[:, :2]
    if op.d == 3:
        # project along the view direction (1,1,1) for a readable scatter
        basis = np.array([[1, -1, 0], [1, 1, -2]], dtype=float)
        basis /= np.linalg.norm(basis, axis=1)[:, None]
        xy = op.coords @ basis.T
    ax.plot(xy[:, 0], xy[:, 1], "k.", ms=4, label="volume nodes")
    ax.plot(xy[boundary, 0], xy[boundary, 1], "o", mfc="none", mec="tab:red",
            ms=7, lw=0.8, label="facet nodes")
    ax.set_aspect("equal")
    ax.set_title(f"{op.family} d={op.d} n1={op.n1}: {op.n_nodes} nodes")
    ax.legend(loc="upper right", fontsize=8)
    return _finish(fig, path)


def save_spy_plot(op: SimplexOperator, path: str | Path) -> Path:
    fig, axes = plt.subplots(1, op.d, figsize=(4.0 * op.d, 4.2))
    for i, ax in enumerate(np.atleast_1d(axes)):
        ax.spy(op.D[i], markersize=max(0.3, 60.0 / op.n_nodes))
        ax.set_title(f"derivative matrix {i + 1} ({op.D[i].nnz} nnz)")
    return _finish(fig, path)


def save_mesh_plot(mesh: Mesh, quality: MeshQuality, path: str | Path) -> Path:
    if mesh.d == 2:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.2))
        tri = mesh.elements
        tpc = ax1.tripcolor(
            mesh.vertices[:, 0], mesh.vertices[:, 1], tri,
            facecolors=quality.aspect, cmap="viridis", edgecolors="k", lw=0.1,
        )
        fig.colorbar(tpc, ax=ax1, label="aspect ratio")
        ax1.set_aspect("equal")
        ax1.set_title(f"{mesh.n_elements} elements")
        ax2.hist(quality.max_angle_deg, bins=40, color="tab:blue")
        ax2.set_xlabel("max interior angle (deg)")
        ax2.set_ylabel("elements")
    else:
        fig, ax = plt.subplots(figsize=(5, 4.2))
        ax.hist(quality.aspect, bins=40, color="tab:blue")
        ax.set_xlabel("aspect ratio")
        ax.set_ylabel("elements")
        ax.set_title(f"{mesh.n_elements} elements")
    return _finish(fig, path)


def save_energy_plot(energy: np.ndarray, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    e0 = energy[0, 1]
    ax.plot(energy[:, 0], energy[:, 1] - e0, "-", lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("E(t) - E(0)")
    ax.set_title("energy history")
    return _finish(fig, path)


def save_convergence_plot(rows, path: str | Path) -> Path:
    """Log-log error plot; ``rows`` as (n_e, dof, h, err_h, err_inf)."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    h = np.array([r[2] for r in rows])
    eh = np.array([r[3] for r in rows])
    ei = np.array([r[4] for r in rows])
    ax.loglog(h, eh, "o-", label="H-norm")
    ax.loglog(h, ei, "s--", label="max")
    ax.set_xlabel("nominal spacing  n_e^(-1/d)")
    ax.set_ylabel("error at final time")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def save_maxdt_plot(trace, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for marker, color, label, keep in (
        ("o", "tab:green", "stable", True),
        ("x", "tab:red", "unstable", False),
    ):
        idx = [i for i, t in enumerate(trace) if t[2] == keep]
        ax.plot(idx, [trace[i][0] for i in idx], marker, color=color,
                label=label, ls="none")
    ax.set_yscale("log")
    ax.set_xlabel("probe")
    ax.set_ylabel("dt")
    ax.set_title("stable time-step search")
    ax.legend()
    return _finish(fig, path)
