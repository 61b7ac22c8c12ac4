"""Static figure emission for completed runs.

Renders the two standard diagnostic views as SVG files next to the delimited
output: estimated residual against the square root of the number of degrees
of freedom (the natural abscissa for exponential convergence), and the final
mesh with element extents as bar widths and polynomial degrees as heights.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .adaptive import RunLog
from .mesh import HpMesh


def save_residual_svg(log: RunLog, path) -> None:
    ndof = np.array([r.n_dof for r in log.records], dtype=float)
    total = np.array([r.total for r in log.records], dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.semilogy(np.sqrt(ndof), total, "o-", ms=3.5, lw=1.2, color="tab:blue")
    ax.set_xlabel(r"$\sqrt{\mathrm{DOF}}$")
    ax.set_ylabel("estimated residual")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_mesh_svg(mesh: HpMesh, path) -> None:
    centers = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    fig, ax = plt.subplots(figsize=(5.0, 3.0))
    ax.bar(
        centers,
        mesh.degrees,
        width=mesh.lengths,
        align="center",
        color="tab:blue",
        edgecolor="black",
        linewidth=0.4,
    )
    ax.set_xlim(mesh.a, mesh.b)
    ax.set_xlabel("x")
    ax.set_ylabel("polynomial degree")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
