"""Parameter sets of the published figures (angles in units of pi)."""
from __future__ import annotations

import numpy as np

from .core import LatticeConfig

FIG1_THETA_PI = (0.125, 0.25, 0.375, 0.125)
FIG3_THETA_PI = (0.125, 0.25, 0.438, 0.438)
FIG4_THETA_PI = (0.125, 0.25, 0.5, 0.25)
PHASE_DIAGRAM_THETA12_PI = (0.125, 0.25)
BULK_CELL = 22
CELL_COEFFS = (1, 0, 0, 0)
FIG5_PHI = np.pi / 2

# edge schedules per panel and the signed (E=0, E=pi) left-edge counts they produce.
# None marks a count the figure does not state.
FIG3_PANELS = {
    "a": (None, (0, 0)),
    "b": ((1, 0, -1, 1), (-1, -1)),
    "c": ((1, 0, 1, 0), (-2, -2)),
}
FIG4_PANELS = {
    "a": (None, (2, 0)),
    "b": ((1, 0, 1, 0), (0, -2)),
    "c": ((-1, 0, -1, 0), (4, None)),
}
PHASE_DIAGRAM_POINTS = {"pink": ((0.438, 0.438), 0), "green": ((0.5, 0.25), -2)}
FIGURES = ("fig1c", "fig1d", "fig2", "fig3", "fig4", "fig5")


def thetas(theta_pi) -> tuple[float, ...]:
    return tuple(t * np.pi for t in theta_pi)


def strip_config(theta_pi, edge_coeffs=None, local_cells=(), n_sites: int = 64) -> LatticeConfig:
    return LatticeConfig(thetas(theta_pi), n_sites=n_sites, edge_coeffs=edge_coeffs, local_cells=tuple(local_cells))


def ring_config(theta_pi, n_sites: int = 64) -> LatticeConfig:
    return LatticeConfig(thetas(theta_pi), n_sites=n_sites, left_boundary="periodic", right_boundary="periodic")
