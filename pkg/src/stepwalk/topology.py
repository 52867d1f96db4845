"""Chern numbers on the (k, phi) torus and windings of phi-dependent unitaries."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bloch import BandGrid, band_grid, min_gap
from .core import LatticeConfig

BANDS = {"lower": 0, "upper": 1}
CHERN_RESIDUE_TOL = 1e-3
CLOSURE_TOL = 1e-2


class TopologyError(ValueError):
    pass


class ChernQuantizationError(TopologyError):
    def __init__(self, total: float, residue: float):
        self.total = total
        self.residue = residue
        super().__init__(f"Berry flux / 2pi = {total:.6f} is not an integer (residue {residue:.2e}); "
                         "bands touch or the grid is too coarse")


class LoopError(TopologyError):
    pass


@dataclass
class BerryGrid:
    plaquette_flux: np.ndarray
    band: str
    k_cover: int = 1

    @property
    def total_flux(self) -> float:
        return float(self.plaquette_flux.sum())


@dataclass
class WindingResult:
    winding: int
    raw_integral: float
    samples: int


def _band_index(band) -> int:
    if band in BANDS:
        return BANDS[band]
    if band in (0, 1):
        return int(band)
    raise ValueError(f"band must be 'lower' or 'upper', got {band!r}")


def plaquette_fluxes(vectors: np.ndarray) -> np.ndarray:
    """Link-variable Berry flux through each plaquette of a periodic grid.

    ``vectors`` has shape ``(n1, n2, dim)``; the flux is minus the argument of
    the product of overlaps around the plaquette (+axis0, +axis1, -axis0, -axis1).
    """
    v = np.asarray(vectors)
    link0 = np.sum(v.conj() * np.roll(v, -1, axis=0), axis=-1)
    link1 = np.sum(v.conj() * np.roll(v, -1, axis=1), axis=-1)
    loop = link0 * np.roll(link1, -1, axis=0) * np.roll(link0, -1, axis=1).conj() * link1.conj()
    return -np.angle(loop)


def berry_curvature(grid: BandGrid, band="upper") -> BerryGrid:
    if np.any(grid.degenerate):
        raise TopologyError("band touching detected on the grid; Berry curvature is undefined there")
    j = _band_index(band)
    flux = plaquette_fluxes(grid.vectors[..., :, j])
    return BerryGrid(flux, "lower" if j == 0 else "upper", grid.k_cover)


def chern_number(berry: BerryGrid) -> int:
    total = berry.total_flux / (2 * np.pi * berry.k_cover)
    c = int(round(total))
    residue = abs(total - c)
    if residue >= CHERN_RESIDUE_TOL:
        raise ChernQuantizationError(total, residue)
    return c


def chern_numbers(config: LatticeConfig, nk: int = 48, nphi: int = 48) -> dict[str, int]:
    grid = band_grid(config, nk, nphi)
    return {band: chern_number(berry_curvature(grid, band)) for band in BANDS}


def unitary_winding(u_loop: Sequence[np.ndarray], closure_tol: float = 1e-9) -> WindingResult:
    """Edge winding ``(1/2pi) \\oint Tr[U^-1 i dU/dphi] dphi`` from the phase of ``det U``.

    ``u_loop`` samples phi over [0, 2pi] with both end points included. The
    trace integral equals ``-(winding of det U)``, so ``exp(+i phi)`` gives -1.
    """
    mats = [np.atleast_2d(np.asarray(u, dtype=complex)) for u in u_loop]
    if len(mats) < 3:
        raise LoopError("need at least 3 samples")
    if np.max(np.abs(mats[0] - mats[-1])) > closure_tol:
        raise LoopError("loop is not closed: U(0) != U(2pi)")
    dets = np.array([np.linalg.det(m) for m in mats])
    steps = np.angle(dets[1:] / dets[:-1])
    if np.max(np.abs(steps)) > np.pi / 2:
        raise LoopError(f"det phase jumps by {np.max(np.abs(steps)):.3f} between samples; sample more densely")
    raw = -float(steps.sum()) / (2 * np.pi)
    return WindingResult(int(round(raw)), raw, len(mats) - 1)


def winding_from_coeffs(coeffs) -> int:
    """Closed-form edge winding ``-(c1 + c2 + c3 + c4)``."""
    total = -sum(Fraction(c) for c in coeffs)
    if total.denominator != 1:
        raise TopologyError(f"coefficient sum {-total} is not an integer; the schedule does not close over phi")
    return int(total)


def predicted_edge_count(chern_below_gap: int, nu_edge: int) -> int:
    return int(chern_below_gap) + int(nu_edge)


@dataclass
class PhaseDiagram:
    theta1: float
    theta2: float
    theta3: np.ndarray
    theta4: np.ndarray
    gap0: np.ndarray
    gap_pi: np.ndarray
    chern_upper: np.ndarray  # float, nan where a gap is closed
    closure_tol: float

    @property
    def closed0(self) -> np.ndarray:
        return self.gap0 < self.closure_tol

    @property
    def closed_pi(self) -> np.ndarray:
        return self.gap_pi < self.closure_tol

    def cell_of(self, theta3: float, theta4: float) -> tuple[int, int]:
        """Index of the cell containing ``(theta3, theta4)``."""
        width = (np.pi / 2) / len(self.theta3)
        i = min(int(theta3 / width), len(self.theta3) - 1)
        j = min(int(theta4 / width), len(self.theta4) - 1)
        return i, j


def phase_cell(theta1, theta2, theta3, theta4, nk=64, nphi=64, closure_tol=CLOSURE_TOL):
    """``(gap0, gap_pi, C_upper or nan)`` for one parameter point."""
    config = LatticeConfig((theta1, theta2, theta3, theta4), n_sites=64)
    grid = band_grid(config, nk, nphi)
    g0, gpi = min_gap(grid, 0.0), min_gap(grid, np.pi)
    c = np.nan
    if g0 >= closure_tol and gpi >= closure_tol:
        try:
            c = chern_number(berry_curvature(grid, "upper"))
        except TopologyError:
            c = np.nan
    return g0, gpi, c


def phase_diagram(theta1: float, theta2: float, resolution: int = 32, nk: int = 64, nphi: int = 64,
                  closure_tol: float = CLOSURE_TOL, executor=None) -> PhaseDiagram:
    """Upper-band Chern number over (theta3, theta4) in [0, pi/2]^2, sampled at cell centers.

    ``executor`` is an optional ``concurrent.futures`` executor; results are
    assembled in grid order so output does not depend on scheduling.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    centers = (np.arange(resolution) + 0.5) * (np.pi / 2) / resolution
    points = [(t3, t4) for t3 in centers for t4 in centers]
    run = (lambda p: phase_cell(theta1, theta2, p[0], p[1], nk, nphi, closure_tol))
    results = list(executor.map(run, points)) if executor is not None else [run(p) for p in points]
    arr = np.array(results, dtype=float).reshape(resolution, resolution, 3)
    return PhaseDiagram(theta1, theta2, centers, centers.copy(), arr[..., 0], arr[..., 1], arr[..., 2], closure_tol)
