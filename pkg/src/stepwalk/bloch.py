"""Momentum-space Floquet operator on the (k, phi) torus.

Plane waves are taken as ``alpha_n ~ exp(i k n)`` and quasienergies as
eigenvalues ``exp(-i E)`` with ``E`` in (-pi, pi]. Each step maps ``k`` to
``k + pi`` up to an overall sign, so the four-step operator has period ``pi``
in ``k``: a grid over (-pi, pi] covers the Bloch torus twice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import STEPS_PER_PERIOD, LatticeConfig

DEGENERACY_TOL = 1e-10
K_PERIOD = np.pi


def bloch_step_operator(theta, phase, k) -> np.ndarray:
    """2x2 step operator(s); inputs broadcast, output shape ``(..., 2, 2)``."""
    theta, phase, k = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (theta, phase, k)))
    c, s = np.cos(theta), np.sin(theta)
    left = np.exp(-1j * k) * np.exp(1j * phase)
    right = np.exp(1j * k)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c * left
    out[..., 0, 1] = 1j * s * left
    out[..., 1, 0] = 1j * s * right
    out[..., 1, 1] = c * right
    return out


def bloch_floquet_operator(config: LatticeConfig, k, phi) -> np.ndarray:
    """``U_4 U_3 U_2 U_1`` of the bulk phase pattern; ``k`` and ``phi`` broadcast."""
    k, phi = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(phi, dtype=float))
    u = np.broadcast_to(np.eye(2, dtype=complex), k.shape + (2, 2))
    for i in range(STEPS_PER_PERIOD):
        step = bloch_step_operator(config.thetas[i], config.bulk_phase_signs[i] * phi, k)
        u = step @ u
    return u


def _fix_gauge(vecs: np.ndarray) -> np.ndarray:
    # first component with non-negligible weight made real positive
    big = np.abs(vecs) > 1e-8
    first = np.argmax(big, axis=-2)
    pick = np.take_along_axis(vecs, first[..., None, :], axis=-2)
    phase = np.exp(-1j * np.angle(pick))
    return vecs * phase


def quasienergies(u: np.ndarray):
    """Quasienergies and eigenvectors of 2x2 unitaries.

    Returns ``(energies, vectors, degenerate)`` where ``energies[..., 0] <=
    energies[..., 1]``, ``vectors[..., :, j]`` is the eigenvector of band ``j``
    and ``degenerate`` flags splittings below ``DEGENERACY_TOL`` at either
    gap center.
    """
    u = np.asarray(u, dtype=complex)
    vals, vecs = np.linalg.eig(u)
    energies = -np.angle(vals)
    energies = np.where(energies <= -np.pi, energies + 2 * np.pi, energies)
    vecs = vecs / np.linalg.norm(vecs, axis=-2, keepdims=True)
    vecs = _fix_gauge(vecs)
    order = np.argsort(energies, axis=-1, kind="stable")
    # ties broken by the phase of the second component after gauge fixing
    tie = np.isclose(energies[..., 0], energies[..., 1], atol=DEGENERACY_TOL, rtol=0)
    if np.any(tie):
        ang = np.angle(vecs[..., 1, :])
        alt = np.argsort(ang, axis=-1, kind="stable")
        order = np.where(tie[..., None], alt, order)
    energies = np.take_along_axis(energies, order, axis=-1)
    vecs = np.take_along_axis(vecs, order[..., None, :], axis=-1)
    split = energies[..., 1] - energies[..., 0]
    degenerate = (split < DEGENERACY_TOL) | (2 * np.pi - split < DEGENERACY_TOL)
    if np.any(degenerate):
        # orthonormal basis for the degenerate subspace
        q, _ = np.linalg.qr(vecs[degenerate])
        vecs[degenerate] = _fix_gauge(q)
    return energies, vecs, degenerate


@dataclass
class BandGrid:
    k: np.ndarray
    phi: np.ndarray
    energies: np.ndarray  # (nk, nphi, 2)
    vectors: np.ndarray  # (nk, nphi, 2, 2), last axis is the band
    degenerate: np.ndarray  # (nk, nphi) bool

    @property
    def k_cover(self) -> int:
        """How many times the k grid wraps the Bloch torus."""
        span = self.k[-1] - self.k[0] + (self.k[1] - self.k[0])
        return max(1, int(round(span / K_PERIOD)))


def uniform_axis(n: int) -> np.ndarray:
    """``n`` points spanning (-pi, pi]."""
    return -np.pi + 2 * np.pi * (np.arange(n) + 1) / n


def band_grid(config: LatticeConfig, nk: int = 64, nphi: int = 64) -> BandGrid:
    if nk < 8 or nphi < 8:
        raise ValueError("band grids need at least 8 points per axis")
    k = uniform_axis(nk)
    phi = uniform_axis(nphi)
    u = bloch_floquet_operator(config, k[:, None], phi[None, :])
    energies, vectors, degenerate = quasienergies(u)
    return BandGrid(k, phi, energies, vectors, degenerate)


def gap_distance(energies: np.ndarray, gap_center: float) -> np.ndarray:
    """Distance on the quasienergy circle from ``gap_center``."""
    return np.abs(np.angle(np.exp(1j * (np.asarray(energies) - gap_center))))


def min_gap(grid: BandGrid, gap_center: float) -> float:
    """Width of the gap around ``gap_center`` (0 or pi): twice the closest band approach."""
    return float(2 * gap_distance(grid.energies, gap_center).min())
