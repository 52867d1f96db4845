"""Pulse injection, spatiotemporal records and stroboscopic band tomography.

Tomography follows the measurement: keep the state once per period (after
step 4), Fourier transform over the period index and, for bulk maps, over the
site index. A component ``exp(i k n - i E M)`` shows up at ``(k, E)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bloch import BandGrid, bloch_floquet_operator, quasienergies
from .core import STEPS_PER_PERIOD, FieldState, LatticeConfig, step_evolve

RINGS = ("alpha", "beta")
WINDOWS = {"rectangular": np.ones, "hann": np.hanning}


class LowSignalWarning(UserWarning):
    pass


def inject(config: LatticeConfig, site: int, ring: str = "alpha") -> FieldState:
    if not 0 <= site < config.n_sites:
        raise ValueError(f"site {site} outside lattice of {config.n_sites} sites")
    if site == config.mirror_site:
        raise ValueError(f"site {site} is the mirror cell")
    if ring not in RINGS:
        raise ValueError(f"ring must be one of {RINGS}")
    alpha = np.zeros(config.n_sites, dtype=complex)
    beta = np.zeros(config.n_sites, dtype=complex)
    (alpha if ring == "alpha" else beta)[site] = 1.0
    return FieldState(alpha, beta, 0)


@dataclass
class SpatioTemporalRecord:
    alpha: np.ndarray  # (4 * periods + 1, n_sites)
    beta: np.ndarray
    config: LatticeConfig
    phi: float

    @property
    def periods(self) -> int:
        return (self.alpha.shape[0] - 1) // STEPS_PER_PERIOD

    def stroboscopic(self):
        """Amplitudes at the end of each period, ``M = 0 .. periods``."""
        return self.alpha[::STEPS_PER_PERIOD], self.beta[::STEPS_PER_PERIOD]

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.alpha) ** 2 + np.abs(self.beta) ** 2, axis=1)


def evolve_record(state: FieldState, config: LatticeConfig, phi: float, periods: int) -> SpatioTemporalRecord:
    if periods < 1:
        raise ValueError("periods must be >= 1")
    alphas, betas = [state.alpha], [state.beta]
    for _ in range(STEPS_PER_PERIOD * periods):
        state = step_evolve(state, config, phi)
        alphas.append(state.alpha)
        betas.append(state.beta)
    return SpatioTemporalRecord(np.array(alphas), np.array(betas), config, float(phi))


@dataclass
class TomographyMap:
    axis: np.ndarray  # k or phi
    energies: np.ndarray
    intensity: np.ndarray  # (len(axis), len(energies))
    axis_name: str = "k"
    metadata: dict = field(default_factory=dict)

    def energy_resolution(self) -> float:
        return float(self.energies[1] - self.energies[0])


def _window(name: str, m: int) -> np.ndarray:
    if name not in WINDOWS:
        raise ValueError(f"window must be one of {sorted(WINDOWS)}")
    return WINDOWS[name](m)


def _energy_transform(x: np.ndarray, pad: int, window: str = "rectangular"):
    """Sum over M of ``w[M] x[M] exp(+i E M)`` on an ascending E grid in (-pi, pi]; axis 0 is M."""
    n = x.shape[0] * pad
    w = _window(window, x.shape[0]).reshape((-1,) + (1,) * (x.ndim - 1))
    spec = np.fft.ifft(x * w, n=n, axis=0) * n
    e = 2 * np.pi * np.fft.fftfreq(n)
    e = np.where(e <= -np.pi, e + 2 * np.pi, e)
    order = np.argsort(e)
    return e[order], spec[order]


def _momentum_transform(x: np.ndarray):
    """Sum over n of ``x[..., n] exp(-i k n)`` on an ascending k grid in (-pi, pi]."""
    n = x.shape[-1]
    spec = np.fft.fft(x, axis=-1)
    k = 2 * np.pi * np.fft.fftfreq(n)
    k = np.where(k <= -np.pi, k + 2 * np.pi, k)
    order = np.argsort(k)
    return k[order], spec[..., order]


def stroboscopic_spectrum(record: SpatioTemporalRecord, pad: int = 4, window: str = "rectangular"):
    """``(k, E, alpha_hat, beta_hat)`` with amplitudes shaped ``(n_k, n_E)``.

    Uses the first ``periods`` stroboscopic samples. ``window="hann"`` trades
    peak width for sidelobes that fall off much faster than the rectangular ones.
    """
    a, b = record.stroboscopic()
    a, b = a[:-1], b[:-1]
    k, a_k = _momentum_transform(a)
    _, b_k = _momentum_transform(b)
    e, a_ke = _energy_transform(a_k, pad, window)
    _, b_ke = _energy_transform(b_k, pad, window)
    return k, e, a_ke.T, b_ke.T


def band_tomography_bulk(config: LatticeConfig, phi: float, periods: int = 128, pad: int = 4,
                         site: int = 0, ring: str = "alpha", measure: str = "both",
                         window: str = "rectangular") -> TomographyMap:
    """(k, E) intensity map after a single-site injection on a periodic ring."""
    if config.reflecting:
        warnings.warn("bulk tomography on a reflecting lattice: edge reflections contaminate k-space",
                      UserWarning)
    record = evolve_record(inject(config, site, ring), config, phi, periods)
    k, e, a, b = stroboscopic_spectrum(record, pad, window)
    intensity = {"alpha": np.abs(a) ** 2, "beta": np.abs(b) ** 2, "both": np.abs(a) ** 2 + np.abs(b) ** 2}[measure]
    meta = {"phi": float(phi), "periods": periods, "pad": pad, "window": window,
            "injection": [site, ring], "measure": measure, "sampling": "end of period"}
    return TomographyMap(k, e, intensity, "k", meta)


def band_tomography_phi_scan(config: LatticeConfig, injection=(0, "alpha"), nphi: int = 64,
                             periods: int = 128, pad: int = 4, executor=None,
                             window: str = "rectangular") -> TomographyMap:
    """(phi, E) map: per phi, alpha-ring intensity summed over sites."""
    site, ring = injection
    phis = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi - np.pi

    def column(phi):
        record = evolve_record(inject(config, site, ring), config, phi, periods)
        a, _ = record.stroboscopic()
        e, spec = _energy_transform(a[:-1], pad, window)
        return e, np.sum(np.abs(spec) ** 2, axis=1)

    cols = list(executor.map(column, phis)) if executor is not None else [column(p) for p in phis]
    energies = cols[0][0]
    intensity = np.array([c[1] for c in cols])
    meta = {"periods": periods, "pad": pad, "window": window, "injection": [site, ring],
            "measure": "alpha", "sampling": "end of period"}
    return TomographyMap(phis, energies, intensity, "phi", meta)


def band_peaks(energies: np.ndarray, intensity: np.ndarray) -> np.ndarray:
    """Strongest bin in the upper half (0, pi) and lower half (-pi, 0) of each row.

    Returns indices shaped ``(rows, 2)`` ordered (lower, upper).
    """
    upper = (energies > 0) & (energies < np.pi)
    lower = (energies < 0) & (energies > -np.pi)
    out = np.empty((intensity.shape[0], 2), dtype=int)
    for col, mask in enumerate((lower, upper)):
        idx = np.flatnonzero(mask)
        out[:, col] = idx[np.argmax(intensity[:, idx], axis=1)]
    return out


def eigenvector_tomography(record: SpatioTemporalRecord, k: float, band: str = "upper", pad: int = 4,
                           min_fraction: float = 1e-3):
    """Eigenvector estimate ``(alpha_hat, beta_hat)`` at the band's peak, normalized.

    Returns ``(vector, energy)``. Warns with :class:`LowSignalWarning` when the
    peak holds less than ``min_fraction`` of the intensity at this ``k``.
    """
    if record.config.reflecting:
        raise ValueError("eigenvector tomography needs a periodic-boundary record")
    ks, e, a, b = stroboscopic_spectrum(record, pad)
    i = int(np.argmin(np.abs(np.angle(np.exp(1j * (ks - k))))))
    row = np.abs(a[i]) ** 2 + np.abs(b[i]) ** 2
    j = band_peaks(e, row[None, :])[0, 1 if band == "upper" else 0]
    vec = np.array([a[i, j], b[i, j]])
    norm = np.linalg.norm(vec)
    if row[j] < min_fraction * row.sum() or norm == 0:
        warnings.warn(f"weak {band} band signal at k={ks[i]:.3f}; estimate unreliable", LowSignalWarning)
    return (vec / norm if norm > 0 else vec), float(e[j])


def tomographic_band_grid(config: LatticeConfig, nphi: int = 48, periods: int = 128, pad: int = 4,
                          site: int = 0, ring: str = "alpha") -> BandGrid:
    """Band grid assembled from stroboscopic Fourier data on a periodic ring.

    The k axis is the ring's momentum grid, so ``config.n_sites`` sets ``nk``.
    """
    if config.reflecting:
        raise ValueError("tomographic bands need periodic boundaries")
    phis = -np.pi + 2 * np.pi * (np.arange(nphi) + 1) / nphi
    energies, vectors = [], []
    for phi in phis:
        record = evolve_record(inject(config, site, ring), config, phi, periods)
        k, e, a, b = stroboscopic_spectrum(record, pad)
        peaks = band_peaks(e, np.abs(a) ** 2 + np.abs(b) ** 2)
        rows = np.arange(len(k))[:, None]
        vec = np.stack([a[rows, peaks], b[rows, peaks]], axis=1)  # (nk, 2, band)
        vec = vec / np.linalg.norm(vec, axis=1, keepdims=True)
        energies.append(e[peaks])
        vectors.append(vec)
    energies = np.stack(energies, axis=1)
    vectors = np.stack(vectors, axis=1)
    degenerate = np.zeros(energies.shape[:2], dtype=bool)
    return BandGrid(k, phis, energies, vectors, degenerate)


def eigenvector_fidelity(estimate: np.ndarray, exact: np.ndarray) -> float:
    return float(np.abs(np.vdot(exact, estimate)) ** 2 / (np.vdot(estimate, estimate).real * np.vdot(exact, exact).real))


def exact_band(config: LatticeConfig, k: float, phi: float):
    """Exact ``(energies, vectors)`` at one point, for comparisons."""
    e, v, _ = quasienergies(bloch_floquet_operator(config, k, phi))
    return e, v
