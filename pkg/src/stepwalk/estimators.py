"""scikit-learn style wrappers around the band, Chern, edge-count and tomography routines.

Parameter sets are rows of ``X``: four splitting angles in radians, optionally
followed by four edge-phase coefficients. That lets the models sit in
pipelines, be cloned and grid-searched like any other estimator.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bloch import band_grid, bloch_floquet_operator, min_gap, quasienergies
from .core import LatticeConfig
from .dynamics import _energy_transform, _momentum_transform
from .strip import count_edge_states
from .topology import TopologyError, berry_curvature, chern_number


def _check_thetas(X, n_features=4):
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] < n_features:
        raise ValueError(f"expected at least {n_features} columns (theta_1..theta_4), got {X.shape[1]}")
    return X


class QuasienergyBands(BaseEstimator):
    """Bulk bands for one angle set; ``predict`` maps (k, phi) rows to (E-, E+)."""

    def __init__(self, thetas=(0.125 * np.pi, 0.25 * np.pi, 0.438 * np.pi, 0.438 * np.pi), nk=64, nphi=64):
        self.thetas = thetas
        self.nk = nk
        self.nphi = nphi

    def fit(self, X=None, y=None):
        self.config_ = LatticeConfig(tuple(self.thetas), left_boundary="periodic", right_boundary="periodic")
        self.grid_ = band_grid(self.config_, self.nk, self.nphi)
        self.gap0_ = min_gap(self.grid_, 0.0)
        self.gap_pi_ = min_gap(self.grid_, np.pi)
        return self

    def predict(self, X):
        check_is_fitted(self, "grid_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (k, phi)")
        energies, _, _ = quasienergies(bloch_floquet_operator(self.config_, X[:, 0], X[:, 1]))
        return energies


class ChernPhaseEstimator(BaseEstimator):
    """Chern number of ``band`` for each angle set; ``nan`` where a gap is closed."""

    def __init__(self, band="upper", nk=48, nphi=48, closure_tol=1e-2):
        self.band = band
        self.nk = nk
        self.nphi = nphi
        self.closure_tol = closure_tol

    def fit(self, X=None, y=None):
        # stateless: every prediction diagonalizes from scratch
        self.n_features_in_ = 4
        return self

    def _one(self, thetas):
        grid = band_grid(LatticeConfig(tuple(thetas), left_boundary="periodic", right_boundary="periodic"),
                         self.nk, self.nphi)
        if min(min_gap(grid, 0.0), min_gap(grid, np.pi)) < self.closure_tol:
            return np.nan
        try:
            return float(chern_number(berry_curvature(grid, self.band)))
        except TopologyError:
            return np.nan

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _check_thetas(X)
        return np.array([self._one(row[:4]) for row in X])


class EdgeStateCounter(BaseEstimator):
    """Left-edge spectral flow at E=0 and E=pi for rows ``(theta_1..4, c_1..4)``."""

    def __init__(self, n_sites=64, nphi=128):
        self.n_sites = n_sites
        self.nphi = nphi

    def fit(self, X=None, y=None):
        self.n_features_in_ = 8
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _check_thetas(X)
        out = np.empty((len(X), 2), dtype=int)
        for i, row in enumerate(X):
            coeffs = None if X.shape[1] < 8 or not np.any(row[4:8]) else tuple(row[4:8])
            config = LatticeConfig(tuple(row[:4]), n_sites=self.n_sites, edge_coeffs=coeffs)
            flows = count_edge_states(config, self.nphi)
            out[i] = [flows[0.0].net_flow, flows[np.pi].net_flow]
        return out


class StroboscopicTomography(TransformerMixin, BaseEstimator):
    """Turn stroboscopic samples ``(periods, n_sites)`` into an (k, E) intensity map.

    ``transform`` accepts one record or a stack ``(n_records, periods, n_sites)``.
    """

    def __init__(self, pad=4):
        self.pad = pad

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        X = np.asarray(X, dtype=complex)
        if X.ndim == 2:
            return self._one(X)
        return np.stack([self._one(x) for x in X])

    def _one(self, x):
        k, xk = _momentum_transform(x)
        e, spec = _energy_transform(xk, self.pad)
        self.k_, self.energies_ = k, e
        return np.abs(spec.T) ** 2
