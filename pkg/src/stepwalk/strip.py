"""Finite-lattice Floquet operator, edge unitary and spectral flow in phi.

The strip operator acts on ``(alpha_0..alpha_{N-1}, beta_0..beta_{N-1})``. A
period has an even number of steps, so amplitudes on even and odd sites never
mix at stroboscopic times: the operator is block diagonal in the site parity.
A single-site injection populates one block only, so spectra and flows are
computed per block. ``sublattice="even"`` is the block seen after injecting
at site 0 (or any even site).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from .bloch import band_grid, min_gap
from .core import CELL_WIDTH, LIGHT_CONE, STEPS_PER_PERIOD, LatticeConfig, resolve_phase
from .topology import CLOSURE_TOL, WindingResult, chern_numbers, predicted_edge_count, unitary_winding, winding_from_coeffs

LOCALIZATION_THRESHOLD = 0.5
AMBIGUOUS_OVERLAP = 0.5
GAP_CENTERS = (0.0, np.pi)


class GapClosedError(RuntimeError):
    pass


class DelocalizedCrossingWarning(UserWarning):
    pass


@dataclass
class StripOperator:
    matrix: np.ndarray
    phi: float
    config: LatticeConfig


def step_matrix(config: LatticeConfig, step: int, phi: float) -> np.ndarray:
    """Dense ``2N x 2N`` matrix of one step, assembled entry by entry."""
    n_sites = config.n_sites
    u = np.zeros((2 * n_sites, 2 * n_sites), dtype=complex)
    for n in range(n_sites):
        theta = np.pi / 2 if n == config.mirror_site else config.thetas[step - 1]
        c, s = np.cos(theta), np.sin(theta)
        right = (n + 1) % n_sites
        left = (n - 1) % n_sites
        ph = np.exp(1j * resolve_phase(config, right, step, phi))
        u[right, n] += c * ph
        u[right, n_sites + n] += 1j * s * ph
        u[n_sites + left, n] += 1j * s
        u[n_sites + left, n_sites + n] += c
    return u


def strip_floquet_operator(config: LatticeConfig, phi: float) -> StripOperator:
    x = np.eye(2 * config.n_sites, dtype=complex)
    for step in range(1, STEPS_PER_PERIOD + 1):
        x = step_matrix(config, step, phi) @ x
    return StripOperator(x, float(phi), config)


def slot_sites(config: LatticeConfig) -> np.ndarray:
    sites = np.arange(config.n_sites)
    return np.concatenate([sites, sites])


def sublattice_slots(config: LatticeConfig, sublattice: str = "even") -> np.ndarray:
    parity = {"even": 0, "odd": 1}[sublattice]
    return np.flatnonzero(slot_sites(config) % 2 == parity)


def cyclic_distance(config: LatticeConfig, a, b) -> np.ndarray:
    d = np.abs(np.asarray(a) - np.asarray(b)) % config.n_sites
    return np.minimum(d, config.n_sites - d)


def _check_same_lattice(a: LatticeConfig, b: LatticeConfig):
    if a.thetas != b.thetas or a.n_sites != b.n_sites or a.left_boundary != b.left_boundary:
        raise ValueError("configs must share angles, size and boundaries; only phase schedules may differ")


def extract_edge_unitary(config_edge: LatticeConfig, config_bulk: LatticeConfig | None, phi: float) -> np.ndarray:
    """``U_Edge = X(edge) X(bulk)^-1``; the identity when the schedules agree.

    Step ``m`` of the edge config is ``D_m B_m`` with ``B_m`` the bulk step and
    ``D_m`` diagonal, so ``U_Edge = F_4 F_3 F_2 F_1`` with
    ``F_m = Q_m D_m Q_m^+`` and ``Q_m = B_4 ... B_{m+1}``. Only the columns of
    ``Q_m`` at modified slots enter, which keeps entries outside their light
    cone exactly zero.
    """
    if config_bulk is None:
        config_bulk = config_edge.bulk()
    _check_same_lattice(config_edge, config_bulk)
    dim = 2 * config_edge.n_sites
    u = np.eye(dim, dtype=complex)
    if config_edge == config_bulk:
        return u
    q = np.eye(dim, dtype=complex)
    for step in range(STEPS_PER_PERIOD, 0, -1):
        d = np.array([np.exp(1j * (resolve_phase(config_edge, n, step, phi) - resolve_phase(config_bulk, n, step, phi)))
                      for n in range(config_edge.n_sites)]) - 1
        idx = np.flatnonzero(d)
        if len(idx):
            cols = q[:, idx]
            f = np.eye(dim, dtype=complex) + (cols * d[idx]) @ cols.conj().T
            u = u @ f
        q = q @ step_matrix(config_bulk, step, phi)
    return u


def edge_winding(config_edge: LatticeConfig, config_bulk: LatticeConfig | None = None, samples: int = 256,
                 sublattice: str | None = "even") -> WindingResult:
    """Winding of ``U_Edge(phi)`` over one phi period, on one sublattice block or the whole strip."""
    phis = 2 * np.pi * np.arange(samples + 1) / samples
    idx = None if sublattice is None else sublattice_slots(config_edge, sublattice)
    loop = []
    for phi in phis:
        u = extract_edge_unitary(config_edge, config_bulk, phi)
        loop.append(u if idx is None else u[np.ix_(idx, idx)])
    return unitary_winding(loop)


@dataclass
class StripSpectrum:
    """Eigenphases tracked continuously in phi for one sublattice block.

    ``phi`` has ``nphi + 1`` entries, the last one a full period after the
    first, so branches can be followed around the loop. ``overlaps[j, b]`` is
    the squared overlap of branch ``b`` between samples ``j`` and ``j + 1``.
    """

    phi: np.ndarray
    energies: np.ndarray
    overlaps: np.ndarray
    left_weight: np.ndarray
    right_weight: np.ndarray
    cell_weights: dict = field(default_factory=dict)
    sublattice: str = "even"
    config: LatticeConfig | None = None

    @property
    def nphi(self) -> int:
        return len(self.phi) - 1


def window_masks(config: LatticeConfig, slots: np.ndarray, width: int = LIGHT_CONE) -> dict:
    """Boolean masks over ``slots`` for the left edge, right edge and each local cell."""
    n_sites = config.n_sites
    sites = slot_sites(config)[slots]
    is_beta = slots >= n_sites
    last = config.n_interior - 1
    left = sites < width
    right = (sites > last - width) & (sites <= last)
    if config.mirror_site is not None:
        # the mirror holds beta on its way back to the left end and alpha on its way to the right end
        at_mirror = sites == config.mirror_site
        left |= at_mirror & is_beta
        right |= at_mirror & ~is_beta
    masks = {"left": left, "right": right}
    for n, _ in config.local_cells:
        d = np.minimum(cyclic_distance(config, sites, n), cyclic_distance(config, sites, n + CELL_WIDTH - 1))
        masks[("cell", n)] = d <= width
    return masks


def _eig_unitary(x: np.ndarray):
    t, z = schur(x, output="complex")
    energies = -np.angle(np.diag(t))
    return energies, z


def strip_spectrum_vs_phi(config: LatticeConfig, nphi: int = 128, sublattice: str = "even",
                          width: int = LIGHT_CONE) -> StripSpectrum:
    """Diagonalize the strip operator on a phi grid offset by half a step from 0.

    Gap-center crossings of the ``+/-E`` symmetric spectrum sit at phi = 0 and
    pi; the offset keeps samples off them.
    """
    if nphi < 64:
        raise ValueError("nphi must be >= 64 to track crossings")
    slots = sublattice_slots(config, sublattice)
    masks = window_masks(config, slots, width)
    phis = 2 * np.pi * (np.arange(nphi + 1) + 0.5) / nphi
    energies, overlaps = [], []
    weights = {key: [] for key in masks}
    prev = None
    for phi in phis:
        x = strip_floquet_operator(config, phi).matrix[np.ix_(slots, slots)]
        e, z = _eig_unitary(x)
        if prev is not None:
            ov = np.abs(prev.conj().T @ z) ** 2
            rows, cols = linear_sum_assignment(-ov)
            e, z = e[cols], z[:, cols]
            overlaps.append(ov[rows, cols])
        prev = z
        energies.append(e)
        prob = np.abs(z) ** 2
        for key, mask in masks.items():
            weights[key].append(prob[mask].sum(axis=0))
    cells = {key[1]: np.array(w) for key, w in weights.items() if isinstance(key, tuple)}
    return StripSpectrum(phis, np.array(energies), np.array(overlaps), np.array(weights["left"]),
                         np.array(weights["right"]), cells, sublattice, config)


@dataclass
class SpectralFlowResult:
    gap_center: float
    net_flow_left: int
    net_flow_right: int
    net_flow_cell: dict
    net_flow_total: int
    delocalized: int = 0
    ambiguous: int = 0
    localization_filter: object = "left"
    crossings: dict = field(default_factory=dict)  # unsigned crossing count per filter

    @property
    def net_flow(self) -> int:
        f = self.localization_filter
        if f == "left":
            return self.net_flow_left
        if f == "right":
            return self.net_flow_right
        if f in ("all", "total"):
            return self.net_flow_total
        return self.net_flow_cell[_cell_site(f)]


def _cell_site(f) -> int:
    if isinstance(f, tuple) and f[0] == "cell":
        return int(f[1])
    if isinstance(f, str) and f.startswith("cell"):
        return int(f[4:].strip("(): "))
    raise ValueError(f"unknown localization filter {f!r}")


def check_bulk_gap(config: LatticeConfig, gap_center: float, tol: float = CLOSURE_TOL, n: int = 32) -> float:
    width = min_gap(band_grid(config, n, n), gap_center)
    if width < tol:
        raise GapClosedError(f"bulk gap at E={gap_center:.3f} is closed (width {width:.2e} < {tol:g})")
    return width


def spectral_flow(spectrum: StripSpectrum, gap_center: float, localization_filter="left",
                  threshold: float = LOCALIZATION_THRESHOLD, check_gap: bool = True) -> SpectralFlowResult:
    """Net signed number of branches crossing ``gap_center`` upward as phi advances.

    Crossings are attributed to the edge or cell carrying at least
    ``threshold`` of the state's norm, averaged over the two samples bracketing
    the crossing.
    """
    if check_gap and spectrum.config is not None:
        check_bulk_gap(spectrum.config, gap_center)
    rel = np.angle(np.exp(1j * (spectrum.energies - gap_center)))
    before, after = rel[:-1], rel[1:]
    small = np.abs(after - before) < np.pi / 2
    sign = np.where((before < 0) & (after >= 0) & small, 1, 0) - np.where((before >= 0) & (after < 0) & small, 1, 0)
    j, b = np.nonzero(sign)

    def weight(w):
        return 0.5 * (w[j, b] + w[j + 1, b])

    s = sign[j, b]
    labels = {"left": weight(spectrum.left_weight), "right": weight(spectrum.right_weight)}
    for n, w in spectrum.cell_weights.items():
        labels[("cell", n)] = weight(w)
    localized = np.zeros(len(s), dtype=bool)
    flows, crossings = {}, {}
    for key, w in labels.items():
        hit = w >= threshold
        localized |= hit
        flows[key] = int(s[hit].sum())
        crossings[key] = int(hit.sum())
    delocalized = int((~localized).sum())
    ambiguous = int((spectrum.overlaps[j, b] < AMBIGUOUS_OVERLAP).sum())
    if delocalized:
        warnings.warn(f"{delocalized} crossing(s) of E={gap_center:.3f} by delocalized states; "
                      "the bulk gap may be closing or the threshold is too strict", DelocalizedCrossingWarning)
    return SpectralFlowResult(
        gap_center=float(gap_center),
        net_flow_left=flows["left"],
        net_flow_right=flows["right"],
        net_flow_cell={n: flows[("cell", n)] for n in spectrum.cell_weights},
        net_flow_total=int(s.sum()),
        delocalized=delocalized,
        ambiguous=ambiguous,
        localization_filter=localization_filter,
        crossings={**crossings, "all": len(s)},
    )


def count_edge_states(config: LatticeConfig, nphi: int = 128, localization_filter="left",
                      sublattice: str | None = None, max_nphi: int = 1024) -> dict[float, SpectralFlowResult]:
    """Spectral flow at both gaps, doubling ``nphi`` while any crossing is ambiguous."""
    if sublattice is None:
        site = 0 if localization_filter in ("left", "right", "all") else _cell_site(localization_filter)
        sublattice = "even" if site % 2 == 0 else "odd"
    while True:
        spectrum = strip_spectrum_vs_phi(config, nphi, sublattice)
        results = {g: spectral_flow(spectrum, g, localization_filter) for g in GAP_CENTERS}
        if all(r.ambiguous == 0 for r in results.values()) or nphi * 2 > max_nphi:
            return results
        nphi *= 2


def local_cell_modes(config: LatticeConfig, nphi: int = 128, cell: int | None = None):
    """Spectrum and per-gap flow attributed to a bulk-embedded winding cell."""
    if not config.local_cells:
        raise ValueError("config has no local cells")
    site = config.local_cells[0][0] if cell is None else cell
    sublattice = "even" if site % 2 == 0 else "odd"
    spectrum = strip_spectrum_vs_phi(config, nphi, sublattice)
    flows = {g: spectral_flow(spectrum, g, ("cell", site)) for g in GAP_CENTERS}
    return spectrum, flows


def flow_report(config: LatticeConfig, nphi: int = 128, nk: int = 48, localization_filter="left") -> dict:
    """Measured flows next to the counting-rule prediction.

    For the left edge the prediction at E=0 is ``C_lower + nu``; at E=pi it uses the Chern sum of
    both bands below pi, ``C_lower + C_upper + nu``, which assumes no anomalous
    winding of the bulk.
    """
    cherns = chern_numbers(config, nk, nk)
    coeffs = config.edge_coeffs
    if localization_filter not in ("left", "right", "all") and config.local_cells:
        site = _cell_site(localization_filter)
        coeffs = dict(config.local_cells)[site]
    nu = 0 if coeffs is None else winding_from_coeffs(coeffs)
    flows = count_edge_states(config, nphi, localization_filter)
    if localization_filter in ("left", "all"):
        predicted = {
            "gap0": predicted_edge_count(cherns["lower"], nu),
            "gap_pi": predicted_edge_count(cherns["lower"] + cherns["upper"], nu),
        }
    elif localization_filter == "right":
        # the right end sees the bulk with opposite orientation and no schedule
        predicted = {"gap0": -cherns["lower"], "gap_pi": -(cherns["lower"] + cherns["upper"])}
    else:
        # a cell has the same bulk on both sides, so only its own winding counts
        predicted = {"gap0": nu, "gap_pi": nu}
    measured = {"gap0": flows[0.0].net_flow, "gap_pi": flows[np.pi].net_flow}
    return {
        **measured,
        "predicted": predicted,
        "match": measured == predicted,
        "nu_edge": nu,
        "chern_lower": cherns["lower"],
        "chern_upper": cherns["upper"],
        "filter": str(localization_filter),
        "total_flow": {"gap0": flows[0.0].net_flow_total, "gap_pi": flows[np.pi].net_flow_total},
        "delocalized": {"gap0": flows[0.0].delocalized, "gap_pi": flows[np.pi].delocalized},
    }
