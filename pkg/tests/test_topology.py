import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepwalk.bloch import band_grid
from stepwalk.core import LatticeConfig
from stepwalk.presets import FIG3_PANELS, FIG3_THETA_PI, FIG4_PANELS, PHASE_DIAGRAM_POINTS, strip_config
from stepwalk.strip import edge_winding, extract_edge_unitary
from stepwalk.topology import (ChernQuantizationError, LoopError, TopologyError, berry_curvature, chern_number,
                               chern_numbers, phase_cell, phase_diagram, plaquette_fluxes, predicted_edge_count,
                               unitary_winding, winding_from_coeffs)

PI = np.pi


def loop(fn, samples=256):
    return [fn(p) for p in np.linspace(0, 2 * PI, samples + 1)]


# --- Berry curvature ---------------------------------------------------------------

def test_constant_vector_has_no_flux():
    v = np.broadcast_to(np.array([0.6, 0.8j]), (16, 16, 2))
    np.testing.assert_array_equal(plaquette_fluxes(v), 0)


def test_fluxes_gauge_invariant(fig4_strip):
    grid = band_grid(fig4_strip, 32, 32)
    v = grid.vectors[..., :, 1]
    phases = np.exp(1j * np.random.default_rng(0).uniform(0, 2 * PI, v.shape[:2]))
    np.testing.assert_allclose(plaquette_fluxes(v * phases[..., None]), plaquette_fluxes(v), atol=1e-12)


def test_fig4_upper_flux(fig4_strip):
    berry = berry_curvature(band_grid(fig4_strip, 48, 48), "upper")
    assert berry.total_flux / berry.k_cover == pytest.approx(-2 * 2 * PI, abs=1e-6)
    assert np.all(np.abs(berry.plaquette_flux) <= PI)


def test_chern_fig3_trivial(fig3_strip):
    assert chern_numbers(fig3_strip) == {"lower": 0, "upper": 0}


def test_chern_fig4(fig4_strip):
    assert chern_numbers(fig4_strip) == {"lower": 2, "upper": -2}


@pytest.mark.parametrize("n", [32, 48, 96])
def test_chern_grid_stability(fig4_strip, n):
    assert chern_numbers(fig4_strip, n, n) == {"lower": 2, "upper": -2}


def test_band_touching_rejected():
    grid = band_grid(LatticeConfig((0, 0, 0, 0)), 16, 16)
    with pytest.raises(TopologyError):
        berry_curvature(grid, "upper")


def test_non_integer_total_rejected(fig4_strip):
    berry = berry_curvature(band_grid(fig4_strip, 16, 16), "upper")
    berry.plaquette_flux = berry.plaquette_flux.copy()
    berry.plaquette_flux[0, 0] += 1.0
    with pytest.raises(ChernQuantizationError) as info:
        chern_number(berry)
    assert info.value.residue > 1e-3


def test_bad_band_name(fig3_strip):
    with pytest.raises(ValueError):
        berry_curvature(band_grid(fig3_strip, 8, 8), "middle")


@settings(max_examples=10, deadline=None)
@given(st.tuples(*[st.floats(0.05, PI / 2 - 0.05)] * 4))
def test_two_band_fluxes_cancel(thetas):
    g0, gpi, _ = phase_cell(*thetas, nk=48, nphi=48)
    if min(g0, gpi) < 0.05:
        return
    c = chern_numbers(LatticeConfig(thetas))
    assert c["lower"] + c["upper"] == 0


# --- windings ----------------------------------------------------------------------

def test_constant_loop_has_zero_winding():
    res = unitary_winding(loop(lambda p: np.eye(3)))
    assert res.winding == 0 and res.samples == 256


def test_scalar_loop_sign():
    # trace formula: exp(-i phi) winds +1, exp(+i phi) winds -1
    assert unitary_winding(loop(lambda p: np.exp(-1j * p))).winding == 1
    assert unitary_winding(loop(lambda p: np.exp(1j * p))).winding == -1


def test_open_loop_rejected():
    with pytest.raises(LoopError, match="closed"):
        unitary_winding([np.exp(0.5j * p) for p in np.linspace(0, 2 * PI, 65)])


def test_undersampled_loop_rejected():
    with pytest.raises(LoopError, match="densely"):
        unitary_winding(loop(lambda p: np.exp(5j * p), samples=8))


@pytest.mark.parametrize("coeffs,nu", [((1, 0, -1, 1), -1), ((1, 0, 1, 0), -2), ((-1, 0, -1, 0), 2),
                                       ((0, 0, 0, 0), 0)])
def test_winding_from_coeffs(coeffs, nu):
    assert winding_from_coeffs(coeffs) == nu


def test_fractional_schedule_rejected():
    with pytest.raises(TopologyError):
        winding_from_coeffs(("1/2", 0, 0, 0))


def test_fig3b_extracted_winding():
    config = strip_config(FIG3_THETA_PI, FIG3_PANELS["b"][0])
    res = edge_winding(config)
    assert res.winding == -1
    assert abs(res.raw_integral - res.winding) < 1e-6


@pytest.mark.parametrize("coeffs", [(1, 0, -1, 1), (1, 0, 1, 0), (-1, 0, -1, 0), (0, 1, 0, 0), (2, -1, 1, 1)])
@pytest.mark.parametrize("sublattice", ["even", "odd"])
def test_extracted_winding_matches_coeffs(coeffs, sublattice):
    config = strip_config(FIG3_THETA_PI, coeffs)
    assert edge_winding(config, sublattice=sublattice).winding == winding_from_coeffs(coeffs)


def test_fractional_phases_do_not_close():
    # integer sum, but exp(i phi / 2) is not 2 pi periodic
    with pytest.raises(LoopError):
        edge_winding(strip_config(FIG3_THETA_PI, ("1/2", "1/2", 0, 0)))


def test_extracted_edge_unitary_is_unitary():
    u = extract_edge_unitary(strip_config(FIG3_THETA_PI, (1, 0, -1, 1)), None, 0.9)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(len(u)), atol=1e-12)


# --- prediction and phase diagram ---------------------------------------------------

@pytest.mark.parametrize("c,nu,n", [(0, -1, -1), (2, -2, 0), (2, 2, 4)])
def test_predicted_edge_count(c, nu, n):
    assert predicted_edge_count(c, nu) == n


@pytest.mark.parametrize("name", sorted(PHASE_DIAGRAM_POINTS))
def test_phase_cell_presets(name):
    (t3, t4), c = PHASE_DIAGRAM_POINTS[name]
    g0, gpi, got = phase_cell(0.125 * PI, 0.25 * PI, t3 * PI, t4 * PI)
    assert got == c and g0 > 1e-2 and gpi > 1e-2


def test_phase_diagram_cells():
    pd = phase_diagram(0.125 * PI, 0.25 * PI, resolution=8, nk=32, nphi=32)
    assert pd.chern_upper.shape == (8, 8)
    assert pd.cell_of(0.438 * PI, 0.438 * PI) == (7, 7)
    assert pd.cell_of(PI / 2, 0.25 * PI) == (7, 4)
    assert pd.chern_upper[pd.cell_of(0.438 * PI, 0.438 * PI)] == 0
    closed = pd.closed0 | pd.closed_pi
    assert np.all(np.isnan(pd.chern_upper[closed]))
    assert set(np.unique(pd.chern_upper[~np.isnan(pd.chern_upper)])) <= {-2.0, 0.0, 2.0}


def test_gap_narrows_toward_phase_boundary():
    # theta3 = 0.375 pi at theta4 = 0.25 pi separates C_upper = +2 from -2
    side = [0.30, 0.33, 0.36, 0.37, 0.374]
    widths = [phase_cell(0.125 * PI, 0.25 * PI, t * PI, 0.25 * PI)[0] for t in side]
    assert np.all(np.diff(widths) < 0)
    assert phase_cell(0.125 * PI, 0.25 * PI, 0.375 * PI, 0.25 * PI)[0] < 1e-2
    before = phase_cell(0.125 * PI, 0.25 * PI, 0.36 * PI, 0.25 * PI)[2]
    after = phase_cell(0.125 * PI, 0.25 * PI, 0.39 * PI, 0.25 * PI)[2]
    assert (before, after) == (2, -2)


def test_fig4_panels_schedule_windings():
    assert [winding_from_coeffs(c) if c else 0 for c, _ in FIG4_PANELS.values()] == [0, -2, 2]
