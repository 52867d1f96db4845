"""Four-step Floquet walks on a two-ring synthetic lattice: bands, Chern numbers,
edge windings and spectral-flow edge counting."""

__version__ = "0.1.0"

from .bloch import BandGrid, band_grid, bloch_floquet_operator, bloch_step_operator, min_gap, quasienergies
from .core import (ConfigError, FieldState, LatticeConfig, floquet_evolve, resolve_phase, step_evolve,
                   validate_config)
from .dynamics import (SpatioTemporalRecord, TomographyMap, band_tomography_bulk, band_tomography_phi_scan,
                       eigenvector_tomography, evolve_record, inject, tomographic_band_grid)
from .strip import (SpectralFlowResult, StripSpectrum, count_edge_states, edge_winding, extract_edge_unitary,
                    flow_report, local_cell_modes, spectral_flow, strip_floquet_operator, strip_spectrum_vs_phi)
from .topology import (BerryGrid, WindingResult, berry_curvature, chern_number, chern_numbers, phase_diagram,
                       predicted_edge_count, unitary_winding, winding_from_coeffs)
