"""Lattice configuration and the real-space step map of the two-ring walk.

The lattice is a ring of ``n_sites`` cells. Each cell holds one amplitude in the
long ring (``alpha``) and one in the short ring (``beta``). A step mixes the two
amplitudes of every cell at its splitter, then moves ``alpha`` one cell to the
right (picking up the modulator phase) and ``beta`` one cell to the left::

    alpha[n]' = (cos t * alpha[n-1] + i sin t * beta[n-1]) * exp(i phase[n])
    beta[n]'  =  i sin t * alpha[n+1] + cos t * beta[n+1]

With reflecting boundaries the last cell ``n_sites - 1`` is a mirror cell whose
splitter is fixed at ``pi/2``. It plays the role of cell ``-1`` for the left end
and cell ``N`` for the right end, so the interior cells are ``0 .. n_sites - 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

STEPS_PER_PERIOD = 4
LIGHT_CONE = 4
MIN_SCHEDULED_SITES = 8
BOUNDARY_TYPES = ("reflecting", "periodic")
# cells of the 2D lattice span two sites, one per sublattice
CELL_WIDTH = 2


class ConfigError(ValueError):
    """Raised when a lattice configuration violates its constraints."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _as_fractions(coeffs, what: str) -> tuple[Fraction, ...]:
    try:
        out = tuple(Fraction(c) if not isinstance(c, float) else Fraction(c).limit_denominator(10**6)
                    for c in coeffs)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError([f"{what}: cannot read coefficients {coeffs!r} ({exc})"]) from None
    if len(out) != STEPS_PER_PERIOD:
        raise ConfigError([f"{what}: expected {STEPS_PER_PERIOD} coefficients, got {len(out)}"])
    return out


@dataclass(frozen=True)
class LatticeConfig:
    """Validated parameters of a four-step walk.

    ``thetas`` are in radians. Schedule coefficients are exact rationals; the
    phase applied at step ``i`` of an overridden cell is ``coeffs[i-1] * phi``.
    """

    thetas: tuple[float, float, float, float]
    n_sites: int = 64
    left_boundary: str = "reflecting"
    right_boundary: str = "reflecting"
    bulk_phase_signs: tuple[int, int, int, int] = (1, -1, 1, -1)
    edge_coeffs: tuple[Fraction, ...] | None = None
    local_cells: tuple[tuple[int, tuple[Fraction, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "bulk_phase_signs", tuple(int(s) for s in self.bulk_phase_signs))
        if self.edge_coeffs is not None:
            object.__setattr__(self, "edge_coeffs", _as_fractions(self.edge_coeffs, "edge_coeffs"))
        cells = tuple((int(n), _as_fractions(c, f"local cell {n}")) for n, c in self.local_cells)
        object.__setattr__(self, "local_cells", tuple(sorted(cells)))
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def violations(self) -> list[str]:
        out = []
        if len(self.thetas) != STEPS_PER_PERIOD:
            out.append(f"thetas: expected {STEPS_PER_PERIOD} angles, got {len(self.thetas)}")
        for i, t in enumerate(self.thetas, 1):
            if not (0.0 <= t <= np.pi / 2 + 1e-12) or not np.isfinite(t):
                out.append(f"theta_{i} = {t / np.pi:.6g} pi is outside [0, pi/2]")
        if len(self.bulk_phase_signs) != STEPS_PER_PERIOD:
            out.append("bulk_phase_signs: expected 4 entries")
        if self.n_sites < 2:
            out.append(f"n_sites must be >= 2, got {self.n_sites}")
        for side in (self.left_boundary, self.right_boundary):
            if side not in BOUNDARY_TYPES:
                out.append(f"unknown boundary type {side!r}")
        if self.left_boundary != self.right_boundary:
            out.append("left and right boundaries must match: one mirror cell terminates both ends")
        scheduled = self.edge_coeffs is not None or bool(self.local_cells)
        if scheduled and self.n_sites < MIN_SCHEDULED_SITES:
            out.append(f"n_sites must be >= {MIN_SCHEDULED_SITES} when a phase schedule is active")
        if self.edge_coeffs is not None and not self.reflecting:
            out.append("edge_coeffs need a reflecting boundary")
        last = self.n_interior - 1
        for n, _ in self.local_cells:
            if n < LIGHT_CONE or n + CELL_WIDTH - 1 > last - LIGHT_CONE:
                out.append(f"local cell {n} lies within {LIGHT_CONE} cells of an edge")
        sites = [n for n, _ in self.local_cells]
        for a, b in zip(sites, sites[1:]):
            if b - a < LIGHT_CONE:
                out.append(f"local cells {a} and {b} are closer than {LIGHT_CONE} cells")
        return out

    @property
    def reflecting(self) -> bool:
        return self.left_boundary == "reflecting"

    @property
    def mirror_site(self) -> int | None:
        return self.n_sites - 1 if self.reflecting else None

    @property
    def n_interior(self) -> int:
        return self.n_sites - 1 if self.reflecting else self.n_sites

    def with_schedule(self, edge_coeffs=None, local_cells=()) -> "LatticeConfig":
        return replace(self, edge_coeffs=edge_coeffs, local_cells=tuple(local_cells))

    def bulk(self) -> "LatticeConfig":
        """Same lattice with every phase override removed."""
        return replace(self, edge_coeffs=None, local_cells=())


def validate_config(raw: Mapping[str, Any]) -> LatticeConfig:
    """Build a :class:`LatticeConfig` from a loose mapping.

    Angles are given either as ``thetas`` (radians) or ``theta_pi`` (units of pi).
    ``local_cells`` may be a mapping ``{site: coeffs}`` or a sequence of pairs.
    All violations are collected into one :class:`ConfigError`.
    """
    problems = []
    if "theta_pi" in raw:
        thetas = [float(t) * np.pi for t in raw["theta_pi"]]
    elif "thetas" in raw:
        thetas = [float(t) for t in raw["thetas"]]
    else:
        raise ConfigError(["missing angles: provide 'thetas' or 'theta_pi'"])
    cells = raw.get("local_cells", ())
    if isinstance(cells, Mapping):
        cells = list(cells.items())
    left = raw.get("left_boundary", raw.get("boundary", "reflecting"))
    right = raw.get("right_boundary", raw.get("boundary", left))
    kwargs = dict(
        thetas=tuple(thetas),
        n_sites=int(raw.get("n_sites", 64)),
        left_boundary=str(left),
        right_boundary=str(right),
        edge_coeffs=raw.get("edge_coeffs"),
        local_cells=tuple(cells),
    )
    if "bulk_phase_signs" in raw:
        kwargs["bulk_phase_signs"] = tuple(raw["bulk_phase_signs"])
    unknown = set(raw) - {"theta_pi", "thetas", "n_sites", "left_boundary", "right_boundary",
                          "boundary", "edge_coeffs", "local_cells", "bulk_phase_signs"}
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")
    try:
        config = LatticeConfig(**kwargs)
    except ConfigError as exc:
        problems.extend(exc.violations)
        raise ConfigError(problems) from None
    if problems:
        raise ConfigError(problems)
    return config


def _override(config: LatticeConfig, site: int) -> tuple[Fraction, ...] | None:
    if config.edge_coeffs is not None and 0 <= site < CELL_WIDTH:
        return config.edge_coeffs
    for n, coeffs in config.local_cells:
        if n <= site < n + CELL_WIDTH:
            return coeffs
    return None


def resolve_phase(config: LatticeConfig, site: int, step: int, phi: float) -> float:
    """Phase picked up by the ``alpha`` amplitude arriving at ``site`` on ``step`` (1..4)."""
    if not 1 <= step <= STEPS_PER_PERIOD:
        raise ValueError(f"step must be in 1..{STEPS_PER_PERIOD}, got {step}")
    coeffs = _override(config, site % config.n_sites)
    if coeffs is None:
        return config.bulk_phase_signs[step - 1] * phi
    return float(coeffs[step - 1]) * phi


def phase_coefficients(config: LatticeConfig, step: int) -> np.ndarray:
    """Per-site multiplier of ``phi`` on ``step``, as floats."""
    out = np.full(config.n_sites, float(config.bulk_phase_signs[step - 1]))
    for site in range(config.n_sites):
        coeffs = _override(config, site)
        if coeffs is not None:
            out[site] = float(coeffs[step - 1])
    return out


def splitter_angles(config: LatticeConfig, step: int) -> np.ndarray:
    """Splitter angle of every cell on ``step``; the mirror cell is fixed at pi/2."""
    out = np.full(config.n_sites, config.thetas[step - 1])
    if config.mirror_site is not None:
        out[config.mirror_site] = np.pi / 2
    return out


@dataclass
class FieldState:
    alpha: np.ndarray
    beta: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.beta = np.asarray(self.beta, dtype=complex)
        if self.alpha.shape != self.beta.shape:
            raise ValueError(f"alpha {self.alpha.shape} and beta {self.beta.shape} differ in shape")

    @property
    def n_sites(self) -> int:
        return self.alpha.shape[-1]

    def norm(self) -> float:
        return float(np.sum(np.abs(self.alpha) ** 2) + np.sum(np.abs(self.beta) ** 2))

    def vector(self) -> np.ndarray:
        """Stacked ``(alpha_0..alpha_{N-1}, beta_0..beta_{N-1})``."""
        return np.concatenate([self.alpha, self.beta], axis=-1)

    @classmethod
    def from_vector(cls, vec, step_index: int = 0) -> "FieldState":
        vec = np.asarray(vec)
        n = vec.shape[-1] // 2
        return cls(vec[..., :n], vec[..., n:], step_index)


def _apply_step(alpha, beta, cos_t, sin_t, phase_factor):
    a = cos_t * alpha + 1j * sin_t * beta
    b = 1j * sin_t * alpha + cos_t * beta
    return np.roll(a, 1, axis=-1) * phase_factor, np.roll(b, -1, axis=-1)


def step_evolve(state: FieldState, config: LatticeConfig, phi: float) -> FieldState:
    """Advance ``state`` by one step; the step within the period is ``step_index % 4``."""
    if state.n_sites != config.n_sites:
        raise ValueError(f"state has {state.n_sites} sites, config has {config.n_sites}")
    step = state.step_index % STEPS_PER_PERIOD + 1
    theta = splitter_angles(config, step)
    phase = np.exp(1j * phi * phase_coefficients(config, step))
    alpha, beta = _apply_step(state.alpha, state.beta, np.cos(theta), np.sin(theta), phase)
    return FieldState(alpha, beta, state.step_index + 1)


def floquet_evolve(state: FieldState, config: LatticeConfig, phi: float, periods: int = 1) -> FieldState:
    if periods < 1:
        raise ValueError("periods must be >= 1")
    for _ in range(STEPS_PER_PERIOD * periods):
        state = step_evolve(state, config, phi)
    return state
