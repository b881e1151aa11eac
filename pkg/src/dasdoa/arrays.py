"""Line-array geometry and steering dictionaries.

Element positions are expressed as dimensionless offsets alpha_m in units of a
nominal spacing d (meters); the first element is the phase reference at
alpha_0 = 0. A steering vector at frequency f and direction theta has entries

    a_m(theta) = exp(-1j * 2*pi*f * alpha_m * d * sin(theta) / c)   (broadside)

with cos(theta) replacing sin(theta) in the endfire convention. Broadside
angles live in [-90, 90] degrees, endfire angles in [0, 180] degrees; the
convention is fixed per dictionary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

CONVENTIONS = ("broadside", "endfire")


@dataclass(frozen=True)
class ArrayGeometry:
    """Element offsets (units of d), nominal spacing d (m), sound speed c (m/s)."""

    offsets: np.ndarray
    spacing: float = 1.0
    sound_speed: float = 1500.0

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        object.__setattr__(self, "offsets", off)
        if off.ndim != 1 or off.size < 2:
            raise ConfigError("geometry needs a 1-D array of at least 2 offsets")
        if not np.all(np.isfinite(off)):
            raise ConfigError("geometry offsets must be finite")
        if abs(off[0]) > 0:
            raise ConfigError("first element is the reference and must sit at offset 0")
        if np.any(np.diff(off) <= 0):
            raise ConfigError("geometry offsets must be strictly increasing")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ConfigError("spacing must be a positive finite number")
        if not (self.sound_speed > 0 and np.isfinite(self.sound_speed)):
            raise ConfigError("sound speed must be a positive finite number")

    @property
    def n_elements(self) -> int:
        return self.offsets.size


def uniform_line_array(n_elements: int, spacing: float = 1.0,
                       sound_speed: float = 1500.0) -> ArrayGeometry:
    """ULA with offsets 0, 1, ..., n-1 (units of `spacing`)."""
    if n_elements < 2:
        raise ConfigError("a line array needs at least 2 elements")
    return ArrayGeometry(np.arange(n_elements, dtype=float), spacing, sound_speed)


def half_wavelength_spacing(frequency: float, sound_speed: float = 1500.0) -> float:
    """d = lambda/2 at the given frequency."""
    if frequency <= 0:
        raise ConfigError("frequency must be positive")
    return sound_speed / (2.0 * frequency)


def _check_angles(theta_deg: np.ndarray, convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {convention!r}; use one of {CONVENTIONS}")
    lo, hi = (-90.0, 90.0) if convention == "broadside" else (0.0, 180.0)
    if theta_deg.size and (theta_deg.min() < lo - 1e-9 or theta_deg.max() > hi + 1e-9):
        raise ConfigError(
            f"{convention} angles must lie in [{lo}, {hi}] degrees, "
            f"got range [{theta_deg.min()}, {theta_deg.max()}]")


def steering_matrix(geometry: ArrayGeometry, frequency: float,
                    theta_deg, convention: str = "broadside") -> np.ndarray:
    """(M, G) matrix of steering vectors at `frequency` for the given angles."""
    theta = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    _check_angles(theta, convention)
    if frequency <= 0:
        raise ConfigError("frequency must be positive")
    rad = np.deg2rad(theta)
    direction = np.sin(rad) if convention == "broadside" else np.cos(rad)
    phase = (2.0 * np.pi * frequency * geometry.spacing / geometry.sound_speed
             * np.outer(geometry.offsets, direction))
    return np.exp(-1j * phase)


def angle_grid(sector: tuple[float, float], step: float) -> np.ndarray:
    """Regular grid over [sector[0], sector[1]] inclusive of both ends.

    Values are rounded to 1e-9 deg so unions of grids from different rounds
    deduplicate exactly.
    """
    lo, hi = float(sector[0]), float(sector[1])
    if not (hi > lo):
        raise ConfigError("sector upper bound must exceed lower bound")
    if step <= 0:
        raise ConfigError("grid step must be positive")
    return np.arange(lo, hi + 1e-9, step).round(9)


@dataclass(frozen=True)
class Dictionary:
    """Steering dictionary: angles (deg), matrix A (M x G), and its provenance."""

    angles: np.ndarray
    matrix: np.ndarray
    frequency: float
    convention: str
    geometry: ArrayGeometry = field(repr=False)


def build_dictionary(geometry: ArrayGeometry, frequency: float,
                     sector: tuple[float, float], step: float,
                     convention: str = "broadside") -> Dictionary:
    angles = angle_grid(sector, step)
    A = steering_matrix(geometry, frequency, angles, convention)
    return Dictionary(angles, A, float(frequency), convention, geometry)


def perturb_geometry(geometry: ArrayGeometry, level: float, rng) -> ArrayGeometry:
    """Add i.i.d. uniform position errors in [-level, +level] (units of d).

    The reference element stays fixed. `level` must be below half the minimum
    inter-element gap, which keeps the perturbed offsets strictly increasing.
    """
    if level < 0:
        raise ConfigError("perturbation level must be non-negative")
    min_gap = float(np.min(np.diff(geometry.offsets)))
    if level >= 0.5 * min_gap:
        raise ConfigError(
            f"perturbation level {level} must be below half the minimum "
            f"element gap ({0.5 * min_gap:g}) to preserve element ordering")
    rng = np.random.default_rng(rng)
    err = rng.uniform(-level, level, geometry.n_elements)
    err[0] = 0.0
    return ArrayGeometry(geometry.offsets + err, geometry.spacing,
                         geometry.sound_speed)
