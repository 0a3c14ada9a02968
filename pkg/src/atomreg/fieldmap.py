"""Magnetic field geometry and the position -> resonance-frequency map.

The applied field is a homogeneous offset along the trap axis plus a
quadrupole gradient,

    B(r) = (B0, 0, 0) - B' * (x, y, -2 z),

so an atom's hyperfine transition is shifted linearly along the axis and
quadratically in the radial plane.

Sign convention: the axial coordinate used by the register runs opposite to
the field formula's ``x`` so that the slope carries the negative sign of the
calibrated -3.69 kHz/um. Only frequency differences enter the dynamics; the
sign is visible solely in emitted CSV columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from atomreg.constants import GAUSS_PER_CM_TO_GAUSS_PER_UM, KHZ_TO_HZ, MHZ_TO_KHZ
from atomreg.errors import ConfigError


@dataclass(frozen=True)
class FieldConfig:
    """Field parameters.

    Attributes
    ----------
    b0 : float
        Offset field along the trap axis, gauss.
    b_grad : float
        Quadrupole gradient B', gauss per centimeter.
    zeeman_coeff : float
        Linear Zeeman shift of the qubit transition, MHz per gauss (signed).
    axis_offset_y, axis_offset_z : float
        Displacement of the trap axis from the field symmetry plane, micrometer.
    """

    b0: float = 4.0
    b_grad: float = 15.0
    zeeman_coeff: float = -2.45
    axis_offset_y: float = 0.0
    axis_offset_z: float = 15.0

    def __post_init__(self):
        if not self.b0 > 0:
            raise ConfigError(f"b0 must be positive, got {self.b0}")
        for name in ("b_grad", "zeeman_coeff", "axis_offset_y", "axis_offset_z"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def gradient_per_um(self) -> float:
        """B' in gauss per micrometer."""
        return self.b_grad * GAUSS_PER_CM_TO_GAUSS_PER_UM


@dataclass(frozen=True, order=True)
class AtomGeometry:
    axial_position_x: float  # micrometer
    label: int  # 1-based, ordered by axial position


def make_geometry(positions: Iterable[float]) -> list[AtomGeometry]:
    """Label atoms 1..N in order of increasing axial position."""
    xs = sorted(float(x) for x in positions)
    if any(not np.isfinite(x) for x in xs):
        raise ConfigError("atom positions must be finite")
    for a, b in zip(xs, xs[1:]):
        if a == b:
            raise ConfigError(f"two atoms share the axial position {a} um")
    return [AtomGeometry(x, i + 1) for i, x in enumerate(xs)]


def check_geometry(geometry: Sequence[AtomGeometry]) -> None:
    labels = [a.label for a in geometry]
    if len(set(labels)) != len(labels):
        raise ConfigError("atom labels must be unique")
    ordered = sorted(geometry, key=lambda a: a.label)
    for a, b in zip(ordered, ordered[1:]):
        if not a.axial_position_x < b.axial_position_x:
            raise ConfigError("atom labels must be strictly ordered by axial position")


def offset_shift(cfg: FieldConfig) -> float:
    """Transition shift produced by the offset field alone, MHz."""
    return cfg.zeeman_coeff * cfg.b0


def axial_slope(cfg: FieldConfig) -> float:
    """Position-dependent frequency shift along the trap axis, kHz per micrometer."""
    return cfg.zeeman_coeff * MHZ_TO_KHZ * cfg.gradient_per_um


def axial_detuning(cfg: FieldConfig, x):
    """Resonance shift of an atom at axial position ``x`` (um) relative to x=0, kHz."""
    return axial_slope(cfg) * x


def field_vector(cfg: FieldConfig, x, y, z):
    """Exact field components (gauss) at field-frame coordinates in micrometer."""
    g = cfg.gradient_per_um
    return cfg.b0 - g * np.asarray(x), -g * np.asarray(y), 2.0 * g * np.asarray(z)


def field_modulus(cfg: FieldConfig, x, y, z):
    """Exact |B| from the full vector field, gauss."""
    bx, by, bz = field_vector(cfg, x, y, z)
    return np.sqrt(bx * bx + by * by + bz * bz)


def radial_curvature(cfg: FieldConfig) -> float:
    """Second-order coefficient B'^2 / (2 B0) of |B| in the radial plane, gauss per um^2."""
    return cfg.gradient_per_um**2 / (2.0 * cfg.b0)


def radial_field_modulus(cfg: FieldConfig, y, z):
    """|B| on the x=0 plane to second order in the radial displacement, gauss.

    ``y`` and ``z`` are measured from the field symmetry axis in micrometer.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return cfg.b0 + radial_curvature(cfg) * (4.0 * z * z + y * y)


def radial_detuning(cfg: FieldConfig, y, z):
    """Transition shift (Hz) of an atom at radial position (y, z) relative to one on the axis."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    coeff_hz = cfg.zeeman_coeff * MHZ_TO_KHZ * KHZ_TO_HZ * radial_curvature(cfg)
    return coeff_hz * (4.0 * z * z + y * y)
