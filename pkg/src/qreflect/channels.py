"""Diffraction-channel kinematics.

Angles live in two conventions: the experiment quotes grazing angles
(measured from the surface plane, fractions of a mrad to 25 mrad), the
coupled equations use the angle from the surface normal.  The conversion
happens in exactly one audited function pair below; everything inside the
solver uses the normal convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


def grazing_to_normal(theta_grazing: float) -> float:
    """Grazing angle (from the surface plane) -> angle from the normal."""
    return math.pi / 2.0 - theta_grazing


def normal_to_grazing(theta_normal: float) -> float:
    return math.pi / 2.0 - theta_normal


class ClosedChannelError(ValueError):
    """Requested a propagating-order quantity for an evanescent order."""


@dataclass(frozen=True)
class ScatteringConditions:
    """Incident beam and surface periodicity seen by the solver."""

    k_i: float  # 1/Angstrom, incident wave vector magnitude
    theta_i_normal: float  # rad, measured from the surface normal
    d_period: Optional[float] = None  # Angstrom; None for flat surfaces

    def __post_init__(self):
        if self.k_i <= 0:
            raise ValueError("k_i must be positive")
        if not 0.0 <= self.theta_i_normal < math.pi / 2.0:
            raise ValueError("theta_i_normal must lie in [0, pi/2)")
        if self.d_period is not None and self.d_period <= 0:
            raise ValueError("d_period must be positive")

    @property
    def theta_grazing(self) -> float:
        return normal_to_grazing(self.theta_i_normal)


def kz_squared(n: int, c: ScatteringConditions) -> float:
    """Square of the perpendicular wave-vector component of order n, 1/Angstrom^2.

    k_nz^2 = k_i^2 - (k_i sin(theta_i) + 2 pi n / d)^2, evaluated in the
    cancellation-free rearrangement k_i^2 cos^2(theta) - g (2 k_i sin(theta) + g)
    with g = 2 pi n / d, which is exact algebra and keeps grazing-incidence
    precision.  n != 0 requires a periodic surface.
    """
    if n != 0 and c.d_period is None:
        raise ValueError("non-specular order requested on a flat surface")
    s = c.k_i * math.sin(c.theta_i_normal)
    cz = c.k_i * math.cos(c.theta_i_normal)
    g = 0.0 if n == 0 else 2.0 * math.pi * n / c.d_period
    return cz * cz - g * (2.0 * s + g)


def parallel_wavevector(n: int, c: ScatteringConditions) -> float:
    """k_i sin(theta_i) + 2 pi n / d, 1/Angstrom."""
    g = 0.0 if n == 0 else 2.0 * math.pi * n / c.d_period
    return c.k_i * math.sin(c.theta_i_normal) + g


@dataclass(frozen=True)
class ChannelSet:
    """Diffraction orders n in [-n_max, n_max] with their kz^2 and open flags."""

    indices: tuple[int, ...]
    kz2: np.ndarray  # 1/Angstrom^2, aligned with indices
    open_flags: np.ndarray  # bool, kz2 > 0

    def __post_init__(self):
        if len(self.indices) != len(self.kz2) or len(self.kz2) != len(self.open_flags):
            raise ValueError("inconsistent channel arrays")
        if 0 not in self.indices:
            raise ValueError("specular channel missing")

    @property
    def n_channels(self) -> int:
        return len(self.indices)

    @property
    def specular_index(self) -> int:
        return self.indices.index(0)

    def open_indices(self) -> list[int]:
        return [n for n, f in zip(self.indices, self.open_flags) if f]


def build_channel_set(c: ScatteringConditions, n_max: int) -> ChannelSet:
    """Channels n = -n_max..n_max; a flat surface forces the specular set {0}."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if c.d_period is None:
        n_max = 0
    ns = tuple(range(-n_max, n_max + 1))
    kz2 = np.array([kz_squared(n, c) for n in ns])
    return ChannelSet(indices=ns, kz2=kz2, open_flags=kz2 > 0.0)


def bragg_angle(n: int, c: ScatteringConditions) -> float:
    """Exit grazing angle of experimental diffraction order n.

    cos(theta_n) = cos(theta_i) - 2 pi n / (d k_i) in the grazing convention;
    n here is the experimental order (positive n exits away from the surface,
    equal to minus the solver's channel index).  Evanescent orders raise
    ClosedChannelError.
    """
    theta_g = c.theta_grazing
    if n == 0:
        return theta_g
    if c.d_period is None:
        raise ValueError("diffraction order requested on a flat surface")
    cosv = math.cos(theta_g) - 2.0 * math.pi * n / (c.d_period * c.k_i)
    if abs(cosv) > 1.0:
        raise ClosedChannelError(
            f"order n={n} is evanescent: |cos(theta_n)| = {abs(cosv)} > 1"
        )
    return math.acos(cosv)


def experimental_order(theory_n: int) -> int:
    """Map a solver channel index to the experimental diffraction order.

    The solver measures theta from the normal, the experiment from the
    surface plane, which flips the sign of the parallel momentum transfer.
    Applied exactly once, when results are assembled for output.
    """
    return -theory_n
