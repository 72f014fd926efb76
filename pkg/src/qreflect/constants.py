"""Internal unit system and physical constants.

Internal units everywhere in this package: energy in meV, length in Angstrom,
angles in radians, temperature in Kelvin.  Wave vectors are stored in 1/Angstrom
and converted to 1/nm only at I/O boundaries (CSV columns, printed reports).

All constants are CODATA-2018 literals.  This module is the single definition
site; nothing else in the package may re-define hbar, the He mass, or k_B
(a source-scan test enforces this).
"""

from __future__ import annotations

from dataclasses import dataclass

# CODATA 2018 SI literals.  These four numbers are the only primary inputs;
# every internal constant below is derived from them.
HBAR_SI = 1.054571817e-34  # J s
HE4_MASS_SI = 6.6464731e-27  # kg, helium-4 atom
KB_SI = 1.380649e-23  # J/K (exact)
MEV_SI = 1.602176634e-22  # J per meV (exact)

_ANGSTROM_PER_METER = 1e10


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants of the internal (meV, Angstrom, K) unit system for He-4."""

    hbar2_over_2m: float  # meV Angstrom^2
    k_boltzmann: float  # meV/K
    he_mass: float  # kg, kept in SI for conversions only

    def __post_init__(self):
        if self.hbar2_over_2m <= 0 or self.k_boltzmann <= 0:
            raise ValueError("physical constants must be positive")

    def energy_to_si(self, e_mev: float) -> float:
        """meV -> J."""
        return e_mev * MEV_SI

    def energy_from_si(self, e_joule: float) -> float:
        """J -> meV."""
        return e_joule / MEV_SI


def kinetic_prefactor() -> float:
    """hbar^2 / (2 m_He) in meV Angstrom^2 (about 0.5222)."""
    si = HBAR_SI**2 / (2.0 * HE4_MASS_SI)  # J m^2
    return si / MEV_SI * _ANGSTROM_PER_METER**2


def c3_to_internal(c3_si: float) -> float:
    """Convert a van der Waals C3 coefficient from J m^3 to meV Angstrom^3.

    Raises ValueError for non-positive input.
    """
    if c3_si <= 0:
        raise ValueError(f"C3 must be positive, got {c3_si!r} J m^3")
    return c3_si / MEV_SI * _ANGSTROM_PER_METER**3


CONST = PhysicalConstants(
    hbar2_over_2m=kinetic_prefactor(),
    k_boltzmann=KB_SI / MEV_SI,
    he_mass=HE4_MASS_SI,
)
