"""Unit system and constants checks against independent decimal arithmetic."""

from decimal import Decimal, getcontext
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

import qreflect
from qreflect.constants import (
    CONST,
    HBAR_SI,
    HE4_MASS_SI,
    KB_SI,
    MEV_SI,
    PhysicalConstants,
    c3_to_internal,
    kinetic_prefactor,
)

getcontext().prec = 40


def _decimal_c3(c3_si: str) -> Decimal:
    # independent route: J m^3 -> meV Angstrom^3 with exact decimal arithmetic
    return Decimal(c3_si) * Decimal("1e30") / Decimal("1.602176634e-22")


def test_c3_conversion_glass():
    expected = _decimal_c3("3.5e-50")
    got = c3_to_internal(3.5e-50)
    assert abs(got - float(expected)) / float(expected) < 1e-12
    assert got == pytest.approx(218.45, rel=1e-3)


def test_c3_conversion_wafer():
    expected = _decimal_c3("5.5e-50")
    got = c3_to_internal(5.5e-50)
    assert abs(got - float(expected)) / float(expected) < 1e-12
    assert got == pytest.approx(343.28, rel=1e-3)


def test_c3_rejects_nonpositive():
    with pytest.raises(ValueError):
        c3_to_internal(0.0)
    with pytest.raises(ValueError):
        c3_to_internal(-1e-50)


def test_kinetic_prefactor_value():
    expected = (
        Decimal("1.054571817e-34") ** 2
        / (2 * Decimal("6.6464731e-27"))
        / Decimal("1.602176634e-22")
        * Decimal("1e20")
    )
    got = kinetic_prefactor()
    assert abs(got - float(expected)) / float(expected) < 1e-12
    assert got == pytest.approx(0.5222, abs=5e-5)


def test_kinetic_prefactor_dimensions():
    # (meV Angstrom^2) * (1/Angstrom)^2 is an energy in meV
    e = kinetic_prefactor() * 1.0**2
    assert e > 0


def test_beam_energy_at_300K():
    e = 2.5 * CONST.k_boltzmann * 300.0
    assert e == pytest.approx(64.63, abs=0.01)


def test_positivity_enforced():
    with pytest.raises(ValueError):
        PhysicalConstants(hbar2_over_2m=-1.0, k_boltzmann=1.0, he_mass=1.0)
    with pytest.raises(ValueError):
        PhysicalConstants(hbar2_over_2m=1.0, k_boltzmann=0.0, he_mass=1.0)


@given(st.floats(min_value=1e-12, max_value=1e12, allow_nan=False))
def test_energy_si_roundtrip(e_mev):
    back = CONST.energy_from_si(CONST.energy_to_si(e_mev))
    assert abs(back - e_mev) / e_mev < 1e-12


def test_single_definition_site_of_constants():
    # the SI literals may appear in exactly one module of the package
    src_dir = Path(qreflect.__file__).parent
    for literal in ("1.054571817", "6.6464731", "1.380649", "1.602176634"):
        hits = []
        for path in sorted(src_dir.rglob("*.py")):
            count = path.read_text(encoding="utf-8").count(literal)
            if count:
                hits.append((path.name, count))
        assert hits == [("constants.py", 1)], f"{literal} defined at {hits}"


def test_derived_constants_are_consistent():
    assert CONST.hbar2_over_2m == kinetic_prefactor()
    assert CONST.k_boltzmann == KB_SI / MEV_SI
    assert CONST.he_mass == HE4_MASS_SI
    assert HBAR_SI > 0
