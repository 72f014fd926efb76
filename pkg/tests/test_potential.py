"""Potential construction: matching, grating couplings, absorber profile."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qreflect.constants import c3_to_internal
from qreflect.potential import (
    AbsorberParams,
    CouplingConvention,
    Grating,
    MatchingError,
    Surface,
    SurfacePotential,
    _casimir,
    _casimir_deriv,
    _morse,
    _morse_deriv,
    available_surfaces,
    coupling_matrix,
    coupling_strength,
    fourier_coefficient,
    load_surface,
    solve_matching,
    v_perp,
    woods_saxon,
)

GLASS_C3 = c3_to_internal(3.5e-50)
WAFER_C3 = c3_to_internal(5.5e-50)


def _oracle_match(chi, c3, l, dps=40):
    """Matching point by an independent formulation at high precision.

    Eliminates the depth through the value equation D(z) = V_C(z)/shape(z)
    and roots the derivative residual with mpmath; the production code
    eliminates D through the log-derivative ratio instead.
    """
    with mp.workdps(dps):
        chi, c3, l = mp.mpf(chi), mp.mpf(c3), mp.mpf(l)
        c4 = c3 * l

        def residual(z):
            u = mp.e ** (-chi * z)
            vc = -c4 / ((l + z) * z**3)
            d = vc / (u * (u - 2))
            vm_p = 2 * d * chi * u * (1 - u)
            vc_p = c4 * (4 * z + 3 * l) / ((l + z) ** 2 * z**4)
            return vm_p - vc_p

        zs = [mp.mpf("0.1") + i * mp.mpf("0.01") for i in range(4991)]
        bracket = None
        prev = residual(zs[0])
        for z in zs[1:]:
            cur = residual(z)
            if prev * cur < 0:
                assert bracket is None, "oracle found multiple roots"
                bracket = (z - mp.mpf("0.01"), z)
            prev = cur
        assert bracket is not None
        z_bar = mp.findroot(residual, bracket, solver="bisect", tol=mp.mpf("1e-30"))
        u = mp.e ** (-chi * z_bar)
        d = (-c4 / ((l + z_bar) * z_bar**3)) / (u * (u - 2))
        return float(d), float(z_bar)


class TestMatching:
    def test_glass_depth_matches_table(self):
        d, z_bar = solve_matching(0.5, GLASS_C3, 93.0)
        assert abs(d - 9.8) / 9.8 < 0.05
        assert z_bar > 0

    def test_wafer_depth_matches_table(self):
        d, _ = solve_matching(0.5, WAFER_C3, 93.0)
        assert abs(d - 15.3) / 15.3 < 0.05

    def test_against_independent_oracle(self):
        for c3 in (GLASS_C3, WAFER_C3):
            d, z_bar = solve_matching(0.5, c3, 93.0)
            d_ref, z_ref = _oracle_match(0.5, c3, 93.0)
            assert abs(z_bar - z_ref) < 1e-10
            assert abs(d - d_ref) / d_ref < 1e-10

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            solve_matching(-0.5, GLASS_C3, 93.0)
        with pytest.raises(ValueError):
            solve_matching(0.5, 0.0, 93.0)

    def test_no_root_is_diagnosed(self):
        # a crossover length so small the join point leaves the bracket
        with pytest.raises(MatchingError) as err:
            solve_matching(5.0, 1e-6, 1e-3)
        assert "bracket" in str(err.value)

    @settings(max_examples=30, deadline=None)
    @given(
        chi=st.floats(min_value=0.3, max_value=1.0),
        c3_si=st.floats(min_value=1e-50, max_value=1e-49),
    )
    def test_matching_residuals_random_parameters(self, chi, c3_si):
        p = SurfacePotential.from_si(chi=chi, c3_si=c3_si, l=93.0)
        dv = _morse(p.z_bar, p.d_well, p.chi) - _casimir(p.z_bar, p.c4, p.l)
        dvp = _morse_deriv(p.z_bar, p.d_well, p.chi) - _casimir_deriv(
            p.z_bar, p.c4, p.l
        )
        assert abs(float(dv)) < 1e-10
        assert abs(float(dvp)) < 1e-10
        assert p.z_bar > 0 and p.d_well > 0


class TestPerpendicularPotential:
    @pytest.fixture(scope="class")
    def glass(self):
        return SurfacePotential.from_si(chi=0.5, c3_si=3.5e-50, l=93.0)

    def test_morse_minimum_is_exact_depth(self, glass):
        assert v_perp(0.0, glass) == -glass.d_well

    def test_far_tail_magnitude(self, glass):
        v = v_perp(2000.0, glass)
        direct = -glass.c4 / ((glass.l + 2000.0) * 2000.0**3)
        assert v == direct
        assert abs(v) < 1e-8  # 1.21e-9 meV for the glass parameters
        assert abs(v) == pytest.approx(1.2133e-9, rel=1e-3)

    def test_branches_agree_at_join(self, glass):
        zb = glass.z_bar
        vm = float(_morse(zb, glass.d_well, glass.chi))
        vc = float(_casimir(zb, glass.c4, glass.l))
        assert abs(vm - vc) < 1e-10
        assert v_perp(zb, glass) == vc  # z >= z_bar takes the tail branch

    def test_attractive_right_of_zero_crossing(self, glass):
        z = np.linspace(1e-6, 2000.0, 20_000)
        assert np.all(glass.energy(z) < 0)

    def test_morse_zero_crossing(self, glass):
        z0 = -math.log(2.0) / glass.chi
        assert abs(v_perp(z0, glass)) < 1e-12
        assert z0 < 0

    def test_c4_identity_enforced(self, glass):
        with pytest.raises(ValueError):
            SurfacePotential(
                chi=glass.chi,
                c3=glass.c3,
                l=glass.l,
                c4=glass.c4 * 1.01,
                d_well=glass.d_well,
                z_bar=glass.z_bar,
            )

    def test_vectorized_matches_scalar(self, glass):
        z = np.array([-2.0, 0.0, 3.0, glass.z_bar, 10.0, 500.0])
        vec = glass.energy(z)
        assert vec.shape == z.shape
        for zi, vi in zip(z, vec):
            assert vi == v_perp(float(zi), glass)


class TestGratingCouplings:
    @pytest.fixture(scope="class")
    def half(self):
        return Grating(a=1.0e5, d=2.0e5)

    def test_c0_is_fill_factor(self, half):
        assert fourier_coefficient(0, half) == 0.5

    def test_even_orders_vanish_exactly(self, half):
        for n in (2, 4, 6, 8, 100):
            assert fourier_coefficient(n, half) == 0.0

    def test_first_order_value(self, half):
        # (1/2) sin(pi/2)/(pi/2) = 1/pi
        assert fourier_coefficient(1, half) == pytest.approx(1.0 / math.pi, rel=1e-12)

    @given(n=st.integers(min_value=-50, max_value=50))
    def test_even_in_n(self, n):
        g = Grating(a=0.7e5, d=2.0e5)
        assert fourier_coefficient(n, g) == fourier_coefficient(-n, g)

    def test_parseval_partial_sums(self, half):
        # for a 0/1 profile the mean square is a/d; partial sums approach it
        r = half.a / half.d
        n = np.arange(1, 10_001)
        terms = (r * np.sinc(n * r)) ** 2
        partial = r * r + 2.0 * np.cumsum(terms)
        assert np.all(np.diff(partial) >= 0)
        assert np.all(partial <= r + 1e-12)
        assert partial[-1] == pytest.approx(r, abs=1e-4)

    def test_specular_multiplier_is_unity_all_conventions(self, half):
        for conv in CouplingConvention:
            g = Grating(a=half.a, d=half.d, coupling_convention=conv)
            assert coupling_strength(0, g) == 1.0

    def test_convention_values_first_order(self):
        a, d = 1.0e5, 2.0e5
        s1 = math.sin(math.pi / 2) / (math.pi / 2)  # sinc(1/2) = 2/pi
        cases = {
            CouplingConvention.FOURIER: 0.5 * s1,
            CouplingConvention.NORMALIZED: s1,
            CouplingConvention.PAPER_EQ8: 2.0 * s1,
        }
        for conv, expected in cases.items():
            g = Grating(a=a, d=d, coupling_convention=conv)
            assert coupling_strength(1, g) == pytest.approx(expected, rel=1e-12)

    def test_high_order_couplings_small(self, half):
        # beyond sixth order the multipliers are small; the doubled
        # convention sits at exactly twice the normalized value
        for n in (7, 9, 11, 15, 21):
            for conv, bound in (
                (CouplingConvention.FOURIER, 0.1),
                (CouplingConvention.NORMALIZED, 0.1),
                (CouplingConvention.PAPER_EQ8, 0.2),
            ):
                g = Grating(a=half.a, d=half.d, coupling_convention=conv)
                assert abs(coupling_strength(n, g)) < bound

    def test_rejects_bad_geometry(self):
        with pytest.raises(ValueError):
            Grating(a=2.0e5, d=2.0e5)
        with pytest.raises(ValueError):
            Grating(a=-1.0, d=2.0e5)

    def test_coupling_matrix_depends_on_index_difference(self, half):
        lam = coupling_matrix(half, 7)
        assert lam.shape == (7, 7)
        assert np.allclose(lam, lam.T)
        # (n, n') entry equals any other with the same n - n'
        assert lam[5, 4] == lam[3, 2] == lam[1, 0]
        assert lam[6, 1] == lam[5, 0]
        assert np.all(np.diag(lam) == 1.0)

    def test_flat_coupling_matrix(self):
        lam = coupling_matrix(None, 1)
        assert lam.shape == (1, 1) and lam[0, 0] == 1.0
        with pytest.raises(ValueError):
            coupling_matrix(None, 3)


class TestWoodsSaxon:
    def test_midpoint_is_half_amplitude(self):
        w = AbsorberParams(amplitude=-12.0, alpha=2.0, z_i=-5.0)
        assert woods_saxon(-5.0, w, chi=0.5) == -6.0

    def test_asymptotes(self):
        w = AbsorberParams(amplitude=-12.0, alpha=2.0, z_i=0.0)
        assert abs(woods_saxon(2000.0, w, chi=0.5)) < 1e-300
        assert woods_saxon(-1e6, w, chi=0.5) == w.amplitude

    def test_offset_value(self):
        w = AbsorberParams(amplitude=-12.0, alpha=2.0, z_i=-5.0)
        chi = 0.5
        z = w.z_i - 10.0 / (w.alpha * chi)
        got = woods_saxon(z, w, chi)
        assert got == pytest.approx(w.amplitude / (1.0 + math.exp(-10.0)), rel=1e-12)
        assert got == pytest.approx(0.9999546 * w.amplitude, rel=1e-5)

    @given(z=st.floats(min_value=-1e4, max_value=1e4))
    def test_monotone_and_bounded(self, z):
        w = AbsorberParams(amplitude=-12.0, alpha=2.0, z_i=-1.0)
        v = woods_saxon(z, w, chi=0.5)
        v_right = woods_saxon(z + 1.0, w, chi=0.5)
        assert w.amplitude <= v <= 0.0
        assert v <= v_right  # less negative to the right

    def test_rejects_bad_steepness(self):
        with pytest.raises(ValueError):
            AbsorberParams(amplitude=-5.0, alpha=0.0, z_i=0.0)
        w = AbsorberParams(amplitude=-5.0, alpha=1.0, z_i=0.0)
        with pytest.raises(ValueError):
            woods_saxon(0.0, w, chi=-1.0)

    def test_tail_clearance_profile(self):
        w = AbsorberParams(amplitude=-45.0, alpha=3.0, z_i=-0.75)
        assert w.tail_clearance(w.z_i, 0.5) == 0.5
        assert w.tail_clearance(30.0, 0.5) < 1e-8
        assert w.tail_clearance(-100.0, 0.5) == 1.0


class TestPresets:
    def test_all_four_presets(self):
        assert available_surfaces() == [
            "flat_cr",
            "gaas_wafer",
            "glass_slide",
            "structured_cr",
        ]

    def test_flat_presets_have_no_grating(self):
        for name in ("glass_slide", "gaas_wafer", "flat_cr"):
            s = load_surface(name)
            assert isinstance(s, Surface)
            assert s.is_flat

    def test_structured_preset_geometry(self):
        s = load_surface("structured_cr")
        assert not s.is_flat
        assert s.grating.d == 2.0e5  # 20 micron period
        assert s.grating.a == 1.0e5  # 10 micron strips
        assert s.grating.n_max == 10

    def test_glass_and_cr_share_parameters(self):
        glass = load_surface("glass_slide")
        cr = load_surface("flat_cr")
        assert glass.potential.d_well == cr.potential.d_well

    def test_unknown_name_lists_presets(self):
        with pytest.raises(KeyError) as err:
            load_surface("teflon")
        assert "glass_slide" in str(err.value)
