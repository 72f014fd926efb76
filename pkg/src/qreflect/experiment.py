"""Beam kinematics, reflection scans and fit diagnostics.

Drives the coupled-channel solver over grids of grazing angles for a given
supersonic-beam stagnation temperature, producing reflection-probability
curves against both the perpendicular wave vector and the incidence angle.
Also houses the quality-of-fit metric against digitized experimental curves,
the near-threshold linear fit, and the absorber-independence report that
gates every production result.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import channels as ch
from .constants import CONST
from .potential import AbsorberParams, Surface, coupling_matrix
from .solver import (
    CoupledChannelProblem,
    GridSpec,
    ScatteringSolution,
    solve_problem,
)

ANGLE_RANGE = (0.0, 25e-3)  # rad, grazing; experimental range of validity


@dataclass(frozen=True)
class BeamSource:
    """Supersonic He beam at stagnation temperature t0 (kinetic energy 5/2 kB T0)."""

    t0: float  # K

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("stagnation temperature must be positive")

    @property
    def energy(self) -> float:
        """Incident kinetic energy in meV."""
        return 2.5 * CONST.k_boltzmann * self.t0

    @property
    def k_i(self) -> float:
        """Incident wave vector magnitude in 1/Angstrom."""
        return math.sqrt(self.energy / CONST.hbar2_over_2m)


def wavevector_from_temperature(t0: float) -> float:
    """Incident wave vector sqrt(5 m kB T0)/hbar, reported in 1/nm."""
    return BeamSource(t0).k_i * 10.0


def k_perp(t0: float, theta_grazing: float) -> float:
    """Perpendicular wave-vector component k sin(theta), in 1/nm."""
    if not 0.0 < theta_grazing < math.pi / 2.0:
        raise ValueError(f"grazing angle {theta_grazing} rad out of range (0, pi/2)")
    return wavevector_from_temperature(t0) * math.sin(theta_grazing)


@dataclass(frozen=True)
class ScanPoint:
    theta_grazing: float  # rad
    k_perp_nm: float  # 1/nm
    p_qr: float
    intensities: dict  # experimental diffraction order -> probability


@dataclass(frozen=True)
class ScanResult:
    """Reflection curve over an angle grid for one surface and beam."""

    surface_id: str
    beam: BeamSource
    points: tuple

    def k_perp_values(self) -> np.ndarray:
        return np.array([pt.k_perp_nm for pt in self.points])

    def probabilities(self) -> np.ndarray:
        return np.array([pt.p_qr for pt in self.points])

    def theta_values(self) -> np.ndarray:
        return np.array([pt.theta_grazing for pt in self.points])

    def order_columns(self) -> list:
        """Experimental diffraction orders present, specular first then +1,-1,..."""
        orders = set()
        for pt in self.points:
            orders.update(pt.intensities.keys())
        ordered = [0]
        for m in range(1, max(abs(o) for o in orders) + 1 if orders else 1):
            if m in orders:
                ordered.append(m)
            if -m in orders:
                ordered.append(-m)
        return [o for o in ordered if o in orders]

    def interpolator(self) -> PchipInterpolator:
        """Monotone piecewise-cubic interpolant of p_qr over k_perp."""
        k = self.k_perp_values()
        p = self.probabilities()
        order = np.argsort(k)
        return PchipInterpolator(k[order], p[order])


@dataclass(frozen=True)
class ExperimentalCurve:
    """Externally supplied (digitized) reflection curve."""

    k_perp_nm: np.ndarray
    probability: np.ndarray
    label: str = "experiment"

    def __post_init__(self):
        k = np.asarray(self.k_perp_nm, dtype=float)
        p = np.asarray(self.probability, dtype=float)
        if k.ndim != 1 or k.shape != p.shape:
            raise ValueError("curve arrays must be 1-d and equal length")
        if np.any(np.diff(k) <= 0):
            raise ValueError("k_perp values must be strictly increasing")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")


def _solve_point(
    surface: Surface,
    beam: BeamSource,
    theta_grazing: float,
    absorber: AbsorberParams,
    grid: GridSpec,
    n_max: Optional[int],
) -> ScanPoint:
    grating = surface.grating
    cond = ch.ScatteringConditions(
        k_i=beam.k_i,
        theta_i_normal=ch.grazing_to_normal(theta_grazing),
        d_period=None if grating is None else grating.d,
    )
    nm = 0 if grating is None else (grating.n_max if n_max is None else n_max)
    chan = ch.build_channel_set(cond, nm)
    problem = CoupledChannelProblem(
        channels=chan,
        potential=surface.potential,
        coupling=coupling_matrix(grating, chan.n_channels),
        absorber=absorber,
        grid=grid,
    )
    sol = solve_problem(problem)
    # theory order -> experimental order, applied here and nowhere else
    intensities = {
        ch.experimental_order(n): float(i)
        for n, i in zip(sol.open_orders, sol.intensities)
    }
    return ScanPoint(
        theta_grazing=theta_grazing,
        k_perp_nm=k_perp(beam.t0, theta_grazing),
        p_qr=sol.p_qr,
        intensities=intensities,
    )


def _max_workers(n_tasks: int) -> int:
    cap = os.environ.get("QREFLECT_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def run_scan(
    surface: Surface,
    beam: BeamSource,
    angles: Sequence[float],
    absorber: AbsorberParams,
    grid: GridSpec = GridSpec(),
    n_max: Optional[int] = None,
) -> ScanResult:
    """One solver run per grazing angle; deterministic, angle-keyed assembly.

    Angles must be strictly increasing and inside (0, 25 mrad].  Points run
    concurrently (QREFLECT_THREADS caps the pool); results are ordered by
    angle index, never by completion order.
    """
    angles = list(angles)
    if not angles:
        raise ValueError("empty angle grid")
    if any(b <= a for a, b in zip(angles, angles[1:])):
        raise ValueError("angles must be strictly increasing")
    if angles[0] <= ANGLE_RANGE[0] or angles[-1] > ANGLE_RANGE[1] + 1e-15:
        raise ValueError(
            f"angles must lie within ({ANGLE_RANGE[0]}, {ANGLE_RANGE[1]}] rad"
        )

    def job(i_theta):
        i, theta = i_theta
        try:
            return i, _solve_point(surface, beam, theta, absorber, grid, n_max)
        except Exception as exc:
            raise RuntimeError(
                f"scan point failed at theta = {theta * 1e3:.6g} mrad: {exc}"
            ) from exc

    results: dict[int, ScanPoint] = {}
    workers = _max_workers(len(angles))
    if workers == 1:
        for item in map(job, enumerate(angles)):
            results[item[0]] = item[1]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, pt in pool.map(job, enumerate(angles)):
                results[i] = pt
    points = tuple(results[i] for i in range(len(angles)))
    return ScanResult(surface_id=surface.name, beam=beam, points=points)


def default_angle_grid(
    start_mrad: float = 0.1, stop_mrad: float = 25.0, count: int = 60
) -> np.ndarray:
    """Logarithmic grazing-angle grid in rad, dense near threshold."""
    return np.geomspace(start_mrad, stop_mrad, count) * 1e-3


def sigma_from_arrays(k_exp, p_exp, k_theo, p_theo):
    """sigma and the matched-point table from raw curve arrays.

    sigma = sqrt( (1/(N(N-1))) sum_j |(P_exp_j - P_theo_j)/P_exp_j|^2 ),
    with theory interpolated (monotone cubic) onto the experimental k_perp
    nodes that fall inside the theory range.  Needs at least two matched
    points and strictly positive experimental probabilities.
    """
    k_exp = np.asarray(k_exp, dtype=float)
    p_exp = np.asarray(p_exp, dtype=float)
    k_theo = np.asarray(k_theo, dtype=float)
    p_theo = np.asarray(p_theo, dtype=float)
    order = np.argsort(k_theo)
    k_theo, p_theo = k_theo[order], p_theo[order]
    lo, hi = float(k_theo[0]), float(k_theo[-1])
    mask = (k_exp >= lo) & (k_exp <= hi)
    n = int(np.count_nonzero(mask))
    if n < 2:
        raise ValueError(
            f"only {n} experimental points overlap the theory range [{lo}, {hi}]; "
            "sigma needs at least two"
        )
    pe = p_exp[mask]
    if np.any(pe <= 0):
        raise ValueError("experimental probabilities must be positive for sigma")
    pt = PchipInterpolator(k_theo, p_theo)(k_exp[mask])
    rel = (pe - pt) / pe
    sigma = float(np.sqrt(np.sum(np.abs(rel) ** 2) / (n * (n - 1))))
    table = list(zip(k_exp[mask].tolist(), pe.tolist(), pt.tolist()))
    return sigma, table


def sigma_metric(exp: ExperimentalCurve, theo: ScanResult) -> float:
    """Quality-of-fit of a scan against a digitized experimental curve."""
    sigma, _ = sigma_from_arrays(
        exp.k_perp_nm, exp.probability, theo.k_perp_values(), theo.probabilities()
    )
    return sigma


@dataclass(frozen=True)
class ThresholdFit:
    """Linear near-threshold fit P ~ intercept - 2 b k_perp."""

    intercept: float
    b_nm: float  # characteristic length, nm
    r_squared: float
    residual_rms: float
    n_points: int


def threshold_fit(scan: ScanResult, k_perp_cutoff: float) -> ThresholdFit:
    """Least-squares line through scan points with k_perp below the cutoff (1/nm)."""
    k = scan.k_perp_values()
    p = scan.probabilities()
    mask = k < k_perp_cutoff
    n = int(np.count_nonzero(mask))
    if n < 5:
        raise ValueError(f"need at least 5 points below cutoff, found {n}")
    k, p = k[mask], p[mask]
    coeffs = np.polyfit(k, p, 1)
    fit = np.polyval(coeffs, k)
    ss_res = float(np.sum((p - fit) ** 2))
    ss_tot = float(np.sum((p - np.mean(p)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ThresholdFit(
        intercept=float(coeffs[1]),
        b_nm=float(-coeffs[0] / 2.0),
        r_squared=r2,
        residual_rms=math.sqrt(ss_res / n),
        n_points=n,
    )


def absorber_independence_report(
    surface: Surface,
    beam: BeamSource,
    theta_grazing: float,
    variants: Sequence[AbsorberParams],
    grid: GridSpec = GridSpec(),
    n_max: Optional[int] = None,
) -> float:
    """Max relative deviation of P_QR across absorber variants.

    The first variant is the reference.  A disabled absorber in the list is
    flagged: its P_QR is total (quantum plus classical) reflection and
    comparing it against absorbed runs is a category error.
    """
    if len(variants) < 2:
        raise ValueError("need at least two absorber variants")
    if any(not v.enabled for v in variants):
        warnings.warn(
            "a variant has the absorber disabled; its unit reflection is not "
            "comparable to quantum-only probabilities",
            stacklevel=2,
        )
    probs = [
        _solve_point(surface, beam, theta_grazing, v, grid, n_max).p_qr
        for v in variants
    ]
    ref = probs[0]
    return max(abs(p - ref) / ref for p in probs[1:])


def independence_variants(base: AbsorberParams) -> list[AbsorberParams]:
    """The default validity suite: amplitude x {0.5, 1, 2} and alpha in {1, 2, 4}."""
    out = [base]
    for f in (0.5, 2.0):
        out.append(AbsorberParams(base.amplitude * f, base.alpha, base.z_i))
    for a in (1.0, 2.0, 4.0):
        if a != base.alpha:
            out.append(AbsorberParams(base.amplitude, a, base.z_i))
    return out
