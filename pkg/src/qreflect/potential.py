"""Perpendicular surface interaction, grating couplings and the absorber.

The one-dimensional interaction V(z) is a Morse well smoothly joined to an
attractive van der Waals/Casimir tail -C4/((l+z) z^3).  The join point z_bar
and the Morse depth are fixed by continuity of V and V' (solve_matching).
A periodic strip grating enters only through dimensionless coupling
multipliers of V(z); a Woods-Saxon profile supplies the imaginary absorbing
potential that removes flux reaching the inner repulsive region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .constants import c3_to_internal

_MATCH_BRACKET = (0.1, 50.0)  # Angstrom, search window for the join point
_MATCH_SCAN_POINTS = 10_000
_MATCH_TOL = 1e-12  # Angstrom, bisection tolerance
_RESIDUAL_TOL = 1e-10  # meV and meV/Angstrom
_EXP_CLAMP = 700.0


class MatchingError(RuntimeError):
    """Raised when the Morse/Casimir join point cannot be determined."""


def _morse(z, d_well, chi):
    u = np.exp(-chi * np.asarray(z, dtype=float))
    return d_well * (u * u - 2.0 * u)


def _morse_deriv(z, d_well, chi):
    u = np.exp(-chi * np.asarray(z, dtype=float))
    return 2.0 * d_well * chi * u * (1.0 - u)


def _casimir(z, c4, l):
    z = np.asarray(z, dtype=float)
    return -c4 / ((l + z) * z**3)


def _casimir_deriv(z, c4, l):
    z = np.asarray(z, dtype=float)
    return c4 * (4.0 * z + 3.0 * l) / ((l + z) ** 2 * z**4)


def _log_deriv_mismatch(z, chi, l):
    # V'/V of the Morse branch minus V'/V of the tail; the Morse depth
    # cancels, so the join point depends on (chi, l) only.
    u = math.exp(-chi * z)
    return 2.0 * chi * (1.0 - u) / (u - 2.0) + 3.0 / z + 1.0 / (l + z)


def solve_matching(chi: float, c3: float, l: float) -> tuple[float, float]:
    """Return (d_well, z_bar) joining the Morse core to the -C4/((l+z)z^3) tail.

    Inputs are in internal units: chi in 1/Angstrom, c3 in meV Angstrom^3,
    l in Angstrom.  The join point is located by a dense sign-change scan of
    the depth-independent log-derivative mismatch on (0.1, 50) Angstrom,
    refined by bisection to 1e-12 Angstrom.  A missing or ambiguous sign
    change raises MatchingError rather than guessing.
    """
    if chi <= 0 or c3 <= 0 or l <= 0:
        raise ValueError(f"chi, c3, l must be positive, got {(chi, c3, l)}")

    lo, hi = _MATCH_BRACKET
    zs = np.linspace(lo, hi, _MATCH_SCAN_POINTS)
    vals = np.array([_log_deriv_mismatch(z, chi, l) for z in zs])
    signs = np.sign(vals)
    crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]

    if len(crossings) == 0:
        raise MatchingError(
            f"no Morse/Casimir join point in bracket ({lo}, {hi}) Angstrom "
            f"for chi={chi}, l={l}"
        )
    if len(crossings) > 1:
        cands = [0.5 * (zs[i] + zs[i + 1]) for i in crossings]
        raise MatchingError(
            f"multiple join-point candidates near z = {cands} Angstrom; "
            "refusing to pick one silently"
        )

    i = crossings[0]
    a, b = zs[i], zs[i + 1]
    fa = _log_deriv_mismatch(a, chi, l)
    while b - a > _MATCH_TOL:
        m = 0.5 * (a + b)
        fm = _log_deriv_mismatch(m, chi, l)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    z_bar = 0.5 * (a + b)

    c4 = c3 * l
    u = math.exp(-chi * z_bar)
    d_well = float(_casimir(z_bar, c4, l)) / (u * (u - 2.0))
    if d_well <= 0:
        raise MatchingError(f"non-physical Morse depth {d_well} meV at z_bar={z_bar}")
    return d_well, z_bar


@dataclass(frozen=True)
class SurfacePotential:
    """Perpendicular interaction: Morse core for z < z_bar, Casimir tail beyond.

    All fields in internal units.  c4 == c3 * l by construction and both
    continuity residuals at z_bar are verified below 1e-10 at build time.
    """

    chi: float  # 1/Angstrom, Morse stiffness
    c3: float  # meV Angstrom^3
    l: float  # Angstrom, van der Waals -> Casimir crossover length
    c4: float  # meV Angstrom^4
    d_well: float  # meV, Morse depth
    z_bar: float  # Angstrom, join point

    @classmethod
    def from_parameters(cls, chi: float, c3: float, l: float) -> "SurfacePotential":
        """Build from (chi, c3, l) in internal units, solving the matching problem."""
        d_well, z_bar = solve_matching(chi, c3, l)
        return cls(chi=chi, c3=c3, l=l, c4=c3 * l, d_well=d_well, z_bar=z_bar)

    @classmethod
    def from_si(cls, chi: float, c3_si: float, l: float) -> "SurfacePotential":
        """Build from chi [1/Angstrom], C3 [J m^3], l [Angstrom]."""
        return cls.from_parameters(chi, c3_to_internal(c3_si), l)

    def __post_init__(self):
        if self.z_bar <= 0:
            raise ValueError("join point must sit on the attractive tail (z_bar > 0)")
        if self.d_well <= 0:
            raise ValueError("Morse depth must be positive")
        if self.c4 != self.c3 * self.l:
            raise ValueError("c4 must equal c3 * l exactly")
        dv = abs(
            float(_morse(self.z_bar, self.d_well, self.chi))
            - float(_casimir(self.z_bar, self.c4, self.l))
        )
        dvp = abs(
            float(_morse_deriv(self.z_bar, self.d_well, self.chi))
            - float(_casimir_deriv(self.z_bar, self.c4, self.l))
        )
        if dv > _RESIDUAL_TOL or dvp > _RESIDUAL_TOL:
            raise ValueError(
                f"continuity residuals at z_bar too large: |dV|={dv}, |dV'|={dvp}"
            )

    def energy(self, z):
        """V(z) in meV; scalar or ndarray, total on its domain."""
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        core = z < self.z_bar
        out[core] = _morse(z[core], self.d_well, self.chi)
        tail = ~core
        out[tail] = _casimir(z[tail], self.c4, self.l)
        if out.ndim == 0:
            return float(out)
        return out

    def energy_deriv(self, z):
        """dV/dz in meV/Angstrom."""
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        core = z < self.z_bar
        out[core] = _morse_deriv(z[core], self.d_well, self.chi)
        tail = ~core
        out[tail] = _casimir_deriv(z[tail], self.c4, self.l)
        if out.ndim == 0:
            return float(out)
        return out


def v_perp(z, p: SurfacePotential):
    """Evaluate the perpendicular potential V(z) in meV."""
    return p.energy(z)


class CouplingConvention(str, Enum):
    """How the grating Fourier series is turned into channel couplings.

    The strip grating's Fourier coefficients are c_n = (a/d) sinc(n a/d),
    yet the specular channel always carries the full V(z).  The off-diagonal
    multiplier is therefore a convention choice, surfaced explicitly:

    * ``fourier``    - raw coefficient c_n,
    * ``normalized`` - c_n / c_0 = sinc(n a/d)   (default),
    * ``paper_eq8``  - 2 sinc(n a/d).
    """

    FOURIER = "fourier"
    NORMALIZED = "normalized"
    PAPER_EQ8 = "paper_eq8"


@dataclass(frozen=True)
class Grating:
    """Periodic strip grating: strips of width a repeated with period d."""

    a: float  # Angstrom, strip width
    d: float  # Angstrom, period
    n_max: int = 10  # Fourier truncation order
    coupling_convention: CouplingConvention = CouplingConvention.NORMALIZED

    def __post_init__(self):
        if not 0 < self.a < self.d:
            raise ValueError(f"need 0 < a < d, got a={self.a}, d={self.d}")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")


def _sinc(x: float) -> float:
    """sin(pi x)/(pi x) with exact zeros at nonzero integers and sinc(0) = 1."""
    if x == 0.0:
        return 1.0
    if x == math.floor(x):
        return 0.0
    return math.sin(math.pi * x) / (math.pi * x)


def fourier_coefficient(n: int, g: Grating) -> float:
    """Fourier coefficient c_n of the 0/1 strip profile; even in n."""
    r = g.a / g.d
    return r * _sinc(n * r)


def coupling_strength(n: int, g: Grating) -> float:
    """Multiplier lambda_n with V_n(z) = lambda_n V(z); lambda_0 = 1 always."""
    if n == 0:
        return 1.0
    s = _sinc(n * g.a / g.d)
    conv = g.coupling_convention
    if conv == CouplingConvention.FOURIER:
        return (g.a / g.d) * s
    if conv == CouplingConvention.NORMALIZED:
        return s
    if conv == CouplingConvention.PAPER_EQ8:
        return 2.0 * s
    raise ValueError(f"unknown coupling convention {conv!r}")


def coupling_matrix(g: Optional[Grating], n_channels: int) -> np.ndarray:
    """Symmetric Toeplitz matrix Lambda[i, j] = lambda_(i-j) for the channel basis.

    A flat surface (g is None) gives the 1x1 identity.
    """
    if g is None:
        if n_channels != 1:
            raise ValueError("flat surface supports exactly one channel")
        return np.ones((1, 1))
    lam = np.array([coupling_strength(j, g) for j in range(n_channels)])
    idx = np.abs(np.arange(n_channels)[:, None] - np.arange(n_channels)[None, :])
    return lam[idx]


@dataclass(frozen=True)
class AbsorberParams:
    """Woods-Saxon absorbing potential added to the imaginary diagonal.

    V_WS(z) = amplitude / (1 + exp(alpha * chi * (z - z_i))), amplitude < 0
    for absorption.  It plateaus left of z_i and dies off exponentially to
    the right; ``tail_clearance`` quantifies how dead it is at a given z.
    """

    amplitude: float = -45.0  # meV
    alpha: float = 3.0  # dimensionless steepness (scales the Morse chi)
    z_i: float = -0.75  # Angstrom, onset position
    enabled: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def tail_clearance(self, z: float, chi: float) -> float:
        """|V_WS(z)| / |amplitude| - the sigmoid profile value at z."""
        x = self.alpha * chi * (z - self.z_i)
        if x > _EXP_CLAMP:
            return 0.0
        if x < -_EXP_CLAMP:
            return 1.0
        return 1.0 / (1.0 + math.exp(x))


def woods_saxon(z, w: AbsorberParams, chi: float):
    """Evaluate the Woods-Saxon profile in meV; overflow saturates to 0 or A."""
    if w.alpha <= 0 or chi <= 0:
        raise ValueError("alpha and chi must be positive")
    z = np.asarray(z, dtype=float)
    x = np.clip(w.alpha * chi * (z - w.z_i), -_EXP_CLAMP, _EXP_CLAMP)
    out = w.amplitude / (1.0 + np.exp(x))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Surface:
    """Named surface preset: perpendicular potential plus optional grating."""

    name: str
    potential: SurfacePotential
    grating: Optional[Grating] = None

    @property
    def is_flat(self) -> bool:
        return self.grating is None


_DATA_FILE = Path(__file__).parent / "data" / "surfaces.toml"


def _load_preset_table() -> dict:
    with open(_DATA_FILE, "rb") as fh:
        return tomllib.load(fh)


def available_surfaces() -> list[str]:
    return sorted(_load_preset_table().keys())


def load_surface(name: str, n_max: Optional[int] = None) -> Surface:
    """Build a Surface from the shipped preset table.

    Unknown names raise KeyError with the list of valid presets.  n_max
    overrides the preset's Fourier truncation when given.
    """
    table = _load_preset_table()
    if name not in table:
        raise KeyError(
            f"unknown surface {name!r}; available presets: {sorted(table)}"
        )
    rec = table[name]
    pot = SurfacePotential.from_si(chi=rec["chi"], c3_si=rec["c3_si"], l=rec["l"])
    grating = None
    if "grating" in rec:
        grec = rec["grating"]
        grating = Grating(
            a=grec["a"],
            d=grec["d"],
            n_max=int(grec.get("n_max", 10)) if n_max is None else int(n_max),
        )
    return Surface(name=name, potential=pot, grating=grating)
