"""Coupled-channel propagation and S-matrix extraction.

The channel wave functions obey psi'' = W(z) psi with

    W(z) = (V(z) Lambda + i V_WS(z) I) / (hbar^2/2m)  -  diag(k_nz^2),

integrated from a hard wall at z_min out to z_max where the potential matrix
has died off.  The propagator advances the log-derivative matrix
Y = psi' psi^{-1} through two-step Simpson blocks (invariant-imbedding form,
immune to closed-channel growth); the block step follows the local WKB
wavelength, stretching through the long Casimir tail.  At z_max the solution
is matched to flux-normalized travelling waves in open channels and decaying
exponentials in closed ones, yielding the S-matrix column for specular
incidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channels import ChannelSet
from .constants import CONST
from .potential import AbsorberParams, SurfacePotential, woods_saxon

_Y_WALL = 1e30  # log-derivative at a node: effectively +infinity
_ASYMPTOTIC_TOL = 1e-8  # meV, largest potential entry tolerated at z_max
_MAX_BLOCKS = 4_000_000


class GridError(ValueError):
    """Grid construction or validation failed."""


class PropagationError(RuntimeError):
    """Non-finite propagation state; message carries the grid position."""


class AsymptoticsError(RuntimeError):
    """z_max is not in the asymptotically free region."""


@dataclass(frozen=True)
class GridSpec:
    """Integration window and step-control knobs.

    ``points_per_wavelength`` enforces h <= lambda_local / ppw with ppw >= 20;
    ``tail_fraction`` caps the stretched tail step at tail_fraction * z so the
    power-law tail stays resolved even when the local wavelength diverges.
    ``h_override`` forces a uniform step instead; it is validated against the
    WKB criterion before any integration starts.
    """

    z_min: float = -13.0
    z_max: float = 2000.0
    points_per_wavelength: float = 24.0
    tail_fraction: float = 0.125
    h_override: Optional[float] = None

    def __post_init__(self):
        if self.z_min >= self.z_max:
            raise GridError("need z_min < z_max")
        if self.points_per_wavelength < 20.0:
            raise GridError(
                "points_per_wavelength below 20 violates the resolution criterion"
            )
        if not 0 < self.tail_fraction <= 0.5:
            raise GridError("tail_fraction must lie in (0, 0.5]")

    def refined(self, factor: float = 2.0) -> "GridSpec":
        """Spec with every step limit tightened by ``factor`` (for convergence checks)."""
        return GridSpec(
            z_min=self.z_min,
            z_max=self.z_max,
            points_per_wavelength=self.points_per_wavelength * factor,
            tail_fraction=self.tail_fraction / factor,
            h_override=None if self.h_override is None else self.h_override / factor,
        )


@dataclass(frozen=True)
class CoupledChannelProblem:
    """Immutable definition of one propagation.

    ``coupling`` is the symmetric Toeplitz matrix Lambda[i, j] =
    lambda_(i - j); entry (n, n') depends on |n - n'| only.  ``v_override``
    replaces the surface potential with an arbitrary V(z) callable (used by
    verification against solvable models); the wall and asymptotic checks
    still apply.
    """

    channels: ChannelSet
    potential: Optional[SurfacePotential]
    coupling: np.ndarray
    absorber: AbsorberParams = field(default_factory=AbsorberParams)
    grid: GridSpec = field(default_factory=GridSpec)
    chi_for_absorber: Optional[float] = None  # defaults to potential.chi
    v_override: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        n = self.channels.n_channels
        if self.coupling.shape != (n, n):
            raise ValueError("coupling matrix does not match the channel count")
        if not np.allclose(self.coupling, self.coupling.T):
            raise ValueError("coupling matrix must be symmetric")
        if self.v_override is None:
            if self.potential is None:
                raise ValueError("need a surface potential or a v_override")
            if not self.grid.z_min < 0 < self.potential.z_bar < self.grid.z_max:
                raise GridError("grid must satisfy z_min < 0 < z_bar < z_max")

    @property
    def chi(self) -> float:
        if self.chi_for_absorber is not None:
            return self.chi_for_absorber
        if self.potential is not None:
            return self.potential.chi
        return 1.0

    def v_of_z(self, z):
        if self.v_override is not None:
            return self.v_override(z)
        return self.potential.energy(z)

    def v_ws_of_z(self, z):
        if not self.absorber.enabled:
            return np.zeros_like(np.asarray(z, dtype=float))
        return woods_saxon(z, self.absorber, self.chi)


@dataclass(frozen=True)
class ScatteringSolution:
    """S-matrix column for specular incidence and derived probabilities."""

    open_orders: tuple[int, ...]  # solver channel indices with kz^2 > 0
    s_column: np.ndarray  # complex S_n0, flux normalized, aligned with open_orders
    intensities: np.ndarray  # |S_n0|^2
    p_qr: float  # total reflection probability
    unitarity_defect: float  # 1 - sum intensities
    absorber_on: bool

    def __post_init__(self):
        if np.any(self.intensities < 0) or np.any(self.intensities > 1 + 1e-9):
            raise ValueError("intensities must lie in [0, 1]")

    def intensity_of(self, order: int) -> float:
        return float(self.intensities[self.open_orders.index(order)])


def potential_matrix(z: float, p: CoupledChannelProblem) -> np.ndarray:
    """Channel potential matrix at z, in meV (complex when the absorber is on).

    Diagonal: V(z) + i V_WS(z); off-diagonal (n, n'): lambda_(n-n') V(z).
    The channel kinetic offsets live in the kz^2 terms, not here.
    """
    v = float(p.v_of_z(z))
    mat = p.coupling * v
    if p.absorber.enabled:
        mat = mat.astype(complex)
        mat[np.diag_indices_from(mat)] += 1j * float(p.v_ws_of_z(z))
    return mat


def _step_limit(z, p: CoupledChannelProblem, kz2_abs_max: float, eig_scale: float):
    """Largest admissible step at z: WKB wavelength / ppw, capped in the tail."""
    c = CONST.hbar2_over_2m
    v_mag = np.abs(p.v_of_z(z))
    ws_mag = np.abs(p.v_ws_of_z(z)) if p.absorber.enabled else 0.0
    k_sc = np.sqrt(kz2_abs_max + (eig_scale * v_mag + ws_mag) / c)
    h_wkb = 2.0 * math.pi / (p.grid.points_per_wavelength * k_sc)
    h_tail = p.grid.tail_fraction * np.maximum(np.abs(z), 5.0)
    return np.minimum(h_wkb, h_tail)


def build_grid(p: CoupledChannelProblem) -> tuple[np.ndarray, np.ndarray]:
    """Return (h_blocks, z_pts): per-block half-steps and evaluation points.

    Block j spans [z_pts[2j], z_pts[2j+2]] with midpoint z_pts[2j+1] and
    uniform half-step h_blocks[j]; the step limit is evaluated at both block
    ends and the stricter one wins.  A forced uniform step (h_override) is
    validated against the same limit everywhere before acceptance.
    """
    g = p.grid
    kz2_abs_max = float(np.max(np.abs(p.channels.kz2)))
    eig_scale = float(np.max(np.abs(np.linalg.eigvalsh(p.coupling))))

    if g.h_override is not None:
        probe = np.linspace(g.z_min, g.z_max, 20_001)
        h_allowed = _step_limit(probe, p, kz2_abs_max, eig_scale)
        worst = float(np.min(h_allowed))
        if g.h_override > worst:
            raise GridError(
                f"forced step {g.h_override} Angstrom too coarse: the resolution "
                f"criterion requires h <= {worst:.3e} Angstrom on this grid"
            )
        n_blocks = max(1, math.ceil((g.z_max - g.z_min) / (2.0 * g.h_override)))
        if n_blocks > _MAX_BLOCKS:
            raise GridError(f"grid would need {n_blocks} blocks; refusing")
        h = (g.z_max - g.z_min) / (2 * n_blocks)
        h_blocks = np.full(n_blocks, h)
        z_pts = g.z_min + h * np.arange(2 * n_blocks + 1)
        return h_blocks, z_pts

    h_list = []
    z_list = [g.z_min]
    z = g.z_min
    while z < g.z_max - 1e-12:
        h = float(_step_limit(z, p, kz2_abs_max, eig_scale))
        h = min(h, float(_step_limit(min(z + 2 * h, g.z_max), p, kz2_abs_max, eig_scale)))
        if z + 2.0 * h >= g.z_max:
            h = 0.5 * (g.z_max - z)
        h_list.append(h)
        z_list.extend((z + h, z + 2.0 * h))
        z += 2.0 * h
        if len(h_list) > _MAX_BLOCKS:
            raise GridError(f"grid exceeded {_MAX_BLOCKS} blocks; refusing")
    z_list[-1] = g.z_max
    return np.asarray(h_list), np.asarray(z_list)


def _propagate_scalar(h_blocks, q_pts):
    """Single-channel log-derivative sweep; scalars only, wall start."""
    y = _Y_WALL + 0.0j if isinstance(q_pts[0], complex) else _Y_WALL
    qs = list(q_pts)
    hs = list(h_blocks)
    third = 1.0 / 3.0
    i = 0
    for h in hs:
        ht = h * third
        y = y - ht * qs[i]
        qm = qs[i + 1]
        y = y / (1.0 + h * y) - 4.0 * ht * (qm / (1.0 + (h * h / 6.0) * qm))
        y = y / (1.0 + h * y) - ht * qs[i + 2]
        i += 2
    return y


def _propagate_matrix(h_blocks, z_pts, v_pts, vws_pts, p: CoupledChannelProblem):
    """Multichannel log-derivative sweep over variable-step Simpson blocks."""
    n = p.channels.n_channels
    c = CONST.hbar2_over_2m
    use_complex = vws_pts is not None
    dtype = complex if use_complex else float

    lam_c = np.ascontiguousarray(p.coupling / c, dtype=float)
    kz2 = np.asarray(p.channels.kz2, dtype=float)
    eye = np.eye(n, dtype=dtype)

    if use_complex:
        diag_extra = kz2[None, :] - 1j * (vws_pts[:, None] / c)
    else:
        diag_extra = np.broadcast_to(kz2, (len(z_pts), n)).copy()

    y = _Y_WALL * np.eye(n, dtype=dtype)
    q = np.empty((n, n), dtype=dtype)
    di = np.diag_indices(n)

    def q_at(i):
        # Q(z) = diag(kz2) - (V(z) Lambda + i V_WS(z) I)/c
        np.multiply(lam_c, -v_pts[i], out=q.real if use_complex else q)
        if use_complex:
            q.imag[:] = 0.0
        q[di] += diag_extra[i]
        return q

    nb = len(h_blocks)
    for j in range(nb):
        h = h_blocks[j]
        ht = h / 3.0
        i = 2 * j
        y = y - ht * q_at(i)
        qm = q_at(i + 1).copy()
        um = np.linalg.solve(eye + (h * h / 6.0) * qm, qm)
        y = np.linalg.solve(eye + h * y, y) - (4.0 * ht) * um
        y = np.linalg.solve(eye + h * y, y) - ht * q_at(i + 2)
        if not np.all(np.isfinite(y)):
            raise PropagationError(
                f"non-finite log-derivative at z = {z_pts[i + 2]:.6g} Angstrom "
                f"(block {j} of {nb})"
            )
    return y


def propagate(p: CoupledChannelProblem) -> np.ndarray:
    """Integrate the coupled equations; return the log-derivative matrix at z_max.

    The wave function is pinned to zero at z_min in all cases; with the
    absorber on, the imaginary diagonal removes inward flux before it can
    return from the wall.
    """
    h_blocks, z_pts = build_grid(p)
    c = CONST.hbar2_over_2m
    v_pts = np.asarray(p.v_of_z(z_pts), dtype=float)
    vws_pts = None
    if p.absorber.enabled:
        vws_pts = np.asarray(p.v_ws_of_z(z_pts), dtype=float)

    if p.channels.n_channels == 1:
        kz2 = float(p.channels.kz2[0])
        lam00 = float(p.coupling[0, 0])
        q = kz2 - (lam00 / c) * v_pts
        if vws_pts is not None:
            q = q.astype(complex) - 1j * (vws_pts / c)
        y = _propagate_scalar(h_blocks.tolist(), q.tolist())
        if not (
            math.isfinite(y.real if isinstance(y, complex) else y)
            and (not isinstance(y, complex) or math.isfinite(y.imag))
        ):
            raise PropagationError(f"non-finite log-derivative at z = {z_pts[-1]}")
        return np.array([[y]])
    return _propagate_matrix(h_blocks, z_pts, v_pts, vws_pts, p)


def extract_smatrix(y: np.ndarray, p: CoupledChannelProblem) -> ScatteringSolution:
    """Match the propagated log-derivative to asymptotic waves at z_max.

    Open channels carry exp(-i k z)/sqrt(k) inward and exp(+i k z)/sqrt(k)
    outward (flux-normalized); closed channels carry a decaying exponential
    normalized to unity at z_max, so no entry of the matching system can
    overflow regardless of kappa * z.  Unit flux enters in the specular
    channel only.
    """
    z_max = p.grid.z_max
    v_edge = abs(float(p.v_of_z(z_max))) * float(np.max(np.abs(p.coupling)))
    v_edge += abs(float(p.v_ws_of_z(z_max))) if p.absorber.enabled else 0.0
    if v_edge > _ASYMPTOTIC_TOL:
        raise AsymptoticsError(
            f"potential magnitude {v_edge:.3e} meV at z_max = {z_max} exceeds "
            f"{_ASYMPTOTIC_TOL} meV; extend the grid"
        )

    ch = p.channels
    n = ch.n_channels
    kz2 = np.asarray(ch.kz2)
    open_mask = np.asarray(ch.open_flags)

    v = np.zeros(n, dtype=complex)  # outgoing / decaying at z_max
    vp = np.zeros(n, dtype=complex)
    u = np.zeros(n, dtype=complex)  # incoming (zero in closed channels)
    up = np.zeros(n, dtype=complex)

    k_open = np.sqrt(kz2[open_mask])
    phase = np.exp(1j * k_open * z_max) / np.sqrt(k_open)
    v[open_mask] = phase
    vp[open_mask] = 1j * k_open * phase
    u[open_mask] = np.conj(phase)
    up[open_mask] = -1j * k_open * np.conj(phase)

    kappa = np.sqrt(-kz2[~open_mask])
    v[~open_mask] = 1.0
    vp[~open_mask] = -kappa

    y = np.asarray(y, dtype=complex)
    a = y * v[None, :]
    a[np.diag_indices(n)] -= vp
    spec = ch.specular_index
    b = y[:, spec] * u[spec]
    b = b.copy()
    b[spec] -= up[spec]
    coef = np.linalg.solve(a, b)

    s_open = coef[open_mask]
    intensities = np.abs(s_open) ** 2
    p_qr = float(np.sum(intensities))
    open_orders = tuple(nn for nn, f in zip(ch.indices, open_mask) if f)
    return ScatteringSolution(
        open_orders=open_orders,
        s_column=s_open,
        intensities=intensities,
        p_qr=p_qr,
        unitarity_defect=1.0 - p_qr,
        absorber_on=p.absorber.enabled,
    )


def solve_problem(p: CoupledChannelProblem) -> ScatteringSolution:
    """Propagate and extract in one call."""
    return extract_smatrix(propagate(p), p)


def diffraction_efficiencies(sol: ScatteringSolution) -> np.ndarray:
    """Per-channel fractions I_n / P_QR; they sum to one by construction."""
    if sol.p_qr < 1e-12:
        raise ValueError(
            f"total reflection probability {sol.p_qr:.3e} too small to normalize"
        )
    return sol.intensities / sol.p_qr
