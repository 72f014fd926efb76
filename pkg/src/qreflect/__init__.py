"""Coupled-channel engine for quantum threshold reflection of He beams."""

from .channels import (
    ChannelSet,
    ScatteringConditions,
    bragg_angle,
    build_channel_set,
    kz_squared,
)
from .constants import CONST, PhysicalConstants, c3_to_internal, kinetic_prefactor
from .experiment import (
    BeamSource,
    ExperimentalCurve,
    ScanResult,
    absorber_independence_report,
    k_perp,
    run_scan,
    sigma_metric,
    threshold_fit,
    wavevector_from_temperature,
)
from .potential import (
    AbsorberParams,
    CouplingConvention,
    Grating,
    Surface,
    SurfacePotential,
    coupling_strength,
    fourier_coefficient,
    load_surface,
    solve_matching,
    v_perp,
    woods_saxon,
)
from .solver import (
    CoupledChannelProblem,
    GridSpec,
    ScatteringSolution,
    diffraction_efficiencies,
    extract_smatrix,
    potential_matrix,
    propagate,
    solve_problem,
)

__version__ = "0.1.0"
