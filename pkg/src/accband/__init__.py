"""Zonal jets and barotropic dynamics on a latitudinal band of a rotating sphere.

The package splits into:

  geometry         band configuration, stereographic projection, conformal
                   coefficients, metric-aware quadrature
  grids            the log-radial x periodic grid and field containers
  sturm_liouville  regular Sturm-Liouville spectra (matrix + Pruefer
                   shooting), Rayleigh quotients, eigenfunction expansions
  zonal            steady zonal profiles by four independent routes
  euler2d          the time-dependent transport solver on the projected
                   annulus (Poisson, harmonic component, semi-Lagrangian
                   stepping, checkpoints)
  diagnostics      conserved quantities, the Lyapunov functional and its
                   variations, the zonal-stability identity
  cli              scenario files, run modes, CSV/SVG artifacts
"""

from .errors import AccBandError, ConfigError, NumericalError
from .geometry import BandConfig, PlanePoint, SpherePoint, band_integral
from .grids import AnnulusGrid, ScalarField, VectorField
from .sturm_liouville import (
    SLProblem,
    SLSpectrum,
    eigen_solve,
    homogenize_boundary,
    prufer_eigenvalues,
    rayleigh_quotient,
    solve_inhomogeneous,
)
from .zonal import (
    ZonalProfile,
    solve_closed_form_lambda0,
    solve_fd,
    solve_picard,
    solve_sl_expansion,
    velocity_profile,
)
from .euler2d import (
    SimState,
    advect,
    fix_circulation,
    harmonic_component,
    perturbed_zonal_state,
    poisson_solve,
    reconstruct_velocity,
    run,
    step,
    zonal_initial_state,
)
from .diagnostics import (
    DiagnosticRecord,
    casimir,
    circulations,
    en_functional,
    energy,
    lyapunov,
    record,
    stability_identity,
)

__all__ = [
    "AccBandError", "ConfigError", "NumericalError",
    "BandConfig", "PlanePoint", "SpherePoint", "band_integral",
    "AnnulusGrid", "ScalarField", "VectorField",
    "SLProblem", "SLSpectrum", "eigen_solve", "homogenize_boundary",
    "prufer_eigenvalues", "rayleigh_quotient", "solve_inhomogeneous",
    "ZonalProfile", "solve_closed_form_lambda0", "solve_fd", "solve_picard",
    "solve_sl_expansion", "velocity_profile",
    "SimState", "advect", "fix_circulation", "harmonic_component",
    "perturbed_zonal_state", "poisson_solve", "reconstruct_velocity", "run",
    "step", "zonal_initial_state",
    "DiagnosticRecord", "casimir", "circulations", "en_functional", "energy",
    "lyapunov", "record", "stability_identity",
]

__version__ = "0.1.0"
