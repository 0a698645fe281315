"""Conserved quantities and stability diagnostics.

All functionals are spherical-band integrals evaluated on the projected
grid with the same quadrature as geometry.band_integral (trapezoid in
rho, exact periodic sum in phi). The useful reductions, with
s = -zeta the absolute vorticity and psi the full stream function:

  energy            1/2 int (u^2 + v^2) dsigma  =  1/2 int |grad psi|^2 drho dphi
  circulations      int psi_theta dphi along each wall
                    = -(planar wall circulation)/cos(theta_wall)
  casimir(f)        int f(s) dsigma
  lyapunov          E = 1/2 int [ -lam |grad psi|^2_sph + (s - upsilon)^2 ] dsigma
                        + lam [ a_w int psi_theta|w2 + b_w int psi_theta|w1 ],
                    a_w = psi2 cos(theta2), b_w = -psi1 cos(theta1)
  stability_lhs     -lam ||u - u*||^2 + ||Omega - Omega*||^2, with
                    Omega - Omega* = -(zeta - zeta*)
  en_functional     int [ -upsilon (n+1)/n s^n + s^{n+1} ] dsigma

E is exactly quadratic in psi. zonal_critical_stream builds the zonal
restriction of the discrete quadratic form explicitly (by polarization)
and solves for its critical point with the boundary values pinned; that
state makes the discrete first variation vanish to round-off in every
admissible direction, zonal or not (nonzonal modes decouple exactly in
the phi sum).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridMismatch, ValidationError
from .geometry import alpha_of_rho, beta_of_rho
from . import euler2d
from .euler2d import (
    SimState,
    boundary_circulations,
    dphi,
    drho,
    laplacian_values,
)

CSV_HEADER = "t,energy,circ1,circ2,casimir2,casimir3,stability_identity,max_xi,lambda_circ"


# ==================================================================
# Quadratures
# ==================================================================

def integral_dsigma(values, grid):
    """Band integral with the spherical area element (dtype-preserving)."""
    w = grid.radial_weights * np.cos(grid.theta) ** 2
    return grid.d_phi * np.sum(w[:, None] * values)


def integral_flat(values, grid):
    """Integral against drho dphi (gradient-type integrands)."""
    return grid.d_phi * np.sum(grid.radial_weights[:, None] * values)


def grad_square_flat(psi_values, grid):
    """|grad psi|^2 dA collapsed to the flat measure: psi_rho^2 + psi_phi^2."""
    return drho(psi_values, grid) ** 2 + dphi(psi_values, grid) ** 2


# ==================================================================
# Individual functionals
# ==================================================================

def _stream_of(state: SimState):
    """Full stream function; the Poisson part is cached on the state."""
    return euler2d.stream_of(state)


def energy_from_stream(psi_values, grid) -> float:
    return 0.5 * integral_flat(grad_square_flat(psi_values, grid), grid)


def energy(state: SimState) -> float:
    """Kinetic energy 1/2 int (u^2 + v^2) dsigma."""
    return energy_from_stream(_stream_of(state), state.grid)


def energy_zonal_profile(profile) -> float:
    """1-D oracle: pi int u(theta)^2 cos(theta) dtheta."""
    return math.pi * float(
        np.trapezoid(profile.u**2 * np.cos(profile.thetas), profile.thetas)
    )


def circulations(state: SimState):
    """Spherical circulations int psi_theta dphi at (theta1, theta2)."""
    c1p, c2p = boundary_circulations(_stream_of(state), state.grid)
    th = state.grid.theta
    return -c1p / math.cos(th[0]), -c2p / math.cos(th[-1])


def absolute_vorticity(state: SimState):
    """s = Delta psi + 2 omega sin(theta) = -zeta on this convention."""
    return -state.zeta.values


def _moment_function(spec):
    if isinstance(spec, int):
        if not 0 <= spec <= 6:
            raise ValidationError("power moments supported for k <= 6")
        return lambda s: s**spec
    if callable(spec):
        return spec
    if isinstance(spec, tuple) and len(spec) == 2:
        from scipy.interpolate import CubicSpline

        nodes, vals = spec
        return CubicSpline(np.asarray(nodes, float), np.asarray(vals, float))
    raise ValidationError("moment spec must be an int power, callable, or table")


def casimir(state: SimState, moment) -> float:
    """int f(absolute vorticity) dsigma for f a power, callable, or table."""
    f = _moment_function(moment)
    return integral_dsigma(f(absolute_vorticity(state)), state.grid)


def en_functional(state: SimState, n: int, upsilon: Optional[float] = None) -> float:
    """The lam = 0 conserved family: int [-ups (n+1)/n s^n + s^(n+1)] dsigma."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    ups = state.config.upsilon if upsilon is None else upsilon
    s = absolute_vorticity(state)
    return integral_dsigma(-ups * (n + 1) / n * s**n + s ** (n + 1), state.grid)


# ==================================================================
# Lyapunov functional
# ==================================================================

def _lyapunov_terms(psi_values, s_values, config, grid):
    """Assemble E from a stream function and the absolute vorticity."""
    lam = config.lam
    quad = 0.5 * (
        -lam * integral_flat(grad_square_flat(psi_values, grid), grid)
        + integral_dsigma((s_values - config.upsilon) ** 2, grid)
    )
    c1p, c2p = boundary_circulations(psi_values, grid)
    # a_w int psi_theta|theta2 dphi + b_w int psi_theta|theta1 dphi with the
    # critical weights a_w = psi2 cos(theta2), b_w = -psi1 cos(theta1),
    # rewritten through the planar circulations.
    boundary = lam * (config.psi1 * c1p - config.psi2 * c2p)
    return quad + boundary


def lyapunov(state: SimState) -> float:
    """E evaluated on a simulation state (zeta is the prognostic field)."""
    return _lyapunov_terms(_stream_of(state), absolute_vorticity(state),
                           state.config, state.grid)


def lyapunov_of_stream(psi_values, config, grid) -> float:
    """E evaluated on an arbitrary stream field (variation tests).

    The absolute vorticity is produced by the grid's own Laplacian, so E
    is an explicit quadratic form in the nodal values of psi.
    """
    a = alpha_of_rho(grid.rho)[:, None]
    b = beta_of_rho(grid.rho, config.omega)[:, None]
    s_values = a * laplacian_values(psi_values, grid) - b
    return _lyapunov_terms(psi_values, s_values, config, grid)


def _solve_dense_longdouble(a, b):
    """Gaussian elimination with partial pivoting in extended precision.

    LAPACK only handles single/double, and the critical-point system is
    too ill-conditioned for float64 plus iterative refinement.
    """
    a = a.copy()
    b = b.copy()
    n = len(b)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            raise ValidationError("critical-point Hessian is singular")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= factors[:, None] * a[k, k:]
        b[k + 1 :] -= factors * b[k]
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def _radial_derivative_matrices(grid):
    """Dense matrices of the radial d/drho and d2/drho2 stencils.

    Rows match drho/d2rho exactly (centered interior, one-sided walls),
    so quadratic forms built from them agree with lyapunov_of_stream to
    round-off.
    """
    n = grid.n_rho
    h = grid.d_rho
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    for i in range(1, n - 1):
        d1[i, i - 1] = -0.5 / h
        d1[i, i + 1] = 0.5 / h
        d2[i, i - 1 : i + 2] = np.array([1.0, -2.0, 1.0]) / h**2
    d1[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    d1[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    d2[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
    d2[-1, -4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
    return d1, d2


def zonal_critical_stream(config, grid, dtype=float) -> np.ndarray:
    """Exact critical point of the discrete E over zonal stream functions.

    Restricted to the zonal Fourier mode, E(psi) = 1/2 psi^T A psi
    + b^T psi + const with

      A = 2 pi [ -lam D1^T W D1 + M^T W_c M ],      M = diag(alpha e^{-2rho}) D2,
      b = 2 pi [ -M^T W_c (beta + upsilon)
                 - lam (psi1 D1^T e_first - psi2 D1^T e_last) ],

    (W, W_c the radial quadrature weights, plain and with cos^2 theta).
    Zeroing the gradient on the interior nodes with psi(walls) pinned
    gives a second-order zonal steady state whose discrete first
    variation vanishes to round-off in every admissible direction:
    nonzonal modes decouple exactly in the phi sum.
    """
    n = grid.n_rho
    two_pi = 2.0 * math.pi
    # assembly and elimination in extended precision: the interior block
    # is bi-Laplacian-like (condition ~ h^-4, entries ~ h^-4), and float64
    # assembly alone would shift the critical point enough to leave an
    # O(eps * ||A||) first variation
    d1_f, d2_f = _radial_derivative_matrices(grid)
    d1 = d1_f.astype(np.longdouble)
    d2 = d2_f.astype(np.longdouble)
    a = alpha_of_rho(grid.rho).astype(np.longdouble)
    b_row = beta_of_rho(grid.rho, config.omega).astype(np.longdouble)
    m = (a * np.exp(-2.0 * grid.rho))[:, None] * d2
    w = grid.radial_weights.astype(np.longdouble)
    w_c = w * np.cos(grid.theta) ** 2

    hess = two_pi * (
        -config.lam * d1.T @ (w[:, None] * d1) + m.T @ (w_c[:, None] * m)
    )
    lin = two_pi * (
        -m.T @ (w_c * (b_row + config.upsilon))
        - config.lam * (config.psi1 * d1[0] - config.psi2 * d1[-1])
    )

    psi = np.empty(n, dtype=np.longdouble)
    psi[0], psi[-1] = config.psi1, config.psi2
    interior = slice(1, n - 1)
    rhs = -(lin[interior]
            + hess[interior, 0] * psi[0]
            + hess[interior, -1] * psi[-1])
    psi[interior] = _solve_dense_longdouble(hess[interior, interior], rhs)
    return psi.astype(dtype)


# ==================================================================
# Stability identity
# ==================================================================

def velocity_distance_squared(state: SimState, reference: SimState) -> float:
    """||u - u*||^2_{L2(band)}: conformally flat, so a planar integral."""
    if not state.grid.compatible_with(reference.grid):
        raise GridMismatch("state and reference live on different grids")
    psi = _stream_of(state)
    psi_ref = _stream_of(reference)
    return integral_flat(grad_square_flat(psi - psi_ref, state.grid), state.grid)


def vorticity_distance_squared(state: SimState, reference: SimState) -> float:
    """||Omega - Omega*||^2: Omega - Omega* = -(zeta - zeta*)."""
    if not state.grid.compatible_with(reference.grid):
        raise GridMismatch("state and reference live on different grids")
    diff = state.zeta.values - reference.zeta.values
    return integral_dsigma(diff**2, state.grid)


def stability_lhs(state: SimState, reference: SimState) -> float:
    lam = state.config.lam
    return (
        -lam * velocity_distance_squared(state, reference)
        + vorticity_distance_squared(state, reference)
    )


def stability_identity(state: SimState, reference: SimState,
                       initial: SimState):
    """(lhs at time t, rhs frozen at t = 0); equal for exact solutions."""
    return stability_lhs(state, reference), stability_lhs(initial, reference)


# ==================================================================
# Per-state record
# ==================================================================

@dataclass
class DiagnosticRecord:
    t: float
    energy: float
    circ1: float
    circ2: float
    casimirs: dict
    lyapunov: float
    stability_lhs: Optional[float]
    max_xi: float
    lambda_circ: float

    def csv_row(self) -> str:
        stab = float("nan") if self.stability_lhs is None else self.stability_lhs
        cells = [self.t, self.energy, self.circ1, self.circ2,
                 self.casimirs.get(2, float("nan")),
                 self.casimirs.get(3, float("nan")),
                 stab, self.max_xi, self.lambda_circ]
        return ",".join(repr(float(v)) for v in cells)


def harmonic_ode_coefficients(state: SimState) -> dict:
    """Quadratures of the harmonic-coefficient ODE, an optional diagnostic.

    The time-dependent construction evolves the harmonic coefficient by
    a quadratic ODE; in the decomposition-consistent normalization it
    reads lambda' = -N (gamma1 + gamma2 lambda). With U* purely azimuthal
    and grad(alpha) radial most of the quadratures drop, leaving (u_r,
    u_phi the Green-part velocity, c the azimuthal U* profile):

      gamma1 = int c u_r (2 u_phi W + beta) dA,
      gamma2 = int c^2 u_r W dA,          W = (1+r^2)(1-r^2)/(4r),

    and gamma2 vanishes identically on the annulus (the ring average of
    u_r is exactly zero). The algebraic circulation closure reproduces
    the same lambda(t) without integrating this ODE; comparing the
    predicted rate against the observed one exercises the formulas.
    """
    grid = state.grid
    config = state.config
    psi_bar = euler2d.bar_stream_of(state)
    u_r, u_phi = euler2d.velocity_from_stream(psi_bar, grid)
    ustar, norm = euler2d.harmonic_component(grid)
    c = ustar.u_phi
    r = np.exp(grid.rho)[:, None]
    w_geom = (1.0 + r**2) * (1.0 - r**2) / (4.0 * r)
    b = beta_of_rho(grid.rho, config.omega)[:, None]
    area = grid.radial_weights[:, None] * np.exp(2.0 * grid.rho)[:, None] * grid.d_phi
    gamma1 = float(np.sum(area * c * u_r * (2.0 * u_phi * w_geom + b)))
    gamma2 = float(np.sum(area * c**2 * u_r * w_geom))
    return {
        "gamma1": gamma1,
        "gamma2": gamma2,
        "predicted_lambda_rate": -norm * (gamma1 + gamma2 * state.lambda_circ),
    }


def harmonic_ode_residual(prev: SimState, mid: SimState, nxt: SimState) -> float:
    """Observed minus predicted lambda rate, centered at the middle state."""
    lam_dot = (nxt.lambda_circ - prev.lambda_circ) / (nxt.t - prev.t)
    return lam_dot - harmonic_ode_coefficients(mid)["predicted_lambda_rate"]


def summary(records) -> dict:
    """JSON-ready run summary: initial/final values and relative drifts."""
    first, last = records[0], records[-1]

    def drift(a, b):
        return abs(b - a) / max(1e-30, abs(a))

    entries = {
        "energy": (first.energy, last.energy),
        "circ1": (first.circ1, last.circ1),
        "circ2": (first.circ2, last.circ2),
        "lyapunov": (first.lyapunov, last.lyapunov),
        **{f"casimir{k}": (first.casimirs[k], last.casimirs[k])
           for k in first.casimirs},
    }
    out = {
        "t_first": float(first.t),
        "t_last": float(last.t),
        "records": len(records),
        "max_xi_overall": float(max(r.max_xi for r in records)),
        "quantities": {
            name: {"initial": float(a), "final": float(b),
                   "relative_drift": float(drift(a, b))}
            for name, (a, b) in entries.items()
        },
    }
    if first.stability_lhs is not None:
        out["stability"] = {
            "rhs": float(first.stability_lhs),
            "lhs_final": float(last.stability_lhs),
            "defect": float(last.stability_lhs - first.stability_lhs),
        }
    return out


def record(state: SimState, reference: SimState = None,
           casimir_powers=(2, 3)) -> DiagnosticRecord:
    """Evaluate the full diagnostic suite on one state."""
    c1, c2 = circulations(state)
    rec = DiagnosticRecord(
        t=state.t,
        energy=energy(state),
        circ1=c1,
        circ2=c2,
        casimirs={k: casimir(state, k) for k in casimir_powers},
        lyapunov=lyapunov(state),
        stability_lhs=None if reference is None else stability_lhs(state, reference),
        max_xi=state.max_xi(),
        lambda_circ=state.lambda_circ,
    )
    for v in (rec.energy, rec.circ1, rec.circ2, rec.lyapunov, rec.max_xi,
              *rec.casimirs.values()):
        if not math.isfinite(v):
            raise ValidationError("diagnostic produced a non-finite value")
    return rec
