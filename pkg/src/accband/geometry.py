"""Spherical band geometry and the stereographic projection.

The flow domain is an annular band on the unit sphere,

    C = { (phi, theta) : phi in [0, 2pi), theta1 < theta < theta2 },

with -pi/2 < theta1 < theta2 < 0. Projecting stereographically from the
North Pole onto the equatorial plane,

    x = cos(theta)/(1 - sin(theta)) * cos(phi),
    y = cos(theta)/(1 - sin(theta)) * sin(phi),

maps C onto the annulus r1 < sqrt(x^2+y^2) < r2 with
r_i = cos(theta_i)/(1 - sin(theta_i)). The map is conformal with

    alpha(x, y) = (1 + x^2 + y^2)^2 / 4,

relating the Laplace-Beltrami operator to the planar Laplacian
(Delta_sphere = alpha * Delta_plane) and the area elements
(dsigma = dx dy / alpha). The planetary-vorticity profile transported to
the plane is

    beta(x, y) = 2 omega (1 - x^2 - y^2)/(1 + x^2 + y^2) = -2 omega sin(theta).

All point operations are plain functions of floats/ndarrays; the dataclass
wrappers validate the domain invariants.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import OriginUndefined, ValidationError
from .grids import ScalarField


# ==================================================================
# Problem configuration
# ==================================================================

@dataclass(frozen=True)
class BandConfig:
    """Physical parameters of one band scenario.

    theta1, theta2 : band latitudes in radians, -pi/2 < theta1 < theta2 < 0
    psi1, psi2     : stream-function values on the two boundary circles
    omega          : nondimensional rotation rate (Omega' R' / U')
    lam            : slope of the affine oceanic vorticity F(psi) = -lam*psi + upsilon
    upsilon        : offset of the oceanic vorticity
    u_scale        : dimensional velocity scale in m/s for output conversion
    """

    theta1: float = math.radians(-60.0)
    theta2: float = math.radians(-50.0)
    psi1: float = -5.0
    psi2: float = -25.0
    omega: float = 4650.0
    lam: float = 0.0
    upsilon: float = 0.0
    u_scale: float = 0.1

    def __post_init__(self):
        if not (-math.pi / 2 < self.theta1 < self.theta2 < 0.0):
            raise ValidationError(
                f"need -pi/2 < theta1 < theta2 < 0, got ({self.theta1}, {self.theta2})"
            )
        if not self.omega > 0:
            raise ValidationError(f"omega must be positive, got {self.omega}")
        if not (0.0 < self.r1 < self.r2 < 1.0):
            raise ValidationError("projected radii must satisfy 0 < r1 < r2 < 1")

    @property
    def r1(self):
        return math.cos(self.theta1) / (1.0 - math.sin(self.theta1))

    @property
    def r2(self):
        return math.cos(self.theta2) / (1.0 - math.sin(self.theta2))


# ==================================================================
# Points
# ==================================================================

@dataclass(frozen=True)
class SpherePoint:
    """(longitude, latitude) with phi in [0, 2pi), |theta| < pi/2."""

    phi: float
    theta: float

    def __post_init__(self):
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise ValidationError(f"phi must lie in [0, 2pi), got {self.phi}")
        if not (-math.pi / 2 < self.theta < math.pi / 2):
            raise ValidationError(f"theta must lie in (-pi/2, pi/2), got {self.theta}")

    def to_plane(self):
        x, y = project(self.phi, self.theta)
        return PlanePoint(float(x), float(y))


@dataclass(frozen=True)
class PlanePoint:
    """Cartesian point on the equatorial projection plane."""

    x: float
    y: float

    def to_sphere(self):
        phi, theta = unproject(self.x, self.y)
        return SpherePoint(float(phi), float(theta))


# ==================================================================
# Projection and conformal coefficients
# ==================================================================

def project(phi, theta):
    """Stereographic image (x, y) of the sphere point(s) (phi, theta)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r = np.cos(theta) / (1.0 - np.sin(theta))
    return r * np.cos(phi), r * np.sin(phi)


def unproject(x, y):
    """Inverse projection: (phi, theta) with phi in [0, 2pi).

    Raises OriginUndefined at the plane origin, where the longitude has
    no preimage (the South Pole is not part of the chart).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho2 = x * x + y * y
    if np.any(rho2 == 0.0):
        raise OriginUndefined("longitude is undefined at (x, y) = (0, 0)")
    phi = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    theta = np.arcsin((rho2 - 1.0) / (rho2 + 1.0))
    return phi, theta


def alpha(x, y):
    """Conformal coefficient (1 + x^2 + y^2)^2 / 4."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (1.0 + x * x + y * y) ** 2 / 4.0


def beta(x, y, omega):
    """Planetary vorticity on the plane: 2 omega (1-x^2-y^2)/(1+x^2+y^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho2 = x * x + y * y
    return 2.0 * omega * (1.0 - rho2) / (1.0 + rho2)


def alpha_of_rho(rho):
    """alpha on a grid ring, as a function of rho = log r."""
    r2 = np.exp(2.0 * np.asarray(rho, dtype=float))
    return (1.0 + r2) ** 2 / 4.0


def beta_of_rho(rho, omega):
    """beta on a grid ring, as a function of rho = log r."""
    r2 = np.exp(2.0 * np.asarray(rho, dtype=float))
    return 2.0 * omega * (1.0 - r2) / (1.0 + r2)


# ==================================================================
# Tangent-vector transport
# ==================================================================

def vector_to_plane(u, v, phi, theta):
    """Spherical velocity components -> planar (U, V).

    U = (1 - sin theta) [ v cos phi - u sin phi ]
    V = (1 - sin theta) [ u cos phi + v sin phi ]

    The (1 - sin theta) factor makes the planar field divergence-free
    whenever the spherical one is.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    s = 1.0 - np.sin(theta)
    big_u = s * (v * np.cos(phi) - u * np.sin(phi))
    big_v = s * (u * np.cos(phi) + v * np.sin(phi))
    return big_u, big_v


def vector_to_sphere(big_u, big_v, x, y):
    """Planar (U, V) -> spherical velocity components (u, v)."""
    phi, theta = unproject(x, y)
    s = 1.0 - np.sin(theta)
    u = (big_v * np.cos(phi) - big_u * np.sin(phi)) / s
    v = (big_u * np.cos(phi) + big_v * np.sin(phi)) / s
    return u, v


# ==================================================================
# Metric-aware quadrature
# ==================================================================

def band_integral(f: ScalarField) -> float:
    """Integral of a grid field over the band, weighted by dsigma.

    dsigma = dx dy / alpha = cos^2(theta(rho)) drho dphi on the grid, so
    the rule is trapezoid in rho (second order) and the exact periodic
    trapezoid in phi (spectrally accurate for smooth integrands).
    """
    g = f.grid
    w = g.radial_weights * np.cos(g.theta) ** 2
    return float(g.d_phi * np.sum(w[:, None] * f.values))


def band_area(config) -> float:
    """Closed-form band area 2 pi (sin theta2 - sin theta1)."""
    return 2.0 * math.pi * (math.sin(config.theta2) - math.sin(config.theta1))
