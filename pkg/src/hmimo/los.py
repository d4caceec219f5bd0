"""Free-space validation oracle.

The free-space impulse response has the closed form -i*kappa*eta times the
scalar Green function; the same response is also an integral of plane waves
over horizontal wavenumbers.  Evaluating that integral numerically and
comparing against the closed form validates the plane-wave machinery that
the stochastic model is built on.

The integral is evaluated in polar wavenumber coordinates.  The azimuthal
integral reduces exactly to a Bessel J0 kernel; radially, the propagating
disk uses the substitution rho = kappa*sin(theta) which removes the
1/gamma edge singularity, and the evanescent annulus is transformed to the
decay variable q = sqrt(rho^2 - kappa^2), where the integrand becomes a
plain exponentially-damped tail.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import j0

from .geometry import Medium

__all__ = ["green", "los_impulse", "weyl_integral", "los_planewave_synthesis"]


def _separation(r, s) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if r.shape != (3,) or s.shape != (3,):
        raise ValueError("points must be 3-vectors")
    return r - s


def green(r, s, medium: Medium) -> complex:
    """Scalar free-space Green function exp(i*kappa*R)/(4*pi*R)."""
    d = _separation(r, s)
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise ValueError("green function is singular at coincident points")
    kappa = medium.wavenumber
    return np.exp(1j * kappa * dist) / (4.0 * math.pi * dist)


def los_impulse(r, s, medium: Medium) -> complex:
    """Free-space spatial impulse response -i*kappa*eta*green(r, s)."""
    return -1j * medium.wavenumber * medium.impedance * green(r, s, medium)


def _quad_complex(func, lo: float, hi: float, tol: float, what: str) -> complex:
    parts = []
    for part in (lambda t: func(t).real, lambda t: func(t).imag):
        val, abserr, info = quad(part, lo, hi, epsabs=tol, epsrel=1e-12,
                                 limit=400, full_output=True)[:3]
        if abserr > max(tol * 50.0, 1e-9) and info.get("last", 0) >= 400:
            raise RuntimeError(
                f"{what} integral did not converge: error estimate {abserr:.3e}")
        parts.append(val)
    return complex(parts[0], parts[1])


def weyl_integral(x: float, y: float, z: float, medium: Medium,
                  radial_cutoff: float = 3.0, tol: float = 1e-10) -> complex:
    """Plane-wave synthesis of exp(i*kappa*R)/R over a truncated spectrum.

    Evaluates (i/2pi) * integral of exp(i*(kx*x + ky*y + kz*z))/kz over the
    disk of radius radial_cutoff*kappa, for z > 0.  radial_cutoff <= 1
    restricts to (part of) the propagating disk; larger cutoffs add the
    evanescent annulus, whose neglected tail beyond cutoff c is below
    exp(-kappa*z*sqrt(c^2-1)) in relative terms.
    """
    if not z > 0:
        raise ValueError("weyl_integral requires z > 0")
    if not radial_cutoff > 0:
        raise ValueError("radial_cutoff must be positive")
    kappa = medium.wavenumber
    r_xy = math.hypot(x, y)

    # propagating disk: rho = kappa*sin(theta); azimuth integral -> 2*pi*J0
    theta_max = math.pi / 2.0 if radial_cutoff >= 1.0 else math.asin(radial_cutoff)

    def prop_integrand(theta: float) -> complex:
        st = math.sin(theta)
        return (j0(kappa * st * r_xy)
                * np.exp(1j * kappa * z * math.cos(theta)) * st)

    total = 1j * kappa * _quad_complex(prop_integrand, 0.0, theta_max, tol,
                                       "propagating")

    if radial_cutoff > 1.0:
        # evanescent annulus in the decay variable q: rho*drho/|gamma| = dq
        q_max = kappa * math.sqrt(radial_cutoff * radial_cutoff - 1.0)

        def evan_integrand(q: float) -> float:
            rho = math.hypot(kappa, q)
            return float(j0(rho * r_xy)) * math.exp(-q * z)

        val, abserr = quad(evan_integrand, 0.0, q_max, epsabs=tol,
                           epsrel=1e-12, limit=400)
        total += val
    return total


def los_planewave_synthesis(r, s, medium: Medium, radial_cutoff: float = 3.0,
                            tol: float = 1e-10) -> complex:
    """Impulse response assembled from source/receive plane waves.

    The angular response of free space pins the receive direction to the
    source direction, so the 4D plane-wave superposition of receive harmonic
    times source harmonic collapses to a single horizontal-wavenumber
    integral of exp(i*k.(r-s))/kz, scaled by kappa*eta/2/(2*pi)^2.  That
    integral is (2*pi/i) times :func:`weyl_integral` of the separation.
    Must agree with :func:`los_impulse` up to the spectrum truncation.
    """
    d = _separation(r, s)
    if not d[2] > 0:
        raise ValueError("plane-wave synthesis requires r_z > s_z")
    kappa = medium.wavenumber
    w = weyl_integral(d[0], d[1], d[2], medium, radial_cutoff, tol)
    return -1j * kappa * medium.impedance / (4.0 * math.pi) * w
