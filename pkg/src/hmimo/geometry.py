"""Wavenumber-domain geometry for rectangular apertures.

A planar aperture with side lengths (Lx, Ly) induces a lattice of Fourier
harmonics with horizontal wavenumbers (2*pi*ix/Lx, 2*pi*iy/Ly).  Harmonics
propagate only while their horizontal wavenumber lies inside the spectral
disk of radius kappa = 2*pi/lambda; the admissible integer indices form a
lattice ellipse.  This module provides the longitudinal wavenumber, the
lattice-ellipse enumeration, the asymptotic mode count, and the wavenumber
rectangles (cells) that partition the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FREE_SPACE_IMPEDANCE_OHM = 376.730

# Relative slack when testing lattice admissibility.  Points exactly on the
# ellipse boundary (e.g. 0.6**2 + 0.8**2) must count as inside despite
# floating-point rounding.
_BOUNDARY_SLACK = 1e-12

CellIndex = tuple[int, int]


@dataclass(frozen=True)
class Medium:
    """Propagation medium: wavelength in meters, intrinsic impedance in ohms.

    The wavenumber is derived (never stored) so kappa * wavelength == 2*pi
    holds exactly.
    """

    wavelength: float
    impedance: float = FREE_SPACE_IMPEDANCE_OHM

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.impedance > 0:
            raise ValueError(f"impedance must be positive, got {self.impedance}")

    @property
    def wavenumber(self) -> float:
        """Spatial angular frequency kappa = 2*pi/lambda in rad/m."""
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class WavenumberCell:
    """Half-open rectangle [kx_min, kx_max) x [ky_min, ky_max) in rad/m.

    Cells for distinct indices are disjoint and tile the plane.
    """

    kx_min: float
    kx_max: float
    ky_min: float
    ky_max: float

    def contains(self, kx: float, ky: float) -> bool:
        return self.kx_min <= kx < self.kx_max and self.ky_min <= ky < self.ky_max

    def radius_range(self) -> tuple[float, float]:
        """Min and max distance of the closed rectangle from the origin."""
        dx = 0.0 if self.kx_min <= 0.0 <= self.kx_max else min(abs(self.kx_min), abs(self.kx_max))
        dy = 0.0 if self.ky_min <= 0.0 <= self.ky_max else min(abs(self.ky_min), abs(self.ky_max))
        rmax = math.hypot(max(abs(self.kx_min), abs(self.kx_max)),
                          max(abs(self.ky_min), abs(self.ky_max)))
        return math.hypot(dx, dy), rmax


def gamma(kx: float, ky: float, medium: Medium) -> complex:
    """Longitudinal wavenumber for horizontal wavenumbers (kx, ky).

    Real sqrt(kappa^2 - kx^2 - ky^2) inside the spectral disk, and
    i*sqrt(kx^2 + ky^2 - kappa^2) outside (decaying evanescent branch).
    """
    s = medium.wavenumber ** 2 - kx * kx - ky * ky
    if s >= 0.0:
        return complex(math.sqrt(s), 0.0)
    return complex(0.0, math.sqrt(-s))


def is_admissible(index: CellIndex, lx: float, ly: float, medium: Medium) -> bool:
    """True when the harmonic index lies in the lattice ellipse for (lx, ly)."""
    ix, iy = index
    lam = medium.wavelength
    t = (ix * lam / lx) ** 2 + (iy * lam / ly) ** 2
    return t <= 1.0 + _BOUNDARY_SLACK


def lattice_ellipse(lx: float, ly: float, medium: Medium) -> list[CellIndex]:
    """All integer pairs (ix, iy) with (ix*lam/lx)^2 + (iy*lam/ly)^2 <= 1.

    Row-major order: ix ascending, then iy ascending.  The enumeration order
    is a repo-wide convention; basis matrices and variance maps share it.
    """
    if not (lx > 0 and ly > 0):
        raise ValueError("side lengths must be positive")
    lam = medium.wavelength
    nx = int(math.floor(lx / lam + _BOUNDARY_SLACK))
    ny = int(math.floor(ly / lam + _BOUNDARY_SLACK))
    out: list[CellIndex] = []
    for ix in range(-nx, nx + 1):
        rem = 1.0 + _BOUNDARY_SLACK - (ix * lam / lx) ** 2
        for iy in range(-ny, ny + 1):
            if (iy * lam / ly) ** 2 <= rem:
                out.append((ix, iy))
    return out


def asymptotic_count(lx: float, ly: float, medium: Medium) -> int:
    """Large-aperture mode count floor(pi * lx * ly / lambda^2).

    Diagnostic only: basis construction always uses the exact enumeration
    from :func:`lattice_ellipse`, which differs by boundary terms.
    """
    if not (lx > 0 and ly > 0):
        raise ValueError("side lengths must be positive")
    lam = medium.wavelength
    return int(math.floor(math.pi * lx * ly / (lam * lam)))


def cell_rect(index: CellIndex, lx: float, ly: float) -> WavenumberCell:
    """Wavenumber rectangle of a harmonic index.

    [2*pi*ix/lx, 2*pi*(ix+1)/lx) x [2*pi*iy/ly, 2*pi*(iy+1)/ly).
    """
    if not (lx > 0 and ly > 0):
        raise ValueError("side lengths must be positive")
    ix, iy = index
    two_pi = 2.0 * math.pi
    return WavenumberCell(
        kx_min=two_pi * ix / lx,
        kx_max=two_pi * (ix + 1) / lx,
        ky_min=two_pi * iy / ly,
        ky_max=two_pi * (iy + 1) / ly,
    )
