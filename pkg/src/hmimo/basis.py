"""Antenna apertures and discretized plane-wave basis matrices.

Antennas sit on a uniform grid at cell centers in x and y (offset of half a
spacing from the aperture edges) and on stacked planes in z.  Cell-center
placement keeps the columns of a planar basis exact discrete Fourier vectors
on the grid, so semi-unitarity holds exactly whenever the grid is at least
critically sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CellIndex, Medium, lattice_ellipse

__all__ = ["ApertureSpec", "PlaneWaveBasis", "make_aperture", "build_basis",
           "semi_unitarity_defect"]


@dataclass(frozen=True)
class ApertureSpec:
    """Rectangular aperture with side lengths (m) and per-axis antenna counts."""

    lx: float
    ly: float
    lz: float
    nx: int
    ny: int
    nz: int

    def __post_init__(self) -> None:
        if not (self.lx > 0 and self.ly > 0 and self.lz >= 0):
            raise ValueError("side lengths must satisfy lx, ly > 0 and lz >= 0")
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("antenna counts must be positive")

    @property
    def n_antennas(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def is_planar(self) -> bool:
        return self.nz == 1

    def positions(self) -> np.ndarray:
        """Antenna coordinates, shape (n_antennas, 3), z-major then y then x."""
        x = (np.arange(self.nx) + 0.5) * (self.lx / self.nx)
        y = (np.arange(self.ny) + 0.5) * (self.ly / self.ny)
        if self.nz == 1:
            z = np.array([0.0])
        else:
            z = np.arange(self.nz) * (self.lz / (self.nz - 1))
        zz, yy, xx = np.meshgrid(z, y, x, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def make_aperture(lx: float, ly: float, lz: float, spacing: float) -> ApertureSpec:
    """Aperture with antenna counts rounded from the target spacing.

    nx = round(lx/spacing), ny = round(ly/spacing); a volumetric aperture
    (lz > 0) stacks round(lz/spacing) + 1 planes.
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if spacing > min(lx, ly) * (1.0 + 1e-12):
        raise ValueError("spacing exceeds the smallest transverse side")
    nx = max(1, round(lx / spacing))
    ny = max(1, round(ly / spacing))
    nz = 1 if lz == 0 else round(lz / spacing) + 1
    return ApertureSpec(lx=lx, ly=ly, lz=lz, nx=nx, ny=ny, nz=nz)


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Sampled plane-wave harmonics of one aperture side.

    ``matrix`` has shape (n_antennas, n_indices); every entry has magnitude
    1/sqrt(n_antennas).  ``side`` is "receive" or "source"; source columns
    hold the conjugated harmonics.
    """

    aperture: ApertureSpec
    medium: Medium
    side: str
    indices: tuple[CellIndex, ...]
    matrix: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_overcomplete(self) -> bool:
        """More modes than antennas: semi-unitarity cannot hold."""
        return self.n_modes > self.n_antennas


def build_basis(aperture: ApertureSpec, medium: Medium, side: str) -> PlaneWaveBasis:
    """Basis matrix whose columns sample the admissible plane-wave harmonics.

    Column (mx, my) evaluates exp(+-i*(2*pi*mx*x/lx + 2*pi*my*y/ly + gz*z))
    at the antenna positions, scaled by 1/sqrt(n_antennas); gz is the (real)
    longitudinal wavenumber of the harmonic.  Receive columns use the +i
    sign, source columns the conjugate.
    """
    if side not in ("receive", "source"):
        raise ValueError(f"side must be 'receive' or 'source', got {side!r}")
    indices = tuple(lattice_ellipse(aperture.lx, aperture.ly, medium))
    pos = aperture.positions()
    n = aperture.n_antennas
    kappa = medium.wavenumber
    mat = np.empty((n, len(indices)), dtype=complex)
    for col, (mx, my) in enumerate(indices):
        kx = 2.0 * math.pi * mx / aperture.lx
        ky = 2.0 * math.pi * my / aperture.ly
        # admissible indices have kappa^2 - kx^2 - ky^2 >= 0 up to rounding
        gz = math.sqrt(max(0.0, kappa * kappa - kx * kx - ky * ky))
        phase = kx * pos[:, 0] + ky * pos[:, 1] + gz * pos[:, 2]
        mat[:, col] = np.exp(1j * phase)
    if side == "source":
        mat = np.conj(mat)
    mat /= math.sqrt(n)
    mat.flags.writeable = False
    return PlaneWaveBasis(aperture=aperture, medium=medium, side=side,
                          indices=indices, matrix=mat)


def semi_unitarity_defect(basis: PlaneWaveBasis) -> float:
    """Max-norm deviation of the basis Gram matrix from identity.

    Exactly ~0 (1e-14) for planar critically-sampled grids; volumetric
    apertures and aliased grids report the defect as a diagnostic.
    """
    u = basis.matrix
    gram = u.conj().T @ u
    return float(np.max(np.abs(gram - np.eye(basis.n_modes))))
