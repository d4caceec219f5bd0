import math

import numpy as np
import pytest

from hmimo import Medium


@pytest.fixture(scope="session")
def medium():
    """The default experimental medium: 0.1 m wavelength, free-space impedance."""
    return Medium(wavelength=0.1)


def grid_variance_oracle(density, side, medium, n_theta=2000, n_phi=2000):
    """Independent fixed-grid accumulation of per-cell variances.

    Midpoint rule over the (theta, phi) hemisphere; every sample is assigned
    to the wavenumber cell containing its horizontal wavenumber.  Returns a
    dict {(ix, iy): mass} over all cells that received any mass (admissible
    or not).  Deliberately shares no code with the adaptive quadrature.
    """
    lx, ly = side
    kappa = medium.wavenumber
    th = (np.arange(n_theta) + 0.5) * (math.pi / 2.0 / n_theta)
    ph = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    w = (math.pi / 2.0 / n_theta) * (2.0 * math.pi / n_phi)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    mass = (np.asarray(density(tt, pp), dtype=float) * w).ravel()
    kx = (kappa * np.sin(tt) * np.cos(pp)).ravel()
    ky = (kappa * np.sin(tt) * np.sin(pp)).ravel()
    ix = np.floor(kx * lx / (2.0 * math.pi)).astype(np.int64)
    iy = np.floor(ky * ly / (2.0 * math.pi)).astype(np.int64)
    key = (ix + 4096) * 100000 + (iy + 4096)
    uniq, inverse = np.unique(key, return_inverse=True)
    sums = np.bincount(inverse, weights=mass)
    return {(int(k // 100000 - 4096), int(k % 100000 - 4096)): float(s)
            for k, s in zip(uniq, sums)}
