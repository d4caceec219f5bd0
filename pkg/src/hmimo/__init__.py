"""Fourier plane-wave channel modeling for holographic MIMO.

Spatially-stationary scattering between rectangular apertures admits a
plane-wave series whose discrete modes live on a wavenumber lattice; this
package builds that representation end to end: lattice geometry, angular
power spectra and per-mode variances, sampled plane-wave bases, correlated
channel synthesis with Clarke and i.i.d. references, Monte-Carlo ergodic
capacity, and a free-space validation oracle.
"""

__version__ = "0.1.0"

from .basis import ApertureSpec, PlaneWaveBasis, build_basis, make_aperture
from .capacity import CapacityResult, dof, ergodic_capacity
from .geometry import (Medium, WavenumberCell, asymptotic_count, cell_rect,
                       gamma, is_admissible, lattice_ellipse)
from .los import green, los_impulse, los_planewave_synthesis, weyl_integral
from .spectrum import (AngularSpectrum, JointVarianceMap, QuadratureError,
                       VarianceMap, VmfParams, isotropic_spectrum,
                       joint_variance_map, solve_concentration, variance_map,
                       vmf_spectrum)
from .synth import (ChannelEnsemble, ClarkeEnsemble, IidEnsemble, Realization,
                    assemble_h, clarke_correlation, clarke_ensemble,
                    correlation_eigenvalues, iid_ensemble, make_ensemble,
                    sample_ha)

__all__ = [
    "__version__",
    "Medium", "WavenumberCell", "gamma", "is_admissible", "lattice_ellipse",
    "asymptotic_count", "cell_rect",
    "AngularSpectrum", "VmfParams", "isotropic_spectrum", "vmf_spectrum",
    "solve_concentration", "variance_map", "joint_variance_map",
    "VarianceMap", "JointVarianceMap", "QuadratureError",
    "ApertureSpec", "PlaneWaveBasis", "make_aperture", "build_basis",
    "ChannelEnsemble", "ClarkeEnsemble", "IidEnsemble", "Realization",
    "make_ensemble", "sample_ha", "assemble_h", "correlation_eigenvalues",
    "clarke_ensemble", "clarke_correlation", "iid_ensemble",
    "CapacityResult", "ergodic_capacity", "dof",
    "green", "los_impulse", "weyl_integral", "los_planewave_synthesis",
]
