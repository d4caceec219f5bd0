"""Channel ensemble synthesis.

Three seeded generators share one sampling contract: ``realize(trial)``
returns the N_rx x N_tx channel matrix of a trial, as a pure function of
(seed, trial).  Randomness comes from a counter-based Philox stream keyed by
(seed, stream-tag, trial), so trials can be generated in any order, in
parallel, with bit-identical results.

* ``ChannelEnsemble`` - the sampled plane-wave model H = U_r (S (.) W) U_s^H
  with per-mode standard deviations S set by a variance map.
* ``ClarkeEnsemble`` - 3D isotropic scattering reference with separable
  spatial correlation rho(d) = sin(kappa d)/(kappa d) between antennas.
* ``IidEnsemble`` - independent CN(0,1) entries.

All three expose ``factor_matrices()``/``sample_core(trial)`` with
H = A @ core @ B^H, which the capacity module uses to reduce the per-trial
eigenproblem to the (small) core dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .basis import ApertureSpec, PlaneWaveBasis
from .geometry import Medium
from .spectrum import VarianceMap

__all__ = [
    "ChannelEnsemble",
    "ClarkeEnsemble",
    "IidEnsemble",
    "Realization",
    "make_ensemble",
    "sample_ha",
    "assemble_h",
    "correlation_eigenvalues",
    "clarke_ensemble",
    "clarke_correlation",
    "iid_ensemble",
    "complex_gaussian",
    "dump_realizations_csv",
]

# Distinct Philox sub-streams so different generators sharing a master seed
# stay statistically independent.
_STREAM_PLANEWAVE = 1
_STREAM_CLARKE = 2
_STREAM_IID = 3

_MAX_TRIAL = 1 << 48


def _trial_generator(seed: int, stream: int, trial: int) -> np.random.Generator:
    """Independent generator for one (seed, stream, trial) key."""
    if not 0 <= trial < _MAX_TRIAL:
        raise ValueError(f"trial must lie in [0, 2^48), got {trial}")
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64((stream << 48) | trial)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian entries, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


@dataclass(frozen=True)
class Realization:
    """One sampled channel matrix with its provenance."""

    matrix: np.ndarray
    trial: int
    seed: int


@dataclass(frozen=True)
class ChannelEnsemble:
    """Sampled plane-wave channel model for one basis pair and variance map."""

    basis_rx: PlaneWaveBasis
    basis_tx: PlaneWaveBasis
    variances: VarianceMap
    seed: int

    def __post_init__(self) -> None:
        if (self.basis_rx.aperture.lx, self.basis_rx.aperture.ly) != self.variances.rx_side:
            raise ValueError("receive basis and variance map side lengths disagree")
        if (self.basis_tx.aperture.lx, self.basis_tx.aperture.ly) != self.variances.tx_side:
            raise ValueError("source basis and variance map side lengths disagree")

    @property
    def n_rx(self) -> int:
        return self.basis_rx.n_antennas

    @property
    def n_tx(self) -> int:
        return self.basis_tx.n_antennas

    @cached_property
    def deviation_matrix(self) -> np.ndarray:
        """Per-mode standard deviations sqrt(N_tx*N_rx*sigma^2), n_rx x n_tx modes."""
        vr = np.array([self.variances.rx_variance(ix) for ix in self.basis_rx.indices])
        vt = np.array([self.variances.tx_variance(ix) for ix in self.basis_tx.indices])
        scale = self.n_rx * self.n_tx
        return np.sqrt(scale * np.outer(vr, vt))

    def factor_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return self.basis_rx.matrix, self.basis_tx.matrix

    def sample_core(self, trial: int, seed: int | None = None) -> np.ndarray:
        return sample_ha(self, trial, seed)

    def realize(self, trial: int, seed: int | None = None) -> np.ndarray:
        return assemble_h(self, self.sample_core(trial, seed)).matrix


def make_ensemble(basis_rx: PlaneWaveBasis, basis_tx: PlaneWaveBasis,
                  variances: VarianceMap, seed: int) -> ChannelEnsemble:
    return ChannelEnsemble(basis_rx=basis_rx, basis_tx=basis_tx,
                           variances=variances, seed=seed)


def sample_ha(ensemble: ChannelEnsemble, trial: int, seed: int | None = None) -> np.ndarray:
    """Mode-domain matrix: deviations times i.i.d. complex Gaussians.

    Identical (seed, trial) always yields the identical matrix; modes with
    zero variance are exactly zero.
    """
    if trial < 0:
        raise ValueError(f"trial must be non-negative, got {trial}")
    use_seed = ensemble.seed if seed is None else seed
    rng = _trial_generator(use_seed, _STREAM_PLANEWAVE, trial)
    w = complex_gaussian(rng, ensemble.deviation_matrix.shape)
    return ensemble.deviation_matrix * w


def assemble_h(ensemble: ChannelEnsemble, ha: np.ndarray, trial: int = 0) -> Realization:
    """Project a mode-domain matrix onto the antenna domain: U_r Ha U_s^H."""
    u_rx, u_tx = ensemble.factor_matrices()
    if ha.shape != (u_rx.shape[1], u_tx.shape[1]):
        raise ValueError(
            f"mode matrix shape {ha.shape} does not match bases "
            f"({u_rx.shape[1]}, {u_tx.shape[1]})")
    return Realization(matrix=u_rx @ ha @ u_tx.conj().T, trial=trial, seed=ensemble.seed)


def correlation_eigenvalues(ensemble: ChannelEnsemble) -> np.ndarray:
    """Eigenvalues of the full channel correlation matrix, descending.

    For semi-unitary bases these are exactly the scaled mode variances
    {N_tx*N_rx*sigma^2}, padded with zeros to length N_tx*N_rx.
    """
    scaled = ensemble.deviation_matrix.ravel() ** 2
    out = np.zeros(ensemble.n_rx * ensemble.n_tx)
    out[: scaled.size] = scaled
    return np.sort(out)[::-1]


def clarke_correlation(distance, medium: Medium):
    """3D isotropic spatial correlation sin(kappa d)/(kappa d)."""
    kd = medium.wavenumber * np.asarray(distance, dtype=float)
    return np.sinc(kd / np.pi)


def _correlation_factor(aperture: ApertureSpec, medium: Medium) -> np.ndarray:
    """Factor A with A A^H equal to the antenna correlation matrix.

    Hermitian eigendecomposition with clamping: eigenvalues below
    -1e-10 * max are a genuine PSD violation and raise; small negatives are
    rounded to zero; eigenvalues below 1e-12 * max are dropped, which
    truncates the factor to the numerically significant rank.
    """
    pos = aperture.positions()
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    corr = clarke_correlation(dist, medium)
    w, v = np.linalg.eigh(corr)
    w_max = float(w.max())
    if w.min() < -1e-10 * w_max:
        raise np.linalg.LinAlgError(
            f"correlation matrix is not PSD: min eigenvalue {w.min():.3e} "
            f"vs max {w_max:.3e}")
    keep = w > 1e-12 * w_max
    return v[:, keep] * np.sqrt(w[keep])


@dataclass(frozen=True)
class ClarkeEnsemble:
    """Correlated Rayleigh reference channel under 3D isotropic scattering.

    Realizations follow R_rx^(1/2) G R_tx^(1/2) in distribution; sampling
    runs in the correlation eigenbases (G is drawn directly in rotated
    coordinates, which is equivalent by unitary invariance of the i.i.d.
    Gaussian matrix and cheaper by the correlation rank).
    """

    aperture_rx: ApertureSpec
    aperture_tx: ApertureSpec
    medium: Medium
    seed: int
    _factors: tuple = field(repr=False, default=None)

    def __post_init__(self) -> None:
        a = _correlation_factor(self.aperture_rx, self.medium)
        b = _correlation_factor(self.aperture_tx, self.medium)
        object.__setattr__(self, "_factors", (a, b))

    @property
    def n_rx(self) -> int:
        return self.aperture_rx.n_antennas

    @property
    def n_tx(self) -> int:
        return self.aperture_tx.n_antennas

    def factor_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return self._factors

    def sample_core(self, trial: int, seed: int | None = None) -> np.ndarray:
        use_seed = self.seed if seed is None else seed
        rng = _trial_generator(use_seed, _STREAM_CLARKE, trial)
        a, b = self._factors
        return complex_gaussian(rng, (a.shape[1], b.shape[1]))

    def realize(self, trial: int, seed: int | None = None) -> np.ndarray:
        a, b = self._factors
        return a @ self.sample_core(trial, seed) @ b.conj().T


def clarke_ensemble(aperture_rx: ApertureSpec, aperture_tx: ApertureSpec,
                    medium: Medium, seed: int) -> ClarkeEnsemble:
    return ClarkeEnsemble(aperture_rx=aperture_rx, aperture_tx=aperture_tx,
                          medium=medium, seed=seed)


@dataclass(frozen=True)
class IidEnsemble:
    """Independent CN(0,1) channel entries; the classical reference model."""

    n_rx: int
    n_tx: int
    seed: int

    def __post_init__(self) -> None:
        if min(self.n_rx, self.n_tx) < 1:
            raise ValueError("matrix dimensions must be positive")

    def factor_matrices(self) -> None:
        return None

    def sample_core(self, trial: int, seed: int | None = None) -> np.ndarray:
        return self.realize(trial, seed)

    def realize(self, trial: int, seed: int | None = None) -> np.ndarray:
        use_seed = self.seed if seed is None else seed
        rng = _trial_generator(use_seed, _STREAM_IID, trial)
        return complex_gaussian(rng, (self.n_rx, self.n_tx))


def iid_ensemble(n_rx: int, n_tx: int, seed: int) -> IidEnsemble:
    return IidEnsemble(n_rx=n_rx, n_tx=n_tx, seed=seed)


def dump_realizations_csv(path, generator, trials: int, seed: int | None = None) -> None:
    """Write realizations as rows ``trial,row,col,re,im`` for external use."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial,row,col,re,im\n")
        for trial in range(trials):
            h = generator.realize(trial, seed)
            for r in range(h.shape[0]):
                for c in range(h.shape[1]):
                    v = h[r, c]
                    fh.write(f"{trial},{r},{c},{v.real:.12e},{v.imag:.12e}\n")
