"""Ergodic capacity by Monte Carlo and angular degrees of freedom.

Capacity of one realization is log2 det(I + (snr/N_tx) H H^H).  Generators
that expose a factorization H = A @ core @ B^H are evaluated through the
eigenvalues of the equivalent core-sized Hermitian matrix
sqrt(A^H A) core (B^H B) core^H sqrt(A^H A), which is exact for any factors
and avoids forming H.  Otherwise the log-determinant is taken on the smaller
Gram matrix via Cholesky, falling back to an eigenvalue sum if the
factorization fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.linalg.blas import zherk as _zherk

from .spectrum import JointVarianceMap, VarianceMap

__all__ = ["CapacityResult", "ergodic_capacity", "dof"]

# Relative cutoff below which a mode variance counts as identically zero;
# quadrature can leave denormal positives in far tails.
ZERO_VARIANCE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class CapacityResult:
    """Monte-Carlo ergodic capacity estimate in bit/s/Hz."""

    capacity: float
    stderr: float
    trials: int
    snr: float
    n_tx: int

    def __post_init__(self) -> None:
        if self.capacity < 0 or self.stderr < 0:
            raise ValueError("capacity and stderr must be non-negative")


def _gram_root(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _logdet_capacity(h: np.ndarray, scale: float) -> float:
    """log2 det(I + scale * H H^H) through the smaller Gram matrix.

    The Gram is accumulated with a rank-k Hermitian update on the conjugate
    (same log-determinant, saves the transpose copy for C-ordered H), then
    factored by Cholesky; eigenvalues are the fallback if the factorization
    fails.
    """
    h = np.ascontiguousarray(h, dtype=complex)
    # trans=2 -> A^H A = conj(H H^H); trans=0 -> A A^H = conj(H^H H)
    trans = 2 if h.shape[0] <= h.shape[1] else 0
    gram = _zherk(scale, h.T, trans=trans, lower=1)
    n = gram.shape[0]
    idx = np.diag_indices(n)
    gram[idx] += 1.0
    try:
        chol = _cholesky(gram, lower=True, check_finite=False, overwrite_a=True)
        return 2.0 * float(np.sum(np.log2(np.real(np.diag(chol)))))
    except np.linalg.LinAlgError:
        small = h @ h.conj().T if h.shape[0] <= h.shape[1] else h.conj().T @ h
        ev = np.clip(np.linalg.eigvalsh(small), 0.0, None)
        return float(np.sum(np.log2(1.0 + scale * ev)))


def ergodic_capacity(generator, snr: float, trials: int,
                     seed: int | None = None) -> CapacityResult:
    """Average log2 det(I + (snr/N_tx) H H^H) over seeded trials.

    ``seed=None`` uses the generator's own seed.  The per-trial capacities
    are reduced in fixed trial order, so the result is bit-identical for
    identical (generator, snr, trials, seed) regardless of how trials are
    scheduled.  A non-finite per-trial value raises with the trial index.
    """
    if snr < 0:
        raise ValueError(f"snr must be non-negative, got {snr}")
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    n_tx = generator.n_tx
    scale = snr / n_tx
    factors = generator.factor_matrices()
    caps = np.empty(trials)
    if factors is not None:
        a, b = factors
        right_gram = b.conj().T @ b
        left_root = _gram_root(a.conj().T @ a)
        for trial in range(trials):
            core = generator.sample_core(trial, seed)
            m = left_root @ core @ right_gram @ core.conj().T @ left_root
            ev = np.clip(np.linalg.eigvalsh(m), 0.0, None)
            caps[trial] = float(np.sum(np.log2(1.0 + scale * ev)))
    else:
        for trial in range(trials):
            caps[trial] = _logdet_capacity(generator.realize(trial, seed), scale)
    bad = np.flatnonzero(~np.isfinite(caps))
    if bad.size:
        raise ArithmeticError(f"non-finite capacity at trial {int(bad[0])}")
    mean = float(np.mean(caps))
    stderr = float(np.std(caps, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return CapacityResult(capacity=mean, stderr=stderr, trials=trials,
                          snr=snr, n_tx=n_tx)


def dof(variances: VarianceMap | JointVarianceMap) -> int:
    """Angular degrees of freedom: min over sides of the nonzero-mode counts.

    A mode counts as active when its variance exceeds
    ZERO_VARIANCE_THRESHOLD relative to the map maximum.  For a joint map
    the sides are the rows and columns of the pair-variance matrix.
    """
    if isinstance(variances, JointVarianceMap):
        mat = variances.matrix
        peak = float(mat.max(initial=0.0))
        if peak <= 0.0:
            return 0
        active = mat > ZERO_VARIANCE_THRESHOLD * peak
        return int(min(np.count_nonzero(active.any(axis=1)),
                       np.count_nonzero(active.any(axis=0))))
    rx, tx = variances.rx_values, variances.tx_values

    def _count(v: np.ndarray) -> int:
        peak = float(v.max(initial=0.0))
        if peak <= 0.0:
            return 0
        return int(np.count_nonzero(v > ZERO_VARIANCE_THRESHOLD * peak))

    return min(_count(rx), _count(tx))
