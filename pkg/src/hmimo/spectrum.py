"""Angular power densities and per-cell variance maps.

An angular spectrum is a normalized density over the upper hemisphere in
spherical coordinates (theta, phi), with the sin(theta) area factor folded
into the density itself so that

    integral_0^{2pi} integral_0^{pi/2} density(theta, phi) dtheta dphi = 1.

Working in (theta, phi) rather than (kx, ky) absorbs the 1/gamma Jacobian of
the plane-wave parametrization analytically: the change of variables
dkx dky / (kappa * gamma) = sin(theta) dtheta dphi turns the singularly
integrable density at the disk edge into a smooth integrand, so quadrature
converges fast.  Physical constants (impedance, isotropic spectral level)
cancel under the unit-power normalization and never appear at run time.

The per-cell variance of a harmonic index is the integral of the density
over the spherical preimage of its wavenumber rectangle intersected with the
spectral disk.  For a fixed polar angle the preimage cuts the azimuth circle
in a union of arcs that is computed exactly, which leaves one adaptive
quadrature in theta per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e

from .geometry import CellIndex, Medium, WavenumberCell, cell_rect, lattice_ellipse

__all__ = [
    "AngularSpectrum",
    "IsotropicSpectrum",
    "VmfParams",
    "VmfSpectrum",
    "VarianceMap",
    "JointVarianceMap",
    "QuadratureError",
    "isotropic_spectrum",
    "vmf_spectrum",
    "solve_concentration",
    "variance_map",
    "joint_variance_map",
    "cell_quadrature_nodes",
]


class QuadratureError(RuntimeError):
    """Raised when a per-cell quadrature fails to converge within budget."""

    def __init__(self, message: str, cell: CellIndex | None = None):
        super().__init__(message)
        self.cell = cell


class AngularSpectrum:
    """Normalized angular density on the upper hemisphere.

    Subclasses implement ``density(theta, phi)`` (vectorized in ``phi``) and
    carry a ``description`` used in logs and run manifests.
    """

    description: str = "angular spectrum"

    def density(self, theta, phi):
        raise NotImplementedError


class IsotropicSpectrum(AngularSpectrum):
    """Uniform power per solid angle over the upper hemisphere."""

    description = "isotropic"

    def density(self, theta, phi):
        return np.sin(theta) / (2.0 * math.pi) * np.ones_like(np.asarray(phi, dtype=float))


def isotropic_spectrum() -> IsotropicSpectrum:
    """Hemisphere-uniform density sin(theta)/(2*pi)."""
    return IsotropicSpectrum()


@dataclass(frozen=True)
class VmfParams:
    """Von Mises-Fisher parameters: concentration and mean direction (rad)."""

    concentration: float
    mean_theta: float
    mean_phi: float

    def __post_init__(self) -> None:
        if not self.concentration > 0:
            raise ValueError(f"concentration must be positive, got {self.concentration}")


class VmfSpectrum(AngularSpectrum):
    """Von Mises-Fisher density truncated and renormalized to the hemisphere.

    ``full_sphere_density`` is the untruncated unit-mass pdf on the sphere
    (including the sin(theta) area factor); ``density`` rescales it so the
    upper-hemisphere integral is exactly 1.
    """

    def __init__(self, params: VmfParams):
        self.params = params
        self._hemisphere_mass = self._compute_hemisphere_mass()
        self.description = (
            f"vmf(alpha={params.concentration:.6g}, "
            f"mean_theta={params.mean_theta:.6g} rad, mean_phi={params.mean_phi:.6g} rad)"
        )

    def full_sphere_density(self, theta, phi):
        """alpha * exp(alpha * cos(angle to mean)) * sin(theta) / (4*pi*sinh(alpha)).

        Evaluated in the overflow-safe form alpha * exp(alpha*(x-1)) /
        (2*pi*(1 - exp(-2*alpha))) with x the angular cosine.
        """
        p = self.params
        a = p.concentration
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        x = (np.sin(theta) * math.sin(p.mean_theta) * np.cos(phi - p.mean_phi)
             + np.cos(theta) * math.cos(p.mean_theta))
        scale = a / (2.0 * math.pi * -math.expm1(-2.0 * a))
        return scale * np.exp(a * (x - 1.0)) * np.sin(theta)

    def density(self, theta, phi):
        return self.full_sphere_density(theta, phi) / self._hemisphere_mass

    def _compute_hemisphere_mass(self) -> float:
        # Azimuth integral of exp(A*cos(phi - mu)) is 2*pi*I0(A); the mass
        # reduces to a smooth 1D integral in theta.  The scaled Bessel i0e
        # keeps the product finite at any concentration (the combined
        # exponent is a cosine deficit, never positive).
        p = self.params
        a = p.concentration
        scale = a / -math.expm1(-2.0 * a)

        def integrand(theta: float) -> float:
            amp = a * math.sin(theta) * math.sin(p.mean_theta)
            ex = a * (math.cos(theta) * math.cos(p.mean_theta) - 1.0)
            return scale * float(i0e(amp)) * math.exp(ex + amp) * math.sin(theta)

        mass, err = quad(integrand, 0.0, math.pi / 2.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        if not (mass > 0.0 and np.isfinite(mass)):
            raise QuadratureError("hemisphere normalization of VMF density failed")
        return mass


def vmf_spectrum(params: VmfParams) -> VmfSpectrum:
    """Von Mises-Fisher angular spectrum, hemisphere-renormalized."""
    return VmfSpectrum(params)


def _resultant_length(alpha: float) -> float:
    # coth(alpha) - 1/alpha, stable for both tiny and huge alpha
    if alpha < 1e-6:
        return alpha / 3.0 - alpha**3 / 45.0
    if alpha > 350.0:
        return 1.0 - 1.0 / alpha
    return 1.0 / math.tanh(alpha) - 1.0 / alpha


def solve_concentration(spread: float) -> float:
    """Concentration alpha whose circular standard deviation equals ``spread``.

    Solves sqrt(-2*ln(R(alpha))) = spread with mean resultant length
    R(alpha) = coth(alpha) - 1/alpha, by bisection to 1e-10.  The map is
    monotone decreasing: tighter spreads give larger alpha.
    """
    if not (0.0 < spread < math.pi / 2.0):
        raise ValueError(f"spread must lie in (0, pi/2) rad, got {spread}")
    target = math.exp(-0.5 * spread * spread)
    lo, hi = 1e-9, 1e9
    if not (_resultant_length(lo) < target < _resultant_length(hi)):
        raise ValueError(f"spread {spread} rad outside solvable range")
    while hi - lo > 1e-10 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _resultant_length(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# azimuth arcs: exact {phi : rho*cos(phi) in [a,b]} intersect {rho*sin in [c,d]}
# ---------------------------------------------------------------------------

_TWO_PI = 2.0 * math.pi


def _normalize_intervals(raw: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Clip intervals into [0, 2*pi), splitting any that wrap, then sort."""
    out: list[tuple[float, float]] = []
    for lo, hi in raw:
        if hi - lo >= _TWO_PI - 1e-15:
            return [(0.0, _TWO_PI)]
        lo %= _TWO_PI
        hi %= _TWO_PI
        if hi >= lo:
            out.append((lo, hi))
        else:
            out.append((lo, _TWO_PI))
            out.append((0.0, hi))
    out.sort()
    return out


def _intersect_intervals(
    a: Sequence[tuple[float, float]], b: Sequence[tuple[float, float]]
) -> list[tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _cos_band_arcs(rho: float, lo: float, hi: float) -> list[tuple[float, float]]:
    cl = max(lo / rho, -1.0)
    ch = min(hi / rho, 1.0)
    if cl > ch:
        return []
    a0 = math.acos(ch)
    a1 = math.acos(cl)
    return _normalize_intervals([(a0, a1), (_TWO_PI - a1, _TWO_PI - a0)])


def _sin_band_arcs(rho: float, lo: float, hi: float) -> list[tuple[float, float]]:
    sl = max(lo / rho, -1.0)
    sh = min(hi / rho, 1.0)
    if sl > sh:
        return []
    a0 = math.asin(sl)
    a1 = math.asin(sh)
    return _normalize_intervals([(a0, a1), (math.pi - a1, math.pi - a0)])


def _cell_arcs(rho: float, rect: WavenumberCell) -> list[tuple[float, float]]:
    """Azimuth arcs where the circle of radius rho lies inside the rectangle."""
    if rho <= 0.0:
        inside = rect.kx_min <= 0.0 <= rect.kx_max and rect.ky_min <= 0.0 <= rect.ky_max
        return [(0.0, _TWO_PI)] if inside else []
    arcs_x = _cos_band_arcs(rho, rect.kx_min, rect.kx_max)
    if not arcs_x:
        return []
    arcs_y = _sin_band_arcs(rho, rect.ky_min, rect.ky_max)
    if not arcs_y:
        return []
    return _intersect_intervals(arcs_x, arcs_y)


# ---------------------------------------------------------------------------
# quadrature kernels
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_MAX_PHI_PANEL = math.pi / 4.0


def _arc_integral(f_phi: Callable[[np.ndarray], np.ndarray], arcs: Sequence[tuple[float, float]]) -> float:
    """Fixed-order Gauss-Legendre in phi over a union of arcs.

    Long arcs are split into panels of at most pi/4 so the rule stays in its
    geometric-convergence regime for the oscillation-free densities here.
    """
    nodes = []
    weights = []
    for lo, hi in arcs:
        span = hi - lo
        if span <= 0.0:
            continue
        n_panels = max(1, int(math.ceil(span / _MAX_PHI_PANEL)))
        edges = np.linspace(lo, hi, n_panels + 1)
        for p in range(n_panels):
            mid = 0.5 * (edges[p] + edges[p + 1])
            half = 0.5 * (edges[p + 1] - edges[p])
            nodes.append(mid + half * _GL_NODES)
            weights.append(half * _GL_WEIGHTS)
    if not nodes:
        return 0.0
    phi = np.concatenate(nodes)
    w = np.concatenate(weights)
    return float(np.dot(w, np.asarray(f_phi(phi), dtype=float)))


def _gl_panel(g: Callable[[float], float], lo: float, hi: float) -> float:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (lo + hi)
    return half * sum(w * g(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def _adaptive_theta(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    cell: CellIndex,
    max_panels: int = 50_000,
) -> float:
    """Adaptive bisection with a two-level Gauss-Legendre error estimate.

    Refinement stops on panels whose two-level estimate meets their share of
    the budget; exceeding ``max_panels`` subdivisions reports the offending
    cell as a distinct quadrature failure.
    """
    coarse = _gl_panel(g, lo, hi)
    stack = [(lo, hi, coarse, tol)]
    total = 0.0
    panels = 0
    while stack:
        a, b, coarse, budget = stack.pop()
        panels += 1
        if panels > max_panels:
            raise QuadratureError(
                f"theta quadrature for cell {cell} did not converge within "
                f"{max_panels} panels on [{a:.6g}, {b:.6g}]",
                cell=cell,
            )
        mid = 0.5 * (a + b)
        left = _gl_panel(g, a, mid)
        right = _gl_panel(g, mid, b)
        fine = left + right
        err = abs(fine - coarse)
        if err <= budget or (b - a) < 1e-14:
            total += fine
            continue
        stack.append((a, mid, left, 0.5 * budget))
        stack.append((mid, b, right, 0.5 * budget))
    return total


def _theta_pieces(rect: WavenumberCell, kappa: float) -> list[tuple[float, float]]:
    """Split the polar range of cell-and-disk at radii where arc topology changes.

    Critical radii: the four edge-line distances, the four corner radii, and
    the disk edge itself.  Between consecutive critical radii the azimuth
    arcs vary smoothly with theta.
    """
    rmin, rmax = rect.radius_range()
    hi = min(rmax, kappa)
    if hi <= rmin:
        return []
    crit = {rmin, hi}
    for v in (rect.kx_min, rect.kx_max, rect.ky_min, rect.ky_max):
        crit.add(abs(v))
    for cx in (rect.kx_min, rect.kx_max):
        for cy in (rect.ky_min, rect.ky_max):
            crit.add(math.hypot(cx, cy))
    radii = sorted(r for r in crit if rmin <= r <= hi)
    thetas = [math.asin(min(1.0, r / kappa)) for r in radii]
    pieces = []
    for t0, t1 in zip(thetas[:-1], thetas[1:]):
        if t1 - t0 > 1e-15:
            pieces.append((t0, t1))
    return pieces


def cell_variance(
    spectrum: AngularSpectrum,
    index: CellIndex,
    lx: float,
    ly: float,
    medium: Medium,
    tol: float = 1e-8,
) -> float:
    """Integral of the angular density over one cell's spherical preimage.

    Absolute tolerance ``tol`` applies per cell.  Raises
    :class:`QuadratureError` naming the cell if refinement stalls.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rect = cell_rect(index, lx, ly)
    kappa = medium.wavenumber
    pieces = _theta_pieces(rect, kappa)
    if not pieces:
        return 0.0

    def g(theta: float) -> float:
        rho = kappa * math.sin(theta)
        arcs = _cell_arcs(rho, rect)
        if not arcs:
            return 0.0
        return _arc_integral(lambda phi: spectrum.density(theta, phi), arcs)

    budget = tol / len(pieces)
    return sum(_adaptive_theta(g, lo, hi, budget, index) for lo, hi in pieces)


def cell_quadrature_nodes(
    index: CellIndex,
    lx: float,
    ly: float,
    medium: Medium,
    theta_order: int = 12,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed-resolution quadrature nodes (theta, phi, weight) for one cell.

    Non-adaptive companion of :func:`cell_variance` used by the joint 4D
    variance map, where per-pair adaptivity would be prohibitive.
    """
    rect = cell_rect(index, lx, ly)
    kappa = medium.wavenumber
    x_nodes, x_weights = np.polynomial.legendre.leggauss(theta_order)
    thetas: list[float] = []
    phis: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for lo, hi in _theta_pieces(rect, kappa):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (lo + hi)
        for xn, xw in zip(x_nodes, x_weights):
            theta = mid + half * xn
            rho = kappa * math.sin(theta)
            for a_lo, a_hi in _cell_arcs(rho, rect):
                span = a_hi - a_lo
                if span <= 0.0:
                    continue
                n_panels = max(1, int(math.ceil(span / _MAX_PHI_PANEL)))
                edges = np.linspace(a_lo, a_hi, n_panels + 1)
                for p in range(n_panels):
                    pm = 0.5 * (edges[p] + edges[p + 1])
                    ph = 0.5 * (edges[p + 1] - edges[p])
                    phis.append(pm + ph * _GL_NODES)
                    weights.append((half * xw) * (ph * _GL_WEIGHTS))
                    thetas.extend([theta] * _GL_NODES.size)
    if not phis:
        return np.empty(0), np.empty(0), np.empty(0)
    return (np.asarray(thetas, dtype=float),
            np.concatenate(phis),
            np.concatenate(weights))


# ---------------------------------------------------------------------------
# variance maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceMap:
    """Separable per-cell channel variances for a receive/source aperture pair.

    ``rx_values`` and ``tx_values`` are aligned with ``rx_indices`` and
    ``tx_indices`` (lattice-ellipse order), renormalized so each side sums to
    exactly 1.  ``rx_raw_sum``/``tx_raw_sum`` record the pre-normalization
    totals (the power actually captured by the admissible cells), and the raw
    per-cell integrals are ``rx_values * rx_raw_sum`` etc.
    """

    rx_side: tuple[float, float]
    tx_side: tuple[float, float]
    rx_indices: tuple[CellIndex, ...]
    tx_indices: tuple[CellIndex, ...]
    rx_values: np.ndarray
    tx_values: np.ndarray
    rx_raw_sum: float
    tx_raw_sum: float
    _rx_lookup: dict = field(repr=False, default_factory=dict)
    _tx_lookup: dict = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._rx_lookup.update({ix: k for k, ix in enumerate(self.rx_indices)})
        self._tx_lookup.update({ix: k for k, ix in enumerate(self.tx_indices)})

    def rx_variance(self, index: CellIndex) -> float:
        """Normalized receive-side variance; 0 for inadmissible indices."""
        k = self._rx_lookup.get(index)
        return float(self.rx_values[k]) if k is not None else 0.0

    def tx_variance(self, index: CellIndex) -> float:
        k = self._tx_lookup.get(index)
        return float(self.tx_values[k]) if k is not None else 0.0

    def pair_variance(self, rx_index: CellIndex, tx_index: CellIndex) -> float:
        """Joint variance under separability: sigma_r^2 * sigma_s^2."""
        return self.rx_variance(rx_index) * self.tx_variance(tx_index)

    def to_csv(self, path) -> None:
        """Write rows ``side,ix,iy,variance`` (side r then side s)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("side,ix,iy,variance\n")
            for (ix, iy), v in zip(self.rx_indices, self.rx_values):
                fh.write(f"r,{ix},{iy},{v:.12e}\n")
            for (ix, iy), v in zip(self.tx_indices, self.tx_values):
                fh.write(f"s,{ix},{iy},{v:.12e}\n")


def _side_variances(
    spectrum: AngularSpectrum,
    lx: float,
    ly: float,
    medium: Medium,
    tol: float,
) -> tuple[tuple[CellIndex, ...], np.ndarray, float]:
    indices = tuple(lattice_ellipse(lx, ly, medium))
    raw = np.array([cell_variance(spectrum, ix, lx, ly, medium, tol) for ix in indices])
    raw = np.clip(raw, 0.0, None)
    total = float(raw.sum())
    if total <= 0.0:
        raise QuadratureError("variance map has zero total power")
    return indices, raw / total, total


def _side_lengths(side) -> tuple[float, float]:
    # accepts (lx, ly) pairs or anything aperture-like with lx/ly attributes
    if hasattr(side, "lx"):
        return float(side.lx), float(side.ly)
    lx, ly = side
    return float(lx), float(ly)


def variance_map(
    spectrum_rx: AngularSpectrum,
    spectrum_tx: AngularSpectrum,
    rx_side,
    tx_side,
    medium: Medium,
    tol: float = 1e-8,
) -> VarianceMap:
    """Per-cell variances of both sides by adaptive quadrature.

    ``rx_side``/``tx_side`` are (lx, ly) pairs or apertures.  Each admissible
    cell is integrated to absolute tolerance ``tol``; the per-side totals are
    then renormalized to exactly 1, absorbing both the accumulated quadrature
    error and the rim power that the lattice-ellipse truncation leaves
    outside the admissible cells.
    """
    rx_side = _side_lengths(rx_side)
    tx_side = _side_lengths(tx_side)
    rx_idx, rx_val, rx_sum = _side_variances(spectrum_rx, rx_side[0], rx_side[1], medium, tol)
    if (tx_side == rx_side and spectrum_tx is spectrum_rx):
        tx_idx, tx_val, tx_sum = rx_idx, rx_val.copy(), rx_sum
    else:
        tx_idx, tx_val, tx_sum = _side_variances(spectrum_tx, tx_side[0], tx_side[1], medium, tol)
    return VarianceMap(
        rx_side=rx_side,
        tx_side=tx_side,
        rx_indices=rx_idx,
        tx_indices=tx_idx,
        rx_values=rx_val,
        tx_values=tx_val,
        rx_raw_sum=rx_sum,
        tx_raw_sum=tx_sum,
    )


@dataclass(frozen=True)
class JointVarianceMap:
    """Non-separable per-pair variances sigma^2(rx_index, tx_index).

    ``matrix`` is laid out n_rx x n_tx in lattice-ellipse order and sums to
    exactly 1 after renormalization.
    """

    rx_side: tuple[float, float]
    tx_side: tuple[float, float]
    rx_indices: tuple[CellIndex, ...]
    tx_indices: tuple[CellIndex, ...]
    matrix: np.ndarray
    raw_sum: float

    def pair_variance(self, rx_index: CellIndex, tx_index: CellIndex) -> float:
        try:
            i = self.rx_indices.index(rx_index)
            j = self.tx_indices.index(tx_index)
        except ValueError:
            return 0.0
        return float(self.matrix[i, j])


def joint_variance_map(
    density4: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    rx_side: tuple[float, float],
    tx_side: tuple[float, float],
    medium: Medium,
    theta_order: int = 8,
) -> JointVarianceMap:
    """Variances of all (rx, tx) cell pairs for a joint 4D angular density.

    ``density4(theta_r, phi_r, theta_s, phi_s)`` must be vectorized and
    normalized over the product of upper hemispheres.  Each pair integral is
    a tensor product of fixed-resolution per-cell rules (reduced resolution:
    no adaptivity), then the whole matrix is renormalized to unit sum.
    """
    rx_idx = tuple(lattice_ellipse(rx_side[0], rx_side[1], medium))
    tx_idx = tuple(lattice_ellipse(tx_side[0], tx_side[1], medium))
    rx_nodes = [cell_quadrature_nodes(ix, rx_side[0], rx_side[1], medium, theta_order) for ix in rx_idx]
    tx_nodes = [cell_quadrature_nodes(ix, tx_side[0], tx_side[1], medium, theta_order) for ix in tx_idx]
    mat = np.zeros((len(rx_idx), len(tx_idx)))
    for i, (tr, pr, wr) in enumerate(rx_nodes):
        if wr.size == 0:
            continue
        for j, (ts, ps, ws) in enumerate(tx_nodes):
            if ws.size == 0:
                continue
            vals = density4(tr[:, None], pr[:, None], ts[None, :], ps[None, :])
            mat[i, j] = float(wr @ np.asarray(vals, dtype=float) @ ws)
    mat = np.clip(mat, 0.0, None)
    total = float(mat.sum())
    if total <= 0.0:
        raise QuadratureError("joint variance map has zero total power")
    return JointVarianceMap(
        rx_side=rx_side,
        tx_side=tx_side,
        rx_indices=rx_idx,
        tx_indices=tx_idx,
        matrix=mat / total,
        raw_sum=total,
    )
