"""
Smooth windows phi_k, the partition of unity psi_k and its square-root system theta_k.

Both normalizations run over the truncated index set, so the identities
sum psi_k = 1 and sum theta_k^2 = 1 hold exactly wherever the truncated
family covers.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np

from src.analysis.covering import Index, patch_arrays
from src.analysis.grid import Grid, SpectralSignal, band_fits_guard, inverse_ft
from src.models.schemas import CoveringParams, EnvelopeFit
from src.utils.errors import CoverageViolationError, RegistryError, ResolutionError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-14
TRANSITION = 0.5


def bump_profile(rho: np.ndarray) -> np.ndarray:
    """1 on rho <= 1, exp(1 - 1/(1 - u^2)) with u = (rho - 1)/0.5 up to 1.5, then 0."""
    rho = np.asarray(rho, dtype=float)
    out = np.where(rho <= 1.0, 1.0, 0.0)
    mid = (rho > 1.0) & (rho < 1.0 + TRANSITION)
    u = (rho[mid] - 1.0) / TRANSITION
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - u**2))
    return out


def polynomial_profile(rho: np.ndarray) -> np.ndarray:
    """Quintic smoothstep taper on the same annulus."""
    rho = np.asarray(rho, dtype=float)
    t = np.clip((rho - 1.0) / TRANSITION, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": bump_profile,
    "polynomial": polynomial_profile,
}


@dataclass(frozen=True, eq=False)
class BapuSystem:
    params: CoveringParams
    profile: str = "bump"
    _cache: Dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.profile not in PROFILES:
            raise RegistryError(f"unknown window profile '{self.profile}'")

    @cached_property
    def _patches(self) -> Tuple[List[Index], np.ndarray, np.ndarray]:
        return patch_arrays(self.params)

    @property
    def keys(self) -> List[Index]:
        return self._patches[0]

    @property
    def radii(self) -> np.ndarray:
        return self._patches[1]

    @property
    def centers(self) -> np.ndarray:
        return self._patches[2]

    def position(self, k: Iterable[int]) -> int:
        kk = tuple(int(v) for v in np.atleast_1d(k))
        try:
            return self._index_of[kk]
        except KeyError:
            raise CoverageViolationError(f"k={kk} outside the truncated lattice") from None

    @cached_property
    def _index_of(self) -> Dict[Index, int]:
        return {k: i for i, k in enumerate(self.keys)}

    def _phi(self, i: int, xi: np.ndarray) -> np.ndarray:
        """phi_k at points xi of shape (..., n)."""
        scale = self.params.c1 * self.radii[i]
        rho = np.linalg.norm(xi - self.centers[i], axis=-1) / scale
        return PROFILES[self.profile](rho)

    def _sums(self, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        s1 = np.zeros(xi.shape[:-1])
        s2 = np.zeros(xi.shape[:-1])
        for i in range(len(self.keys)):
            phi = self._phi(i, xi)
            s1 += phi
            s2 += phi**2
        return s1, s2

    # ---- pointwise evaluators ----

    def _points(self, xi) -> np.ndarray:
        pts = np.asarray(xi, dtype=float)
        if pts.ndim == 0 or (pts.ndim == 1 and self.params.n > 1):
            pts = pts.reshape(1, -1)
        if pts.ndim == 1:
            pts = pts[:, None]
        return pts

    def phi(self, k, xi) -> np.ndarray:
        return self._phi(self.position(k), self._points(xi))

    def psi(self, k, xi) -> np.ndarray:
        pts = self._points(xi)
        s1, _ = self._sums(pts)
        if np.any(s1 < DENOMINATOR_FLOOR):
            raise CoverageViolationError("sum of windows vanishes: Kmax too small for this xi")
        return self._phi(self.position(k), pts) / s1

    def theta(self, k, xi) -> np.ndarray:
        pts = self._points(xi)
        _, s2 = self._sums(pts)
        if np.any(s2 < DENOMINATOR_FLOOR):
            raise CoverageViolationError("sum of squared windows vanishes: Kmax too small")
        return self._phi(self.position(k), pts) / np.sqrt(s2)

    # ---- grid evaluators ----

    def _grid_xi(self, grid: Grid) -> np.ndarray:
        key = ("xi", grid)
        if key not in self._cache:
            self._cache[key] = np.stack(grid.frequency_mesh(), axis=-1)
        return self._cache[key]

    def _grid_sums(self, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
        key = ("sums", grid)
        if key not in self._cache:
            self._cache[key] = self._sums(self._grid_xi(grid))
        return self._cache[key]

    def check_guard(self, grid: Grid, k) -> None:
        i = self.position(k)
        support = (1.0 + TRANSITION) * self.params.c1 * self.radii[i]
        if not band_fits_guard(grid, self.centers[i], support):
            raise ResolutionError(
                f"band of k={self.keys[i]} exceeds the guard band |xi| <= {grid.guard:.4g}"
            )

    def on_grid(self, grid: Grid, k, kind: str = "theta") -> np.ndarray:
        """phi_k, psi_k or theta_k sampled at the frequency nodes; zero where nothing covers."""
        i = self.position(k)
        key = (kind, grid, self.keys[i])
        if key in self._cache:
            return self._cache[key]
        phi = self._phi(i, self._grid_xi(grid))
        s1, s2 = self._grid_sums(grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "phi":
                values = phi
            elif kind == "psi":
                values = np.where(s1 > DENOMINATOR_FLOOR, phi / s1, 0.0)
            elif kind == "theta":
                values = np.where(s2 > DENOMINATOR_FLOOR, phi / np.sqrt(s2), 0.0)
            else:
                raise RegistryError(f"unknown window kind '{kind}'")
        if len(self._cache) < 4096:
            self._cache[key] = values
        return values

    def support_radius(self, k) -> float:
        return (1.0 + TRANSITION) * self.params.c1 * float(self.radii[self.position(k)])


def phi_k_eval(system: BapuSystem, k, xi) -> np.ndarray:
    return system.phi(k, xi)


def psi_k_eval(system: BapuSystem, k, xi) -> np.ndarray:
    return system.psi(k, xi)


def theta_k_eval(system: BapuSystem, k, xi) -> np.ndarray:
    return system.theta(k, xi)


def interior_keys(system: BapuSystem, margin: int = 2) -> List[Index]:
    """Lattice points at least `margin` away from the truncation edge."""
    limit = system.params.Kmax - margin
    return [k for k in system.keys if max(abs(v) for v in k) <= limit]


def check_bapu_decay(
    system: BapuSystem, k, grid: Grid, cap: float = 1e6
) -> EnvelopeFit:
    """Fit |F^-1 psi_k(x)| <= C r_k^n (1 + r_k |x|)^(-n-1) on the grid."""
    system.check_guard(grid, k)
    i = system.position(k)
    n = system.params.n
    r = float(system.radii[i])
    psi = system.on_grid(grid, k, "psi")
    kernel = inverse_ft(SpectralSignal(grid, psi[None].astype(complex))).values[0]
    dist = grid.periodic_distance(np.zeros(n))
    envelope = r**n * (1.0 + r * dist) ** (-n - 1)
    constant = float(np.max(np.abs(kernel) / envelope))
    return EnvelopeFit(k=system.keys[i], order=n + 1, constant=constant, capped=constant > cap)


def breakpoints(system: BapuSystem) -> np.ndarray:
    """
    Frequencies (n = 1) where some window of the truncated family is not analytic:
    the inner transition radius and the support radius of every patch.
    """
    if system.params.n != 1:
        raise ResolutionError("breakpoints are tabulated for n = 1 only")
    c1 = system.params.c1
    centers = system.centers[:, 0]
    points = []
    for center, r in zip(centers, system.radii):
        for offset in (c1 * r, (1.0 + TRANSITION) * c1 * r):
            points.extend([center - offset, center + offset])
    return np.unique(np.round(np.asarray(points), 12))


def smooth_intervals(system: BapuSystem, min_length: float, limit: float = math.inf) -> List[
    Tuple[float, float]
]:
    """Covered intervals between consecutive breakpoints, at least `min_length` long."""
    pts = breakpoints(system)
    intervals = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo < min_length or max(abs(lo), abs(hi)) > limit:
            continue
        s1, _ = system._sums(np.array([[0.5 * (lo + hi)]]))
        if s1[0] > DENOMINATOR_FLOOR:
            intervals.append((float(lo), float(hi)))
    return intervals
