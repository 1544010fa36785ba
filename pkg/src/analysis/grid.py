"""
Periodic box discretization and the unitary Fourier transform on it.

Samples live on x_j = h (j - M/2), j = 0..M-1 per axis, and frequencies on
xi_m = dxi (m - M/2) with h * dxi * M = 2 pi. The continuous transform

    F f(xi) = (2 pi)^(-n/2) int f(x) exp(-i x.xi) dx

is approximated by its Riemann sum. Because both grids start at -floor(M/2)
times their spacing, the phase factors collapse into (i)fftshift and the
transform becomes a single FFT with ifftshift on the inside.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from src.models.schemas import GridParams
from src.utils.errors import DomainError, ParameterError, StructuralError

logger = logging.getLogger(__name__)

_AXIS_LETTERS = "abcdefgh"


def commensurate_halfwidth(a: float, cells: int) -> float:
    """Halfwidth T with 2 T a / pi = cells, so unit-scale cube lattices are periodic on the box."""
    if cells <= 0:
        raise ParameterError("cells must be positive")
    return cells * math.pi / (2.0 * a)


@dataclass(frozen=True)
class Grid:
    n: int
    T: float
    M: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.n > 3:
            raise ParameterError(f"grid dimension must be 1, 2 or 3, got {self.n}")
        if self.T <= 0:
            raise ParameterError("grid halfwidth T must be positive")
        if self.M <= 0 or self.M % 2:
            raise ParameterError(f"points per axis must be a positive even integer, got {self.M}")

    @classmethod
    def from_params(cls, params: GridParams, a: float = math.pi) -> "Grid":
        T = params.T
        if params.commensurate_cells is not None:
            T = commensurate_halfwidth(a, params.commensurate_cells)
        return cls(n=params.n, T=T, M=params.M)

    @property
    def h(self) -> float:
        return 2.0 * self.T / self.M

    @property
    def dxi(self) -> float:
        return math.pi / self.T

    @property
    def xi_max(self) -> float:
        return math.pi / self.h

    @property
    def guard(self) -> float:
        """Largest |xi|_inf allowed for constructed spectral objects."""
        return 0.9 * self.xi_max

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis(self) -> np.ndarray:
        return self.h * (np.arange(self.M) - self.M // 2)

    def frequency_axis(self) -> np.ndarray:
        return self.dxi * (np.arange(self.M) - self.M // 2)

    def mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.n), indexing="ij")

    def frequency_mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.frequency_axis()] * self.n), indexing="ij")

    def points(self) -> np.ndarray:
        """All sample points as an (M^n, n) array in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def frequency_radius(self) -> np.ndarray:
        return np.sqrt(sum(m**2 for m in self.frequency_mesh()))

    def periodic_distance(self, center: Sequence[float]) -> np.ndarray:
        """Euclidean distance to `center` with each axis wrapped onto [-T, T)."""
        total = np.zeros(self.shape)
        for axis_values, c in zip(self.mesh(), np.atleast_1d(center)):
            d = np.mod(axis_values - c + self.T, 2.0 * self.T) - self.T
            total = total + d**2
        return np.sqrt(total)

    def contains(self, points: np.ndarray) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all(pts >= -self.T - 1e-12) and np.all(pts <= self.T + 1e-12))


@dataclass(frozen=True, eq=False)
class VectorSignal:
    """N-component complex samples on the spatial grid; values has shape (N,) + grid.shape."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        _check_shape(self.grid, self.values)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "VectorSignal":
        return VectorSignal(self.grid, values)


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    """N-component complex samples at the frequency nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        _check_shape(self.grid, self.values)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "SpectralSignal":
        return SpectralSignal(self.grid, values)


def _check_shape(grid: Grid, values: np.ndarray) -> None:
    if values.ndim != grid.n + 1 or values.shape[1:] != grid.shape:
        raise StructuralError(
            f"samples of shape {values.shape} do not match (N,) + {grid.shape}"
        )
    if values.shape[0] < 1:
        raise StructuralError("a signal needs at least one component")


def _spatial_axes(grid: Grid) -> Tuple[int, ...]:
    return tuple(range(1, grid.n + 1))


def forward_ft(f: VectorSignal) -> SpectralSignal:
    grid = f.grid
    axes = _spatial_axes(grid)
    scale = (2.0 * math.pi) ** (-grid.n / 2.0) * grid.cell_volume
    shifted = sfft.ifftshift(np.asarray(f.values, dtype=complex), axes=axes)
    spectrum = sfft.fftshift(sfft.fftn(shifted, axes=axes), axes=axes)
    return SpectralSignal(grid, scale * spectrum)


def inverse_ft(F: SpectralSignal) -> VectorSignal:
    grid = F.grid
    axes = _spatial_axes(grid)
    scale = (2.0 * math.pi) ** (-grid.n / 2.0) * (grid.dxi * grid.M) ** grid.n
    shifted = sfft.ifftshift(np.asarray(F.values, dtype=complex), axes=axes)
    samples = sfft.fftshift(sfft.ifftn(shifted, axes=axes), axes=axes)
    return VectorSignal(grid, scale * samples)


def evaluate_at(F: SpectralSignal, points: np.ndarray) -> np.ndarray:
    """
    Trigonometric interpolation of the band-limited function with spectrum F.

    Args:
        F: spectral samples
        points: (P, n) array of points inside the box

    Returns:
        (N, P) complex array of values
    """
    grid = F.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.n:
        raise StructuralError(f"points must have {grid.n} coordinates")
    if not grid.contains(pts):
        raise DomainError("sample point outside the periodic box")
    xi = grid.frequency_axis()
    letters = _AXIS_LETTERS[: grid.n]
    operands = [F.values] + [np.exp(1j * np.outer(pts[:, d], xi)) for d in range(grid.n)]
    subscripts = "z" + letters + "," + ",".join("p" + c for c in letters) + "->zp"
    values = np.einsum(subscripts, *operands, optimize=True)
    return (2.0 * math.pi) ** (-grid.n / 2.0) * grid.dxi**grid.n * values


def evaluate_on_lattice(F: SpectralSignal, axis_points: Sequence[np.ndarray]) -> np.ndarray:
    """Trigonometric interpolation on a tensor lattice; returns shape (N, L_1, ..., L_n)."""
    grid = F.grid
    if len(axis_points) != grid.n:
        raise StructuralError("one coordinate array per axis is required")
    for pts in axis_points:
        if not grid.contains(pts):
            raise DomainError("lattice point outside the periodic box")
    xi = grid.frequency_axis()
    result = np.asarray(F.values, dtype=complex)
    for pts in axis_points:
        phases = np.exp(1j * np.outer(np.asarray(pts, dtype=float), xi))
        result = np.tensordot(result, phases, axes=([1], [1]))
    return (2.0 * math.pi) ** (-grid.n / 2.0) * grid.dxi**grid.n * result


def lattice_adjoint(
    grid: Grid, coefficients: np.ndarray, axis_points: Sequence[np.ndarray]
) -> np.ndarray:
    """sum_l c_l exp(-i x_l . xi) at every frequency node; returns shape (N,) + grid.shape."""
    xi = grid.frequency_axis()
    result = np.asarray(coefficients, dtype=complex)
    for pts in axis_points:
        phases = np.exp(-1j * np.outer(np.asarray(pts, dtype=float), xi))
        result = np.tensordot(result, phases, axes=([1], [0]))
    return result


def spectral_derivative(f: VectorSignal, eta: Sequence[int]) -> VectorSignal:
    """d^eta f through multiplication by (i xi)^eta."""
    grid = f.grid
    if len(eta) != grid.n:
        raise StructuralError("multi-index length must equal the dimension")
    factor = np.ones(grid.shape, dtype=complex)
    for xi_d, order in zip(grid.frequency_mesh(), eta):
        factor = factor * (1j * xi_d) ** int(order)
    spectrum = forward_ft(f)
    return inverse_ft(spectrum.with_values(spectrum.values * factor))


def l2_norm(f: VectorSignal) -> float:
    return math.sqrt(f.grid.cell_volume * math.fsum(np.abs(f.values).ravel() ** 2))


def spectral_l2_norm(F: SpectralSignal) -> float:
    return math.sqrt(F.grid.dxi**F.grid.n * math.fsum(np.abs(F.values).ravel() ** 2))


def band_fits_guard(grid: Grid, center: np.ndarray, radius: float) -> bool:
    """True when the ball B(center, radius) lies inside |xi|_inf <= 0.9 xi_max."""
    return bool(np.max(np.abs(np.atleast_1d(center))) + radius <= grid.guard)
