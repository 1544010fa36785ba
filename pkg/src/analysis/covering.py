"""
Alpha-covering geometry.

Frequency patches B_k = B(xi_k, c1 r_k) with r_k = <k>^(alpha/(1-alpha)) and
xi_k = k r_k, and for every k a tiling of space by half-open cubes
Q(k, l) = (pi/a) r_k^-1 (l + [0, 1)^n). On a periodic box of period 2T the side
of band k is shrunk to 2T / ceil(2T a r_k / pi) (band_side), so every band lattice
tiles the box exactly.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.models.schemas import AdmissibilityReport, CoveringParams
from src.utils.errors import ParameterError, UnsupportedEndpointError

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]

_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def _as_index(k: Iterable[int] | int) -> np.ndarray:
    return np.atleast_1d(np.asarray(k, dtype=float))


def bracket(x: Iterable[float] | float) -> float:
    """<x> = (1 + |x|^2)^(1/2)."""
    v = _as_index(x)
    return math.sqrt(1.0 + float(np.dot(v, v)))


def r_of_k(alpha: float, k: Iterable[int] | int) -> float:
    if alpha >= 1.0:
        raise UnsupportedEndpointError("alpha = 1 is the dyadic endpoint and is not supported")
    if alpha < 0.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    return bracket(k) ** (alpha / (1.0 - alpha))


def xi_of_k(alpha: float, k: Iterable[int] | int) -> np.ndarray:
    return _as_index(k) * r_of_k(alpha, k)


@dataclass(frozen=True)
class FreqPatch:
    k: Index
    r: float
    xi: Tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class TimeCube:
    k: Index
    l: Index
    anchor: Tuple[float, ...]
    side: float

    @property
    def volume(self) -> float:
        return self.side ** len(self.anchor)

    @property
    def center(self) -> np.ndarray:
        """x_{k,l}: the lattice point the frame atom (k, l) is centred at."""
        return np.asarray(self.anchor)

    @property
    def midpoint(self) -> np.ndarray:
        return np.asarray(self.anchor) + 0.5 * self.side

    def contains(self, x: Sequence[float]) -> bool:
        offset = np.atleast_1d(np.asarray(x, dtype=float)) - np.asarray(self.anchor)
        return bool(np.all(offset >= 0.0) and np.all(offset < self.side))


def patch(params: CoveringParams, k: Iterable[int] | int) -> FreqPatch:
    kk = tuple(int(v) for v in np.atleast_1d(k))
    r = r_of_k(params.alpha, kk)
    return FreqPatch(k=kk, r=r, xi=tuple(np.asarray(kk, dtype=float) * r), radius=params.c1 * r)


def cube_side(params: CoveringParams, k: Iterable[int] | int) -> float:
    return params.cube_unit / r_of_k(params.alpha, k)


def band_side(params: CoveringParams, k: Iterable[int] | int, period: Optional[float] = None) -> float:
    """
    Cube side of band k. With a box period the side shrinks to period / ceil(period / side),
    so a whole number of cubes tiles one period.
    """
    side = cube_side(params, k)
    if period is None:
        return side
    return period / math.ceil(period / side - 1e-9)


def cube(
    params: CoveringParams,
    k: Iterable[int] | int,
    l: Iterable[int] | int,
    period: Optional[float] = None,
) -> TimeCube:
    kk = tuple(int(v) for v in np.atleast_1d(k))
    ll = tuple(int(v) for v in np.atleast_1d(l))
    if len(kk) != params.n or len(ll) != params.n:
        raise ParameterError(f"indices must have {params.n} entries")
    side = band_side(params, kk, period)
    return TimeCube(k=kk, l=ll, anchor=tuple(side * np.asarray(ll, dtype=float)), side=side)


def locate(params: CoveringParams, k: Iterable[int] | int, x: Sequence[float]) -> Index:
    """The l with x in Q(k, l)."""
    side = cube_side(params, k)
    return tuple(int(v) for v in np.floor(np.atleast_1d(np.asarray(x, dtype=float)) / side))


def index_set(params: CoveringParams) -> List[Index]:
    """Truncated lattice |k|_inf <= Kmax in k-major lexicographic order."""
    K = params.Kmax
    return [tuple(k) for k in itertools.product(range(-K, K + 1), repeat=params.n)]


def band_order(keys: Iterable[Index]) -> List[Index]:
    """Reduction order: increasing |k|, lexicographic ties."""
    return sorted(keys, key=lambda k: (float(np.dot(k, k)), k))


def patch_arrays(params: CoveringParams) -> Tuple[List[Index], np.ndarray, np.ndarray]:
    keys = index_set(params)
    radii = np.array([r_of_k(params.alpha, k) for k in keys])
    centers = np.asarray(keys, dtype=float) * radii[:, None]
    return keys, radii, centers


def covered_halfwidth(params: CoveringParams) -> float:
    """Half-width of the frequency box the truncated family is checked on."""
    edge = (params.Kmax,) + (0,) * (params.n - 1)
    return float(params.Kmax * r_of_k(params.alpha, edge))


def _intersection_matrix(params: CoveringParams) -> Tuple[List[Index], np.ndarray, np.ndarray]:
    keys, radii, centers = patch_arrays(params)
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    meets = dist < params.c1 * (radii[:, None] + radii[None, :])
    return keys, radii, meets


def patch_neighbors(
    params: CoveringParams, k: Iterable[int] | int, dilation: float = 1.0
) -> List[Index]:
    """
    N(k): all m in the truncated lattice with B_m meeting B_k (open balls).

    With `dilation` the balls are enlarged about their centres; 1.5 gives the
    pairs whose window supports overlap.
    """
    kk = tuple(int(v) for v in np.atleast_1d(k))
    p = patch(params, kk)
    keys, radii, centers = patch_arrays(params)
    dist = np.linalg.norm(centers - np.asarray(p.xi), axis=-1)
    hits = dist < dilation * params.c1 * (radii + p.r)
    return [key for key, hit in zip(keys, hits) if hit]


def neighbor_scale_ratio(params: CoveringParams) -> float:
    """max r_k / r_j over intersecting pairs of the truncated family."""
    _, radii, meets = _intersection_matrix(params)
    ratios = radii[:, None] / radii[None, :]
    return float(np.max(np.where(meets, ratios, 1.0)))


def _sample_box(n: int, halfwidth: float, step: float) -> np.ndarray:
    axis = np.arange(-halfwidth, halfwidth + 0.5 * step, step)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_admissible(
    params: CoveringParams,
    box: Optional[float] = None,
    step: Optional[float] = None,
    dxi: Optional[float] = None,
) -> AdmissibilityReport:
    """
    Verify the truncated family on the frequency box |xi|_inf <= box.

    Args:
        params: covering parameters
        box: half-width of the checked box (default: reach of the outermost patch centre)
        step: sampling resolution (default: dxi / 4, or c1 / 8 without a frequency grid)
        dxi: frequency spacing of the grid the family is used on

    Returns:
        AdmissibilityReport; a coverage gap is reported, not raised
    """
    halfwidth = covered_halfwidth(params) if box is None else float(box)
    if step is not None:
        resolution = float(step)
    elif dxi is not None:
        resolution = 0.25 * float(dxi)
    else:
        resolution = params.c1 / 8.0
    keys, radii, centers = patch_arrays(params)

    samples = _sample_box(params.n, halfwidth, resolution)
    covered = np.zeros(len(samples), dtype=bool)
    for center, r in zip(centers, radii):
        covered |= np.linalg.norm(samples - center, axis=-1) < params.c1 * r
    first_gap = None
    if not covered.all():
        gap = samples[~covered][0]
        first_gap = float(gap[0]) if params.n == 1 else float(np.linalg.norm(gap))
        logger.info("coverage gap at %s (alpha=%s, c1=%s)", gap, params.alpha, params.c1)

    _, _, meets = _intersection_matrix(params)
    n0 = int(meets.sum(axis=1).max())

    volume_const = _BALL_VOLUME[params.n]
    ratios = []
    offsets = [0.0, 0.5, 0.99]
    for center, r in zip(centers, radii):
        volume = volume_const * (params.c1 * r) ** params.n
        for t in offsets:
            for d in range(params.n):
                for sign in (-1.0, 1.0):
                    xi = center.copy()
                    xi[d] += sign * t * params.c1 * r
                    ratios.append(volume / bracket(xi) ** (params.alpha * params.n))

    return AdmissibilityReport(
        covers_domain=bool(covered.all()),
        n0=n0,
        size_ratio_bounds=(float(min(ratios)), float(max(ratios))),
        eccentricity=1.0,
        neighbor_scale_ratio=neighbor_scale_ratio(params),
        samples=int(len(samples)),
        first_gap=first_gap,
    )


def lattice_window(params: CoveringParams, k: Iterable[int] | int, T: float) -> List[np.ndarray]:
    """Per-axis l ranges of the periodic lattice of band k: x_{k,l} in [-T, T), one period."""
    side = band_side(params, k, 2.0 * T)
    cells = int(round(2.0 * T / side))
    lo = math.ceil(-T / side - 1e-9)
    ell = np.arange(lo, lo + cells, dtype=int)
    return [ell.copy() for _ in range(params.n)]


def is_commensurate(params: CoveringParams, k: Iterable[int] | int, T: float) -> bool:
    """True when the nominal cube lattice of band k repeats with the box period 2T unchanged."""
    cells = 2.0 * T / cube_side(params, k)
    return abs(cells - round(cells)) < 1e-9 * max(1.0, cells)


def dilation_factor(Q: TimeCube, P: TimeCube) -> float:
    """Smallest t >= 1 with Q inside the cube t*P dilated about the centre of P."""
    centre = P.midpoint
    low = np.asarray(Q.anchor) - centre
    high = low + Q.side
    reach = float(np.max(np.maximum(np.abs(low), np.abs(high))))
    return max(1.0, reach / (0.5 * P.side))
