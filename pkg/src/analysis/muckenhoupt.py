"""
Matrix A_p / A_1 constants, doubling exponents and the convolution-bound probe.

All suprema are taken over finite cube families and are therefore lower
bounds. Divergence is detected by refining the family: every extension adds a
smaller scale and doubles the midpoint nodes per axis, and a weight is flagged
when each extension raises the estimate by more than `divergence_tol`.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from src.analysis.grid import Grid, VectorSignal
from src.analysis.weights import MatrixWeight, midpoint_nodes, safe_power, spectral_norm
from src.models.schemas import WeightClassReport
from src.utils.errors import DegenerateWeightError, ParameterError

logger = logging.getLogger(__name__)

_PAIR_CHUNK = 2_000_000


@dataclass(frozen=True)
class CubeFamily:
    """Cubes R[c, r] = c + r[-1, 1]^n for every centre c and half-side r."""

    centers: Tuple[Tuple[float, ...], ...]
    halfsides: Tuple[float, ...]
    nodes_per_axis: int = 64

    def cubes(self) -> List[Tuple[np.ndarray, float]]:
        return [(np.asarray(c, dtype=float), r) for c in self.centers for r in self.halfsides]

    @property
    def description(self) -> str:
        return (
            f"{len(self.centers)} centres x {len(self.halfsides)} scales "
            f"[{min(self.halfsides):.3g}, {max(self.halfsides):.3g}], "
            f"{self.nodes_per_axis} nodes/axis"
        )


def nested_families(
    centers: Iterable[Sequence[float]],
    halfsides: Iterable[float],
    nodes_per_axis: int = 64,
    extensions: int = 3,
) -> List[CubeFamily]:
    """A base family plus `extensions` refinements (one finer scale, twice the nodes each)."""
    base_centers = tuple(tuple(float(v) for v in np.atleast_1d(c)) for c in centers)
    scales = sorted(float(r) for r in halfsides)
    families = []
    for level in range(extensions + 1):
        extra = [scales[0] / 2.0**j for j in range(1, level + 1)]
        families.append(
            CubeFamily(base_centers, tuple(sorted(extra) + scales), nodes_per_axis * 2**level)
        )
    return families


def _pair_norm_power(A: np.ndarray, B: np.ndarray, exponent: float) -> np.ndarray:
    """||A_i B_j||^exponent for all pairs, shape (len(A), len(B))."""
    if A.shape[-1] == 1:
        return (np.abs(A[:, 0, 0])[:, None] * np.abs(B[:, 0, 0])[None, :]) ** exponent
    out = np.empty((len(A), len(B)))
    chunk = max(1, _PAIR_CHUNK // max(1, len(B)))
    for start in range(0, len(A), chunk):
        block = np.einsum("iab,jbc->ijac", A[start : start + chunk], B)
        out[start : start + chunk] = spectral_norm(block) ** exponent
    return out


def _cube_ap(W: MatrixWeight, p: float, center: np.ndarray, halfside: float, m: int) -> float:
    nodes, _ = midpoint_nodes(center, halfside, m)
    spacing = 2.0 * halfside / m
    nodes, root = safe_power(W, nodes, 1.0 / p, spacing)
    _, inverse_root = safe_power(W, nodes, -1.0 / p, spacing)
    p_dual = p / (p - 1.0)
    inner = np.mean(_pair_norm_power(root, inverse_root, p_dual), axis=1)
    return float(np.mean(inner ** (p / p_dual)))


def _cube_a1(W: MatrixWeight, center: np.ndarray, halfside: float, m: int) -> float:
    nodes, _ = midpoint_nodes(center, halfside, m)
    spacing = 2.0 * halfside / m
    nodes, values = safe_power(W, nodes, 1.0, spacing)
    _, inverse = safe_power(W, nodes, -1.0, spacing)
    # rows: t, columns: y
    averages = np.mean(_pair_norm_power(values, inverse, 1.0), axis=0)
    return float(np.max(averages))


def _family_sup(estimator, family: CubeFamily) -> float:
    return max(estimator(c, r, family.nodes_per_axis) for c, r in family.cubes())


def _diverges(trend: Sequence[float], tol: float) -> bool:
    if len(trend) < 2:
        return False
    steps = [(b - a) / abs(a) if a else math.inf for a, b in zip(trend[:-1], trend[1:])]
    return all(step > tol for step in steps)


def _as_families(families) -> List[CubeFamily]:
    return [families] if isinstance(families, CubeFamily) else list(families)


def ap_constant_estimate(
    W: MatrixWeight,
    p: float,
    families: CubeFamily | Sequence[CubeFamily],
    divergence_tol: float = 0.05,
) -> WeightClassReport:
    """
    Estimate [W]_{A_p} = sup_Q avg_x (avg_t ||W^{1/p}(x) W^{-1/p}(t)||^{p'})^{p/p'}.

    Args:
        W: matrix weight
        p: exponent, p > 1
        families: one cube family or a nested sequence of them
        divergence_tol: minimal relative growth per extension counted as divergence

    Returns:
        WeightClassReport with the estimate of the last family and the trend
    """
    if p <= 1.0:
        raise ParameterError("the matrix A_p condition needs p > 1; use a1_constant_estimate")
    fams = _as_families(families)
    trend = [
        _family_sup(lambda c, r, m: _cube_ap(W, p, c, r, m), fam) for fam in fams
    ]
    divergent = _diverges(trend, divergence_tol)
    if divergent:
        logger.warning("A_%s estimate grows across nested families: %s", p, trend)
    return WeightClassReport(
        p=p,
        estimate=trend[-1],
        family=fams[-1].description,
        divergent=divergent,
        trend=trend,
        **_doubling_fields(W, p, fams[-1]),
    )


def a1_constant_estimate(
    W: MatrixWeight,
    families: CubeFamily | Sequence[CubeFamily],
    divergence_tol: float = 0.05,
) -> WeightClassReport:
    """sup_Q max_{y in nodes} avg_t ||W(t) W^{-1}(y)||; the esssup is a node maximum."""
    fams = _as_families(families)
    trend = [_family_sup(lambda c, r, m: _cube_a1(W, c, r, m), fam) for fam in fams]
    divergent = _diverges(trend, divergence_tol)
    if divergent:
        logger.warning("A_1 estimate grows across nested families: %s", trend)
    return WeightClassReport(
        p=1.0,
        estimate=trend[-1],
        family=fams[-1].description,
        divergent=divergent,
        trend=trend,
        **_doubling_fields(W, 1.0, fams[-1]),
    )


def scalar_ap_oracle(
    w, p: float, center: Sequence[float], halfside: float, nodes_per_axis: int
) -> float:
    """Classical avg(w) avg(w^{-p'/p})^{p/p'} on the same midpoint nodes; w maps (P, n) to (P,)."""
    nodes, _ = midpoint_nodes(center, halfside, nodes_per_axis)
    values = np.asarray(w(nodes), dtype=float)
    p_dual = p / (p - 1.0)
    return float(np.mean(values) * np.mean(values ** (-p_dual / p)) ** (p / p_dual))


def scalar_a1_oracle(w, center: Sequence[float], halfside: float, nodes_per_axis: int) -> float:
    nodes, _ = midpoint_nodes(center, halfside, nodes_per_axis)
    values = np.asarray(w(nodes), dtype=float)
    return float(np.mean(values) / np.min(values))


# ============ DOUBLING ============


@dataclass(frozen=True)
class DoublingEstimate:
    beta: float
    constant: float
    per_direction: Tuple[float, ...]

    @property
    def spread(self) -> float:
        return max(self.per_direction) - min(self.per_direction)


def _scalar_mass(
    W: MatrixWeight, p: float, center: np.ndarray, halfside: float, m: int, y: np.ndarray
) -> float:
    nodes, weights = midpoint_nodes(center, halfside, m)
    root = W.power(nodes, 1.0 / p, allow_singular=True)
    density = np.linalg.norm(root @ y, axis=-1) ** p
    return math.fsum(weights * density)


def doubling_exponent_estimate(
    W: MatrixWeight,
    p: float,
    centers: Iterable[Sequence[float]],
    halfsides: Iterable[float],
    directions: Optional[np.ndarray] = None,
    nodes_per_axis: int = 64,
) -> DoublingEstimate:
    """
    beta = log2 of the largest ratio int_{R[x,2r]} |W^{1/p} y|^p / int_{R[x,r]} |W^{1/p} y|^p.

    The maximum is also reported per direction y, so its spread over y is visible.
    """
    if directions is None:
        directions = np.eye(W.N, dtype=complex)
    dirs = np.atleast_2d(np.asarray(directions, dtype=complex))
    plan = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    scales = [float(r) for r in halfsides]
    per_direction = []
    for y in dirs:
        y = y / np.linalg.norm(y)
        worst = 0.0
        for c in plan:
            for r in scales:
                small = _scalar_mass(W, p, c, r, nodes_per_axis, y)
                if small <= 0.0:
                    raise DegenerateWeightError(f"weighted mass vanishes on R[{c}, {r}]")
                big = _scalar_mass(W, p, c, 2.0 * r, nodes_per_axis, y)
                worst = max(worst, big / small)
        per_direction.append(math.log2(worst))
    beta = max(per_direction)
    return DoublingEstimate(beta=beta, constant=2.0**beta, per_direction=tuple(per_direction))


def _doubling_fields(W: MatrixWeight, p: float, family: CubeFamily) -> Dict[str, float]:
    """Doubling exponent over the cubes of `family`, as WeightClassReport fields."""
    try:
        estimate = doubling_exponent_estimate(
            W, p, family.centers, family.halfsides, nodes_per_axis=family.nodes_per_axis
        )
    except DegenerateWeightError as exc:
        logger.info("no doubling exponent on %s: %s", family.description, exc)
        return {}
    return {"beta": estimate.beta, "doubling_constant": estimate.constant, "beta_spread": estimate.spread}


# ============ CONVOLUTION PROBE ============


def _kernel_1d(delta: float, offsets: np.ndarray, h: float) -> np.ndarray:
    """Exact cell integrals of delta (1 + delta |x|)^-2 over [d - h/2, d + h/2]."""

    def antiderivative(x: np.ndarray) -> np.ndarray:
        return np.sign(x) * (1.0 - 1.0 / (1.0 + delta * np.abs(x)))

    return antiderivative(offsets + 0.5 * h) - antiderivative(offsets - 0.5 * h)


def _kernel_nd(delta: float, grid: Grid, sub: int = 8) -> np.ndarray:
    n = grid.n
    h = grid.h
    offsets = h * np.arange(-grid.M, grid.M + 1)
    if n == 1:
        return _kernel_1d(delta, offsets, h)
    sub_t = (np.arange(sub) + 0.5) / sub - 0.5
    mesh = np.meshgrid(*([offsets] * n), indexing="ij")
    total = np.zeros(mesh[0].shape)
    for shift in np.array(np.meshgrid(*([sub_t] * n), indexing="ij")).reshape(n, -1).T:
        rho = np.sqrt(sum((m + s * h) ** 2 for m, s in zip(mesh, shift)))
        total += delta**n * (1.0 + delta * rho) ** (-n - 1)
    return total * h**n / sub**n


def convolution_bound_probe(
    W: MatrixWeight, p: float, f: VectorSignal, deltas: Sequence[float]
) -> Tuple[float, List[float]]:
    """
    max over delta of ||g_delta * f||_{L^p(W)} / ||f||_{L^p(W)}, g(x) = (1 + |x|)^(-n-1).

    The convolution is linear (zero padded), evaluated back on the box.
    """
    from src.analysis.norms import lp_w_norm

    base = lp_w_norm(W, p, f)
    if base == 0.0:
        return 0.0, [0.0 for _ in deltas]
    grid = f.grid
    axes = tuple(range(grid.n))
    window = tuple(slice(grid.M, 2 * grid.M) for _ in axes)
    ratios = []
    for delta in deltas:
        kernel = _kernel_nd(float(delta), grid)
        smoothed = np.stack(
            [fftconvolve(component, kernel, mode="full", axes=axes)[window] for component in f.values]
        )
        ratios.append(lp_w_norm(W, p, f.with_values(smoothed)) / base)
    return max(ratios), ratios


def moderate_growth_integral(W: MatrixWeight, p: float, grid: Grid, eps: float = 0.5) -> float:
    """int ||W^{1/p}(x)||^p <x>^{-n(p + eps)} dx over the box."""
    pts = grid.points()
    root = W.power(pts, 1.0 / p, allow_singular=True)
    density = spectral_norm(root) ** p * (1.0 + np.sum(pts**2, axis=-1)) ** (
        -grid.n * (p + eps) / 2.0
    )
    return grid.cell_volume * math.fsum(density)
