"""
Reducing operators A_Q with |A_Q y| comparable to rho_{p,Q}(y) = (avg_Q |W^{1/p} y|^p)^{1/p}.

For p = 2 the operator is the square root of the cube average of W and the
comparison is an equality. For other p an SPD quadratic form is fitted to
rho^2 on a set of unit directions; the fitted condition factor kappa bounds
|A_Q y| / rho(y) from both sides.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.analysis.covering import Index, TimeCube, cube, dilation_factor
from src.analysis.weights import (
    MatrixWeight,
    gauss_nodes,
    matrix_power,
    spectral_norm,
    unit_directions,
    weighted_cube_average,
)
from src.models.schemas import CoveringParams, StrongDoublingReport
from src.utils.errors import EllipsoidFitError, ParameterError, StructuralError

logger = logging.getLogger(__name__)

CubeKey = Tuple[Index, Index]

METHODS = ("exact-p2", "ellipsoid-fit")


def quadrature_nodes(side: float, h: Optional[float] = None) -> int:
    """Nodes per axis for a cube of the given side: max(8, ceil(4 side / h))."""
    if h is None:
        return 8
    return max(8, math.ceil(4.0 * side / h))


def rho(
    W: MatrixWeight, p: float, Q: TimeCube, directions: np.ndarray, per_axis: int = 8
) -> np.ndarray:
    """rho_{p,Q}(u) for each row u of `directions`."""
    halfside = 0.5 * Q.side
    nodes, weights = gauss_nodes(Q.midpoint, halfside, per_axis)
    root = W.power(nodes, 1.0 / p)
    images = np.einsum("pab,db->dpa", root, np.asarray(directions, dtype=complex))
    density = np.linalg.norm(images, axis=-1) ** p
    return (density @ weights / float(np.sum(weights))) ** (1.0 / p)


def _design(directions: np.ndarray) -> np.ndarray:
    """Rows map the real parameters of a Hermitian G to u^* G u."""
    N = directions.shape[1]
    columns = [np.abs(directions[:, a]) ** 2 for a in range(N)]
    for a in range(N):
        for b in range(a + 1, N):
            cross = np.conj(directions[:, a]) * directions[:, b]
            columns.append(2.0 * cross.real)
            columns.append(-2.0 * cross.imag)
    return np.stack(columns, axis=-1)


def _assemble(params: np.ndarray, N: int) -> np.ndarray:
    G = np.diag(params[:N]).astype(complex)
    pos = N
    for a in range(N):
        for b in range(a + 1, N):
            G[a, b] = params[pos] + 1j * params[pos + 1]
            G[b, a] = np.conj(G[a, b])
            pos += 2
    return G


def fit_ellipsoid(
    W: MatrixWeight,
    p: float,
    Q: TimeCube,
    count: Optional[int] = None,
    per_axis: int = 8,
    seed: int = 0,
    retries: int = 2,
) -> Tuple[np.ndarray, float]:
    """
    Least-squares SPD fit of u^* G u to rho_{p,Q}(u)^2; returns (G^{1/2}, kappa).

    Negative eigenvalues of the unconstrained fit are clipped. When kappa
    exceeds sqrt(N) the fit is retried with four times as many directions.
    """
    N = W.N
    D = 2 * N * N + 8 if count is None else count
    for attempt in range(retries + 1):
        dirs = unit_directions(N, D * 4**attempt, seed)
        target = rho(W, p, Q, dirs, per_axis)
        params, *_ = np.linalg.lstsq(_design(dirs), target**2, rcond=None)
        G = _assemble(params, N)
        eigvals, eigvecs = np.linalg.eigh(G)
        floor = 1e-12 * max(float(np.max(eigvals)), 1e-300)
        eigvals = np.maximum(eigvals, floor)
        A = (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T
        ratios = np.linalg.norm(dirs @ A.T, axis=-1) / target
        kappa = float(max(np.max(ratios), 1.0 / np.min(ratios)))
        if kappa <= math.sqrt(N) + 1e-9:
            return A, kappa
        logger.warning(
            "ellipsoid fit on cube %s has kappa=%.4g; retrying with %d directions",
            (Q.k, Q.l), kappa, D * 4 ** (attempt + 1),
        )
    raise EllipsoidFitError(f"ellipsoid fit on cube {(Q.k, Q.l)} failed: kappa={kappa:.4g}")


def reducing_operator(
    W: MatrixWeight,
    p: float,
    Q: TimeCube,
    method: str = "exact-p2",
    h: Optional[float] = None,
    seed: int = 0,
) -> np.ndarray:
    """
    SPD matrix A_Q for the cube Q.

    Args:
        W: matrix weight
        p: exponent
        Q: cube of the tiling
        method: "exact-p2" (p = 2 only) or "ellipsoid-fit"
        h: grid spacing the node count is tied to (8 nodes per axis when omitted)
        seed: seed of the random fitting directions

    Returns:
        N x N Hermitian positive definite matrix
    """
    per_axis = quadrature_nodes(Q.side, h)
    if method == "exact-p2":
        if p != 2.0:
            raise ParameterError("exact-p2 reducing operators require p = 2")
        average = weighted_cube_average(W, Q.midpoint, 0.5 * Q.side, per_axis)
        return matrix_power(average[None], 0.5)[0]
    if method == "ellipsoid-fit":
        return fit_ellipsoid(W, p, Q, per_axis=per_axis, seed=seed)[0]
    raise ParameterError(f"unknown reducing method '{method}' (known: {', '.join(METHODS)})")


@dataclass
class ReducingFamily:
    p: float
    method: str
    operators: Dict[CubeKey, np.ndarray] = field(default_factory=dict)
    cubes: Dict[CubeKey, TimeCube] = field(default_factory=dict)
    kappa: float = 1.0

    def __getitem__(self, key: CubeKey) -> np.ndarray:
        try:
            return self.operators[key]
        except KeyError:
            raise StructuralError(f"no reducing operator for cube {key}") from None

    def __contains__(self, key: CubeKey) -> bool:
        return key in self.operators

    def __len__(self) -> int:
        return len(self.operators)

    def keys(self) -> List[CubeKey]:
        return list(self.operators)


def build_reducing_family(
    W: MatrixWeight,
    p: float,
    params: CoveringParams,
    keys: Iterable[CubeKey],
    method: str = "exact-p2",
    h: Optional[float] = None,
    seed: int = 0,
    period: Optional[float] = None,
) -> ReducingFamily:
    """One reducing operator per cube; `period` selects the band lattice that tiles a box."""
    family = ReducingFamily(p=p, method=method)
    for k, l in keys:
        Q = cube(params, k, l, period)
        key = (Q.k, Q.l)
        if key in family:
            continue
        per_axis = quadrature_nodes(Q.side, h)
        if method == "ellipsoid-fit":
            A, kappa = fit_ellipsoid(W, p, Q, per_axis=per_axis, seed=seed)
            family.kappa = max(family.kappa, kappa)
        else:
            A = reducing_operator(W, p, Q, method, h, seed)
        family.operators[key] = A
        family.cubes[key] = Q
    logger.debug("built %d reducing operators (%s, p=%s)", len(family), method, p)
    return family


# ============ STRONG DOUBLING ============


def strong_doubling_bound(
    params: CoveringParams, Q: TimeCube, P: TimeCube, beta: float, p: float
) -> float:
    """max{(r_j/r_k)^{n/p}, (r_k/r_j)^{(beta-n)/p}} (1 + min(r_j, r_k)|x_Q - x_P|)^{beta/p}."""
    n = params.n
    r_j = params.cube_unit / Q.side
    r_k = params.cube_unit / P.side
    scale = max((r_j / r_k) ** (n / p), (r_k / r_j) ** ((beta - n) / p))
    distance = float(np.linalg.norm(Q.center - P.center))
    return scale * (1.0 + min(r_j, r_k) * distance) ** (beta / p)


def _sample_pairs(
    keys: Sequence[CubeKey], count: Optional[int], seed: int
) -> List[Tuple[CubeKey, CubeKey]]:
    total = len(keys) ** 2
    if count is None or count >= total:
        return [(a, b) for a in keys for b in keys]
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(keys), size=(count, 2))
    return [(keys[i], keys[j]) for i, j in picks]


def strong_doubling_check(
    family: ReducingFamily,
    beta: float,
    p: float,
    params: CoveringParams,
    pairs: Optional[Sequence[Tuple[CubeKey, CubeKey]]] = None,
    count: Optional[int] = 1000,
    seed: int = 0,
) -> StrongDoublingReport:
    """
    Fit the constant c in ||A_Q A_P^{-1}|| <= c * bound(Q, P) over sampled pairs.

    Also fits the constant of the doubling comparison
    ||A_Q A_P^{-1}||^p <= c t^beta |P| / |Q|, t the dilation factor of Q into P.
    """
    plan = list(pairs) if pairs is not None else _sample_pairs(family.keys(), count, seed)
    fitted = 0.0
    dilation = 0.0
    for q_key, p_key in plan:
        A_Q, A_P = family[q_key], family[p_key]
        try:
            inverse = np.linalg.inv(A_P)
        except np.linalg.LinAlgError as exc:
            raise StructuralError(f"reducing operator of {p_key} is singular") from exc
        lhs = float(spectral_norm(A_Q @ inverse))
        Q, P = family.cubes[q_key], family.cubes[p_key]
        fitted = max(fitted, lhs / strong_doubling_bound(params, Q, P, beta, p))
        t = dilation_factor(Q, P)
        dilation = max(dilation, lhs**p / (t**beta * P.volume / Q.volume))
    return StrongDoublingReport(
        fitted_constant=fitted, pairs=len(plan), dilation_constant=dilation
    )
