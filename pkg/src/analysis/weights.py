"""
Matrix weights W(x): generators, fractional powers and cube quadrature.

Every generator returns Hermitian positive definite N x N matrices at a stack
of points; fractional powers go through a batched spectral decomposition.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.models.schemas import WeightSpec
from src.utils.errors import DegenerateWeightError, ParameterError, QuadratureError, RegistryError

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

EIGEN_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class MatrixWeight:
    """W(x) evaluated on (P, n) point stacks, returning (P, N, N) matrices."""

    N: int
    evaluator: Evaluator
    description: str = "custom"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.asarray(self.evaluator(pts))
        if values.shape != (len(pts), self.N, self.N):
            raise ParameterError(
                f"weight '{self.description}' returned shape {values.shape}, "
                f"expected {(len(pts), self.N, self.N)}"
            )
        return values

    def power(
        self, points: np.ndarray, exponent: float, allow_singular: bool = False
    ) -> np.ndarray:
        """W(x)^exponent via eigh; non-positive eigenvalues raise DegenerateWeightError."""
        return matrix_power(self(points), exponent, allow_singular)

    def scalar_density(self, points: np.ndarray, p: float, direction: np.ndarray) -> np.ndarray:
        """|W^{1/p}(x) y|^p for a fixed vector y."""
        root = self.power(points, 1.0 / p)
        return np.linalg.norm(root @ np.asarray(direction, dtype=complex), axis=-1) ** p


def matrix_power(
    matrices: np.ndarray, exponent: float, allow_singular: bool = False
) -> np.ndarray:
    """
    Batched Hermitian power. With `allow_singular` and a positive exponent,
    zero eigenvalues are accepted (the power of a semidefinite matrix).
    """
    herm = 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))
    eigvals, eigvecs = np.linalg.eigh(herm)
    if not np.all(np.isfinite(eigvals)):
        raise DegenerateWeightError("weight is not finite at a sample point")
    if allow_singular and exponent > 0:
        scale = max(float(np.max(np.abs(eigvals))), 1.0)
        if np.any(eigvals < -1e-12 * scale):
            raise DegenerateWeightError("weight has a negative eigenvalue at a sample point")
        eigvals = np.clip(eigvals, 0.0, None)
    elif np.any(eigvals <= EIGEN_FLOOR):
        raise DegenerateWeightError("weight is not positive definite at a sample point")
    scaled = eigvecs * (eigvals ** exponent)[..., None, :]
    return scaled @ np.conj(np.swapaxes(eigvecs, -1, -2))


def spectral_norm(matrices: np.ndarray) -> np.ndarray:
    return np.linalg.norm(matrices, ord=2, axis=(-2, -1))


# ============ GENERATORS ============


def _radius(points: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points, axis=-1)


def _profile(points: np.ndarray, gamma: float, eps: float, base: str) -> np.ndarray:
    rho = _radius(points)
    if base == "bracket":
        return (1.0 + rho**2) ** (gamma / 2.0)
    with np.errstate(divide="ignore"):
        return (rho + eps) ** gamma


def constant(matrix: Sequence[Sequence[float]]) -> MatrixWeight:
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError("constant weight needs a square matrix")
    if not np.allclose(mat, mat.conj().T):
        raise ParameterError("constant weight must be Hermitian")
    if np.min(np.linalg.eigvalsh(mat)) <= 0:
        raise ParameterError("constant weight must be positive definite")
    N = mat.shape[0]
    return MatrixWeight(N, lambda pts: np.broadcast_to(mat, (len(pts), N, N)).copy(), "constant")


def identity(N: int = 1) -> MatrixWeight:
    return constant(np.eye(N))


def power(exponents: Sequence[float], eps: float = 0.0, base: str = "abs") -> MatrixWeight:
    """diag(|x|^gamma_i) (or <x>^gamma_i), |x| replaced by |x| + eps when eps > 0."""
    gammas = [float(g) for g in exponents]
    N = len(gammas)

    def evaluate(pts: np.ndarray) -> np.ndarray:
        out = np.zeros((len(pts), N, N), dtype=complex)
        for i, gamma in enumerate(gammas):
            out[:, i, i] = _profile(pts, gamma, eps, base)
        return out

    return MatrixWeight(N, evaluate, f"power{tuple(gammas)}")


def rotation(angle: float, N: int) -> np.ndarray:
    rot = np.eye(N)
    c, s = math.cos(angle), math.sin(angle)
    rot[:2, :2] = [[c, -s], [s, c]]
    return rot


def rotated_power(
    angle: float, exponents: Sequence[float], eps: float = 0.0, base: str = "abs"
) -> MatrixWeight:
    """R(angle) diag(|x|^gamma_i) R(angle)^T, rotating the first two coordinates."""
    inner = power(exponents, eps, base)
    if inner.N < 2:
        raise ParameterError("rotated_power needs at least two exponents")
    rot = rotation(angle, inner.N).astype(complex)
    return MatrixWeight(
        inner.N, lambda pts: rot @ inner(pts) @ rot.T, f"rotated_power({angle:g})"
    )


def constant_plus_power(
    matrix: Sequence[Sequence[float]],
    exponents: Sequence[float],
    scales: Optional[Sequence[float]] = None,
    eps: float = 0.0,
) -> MatrixWeight:
    """A + diag(s_i |x|^gamma_i)."""
    base = constant(matrix)
    gammas = [float(g) for g in exponents]
    factors = [1.0] * len(gammas) if scales is None else [float(s) for s in scales]
    if len(gammas) != base.N or len(factors) != base.N:
        raise ParameterError("exponents and scales must match the matrix size")

    def evaluate(pts: np.ndarray) -> np.ndarray:
        out = base(pts)
        for i, (gamma, scale) in enumerate(zip(gammas, factors)):
            if scale != 0.0:
                out[:, i, i] += scale * _profile(pts, gamma, eps, "abs")
        return out

    return MatrixWeight(base.N, evaluate, "constant_plus_power")


_SCALAR_EXPRESSIONS: Dict[str, Callable[[float, float], Callable[[np.ndarray], np.ndarray]]] = {
    "one": lambda gamma, eps: lambda pts: np.ones(len(pts)),
    "abs_power": lambda gamma, eps: lambda pts: _profile(pts, gamma, eps, "abs"),
    "bracket_power": lambda gamma, eps: lambda pts: _profile(pts, gamma, eps, "bracket"),
}


def scalar(expr: str, gamma: float = 0.0, eps: float = 0.0) -> MatrixWeight:
    if expr not in _SCALAR_EXPRESSIONS:
        raise RegistryError(f"unknown scalar weight '{expr}'")
    func = _SCALAR_EXPRESSIONS[expr](gamma, eps)
    return MatrixWeight(
        1, lambda pts: func(pts).astype(complex)[:, None, None], f"{expr}({gamma:g})"
    )


def dual_weight(W: MatrixWeight, p: float) -> MatrixWeight:
    """W^{-p'/p}, the weight of the dual space L^{p'}."""
    if p <= 1.0:
        raise ParameterError("the dual weight needs p > 1")
    exponent = -1.0 / (p - 1.0)
    return MatrixWeight(W.N, lambda pts: W.power(pts, exponent), f"dual({W.description})")


def from_spec(spec: WeightSpec) -> MatrixWeight:
    """Build a weight from its config-file description."""
    if spec.generator == "constant":
        return constant(spec.matrix if spec.matrix is not None else [[1.0]])
    if spec.generator == "power":
        return power(spec.exponents or [0.0], spec.eps, spec.base)
    if spec.generator == "rotated_power":
        return rotated_power(spec.angle, spec.exponents or [0.0, 0.0], spec.eps, spec.base)
    if spec.generator == "constant_plus_power":
        if spec.matrix is None or spec.exponents is None:
            raise ParameterError("constant_plus_power needs matrix and exponents")
        return constant_plus_power(spec.matrix, spec.exponents, spec.scales, spec.eps)
    if spec.generator == "scalar":
        return scalar(spec.expr or "one", spec.gamma, spec.eps)
    raise RegistryError(f"unknown weight generator '{spec.generator}'")


# ============ CUBE QUADRATURE ============


def midpoint_nodes(center: Sequence[float], halfside: float, per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and equal weights on R[center, halfside] = center + halfside [-1, 1]^n."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    t = -1.0 + (2.0 * np.arange(per_axis) + 1.0) / per_axis
    return _tensor(c, halfside, t, np.full(per_axis, 2.0 / per_axis))


def gauss_nodes(center: Sequence[float], halfside: float, per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes and weights on R[center, halfside]."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    t, w = np.polynomial.legendre.leggauss(per_axis)
    return _tensor(c, halfside, t, w)


def _tensor(
    center: np.ndarray, halfside: float, t: np.ndarray, w: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    n = len(center)
    mesh = np.meshgrid(*([t] * n), indexing="ij")
    nodes = center + halfside * np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([w] * n), indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1) * halfside**n
    return nodes, weights


def safe_power(
    W: MatrixWeight, nodes: np.ndarray, exponent: float, spacing: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    W^exponent at the nodes. A node set hitting a singularity is shifted once by
    half a spacing along every axis; a second failure is a quadrature error.
    """
    try:
        return nodes, W.power(nodes, exponent)
    except DegenerateWeightError:
        shifted = nodes + 0.5 * spacing
        logger.warning("weight singular at a quadrature node; shifting nodes by half a spacing")
        try:
            return shifted, W.power(shifted, exponent)
        except DegenerateWeightError as exc:
            raise QuadratureError("weight singular at shifted quadrature nodes") from exc


def weighted_cube_average(
    W: MatrixWeight, center: Sequence[float], halfside: float, per_axis: int
) -> np.ndarray:
    """(1/|Q|) int_Q W on a Gauss-Legendre rule."""
    nodes, weights = gauss_nodes(center, halfside, per_axis)
    values = W(nodes)
    volume = float(np.sum(weights))
    return np.einsum("p,pij->ij", weights, values) / volume


def unit_directions(N: int, count: int, seed: int = 0) -> np.ndarray:
    """
    Deterministic unit vectors in C^N: the basis, (e_a + e_b)/sqrt2 and
    (e_a + i e_b)/sqrt2 first, then seeded random directions.
    """
    dirs: List[np.ndarray] = [np.eye(N, dtype=complex)[a] for a in range(N)]
    for a in range(N):
        for b in range(a + 1, N):
            for phase in (1.0, 1j):
                v = np.zeros(N, dtype=complex)
                v[a], v[b] = 1.0, phase
                dirs.append(v / math.sqrt(2.0))
    rng = np.random.default_rng(seed)
    while len(dirs) < count:
        v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        dirs.append(v / np.linalg.norm(v))
    return np.stack(dirs[: max(count, N * N)])
