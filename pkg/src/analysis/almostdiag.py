"""
Almost-diagonal matrices on the (k, l) lattice.

Rows are indexed by (j, l) and columns by (k, m); a matrix acts on a
coefficient sequence s by t_{(j,l)} = sum a_{(j,l)(k,m)} s_{(k,m)}.
Membership in a class is tested by fitting the smallest C with
|a| <= C * bound over a finite window, and tracking C as the window grows.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from src.analysis.coefficients import CoeffSeq, IndexSpace, Key
from src.analysis.covering import cube_side, r_of_k
from src.analysis.weights import MatrixWeight, gauss_nodes
from src.models.schemas import AdParams, CoveringParams, ProbeReport, SmoothnessParams
from src.utils.errors import ParameterError, StructuralError, WindowError

logger = logging.getLogger(__name__)

BOUNDS = ("omega", "symmetric", "weighted")


@dataclass
class DecayMatrix:
    rows: IndexSpace
    cols: IndexSpace
    matrix: sparse.csr_matrix
    fitted: Optional[float] = None
    bound: Optional[str] = None

    def __post_init__(self) -> None:
        self.matrix = sparse.csr_matrix(self.matrix)
        if self.matrix.shape != (len(self.rows), len(self.cols)):
            raise StructuralError(
                f"matrix shape {self.matrix.shape} does not match the index spaces "
                f"({len(self.rows)}, {len(self.cols)})"
            )

    @classmethod
    def identity(cls, space: IndexSpace, scale: complex = 1.0) -> "DecayMatrix":
        return cls(space, space, sparse.identity(len(space), dtype=complex, format="csr") * scale)

    @classmethod
    def zeros(cls, rows: IndexSpace, cols: IndexSpace) -> "DecayMatrix":
        return cls(rows, cols, sparse.csr_matrix((len(rows), len(cols)), dtype=complex))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entry(self, row: Key, col: Key) -> complex:
        return complex(self.matrix[self.rows.index(row), self.cols.index(col)])

    def to_frame(self) -> pd.DataFrame:
        """Triplet records sorted by (row, column) key."""
        coo = self.matrix.tocoo()
        n = self.rows.params.n
        records = []
        for i, j, v in zip(coo.row, coo.col, coo.data):
            (jj, ll), (kk, mm) = self.rows.keys[i], self.cols.keys[j]
            record = {}
            for name, idx in (("j", jj), ("l", ll), ("k", kk), ("m", mm)):
                record.update({f"{name}{d}": idx[d] for d in range(n)})
            record["re"] = float(np.real(v))
            record["im"] = float(np.imag(v))
            records.append(record)
        columns = [f"{name}{d}" for name in "jlkm" for d in range(n)] + ["re", "im"]
        frame = pd.DataFrame(records, columns=columns)
        return frame.sort_values(columns[:-2], kind="mergesort").reset_index(drop=True)


# ============ ENVELOPES ============


def _ratio(rows: IndexSpace, cols: IndexSpace) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rj = rows.radii[:, None]
    rk = cols.radii[None, :]
    return rj, rk, rk / rj


def omega_weight(
    params: AdParams, covering: CoveringParams, row: Key, col: Key
) -> float:
    """omega^s_{(j,l)(k,m)}(J) evaluated directly from r, xi and x of both keys."""
    (j, l), (k, m) = row, col
    r_j = r_of_k(covering.alpha, j)
    r_k = r_of_k(covering.alpha, k)
    xi_j = np.asarray(j, dtype=float) * r_j
    xi_k = np.asarray(k, dtype=float) * r_k
    x_j = cube_side(covering, j) * np.asarray(l, dtype=float)
    x_k = cube_side(covering, k) * np.asarray(m, dtype=float)
    J, delta, s, n = params.J, params.delta, params.s, params.n
    ratio = r_k / r_j
    c = min((1.0 / ratio) ** (J + delta), ratio**delta) * (
        1.0 + float(np.linalg.norm(xi_k - xi_j)) / max(r_k, r_j)
    ) ** (-J - delta)
    return (
        ratio ** (s + n / 2.0)
        * min((1.0 / ratio) ** (J + delta / 2.0), ratio ** (delta / 2.0))
        * c
        * (1.0 + min(r_k, r_j) * float(np.linalg.norm(x_k - x_j))) ** (-J - delta)
    )


def omega_bound(params: AdParams, rows: IndexSpace, cols: IndexSpace) -> np.ndarray:
    J, delta, s, n = params.J, params.delta, params.s, params.n
    rj, rk, ratio = _ratio(rows, cols)
    c = np.minimum((1.0 / ratio) ** (J + delta), ratio**delta) * (
        1.0 + rows.frequency_distance(cols) / np.maximum(rj, rk)
    ) ** (-J - delta)
    return (
        ratio ** (s + n / 2.0)
        * np.minimum((1.0 / ratio) ** (J + delta / 2.0), ratio ** (delta / 2.0))
        * c
        * (1.0 + np.minimum(rj, rk) * rows.space_distance(cols)) ** (-J - delta)
    )


def symmetric_bound(params: AdParams, rows: IndexSpace, cols: IndexSpace) -> np.ndarray:
    """min{(r_j/r_k)^M, (r_k/r_j)^M} (1 + min r |x - y|)^-J (1 + |xi_k - xi_j| / max r)^-J."""
    rj, rk, ratio = _ratio(rows, cols)
    return (
        np.minimum(ratio, 1.0 / ratio) ** params.M
        * (1.0 + np.minimum(rj, rk) * rows.space_distance(cols)) ** (-params.J)
        * (1.0 + rows.frequency_distance(cols) / np.maximum(rj, rk)) ** (-params.J)
    )


def weighted_bound(params: AdParams, rows: IndexSpace, cols: IndexSpace) -> np.ndarray:
    """The symmetric bound with scale exponent M + K and space exponent J + beta/p."""
    rj, rk, ratio = _ratio(rows, cols)
    return (
        np.minimum(ratio, 1.0 / ratio) ** (params.M + params.K)
        * (1.0 + np.minimum(rj, rk) * rows.space_distance(cols))
        ** (-params.J - params.doubling / params.p)
        * (1.0 + rows.frequency_distance(cols) / np.maximum(rj, rk)) ** (-params.J)
    )


_BOUND_FUNCTIONS = {"omega": omega_bound, "symmetric": symmetric_bound, "weighted": weighted_bound}


def omega_matrix(params: AdParams, space: IndexSpace, cols: Optional[IndexSpace] = None) -> DecayMatrix:
    target = space if cols is None else cols
    return DecayMatrix(space, target, sparse.csr_matrix(omega_bound(params, space, target)))


# ============ MEMBERSHIP ============


@dataclass
class MembershipFit:
    constant: float
    bound: str
    hypotheses: bool
    messages: List[str] = field(default_factory=list)


def _hypotheses(params: AdParams, bound: str) -> Tuple[bool, List[str]]:
    messages = []
    threshold = params.scalar_threshold
    if bound == "omega":
        ok = params.J >= threshold
        if not ok:
            messages.append(f"J={params.J} below n/min(1,q)={threshold:g}")
        return ok, messages
    ok = params.J > threshold
    if not ok:
        messages.append(f"J={params.J} must exceed n/min(1,q)={threshold:g}")
    m_floor = max(2.0 * params.J, abs(params.s) + params.n / 2.0)
    if params.M <= m_floor:
        ok = False
        messages.append(f"M={params.M} must exceed max(2J, |s|+n/2)={m_floor:g}")
    return ok, messages


def fit_membership(A: DecayMatrix, params: AdParams, bound: str = "symmetric") -> MembershipFit:
    """Smallest C with |a| <= C * bound on the nonzero entries of A."""
    if bound not in _BOUND_FUNCTIONS:
        raise ParameterError(f"unknown bound '{bound}' (known: {', '.join(BOUNDS)})")
    if len(A.rows) == 0 or len(A.cols) == 0:
        raise WindowError("membership needs a nonempty window")
    envelope = _BOUND_FUNCTIONS[bound](params, A.rows, A.cols)
    coo = A.matrix.tocoo()
    ratios = np.abs(coo.data) / envelope[coo.row, coo.col]
    constant = float(np.max(ratios)) if len(ratios) else 0.0
    ok, messages = _hypotheses(params, bound)
    A.fitted, A.bound = constant, bound
    return MembershipFit(constant=constant, bound=bound, hypotheses=ok, messages=messages)


def ad_membership_scalar(A: DecayMatrix, params: AdParams, bound: str = "symmetric") -> MembershipFit:
    if bound == "weighted":
        raise ParameterError("the scalar class uses the omega or symmetric bound")
    return fit_membership(A, params, bound)


def ad_membership_weighted(A: DecayMatrix, params: AdParams) -> MembershipFit:
    return fit_membership(A, params, "weighted")


def membership_trend(
    matrices: Sequence[DecayMatrix], params: AdParams, bound: str = "symmetric"
) -> Tuple[List[float], float]:
    """Fitted constants over growing windows and the drift of the last relative to the first."""
    constants = [fit_membership(A, params, bound).constant for A in matrices]
    drift = abs(constants[-1] - constants[0]) / constants[0] if constants[0] else math.inf
    return constants, drift


# ============ OPERATORS ============


def apply(A: DecayMatrix, c: CoeffSeq) -> CoeffSeq:
    """Exact sparse product, componentwise over C^N."""
    escaped = [key for key in c.support() if key not in A.cols]
    if escaped:
        raise WindowError(f"coefficient support leaves the matrix window at {escaped[0]}")
    vector = c.to_vector(A.cols)
    result = (A.matrix @ vector.T).T
    return CoeffSeq.from_vector(c.params, A.rows, result)


def compose(A: DecayMatrix, B: DecayMatrix) -> DecayMatrix:
    if A.cols.keys != B.rows.keys:
        raise StructuralError("inner index spaces of the product differ")
    return DecayMatrix(A.rows, B.cols, A.matrix @ B.matrix)


def boundedness_probe(
    A: DecayMatrix,
    sp: SmoothnessParams,
    trials: int = 50,
    seed: int = 0,
    W: Optional[MatrixWeight] = None,
    density: float = 0.3,
    norm: Optional[Callable[[CoeffSeq], float]] = None,
) -> ProbeReport:
    """
    Ratios ||A c||_m / ||c||_m over random finite sequences supported in the window.

    The scalar m-norm is used when no weight is given; otherwise the matrix
    weighted m-norm of W.
    """
    from src.analysis.norms import m_discrete_norm, scalar_m_norm

    if norm is None:
        if W is None:
            def norm(seq: CoeffSeq) -> float:
                return scalar_m_norm(sp, seq)
        else:
            def norm(seq: CoeffSeq) -> float:
                return m_discrete_norm(W, sp, seq).value

    rng = np.random.default_rng(seed)
    N = 1 if W is None else W.N
    keys = A.cols.keys
    ratios = []
    for _ in range(trials):
        c = CoeffSeq.random(A.cols.params, N, keys, rng, density, A.cols.period)
        base = norm(c)
        ratios.append(norm(apply(A, c)) / base if base else 0.0)
    return ProbeReport(name="boundedness", ratios=ratios)


# ============ LOCALIZATION ============


def _pieces(n: int, halfside: float, levels: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Boxes (lo, hi) covering R^n up to |y|_inf < halfside 2^levels, split at 0."""
    pieces = []
    inner = [(-halfside, 0.0), (0.0, halfside)]
    for corner in np.array(np.meshgrid(*([range(2)] * n), indexing="ij")).reshape(n, -1).T:
        pieces.append(
            (np.array([inner[i][0] for i in corner]), np.array([inner[i][1] for i in corner]))
        )
    for m in range(1, levels + 1):
        a, b = halfside * 2.0 ** (m - 1), halfside * 2.0**m
        bands = [(-b, -a), (-a, a), (a, b)]
        for combo in np.array(np.meshgrid(*([range(3)] * n), indexing="ij")).reshape(n, -1).T:
            if np.all(combo == 1):
                continue
            pieces.append(
                (np.array([bands[i][0] for i in combo]), np.array([bands[i][1] for i in combo]))
            )
    return pieces


def _integrate(func, lo: np.ndarray, hi: np.ndarray, per_axis: int) -> float:
    center = 0.5 * (lo + hi)
    halves = 0.5 * (hi - lo)
    t, w = np.polynomial.legendre.leggauss(per_axis)
    mesh = np.meshgrid(*([t] * len(lo)), indexing="ij")
    nodes = center + halves * np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([w] * len(lo)), indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1) * np.prod(halves)
    return math.fsum(weights * func(nodes))


def le_sq_check(
    w: Callable[[np.ndarray], np.ndarray],
    beta: float,
    covering: CoveringParams,
    j,
    l,
    L: float,
    levels: int = 40,
    per_axis: int = 16,
) -> float:
    """
    int w(x) (1 + r_j |x - x_{j,l}|)^-L dx / int_{Q(j,l)} w dx.

    The left side is integrated over dyadic box annuli around x_{j,l}; the
    annuli reach 2^levels cube sides, beyond which the kernel tail is dropped.
    """
    if L <= beta:
        raise ParameterError(f"the localization estimate needs L > beta (L={L}, beta={beta})")
    jj = tuple(int(v) for v in np.atleast_1d(j))
    ll = tuple(int(v) for v in np.atleast_1d(l))
    r = r_of_k(covering.alpha, jj)
    side = cube_side(covering, jj)
    x0 = side * np.asarray(ll, dtype=float)

    def integrand(pts: np.ndarray) -> np.ndarray:
        dist = np.linalg.norm(pts - x0, axis=-1)
        return np.asarray(w(pts), dtype=float) * (1.0 + r * dist) ** (-L)

    lhs = 0.0
    for lo, hi in _pieces(covering.n, side, levels):
        lhs += _integrate(integrand, x0 + lo, x0 + hi, per_axis)
    nodes, weights = gauss_nodes(x0 + 0.5 * side, 0.5 * side, per_axis)
    rhs = math.fsum(weights * np.asarray(w(nodes), dtype=float))
    if rhs <= 0.0:
        raise ParameterError("w has no mass on the cube")
    return lhs / rhs
