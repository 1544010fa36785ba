"""
Fourier multipliers m(D) f = F^-1(m hat f), acting componentwise on C^N.

Symbols come from a small registry (constant, bracket_power, smooth_compact)
and multiply into products whose derivatives follow the Leibniz rule.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from src.analysis.almostdiag import DecayMatrix, ad_membership_weighted
from src.analysis.bapu import BapuSystem
from src.analysis.coefficients import IndexSpace
from src.analysis.covering import Index
from src.analysis.frame import AtomSystem, atom_spectra
from src.analysis.grid import Grid, VectorSignal, forward_ft, inverse_ft
from src.analysis.norms import m_continuous_norm
from src.analysis.weights import MatrixWeight
from src.models.schemas import AdParams, ProbeReport, SmoothnessParams, SymbolSpec
from src.utils.errors import ParameterError, RegistryError, SymbolError

logger = logging.getLogger(__name__)

MAX_ORDER = 4

Multi = Tuple[int, ...]


def _points(xi) -> np.ndarray:
    pts = np.asarray(xi, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _multi_indices(n: int, order: int) -> List[Multi]:
    return [eta for eta in itertools.product(range(order + 1), repeat=n) if sum(eta) == order]


class Symbol:
    """A smooth function m(xi) of order b with derivative evaluators."""

    name: str = "symbol"
    order: float = 0.0

    def value(self, xi) -> np.ndarray:
        raise NotImplementedError

    def _derivative(self, eta: Multi, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, eta: Sequence[int], xi) -> np.ndarray:
        """d^eta m at the rows of xi, shape (P,)."""
        pts = _points(xi)
        eta = tuple(int(e) for e in eta)
        if len(eta) != pts.shape[1]:
            raise SymbolError(f"multi-index {eta} does not match dimension {pts.shape[1]}")
        if sum(eta) > MAX_ORDER:
            raise SymbolError(f"derivatives of order {sum(eta)} above {MAX_ORDER} are not available")
        values = self.value(pts) if not any(eta) else self._derivative(eta, pts)
        if not np.all(np.isfinite(values)):
            raise SymbolError(f"{self.name}: non-finite derivative {eta}")
        return values

    def on_grid(self, grid: Grid) -> np.ndarray:
        xi = np.stack(grid.frequency_mesh(), axis=-1).reshape(-1, grid.n)
        return self.value(xi).reshape(grid.shape)

    def __mul__(self, other: "Symbol") -> "Symbol":
        return ProductSymbol(self, other)


@dataclass
class ConstantSymbol(Symbol):
    constant: float = 1.0
    name: str = "constant"
    order: float = 0.0

    def value(self, xi) -> np.ndarray:
        return np.full(len(_points(xi)), float(self.constant))

    def _derivative(self, eta: Multi, xi: np.ndarray) -> np.ndarray:
        return np.zeros(len(xi))


@dataclass
class BracketPower(Symbol):
    """<xi>^b with closed-form derivatives as sums of c xi^e (1 + |xi|^2)^g."""

    b: float = 0.0
    name: str = "bracket_power"
    _terms: Dict[Multi, Dict[Tuple[Multi, float], float]] = field(
        default_factory=dict, repr=False, compare=False
    )

    @property
    def order(self) -> float:  # type: ignore[override]
        return self.b

    def value(self, xi) -> np.ndarray:
        pts = _points(xi)
        return (1.0 + np.sum(pts**2, axis=1)) ** (self.b / 2.0)

    def terms(self, eta: Multi) -> Dict[Tuple[Multi, float], float]:
        if eta in self._terms:
            return self._terms[eta]
        n = len(eta)
        terms: Dict[Tuple[Multi, float], float] = {((0,) * n, self.b / 2.0): 1.0}
        for d, count in enumerate(eta):
            for _ in range(count):
                step: Dict[Tuple[Multi, float], float] = {}
                for (e, g), c in terms.items():
                    if e[d]:
                        key = (e[:d] + (e[d] - 1,) + e[d + 1 :], g)
                        step[key] = step.get(key, 0.0) + c * e[d]
                    if g:
                        key = (e[:d] + (e[d] + 1,) + e[d + 1 :], g - 1.0)
                        step[key] = step.get(key, 0.0) + 2.0 * g * c
                terms = step
        self._terms[eta] = terms
        return terms

    def _derivative(self, eta: Multi, xi: np.ndarray) -> np.ndarray:
        base = 1.0 + np.sum(xi**2, axis=1)
        total = np.zeros(len(xi))
        for (e, g), c in self.terms(eta).items():
            monomial = np.prod([xi[:, d] ** p for d, p in enumerate(e)], axis=0)
            total += c * monomial * base**g
        return total


def _finite_difference(
    func: Callable[[np.ndarray], np.ndarray], eta: Multi, xi: np.ndarray, step: float
) -> np.ndarray:
    """Tensor central differences; nodes at (order/2 - j) * step per axis."""
    total = np.zeros(len(xi))
    for js in itertools.product(*[range(e + 1) for e in eta]):
        weight = 1.0
        shift = np.zeros(xi.shape[1])
        for d, (e, j) in enumerate(zip(eta, js)):
            weight *= (-1.0) ** j * math.comb(e, j)
            shift[d] = (0.5 * e - j) * step
        total += weight * func(xi + shift)
    return total / step ** sum(eta)


@dataclass
class SmoothCompact(Symbol):
    """exp(1 - 1/(1 - |xi/R|^2)) inside the ball of radius R, 0 outside."""

    radius: float = 1.0
    name: str = "smooth_compact"
    order: float = 0.0

    def value(self, xi) -> np.ndarray:
        rho2 = np.sum(_points(xi) ** 2, axis=1) / self.radius**2
        out = np.zeros(len(rho2))
        inside = rho2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        return out

    def _derivative(self, eta: Multi, xi: np.ndarray) -> np.ndarray:
        return _finite_difference(self.value, eta, xi, 1e-3 * self.radius)


@dataclass
class ProductSymbol(Symbol):
    first: Symbol = field(default_factory=ConstantSymbol)
    second: Symbol = field(default_factory=ConstantSymbol)

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"{self.first.name}*{self.second.name}"

    @property
    def order(self) -> float:  # type: ignore[override]
        return self.first.order + self.second.order

    def value(self, xi) -> np.ndarray:
        return self.first.value(xi) * self.second.value(xi)

    def _derivative(self, eta: Multi, xi: np.ndarray) -> np.ndarray:
        total = np.zeros(len(xi))
        for gamma in itertools.product(*[range(e + 1) for e in eta]):
            rest = tuple(e - g for e, g in zip(eta, gamma))
            coefficient = math.prod(math.comb(e, g) for e, g in zip(eta, gamma))
            total += coefficient * self.first.derivative(gamma, xi) * self.second.derivative(rest, xi)
        return total


# ============ REGISTRY ============

_REGISTRY: Dict[str, Callable[[SymbolSpec], Symbol]] = {
    "constant": lambda spec: ConstantSymbol(spec.value),
    "bracket_power": lambda spec: BracketPower(spec.b),
    "smooth_compact": lambda spec: SmoothCompact(spec.radius),
}


def register(name: str, factory: Callable[[SymbolSpec], Symbol]) -> None:
    _REGISTRY[name] = factory


def available() -> List[str]:
    return sorted(_REGISTRY)


def from_spec(spec: SymbolSpec) -> Symbol:
    if spec.id not in _REGISTRY:
        raise RegistryError(f"unknown symbol '{spec.id}' (known: {', '.join(available())})")
    return _REGISTRY[spec.id](spec)


# ============ CLASS CHECK ============


@dataclass
class SymbolClassReport:
    symbol: str
    alpha: float
    b: float
    sups: Dict[int, float]
    stable: Dict[int, bool]

    @property
    def passed(self) -> bool:
        return all(math.isfinite(v) for v in self.sups.values()) and all(self.stable.values())


def _directions(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    axes = np.eye(n)
    diagonal = np.ones((1, n)) / math.sqrt(n)
    return np.concatenate([axes, -axes, diagonal, -diagonal])


def symbol_class_check(
    m: Symbol,
    alpha: float,
    b: float,
    R: int,
    n: int = 1,
    limit: float = 1e3,
    samples: int = 2000,
    tol: float = 0.05,
) -> SymbolClassReport:
    """
    sup_xi <xi>^(alpha |eta| - b) |d^eta m(xi)| per order |eta| <= R on log-spaced radii.

    An order is scale-stable when the sup up to `limit` exceeds the sup up to
    limit/2 by at most `tol` (relative).
    """
    if R > MAX_ORDER:
        raise SymbolError(f"order {R} above the supported {MAX_ORDER}")
    radii = np.concatenate([[0.0], np.geomspace(1e-3, limit, samples)])
    dirs = _directions(n)
    xi = (radii[:, None, None] * dirs[None]).reshape(-1, n)
    rho = np.repeat(radii, len(dirs))
    bracket = np.sqrt(1.0 + rho**2)
    sups, stable = {}, {}
    for order in range(R + 1):
        largest = np.zeros(len(xi))
        for eta in _multi_indices(n, order):
            largest = np.maximum(largest, np.abs(m.derivative(eta, xi)))
        scaled = bracket ** (alpha * order - b) * largest
        full = float(np.max(scaled))
        half = float(np.max(scaled[rho <= 0.5 * limit]))
        sups[order] = full
        stable[order] = full <= (1.0 + tol) * half
    report = SymbolClassReport(symbol=m.name, alpha=alpha, b=b, sups=sups, stable=stable)
    if not report.passed:
        logger.warning("symbol %s fails the class check: %s", m.name, sups)
    return report


# ============ OPERATORS ============


def apply_multiplier(m: Symbol, f: VectorSignal) -> VectorSignal:
    spectrum = forward_ft(f)
    return inverse_ft(spectrum.with_values(spectrum.values * m.on_grid(f.grid)[None]))


def multiplier_gram(
    system: AtomSystem,
    m: Symbol,
    b: float,
    rows: IndexSpace,
    cols: Optional[IndexSpace] = None,
    ad_params: Optional[AdParams] = None,
    tol: float = 0.0,
) -> DecayMatrix:
    """
    Entries <xi_k>^-b <m(D) phi_{k,l}, phi_{j,m}> with rows (j, m) and columns (k, l).

    This is the matrix of c -> analyze(<xi_k>^-b m(D) synthesize(c)). With
    `ad_params` the weighted almost-diagonal constant is fitted onto the result.
    """
    cols = rows if cols is None else cols
    grid = system.grid
    symbol = m.on_grid(grid).ravel()
    dense = grid.dxi**grid.n * (
        np.conj(atom_spectra(system, rows)) @ (atom_spectra(system, cols) * symbol[None]).T
    )
    brackets = np.sqrt(1.0 + np.sum(cols.frequencies**2, axis=1))
    dense = dense * brackets[None, :] ** (-b)
    if tol > 0:
        dense[np.abs(dense) <= tol] = 0.0
    matrix = DecayMatrix(rows, cols, dense)
    if ad_params is not None:
        fit = ad_membership_weighted(matrix, ad_params)
        logger.info("multiplier %s: weighted constant %.4g", m.name, fit.constant)
    return matrix


@dataclass(frozen=True)
class GramDecayFit:
    k: Index
    j: Index
    exponent: float
    constant: float
    distances: Tuple[float, ...]
    values: Tuple[float, ...]


def gram_decay_fit(
    A: DecayMatrix, k: Index, j: Index, floor: float = 1e-13, dmin: int = 1
) -> GramDecayFit:
    """
    Fit max |a_{(j,m)(k,l)}| ~ C (1 + |l - m|)^-e between the bands j (rows) and k (columns).

    |l - m| is the lattice distance min(r) |x - y| / (pi/a), wrapped to the box period
    when the index space carries one. The fitted values are the nonincreasing envelope
    max_{d' >= d} of the per-distance peaks over d >= dmin.
    """
    kk, jj = tuple(k), tuple(j)
    row_mask = np.array([key[0] == jj for key in A.rows.keys])
    col_mask = np.array([key[0] == kk for key in A.cols.keys])
    if not row_mask.any() or not col_mask.any():
        raise ParameterError(f"bands j={jj}, k={kk} are not both in the window")
    block = np.abs(A.dense()[np.ix_(row_mask, col_mask)])
    params = A.rows.params
    rmin = np.minimum(A.rows.radii[row_mask][:, None], A.cols.radii[col_mask][None, :])
    lattice = np.rint(rmin * A.rows.space_distance(A.cols)[np.ix_(row_mask, col_mask)] / params.cube_unit)
    cutoff = floor * float(np.max(block)) if block.size else 0.0
    steps = [d for d in np.unique(lattice) if d >= max(1, dmin)]
    peaks = np.array([np.max(block[lattice == d]) for d in steps], dtype=float)
    envelope = np.maximum.accumulate(peaks[::-1])[::-1] if len(peaks) else peaks
    distances, values = [], []
    for d, peak in zip(steps, envelope):
        if peak > cutoff:
            distances.append(float(d))
            values.append(float(peak))
    if len(values) < 2:
        raise ParameterError(f"fewer than two resolvable distances between j={jj} and k={kk}")
    x = np.log1p(np.asarray(distances))[:, None]
    model = LinearRegression().fit(x, np.log(np.asarray(values)))
    return GramDecayFit(
        k=kk,
        j=jj,
        exponent=float(-model.coef_[0]),
        constant=float(math.exp(model.intercept_)),
        distances=tuple(distances),
        values=tuple(values),
    )


def bessel_equivalence_experiment(
    system: BapuSystem,
    W: MatrixWeight,
    sp: SmoothnessParams,
    b: float,
    corpus: Sequence[VectorSignal],
) -> ProbeReport:
    """Ratios ||<D>^b g||_{M(alpha, s)} / ||g||_{M(alpha, s + b)} over the corpus."""
    lifted = sp.model_copy(update={"s": sp.s + b})
    bessel = BracketPower(b)
    ratios = []
    for g in corpus:
        base = m_continuous_norm(system, W, lifted, g).value
        image = m_continuous_norm(system, W, sp, g, symbol=bessel).value
        ratios.append(image / base if base else 0.0)
    logger.info("Bessel b=%g: ratios in [%.4g, %.4g]", b, min(ratios), max(ratios))
    return ProbeReport(name=f"bessel b={b:g}", ratios=ratios)
