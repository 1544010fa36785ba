"""
Weighted Lebesgue, modulation and sequence norms and the probes comparing them.

Band contributions are always reduced in band order (increasing |k|,
lexicographic ties) so that identical inputs give bit-identical values.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from src.analysis.bapu import BapuSystem, interior_keys
from src.analysis.coefficients import CoeffSeq
from src.analysis.covering import Index, band_order, band_side, lattice_window, r_of_k
from src.analysis.frame import AtomSystem, analyze, synthesize
from src.analysis.grid import (
    Grid,
    SpectralSignal,
    VectorSignal,
    evaluate_on_lattice,
    forward_ft,
    inverse_ft,
)
from src.analysis.reducing import ReducingFamily, quadrature_nodes
from src.analysis.weights import MatrixWeight, gauss_nodes
from src.models.schemas import BandContribution, NormReport, ProbeReport, SmoothnessParams
from src.utils.errors import ParameterError, ResolutionError, StructuralError

logger = logging.getLogger(__name__)

WINDOWS = ("psi", "theta")
MAX_SEMINORM_ORDER = 4


def lq_aggregate(values: Sequence[float], q: float) -> float:
    """l_q (quasi-)norm of nonnegative values; q = inf is the maximum."""
    if q <= 0:
        raise ParameterError("q must be positive")
    if not values:
        return 0.0
    if math.isinf(q):
        return float(max(values))
    return math.fsum(v**q for v in values) ** (1.0 / q)


def _report(
    contributions: Dict[Index, float], q: float, norm: str, window: Optional[str] = None
) -> NormReport:
    ordered = band_order(contributions)
    values = [contributions[k] for k in ordered]
    return NormReport(
        value=lq_aggregate(values, q),
        contributions=[BandContribution(k=k, value=contributions[k]) for k in ordered],
        norm=norm,
        window=window,
    )


# ============ CONTINUOUS NORMS ============


def lp_w_norm(W: MatrixWeight, p: float, f: VectorSignal) -> float:
    """(h^n sum_j |W^{1/p}(x_j) f(x_j)|^p)^{1/p}."""
    if p < 1.0:
        raise ParameterError(f"L^p(W) needs p >= 1, got {p}")
    if W.N != f.n_components:
        raise StructuralError(f"weight acts on C^{W.N}, signal has {f.n_components} components")
    vectors = f.values.reshape(f.n_components, -1).T
    if not np.any(vectors):
        return 0.0
    root = W.power(f.grid.points(), 1.0 / p, allow_singular=True)
    images = np.einsum("pab,pb->pa", root, vectors)
    density = np.linalg.norm(images, axis=-1) ** p
    return (f.grid.cell_volume * math.fsum(density)) ** (1.0 / p)


def band_pass(
    system: BapuSystem, f: VectorSignal, k: Index, window: str = "psi", symbol=None
) -> VectorSignal:
    """window_k(D) f, optionally composed with a multiplier symbol m(D)."""
    spectrum = forward_ft(f)
    return _band_from_spectrum(system, spectrum, k, window, symbol)


def _band_from_spectrum(
    system: BapuSystem, spectrum: SpectralSignal, k: Index, window: str, symbol
) -> VectorSignal:
    grid = spectrum.grid
    if window not in WINDOWS:
        raise ParameterError(f"unknown window '{window}' (known: {', '.join(WINDOWS)})")
    factor = system.on_grid(grid, k, window)
    if symbol is not None:
        factor = factor * symbol.on_grid(grid)
    return inverse_ft(spectrum.with_values(spectrum.values * factor[None]))


def m_continuous_norm(
    system: BapuSystem,
    W: MatrixWeight,
    sp: SmoothnessParams,
    f: VectorSignal,
    window: str = "psi",
    symbol=None,
) -> NormReport:
    """
    ||{r_k^s ||window_k(D) f||_{L^p(W)}}_k||_{l_q} over the truncated lattice.

    Args:
        system: BAPU system providing psi_k / theta_k
        W: matrix weight
        sp: smoothness parameters (alpha, s, p, q)
        f: signal on the grid
        window: "psi" or "theta"
        symbol: optional multiplier applied spectrally before band-passing
    """
    spectrum = forward_ft(f)
    contributions = {}
    for k in system.keys:
        piece = _band_from_spectrum(system, spectrum, k, window, symbol)
        r = float(system.radii[system.position(k)])
        contributions[k] = r**sp.s * lp_w_norm(W, sp.p, piece)
    return _report(contributions, sp.q, "M", window)


# ============ SEQUENCE NORMS ============


def _cube_mass(W: MatrixWeight, p: float, Q, vector: np.ndarray, per_axis: int) -> float:
    """int_Q |W^{1/p}(t) s|^p dt on Gauss-Legendre nodes."""
    nodes, weights = gauss_nodes(Q.midpoint, 0.5 * Q.side, per_axis)
    root = W.power(nodes, 1.0 / p, allow_singular=True)
    density = np.linalg.norm(root @ vector, axis=-1) ** p
    return math.fsum(weights * density)


def m_discrete_norm(
    W: MatrixWeight, sp: SmoothnessParams, c: CoeffSeq, h: Optional[float] = None
) -> NormReport:
    """
    ||{r_k^s (sum_l |Q|^{-p/2} int_Q |W^{1/p}(t) s_{k,l}|^p dt)^{1/p}}_k||_{l_q}.

    `h` ties the node count to a grid spacing; cubes narrower than 2h are rejected.
    """
    params = c.params
    contributions: Dict[Index, float] = {}
    for k in c.keys():
        side = c.side(k)
        if h is not None and side < 2.0 * h:
            raise ResolutionError(f"cube side {side:.4g} of band k={k} below two grid spacings")
        per_axis = quadrature_nodes(side, h)
        volume = side**params.n
        total = []
        for _, l, vector in _block_entries(c, k):
            if not np.any(vector):
                continue
            Q = c.cube(k, l)
            total.append(volume ** (-sp.p / 2.0) * _cube_mass(W, sp.p, Q, vector, per_axis))
        r = r_of_k(params.alpha, k)
        contributions[k] = r**sp.s * math.fsum(total) ** (1.0 / sp.p)
    return _report(contributions, sp.q, "m")


def _block_entries(c: CoeffSeq, k: Index) -> Iterable[Tuple[Index, Index, np.ndarray]]:
    block = c.blocks[k]
    for pos, l in zip(itertools.product(*[range(len(a)) for a in block.axes]), block.keys()):
        yield k, l, block.values[(slice(None),) + pos]


def scalar_m_norm(sp: SmoothnessParams, t: CoeffSeq) -> float:
    """
    Unweighted sequence norm ||{r_k^s (sum_l |Q|^{1 - p/2} |t_{k,l}|^p)^{1/p}}||_{l_q}.

    Vector entries enter through their Euclidean length.
    """
    params = t.params
    contributions = {}
    for k in t.keys():
        volume = t.side(k) ** params.n
        block = t.blocks[k]
        lengths = np.linalg.norm(block.values, axis=0).ravel()
        inner = volume ** (1.0 - sp.p / 2.0) * math.fsum(lengths**sp.p)
        contributions[k] = r_of_k(params.alpha, k) ** sp.s * inner ** (1.0 / sp.p)
    return _report(contributions, sp.q, "m-scalar").value


def reduce_sequence(family: ReducingFamily, c: CoeffSeq) -> CoeffSeq:
    """t_{k,l} = |A_{Q(k,l)} s_{k,l}| as a one-component sequence."""
    entries = {}
    for k, l, vector in c.entries():
        if not np.any(vector):
            continue
        entries[(k, l)] = [np.linalg.norm(family[(k, l)] @ vector)]
    if not entries:
        return CoeffSeq(c.params, 1, period=c.period)
    return CoeffSeq.from_entries(c.params, 1, entries, c.period)


def m_reducing_norm(family: ReducingFamily, sp: SmoothnessParams, c: CoeffSeq) -> NormReport:
    """
    ||{r_k^s (sum_l |Q|^{-p/2} int_Q |A_Q s_{k,l}|^p dt)^{1/p}}||_{l_q}, the discrete norm with
    W frozen to A_Q^p on each cube. Equals scalar_m_norm(reduce_sequence(family, c)).
    """
    params = c.params
    contributions: Dict[Index, float] = {}
    for k in c.keys():
        volume = c.side(k) ** params.n
        total = []
        for _, l, vector in _block_entries(c, k):
            if not np.any(vector):
                continue
            length = float(np.linalg.norm(family[(k, l)] @ vector))
            total.append(volume ** (-sp.p / 2.0) * volume * length**sp.p)
        contributions[k] = r_of_k(params.alpha, k) ** sp.s * math.fsum(total) ** (1.0 / sp.p)
    return _report(contributions, sp.q, "m-reducing")


# ============ SAMPLING INEQUALITY ============


@dataclass(frozen=True, eq=False)
class SamplingQuadrature:
    """
    Gauss-Legendre nodes on every cube of one band lattice with W^{1/p} precomputed
    at each node, so many signals can be tested against one band.
    """

    grid: Grid
    p: float
    points: Tuple[np.ndarray, ...]
    weights: np.ndarray
    roots: np.ndarray

    @property
    def cubes(self) -> int:
        return self.roots.shape[0]

    def samples(self, g: VectorSignal) -> np.ndarray:
        """g at the lattice points, shape (cubes, N) in C order of the l ranges."""
        result = evaluate_on_lattice(forward_ft(g), self.points)
        return result.reshape(result.shape[0], -1).T


def sampling_quadrature(
    W: MatrixWeight, p: float, system: BapuSystem, k: Index, grid: Grid
) -> SamplingQuadrature:
    params = system.params
    axes = lattice_window(params, k, grid.T)
    side = band_side(params, k, 2.0 * grid.T)
    per_axis = quadrature_nodes(side, grid.h)
    reference, weights = gauss_nodes(np.full(params.n, 0.5 * side), 0.5 * side, per_axis)
    mesh = np.meshgrid(*[side * a.astype(float) for a in axes], indexing="ij")
    anchors = np.stack([m.ravel() for m in mesh], axis=-1)
    nodes = (anchors[:, None, :] + reference[None, :, :]).reshape(-1, params.n)
    roots = W.power(nodes, 1.0 / p, allow_singular=True)
    return SamplingQuadrature(
        grid=grid,
        p=p,
        points=tuple(side * a.astype(float) for a in axes),
        weights=weights,
        roots=roots.reshape((len(anchors), len(weights)) + roots.shape[1:]),
    )


def sampling_inequality_check(
    W: MatrixWeight,
    p: float,
    system: BapuSystem,
    k: Index,
    g: VectorSignal,
    quadrature: Optional[SamplingQuadrature] = None,
) -> float:
    """
    sum_l int_{Q(k,l)} |W^{1/p}(x) g(x_{k,l})|^p dx / ||g||^p_{L^p(W)} over one box period.

    Cubes are the periodic band lattice of the box. Pass a quadrature from
    sampling_quadrature to reuse it across signals. Returns 0 for g = 0.
    """
    rhs = lp_w_norm(W, p, g) ** p
    if rhs == 0.0:
        return 0.0
    if quadrature is None:
        quadrature = sampling_quadrature(W, p, system, k, g.grid)
    vectors = quadrature.samples(g)
    images = np.einsum("cpab,cb->cpa", quadrature.roots, vectors)
    density = np.linalg.norm(images, axis=-1) ** p
    return math.fsum((density * quadrature.weights[None, :]).ravel()) / rhs


# ============ SEMINORMS / EMBEDDING ============


def _multi_indices(n: int, order: int) -> List[Tuple[int, ...]]:
    return [eta for eta in itertools.product(range(order + 1), repeat=n) if sum(eta) <= order]


def _check_resolved(F: SpectralSignal, d: int, fraction: float = 0.1, tol: float = 1e-10) -> None:
    if d > MAX_SEMINORM_ORDER:
        raise ResolutionError(f"seminorm order {d} above the supported {MAX_SEMINORM_ORDER}")
    radius = np.max(np.abs(np.stack(F.grid.frequency_mesh())), axis=0)
    edge = radius >= (1.0 - fraction) * F.grid.xi_max
    energy = np.abs(F.values) ** 2 * (1.0 + radius**2)[None] ** d
    total = float(np.sum(energy))
    if total > 0 and float(np.sum(energy[:, edge])) > tol * total:
        raise ResolutionError(f"order-{d} derivatives are not resolved by the grid")


def schwartz_seminorm(f: VectorSignal, d: int) -> float:
    """max_{|eta| <= d} sup_x (1 + |x|)^d |d^eta f(x)|, over all components."""
    grid = f.grid
    spectrum = forward_ft(f)
    _check_resolved(spectrum, d)
    rho = np.sqrt(sum(m**2 for m in grid.mesh()))
    weight = (1.0 + rho) ** d
    best = 0.0
    for eta in _multi_indices(grid.n, d):
        factor = np.ones(grid.shape, dtype=complex)
        for xi_d, order in zip(grid.frequency_mesh(), eta):
            factor = factor * (1j * xi_d) ** order
        derivative = inverse_ft(spectrum.with_values(spectrum.values * factor[None])).values
        best = max(best, float(np.max(weight[None] * np.abs(derivative))))
    return best


def spectral_seminorm(f: VectorSignal, d: int) -> float:
    """sup_xi <xi>^d sum_{|eta| <= d} |d^eta hat f(xi)|, derivatives via (-i x)^eta."""
    grid = f.grid
    bracket = np.sqrt(1.0 + sum(m**2 for m in grid.frequency_mesh()))
    total = np.zeros((f.n_components,) + grid.shape)
    for eta in _multi_indices(grid.n, d):
        factor = np.ones(grid.shape, dtype=complex)
        for x_d, order in zip(grid.mesh(), eta):
            factor = factor * (-1j * x_d) ** order
        total += np.abs(forward_ft(f.with_values(f.values * factor[None])).values)
    return float(np.max(bracket[None] ** d * total))


def vector_seminorm(f: VectorSignal, d: int) -> float:
    """sum over components of the Schwartz seminorm p_d."""
    return math.fsum(
        schwartz_seminorm(f.with_values(f.values[j : j + 1]), d) for j in range(f.n_components)
    )


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    constant: float
    target: float
    radii: Tuple[float, ...]
    values: Tuple[float, ...]

    @property
    def relative_shortfall(self) -> float:
        return max(0.0, (self.target - self.exponent) / self.target)


def embedding_decay_check(
    system: BapuSystem,
    W: MatrixWeight,
    p: float,
    f: VectorSignal,
    L: float,
    kmin: int = 3,
    margin: int = 2,
) -> DecayFit:
    """
    Fit ||theta_k(D) f||_{L^p(W)} ~ c <k>^-e on interior bands with |k| >= kmin.

    The target exponent is L / (1 - alpha).
    """
    alpha = system.params.alpha
    keys = [k for k in interior_keys(system, margin) if math.sqrt(sum(v * v for v in k)) >= kmin]
    if len(keys) < 2:
        raise ParameterError("need at least two interior bands beyond kmin for the fit")
    spectrum = forward_ft(f)
    brackets, values = [], []
    for k in band_order(keys):
        piece = _band_from_spectrum(system, spectrum, k, "theta", None)
        value = lp_w_norm(W, p, piece)
        if value <= 0.0:
            continue
        brackets.append(math.sqrt(1.0 + sum(v * v for v in k)))
        values.append(value)
    if len(values) < 2:
        raise ParameterError("band norms vanish; nothing to fit")
    x = np.log(np.asarray(brackets))[:, None]
    y = np.log(np.asarray(values))
    model = LinearRegression().fit(x, y)
    return DecayFit(
        exponent=float(-model.coef_[0]),
        constant=float(math.exp(model.intercept_)),
        target=L / (1.0 - alpha),
        radii=tuple(brackets),
        values=tuple(values),
    )


# ============ PROBES ============


def _ratios(
    pairs: Iterable[Tuple[float, float]],
) -> List[float]:
    return [num / den if den else 0.0 for num, den in pairs]


def analysis_bound_probe(
    system: AtomSystem, W: MatrixWeight, sp: SmoothnessParams, corpus: Sequence[VectorSignal]
) -> ProbeReport:
    """||analyze(f)||_m / ||f||_M over a corpus."""
    pairs = [
        (m_discrete_norm(W, sp, analyze(system, f)).value, m_continuous_norm(system.bapu, W, sp, f).value)
        for f in corpus
    ]
    return ProbeReport(name="analysis", ratios=_ratios(pairs))


def synthesis_bound_probe(
    system: AtomSystem, W: MatrixWeight, sp: SmoothnessParams, sequences: Sequence[CoeffSeq]
) -> ProbeReport:
    """||synthesize(c)||_M / ||c||_m over finite sequences."""
    pairs = [
        (m_continuous_norm(system.bapu, W, sp, synthesize(system, c)).value, m_discrete_norm(W, sp, c).value)
        for c in sequences
    ]
    return ProbeReport(name="synthesis", ratios=_ratios(pairs))


def window_bracket(
    system: BapuSystem, W: MatrixWeight, sp: SmoothnessParams, corpus: Sequence[VectorSignal]
) -> ProbeReport:
    """psi-window norm over theta-window norm."""
    pairs = [
        (m_continuous_norm(system, W, sp, f, "psi").value, m_continuous_norm(system, W, sp, f, "theta").value)
        for f in corpus
    ]
    return ProbeReport(name="psi/theta", ratios=_ratios(pairs))


def bapu_independence(
    first: BapuSystem,
    second: BapuSystem,
    W: MatrixWeight,
    sp: SmoothnessParams,
    corpus: Sequence[VectorSignal],
) -> ProbeReport:
    """Norm with the first window profile over the norm with the second."""
    pairs = [
        (m_continuous_norm(first, W, sp, f).value, m_continuous_norm(second, W, sp, f).value)
        for f in corpus
    ]
    return ProbeReport(name=f"{first.profile}/{second.profile}", ratios=_ratios(pairs))


def reducing_equivalence(
    W: MatrixWeight,
    family: ReducingFamily,
    sp: SmoothnessParams,
    sequences: Sequence[CoeffSeq],
    h: Optional[float] = None,
) -> ProbeReport:
    """m_discrete_norm / m_reducing_norm over finite sequences."""
    pairs = [
        (m_discrete_norm(W, sp, c, h).value, m_reducing_norm(family, sp, c).value) for c in sequences
    ]
    return ProbeReport(name="discrete/reducing", ratios=_ratios(pairs))
