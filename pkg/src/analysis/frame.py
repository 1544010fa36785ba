"""
Band-limited tight frame phi_{k,l} and molecule systems built on it.

Atoms are kept on the frequency side:

    hat phi_{k,l}(xi) = theta_k(xi) (s_k / 2 pi)^(n/2) exp(i x_{k,l}.xi_k) exp(-i x_{k,l}.xi)

with x_{k,l} = s_k l and s_k the periodic band side (pi/a) r_k^-1 shrunk so a whole
number of cubes tiles the box period 2T. Each band keeps the lattice points s_k l
that lie in one period [-T, T)^n. s_k never exceeds the nominal side, so the band never aliases
and the system is exactly tight on the grid. On a commensurate box s_k is the nominal
side and the normalization is (2 a r_k)^(-n/2).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.analysis.almostdiag import DecayMatrix
from src.analysis.bapu import BapuSystem
from src.analysis.coefficients import CoeffSeq, IndexSpace
from src.analysis.covering import Index, band_side, is_commensurate, lattice_window
from src.analysis.grid import (
    Grid,
    SpectralSignal,
    VectorSignal,
    evaluate_on_lattice,
    forward_ft,
    inverse_ft,
    l2_norm,
    lattice_adjoint,
)
from src.models.schemas import EnvelopeFit
from src.utils.errors import StructuralError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FrameAtom:
    k: Index
    l: Index
    center: np.ndarray
    r: float
    band_radius: float
    spectrum: np.ndarray
    grid: Grid

    @property
    def values(self) -> np.ndarray:
        """Time samples on the grid (periodized atom)."""
        return inverse_ft(SpectralSignal(self.grid, self.spectrum[None])).values[0]

    @property
    def l2_norm(self) -> float:
        return math.sqrt(self.grid.dxi**self.grid.n * float(np.sum(np.abs(self.spectrum) ** 2)))


class AtomSystem:
    """Common interface of the frame and molecule systems: per-band spectral factor and lattice."""

    bapu: BapuSystem
    grid: Grid

    @property
    def params(self):
        return self.bapu.params

    @property
    def keys(self) -> List[Index]:
        return self.bapu.keys

    def radius(self, k: Index) -> float:
        return float(self.bapu.radii[self.bapu.position(k)])

    def side(self, k: Index) -> float:
        return band_side(self.params, k, 2.0 * self.grid.T)

    def normalization(self, k: Index) -> float:
        return (self.side(k) / (2.0 * math.pi)) ** (self.params.n / 2.0)

    def lattice(self, k: Index) -> List[np.ndarray]:
        return lattice_window(self.params, k, self.grid.T)

    def positions(self, k: Index, axes: Sequence[np.ndarray]) -> List[np.ndarray]:
        side = self.side(k)
        return [side * np.asarray(a, dtype=float) for a in axes]

    def phase(self, k: Index, axes: Sequence[np.ndarray]) -> np.ndarray:
        """exp(i x_{k,l}.xi_k) on the tensor of l ranges."""
        out = np.ones(tuple(len(a) for a in axes), dtype=complex)
        step = self.side(k) * self.radius(k)
        for d, (axis, kd) in enumerate(zip(axes, k)):
            factor = np.exp(1j * step * kd * np.asarray(axis, dtype=float))
            shape = [1] * len(axes)
            shape[d] = len(axis)
            out = out * factor.reshape(shape)
        return out

    def spectral_factor(self, k: Index) -> np.ndarray:
        raise NotImplementedError

    def offset(self, k: Index) -> np.ndarray:
        return np.zeros(self.params.n)

    def atom(self, k: Index, l: Index) -> FrameAtom:
        kk = tuple(int(v) for v in k)
        ll = tuple(int(v) for v in l)
        axes = [np.array([v]) for v in ll]
        x = np.array([p[0] for p in self.positions(kk, axes)])
        phase = complex(self.phase(kk, axes).ravel()[0])
        shift = np.ones(self.grid.shape, dtype=complex)
        for xi_d, x_d in zip(self.grid.frequency_mesh(), x):
            shift = shift * np.exp(-1j * x_d * xi_d)
        spectrum = self.spectral_factor(kk) * self.normalization(kk) * phase * shift
        r = self.radius(kk)
        return FrameAtom(
            k=kk,
            l=ll,
            center=x + self.offset(kk),
            r=r,
            band_radius=self.bapu.support_radius(kk),
            spectrum=spectrum,
            grid=self.grid,
        )


class FrameSystem(AtomSystem):
    """The tight frame over the truncated lattice of a BAPU system."""

    def __init__(self, bapu: BapuSystem, grid: Grid) -> None:
        if bapu.params.n != grid.n:
            raise StructuralError("BAPU and grid dimensions differ")
        self.bapu = bapu
        self.grid = grid
        for k in bapu.keys:
            bapu.check_guard(grid, k)
        loose = [k for k in bapu.keys if not is_commensurate(bapu.params, k, grid.T)]
        if loose:
            logger.info(
                "%d of %d band lattices use a shrunk side to tile the box (T=%.6g)",
                len(loose), len(bapu.keys), grid.T,
            )

    def spectral_factor(self, k: Index) -> np.ndarray:
        return self.bapu.on_grid(self.grid, k, "theta")


class ShiftedMolecules(AtomSystem):
    """psi_{j,m}(x) = phi_{j,m}(x - shift r_j^-1 e_1)."""

    def __init__(self, frame: FrameSystem, shift: float) -> None:
        self.frame = frame
        self.bapu = frame.bapu
        self.grid = frame.grid
        self.shift = float(shift)
        self._factors: Dict[Index, np.ndarray] = {}

    def offset(self, k: Index) -> np.ndarray:
        out = np.zeros(self.params.n)
        out[0] = self.shift / self.radius(k)
        return out

    def spectral_factor(self, k: Index) -> np.ndarray:
        if k not in self._factors:
            xi0 = self.grid.frequency_mesh()[0]
            self._factors[k] = self.frame.spectral_factor(k) * np.exp(-1j * self.offset(k)[0] * xi0)
        return self._factors[k]


# ============ ANALYSIS / SYNTHESIS ============


def analyze(system: AtomSystem, f: VectorSignal) -> CoeffSeq:
    """
    <f, phi_{k,l}> for every band and every l of its period window.

    Uses the sampling identity: the band-passed signal conj(S_k)(D) f is
    evaluated at the lattice points by trigonometric interpolation.
    """
    grid = system.grid
    spectrum = forward_ft(f)
    out = CoeffSeq(system.params, f.n_components, period=2.0 * grid.T)
    for k in system.keys:
        axes = system.lattice(k)
        band = spectrum.with_values(spectrum.values * np.conj(system.spectral_factor(k)))
        samples = evaluate_on_lattice(band, system.positions(k, axes))
        factor = system.normalization(k) * (2.0 * math.pi) ** (grid.n / 2.0)
        out.set_block(k, axes, factor * np.conj(system.phase(k, axes))[None] * samples)
    return out


def analyze_direct(
    system: AtomSystem, f: VectorSignal, keys: Optional[Sequence[Tuple[Index, Index]]] = None
) -> CoeffSeq:
    """Grid inner products dxi^n sum hat f conj(hat phi) atom by atom."""
    grid = system.grid
    spectrum = forward_ft(f).values
    if keys is None:
        keys = [
            (k, tuple(int(v) for v in l))
            for k in system.keys
            for l in np.array(np.meshgrid(*system.lattice(k), indexing="ij")).reshape(grid.n, -1).T
        ]
    entries = {}
    for k, l in keys:
        atom = system.atom(k, l)
        flat = np.conj(atom.spectrum).ravel()
        entries[(tuple(k), tuple(l))] = grid.dxi**grid.n * (
            spectrum.reshape(f.n_components, -1) @ flat
        )
    return CoeffSeq.from_entries(system.params, f.n_components, entries, 2.0 * grid.T)


def synthesize(system: AtomSystem, c: CoeffSeq) -> VectorSignal:
    """sum c_{k,l} phi_{k,l}, accumulated k-major on the frequency side."""
    grid = system.grid
    total = np.zeros((c.N,) + grid.shape, dtype=complex)
    for k in sorted(c.blocks):
        block = c.blocks[k]
        weighted = block.values * system.phase(k, block.axes)[None]
        lifted = lattice_adjoint(grid, weighted, system.positions(k, block.axes))
        total += system.normalization(k) * system.spectral_factor(k)[None] * lifted
    return inverse_ft(SpectralSignal(grid, total))


def tight_frame_residual(system: FrameSystem, f: VectorSignal) -> Tuple[float, float]:
    """(||f - S A f|| / ||f||, |sum |c|^2 - ||f||^2| / ||f||^2); both 0 for f = 0."""
    energy = l2_norm(f)
    if energy == 0.0:
        return 0.0, 0.0
    coeffs = analyze(system, f)
    rebuilt = synthesize(system, coeffs)
    residual = l2_norm(f.with_values(f.values - rebuilt.values)) / energy
    defect = abs(coeffs.l2_norm() ** 2 - energy**2) / energy**2
    return residual, defect


def coefficient_constant_discrepancy(system: FrameSystem, f: VectorSignal, tol: float = 1e-8) -> float:
    """
    Median of |<f, phi_{k,l}>| / ((2 pi)^(-n/2) |Q(k,l)|^(1/2) |theta_k(D) f(x_{k,l})|)
    over coefficients above `tol` times the largest one.
    """
    grid = system.grid
    spectrum = forward_ft(f)
    coeffs = analyze(system, f)
    cutoff = tol * max(coeffs.max_abs(), 1e-300)
    ratios = []
    for k in system.keys:
        block = coeffs.blocks[k]
        band = spectrum.with_values(spectrum.values * system.spectral_factor(k))
        samples = evaluate_on_lattice(band, system.positions(k, block.axes))
        volume = system.side(k) ** grid.n
        predicted = (2.0 * math.pi) ** (-grid.n / 2.0) * math.sqrt(volume) * np.abs(samples)
        mask = np.abs(block.values) > cutoff
        ratios.extend((np.abs(block.values)[mask] / predicted[mask]).tolist())
    return float(np.median(ratios)) if ratios else 0.0


# ============ GRAM MATRICES ============


def atom_spectra(system: AtomSystem, space: IndexSpace) -> np.ndarray:
    return np.stack([system.atom(k, l).spectrum.ravel() for k, l in space.keys])


def cross_gram(
    rows_system: AtomSystem,
    cols_system: AtomSystem,
    rows: IndexSpace,
    cols: IndexSpace,
    tol: float = 0.0,
) -> DecayMatrix:
    """Entries <eta_row, psi_col> by grid inner products; |entries| <= tol are dropped."""
    grid = rows_system.grid
    dense = grid.dxi**grid.n * (atom_spectra(rows_system, rows) @ np.conj(atom_spectra(cols_system, cols)).T)
    if tol > 0:
        dense[np.abs(dense) <= tol] = 0.0
    return DecayMatrix(rows, cols, sparse.csr_matrix(dense))


def molecule_bound(
    rows: IndexSpace, cols: IndexSpace, P: float, L: float, N: float
) -> np.ndarray:
    """min(r_k/r_j, r_j/r_k)^P (1 + |xi_k - xi_j| / max r)^-L (1 + min r |x - y|)^-N."""
    rk = rows.radii[:, None]
    rj = cols.radii[None, :]
    scale = np.minimum(rk / rj, rj / rk) ** P
    frequency = (1.0 + rows.frequency_distance(cols) / np.maximum(rk, rj)) ** (-L)
    space = (1.0 + np.minimum(rk, rj) * rows.space_distance(cols)) ** (-N)
    return scale * frequency * space


def frame_window(system: AtomSystem, kmax: int, lmax: int) -> IndexSpace:
    space = IndexSpace.window(system.params, kmax, lmax, period=2.0 * system.grid.T)
    if kmax > system.params.Kmax:
        raise StructuralError(f"window kmax={kmax} exceeds the truncation Kmax={system.params.Kmax}")
    return space


# ============ ENVELOPES ============


def atom_envelope_fit(system: AtomSystem, k: Index, l: Index, order: float) -> EnvelopeFit:
    """Smallest C with |phi(x)| <= C (2a)^(-n/2) r^(n/2) (1 + r|x - x_{k,l}|)^-order."""
    atom = system.atom(k, l)
    n = system.params.n
    dist = system.grid.periodic_distance(atom.center)
    envelope = (2.0 * system.params.a) ** (-n / 2.0) * atom.r ** (n / 2.0) * (
        1.0 + atom.r * dist
    ) ** (-order)
    constant = float(np.max(np.abs(atom.values) / envelope))
    return EnvelopeFit(k=atom.k, order=order, constant=constant)


def spectral_envelope_fit(system: AtomSystem, k: Index, l: Index, order: float) -> EnvelopeFit:
    """Smallest C with |hat phi(xi)| <= C r^(-n/2) (1 + r^-1 |xi - xi_k|)^-order."""
    atom = system.atom(k, l)
    n = system.params.n
    centre = system.bapu.centers[system.bapu.position(atom.k)]
    dist = np.sqrt(sum((m - c) ** 2 for m, c in zip(system.grid.frequency_mesh(), centre)))
    envelope = atom.r ** (-n / 2.0) * (1.0 + dist / atom.r) ** (-order)
    constant = float(np.max(np.abs(atom.spectrum) / envelope))
    return EnvelopeFit(k=atom.k, order=order, constant=constant)


def envelope_spread(fits: Sequence[EnvelopeFit]) -> float:
    """max C / min C over a set of fits."""
    values = [fit.constant for fit in fits]
    return max(values) / min(values)
