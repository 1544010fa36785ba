"""Registry of deterministic and seeded test signals on a Grid."""

import logging
import math
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from src.analysis.bapu import BapuSystem, bump_profile, smooth_intervals
from src.analysis.grid import Grid, SpectralSignal, VectorSignal, inverse_ft
from src.utils.errors import ParameterError, RegistryError

logger = logging.getLogger(__name__)

Factory = Callable[[Grid, Mapping[str, float], np.random.Generator, Optional[BapuSystem]], np.ndarray]

_REGISTRY: Dict[str, Factory] = {}


def register(name: str) -> Callable[[Factory], Factory]:
    def wrap(func: Factory) -> Factory:
        _REGISTRY[name] = func
        return func

    return wrap


def available() -> list[str]:
    return sorted(_REGISTRY)


def _radius(grid: Grid, center: float = 0.0) -> np.ndarray:
    return np.sqrt(sum((m - center) ** 2 for m in grid.mesh()))


@register("zero")
def _zero(grid, params, rng, system):
    return np.zeros(grid.shape, dtype=complex)


@register("gaussian")
def _gaussian(grid, params, rng, system):
    sigma = float(params.get("sigma", 1.0))
    rho = _radius(grid, float(params.get("center", 0.0)))
    return np.exp(-(rho**2) / (2.0 * sigma**2)).astype(complex)


@register("modulated_gaussian")
def _modulated_gaussian(grid, params, rng, system):
    xi0 = float(params.get("xi0", 0.0))
    return _gaussian(grid, params, rng, system) * np.exp(1j * xi0 * grid.mesh()[0])


@register("chirp")
def _chirp(grid, params, rng, system):
    rate = float(params.get("rate", 1.0))
    sigma = float(params.get("sigma", 4.0))
    rho = _radius(grid)
    return np.exp(-(rho**2) / (2.0 * sigma**2) + 0.5j * rate * rho**2)


@register("bump")
def _bump(grid, params, rng, system):
    radius = float(params.get("radius", 1.0))
    rho = _radius(grid, float(params.get("center", 0.0))) / radius
    values = np.zeros(grid.shape)
    inside = rho < 1.0
    values[inside] = np.exp(1.0 - 1.0 / (1.0 - rho[inside] ** 2))
    return values.astype(complex)


@register("noise")
def _noise(grid, params, rng, system):
    scale = float(params.get("scale", 1.0)) / math.sqrt(2.0)
    return scale * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


@register("spectral_bump")
def _spectral_bump(grid, params, rng, system):
    """Window profile prescribed on the frequency side around xi0 (first axis)."""
    xi0 = float(params.get("xi0", 0.0))
    radius = float(params.get("radius", 0.5))
    mesh = grid.frequency_mesh()
    mesh[0] = mesh[0] - xi0
    rho = np.sqrt(sum(m**2 for m in mesh)) / (radius / 1.5)
    spectrum = bump_profile(rho)[None].astype(complex)
    return inverse_ft(SpectralSignal(grid, spectrum)).values[0]


def _packet(grid: Grid, center: np.ndarray, xi: np.ndarray, sigma: float) -> np.ndarray:
    mesh = grid.mesh()
    rho2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
    phase = sum(m * w for m, w in zip(mesh, xi))
    return np.exp(-rho2 / (2.0 * sigma**2) + 1j * phase)


@register("wave_packets")
def _wave_packets(grid, params, rng, system):
    """Seeded Gaussian wave packets with frequency centres in |xi| in [band_low, band_high]."""
    packets = int(params.get("packets", 3))
    sigma = float(params.get("sigma", grid.T / 10.0))
    low = float(params.get("band_low", 0.0))
    high = float(params.get("band_high", 4.0))
    if grid.T <= 8.0 * sigma:
        raise ParameterError("packets wider than the box: need T > 8 sigma")
    spread = 0.5 * (grid.T - 8.0 * sigma)
    values = np.zeros(grid.shape, dtype=complex)
    for _ in range(packets):
        direction = rng.standard_normal(grid.n)
        direction /= np.linalg.norm(direction)
        xi = direction * rng.uniform(low, high)
        center = rng.uniform(-spread, spread, size=grid.n)
        amplitude = rng.standard_normal() + 1j * rng.standard_normal()
        values += amplitude * _packet(grid, center, xi, sigma)
    return values


@register("in_band_packets")
def _in_band_packets(grid, params, rng, system):
    """
    Wave packets whose spectra stay clear of every window breakpoint of `system`,
    so band-passed pieces decay fast in space (n = 1).
    """
    if system is None:
        raise ParameterError("in_band_packets needs a BAPU system")
    if grid.n != 1:
        raise ParameterError("in_band_packets is defined for n = 1")
    packets = int(params.get("packets", 2))
    min_sigma_xi = 10.0 / grid.T
    intervals = smooth_intervals(system, min_length=12.0 * min_sigma_xi, limit=grid.guard)
    if not intervals:
        raise ParameterError("no breakpoint-free interval wide enough for the grid")
    values = np.zeros(grid.shape, dtype=complex)
    for _ in range(packets):
        lo, hi = intervals[int(rng.integers(len(intervals)))]
        sigma_xi = 0.5 * (hi - lo) / 6.0
        sigma = 1.0 / sigma_xi
        spread = 0.5 * (grid.T - 8.0 * sigma)
        center = rng.uniform(-spread, spread, size=1)
        amplitude = rng.standard_normal() + 1j * rng.standard_normal()
        values += amplitude * _packet(grid, center, np.array([0.5 * (lo + hi)]), sigma)
    return values


def sample_closed_form(
    name: str,
    params: Optional[Mapping[str, float]],
    grid: Grid,
    n_components: int = 1,
    seed: int = 0,
    system: Optional[BapuSystem] = None,
) -> VectorSignal:
    """
    Sample a registry signal.

    Deterministic signals repeat the same profile in every component; seeded
    signals draw each component independently from one generator.
    """
    if name not in _REGISTRY:
        raise RegistryError(f"unknown signal '{name}' (known: {', '.join(available())})")
    factory = _REGISTRY[name]
    rng = np.random.default_rng(seed)
    params = dict(params or {})
    components = [factory(grid, params, rng, system) for _ in range(n_components)]
    return VectorSignal(grid, np.stack(components).astype(complex))


def corpus(
    name: str,
    params: Optional[Mapping[str, float]],
    grid: Grid,
    count: int,
    seed: int,
    n_components: int = 1,
    system: Optional[BapuSystem] = None,
) -> list[VectorSignal]:
    """`count` signals with seeds derived from `seed`, reproducible one by one."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [
        sample_closed_form(name, params, grid, n_components, int(s), system) for s in seeds
    ]


def random_band_signal(
    system: BapuSystem,
    grid: Grid,
    k,
    rng: np.random.Generator,
    n_components: int = 1,
) -> VectorSignal:
    """Complex noise shaped by phi_k on the frequency side: a random element of the band B_k."""
    system.check_guard(grid, k)
    window = system.on_grid(grid, k, "phi")
    shape = (n_components,) + grid.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return inverse_ft(SpectralSignal(grid, noise * window[None]))
