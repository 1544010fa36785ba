import math

import numpy as np
import pytest

from src.analysis.grid import (
    Grid,
    SpectralSignal,
    VectorSignal,
    band_fits_guard,
    commensurate_halfwidth,
    evaluate_at,
    evaluate_on_lattice,
    forward_ft,
    inverse_ft,
    l2_norm,
    spectral_derivative,
    spectral_l2_norm,
)
from src.analysis.signals import available, corpus, sample_closed_form
from src.models.schemas import GridParams
from src.utils.errors import DomainError, ParameterError, RegistryError, StructuralError


class TestGrid:

    def test_spacings(self, grid):
        """Test h = 2T/M, dxi = pi/T and the guard fraction"""
        assert grid.h == pytest.approx(2 * 16 * math.pi / 1024)
        assert grid.dxi == pytest.approx(1.0 / 16)
        assert grid.xi_max == pytest.approx(32.0)
        assert grid.guard == pytest.approx(0.9 * 32.0)

    def test_axis_contains_origin(self, grid):
        """Test the sample axis is centred with x = 0 at index M/2"""
        x = grid.axis()
        assert x[grid.M // 2] == 0.0
        assert x[0] == pytest.approx(-grid.T)

    def test_odd_point_count_rejected(self):
        """Test M must be even"""
        with pytest.raises(ParameterError):
            Grid(n=1, T=1.0, M=101)

    def test_commensurate_halfwidth(self):
        """Test 2 T a / pi equals the cell count"""
        T = commensurate_halfwidth(2.25, 64)
        assert 2 * T * 2.25 / math.pi == pytest.approx(64)
        grid = Grid.from_params(GridParams(M=512, commensurate_cells=64), a=2.25)
        assert grid.T == pytest.approx(T)

    def test_band_fits_guard(self, grid):
        """Test the guard inequality is |center| + radius <= 0.9 xi_max"""
        assert band_fits_guard(grid, np.array([20.0]), 8.0)
        assert not band_fits_guard(grid, np.array([20.0]), 9.0)


class TestTransforms:

    def test_zero_signal(self, grid):
        """Test f = 0 has a zero spectrum"""
        f = VectorSignal(grid, np.zeros((1, grid.M), dtype=complex))
        assert np.all(forward_ft(f).values == 0)

    def test_gaussian_transform(self, gaussian):
        """Test the unitary transform of exp(-x^2/2) is exp(-xi^2/2)"""
        spectrum = forward_ft(gaussian)
        xi = gaussian.grid.frequency_axis()
        assert np.max(np.abs(spectrum.values[0] - np.exp(-(xi**2) / 2.0))) <= 1e-10

    def test_inverse_of_gaussian_spectrum(self, grid):
        """Test inverse_ft maps exp(-xi^2/2) back to the Gaussian"""
        xi = grid.frequency_axis()
        F = SpectralSignal(grid, np.exp(-(xi**2) / 2.0)[None].astype(complex))
        f = inverse_ft(F)
        assert np.max(np.abs(f.values[0] - np.exp(-(grid.axis() ** 2) / 2.0))) <= 1e-10

    def test_noise_round_trip(self, grid, rng):
        """Test forward then inverse keeps white noise to 1e-12"""
        values = rng.standard_normal((2, grid.M)) + 1j * rng.standard_normal((2, grid.M))
        f = VectorSignal(grid, values)
        back = inverse_ft(forward_ft(f))
        assert l2_norm(f.with_values(back.values - values)) <= 1e-12 * l2_norm(f)

    def test_plancherel(self, grid, rng):
        """Test the spatial and spectral L2 norms agree"""
        f = VectorSignal(grid, rng.standard_normal((1, grid.M)).astype(complex))
        assert spectral_l2_norm(forward_ft(f)) == pytest.approx(l2_norm(f), rel=1e-12)

    def test_modulation_shifts_spectrum(self, grid):
        """Test multiplying by exp(i xi0 x) shifts the spectrum by xi0 grid nodes"""
        base = sample_closed_form("bump", {"radius": 4.0}, grid)
        xi0 = 64 * grid.dxi
        shifted = base.with_values(base.values * np.exp(1j * xi0 * grid.axis()))
        expected = np.roll(forward_ft(base).values, 64, axis=1)
        assert np.max(np.abs(forward_ft(shifted).values - expected)) <= 1e-11

    def test_component_mismatch(self, grid):
        """Test samples with the wrong shape are rejected"""
        with pytest.raises(StructuralError):
            VectorSignal(grid, np.zeros((1, grid.M + 2)))


class TestInterpolation:

    def test_evaluate_at_matches_gaussian(self, gaussian):
        """Test trigonometric interpolation off the nodes"""
        F = forward_ft(gaussian)
        pts = np.array([[0.3], [-1.7], [2.05]])
        values = evaluate_at(F, pts)[0]
        assert np.max(np.abs(values - np.exp(-pts[:, 0] ** 2 / 2.0))) <= 1e-10

    def test_lattice_matches_pointwise(self, gaussian):
        """Test evaluate_on_lattice agrees with evaluate_at"""
        F = forward_ft(gaussian)
        axis = np.linspace(-3.0, 3.0, 13)
        lattice = evaluate_on_lattice(F, [axis])[0]
        pointwise = evaluate_at(F, axis[:, None])[0]
        assert np.max(np.abs(lattice - pointwise)) <= 1e-13

    def test_point_outside_box(self, gaussian):
        """Test sampling outside [-T, T] raises a domain error"""
        with pytest.raises(DomainError):
            evaluate_at(forward_ft(gaussian), np.array([[100.0]]))

    def test_spectral_derivative(self, gaussian):
        """Test d/dx exp(-x^2/2) = -x exp(-x^2/2)"""
        x = gaussian.grid.axis()
        derivative = spectral_derivative(gaussian, (1,))
        assert np.max(np.abs(derivative.values[0] + x * np.exp(-(x**2) / 2.0))) <= 1e-10


class TestSignals:

    def test_gaussian_at_origin(self, grid):
        """Test gaussian(sigma=1) is 1 at x = 0"""
        f = sample_closed_form("gaussian", {"sigma": 1.0}, grid)
        assert f.values[0, grid.M // 2] == 1.0

    def test_zero(self, grid):
        """Test the zero signal"""
        assert np.all(sample_closed_form("zero", None, grid).values == 0)

    def test_modulated_gaussian(self, grid):
        """Test modulated_gaussian equals gaussian(x) exp(4ix) pointwise"""
        x = grid.axis()
        f = sample_closed_form("modulated_gaussian", {"xi0": 4.0}, grid)
        expected = np.exp(-(x**2) / 2.0) * np.exp(4j * x)
        assert np.max(np.abs(f.values[0] - expected)) <= 1e-14

    def test_unknown_signal(self, grid):
        """Test unknown registry ids raise a registry error"""
        with pytest.raises(RegistryError):
            sample_closed_form("sawtooth", None, grid)

    def test_registry_listing(self):
        """Test the registry exposes the closed-form signals"""
        assert {"gaussian", "zero", "modulated_gaussian", "wave_packets"} <= set(available())

    def test_corpus_reproducible(self, grid):
        """Test a seeded corpus is identical across calls and differs across members"""
        first = corpus("noise", None, grid, 3, seed=7)
        second = corpus("noise", None, grid, 3, seed=7)
        for a, b in zip(first, second):
            assert np.array_equal(a.values, b.values)
        assert not np.array_equal(first[0].values, first[1].values)

    def test_components_drawn_independently(self, grid):
        """Test seeded signals differ between components"""
        f = sample_closed_form("noise", None, grid, n_components=2, seed=3)
        assert f.n_components == 2
        assert not np.array_equal(f.values[0], f.values[1])
