import math

import numpy as np
import pytest

from src.analysis.grid import Grid, VectorSignal
from src.analysis.muckenhoupt import (
    CubeFamily,
    a1_constant_estimate,
    ap_constant_estimate,
    convolution_bound_probe,
    doubling_exponent_estimate,
    moderate_growth_integral,
    nested_families,
    scalar_a1_oracle,
    scalar_ap_oracle,
)
from src.analysis.signals import sample_closed_form
from src.analysis.weights import constant, identity, power
from src.utils.errors import ParameterError


@pytest.fixture
def families():
    return nested_families([[0.0], [1.0]], [1.0, 0.5], nodes_per_axis=64, extensions=3)


class TestCubeFamilies:

    def test_nested_refinement(self, families):
        """Test each extension adds a finer scale and doubles the nodes"""
        assert len(families) == 4
        assert families[0].halfsides == (0.5, 1.0)
        assert families[2].halfsides == (0.125, 0.25, 0.5, 1.0)
        assert [f.nodes_per_axis for f in families] == [64, 128, 256, 512]

    def test_cubes(self, families):
        assert len(families[0].cubes()) == 4
        assert "2 centres" in families[0].description


class TestApConstants:

    def test_constant_weight(self):
        """Test a constant matrix weight has A_p constant 1"""
        W = constant([[2.0, 0.5], [0.5, 1.0]])
        report = ap_constant_estimate(W, 2.0, CubeFamily(((0.0,),), (1.0,), 16))
        assert report.estimate == pytest.approx(1.0, abs=1e-10)
        assert not report.divergent

    def test_report_carries_doubling(self, families):
        """Test the A_p report fills in the doubling exponent of |x|^{1/2}, beta = 3/2"""
        report = ap_constant_estimate(power([0.5]), 2.0, families)
        assert report.estimate == report.trend[-1]
        assert report.beta == pytest.approx(1.5, abs=1e-10)
        assert report.doubling_constant == pytest.approx(2.0**1.5, rel=1e-10)
        assert report.beta_spread == 0.0

    def test_constant_weight_doubling(self):
        """Test a constant weight doubles like Lebesgue measure and every direction agrees"""
        W = constant([[2.0, 0.5], [0.5, 1.0]])
        report = a1_constant_estimate(W, CubeFamily(((0.0,),), (1.0,), 16))
        assert report.beta == pytest.approx(1.0, abs=1e-12)
        assert report.beta_spread == pytest.approx(0.0, abs=1e-12)

    def test_stable_power_weight(self, families):
        """Test |x|^{1/2} at p = 2 settles under refinement"""
        report = ap_constant_estimate(power([0.5]), 2.0, families)
        assert not report.divergent
        assert len(report.trend) == 4
        assert 1.0 < report.estimate < 3.0

    def test_divergent_power_weight(self, families):
        """Test |x|^1 at p = 2 keeps growing: it is not an A_2 weight"""
        report = ap_constant_estimate(power([1.0]), 2.0, families)
        assert report.divergent
        assert report.trend == sorted(report.trend)

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_scalar_oracle(self, p):
        """Test the matrix estimate of a scalar weight equals the classical formula"""
        family = CubeFamily(((1.0,),), (0.5,), 32)
        report = ap_constant_estimate(power([0.5]), p, family)
        oracle = scalar_ap_oracle(lambda pts: np.abs(pts[:, 0]) ** 0.5, p, [1.0], 0.5, 32)
        assert report.estimate == pytest.approx(oracle, rel=1e-8)

    def test_p_must_exceed_one(self):
        with pytest.raises(ParameterError):
            ap_constant_estimate(identity(), 1.0, CubeFamily(((0.0,),), (1.0,)))


class TestA1Constants:

    def test_constant_weight(self):
        report = a1_constant_estimate(identity(2), CubeFamily(((0.0,),), (1.0,), 16))
        assert report.estimate == pytest.approx(1.0)

    def test_decreasing_power_is_a1(self, families):
        """Test |x|^{-1/2} has a finite A_1 constant"""
        report = a1_constant_estimate(power([-0.5]), families)
        assert not report.divergent

    def test_increasing_power_is_not_a1(self, families):
        """Test |x|^{1/2} blows up: its minimum on cubes at 0 vanishes"""
        report = a1_constant_estimate(power([0.5]), families)
        assert report.divergent

    def test_scalar_oracle(self):
        family = CubeFamily(((2.0,),), (1.0,), 32)
        report = a1_constant_estimate(power([-0.5]), family)
        oracle = scalar_a1_oracle(lambda pts: np.abs(pts[:, 0]) ** -0.5, [2.0], 1.0, 32)
        assert report.estimate == pytest.approx(oracle, rel=1e-10)


class TestDoubling:

    def test_lebesgue_measure(self):
        """Test W = I doubles like Lebesgue measure: beta = n = 1"""
        estimate = doubling_exponent_estimate(identity(), 2.0, [[0.0], [3.0]], [0.5, 1.0])
        assert estimate.beta == pytest.approx(1.0, abs=1e-12)
        assert estimate.constant == pytest.approx(2.0)

    def test_linear_weight(self):
        """Test |t| at p = 1 has doubling exponent 2"""
        estimate = doubling_exponent_estimate(power([1.0]), 1.0, [[0.0], [1.0]], [0.5, 1.0])
        assert estimate.beta == pytest.approx(2.0, abs=1e-10)

    def test_direction_spread(self):
        """Test the exponent is reported per direction"""
        estimate = doubling_exponent_estimate(power([0.0, 1.0]), 1.0, [[0.0]], [1.0])
        assert estimate.per_direction == pytest.approx((1.0, 2.0))
        assert estimate.spread == pytest.approx(1.0)


class TestConvolutionProbe:

    def test_bounded_by_kernel_mass(self, small_grid):
        """Test ||g_delta * f|| <= ||g_delta||_1 ||f|| = 2 ||f|| for W = I"""
        f = sample_closed_form("gaussian", {"sigma": 1.0}, small_grid)
        worst, ratios = convolution_bound_probe(identity(), 2.0, f, [0.5, 1.0, 4.0])
        assert len(ratios) == 3
        assert 0.0 < worst <= 2.0 + 1e-9

    def test_zero_signal(self, small_grid):
        f = VectorSignal(small_grid, np.zeros((1, small_grid.M), dtype=complex))
        assert convolution_bound_probe(identity(), 2.0, f, [1.0]) == (0.0, [0.0])


class TestModerateGrowth:

    def test_identity(self):
        """Test int <x>^{-5/2} over the box stays below its value on the line"""
        grid = Grid(n=1, T=8 * math.pi, M=512)
        value = moderate_growth_integral(identity(), 2.0, grid)
        assert 2.0 < value < 2.4
