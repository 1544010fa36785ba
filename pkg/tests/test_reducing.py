import math

import numpy as np
import pytest

from src.analysis.covering import cube
from src.analysis.reducing import (
    ReducingFamily,
    build_reducing_family,
    fit_ellipsoid,
    quadrature_nodes,
    reducing_operator,
    rho,
    strong_doubling_bound,
    strong_doubling_check,
)
from src.analysis.weights import constant, constant_plus_power, identity, power, unit_directions
from src.models.schemas import CoveringParams
from src.utils.errors import ParameterError, StructuralError


@pytest.fixture
def unit():
    """alpha = 0 and a = pi: Q(0, l) = [l, l + 1)."""
    return CoveringParams(alpha=0.0, a=math.pi, Kmax=4)


class TestExactOperators:

    def test_identity(self, unit):
        """Test W = I gives A_Q = I"""
        A = reducing_operator(identity(2), 2.0, cube(unit, 0, 0))
        assert A == pytest.approx(np.eye(2))

    def test_constant(self, unit):
        """Test a constant D gives D^(1/2)"""
        A = reducing_operator(constant(np.diag([4.0, 9.0])), 2.0, cube(unit, 1, 5))
        assert A == pytest.approx(np.diag([2.0, 3.0]))

    def test_cube_average(self, unit):
        """Test W = diag(1, 1 + t^2) on [0, 1] gives diag(1, 2/sqrt(3))"""
        W = constant_plus_power(np.eye(2), [0.0, 2.0], [0.0, 1.0])
        A = reducing_operator(W, 2.0, cube(unit, 0, 0))
        assert A == pytest.approx(np.diag([1.0, 2.0 / math.sqrt(3.0)]), abs=1e-12)

    def test_norm_equality(self, unit):
        """Test |A_Q y| = rho_{2,Q}(y) for p = 2"""
        W = power([0.5, 1.5], eps=0.2)
        Q = cube(unit, 0, 2)
        A = reducing_operator(W, 2.0, Q)
        dirs = unit_directions(2, 10, seed=4)
        assert np.linalg.norm(dirs @ A.T, axis=-1) == pytest.approx(rho(W, 2.0, Q, dirs), rel=1e-12)

    def test_exact_needs_p2(self, unit):
        with pytest.raises(ParameterError):
            reducing_operator(identity(), 3.0, cube(unit, 0, 0))

    def test_unknown_method(self, unit):
        with pytest.raises(ParameterError):
            reducing_operator(identity(), 2.0, cube(unit, 0, 0), method="svd")

    def test_quadrature_nodes(self):
        """Test the node count follows max(8, ceil(4 side / h))"""
        assert quadrature_nodes(1.0) == 8
        assert quadrature_nodes(1.0, 0.1) == 40
        assert quadrature_nodes(0.1, 0.1) == 8


class TestEllipsoidFit:

    def test_constant_weight_is_quadratic(self, unit):
        """Test rho_3 of a constant weight is exactly |W^(1/3) y|"""
        A, kappa = fit_ellipsoid(constant(np.diag([8.0, 1.0])), 3.0, cube(unit, 0, 0))
        assert A == pytest.approx(np.diag([2.0, 1.0]), abs=1e-8)
        assert kappa == pytest.approx(1.0, abs=1e-8)

    def test_kappa_bound(self, unit):
        """Test the fitted condition factor stays within sqrt(N)"""
        _, kappa = fit_ellipsoid(power([0.5, 2.0], eps=0.1), 1.5, cube(unit, 0, 1))
        assert 1.0 <= kappa <= math.sqrt(2.0) + 1e-9


class TestFamilies:

    def test_duplicates_built_once(self, unit):
        keys = [((0,), (0,)), ((0,), (0,)), ((0,), (1,))]
        family = build_reducing_family(identity(), 2.0, unit, keys)
        assert len(family) == 2
        assert ((0,), (1,)) in family

    def test_missing_cube(self):
        with pytest.raises(StructuralError):
            ReducingFamily(p=2.0, method="exact-p2")[((0,), (0,))]

    def test_ellipsoid_family_tracks_kappa(self, unit):
        keys = [((0,), (0,)), ((1,), (2,))]
        family = build_reducing_family(power([0.5, 2.0], eps=0.1), 3.0, unit, keys, "ellipsoid-fit")
        assert family.kappa >= 1.0
        assert family.method == "ellipsoid-fit"


class TestStrongDoubling:

    def test_bound_on_same_cube(self, unit):
        Q = cube(unit, 0, 0)
        assert strong_doubling_bound(unit, Q, Q, 1.0, 2.0) == 1.0

    def test_bound_grows_with_distance(self, unit):
        """Test (1 + |x_Q - x_P|)^(beta/p) for equal scales"""
        bound = strong_doubling_bound(unit, cube(unit, 0, 0), cube(unit, 0, 3), 2.0, 2.0)
        assert bound == pytest.approx(4.0)

    def test_identity_family(self, unit):
        """Test ||A_Q A_P^-1|| = 1 fits below every bound"""
        keys = [((k,), (l,)) for k in (-1, 0, 1) for l in range(-2, 3)]
        family = build_reducing_family(identity(2), 2.0, unit, keys)
        report = strong_doubling_check(family, 1.0, 2.0, unit, count=None)
        assert report.pairs == len(keys) ** 2
        assert report.fitted_constant == pytest.approx(1.0)
        assert report.dilation_constant <= 1.0 + 1e-12

    def test_sampled_pairs(self, unit):
        keys = [((0,), (l,)) for l in range(6)]
        family = build_reducing_family(identity(), 2.0, unit, keys)
        assert strong_doubling_check(family, 1.0, 2.0, unit, count=10, seed=3).pairs == 10
