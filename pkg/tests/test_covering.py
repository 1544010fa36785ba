import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from src.analysis.covering import (
    band_order,
    check_admissible,
    cube,
    cube_side,
    dilation_factor,
    index_set,
    is_commensurate,
    lattice_window,
    locate,
    neighbor_scale_ratio,
    patch,
    patch_neighbors,
    r_of_k,
    xi_of_k,
)
from src.models.schemas import CoveringParams
from src.utils.errors import ParameterError, UnsupportedEndpointError


class TestCoveringParams:

    def test_defaults(self):
        """Test c1 = sqrt(n) and a = max(2 c1, pi sqrt(n)/2) + 0.25"""
        params = CoveringParams(alpha=0.5)
        assert params.c1 == pytest.approx(1.0)
        assert params.a == pytest.approx(2.25)
        assert params.cube_unit == pytest.approx(math.pi / 2.25)

    def test_cube_constant_floor(self):
        """Test a below max(2 c1, pi sqrt(n)/2) is rejected"""
        with pytest.raises(ValidationError):
            CoveringParams(alpha=0.5, c1=1.0, a=1.5)

    def test_alpha_range(self):
        """Test alpha must lie in [0, 1)"""
        with pytest.raises(ValidationError):
            CoveringParams(alpha=1.0)


class TestPatches:

    def test_radius_and_center(self):
        """Test r_2 = sqrt(5) and xi_2 = 2 sqrt(5) at alpha = 1/2"""
        assert r_of_k(0.5, 2) == pytest.approx(math.sqrt(5.0))
        assert xi_of_k(0.5, 2)[0] == pytest.approx(2.0 * math.sqrt(5.0))

    def test_uniform_covering(self):
        """Test alpha = 0 gives unit radii at the integers"""
        p = patch(CoveringParams(alpha=0.0, c1=1.0, a=math.pi), 7)
        assert p.r == 1.0
        assert p.xi == (7.0,)
        assert p.radius == 1.0

    def test_dyadic_endpoint(self):
        """Test alpha = 1 is refused"""
        with pytest.raises(UnsupportedEndpointError):
            r_of_k(1.0, 3)

    def test_negative_alpha(self):
        with pytest.raises(ParameterError):
            r_of_k(-0.1, 3)

    @given(k=st.integers(min_value=-200, max_value=200), alpha=st.floats(min_value=0.0, max_value=0.9))
    @settings(max_examples=100, deadline=None)
    def test_radius_symmetric_and_at_least_one(self, k, alpha):
        """Property: r_k = r_-k >= 1"""
        assert r_of_k(alpha, k) >= 1.0
        assert r_of_k(alpha, k) == r_of_k(alpha, -k)

    @given(k=st.integers(min_value=0, max_value=200), alpha=st.floats(min_value=0.05, max_value=0.9))
    @settings(max_examples=100, deadline=None)
    def test_radius_increasing(self, k, alpha):
        """Property: r_k grows with |k| for alpha > 0"""
        assert r_of_k(alpha, k + 1) > r_of_k(alpha, k)

    def test_index_set_size(self):
        """Test the truncated lattice has (2 Kmax + 1)^n keys"""
        assert len(index_set(CoveringParams(alpha=0.5, Kmax=4))) == 9
        assert len(index_set(CoveringParams(alpha=0.5, n=2, Kmax=3))) == 49

    def test_band_order(self):
        """Test increasing |k| with lexicographic ties"""
        assert band_order([(1,), (-1,), (0,), (-2,)]) == [(0,), (-1,), (1,), (-2,)]


class TestCubes:

    def test_unit_cube(self):
        """Test alpha = 0, a = pi gives Q(0, 3) = [3, 4)"""
        Q = cube(CoveringParams(alpha=0.0, a=math.pi), 0, 3)
        assert Q.anchor == (3.0,)
        assert Q.side == pytest.approx(1.0)
        assert Q.contains([3.0])
        assert not Q.contains([4.0])

    def test_cube_constant_scales_side(self):
        """Test a = 2 pi halves the side: Q(0, 3) = [1.5, 2)"""
        Q = cube(CoveringParams(alpha=0.0, a=2 * math.pi), 0, 3)
        assert Q.anchor[0] == pytest.approx(1.5)
        assert Q.side == pytest.approx(0.5)

    def test_cube_shrinks_with_band(self):
        """Test alpha = 1/2, k = 2 gives Q(2, 0) = [0, 1/sqrt(5))"""
        Q = cube(CoveringParams(alpha=0.5, a=math.pi), 2, 0)
        assert Q.anchor == (0.0,)
        assert Q.side == pytest.approx(1.0 / math.sqrt(5.0))

    def test_index_length_checked(self):
        with pytest.raises(ParameterError):
            cube(CoveringParams(alpha=0.5, n=2), (1,), (0, 0))

    def test_locate(self):
        """Test every point lies in exactly the cube locate returns"""
        params = CoveringParams(alpha=0.5, a=math.pi)
        for x in (-2.3, 0.0, 0.44, 3.9):
            assert cube(params, 2, locate(params, 2, [x])).contains([x])

    def test_lattice_window(self):
        """Test one period of anchors in [-T, T)"""
        params = CoveringParams(alpha=0.0, a=math.pi)
        (ell,) = lattice_window(params, 0, 4.0)
        assert list(ell) == list(range(-4, 4))

    def test_commensurate(self):
        """Test the lattice repeats with the period exactly when 2T/side is an integer"""
        params = CoveringParams(alpha=0.0, a=math.pi)
        assert is_commensurate(params, 0, 4.0)
        assert not is_commensurate(params, 0, 4.3)
        assert cube_side(params, 0) == pytest.approx(1.0)

    def test_dilation_factor(self):
        """Test a cube needs no dilation to contain itself and 3 to reach a neighbour"""
        params = CoveringParams(alpha=0.0, a=math.pi)
        Q = cube(params, 0, 0)
        assert dilation_factor(Q, Q) == 1.0
        assert dilation_factor(cube(params, 0, 1), Q) == pytest.approx(3.0)


class TestAdmissibility:

    def test_overlapping_covering(self):
        """Test c1 = 1 at alpha = 0 covers the line with n0 = 3"""
        report = check_admissible(CoveringParams(alpha=0.0, c1=1.0, a=math.pi, Kmax=16))
        assert report.covers_domain
        assert report.first_gap is None
        assert report.n0 == 3
        assert report.neighbor_scale_ratio == pytest.approx(1.0)

    def test_gap_detected(self):
        """Test c1 = 0.4 leaves gaps between the patches"""
        report = check_admissible(CoveringParams(alpha=0.0, c1=0.4, Kmax=8))
        assert not report.covers_domain
        assert report.first_gap is not None
        assert report.n0 <= 3

    def test_neighbors(self):
        """Test N(5) = {4, 5, 6} for c1 = 1 and {5} for c1 = 0.4"""
        wide = CoveringParams(alpha=0.0, c1=1.0, a=math.pi, Kmax=16)
        narrow = CoveringParams(alpha=0.0, c1=0.4, Kmax=16)
        assert set(patch_neighbors(wide, 5)) == {(4,), (5,), (6,)}
        assert patch_neighbors(narrow, 5) == [(5,)]

    def test_grid_spacing_sets_step(self):
        """Test a frequency spacing samples coverage at a quarter of it"""
        params = CoveringParams(alpha=0.0, c1=1.0, a=math.pi, Kmax=16)
        coarse = check_admissible(params)
        fine = check_admissible(params, dxi=0.1)
        assert coarse.samples == 257
        assert fine.samples == 1281
        assert fine.covers_domain

    def test_narrow_gap_found_on_grid_step(self):
        """Test a gap of width 0.02 between patches is found at step dxi / 4"""
        report = check_admissible(CoveringParams(alpha=0.0, c1=0.49, Kmax=8), dxi=0.04)
        assert not report.covers_domain
        assert abs(report.first_gap % 1.0 - 0.5) < 0.01

    def test_size_ratio_bounded(self, half_params):
        """Test |B_k| / <xi>^(n alpha) stays within fixed positive bounds"""
        low, high = check_admissible(half_params).size_ratio_bounds
        assert 0.0 < low <= high < 10.0

    def test_neighbor_scales_comparable(self, half_params):
        """Test r_k / r_j stays bounded on intersecting pairs"""
        assert 1.0 <= neighbor_scale_ratio(half_params) < 4.0
