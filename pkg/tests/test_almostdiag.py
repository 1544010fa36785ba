import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from src.analysis.almostdiag import (
    DecayMatrix,
    ad_membership_scalar,
    ad_membership_weighted,
    apply,
    boundedness_probe,
    compose,
    fit_membership,
    le_sq_check,
    membership_trend,
    omega_bound,
    omega_matrix,
    omega_weight,
    symmetric_bound,
)
from src.analysis.coefficients import CoeffSeq, IndexSpace
from src.models.schemas import AdParams, CoveringParams, SmoothnessParams
from src.utils.errors import ParameterError, StructuralError, WindowError


@pytest.fixture
def params():
    return CoveringParams(alpha=0.5, a=math.pi, Kmax=6)


@pytest.fixture
def ad():
    return AdParams(J=2.0, delta=1.0, M=5.0, n=1)


@pytest.fixture
def space(params):
    return IndexSpace.window(params, 2, 4)


class TestDecayMatrix:

    def test_shape_checked(self, space):
        with pytest.raises(StructuralError):
            DecayMatrix(space, space, sparse.csr_matrix((3, 3)))

    def test_entry(self, space):
        A = DecayMatrix.identity(space, 2.0)
        assert A.entry(((1,), (0,)), ((1,), (0,))) == 2.0
        assert A.entry(((1,), (0,)), ((0,), (0,))) == 0.0

    def test_triplets(self, space):
        """Test the tabular form lists the nonzero entries in key order"""
        frame = DecayMatrix.identity(space).to_frame()
        assert list(frame.columns) == ["j0", "l0", "k0", "m0", "re", "im"]
        assert len(frame) == len(space)
        assert (frame["j0"].diff().dropna() >= 0).all()


class TestMembership:

    def test_identity_constant(self, space, ad):
        """Test the identity sits in the class with constant 1"""
        fit = fit_membership(DecayMatrix.identity(space), ad)
        assert fit.constant == pytest.approx(1.0)
        assert fit.hypotheses

    def test_omega_self_fit(self, space, ad):
        """Test the omega matrix fits its own bound with constant 1"""
        fit = ad_membership_scalar(omega_matrix(ad, space), ad, "omega")
        assert fit.constant == pytest.approx(1.0, abs=1e-12)

    def test_pointwise_omega(self, params, space, ad):
        """Test the direct evaluator agrees with the vectorized bound"""
        dense = omega_bound(ad, space, space)
        row, col = ((1,), (2,)), ((-2,), (-1,))
        value = omega_weight(ad, params, row, col)
        assert value == pytest.approx(dense[space.index(row), space.index(col)], rel=1e-12)

    def test_hypotheses_reported(self, space):
        """Test M <= max(2J, |s| + n/2) is flagged"""
        weak = AdParams(J=2.0, M=3.0, n=1)
        fit = fit_membership(DecayMatrix.identity(space), weak)
        assert not fit.hypotheses
        assert any("M=3.0" in message for message in fit.messages)

    def test_weighted_bound(self, space, ad):
        assert ad_membership_weighted(DecayMatrix.identity(space), ad).constant == pytest.approx(1.0)

    def test_scalar_class_refuses_weighted(self, space, ad):
        with pytest.raises(ParameterError):
            ad_membership_scalar(DecayMatrix.identity(space), ad, "weighted")

    def test_unknown_bound(self, space, ad):
        with pytest.raises(ParameterError):
            fit_membership(DecayMatrix.identity(space), ad, "gaussian")

    def test_empty_window(self, params, ad):
        empty = IndexSpace(params, [])
        with pytest.raises(WindowError):
            fit_membership(DecayMatrix.zeros(empty, empty), ad)

    def test_trend_of_identity(self, params, ad):
        """Test the fitted constant does not drift as the window grows"""
        windows = [DecayMatrix.identity(IndexSpace.window(params, 1, lmax)) for lmax in (2, 4)]
        constants, drift = membership_trend(windows, ad)
        assert constants == pytest.approx([1.0, 1.0])
        assert drift == pytest.approx(0.0)


class TestBoundShape:

    @given(
        J=st.floats(min_value=0.5, max_value=4.0),
        M=st.floats(min_value=0.0, max_value=8.0),
        rows=st.tuples(st.integers(0, 3), st.integers(0, 4)),
        cols=st.tuples(st.integers(0, 3), st.integers(0, 4)),
    )
    @settings(max_examples=30, deadline=None)
    def test_symmetric_bound_exchanges(self, J, M, rows, cols):
        """Property: swapping the row and column windows transposes the symmetric bound"""
        params = CoveringParams(alpha=0.5, a=math.pi, Kmax=6)
        ad = AdParams(J=J, M=M, n=1)
        left = IndexSpace.window(params, *rows)
        right = IndexSpace.window(params, *cols)
        np.testing.assert_allclose(
            symmetric_bound(ad, left, right), symmetric_bound(ad, right, left).T, rtol=1e-12
        )

    @given(
        J=st.floats(min_value=0.5, max_value=4.0),
        dJ=st.floats(min_value=0.0, max_value=2.0),
        M=st.floats(min_value=0.0, max_value=8.0),
        dM=st.floats(min_value=0.0, max_value=4.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_stronger_decay_shrinks_bound(self, J, dJ, M, dM):
        """Property: raising J and M lowers the bound and raises the fitted constant"""
        space = IndexSpace.window(CoveringParams(alpha=0.5, a=math.pi, Kmax=6), 2, 4)
        weak = AdParams(J=J, M=M, n=1)
        strong = AdParams(J=J + dJ, M=M + dM, n=1)
        assert np.all(
            symmetric_bound(strong, space, space) <= symmetric_bound(weak, space, space) * (1 + 1e-12)
        )
        A = omega_matrix(AdParams(J=2.0, delta=1.0, n=1), space)
        assert fit_membership(A, strong).constant >= fit_membership(A, weak).constant * (1 - 1e-12)

    def test_hypotheses_survive_larger_M(self, space):
        """Test a passing parameter set keeps passing as M grows"""
        identity = DecayMatrix.identity(space)
        for M in (5.0, 6.0, 10.0):
            assert fit_membership(identity, AdParams(J=2.0, M=M, n=1)).hypotheses


class TestOperators:

    def test_identity_apply(self, params, space, rng):
        """Test the identity leaves a sequence unchanged"""
        c = CoeffSeq.random(params, 2, space.keys, rng, density=0.3)
        out = apply(DecayMatrix.identity(space), c)
        for k, l in c.support():
            assert out.get(k, l) == pytest.approx(c.get(k, l))

    def test_support_outside_window(self, params, space):
        c = CoeffSeq.spike(params, 1, (5,), (0,))
        with pytest.raises(WindowError):
            apply(DecayMatrix.identity(space), c)

    def test_compose(self, space):
        A = DecayMatrix.identity(space, 3.0)
        product = compose(A, DecayMatrix.identity(space, 2.0))
        assert product.entry(((0,), (0,)), ((0,), (0,))) == 6.0

    def test_compose_mismatch(self, params, space):
        other = IndexSpace.window(params, 1, 1)
        with pytest.raises(StructuralError):
            compose(DecayMatrix.identity(space), DecayMatrix.identity(other))

    def test_boundedness_of_identity(self, space):
        """Test ||I c|| / ||c|| = 1 on every trial"""
        report = boundedness_probe(DecayMatrix.identity(space), SmoothnessParams(alpha=0.5), trials=10)
        assert report.ratios == pytest.approx([1.0] * 10)

    def test_boundedness_of_scaling(self, space):
        """Test lambda I has ratio |lambda|"""
        report = boundedness_probe(
            DecayMatrix.identity(space, -2.5), SmoothnessParams(alpha=0.5, s=1.0), trials=5
        )
        assert report.low == pytest.approx(2.5)
        assert report.high == pytest.approx(2.5)

    def test_omega_matrix_bounded(self, params):
        """Test the omega matrix at J = n/min(1,q) + 1 stays bounded as the window grows"""
        ad = AdParams(J=2.0, delta=1.0, M=5.0, n=1)
        assert ad.J == ad.scalar_threshold + 1
        sp = SmoothnessParams(alpha=0.5)
        means = []
        for lmax in (8, 16):
            Omega = omega_matrix(ad, IndexSpace.window(params, 2, lmax))
            report = boundedness_probe(Omega, sp, trials=50, seed=3)
            assert 0.0 < report.low <= report.high < math.inf
            means.append(float(np.mean(report.ratios)))
        assert abs(means[1] - means[0]) / means[0] <= 0.1


class TestLocalization:

    def test_lebesgue_ratio(self):
        """Test w = 1, L = 2, a = pi gives 2a / (pi (L - 1)) = 2"""
        covering = CoveringParams(alpha=0.5, a=math.pi, Kmax=6)
        ratio = le_sq_check(lambda pts: np.ones(len(pts)), 1.0, covering, 2, 3, 2.0)
        assert ratio == pytest.approx(2.0, rel=1e-6)

    def test_steeper_kernel(self):
        """Test L = 3 halves the ratio"""
        covering = CoveringParams(alpha=0.0, a=math.pi, Kmax=6)
        ratio = le_sq_check(lambda pts: np.ones(len(pts)), 1.0, covering, 0, 0, 3.0)
        assert ratio == pytest.approx(1.0, rel=1e-6)

    def test_kernel_must_beat_doubling(self, params):
        with pytest.raises(ParameterError):
            le_sq_check(lambda pts: np.ones(len(pts)), 2.0, params, 0, 0, 2.0)
