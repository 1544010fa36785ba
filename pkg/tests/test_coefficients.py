import math

import numpy as np
import pytest

from src.analysis.coefficients import CoeffBlock, CoeffSeq, IndexSpace
from src.models.schemas import CoveringParams
from src.utils.errors import StructuralError


@pytest.fixture
def params():
    return CoveringParams(alpha=0.0, a=math.pi, Kmax=4)


@pytest.fixture
def seq(params):
    return CoeffSeq.from_entries(
        params,
        2,
        {
            ((0,), (-1,)): [1.0, 0.0],
            ((0,), (2,)): [0.0, 1j],
            ((-1,), (0,)): [3.0, 4.0],
        },
    )


class TestCoeffSeq:

    def test_spike(self, params):
        """Test a spike has one nonzero entry"""
        spike = CoeffSeq.spike(params, 2, (1,), (3,), component=1)
        assert spike.get((1,), (3,)) == pytest.approx([0.0, 1.0])
        assert np.all(spike.get((1,), (2,)) == 0)
        assert spike.support() == [((1,), (3,))]

    def test_from_entries_packs_smallest_box(self, seq):
        """Test every band stores the smallest l range holding its entries"""
        block = seq.blocks[(0,)]
        assert list(block.axes[0]) == [-1, 0, 1, 2]
        assert np.all(seq.get((0,), (0,)) == 0)
        assert seq.get((0,), (2,)) == pytest.approx([0.0, 1j])

    def test_support_skips_fill(self, seq):
        assert sorted(seq.support()) == [((-1,), (0,)), ((0,), (-1,)), ((0,), (2,))]

    def test_keys_in_band_order(self, seq):
        assert seq.keys() == [(0,), (-1,)]

    def test_norms(self, seq):
        """Test the l2 norm and largest entry"""
        assert seq.l2_norm() == pytest.approx(math.sqrt(27.0))
        assert seq.max_abs() == pytest.approx(4.0)
        assert seq.scaled(2.0).max_abs() == pytest.approx(8.0)

    def test_component_count_checked(self, params):
        seq = CoeffSeq(params, 2)
        with pytest.raises(StructuralError):
            seq.set_block((0,), [np.arange(3)], np.zeros((1, 3)))

    def test_index_length_checked(self, params):
        seq = CoeffSeq(params, 1)
        with pytest.raises(StructuralError):
            seq.set_block((0, 0), [np.arange(3)], np.zeros((1, 3)))

    def test_block_shape_checked(self):
        with pytest.raises(StructuralError):
            CoeffBlock((0,), (np.arange(3),), np.zeros((1, 4)))

    def test_random_is_seeded(self, params):
        """Test random sequences repeat under a seed and never come out empty"""
        keys = IndexSpace.window(params, 1, 2).keys
        first = CoeffSeq.random(params, 1, keys, np.random.default_rng(5), density=0.5)
        second = CoeffSeq.random(params, 1, keys, np.random.default_rng(5), density=0.5)
        assert first.support() == second.support()
        empty = CoeffSeq.random(params, 1, keys, np.random.default_rng(5), density=0.0)
        assert len(empty.support()) == 1

    def test_vector_layout(self, params, seq):
        """Test flattening onto an index space keeps entries in key order and drops the rest"""
        space = IndexSpace(params, [((0,), (2,)), ((-1,), (0,))])
        vector = seq.to_vector(space)
        assert vector.shape == (2, 2)
        assert vector[:, 1] == pytest.approx([3.0, 4.0])
        back = CoeffSeq.from_vector(params, space, vector)
        assert back.get((0,), (2,)) == pytest.approx([0.0, 1j])
        assert np.all(back.get((0,), (-1,)) == 0)

    def test_frame_columns(self, params, seq):
        """Test the tabular form: index columns then re/im per component"""
        frame = seq.to_frame()
        assert list(frame.columns) == ["k0", "l0", "re0", "im0", "re1", "im1"]
        restored = CoeffSeq.from_frame(params, frame)
        assert restored.support() == seq.support()


class TestIndexSpace:

    def test_window_size(self, params):
        """Test (2 kmax + 1)(2 lmax + 1) keys, k-major"""
        space = IndexSpace.window(params, 2, 3)
        assert len(space) == 35
        assert space.keys[0] == ((-2,), (-3,))
        assert ((0,), (0,)) in space

    def test_duplicates(self, params):
        with pytest.raises(StructuralError):
            IndexSpace(params, [((0,), (0,)), ((0,), (0,))])

    def test_geometry(self):
        """Test r_k, xi_k and x_{k,l} at alpha = 1/2, a = pi"""
        params = CoveringParams(alpha=0.5, a=math.pi, Kmax=4)
        space = IndexSpace(params, [((2,), (1,))])
        assert space.radii[0] == pytest.approx(math.sqrt(5.0))
        assert space.frequencies[0, 0] == pytest.approx(2.0 * math.sqrt(5.0))
        assert space.positions[0, 0] == pytest.approx(1.0 / math.sqrt(5.0))

    def test_periodic_distance(self, params):
        """Test space distances wrap to the period"""
        keys = [((0,), (0,)), ((0,), (9,))]
        assert IndexSpace(params, keys).space_distance(IndexSpace(params, keys))[0, 1] == 9.0
        wrapped = IndexSpace(params, keys, period=10.0)
        assert wrapped.space_distance(wrapped)[0, 1] == pytest.approx(1.0)

    def test_frequency_distance(self, params):
        space = IndexSpace(params, [((0,), (0,)), ((3,), (0,))])
        assert space.frequency_distance(space)[0, 1] == pytest.approx(3.0)
