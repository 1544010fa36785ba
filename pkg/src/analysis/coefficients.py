"""
Coefficient sequences on the (k, l) lattice.

A CoeffSeq stores one tensor block per frequency index k: the per-axis l ranges
and a (N, L_1, ..., L_n) array of vector entries. IndexSpace flattens a finite
set of (k, l) keys for matrix work and carries the scale, frequency centre and
space centre of each key.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.analysis.covering import Index, TimeCube, band_order, band_side, cube, r_of_k
from src.models.schemas import CoveringParams
from src.utils.errors import StructuralError

logger = logging.getLogger(__name__)

Key = Tuple[Index, Index]


@dataclass
class CoeffBlock:
    k: Index
    axes: Tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        expected = tuple(len(a) for a in self.axes)
        if self.values.shape[1:] != expected:
            raise StructuralError(
                f"block k={self.k}: values {self.values.shape[1:]} do not match l ranges {expected}"
            )

    def keys(self) -> Iterator[Index]:
        return (tuple(int(v) for v in ell) for ell in itertools.product(*self.axes))

    def position(self, l: Index) -> Optional[Tuple[int, ...]]:
        pos = []
        for axis, v in zip(self.axes, l):
            hit = np.nonzero(axis == v)[0]
            if len(hit) == 0:
                return None
            pos.append(int(hit[0]))
        return tuple(pos)


@dataclass
class CoeffSeq:
    """
    Finitely supported map (k, l) -> C^N.

    `period` is the box period of the lattice the entries live on (None: the
    nominal cubes of the covering).
    """

    params: CoveringParams
    N: int
    blocks: Dict[Index, CoeffBlock] = field(default_factory=dict)
    period: Optional[float] = None

    # ---- construction ----

    def set_block(self, k: Index, axes: Sequence[np.ndarray], values: np.ndarray) -> None:
        kk = tuple(int(v) for v in k)
        if len(kk) != self.params.n:
            raise StructuralError(f"k={kk} must have {self.params.n} entries")
        vals = np.asarray(values, dtype=complex)
        if vals.shape[0] != self.N:
            raise StructuralError(f"block k={kk} has {vals.shape[0]} components, expected {self.N}")
        self.blocks[kk] = CoeffBlock(kk, tuple(np.asarray(a, dtype=int) for a in axes), vals)

    @classmethod
    def from_entries(
        cls,
        params: CoveringParams,
        N: int,
        entries: Mapping[Key, Sequence[complex]],
        period: Optional[float] = None,
    ) -> "CoeffSeq":
        """Pack sparse entries into the smallest l box per k (zero filled)."""
        seq = cls(params, N, period=period)
        by_k: Dict[Index, List[Tuple[Index, np.ndarray]]] = {}
        for (k, l), vec in entries.items():
            kk = tuple(int(v) for v in k)
            ll = tuple(int(v) for v in l)
            by_k.setdefault(kk, []).append((ll, np.asarray(vec, dtype=complex).reshape(N)))
        for k in sorted(by_k):
            ls = np.array([ll for ll, _ in by_k[k]])
            lo, hi = ls.min(axis=0), ls.max(axis=0)
            axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
            values = np.zeros((N,) + tuple(len(a) for a in axes), dtype=complex)
            for ll, vec in by_k[k]:
                values[(slice(None),) + tuple(np.asarray(ll) - lo)] = vec
            seq.set_block(k, axes, values)
        return seq

    @classmethod
    def spike(
        cls,
        params: CoveringParams,
        N: int,
        k: Index,
        l: Index,
        component: int = 0,
        period: Optional[float] = None,
    ) -> "CoeffSeq":
        vec = np.zeros(N, dtype=complex)
        vec[component] = 1.0
        return cls.from_entries(params, N, {(tuple(k), tuple(l)): vec}, period)

    @classmethod
    def random(
        cls,
        params: CoveringParams,
        N: int,
        keys: Sequence[Key],
        rng: np.random.Generator,
        density: float = 1.0,
        period: Optional[float] = None,
    ) -> "CoeffSeq":
        """Complex Gaussian entries on a random subset of `keys` (at least one entry)."""
        entries: Dict[Key, np.ndarray] = {}
        for key in keys:
            if rng.uniform() <= density:
                entries[key] = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        if not entries:
            key = keys[int(rng.integers(len(keys)))]
            entries[key] = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        return cls.from_entries(params, N, entries, period)

    # ---- access ----

    def entries(self) -> Iterator[Tuple[Index, Index, np.ndarray]]:
        """(k, l, vector) in k-major, l-minor order."""
        for k in sorted(self.blocks):
            block = self.blocks[k]
            for pos, l in zip(itertools.product(*[range(len(a)) for a in block.axes]), block.keys()):
                yield k, l, block.values[(slice(None),) + pos]

    def get(self, k: Index, l: Index) -> np.ndarray:
        block = self.blocks.get(tuple(k))
        pos = None if block is None else block.position(tuple(l))
        if pos is None:
            return np.zeros(self.N, dtype=complex)
        return block.values[(slice(None),) + pos]

    def support(self, tol: float = 0.0) -> List[Key]:
        return [(k, l) for k, l, v in self.entries() if np.max(np.abs(v)) > tol]

    def keys(self) -> List[Index]:
        return band_order(self.blocks)

    def side(self, k: Index) -> float:
        return band_side(self.params, k, self.period)

    def cube(self, k: Index, l: Index) -> TimeCube:
        return cube(self.params, k, l, self.period)

    # ---- arithmetic ----

    def map_values(self, func) -> "CoeffSeq":
        out = CoeffSeq(self.params, self.N, period=self.period)
        for k, block in self.blocks.items():
            out.set_block(k, block.axes, func(block.values))
        return out

    def scaled(self, factor: complex) -> "CoeffSeq":
        return self.map_values(lambda v: factor * v)

    def l2_norm(self) -> float:
        return math.sqrt(math.fsum(float(np.sum(np.abs(b.values) ** 2)) for b in self.blocks.values()))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(b.values))) for b in self.blocks.values() if b.values.size), default=0.0)

    # ---- flattening ----

    def to_vector(self, space: "IndexSpace") -> np.ndarray:
        """(N, len(space)) array; support outside the space is dropped."""
        out = np.zeros((self.N, len(space)), dtype=complex)
        for i, (k, l) in enumerate(space.keys):
            out[:, i] = self.get(k, l)
        return out

    @classmethod
    def from_vector(cls, params: CoveringParams, space: "IndexSpace", vector: np.ndarray) -> "CoeffSeq":
        vec = np.atleast_2d(vector)
        entries = {key: vec[:, i] for i, key in enumerate(space.keys)}
        return cls.from_entries(params, vec.shape[0], entries, space.period)

    def to_frame(self) -> pd.DataFrame:
        """One record per (k, l): k_*, l_* columns then re/im per component, k-major."""
        n = self.params.n
        rows = []
        for k, l, vec in self.entries():
            row: Dict[str, float] = {f"k{d}": k[d] for d in range(n)}
            row.update({f"l{d}": l[d] for d in range(n)})
            for c in range(self.N):
                row[f"re{c}"] = float(vec[c].real)
                row[f"im{c}"] = float(vec[c].imag)
            rows.append(row)
        columns = [f"k{d}" for d in range(n)] + [f"l{d}" for d in range(n)]
        columns += [f"{part}{c}" for c in range(self.N) for part in ("re", "im")]
        return pd.DataFrame(rows, columns=columns)

    @classmethod
    def from_frame(
        cls, params: CoveringParams, frame: pd.DataFrame, period: Optional[float] = None
    ) -> "CoeffSeq":
        n = params.n
        N = sum(1 for c in frame.columns if c.startswith("re"))
        entries = {}
        for record in frame.itertuples(index=False):
            row = record._asdict()
            k = tuple(int(row[f"k{d}"]) for d in range(n))
            l = tuple(int(row[f"l{d}"]) for d in range(n))
            entries[(k, l)] = [complex(row[f"re{c}"], row[f"im{c}"]) for c in range(N)]
        return cls.from_entries(params, N, entries, period)


class IndexSpace:
    """Ordered finite set of (k, l) keys with their geometry."""

    def __init__(
        self, params: CoveringParams, keys: Iterable[Key], period: Optional[float] = None
    ) -> None:
        self.params = params
        self.keys: List[Key] = [
            (tuple(int(v) for v in k), tuple(int(v) for v in l)) for k, l in keys
        ]
        self.period = period
        self._position = {key: i for i, key in enumerate(self.keys)}
        if len(self._position) != len(self.keys):
            raise StructuralError("duplicate keys in index space")

    @classmethod
    def window(
        cls,
        params: CoveringParams,
        kmax: int,
        lmax: int,
        period: Optional[float] = None,
    ) -> "IndexSpace":
        """|k|_inf <= kmax and |l|_inf <= lmax, k-major."""
        ks = itertools.product(range(-kmax, kmax + 1), repeat=params.n)
        ls = list(itertools.product(range(-lmax, lmax + 1), repeat=params.n))
        return cls(params, [(k, l) for k in ks for l in ls], period)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: Key) -> bool:
        return key in self._position

    def index(self, key: Key) -> int:
        return self._position[key]

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([r_of_k(self.params.alpha, k) for k, _ in self.keys])

    @cached_property
    def frequencies(self) -> np.ndarray:
        return np.asarray([k for k, _ in self.keys], dtype=float) * self.radii[:, None]

    @cached_property
    def positions(self) -> np.ndarray:
        sides = np.array([band_side(self.params, k, self.period) for k, _ in self.keys])
        return np.asarray([l for _, l in self.keys], dtype=float) * sides[:, None]

    def space_distance(self, other: "IndexSpace") -> np.ndarray:
        """|x_row - x_col|, wrapped to the box period when one is set."""
        diff = self.positions[:, None, :] - other.positions[None, :, :]
        if self.period is not None:
            diff = (diff + 0.5 * self.period) % self.period - 0.5 * self.period
        return np.linalg.norm(diff, axis=-1)

    def frequency_distance(self, other: "IndexSpace") -> np.ndarray:
        return np.linalg.norm(self.frequencies[:, None, :] - other.frequencies[None, :, :], axis=-1)
