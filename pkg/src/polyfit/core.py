"""Datasets and the exact structures that define ground truth.

The key-cumulative array answers SUM/COUNT exactly by two binary searches;
the aggregate max-tree answers MAX/MIN exactly by opening at most two
root-to-leaf paths.  Both double as the refinement fallback of the
approximate indexes.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .btree import FANOUT, StaticBTree
from .errors import EmptyInput, InvalidRange, NonFiniteValue

NEG_INF = float("-inf")


class AggregateKind(enum.Enum):
    SUM = "sum"
    COUNT = "count"
    MIN = "min"
    MAX = "max"

    @classmethod
    def parse(cls, value: "str | AggregateKind") -> "AggregateKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())

    @property
    def is_additive(self) -> bool:
        return self in (AggregateKind.SUM, AggregateKind.COUNT)


class Mode(enum.Enum):
    ABS = "abs"
    REL = "rel"


@dataclass(frozen=True)
class ErrorSpec:
    mode: Mode
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a positive finite number")

    @classmethod
    def absolute(cls, eps: float) -> "ErrorSpec":
        return cls(Mode.ABS, eps)

    @classmethod
    def relative(cls, eps: float) -> "ErrorSpec":
        return cls(Mode.REL, eps)


class Record(NamedTuple):
    key: float
    measure: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Records with strictly ascending, distinct keys."""

    keys: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        if len(self.keys) == 0:
            raise EmptyInput("dataset must hold at least one record")
        if len(self.keys) != len(self.measures):
            raise ValueError("keys and measures differ in length")
        if len(self.keys) > 1 and not np.all(np.diff(self.keys) > 0):
            raise ValueError("keys must be strictly ascending")
        self.keys.setflags(write=False)
        self.measures.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def records(self) -> list[Record]:
        return [Record(float(k), float(m)) for k, m in zip(self.keys, self.measures)]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.keys, other.keys) and np.array_equal(
            self.measures, other.measures
        )


def ingest(rows: Iterable[tuple[float, float]], agg: "AggregateKind | str") -> Dataset:
    """Sort rows by key and collapse repeated keys.

    SUM/MIN/MAX merge a key group with the aggregate itself; COUNT replaces
    the group by its cardinality so that queries can run as SUM afterwards.

    Raises
    ------
    EmptyInput
        No rows.
    NonFiniteValue
        A key or measure is NaN or infinite (``row`` gives its position).
    """
    agg = AggregateKind.parse(agg)
    arr = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no rows to ingest")
    arr = arr.reshape(-1, 2)
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        raise NonFiniteValue(int(np.flatnonzero(bad)[0]))

    order = np.argsort(arr[:, 0], kind="stable")
    keys = arr[order, 0]
    measures = arr[order, 1]
    if agg is AggregateKind.COUNT:
        measures = np.ones_like(measures)
    uniq, start = np.unique(keys, return_index=True)
    if len(uniq) == len(keys):
        return Dataset(keys.copy(), measures.copy())
    if agg in (AggregateKind.SUM, AggregateKind.COUNT):
        merged = np.add.reduceat(measures, start)
    elif agg is AggregateKind.MAX:
        merged = np.maximum.reduceat(measures, start)
    else:
        merged = np.minimum.reduceat(measures, start)
    return Dataset(uniq.astype(float), merged.astype(float))


def _two_sum(a, b):
    """``s, e`` with ``s = fl(a + b)`` and ``a + b == s + e`` exactly."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


class KeyCumArray:
    """Prefix sums of measures aligned with the dataset keys.

    Each prefix is held as an unevaluated pair ``cum + comp`` (the running
    float sum plus the accumulated rounding error of that sum), so a range
    sum is a difference of two near-exact prefixes rather than of two
    rounded ones.
    """

    def __init__(self, keys: np.ndarray, cum: np.ndarray, comp: np.ndarray | None = None):
        self.keys_arr = np.asarray(keys, dtype=float)
        self.cum_arr = np.asarray(cum, dtype=float)
        self.comp_arr = np.zeros_like(self.cum_arr) if comp is None else np.asarray(comp, dtype=float)
        self._keys = self.keys_arr.tolist()
        self._cum = self.cum_arr.tolist()
        self._comp = self.comp_arr.tolist()

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self._keys, self._cum))

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def total(self) -> float:
        return self._cum[-1] + self._comp[-1]

    def _prefix(self, i: int) -> tuple[float, float]:
        return (self._cum[i], self._comp[i]) if i >= 0 else (0.0, 0.0)

    def cf(self, q: float) -> float:
        """Cumulative value at the largest key <= q (0 below the domain)."""
        hi, lo = self._prefix(bisect_right(self._keys, q) - 1)
        return hi + lo

    def cf_before(self, q: float) -> float:
        """Cumulative value at the largest key strictly < q."""
        hi, lo = self._prefix(bisect_left(self._keys, q) - 1)
        return hi + lo

    def exact_sum(self, l: float, u: float) -> float:
        if l > u:
            raise InvalidRange(f"lower bound {l} exceeds upper bound {u}")
        hu, lu = self._prefix(bisect_right(self._keys, u) - 1)
        hl, ll = self._prefix(bisect_left(self._keys, l) - 1)
        d, e = _two_sum(hu, -hl)
        return d + (e + (lu - ll))


def build_cum_array(d: Dataset) -> KeyCumArray:
    m = np.asarray(d.measures, dtype=float)
    cum = np.cumsum(m)
    prev = np.concatenate([[0.0], cum[:-1]])
    # rounding error of each step cum[i] = fl(cum[i-1] + m[i])
    bb = cum - prev
    err = (prev - (cum - bb)) + (m - bb)
    return KeyCumArray(d.keys, cum, np.cumsum(err))


def exact_sum(a: KeyCumArray, l: float, u: float) -> float:
    return a.exact_sum(l, u)


class AggregateMaxTree:
    """Static fan-out tree over the records; every entry stores its subtree max."""

    def __init__(self, keys: np.ndarray, measures: np.ndarray, fanout: int = FANOUT):
        self._keys = np.asarray(keys, dtype=float).tolist()
        self.tree = StaticBTree(self._keys, np.asarray(measures, dtype=float).tolist(),
                                op=max, fanout=fanout)

    @property
    def root_max(self) -> float:
        return max(self.tree.agg_levels[-1])

    def positions(self, l: float, u: float) -> tuple[int, int]:
        return bisect_left(self._keys, l), bisect_right(self._keys, u) - 1

    def exact_max(self, l: float, u: float) -> float:
        if l > u:
            raise InvalidRange(f"lower bound {l} exceeds upper bound {u}")
        i, j = self.positions(l, u)
        if i > j:
            return NEG_INF
        value, _ = self.tree.reduce(i, j)
        return value


def build_max_tree(d: Dataset, fanout: int = FANOUT) -> AggregateMaxTree:
    return AggregateMaxTree(d.keys, d.measures, fanout)


def exact_max(t: AggregateMaxTree, l: float, u: float) -> float:
    return t.exact_max(l, u)


def exact_function(d: Dataset, agg: "AggregateKind | str") -> tuple[np.ndarray, np.ndarray]:
    """Samples (k_i, F(k_i)) of the function the index approximates.

    SUM/COUNT use the key-cumulative function, MAX the key-measure function
    (the measure itself at each key) and MIN the negated measures.
    """
    agg = AggregateKind.parse(agg)
    if agg.is_additive:
        return d.keys.copy(), np.cumsum(d.measures)
    if agg is AggregateKind.MAX:
        return d.keys.copy(), d.measures.copy()
    return d.keys.copy(), -d.measures
