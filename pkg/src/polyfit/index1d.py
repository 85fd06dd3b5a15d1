"""The one-key index: segments under a static B-tree, plus query engines.

SUM/COUNT answers are a difference of two polynomial evaluations at snapped
endpoints.  MAX/MIN answers combine the exact per-node maxima of segments
fully inside the range with the polynomial maxima of the two boundary
segments.  Relative-error queries that fail the acceptance test fall back
to the exact structures.
"""

from __future__ import annotations

import enum
import math
import statistics
import time
from bisect import bisect_left, bisect_right
from typing import NamedTuple

import numpy as np

from .btree import FANOUT, StaticBTree
from .core import (
    NEG_INF,
    AggregateKind,
    AggregateMaxTree,
    Dataset,
    ErrorSpec,
    KeyCumArray,
    Mode,
    build_cum_array,
    build_max_tree,
    exact_function,
)
from .errors import DegreeOutOfRange, GuaranteeMismatch, InvalidRange
from .fitting import MAX_DEG_1D, PolyCoeffs, critical_points, eval_normalized
from .segmentation import Segment, SegmentSequence, segment_exponential, segment_plain

MAX_DEG_MAX_MODE = 3
BELOW_DOMAIN = None


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class QueryOutcome(NamedTuple):
    value: float
    refined: bool
    guarantee: ErrorSpec


def snap_position(keys: list[float], q: float, side: Side) -> int:
    """Position of the snapped key, -1 when below the domain."""
    if side is Side.RIGHT:
        return bisect_right(keys, q) - 1
    return bisect_left(keys, q) - 1


def snap(keys, q: float, side: Side | str):
    """RIGHT: largest key <= q.  LEFT: largest key < q.  ``BELOW_DOMAIN`` if none."""
    keys = list(keys)
    i = snap_position(keys, q, Side(side))
    return keys[i] if i >= 0 else BELOW_DOMAIN


def poly_max_on_range(p: PolyCoeffs, lo: float, hi: float) -> float:
    """Maximum of P on [lo, hi] from the borders and the zeros of P'."""
    if lo > hi:
        raise InvalidRange(f"lower bound {lo} exceeds upper bound {hi}")
    if p.deg > MAX_DEG_MAX_MODE:
        raise DegreeOutOfRange("zero-derivative evaluation supports degree <= 3")
    xl = (lo - p.offset) * p.scale
    xh = (hi - p.offset) * p.scale
    best = max(eval_normalized(p, xl), eval_normalized(p, xh))
    for xr in critical_points(p):
        if xl < xr < xh:
            v = eval_normalized(p, xr)
            if v > best:
                best = v
    return best


def lemma_delta(agg: AggregateKind, eps_abs: float) -> float:
    """Build threshold that makes ABS queries meet ``eps_abs``."""
    return eps_abs / 2.0 if agg.is_additive else eps_abs


def _rel_accept(approx: float, threshold: float) -> bool:
    # two-sided so negative measures are covered; with non-negative data the
    # lower branch can never fire
    return approx >= threshold or approx <= -threshold


class PolyIndex1D:
    """Immutable one-key index.  Build with :func:`build_index`."""

    def __init__(
        self,
        seq: SegmentSequence,
        agg: AggregateKind,
        keys: np.ndarray,
        measures: np.ndarray,
        build_ms: float = 0.0,
        fanout: int = FANOUT,
    ):
        self.seq = seq
        self.agg = agg
        self.deg = seq.deg
        self.delta = seq.delta
        self.build_ms = build_ms
        self.keys_arr = np.asarray(keys, dtype=float)
        self.measures_arr = np.asarray(measures, dtype=float)
        self._keys = self.keys_arr.tolist()
        self.n = len(self._keys)
        self.fanout = fanout
        self._polys = [s.poly for s in seq.segments]
        # (offset, scale, coeffs high-to-low); 0*x + c_top == c_top keeps Horner bit-identical
        self._horner = [(p.offset, p.scale, tuple(reversed(p.coeffs))) for p in self._polys]
        self._first = [s.first_idx for s in seq.segments]
        self._last = [s.last_idx for s in seq.segments]
        self.negated = agg is AggregateKind.MIN
        self._additive = agg.is_additive
        self.has_negative = bool((self.measures_arr < 0).any())

        if agg.is_additive:
            self.cum: KeyCumArray | None = build_cum_array(Dataset(self.keys_arr, self.measures_arr))
            self.max_tree: AggregateMaxTree | None = None
            seg_values = None
            self.eps_abs = 2.0 * self.delta
            self._rel_factor = 2.0 * self.delta
        else:
            f = -self.measures_arr if self.negated else self.measures_arr
            self.cum = None
            self.max_tree = AggregateMaxTree(self.keys_arr, f, fanout)
            seg_values = [float(f[s.first_idx:s.last_idx + 1].max()) for s in seq.segments]
            self.eps_abs = self.delta
            self._rel_factor = self.delta
        self.tree = StaticBTree([s.lo_key for s in seq.segments], seg_values, max, fanout)

    # -- structure ---------------------------------------------------------
    @property
    def segments(self) -> list[Segment]:
        return self.seq.segments

    def __len__(self) -> int:
        return len(self.seq)

    @property
    def keys(self) -> np.ndarray:
        return self.keys_arr

    @property
    def height(self) -> int:
        return self.tree.height

    def locate(self, key: float) -> int:
        """Index of the segment owning ``key`` (floor semantics between segments)."""
        return self.tree.locate(key)

    def model_bytes(self) -> int:
        """Bytes of the learned part: per segment the key span, coefficients, error."""
        per_seg = 8 * (2 + (self.deg + 1) + 2 + 1)
        seps = 8 * sum(len(level) for level in self.tree.key_levels[1:])
        aggs = 0
        if self.tree.agg_levels is not None:
            aggs = 8 * sum(len(level) for level in self.tree.agg_levels)
        return per_seg * len(self.seq) + seps + aggs

    # -- guarantees --------------------------------------------------------
    def _check_spec(self, spec: ErrorSpec) -> None:
        if spec.mode is Mode.ABS and spec.epsilon != self.eps_abs and not math.isclose(
            spec.epsilon, self.eps_abs, rel_tol=1e-12, abs_tol=0.0
        ):
            raise GuaranteeMismatch(
                f"index built with delta={self.delta} answers ABS queries with "
                f"eps_abs={self.eps_abs}, not {spec.epsilon}"
            )

    def rel_threshold(self, eps_rel: float) -> float:
        return self._rel_factor * (1.0 + 1.0 / eps_rel)

    # -- SUM / COUNT -------------------------------------------------------
    def _eval_at(self, pos: int) -> float:
        """P of the segment owning sample ``pos``, evaluated at that key.

        Segments start at sample positions, so the owner is found by one
        bisection over the segment start positions; this agrees with
        ``self.locate(keys[pos])`` and skips the per-level descent.
        """
        offset, scale, rev = self._horner[bisect_right(self._first, pos) - 1]
        x = (self._keys[pos] - offset) * scale
        acc = 0.0
        for c in rev:
            acc = acc * x + c
        return acc

    def approx_sum(self, l: float, u: float) -> float:
        keys = self._keys
        pu = bisect_right(keys, u) - 1
        pl = bisect_left(keys, l) - 1
        hi = self._eval_at(pu) if pu >= 0 else 0.0
        lo = self._eval_at(pl) if pl >= 0 else 0.0
        return hi - lo

    def query_sum(self, l: float, u: float, spec: ErrorSpec) -> QueryOutcome:
        if l > u:
            raise InvalidRange(f"lower bound {l} exceeds upper bound {u}")
        if not self._additive:
            raise TypeError(f"query_sum on a {self.agg.value} index")
        mode = spec.mode
        if mode is Mode.ABS:
            if spec.epsilon != self.eps_abs:
                self._check_spec(spec)
            return QueryOutcome(self.approx_sum(l, u), False, spec)
        approx = self.approx_sum(l, u)
        if not _rel_accept(approx, self.rel_threshold(spec.epsilon)):
            return QueryOutcome(self.cum.exact_sum(l, u), True, spec)
        return QueryOutcome(approx, False, spec)

    # -- MAX / MIN ---------------------------------------------------------
    def approx_max_parts(self, l: float, u: float):
        """The three contributions: left boundary, right boundary, covered nodes.

        Works on the internal (possibly negated) scale.  Returns ``None`` when
        no key lies in [l, u].
        """
        keys = self._keys
        a = bisect_left(keys, l)
        b = bisect_right(keys, u) - 1
        if a > b:
            return None
        sa = self.tree.locate(keys[a])
        sb = self.tree.locate(keys[b])
        pa = self._polys[sa]
        if sa == sb:
            return poly_max_on_range(pa, keys[a], keys[b]), NEG_INF, NEG_INF
        left = poly_max_on_range(pa, keys[a], keys[self._last[sa]])
        pb = self._polys[sb]
        right = poly_max_on_range(pb, keys[self._first[sb]], keys[b])
        covered = NEG_INF
        if sb - sa > 1:
            covered, _ = self.tree.reduce(sa + 1, sb - 1)
        return left, right, covered

    def query_max(self, l: float, u: float, spec: ErrorSpec) -> QueryOutcome:
        """MAX (or MIN, on a MIN index) over keys in [l, u].

        An empty range returns -inf for MAX and +inf for MIN, flagged exact.
        """
        if l > u:
            raise InvalidRange(f"lower bound {l} exceeds upper bound {u}")
        if self.agg.is_additive:
            raise TypeError(f"query_max on a {self.agg.value} index")
        self._check_spec(spec)
        sign = -1.0 if self.negated else 1.0
        parts = self.approx_max_parts(l, u)
        if parts is None:
            return QueryOutcome(sign * NEG_INF, True, spec)
        approx = max(parts)
        if spec.mode is Mode.REL and not _rel_accept(approx, self.rel_threshold(spec.epsilon)):
            return QueryOutcome(sign * self.max_tree.exact_max(l, u), True, spec)
        return QueryOutcome(sign * approx, False, spec)

    def query(self, l: float, u: float, spec: ErrorSpec) -> QueryOutcome:
        if self._additive:
            return self.query_sum(l, u, spec)
        return self.query_max(l, u, spec)

    def exact(self, l: float, u: float) -> float:
        """Exact answer from the fallback structures (original sign)."""
        if self.agg.is_additive:
            return self.cum.exact_sum(l, u)
        v = self.max_tree.exact_max(l, u)
        return -v if self.negated else v


def build_index(
    d: Dataset,
    agg: AggregateKind | str,
    deg: int,
    delta: float,
    method: str = "exp",
) -> PolyIndex1D:
    """Segment the exact function of ``d`` and index the pieces.

    ``method`` selects exponential-search ("exp") or one-key-at-a-time
    ("plain") greedy segmentation; both produce the same segments.
    """
    agg = AggregateKind.parse(agg)
    cap = MAX_DEG_1D if agg.is_additive else MAX_DEG_MAX_MODE
    if not isinstance(deg, (int, np.integer)) or not 1 <= deg <= cap:
        raise DegreeOutOfRange(f"degree {deg} outside [1, {cap}] for {agg.value}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    t0 = time.perf_counter()
    keys, values = exact_function(d, agg)
    segment = segment_exponential if method == "exp" else segment_plain
    seq = segment(keys, values, int(deg), float(delta), continuous_max=not agg.is_additive)
    build_ms = (time.perf_counter() - t0) * 1e3
    return PolyIndex1D(seq, agg, d.keys, d.measures, build_ms)


def query_sum(idx: PolyIndex1D, l: float, u: float, spec: ErrorSpec) -> QueryOutcome:
    return idx.query_sum(l, u, spec)


def query_max(idx: PolyIndex1D, l: float, u: float, spec: ErrorSpec) -> QueryOutcome:
    return idx.query_max(l, u, spec)


def tune(
    d: Dataset,
    agg: AggregateKind | str,
    degrees,
    deltas,
    workload,
    eps_rel: float = 0.01,
) -> list[dict]:
    """Measure every (deg, delta) pair on a workload of (l, u) ranges.

    Returns one row per pair with segment count, model bytes, build time,
    mean/median query latency (ns) and the REL refinement rate.
    """
    agg = AggregateKind.parse(agg)
    if not degrees or not deltas:
        raise ValueError("degree and delta grids must be non-empty")
    spec = ErrorSpec(Mode.REL, eps_rel)
    rows = []
    for deg in degrees:
        for delta in deltas:
            idx = build_index(d, agg, deg, delta)
            lat = []
            refined = 0
            for l, u in workload:
                t0 = time.perf_counter_ns()
                out = idx.query(l, u, spec)
                lat.append(time.perf_counter_ns() - t0)
                refined += out.refined
            rows.append({
                "deg": deg,
                "delta": delta,
                "segment_count": len(idx),
                "index_bytes": idx.model_bytes(),
                "build_ms": idx.build_ms,
                "mean_query_ns": statistics.fmean(lat) if lat else 0.0,
                "median_query_ns": statistics.median(lat) if lat else 0.0,
                "refinement_rate": refined / len(lat) if lat else 0.0,
            })
    return rows
