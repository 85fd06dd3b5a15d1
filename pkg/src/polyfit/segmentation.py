"""Greedy segmentation of a sampled function into minimax polynomial pieces.

Every piece covers a contiguous run of sample positions and carries a fit
whose certified error is at most ``delta``.  Growing each piece as far to the
right as possible yields the minimum number of pieces, because shrinking a
sample set can never increase its minimax error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceTooLarge
from .fitting import (
    FitResult,
    PolyCoeffs,
    critical_points,
    eval_normalized,
    fit_1d,
    rounding_allowance,
)

DP_MAX_SAMPLES = 500


@dataclass(frozen=True)
class Segment:
    lo_key: float
    hi_key: float
    first_idx: int
    last_idx: int
    poly: PolyCoeffs
    certified_error: float

    def __len__(self) -> int:
        return self.last_idx - self.first_idx + 1


@dataclass
class SegmentSequence:
    segments: list[Segment]
    deg: int
    delta: float
    lp_calls: int = 0
    lp_calls_per_segment: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i: int) -> Segment:
        return self.segments[i]

    @property
    def boundaries(self) -> list[int]:
        """Last sample position of every segment."""
        return [s.last_idx for s in self.segments]


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    keys, values = arr[:, 0], arr[:, 1]
    if len(keys) == 0:
        raise ValueError("samples must be non-empty")
    if len(keys) > 1 and not np.all(np.diff(keys) > 0):
        raise ValueError("sample keys must be strictly ascending")
    return keys, values


def gap_overshoot(poly: PolyCoeffs, keys: np.ndarray, values: np.ndarray) -> float:
    """How far P rises above the larger neighbouring sample between adjacent keys.

    Only gaps that contain a zero of P' can exceed their endpoints, and there
    are at most two of those for degree <= 3.
    """
    if len(keys) < 2:
        return 0.0
    worst = 0.0
    x_keys = (keys - poly.offset) * poly.scale
    for xr in critical_points(poly):
        if not (x_keys[0] < xr < x_keys[-1]):
            continue
        g = int(np.searchsorted(x_keys, xr, side="right")) - 1
        g = min(max(g, 0), len(keys) - 2)
        top = max(values[g], values[g + 1])
        worst = max(worst, eval_normalized(poly, xr) - top)
    return worst


class _IntervalFitter:
    """Fits sample ranges [i, j] and counts the LP-backed calls."""

    def __init__(self, keys, values, deg, continuous_max=False):
        self.keys = keys
        self.values = values
        self.deg = deg
        self.continuous_max = continuous_max
        self.calls = 0

    def __call__(self, i: int, j: int, warm: tuple[int, FitResult] | None = None) -> FitResult:
        """Fit positions i..j; ``warm`` = (start, result) of a fit on a sub-range."""
        k = self.keys[i:j + 1]
        f = self.values[i:j + 1]
        if j > i:
            self.calls += 1
        ref = None
        if warm is not None and warm[1].reference is not None:
            shift = warm[0] - i
            ref = (tuple(p + shift for p in warm[1].reference[0]), warm[1].reference[1])
        res = fit_1d(k, f, self.deg, ref)
        if self.continuous_max and j > i:
            over = gap_overshoot(res.poly, k, f)
            if over > 0:
                err = max(res.error, over + rounding_allowance(float(np.abs(f).max())))
                res = FitResult(res.poly, err, res.lp_error, res.residual, res.reference)
        return res

    def segment(self, i: int, j: int, res: FitResult) -> Segment:
        return Segment(float(self.keys[i]), float(self.keys[j]), i, j, res.poly, res.error)


def _check_delta(delta: float) -> None:
    if not delta > 0:
        raise ValueError("delta must be positive")


def segment_plain(keys, values, deg, delta, continuous_max=False) -> SegmentSequence:
    """Left-to-right greedy segmentation, one fit per added key."""
    _check_delta(delta)
    fit = _IntervalFitter(keys, values, deg, continuous_max)
    n = len(keys)
    segs: list[Segment] = []
    per_seg: list[int] = []
    start = 0
    calls_before = 0
    prev = fit(0, 0)
    for u in range(1, n):
        now = fit(start, u, (start, prev))
        if now.error > delta:
            segs.append(fit.segment(start, u - 1, prev))
            per_seg.append(fit.calls - calls_before)
            calls_before = fit.calls
            start = u
            now = fit(u, u)
        prev = now
    segs.append(fit.segment(start, n - 1, prev))
    per_seg.append(fit.calls - calls_before)
    return SegmentSequence(segs, deg, delta, fit.calls, per_seg)


def segment_exponential(keys, values, deg, delta, continuous_max=False) -> SegmentSequence:
    """Greedy segmentation that finds each maximal end by doubling then bisection."""
    _check_delta(delta)
    fit = _IntervalFitter(keys, values, deg, continuous_max)
    n = len(keys)
    segs: list[Segment] = []
    per_seg: list[int] = []
    start = 0
    while start < n:
        calls_before = fit.calls
        good_end, best = start, fit(start, start)
        bad_end = None
        step = 1
        while good_end < n - 1:
            end = min(start + step, n - 1)
            res = fit(start, end, (start, best))
            if res.error <= delta:
                good_end, best = end, res
                step *= 2
            else:
                bad_end = end
                break
        if bad_end is not None:
            while bad_end - good_end > 1:
                mid = (good_end + bad_end) // 2
                res = fit(start, mid, (start, best))
                if res.error <= delta:
                    good_end, best = mid, res
                else:
                    bad_end = mid
        segs.append(fit.segment(start, good_end, best))
        per_seg.append(fit.calls - calls_before)
        start = good_end + 1
    return SegmentSequence(segs, deg, delta, fit.calls, per_seg)


def greedy_segmentation(samples, deg: int, delta: float) -> SegmentSequence:
    keys, values = _as_arrays(samples)
    return segment_plain(keys, values, deg, delta)


def greedy_segmentation_exp(samples, deg: int, delta: float) -> SegmentSequence:
    keys, values = _as_arrays(samples)
    return segment_exponential(keys, values, deg, delta)


def dp_partition(samples, deg: int, delta: float) -> list[int]:
    """An optimal partition (last position of each piece) by exhaustive DP.

    Test oracle only: every candidate interval is fitted independently, with
    no reliance on monotonicity of the fitting error.
    """
    _check_delta(delta)
    keys, values = _as_arrays(samples)
    n = len(keys)
    if n > DP_MAX_SAMPLES:
        raise InstanceTooLarge(f"DP oracle limited to {DP_MAX_SAMPLES} samples, got {n}")
    inf = n + 1
    best = [0] + [inf] * n  # best[j]: min pieces covering positions [0, j)
    choice = [0] * (n + 1)
    for j in range(1, n + 1):
        warm = None  # (start, FitResult) of the last fitted [start, j)
        for i in range(j - 1, -1, -1):
            if best[i] + 1 >= best[j]:
                continue
            if j - 1 == i:
                ok = True
            else:
                ref = None
                if warm is not None and warm[1].reference is not None:
                    shift = warm[0] - i
                    ref = (tuple(p + shift for p in warm[1].reference[0]),
                           warm[1].reference[1])
                res = fit_1d(keys[i:j], values[i:j], deg, ref)
                warm = (i, res)
                ok = res.error <= delta
            if ok:
                best[j] = best[i] + 1
                choice[j] = i
    ends = []
    j = n
    while j > 0:
        ends.append(j - 1)
        j = choice[j]
    return ends[::-1]


def dp_oracle(samples, deg: int, delta: float) -> int:
    """Minimum number of pieces with minimax error <= delta (exhaustive DP)."""
    return len(dp_partition(samples, deg, delta))
