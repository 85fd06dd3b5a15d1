"""Static, implicit B-tree layout over a sorted array.

Level 0 holds one entry per item (a separator key and, optionally, an
aggregate).  Level ``h`` holds one entry per block of ``fanout`` entries of
level ``h - 1``.  Nothing is ever inserted after construction, so the tree is
just a list of flat lists and node ``j`` at level ``h`` owns the entries
``[j * fanout, (j + 1) * fanout)`` of level ``h - 1``.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Callable, Sequence

FANOUT = 16


class StaticBTree:
    """Search tree over ascending separator keys with optional subtree aggregates.

    Parameters
    ----------
    keys : sequence of float
        Ascending separator keys, one per leaf entry.
    values : sequence of float, optional
        Per-entry values aggregated bottom-up with ``op``.
    op : callable
        Associative reduction (``max`` for the MAX index).
    fanout : int
        Entries per node.
    """

    def __init__(
        self,
        keys: Sequence[float],
        values: Sequence[float] | None = None,
        op: Callable[..., float] = max,
        fanout: int = FANOUT,
    ):
        if fanout < 2:
            raise ValueError("fanout must be >= 2")
        self.fanout = fanout
        self.op = op
        self.key_levels: list[list[float]] = [list(keys)]
        while len(self.key_levels[-1]) > fanout:
            below = self.key_levels[-1]
            self.key_levels.append(below[::fanout])
        self.agg_levels: list[list[float]] | None = None
        if values is not None:
            if len(values) != len(keys):
                raise ValueError("keys and values differ in length")
            levels = [list(values)]
            for _ in range(1, len(self.key_levels)):
                below = levels[-1]
                levels.append(
                    [op(below[i:i + fanout]) for i in range(0, len(below), fanout)]
                )
            self.agg_levels = levels

    @property
    def height(self) -> int:
        return len(self.key_levels)

    def __len__(self) -> int:
        return len(self.key_levels[0])

    def locate(self, q: float) -> int:
        """Index of the last entry whose key is <= q (0 if q precedes all keys)."""
        f = self.fanout
        levels = self.key_levels
        node = 0
        for h in range(len(levels) - 1, -1, -1):
            lvl = levels[h]
            lo = node * f
            hi = min(lo + f, len(lvl))
            node = bisect_right(lvl, q, lo, hi) - 1
            if node < lo:
                node = lo
        return node

    def locate_counted(self, q: float) -> tuple[int, int]:
        """``locate`` that also reports how many nodes were visited."""
        return self.locate(q), self.height

    def reduce(self, i: int, j: int) -> tuple[float | None, int]:
        """Aggregate of entries ``i..j`` (inclusive) and the number of nodes touched.

        Walks up from both ends, so at most two nodes per level are opened.
        Returns ``(None, visits)`` for an empty range.
        """
        if self.agg_levels is None:
            raise ValueError("tree was built without values")
        f = self.fanout
        op = self.op
        parts: list[float] = []
        visits = 0
        for lvl in self.agg_levels:
            if i > j:
                break
            bi, bj = i // f, j // f
            if bi == bj:
                parts.append(op(lvl[i:j + 1]))
                visits += 1
                i, j = 1, 0
                break
            if i % f:
                end = (bi + 1) * f
                parts.append(op(lvl[i:end]))
                visits += 1
                bi += 1
            if (j + 1) % f and j + 1 < len(lvl):
                start = bj * f
                parts.append(op(lvl[start:j + 1]))
                visits += 1
                bj -= 1
            i, j = bi, bj
        if not parts:
            return None, visits
        return op(parts), visits
