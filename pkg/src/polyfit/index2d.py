"""Two-key COUNT: quad-tree of polynomial surfaces over the cumulative count.

``CF(u, v)`` counts the points dominated by ``(u, v)``.  A rectangle count is
the inclusion-exclusion of CF at its four corners; each corner is snapped to
the data-coordinate staircase, routed to its quad-tree leaf, and evaluated on
that leaf's surface.
"""

from __future__ import annotations

import math
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .core import ErrorSpec, Mode
from .errors import DegreeOutOfRange, GuaranteeMismatch, InvalidRange, MaxDepthExceeded
from .fitting import MAX_DEG_2D, SurfaceCoeffs, eval_surface, fit_2d, rounding_allowance
from .index1d import QueryOutcome

MAX_DEPTH = 24
GRID_SAMPLES = 12  # per-axis seed coordinates of the exchange fit
GRID_CELL_CAP = 1 << 21  # larger staircase grids are split without fitting
MAX_EXCHANGE_ROUNDS = 25
EXCHANGE_BATCH = 48
LEAF_CAPACITY = 32
EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Point2D:
    u: float
    v: float
    w: float = 1.0


@dataclass(frozen=True)
class Region:
    """Rectangle [u_lo, u_hi) x [v_lo, v_hi); edges on the global max are closed."""

    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        if not (self.u_lo < self.u_hi and self.v_lo < self.v_hi):
            raise ValueError("region must have positive extent")

    @property
    def mid(self) -> tuple[float, float]:
        return 0.5 * (self.u_lo + self.u_hi), 0.5 * (self.v_lo + self.v_hi)

    def split(self) -> list["Region"]:
        """Children in SW, SE, NW, NE order (index = east + 2 * north)."""
        mu, mv = self.mid
        return [
            Region(self.u_lo, mu, self.v_lo, mv),
            Region(mu, self.u_hi, self.v_lo, mv),
            Region(self.u_lo, mu, mv, self.v_hi),
            Region(mu, self.u_hi, mv, self.v_hi),
        ]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.u_lo, self.u_hi, self.v_lo, self.v_hi)


@dataclass
class QuadNode:
    region: Region
    depth: int
    children: list["QuadNode"] | None = None
    surface: SurfaceCoeffs | None = None
    certified_error: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.children is None


def _as_points(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(points, tuple) and len(points) == 3 and isinstance(points[0], np.ndarray):
        u, v, w = points
    else:
        rows = [(p.u, p.v, p.w) if isinstance(p, Point2D) else tuple(p) for p in points]
        arr = np.array([r if len(r) == 3 else (r[0], r[1], 1.0) for r in rows], dtype=float)
        arr = arr.reshape(-1, 3)
        u, v, w = arr[:, 0], arr[:, 1], arr[:, 2]
    return (np.asarray(u, dtype=float), np.asarray(v, dtype=float),
            np.asarray(w, dtype=float))


def cf_count_2d(points, u: float, v: float) -> float:
    """Total weight (count for unit weights) of points with p.u <= u and p.v <= v."""
    pu, pv, pw = _as_points(points)
    return float(pw[(pu <= u) & (pv <= v)].sum())


class DominanceCounter:
    """Batch evaluation of CF(u, v) with a merge-sort tree over u-order.

    Level ``L`` stores, for consecutive blocks of ``2**L`` points in u-order,
    the v-ranks sorted within each block together with prefix weights; a
    prefix of the u-order decomposes into at most one block per level.
    """

    def __init__(self, u: np.ndarray, v: np.ndarray, w: np.ndarray):
        order = np.argsort(u, kind="stable")
        self.u_sorted = u[order]
        self.v_values = np.unique(v)
        self.n = len(u)
        ranks = np.searchsorted(self.v_values, v[order], side="left") + 1
        weights = w[order]
        self.base = len(self.v_values) + 1
        self.levels = []
        L = 0
        while (1 << L) <= max(self.n, 1):
            blk = np.arange(self.n) >> L
            comp = blk.astype(np.int64) * self.base + ranks
            o = np.argsort(comp, kind="stable")
            cw = np.concatenate([[0.0], np.cumsum(weights[o])])
            self.levels.append((comp[o], cw))
            L += 1

    def __call__(self, qu, qv) -> np.ndarray:
        qu = np.atleast_1d(np.asarray(qu, dtype=float))
        qv = np.atleast_1d(np.asarray(qv, dtype=float))
        pos = np.searchsorted(self.u_sorted, qu, side="right").astype(np.int64)
        rank = np.searchsorted(self.v_values, qv, side="right").astype(np.int64)
        total = np.zeros(len(qu))
        for L, (comp, cw) in enumerate(self.levels):
            has = (pos >> L) & 1 == 1
            if not has.any():
                continue
            p = pos[has]
            blk = (p >> (L + 1)) << 1
            lo = np.searchsorted(comp, blk * self.base, side="right")
            hi = np.searchsorted(comp, blk * self.base + rank[has], side="right")
            total[has] += cw[hi] - cw[lo]
        return total


class CountQuadTree:
    """Exact rectangle counting over raw points (the refinement structure)."""

    def __init__(self, u, v, w, capacity: int = LEAF_CAPACITY, max_depth: int = MAX_DEPTH):
        self.u, self.v, self.w = u, v, w
        self.capacity = capacity
        self.max_depth = max_depth
        self.root = self._build(np.arange(len(u)), 0)

    def _build(self, idx: np.ndarray, depth: int) -> dict:
        u, v = self.u[idx], self.v[idx]
        node = {
            "bbox": (float(u.min()), float(u.max()), float(v.min()), float(v.max())),
            "weight": float(self.w[idx].sum()),
            "children": None,
            "idx": None,
        }
        ulo, uhi, vlo, vhi = node["bbox"]
        if len(idx) <= self.capacity or depth >= self.max_depth or (ulo == uhi and vlo == vhi):
            node["idx"] = idx
            return node
        mu, mv = 0.5 * (ulo + uhi), 0.5 * (vlo + vhi)
        quad = (u > mu).astype(int) + 2 * (v > mv).astype(int)
        node["children"] = [self._build(idx[quad == q], depth + 1)
                            for q in range(4) if (quad == q).any()]
        return node

    def count(self, l1: float, u1: float, l2: float, u2: float) -> float:
        total = 0.0
        stack = [self.root]
        while stack:
            node = stack.pop()
            a, b, c, d = node["bbox"]
            if b < l1 or a > u1 or d < l2 or c > u2:
                continue
            if l1 <= a and b <= u1 and l2 <= c and d <= u2:
                total += node["weight"]
            elif node["children"] is None:
                i = node["idx"]
                m = (self.u[i] >= l1) & (self.u[i] <= u1) & (self.v[i] >= l2) & (self.v[i] <= u2)
                total += float(self.w[i][m].sum())
            else:
                stack.extend(node["children"])
        return total


def exact_count_2d(fallback: CountQuadTree, l1, u1, l2, u2) -> float:
    if l1 > u1 or l2 > u2:
        raise InvalidRange("lower bound exceeds upper bound")
    return fallback.count(l1, u1, l2, u2)


def _spread(n: int, k: int) -> np.ndarray:
    if n <= k:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, k)).astype(int))


class QuadIndex2D:
    """Immutable two-key COUNT index.  Build with :func:`build_quad_index`."""

    def __init__(self, root: QuadNode, u, v, w, deg: int, delta: float, build_ms: float = 0.0):
        self.root = root
        self.deg = deg
        self.delta = delta
        self.build_ms = build_ms
        self.u, self.v, self.w = u, v, w
        self.n = len(u)
        self.u_coords = np.unique(u).tolist()
        self.v_coords = np.unique(v).tolist()
        self.fallback = CountQuadTree(u, v, w)
        self.eps_abs = 4.0 * delta

    def leaves(self) -> list[QuadNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def nodes(self) -> list[QuadNode]:
        """All nodes in pre-order."""
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if not node.is_leaf:
                stack.extend(reversed(node.children))
        return out

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.leaves())

    def __len__(self) -> int:
        return len(self.leaves())

    def model_bytes(self) -> int:
        per_leaf = 8 * ((self.deg + 1) ** 2 + 4 + 4 + 1)
        per_internal = 8 * 4
        leaves = len(self)
        return per_leaf * leaves + per_internal * (len(self.nodes()) - leaves)

    def locate(self, u: float, v: float) -> QuadNode:
        node = self.root
        while node.children is not None:
            mu, mv = node.region.mid
            node = node.children[(u >= mu) + 2 * (v >= mv)]
        return node

    def cf_approx(self, u: float, v: float) -> float:
        return eval_surface(self.locate(u, v).surface, u, v)

    def _corner(self, ui: int, vi: int) -> float:
        if ui < 0 or vi < 0:
            return 0.0
        u = self.u_coords[ui]
        v = self.v_coords[vi]
        return eval_surface(self.locate(u, v).surface, u, v)

    def approx_count(self, l1: float, u1: float, l2: float, u2: float) -> float:
        uc, vc = self.u_coords, self.v_coords
        a_hi = bisect_right(uc, u1) - 1
        a_lo = bisect_left(uc, l1) - 1
        b_hi = bisect_right(vc, u2) - 1
        b_lo = bisect_left(vc, l2) - 1
        return (self._corner(a_hi, b_hi) - self._corner(a_lo, b_hi)
                - self._corner(a_hi, b_lo) + self._corner(a_lo, b_lo))

    def query_count(self, l1, u1, l2, u2, spec: ErrorSpec) -> QueryOutcome:
        if l1 > u1 or l2 > u2:
            raise InvalidRange("lower bound exceeds upper bound")
        if spec.mode is Mode.ABS and not math.isclose(spec.epsilon, self.eps_abs, rel_tol=1e-12):
            raise GuaranteeMismatch(
                f"index built with delta={self.delta} answers ABS queries with "
                f"eps_abs={self.eps_abs}, not {spec.epsilon}"
            )
        approx = self.approx_count(l1, u1, l2, u2)
        if spec.mode is Mode.REL:
            threshold = 4.0 * self.delta * (1.0 + 1.0 / spec.epsilon)
            if not (approx >= threshold or approx <= -threshold):
                return QueryOutcome(self.fallback.count(l1, u1, l2, u2), True, spec)
        return QueryOutcome(approx, False, spec)

    def exact(self, l1, u1, l2, u2) -> float:
        return exact_count_2d(self.fallback, l1, u1, l2, u2)


class _Builder:
    """Quad-tree construction with exact certification on the staircase grid.

    A region is a leaf only after its surface has been checked at every
    (u, v) pair of data coordinates inside it, which are exactly the points
    where snapped query corners can land.  The fit itself runs on a small
    subset grown by exchange: the worst grid violators are added until the
    whole grid is within delta or the subset alone already exceeds it.
    """

    def __init__(self, u, v, w, deg, delta, max_depth, grid, cell_cap=GRID_CELL_CAP):
        self.u, self.v, self.w = u, v, w
        self.deg = deg
        self.delta = delta
        self.max_depth = max_depth
        self.grid = grid
        self.cell_cap = cell_cap
        self.counter = DominanceCounter(u, v, w)
        self.u_coords = np.unique(u)
        self.v_coords = np.unique(v)
        self.u_max = float(self.u_coords[-1])
        self.v_max = float(self.v_coords[-1])
        self.fits = 0

    def _coord_range(self, coords, lo, hi, top) -> tuple[int, int]:
        i = int(np.searchsorted(coords, lo, side="left"))
        j = int(np.searchsorted(coords, hi, side="right" if hi >= top else "left"))
        return i, j

    def staircase(self, iu: tuple[int, int], iv: tuple[int, int]) -> np.ndarray:
        """Exact CF on every pair of data coordinates in the index ranges.

        CF(a, b) splits into points left of the range, points below it, and
        points inside it, the last being a 2D prefix sum of a histogram.
        """
        cu = self.u_coords[iu[0]:iu[1]]
        cv = self.v_coords[iv[0]:iv[1]]
        pu = self.u_coords[iu[0] - 1] if iu[0] > 0 else -np.inf
        pv = self.v_coords[iv[0] - 1] if iv[0] > 0 else -np.inf
        left = self.counter(np.full(len(cv), pu), cv)
        corner = self.counter([pu], [pv])[0]
        below = self.counter(cu, np.full(len(cu), pv)) - corner
        m = (self.u >= cu[0]) & (self.u <= cu[-1]) & (self.v >= cv[0]) & (self.v <= cv[-1])
        hist = np.zeros((len(cu), len(cv)))
        np.add.at(hist, (np.searchsorted(cu, self.u[m]), np.searchsorted(cv, self.v[m])),
                  self.w[m])
        return hist.cumsum(axis=0).cumsum(axis=1) + left[None, :] + below[:, None]

    def _constant_leaf(self, node: QuadNode) -> None:
        # no data coordinate on one axis: no snapped query corner lands here
        k = self.deg + 1
        r = node.region
        mu, mv = r.mid
        value = float(self.counter([mu], [mv])[0])
        grid = [[0.0] * k for _ in range(k)]
        grid[0][0] = value
        node.surface = SurfaceCoeffs(tuple(map(tuple, grid)), *_surface_map(r))
        node.certified_error = 0.0

    def try_fit(self, node: QuadNode, iu, iv) -> bool:
        r = node.region
        cu = self.u_coords[iu[0]:iu[1]]
        cv = self.v_coords[iv[0]:iv[1]]
        cf = self.staircase(iu, iv)
        su = _spread(len(cu), self.grid)
        sv = _spread(len(cv), self.grid)
        a_idx, b_idx = np.meshgrid(su, sv, indexing="ij")
        chosen = set(zip(a_idx.ravel().tolist(), b_idx.ravel().tolist()))
        mu_, su_, mv_, sv_ = _surface_map(r)
        xu = (cu - mu_) * su_
        xv = (cv - mv_) * sv_
        k = self.deg + 1
        vu = np.vander(xu, k, increasing=True)
        vv = np.vander(xv, k, increasing=True)
        fmax = float(np.abs(cf).max())
        for _ in range(MAX_EXCHANGE_ROUNDS):
            ia, ib = (np.array(t) for t in zip(*sorted(chosen)))
            self.fits += 1
            res = fit_2d(cu[ia], cv[ib], cf[ia, ib], self.deg, bounds=r.as_tuple())
            if res.error > self.delta:
                return False
            c = np.array(res.poly.coeffs)
            resid = np.abs(vu @ c @ vv.T - cf)
            worst = float(resid.max())
            slack = rounding_allowance(fmax, worst + fmax) + 4 * k * k * EPS * float(np.abs(c).sum())
            if worst + slack <= self.delta:
                node.surface = res.poly
                node.certified_error = worst + slack
                return True
            flat_r = resid.ravel()
            top = min(EXCHANGE_BATCH, flat_r.size)
            flat = np.argpartition(flat_r, flat_r.size - top)[flat_r.size - top:]
            flat = flat[np.argsort(flat_r[flat])[::-1]]
            added = 0
            for f in flat.tolist():
                a, b = divmod(f, len(cv))
                if resid[a, b] + slack <= self.delta:
                    break
                if (a, b) not in chosen:
                    chosen.add((a, b))
                    added += 1
            if added == 0:
                return False
        return False

    def build(self, region: Region) -> QuadNode:
        root = QuadNode(region, 0)
        stack = [root]
        while stack:
            node = stack.pop()
            r = node.region
            iu = self._coord_range(self.u_coords, r.u_lo, r.u_hi, self.u_max)
            iv = self._coord_range(self.v_coords, r.v_lo, r.v_hi, self.v_max)
            nu, nv = iu[1] - iu[0], iv[1] - iv[0]
            if nu == 0 or nv == 0:
                self._constant_leaf(node)
                continue
            if nu * nv <= self.cell_cap and self.try_fit(node, iu, iv):
                continue
            if node.depth >= self.max_depth:
                raise MaxDepthExceeded(
                    f"region {r.as_tuple()} still exceeds delta={self.delta} at depth {node.depth}"
                )
            node.children = [QuadNode(c, node.depth + 1) for c in r.split()]
            stack.extend(node.children)
        return root


def _surface_map(r: Region) -> tuple[float, float, float, float]:
    return (0.5 * (r.u_lo + r.u_hi), 2.0 / (r.u_hi - r.u_lo),
            0.5 * (r.v_lo + r.v_hi), 2.0 / (r.v_hi - r.v_lo))


def root_region(u: np.ndarray, v: np.ndarray) -> Region:
    ulo, uhi = float(u.min()), float(u.max())
    vlo, vhi = float(v.min()), float(v.max())
    if uhi <= ulo:
        uhi = ulo + 1.0
    if vhi <= vlo:
        vhi = vlo + 1.0
    return Region(ulo, uhi, vlo, vhi)


def build_quad_index(
    points,
    deg: int,
    delta: float,
    max_depth: int = MAX_DEPTH,
    grid: int = GRID_SAMPLES,
) -> QuadIndex2D:
    """Split regions at their midpoints until every surface fit is within delta.

    Raises
    ------
    MaxDepthExceeded
        A region still fails at ``max_depth``.
    """
    if not isinstance(deg, (int, np.integer)) or not 1 <= deg <= MAX_DEG_2D:
        raise DegreeOutOfRange(f"degree {deg} outside [1, {MAX_DEG_2D}]")
    if not delta > 0:
        raise ValueError("delta must be positive")
    u, v, w = _as_points(points)
    if len(u) == 0:
        from .errors import EmptyInput

        raise EmptyInput("no points")
    if not (np.isfinite(u).all() and np.isfinite(v).all() and np.isfinite(w).all()):
        from .errors import NonFiniteValue

        bad = ~(np.isfinite(u) & np.isfinite(v) & np.isfinite(w))
        raise NonFiniteValue(int(np.flatnonzero(bad)[0]))
    t0 = time.perf_counter()
    builder = _Builder(u, v, w, int(deg), float(delta), max_depth, grid)
    root = builder.build(root_region(u, v))
    build_ms = (time.perf_counter() - t0) * 1e3
    return QuadIndex2D(root, u, v, w, int(deg), float(delta), build_ms)


def query_count_2d(idx: QuadIndex2D, l1, u1, l2, u2, spec: ErrorSpec) -> QueryOutcome:
    return idx.query_count(l1, u1, l2, u2, spec)
