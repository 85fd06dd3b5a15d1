"""Discrete minimax (Chebyshev) polynomial fits in one and two variables.

The fit minimises ``max_i |F_i - P(x_i)|`` over the coefficients.  As a
linear program the primal has one inequality pair per sample and only
``deg + 2`` variables, so we hand the simplex its dual instead::

    maximise   sum_i F_i (p_i - q_i)
    s.t.       sum_i (p_i - q_i) x_i^j = 0      j = 0..deg
               sum_i (p_i + q_i)       = 1,     p, q >= 0

The optimal simplex multipliers of that dual are (minus) the polynomial
coefficients and the minimax error, so one solve yields both.  Keys are
mapped affinely onto [-1, 1] and the values onto [-1, 1] before solving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegreeOutOfRange, SolverFailure
from .simplex import solve_standard_form

MAX_DEG_1D = 8
MAX_DEG_2D = 4
SOLVER_TOL = 1e-9
_ULP = np.finfo(float).eps


@dataclass(frozen=True)
class PolyCoeffs:
    """Polynomial in a normalised key ``x = (k - offset) * scale``.

    ``coeffs[j]`` multiplies ``x**j``.
    """

    coeffs: tuple[float, ...]
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("at least one coefficient required")
        if not self.scale > 0:
            raise ValueError("key_map scale must be positive")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError("coefficients must be finite")

    @property
    def deg(self) -> int:
        return len(self.coeffs) - 1

    def normalize(self, k: float) -> float:
        return (k - self.offset) * self.scale

    def denormalize(self, x: float) -> float:
        return x / self.scale + self.offset

    def __call__(self, k: float) -> float:
        return eval_poly(self, k)


@dataclass(frozen=True)
class SurfaceCoeffs:
    """Bivariate polynomial ``sum a[i][j] x**i y**j`` on normalised coordinates."""

    coeffs: tuple[tuple[float, ...], ...]
    u_offset: float = 0.0
    u_scale: float = 1.0
    v_offset: float = 0.0
    v_scale: float = 1.0

    def __post_init__(self):
        if not self.coeffs or any(len(r) != len(self.coeffs) for r in self.coeffs):
            raise ValueError("coefficient grid must be square")
        if not (self.u_scale > 0 and self.v_scale > 0):
            raise ValueError("key_map scale must be positive")
        if not all(math.isfinite(c) for r in self.coeffs for c in r):
            raise ValueError("coefficients must be finite")

    @property
    def deg(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, u: float, v: float) -> float:
        return eval_surface(self, u, v)


@dataclass(frozen=True)
class FitResult:
    poly: PolyCoeffs | SurfaceCoeffs
    error: float
    lp_error: float = 0.0
    residual: float = 0.0
    # optimal reference set of a 1D fit: sample positions and error signs;
    # a feasible warm start for any superset of the samples
    reference: tuple[tuple[int, ...], tuple[int, ...]] | None = None


def eval_poly(p: PolyCoeffs, k: float) -> float:
    return eval_normalized(p, (k - p.offset) * p.scale)


def eval_normalized(p: PolyCoeffs, x: float) -> float:
    c = p.coeffs
    acc = c[-1]
    for j in range(len(c) - 2, -1, -1):
        acc = acc * x + c[j]
    return acc


def eval_poly_array(p: PolyCoeffs, k: np.ndarray) -> np.ndarray:
    """Vectorised ``eval_poly``; same operation order, so results are bit-identical."""
    x = (np.asarray(k, dtype=float) - p.offset) * p.scale
    c = p.coeffs
    acc = np.full(x.shape, c[-1])
    for j in range(len(c) - 2, -1, -1):
        acc = acc * x + c[j]
    return acc


def eval_surface(s: SurfaceCoeffs, u: float, v: float) -> float:
    x = (u - s.u_offset) * s.u_scale
    y = (v - s.v_offset) * s.v_scale
    acc = 0.0
    for i in range(len(s.coeffs) - 1, -1, -1):
        row = s.coeffs[i]
        r = row[-1]
        for j in range(len(row) - 2, -1, -1):
            r = r * y + row[j]
        acc = acc * x + r
    return acc


def eval_surface_array(s: SurfaceCoeffs, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    x = (np.asarray(u, dtype=float) - s.u_offset) * s.u_scale
    y = (np.asarray(v, dtype=float) - s.v_offset) * s.v_scale
    acc = np.zeros(x.shape)
    for i in range(len(s.coeffs) - 1, -1, -1):
        row = s.coeffs[i]
        r = np.full(y.shape, row[-1])
        for j in range(len(row) - 2, -1, -1):
            r = r * y + row[j]
        acc = acc * x + r
    return acc


def rounding_allowance(*magnitudes: float) -> float:
    """Slack covering float rounding in evaluation and in one subtraction."""
    return float(8 * _ULP * max(1.0, *magnitudes))


def _value_map(values: np.ndarray) -> tuple[float, float]:
    lo = float(values.min())
    hi = float(values.max())
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid, (half if half > 0 else 1.0)


def _key_map(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return 0.5 * (lo + hi), 2.0 / (hi - lo)
    return lo, 1.0


def _crash_basis(x: np.ndarray, m: int) -> np.ndarray:
    """Feasible dual basis on ``m`` spread-out points (alternating-sign weights)."""
    n = len(x)
    order = np.argsort(x, kind="stable")
    idx = order[np.round(np.linspace(0, n - 1, m)).astype(int)]
    pts = x[idx]
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    return np.where(w > 0, idx, idx + n)


def _solve_dual(phi: np.ndarray, g: np.ndarray, basis=None):
    """Minimax coefficients, error and optimal basis for design ``phi`` and targets ``g``."""
    n, k = phi.shape
    A = np.empty((k + 1, 2 * n))
    A[:k, :n] = phi.T
    A[:k, n:] = -phi.T
    A[k, :] = 1.0
    c = np.concatenate([-g, g])
    b = np.zeros(k + 1)
    b[k] = 1.0
    res = solve_standard_form(c, A, b, basis=basis, tol=SOLVER_TOL)
    a = -res.duals[:k]
    t = max(0.0, -float(res.duals[k]))
    if not np.all(np.isfinite(a)):
        raise SolverFailure("non-finite coefficients")
    return a, t, res.basis


def _check_deg(deg: int, cap: int) -> None:
    if not isinstance(deg, (int, np.integer)) or not 1 <= deg <= cap:
        raise DegreeOutOfRange(f"degree {deg} outside [1, {cap}]")


def fit_1d(keys: np.ndarray, values: np.ndarray, deg: int, reference=None) -> FitResult:
    """Array form of :func:`fit_minimax_1d`; keys must be distinct.

    ``reference`` is the ``FitResult.reference`` of a fit on a subset of these
    samples, re-expressed as positions in ``keys``; it seeds the simplex.
    """
    _check_deg(deg, MAX_DEG_1D)
    keys = np.asarray(keys, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(keys)
    if n == 0:
        raise ValueError("no samples")
    if n == 1:
        poly = PolyCoeffs((float(values[0]),) + (0.0,) * deg, float(keys[0]), 1.0)
        return FitResult(poly, 0.0)

    offset, scale = _key_map(float(keys.min()), float(keys.max()))
    x = (keys - offset) * scale
    mid, half = _value_map(values)
    g = (values - mid) / half
    d_eff = min(deg, n - 1)
    phi = np.vander(x, d_eff + 1, increasing=True)

    if n <= deg + 1:
        try:
            a = np.linalg.solve(phi, g)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("interpolation system is singular") from exc
        t = 0.0
        ref = None
    else:
        if reference is not None and len(reference[0]) == d_eff + 2:
            pos = np.asarray(reference[0], dtype=int)
            start = np.where(np.asarray(reference[1]) > 0, pos, pos + n)
        else:
            start = _crash_basis(x, d_eff + 2)
        a, t, basis = _solve_dual(phi, g, basis=start)
        ref = (tuple(int(b % n) for b in basis), tuple(1 if b < n else -1 for b in basis))

    coeffs = a * half
    coeffs[0] += mid
    full = tuple(float(c) for c in coeffs) + (0.0,) * (deg - d_eff)
    poly = PolyCoeffs(full, offset, scale)
    fitted = eval_poly_array(poly, keys)
    resid = float(np.max(np.abs(values - fitted)))
    lp_err = t * half
    err = max(lp_err, resid) + rounding_allowance(
        float(np.abs(values).max()), float(np.abs(fitted).max())
    )
    return FitResult(poly, err, lp_err, resid, ref)


def fit_minimax_1d(samples, deg: int) -> FitResult:
    """Minimax polynomial of degree ``deg`` through ``samples`` = [(k, F(k)), ...].

    Raises
    ------
    DegreeOutOfRange
        ``deg`` outside 1..8.
    SolverFailure
        The LP could not be solved (typically ill-conditioning).
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("samples must be non-empty")
    if len(np.unique(arr[:, 0])) != len(arr):
        raise ValueError("sample keys must be distinct")
    return fit_1d(arr[:, 0], arr[:, 1], deg)


def surface_design(x: np.ndarray, y: np.ndarray, deg: int) -> np.ndarray:
    """Columns ``x**i * y**j`` ordered row-major in (i, j)."""
    px = np.vander(x, deg + 1, increasing=True)
    py = np.vander(y, deg + 1, increasing=True)
    return (px[:, :, None] * py[:, None, :]).reshape(len(x), -1)


def fit_2d(
    u: np.ndarray,
    v: np.ndarray,
    values: np.ndarray,
    deg: int,
    bounds: tuple[float, float, float, float] | None = None,
) -> FitResult:
    """Array form of :func:`fit_minimax_2d`.

    ``bounds`` = (u_lo, u_hi, v_lo, v_hi) fixes the normalisation window;
    by default the sample bounding box is used.
    """
    _check_deg(deg, MAX_DEG_2D)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(u) == 0:
        raise ValueError("no samples")
    if bounds is None:
        bounds = (float(u.min()), float(u.max()), float(v.min()), float(v.max()))
    uo, us = _key_map(bounds[0], bounds[1])
    vo, vs = _key_map(bounds[2], bounds[3])
    k = deg + 1
    lp_err = 0.0
    if len(u) == 1 or float(values.max()) == float(values.min()):
        grid = np.zeros((k, k))
        grid[0, 0] = float(values[0])
    else:
        x = (u - uo) * us
        y = (v - vo) * vs
        mid, half = _value_map(values)
        g = (values - mid) / half
        a, t, _ = _solve_dual(surface_design(x, y, deg), g)
        lp_err = t * half
        grid = (a * half).reshape(k, k)
        grid[0, 0] += mid
    surf = SurfaceCoeffs(
        tuple(tuple(float(c) for c in row) for row in grid), uo, us, vo, vs
    )
    fitted = eval_surface_array(surf, u, v)
    resid = float(np.max(np.abs(values - fitted)))
    err = max(lp_err, resid) + rounding_allowance(
        float(np.abs(values).max()), float(np.abs(fitted).max())
    )
    return FitResult(surf, err, lp_err, resid)


def fit_minimax_2d(samples, deg: int) -> FitResult:
    """Minimax surface of degree ``deg`` per coordinate through [(u, v, F), ...]."""
    arr = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(arr) == 0:
        raise ValueError("samples must be non-empty")
    return fit_2d(arr[:, 0], arr[:, 1], arr[:, 2], deg)


def critical_points(p: PolyCoeffs) -> list[float]:
    """Real roots of P' in normalised coordinates (degree <= 3 only).

    Degree 2 costs two arithmetic operations (``-a1 / (2 a2)``); degree 3
    solves a quadratic in closed form.
    """
    c = p.coeffs
    d = len(c) - 1
    while d > 0 and c[d] == 0.0:
        d -= 1
    if d <= 1:
        return []
    if d == 2:
        return [-c[1] / (2.0 * c[2])]
    if d == 3:
        qa, qb, qc = 3.0 * c[3], 2.0 * c[2], c[1]
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (qb + math.copysign(sq, qb))
        roots = []
        if q != 0.0:
            roots.append(q / qa)
            roots.append(qc / q)
        else:
            roots.append(0.0)
        return roots
    raise DegreeOutOfRange("zero-derivative evaluation supports degree <= 3")
