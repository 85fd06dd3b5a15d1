"""Synthetic datasets and seeded query workloads."""

from __future__ import annotations

import numpy as np

from .core import AggregateKind, Dataset, ingest

DATASET_KINDS_1D = ("uniform", "gaussian", "zipf", "step", "mixture")
DATASET_KINDS_2D = ("uniform", "clusters")


def make_dataset(kind: str, n: int, seed: int = 0, agg="sum") -> Dataset:
    """A 1D dataset of about ``n`` records (repeated keys are merged).

    Kinds
    -----
    uniform   keys uniform on [0, 1e6), measures integers in [0, 100)
    gaussian  keys normal around 5e5, measures integers in [0, 100)
    zipf      heavy-tailed key gaps, measures integers in [1, 100]
    step      uniform keys, measures constant on long blocks then jumping
    mixture   clustered keys over a sparse background, log-normal measures
    """
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        keys = rng.uniform(0, 1e6, n)
        measures = rng.integers(0, 100, n).astype(float)
    elif kind == "gaussian":
        keys = rng.normal(5e5, 1e5, n)
        measures = rng.integers(0, 100, n).astype(float)
    elif kind == "zipf":
        gaps = np.minimum(rng.zipf(1.8, n), 10_000).astype(float)
        keys = np.cumsum(gaps)
        measures = rng.integers(1, 101, n).astype(float)
    elif kind == "step":
        keys = rng.uniform(0, 1e6, n)
        blocks = max(n // 500, 1)
        levels = rng.integers(0, 100, blocks).astype(float)
        measures = levels[np.minimum(np.argsort(np.argsort(keys)) * blocks // n, blocks - 1)]
    elif kind == "mixture":
        centers = rng.uniform(0, 1e6, 8)
        which = rng.integers(0, 9, n)
        keys = np.where(
            which < 8,
            rng.normal(centers[np.minimum(which, 7)], 2e4),
            rng.uniform(0, 1e6, n),
        )
        measures = np.round(rng.lognormal(2.5, 0.8, n), 2)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}; choose from {DATASET_KINDS_1D}")
    return ingest(np.column_stack([keys, measures]), AggregateKind.parse(agg))


def make_points(kind: str, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """2D points ``(u, v, w)`` with unit weights."""
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        u, v = rng.uniform(0, 1000, n), rng.uniform(0, 1000, n)
    elif kind == "clusters":
        half = n // 2
        u = np.concatenate([rng.normal(300, 50, half), rng.normal(700, 100, n - half)])
        v = np.concatenate([rng.normal(300, 50, half), rng.normal(600, 100, n - half)])
    else:
        raise ValueError(f"unknown point kind {kind!r}; choose from {DATASET_KINDS_2D}")
    return u, v, np.ones(n)


def _point_arrays(d):
    if isinstance(d, tuple):
        return np.asarray(d[0], dtype=float), np.asarray(d[1], dtype=float)
    return np.asarray(d.u, dtype=float), np.asarray(d.v, dtype=float)


def generate_workload(d, count: int, seed: int = 0, kind: str = "1D") -> list[tuple]:
    """Seeded random ranges whose endpoints come from the data.

    1D: ``(l, u)`` with both endpoints drawn from ``d.keys``.  2D: rectangles
    ``(l1, u1, l2, u2)`` spanned by two randomly chosen data points.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    if str(kind).upper() in ("1D", "1"):
        keys = np.asarray(d.keys, dtype=float)
        pick = np.sort(keys[rng.integers(0, len(keys), (count, 2))], axis=1)
        return [(float(a), float(b)) for a, b in pick]
    u, v = _point_arrays(d)
    i = rng.integers(0, len(u), (count, 2))
    us = np.sort(u[i], axis=1)
    vs = np.sort(v[i], axis=1)
    return [(float(a), float(b), float(c), float(e)) for (a, b), (c, e) in zip(us, vs)]
