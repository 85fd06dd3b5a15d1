"""Command line front-end: build, query, bench, sweep, inspect.

Exit codes: 0 success, 1 usage, 2 I/O, 3 guarantee mismatch, 4 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import AggregateKind, ErrorSpec, Mode, ingest
from .errors import EXIT_IO, EXIT_USAGE, EmptyInput, PolyFitError
from .index1d import build_index
from .index2d import QuadIndex2D, build_quad_index
from .io import load_index, read_csv, read_header, save_index
from .workload import generate_workload

REPORT_FIELDS = [
    "deg", "delta", "eps", "mode", "segment_count", "index_bytes", "build_ms",
    "median_query_ns", "p99_query_ns", "refinement_rate", "max_abs_err", "max_rel_err",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"range must look like 'l:u', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"range bounds must be numbers: {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _threads(arg: int | None) -> int:
    env = os.environ.get("POLYFIT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"POLYFIT_THREADS must be an integer, got {env!r}") from None
    else:
        n = arg or 1
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


# -- building / loading -----------------------------------------------------
def _load_data(path: str, dim: int, agg: AggregateKind):
    rows = read_csv(path, "2D" if dim == 2 else "1D")
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    if dim == 2:
        arr = np.asarray(rows, dtype=float)
        return arr[:, 0], arr[:, 1], arr[:, 2]
    return ingest(rows, agg)


def _build(data, dim: int, agg: AggregateKind, deg: int, delta: float):
    if dim == 2:
        if agg is not AggregateKind.COUNT:
            raise UsageError("two-key indexes support only --agg count")
        return build_quad_index(data, deg, delta)
    return build_index(data, agg, deg, delta)


def _segment_count(idx) -> int:
    return len(idx)


# -- measurement ------------------------------------------------------------
def _run_queries(idx, workload, spec: ErrorSpec, threads: int):
    is2d = isinstance(idx, QuadIndex2D)

    def run(chunk):
        out = []
        for q in chunk:
            t0 = time.perf_counter_ns()
            res = idx.query_count(*q, spec) if is2d else idx.query(q[0], q[1], spec)
            out.append((time.perf_counter_ns() - t0, q, res))
        return out

    if threads == 1:
        return run(workload)
    chunks = [workload[i::threads] for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, chunks))
    return [r for part in parts for r in part]


def _report_row(idx, workload, spec: ErrorSpec, threads: int) -> dict:
    results = _run_queries(idx, workload, spec, threads)
    is2d = isinstance(idx, QuadIndex2D)
    lat = sorted(ns for ns, _, _ in results)
    refined = sum(r.refined for _, _, r in results)
    max_abs = max_rel = 0.0
    for _, q, res in results:
        exact = idx.exact(*q) if is2d else idx.exact(q[0], q[1])
        if math.isinf(exact):
            continue
        err = abs(res.value - exact)
        max_abs = max(max_abs, err)
        if exact != 0:
            max_rel = max(max_rel, err / abs(exact))
    p99 = lat[min(len(lat) - 1, math.ceil(0.99 * len(lat)) - 1)]
    return {
        "deg": idx.deg,
        "delta": idx.delta,
        "eps": spec.epsilon,
        "mode": spec.mode.value,
        "segment_count": _segment_count(idx),
        "index_bytes": idx.model_bytes(),
        "build_ms": round(idx.build_ms, 3),
        "median_query_ns": statistics.median(lat),
        "p99_query_ns": p99,
        "refinement_rate": refined / len(results),
        "max_abs_err": max_abs,
        "max_rel_err": max_rel,
    }


def _write_report(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def _workload_for(idx, count: int, seed: int):
    if isinstance(idx, QuadIndex2D):
        return generate_workload((idx.u, idx.v), count, seed, "2D")
    return generate_workload(idx, count, seed, "1D")


# -- commands ---------------------------------------------------------------
def cmd_build(args) -> int:
    agg = AggregateKind.parse(args.agg)
    data = _load_data(args.input, args.dim, agg)
    idx = _build(data, args.dim, agg, args.deg, args.delta)
    size = save_index(idx, args.out)
    print(f"segments: {_segment_count(idx)}")
    print(f"bytes: {size}")
    print(f"model_bytes: {idx.model_bytes()}")
    print(f"build_ms: {idx.build_ms:.3f}")
    return 0


def _brute_force(path: str, idx, rng1, rng2):
    if isinstance(idx, QuadIndex2D):
        u, v, w = _load_data(path, 2, AggregateKind.COUNT)
        m = (u >= rng1[0]) & (u <= rng1[1]) & (v >= rng2[0]) & (v <= rng2[1])
        return float(w[m].sum())
    d = _load_data(path, 1, idx.agg)
    m = (d.keys >= rng1[0]) & (d.keys <= rng1[1])
    vals = d.measures[m]
    if idx.agg.is_additive:
        return float(vals.sum())
    if len(vals) == 0:
        return -math.inf if idx.agg is AggregateKind.MAX else math.inf
    return float(vals.max() if idx.agg is AggregateKind.MAX else vals.min())


def cmd_query(args) -> int:
    idx = load_index(args.index)
    spec = ErrorSpec(Mode(args.mode), args.eps)
    l, u = args.range
    if isinstance(idx, QuadIndex2D):
        if args.range2 is None:
            raise UsageError("two-key index needs --range2")
        out = idx.query_count(l, u, args.range2[0], args.range2[1], spec)
    else:
        if args.range2 is not None:
            raise UsageError("--range2 applies only to two-key indexes")
        out = idx.query(l, u, spec)
    print(f"value: {out.value!r}")
    print(f"refined: {str(out.refined).lower()}")
    if args.verify:
        exact = _brute_force(args.verify, idx, args.range, args.range2)
        print(f"exact: {exact!r}")
        err = 0.0 if exact == out.value else abs(out.value - exact)
        print(f"abs_error: {err!r}")
        if exact != 0 and math.isfinite(exact):
            print(f"rel_error: {err / abs(exact)!r}")
    return 0


def cmd_bench(args) -> int:
    idx = load_index(args.index)
    threads = _threads(args.threads)
    workload = _workload_for(idx, args.queries, args.workload_seed)
    rows = [
        _report_row(idx, workload, ErrorSpec(Mode.ABS, idx.eps_abs), threads),
        _report_row(idx, workload, ErrorSpec(Mode.REL, args.eps_rel), threads),
    ]
    _write_report(rows, args.report)
    for row in rows:
        print(",".join(str(row[k]) for k in REPORT_FIELDS))
    return 0


def cmd_sweep(args) -> int:
    agg = AggregateKind.parse(args.agg)
    data = _load_data(args.input, args.dim, agg)
    spec = ErrorSpec(Mode.REL, args.eps_rel)
    rows = []
    workload = None
    for deg in args.degs:
        for delta in args.deltas:
            idx = _build(data, args.dim, agg, deg, delta)
            if workload is None:
                workload = _workload_for(idx, args.queries, args.workload_seed)
            rows.append(_report_row(idx, workload, spec, 1))
    _write_report(rows, args.report)
    print(f"rows: {len(rows)}")
    return 0


def _histogram(errors, delta: float, bins: int = 10) -> list[dict]:
    counts = [0] * bins
    for e in errors:
        b = min(int(bins * e / delta), bins - 1) if delta > 0 else 0
        counts[max(b, 0)] += 1
    step = delta / bins
    return [{"lo": i * step, "hi": (i + 1) * step, "count": c} for i, c in enumerate(counts)]


def cmd_inspect(args) -> int:
    with open(args.index, "rb") as fh:
        data = fh.read()
    header = read_header(data)
    idx = load_index(args.index)
    info = {k: (v.value if isinstance(v, AggregateKind) else v) for k, v in header.items()}
    if isinstance(idx, QuadIndex2D):
        errors = [leaf.certified_error for leaf in idx.leaves()]
        info.update(leaves=len(errors), nodes=len(idx.nodes()), depth=idx.depth)
    else:
        errors = [s.certified_error for s in idx.seq.segments]
        info.update(segments=len(errors), btree_height=idx.height)
    info.update(
        file_bytes=len(data),
        model_bytes=idx.model_bytes(),
        max_certified_error=max(errors),
        error_histogram=_histogram(errors, idx.delta),
    )
    if args.json:
        print(json.dumps(info, indent=2))
        return 0
    for k, v in info.items():
        if k == "error_histogram":
            print("error_histogram:")
            for b in v:
                print(f"  [{b['lo']:.6g}, {b['hi']:.6g}): {b['count']}")
        else:
            print(f"{k}: {v}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyfit", description="Polynomial-fitting range aggregate indexes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="build an index from a CSV file")
    b.add_argument("--input", required=True)
    b.add_argument("--agg", choices=["sum", "count", "min", "max"], default="sum")
    b.add_argument("--dim", type=int, choices=[1, 2], default=1)
    b.add_argument("--deg", type=int, default=2)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="answer one range query")
    q.add_argument("--index", required=True)
    q.add_argument("--range", type=_range, required=True, metavar="L:U")
    q.add_argument("--range2", type=_range, metavar="L:U")
    q.add_argument("--mode", choices=["abs", "rel"], default="abs")
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--verify", metavar="CSV")
    q.set_defaults(func=cmd_query)

    be = sub.add_parser("bench", help="time a seeded workload against an index")
    be.add_argument("--index", required=True)
    be.add_argument("--workload-seed", type=int, default=0)
    be.add_argument("--queries", type=int, default=1000)
    be.add_argument("--eps-rel", type=float, default=0.01)
    be.add_argument("--threads", type=int, default=None)
    be.add_argument("--report", required=True)
    be.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="measure a (deg, delta) grid")
    s.add_argument("--input", required=True)
    s.add_argument("--agg", choices=["sum", "count", "min", "max"], default="sum")
    s.add_argument("--dim", type=int, choices=[1, 2], default=1)
    s.add_argument("--degs", type=_int_list, default=[1, 2, 3])
    s.add_argument("--deltas", type=_float_list, default=[25, 50, 100, 200, 500, 1000])
    s.add_argument("--eps-rel", type=float, default=0.01)
    s.add_argument("--queries", type=int, default=1000)
    s.add_argument("--workload-seed", type=int, default=0)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_sweep)

    i = sub.add_parser("inspect", help="describe an index file")
    i.add_argument("--index", required=True)
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if getattr(args, "queries", 1) < 1:
            raise UsageError("--queries must be at least 1")
        return args.func(args)
    except PolyFitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
