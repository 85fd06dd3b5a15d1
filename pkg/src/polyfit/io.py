"""CSV ingestion and the binary index format.

Binary layout (little-endian, reals as IEEE-754 binary64, counts as u64)::

    header (44 bytes)
        magic      4s   b"PFIX"
        version    u32  1
        agg        u8   0 sum, 1 count, 2 min, 3 max
        dim        u8   1 or 2
        deg        u16
        delta      f64
        n          u64  records (1D) or points (2D)
        body_len   u64
        crc32      u32  zlib.crc32 of the body
        reserved   u32  0

    1D body
        build_ms f64, fanout u64
        keys f64[n], measures f64[n]
        segment_count u64
        per segment: first u64, last u64, lo_key f64, hi_key f64,
                     offset f64, scale f64, certified_error f64,
                     coeffs f64[deg + 1]

    2D body
        build_ms f64
        u f64[n], v f64[n], w f64[n]
        node_count u64
        per node in pre-order: kind u64 (0 leaf, 1 internal), depth u64,
                               u_lo f64, u_hi f64, v_lo f64, v_hi f64
            leaf only: certified_error f64, u_offset f64, u_scale f64,
                       v_offset f64, v_scale f64, coeffs f64[(deg + 1)**2]
                       (row-major, coeffs[i][j] multiplies x**i y**j)

Fallback structures (cumulative array, max-tree, count quad-tree) and the
segment B-tree are rebuilt from the stored records on load.
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from .core import AggregateKind
from .errors import (
    BadMagic,
    ChecksumMismatch,
    ParseError,
    SchemaMismatch,
    Truncated,
    VersionUnsupported,
)
from .fitting import PolyCoeffs, SurfaceCoeffs
from .index1d import PolyIndex1D
from .index2d import QuadIndex2D, QuadNode, Region
from .segmentation import Segment, SegmentSequence

MAGIC = b"PFIX"
VERSION = 1
HEADER = struct.Struct("<4sIBBHdQQII")
AGG_CODES = {
    AggregateKind.SUM: 0,
    AggregateKind.COUNT: 1,
    AggregateKind.MIN: 2,
    AggregateKind.MAX: 3,
}
AGG_FROM_CODE = {v: k for k, v in AGG_CODES.items()}


class CsvRows(list):
    """Parsed rows; ``lines[i]`` is the 1-based file line of ``self[i]``."""

    def __init__(self, rows=(), lines=()):
        super().__init__(rows)
        self.lines = list(lines)


def _schema_width(schema) -> int:
    s = str(schema).lower()
    if s in ("1", "1d"):
        return 2
    if s in ("2", "2d"):
        return 3
    raise ValueError(f"unknown schema {schema!r}; expected 1D or 2D")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path, schema="1D") -> CsvRows:
    """Read ``key,measure`` (1D) or ``u,v,w`` (2D) rows.

    A first line whose fields are all non-numeric is taken as a header.

    Raises
    ------
    ParseError
        A field is not a finite number.
    SchemaMismatch
        A line has the wrong number of fields.
    """
    width = _schema_width(schema)
    rows = CsvRows()
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in fields]
            if not fields or fields == [""]:
                continue
            if lineno == 1 and not any(_is_number(f) for f in fields):
                continue
            if len(fields) != width:
                raise SchemaMismatch(
                    f"line {lineno}: expected {width} fields, found {len(fields)}"
                )
            try:
                vals = tuple(float(f) for f in fields)
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if not all(math.isfinite(x) for x in vals):
                raise ParseError(lineno, "non-finite value")
            rows.append(vals)
            rows.lines.append(lineno)
    return rows


# -- binary -----------------------------------------------------------------
class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def f64(self, *xs):
        self.parts.append(struct.pack(f"<{len(xs)}d", *xs))

    def u64(self, *xs):
        self.parts.append(struct.pack(f"<{len(xs)}Q", *xs))

    def array(self, a):
        self.parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def _take(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise Truncated("index body ends early")
        out = self.buf[self.pos:self.pos + size]
        self.pos += size
        return out

    def f64(self, count: int = 1):
        vals = struct.unpack(f"<{count}d", self._take(8 * count))
        return vals[0] if count == 1 else vals

    def u64(self, count: int = 1):
        vals = struct.unpack(f"<{count}Q", self._take(8 * count))
        return vals[0] if count == 1 else vals

    def array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * count), dtype="<f8").astype(float)


def _body_1d(idx: PolyIndex1D) -> bytes:
    w = _Writer()
    w.f64(idx.build_ms)
    w.u64(idx.fanout)
    w.array(idx.keys_arr)
    w.array(idx.measures_arr)
    w.u64(len(idx.seq.segments))
    for s in idx.seq.segments:
        w.u64(s.first_idx, s.last_idx)
        w.f64(s.lo_key, s.hi_key, s.poly.offset, s.poly.scale, s.certified_error)
        w.f64(*s.poly.coeffs)
    return w.bytes()


def _body_2d(idx: QuadIndex2D) -> bytes:
    w = _Writer()
    w.f64(idx.build_ms)
    w.array(idx.u)
    w.array(idx.v)
    w.array(idx.w)
    nodes = idx.nodes()
    w.u64(len(nodes))
    for node in nodes:
        w.u64(0 if node.is_leaf else 1, node.depth)
        w.f64(*node.region.as_tuple())
        if node.is_leaf:
            s = node.surface
            w.f64(node.certified_error, s.u_offset, s.u_scale, s.v_offset, s.v_scale)
            w.f64(*(c for row in s.coeffs for c in row))
    return w.bytes()


def serialize(idx) -> bytes:
    if isinstance(idx, PolyIndex1D):
        body = _body_1d(idx)
        agg, dim, n = AGG_CODES[idx.agg], 1, idx.n
    elif isinstance(idx, QuadIndex2D):
        body = _body_2d(idx)
        agg, dim, n = AGG_CODES[AggregateKind.COUNT], 2, idx.n
    else:
        raise TypeError(f"cannot serialize {type(idx).__name__}")
    header = HEADER.pack(MAGIC, VERSION, agg, dim, idx.deg, idx.delta, n, len(body),
                         zlib.crc32(body), 0)
    return header + body


def read_header(data: bytes) -> dict:
    """Decode and validate the fixed header (magic, version, length)."""
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagic("not an index file (bad magic)")
    if len(data) < HEADER.size:
        raise Truncated("index header ends early")
    magic, version, agg, dim, deg, delta, n, body_len, crc, _ = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionUnsupported(f"format version {version} (supported: {VERSION})")
    if agg not in AGG_FROM_CODE or dim not in (1, 2):
        raise VersionUnsupported(f"unknown aggregate/dimension code {agg}/{dim}")
    return {
        "magic": magic.decode("ascii"),
        "version": version,
        "agg": AGG_FROM_CODE[agg],
        "dim": dim,
        "deg": deg,
        "delta": delta,
        "n": n,
        "body_len": body_len,
        "crc32": crc,
    }


def deserialize(data: bytes):
    h = read_header(data)
    body = data[HEADER.size:]
    if len(body) < h["body_len"]:
        raise Truncated(f"body has {len(body)} of {h['body_len']} bytes")
    body = body[:h["body_len"]]
    if zlib.crc32(body) != h["crc32"]:
        raise ChecksumMismatch("body checksum does not match header")
    r = _Reader(body)
    if h["dim"] == 1:
        return _load_1d(r, h)
    return _load_2d(r, h)


def _load_1d(r: _Reader, h: dict) -> PolyIndex1D:
    deg, n = h["deg"], h["n"]
    build_ms = r.f64()
    fanout = r.u64()
    keys = r.array(n)
    measures = r.array(n)
    segs = []
    for _ in range(r.u64()):
        first, last = r.u64(2)
        lo, hi, offset, scale, err = r.f64(5)
        coeffs = r.f64(deg + 1)
        coeffs = (coeffs,) if deg == 0 else tuple(coeffs)
        segs.append(Segment(lo, hi, first, last, PolyCoeffs(coeffs, offset, scale), err))
    seq = SegmentSequence(segs, deg, h["delta"])
    return PolyIndex1D(seq, h["agg"], keys, measures, build_ms, fanout)


def _load_2d(r: _Reader, h: dict) -> QuadIndex2D:
    deg, n = h["deg"], h["n"]
    k = deg + 1
    build_ms = r.f64()
    u, v, w = r.array(n), r.array(n), r.array(n)
    count = r.u64()
    flat = []
    for _ in range(count):
        kind, depth = r.u64(2)
        node = QuadNode(Region(*r.f64(4)), depth)
        if kind == 0:
            err, uo, us, vo, vs = r.f64(5)
            c = r.f64(k * k)
            c = (c,) if k * k == 1 else c
            rows = tuple(tuple(c[i * k:(i + 1) * k]) for i in range(k))
            node.surface = SurfaceCoeffs(rows, uo, us, vo, vs)
            node.certified_error = err
        else:
            node.children = []
        flat.append(node)
    if not flat:
        raise Truncated("quad-tree has no nodes")
    it = iter(flat)

    def link() -> QuadNode:
        try:
            node = next(it)
        except StopIteration:
            raise Truncated("quad-tree node list ends early") from None
        if node.children is not None:
            node.children = [link() for _ in range(4)]
        return node

    root = link()
    return QuadIndex2D(root, u, v, w, deg, h["delta"], build_ms)


def save_index(idx, path) -> int:
    data = serialize(idx)
    Path(path).write_bytes(data)
    return len(data)


def load_index(path):
    return deserialize(Path(path).read_bytes())
