import struct
import zlib
from pathlib import Path

import numpy as np
import pytest

from polyfit.core import AggregateKind, ErrorSpec, ingest
from polyfit.errors import (
    BadMagic,
    ChecksumMismatch,
    ParseError,
    SchemaMismatch,
    Truncated,
    VersionUnsupported,
)
from polyfit.index1d import build_index
from polyfit.index2d import build_quad_index
from polyfit.io import HEADER, deserialize, load_index, read_csv, read_header, save_index, serialize
from polyfit.workload import generate_workload, make_dataset, make_points

FIXTURES = Path(__file__).parent / "fixtures"


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_csv_examples(tmp_path):
    assert read_csv(write(tmp_path, "1,10\n2,20\n"), "1D") == [(1.0, 10.0), (2.0, 20.0)]
    assert read_csv(write(tmp_path, "1,2,1\n"), "2D") == [(1.0, 2.0, 1.0)]
    with pytest.raises(ParseError) as exc:
        read_csv(write(tmp_path, "1,abc\n"), "1D")
    assert exc.value.line == 1


def test_read_csv_header_and_lines(tmp_path):
    rows = read_csv(write(tmp_path, "key,measure\n1,10\n\n3,30\n"), "1D")
    assert rows == [(1.0, 10.0), (3.0, 30.0)]
    assert rows.lines == [2, 4]
    with pytest.raises(ParseError) as exc:
        read_csv(write(tmp_path, "k,m\n1,2\n2,nan\n"), "1D")
    assert exc.value.line == 3


def test_read_csv_schema_mismatch(tmp_path):
    with pytest.raises(SchemaMismatch):
        read_csv(write(tmp_path, "1,2,3\n"), "1D")
    with pytest.raises(SchemaMismatch):
        read_csv(write(tmp_path, "1,2\n"), "2D")


def probe_1d(idx, d, count=1000):
    spec = ErrorSpec.absolute(idx.eps_abs)
    return [idx.query(l, u, spec).value for l, u in generate_workload(d, count, seed=17)]


@pytest.mark.parametrize("agg", ["sum", "count", "max", "min"])
def test_round_trip_1d_bit_identical(agg):
    d = make_dataset("mixture", 3000, seed=4, agg=agg)
    idx = build_index(d, agg, 2, 10.0)
    back = deserialize(serialize(idx))
    assert back.agg is idx.agg and back.deg == idx.deg and back.delta == idx.delta
    assert len(back) == len(idx)
    a, b = probe_1d(idx, d), probe_1d(back, d)
    assert np.array_equal(np.array(a).view(np.uint64), np.array(b).view(np.uint64))
    # refinement works on the loaded index without the source data
    spec = ErrorSpec.relative(1e-9)
    for l, u in generate_workload(d, 50, seed=1):
        assert back.query(l, u, spec).value == idx.exact(l, u)


def test_round_trip_2d_bit_identical(tmp_path):
    u, v, w = make_points("uniform", 1500, seed=6)
    idx = build_quad_index((u, v, w), 2, 10.0)
    path = tmp_path / "q.pfix"
    size = save_index(idx, path)
    assert size == path.stat().st_size
    back = load_index(path)
    assert len(back) == len(idx) and back.depth == idx.depth
    spec = ErrorSpec.absolute(40.0)
    rects = generate_workload((u, v), 1000, seed=2, kind="2D")
    a = np.array([idx.query_count(*r, spec).value for r in rects])
    b = np.array([back.query_count(*r, spec).value for r in rects])
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64))
    assert serialize(back) == serialize(idx)


def test_header_fields():
    idx = build_index(ingest([(1, 1), (2, 2), (3, 3)], "max"), "max", 2, 0.5)
    h = read_header(serialize(idx))
    assert h["magic"] == "PFIX" and h["version"] == 1
    assert h["agg"] is AggregateKind.MAX and h["dim"] == 1
    assert h["deg"] == 2 and h["delta"] == 0.5 and h["n"] == 3


def test_golden_1d_fixture():
    data = (FIXTURES / "sum_deg1.pfix").read_bytes()
    assert data[:4] == b"PFIX"
    magic, version, agg, dim, deg, delta, n, body_len, crc, _ = struct.unpack_from("<4sIBBHdQQII", data)
    assert (version, agg, dim, deg, delta, n) == (1, 0, 1, 1, 2.0, 6)
    assert body_len == len(data) - 44 and crc == zlib.crc32(data[44:])
    idx = deserialize(data)
    assert idx.keys.tolist() == [1, 2, 3, 4, 5, 6]
    assert len(idx) == 3
    spec = ErrorSpec.absolute(4.0)
    assert idx.query(1, 6, spec).value == 105.0
    assert idx.query(2, 4, spec).value == 90.0
    assert idx.query(0, 1.5, spec).value == 10.0
    assert serialize(idx) == data


def test_golden_2d_fixture():
    data = (FIXTURES / "count2d_deg1.pfix").read_bytes()
    h = read_header(data)
    assert h["dim"] == 2 and h["agg"] is AggregateKind.COUNT and h["n"] == 4
    idx = deserialize(data)
    assert len(idx) == 4 and idx.depth == 1
    assert idx.query_count(1, 4, 1, 4, ErrorSpec.absolute(1.0)).value == 4.0
    assert idx.exact(1.5, 3, 0.5, 1.5) == 1
    assert serialize(idx) == data


@pytest.fixture
def blob():
    return (FIXTURES / "sum_deg1.pfix").read_bytes()


def test_empty_file_is_bad_magic():
    with pytest.raises(BadMagic):
        deserialize(b"")


def test_wrong_magic(blob):
    with pytest.raises(BadMagic):
        deserialize(b"XFIP" + blob[4:])


def test_flipped_body_byte(blob):
    bad = bytearray(blob)
    bad[HEADER.size + 20] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        deserialize(bytes(bad))


def test_truncated(blob):
    with pytest.raises(Truncated):
        deserialize(blob[:30])
    with pytest.raises(Truncated):
        deserialize(blob[:-8])


def test_version_unsupported(blob):
    bad = bytearray(blob)
    struct.pack_into("<I", bad, 4, 2)
    with pytest.raises(VersionUnsupported):
        deserialize(bytes(bad))


def test_empty_and_missing_files(tmp_path):
    p = tmp_path / "empty.pfix"
    p.write_bytes(b"")
    with pytest.raises(BadMagic):
        load_index(p)
    with pytest.raises(OSError):
        load_index(tmp_path / "missing.pfix")


@pytest.mark.parametrize("name,error", [
    ("empty.pfix", BadMagic),
    ("corrupt_magic.pfix", BadMagic),
    ("corrupt_flipped.pfix", ChecksumMismatch),
    ("corrupt_truncated.pfix", Truncated),
    ("corrupt_version.pfix", VersionUnsupported),
])
def test_corrupt_fixtures(name, error):
    with pytest.raises(error):
        load_index(FIXTURES / name)
