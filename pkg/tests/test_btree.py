from bisect import bisect_right

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyfit.btree import StaticBTree


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=300, unique=True),
       st.integers(-1100, 1100), st.integers(2, 17))
def test_locate_is_floor(keys, q, fanout):
    keys = sorted(keys)
    t = StaticBTree(keys, fanout=fanout)
    assert t.locate(q) == max(bisect_right(keys, q) - 1, 0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=200), st.integers(2, 17), st.data())
def test_reduce_matches_slice(values, fanout, data):
    t = StaticBTree(list(range(len(values))), values, op=max, fanout=fanout)
    i = data.draw(st.integers(0, len(values) - 1))
    j = data.draw(st.integers(i, len(values) - 1))
    value, visits = t.reduce(i, j)
    assert value == max(values[i:j + 1])
    assert visits <= 2 * t.height


def test_reduce_empty_and_height():
    t = StaticBTree(list(range(100)), list(range(100)), op=max, fanout=16)
    assert t.reduce(5, 4)[0] is None
    assert t.height == 2
    assert StaticBTree([1.0]).height == 1
    with pytest.raises(ValueError):
        StaticBTree([1.0, 2.0]).reduce(0, 1)


def test_locate_counted_reports_height():
    keys = np.arange(5000.0).tolist()
    t = StaticBTree(keys)
    idx, visits = t.locate_counted(1234.5)
    assert idx == 1234 and visits == t.height
