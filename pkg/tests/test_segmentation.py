import math

import numpy as np
import pytest

from polyfit.errors import InstanceTooLarge
from polyfit.fitting import PolyCoeffs, eval_poly_array
from polyfit.segmentation import (
    DP_MAX_SAMPLES,
    dp_oracle,
    dp_partition,
    gap_overshoot,
    greedy_segmentation,
    greedy_segmentation_exp,
    segment_exponential,
)

STEP = [(1, 0), (2, 0), (3, 10), (4, 10)]


def random_instance(seed, n_max=60):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, n_max))
    keys = np.sort(rng.choice(100_000, n, replace=False)).astype(float)
    values = np.cumsum(rng.integers(0, 30, n)).astype(float)
    deg = int(rng.integers(1, 4))
    delta = float(rng.uniform(0.5, 30))
    return np.column_stack([keys, values]), deg, delta


def test_line_is_one_segment():
    samples = [(k, 3 * k - 1) for k in range(20)]
    for delta in (1e-6, 1.0, 100.0):
        assert len(greedy_segmentation(samples, 1, delta)) == 1
    assert dp_oracle(samples, 1, 0.5) == 1


def test_step_example():
    seq = greedy_segmentation(STEP, 1, 1.0)
    assert len(seq) == 2
    assert seq.boundaries == [1, 3]
    assert greedy_segmentation_exp(STEP, 1, 1.0).boundaries == [1, 3]
    assert dp_oracle(STEP, 1, 1.0) == 2
    assert dp_oracle(STEP, 1, 3.0) == 1


@pytest.mark.parametrize("seed", range(25))
def test_gs_matches_dp_and_exp(seed):
    samples, deg, delta = random_instance(seed)
    plain = greedy_segmentation(samples, deg, delta)
    fast = greedy_segmentation_exp(samples, deg, delta)
    assert plain.boundaries == fast.boundaries
    opt = dp_partition(samples, deg, delta)
    assert len(plain) == len(opt)
    # greedy prefix dominance
    for g_end, d_end in zip(plain.boundaries, opt):
        assert g_end >= d_end


@pytest.mark.parametrize("seed", range(15))
def test_coverage_and_feasibility(seed):
    samples, deg, delta = random_instance(1000 + seed, 150)
    seq = greedy_segmentation_exp(samples, deg, delta)
    pos = 0
    for s in seq:
        assert s.first_idx == pos
        assert s.certified_error <= delta
        k = samples[s.first_idx:s.last_idx + 1, 0]
        f = samples[s.first_idx:s.last_idx + 1, 1]
        assert s.lo_key == k[0] and s.hi_key == k[-1]
        assert np.max(np.abs(eval_poly_array(s.poly, k) - f)) <= delta
        pos = s.last_idx + 1
    assert pos == len(samples)


@pytest.mark.parametrize("seed", range(10))
def test_degree_dominance(seed):
    samples, _, delta = random_instance(2000 + seed, 120)
    counts = [len(greedy_segmentation_exp(samples, d, delta)) for d in (1, 2, 3, 4)]
    assert counts == sorted(counts, reverse=True)


def test_exp_lp_call_budget():
    samples = [(k, 0.5 * k) for k in range(300)]
    seq = greedy_segmentation_exp(samples, 1, 1.0)
    assert len(seq) == 1
    assert seq.lp_calls <= 2 * math.ceil(math.log2(300)) + 2


@pytest.mark.parametrize("seed", range(10))
def test_exp_lp_calls_per_segment(seed):
    samples, deg, delta = random_instance(3000 + seed, 200)
    seq = greedy_segmentation_exp(samples, deg, delta)
    for s, calls in zip(seq, seq.lp_calls_per_segment):
        assert calls <= 2 * math.ceil(math.log2(max(len(s), 2))) + 2


def test_dp_size_limit():
    samples = [(k, k) for k in range(DP_MAX_SAMPLES + 1)]
    with pytest.raises(InstanceTooLarge):
        dp_oracle(samples, 1, 1.0)


def test_bad_inputs():
    with pytest.raises(ValueError):
        greedy_segmentation(STEP, 1, 0.0)
    with pytest.raises(ValueError):
        greedy_segmentation([(2, 0), (1, 0)], 1, 1.0)


def test_single_key_segments_allowed():
    samples = [(0, 0), (1, 100), (2, 0), (3, 100)]
    seq = greedy_segmentation(samples, 1, 1.0)
    assert all(s.certified_error <= 1.0 for s in seq)
    assert seq.boundaries[-1] == 3


def test_gap_overshoot_detects_interior_peak():
    # both samples are 0 while P rises to 1 between them
    keys = np.array([0.0, 2.0])
    vals = np.array([0.0, 0.0])
    p = PolyCoeffs((1.0, 0.0, -1.0), 1.0, 1.0)  # 1 - (k - 1)**2
    assert gap_overshoot(p, keys, vals) == pytest.approx(1.0)
    # continuous certification lifts the MAX-mode certified error
    seq = segment_exponential(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.0, 5.0, 5.0, 0.0]),
                              2, 100.0, continuous_max=True)
    assert seq[0].certified_error > 0.0
