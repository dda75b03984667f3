import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmk import errors
from gmk.patterns import (
    InsufficientData,
    LinearResult,
    MotionStats,
    Thresholds,
    characterize,
    classify_flags,
    classify_movement,
    classify_pattern,
    count_reversals,
    detect_motion,
    get_direction,
)
from oracles import alg2_classify, pattern_of

TH = Thresholds(eps_static=0.1, eps=0.05, eps_slow=0.5)


def test_insufficient_data():
    assert isinstance(detect_motion([5.0], TH), InsufficientData)
    assert isinstance(detect_motion([], TH), InsufficientData)
    assert classify_pattern(detect_motion([5.0], TH)) == "insufficient_data"


def test_linear_branch():
    r = detect_motion([1.0, 1.0, 1.0], TH)
    assert isinstance(r, LinearResult)
    assert (r.pattern, r.range, r.direction) == ("linear", 0.0, "none")
    r = detect_motion([0.0, 0.05], TH)
    assert r.direction == "positive" and r.range == pytest.approx(0.05)
    assert detect_motion([0.05, 0.0], TH).direction == "negative"


def test_detect_motion_hand_trace():
    r = detect_motion([0.0, 1.0, 0.0], Thresholds(0.1, 0.05, 0.5))
    assert isinstance(r, MotionStats)
    assert r.delta_range == 1.0 and r.net_change == 0.0
    assert r.s == (False, True)
    assert r.e == (False, True)
    assert r.interior == (True, False)


@pytest.mark.parametrize("y, expected", [
    ([0.0, 1.0], "round_trip"),
    ([0.0, 1.0, 0.0], "return_to_extreme"),
    ([1.0, 0.0, 2.0, 1.0], "peak_between"),
    ([2.0, 0.0, 1.0], "peak_at_start"),
    ([1.0, 0.0, 2.0], "peak_at_end"),
    ([1.0, 2.0, 0.0, 1.5], "peak_between"),
])
def test_classify_examples(y, expected):
    assert classify_pattern(detect_motion(y, TH)) == expected


def test_get_direction():
    assert get_direction(0.5) == "positive"
    assert get_direction(-0.5) == "negative"
    assert get_direction(0.0) == "none"


def test_classify_movement():
    th = Thresholds(0.05, 0.025, 0.2)
    assert classify_movement(0.01, th) == "static"
    assert classify_movement(0.1, th) == "slow"
    assert classify_movement(0.5, th) == "significant"
    assert classify_movement(-0.5, th) == "significant"


def test_thresholds_validation():
    with pytest.raises(errors.ConfigError):
        Thresholds(0.2, 0.1, 0.1)
    with pytest.raises(errors.ConfigError):
        Thresholds(0.0, 0.1, 0.5)


def test_cascade_total_over_all_flags():
    seen = set()
    for flags in itertools.product([False, True], repeat=6):
        got = classify_flags(*flags)
        assert got == alg2_classify(flags[0:2], flags[2:4], flags[4:6])
        seen.add(got)
    assert seen == {"round_trip", "return_to_extreme", "peak_at_start", "peak_at_end",
                    "peak_between", "single_extreme_inside", "complex_extrema"}


series = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=25)


@settings(max_examples=300, deadline=None)
@given(series)
def test_start_aligned_extremum_is_never_interior(y):
    r = detect_motion(y, TH)
    if isinstance(r, MotionStats):
        # the argmax is taken at first occurrence, so index 0 wins any tie with y0
        if r.i_max == 0:
            assert not r.interior[0]
        if r.i_min == 0:
            assert not r.interior[1]
        assert r.y_min <= r.y0 <= r.y_max and r.y_min <= r.yT <= r.y_max


@settings(max_examples=300, deadline=None)
@given(series)
def test_agrees_with_transcribed_oracle(y):
    assert classify_pattern(detect_motion(y, TH)) == pattern_of(y, TH.eps_static, TH.eps)


@settings(max_examples=200, deadline=None)
@given(series, st.integers(-6, 6))
def test_scale_covariance(y, p):
    c = 2.0 ** p  # exact scaling keeps every comparison bit-identical
    a, b = detect_motion(y, TH), detect_motion([c * v for v in y], TH.scaled(c))
    assert type(a) is type(b)
    assert classify_pattern(a) == classify_pattern(b)
    if isinstance(a, MotionStats):
        assert a.flags == b.flags
        assert get_direction(a.net_change) == get_direction(b.net_change)
        assert classify_movement(a.net_change, TH) == classify_movement(b.net_change, TH.scaled(c))


@settings(max_examples=200, deadline=None)
@given(series)
def test_negation_symmetry(y):
    a = detect_motion(y, TH)
    b = detect_motion([-v for v in y], TH)
    pa, pb = classify_pattern(a), classify_pattern(b)
    if isinstance(a, MotionStats):
        assert b.s == a.s[::-1] and b.e == a.e[::-1]
        assert get_direction(b.net_change) == {"positive": "negative", "negative": "positive",
                                               "none": "none"}[get_direction(a.net_change)]
        # interior flags can differ on plateaus because of first-occurrence argmax
        if len(set(y)) == len(y):
            assert pa == pb
    for keep in ("round_trip", "return_to_extreme"):
        assert (pa == keep) == (pb == keep)


@settings(max_examples=200, deadline=None)
@given(series)
def test_round_trip_time_reversal(y):
    a = classify_pattern(detect_motion(y, TH))
    b = classify_pattern(detect_motion(y[::-1], TH))
    assert (a == "round_trip") == (b == "round_trip")


def test_count_reversals():
    assert count_reversals([0, 1, 2, 3], 0.01) == 0
    assert count_reversals([0, 1, 0], 0.01) == 1
    assert count_reversals([0, 1, 0, 1, 0, 1, 0], 0.01) == 5
    # excursions within tolerance are ignored
    assert count_reversals([0, 1, 0.995, 2], 0.01) == 0


def test_characterize_examples():
    th = Thresholds(0.02, 0.01, 0.1)
    d = characterize(np.full(10, 0.7), th, sigma_ref=1.0)
    assert (d.pattern, d.direction, d.magnitude, d.tier, d.shape) == (
        "linear", "none", "static", "very_slight", "monotonic")

    d = characterize([0, 1, 0, 1, 0, 1, 0], th, sigma_ref=1.0)
    assert d.shape == "oscillatory"

    sigma = 0.3
    d = characterize(np.linspace(0, 2 * sigma, 20), th, sigma_ref=sigma)
    assert d.tier == "significant" and d.shape == "monotonic" and d.direction == "positive"

    d = characterize([0.0, 0.5, 0.0], th, sigma_ref=1.0)
    assert d.shape == "bidirectional" and d.tier == "slight" and d.magnitude == "significant"

    with pytest.raises(errors.NonPositiveSigma):
        characterize([0.0, 1.0], th, sigma_ref=0.0)


@pytest.mark.parametrize("ratio, tier", [(0.1, "very_slight"), (0.25, "slight"), (0.74, "slight"),
                                         (0.75, "moderate"), (1.49, "moderate"), (1.5, "significant")])
def test_tier_cut_points(ratio, tier):
    th = Thresholds(0.002, 0.001, 0.01)
    assert characterize([0.0, ratio], th, sigma_ref=1.0).tier == tier


@settings(max_examples=200, deadline=None)
@given(series, st.floats(0.01, 5))
def test_static_implies_lowest_tier(y, sigma):
    d = characterize(y, TH, sigma)
    if d.magnitude == "static":
        assert d.tier == "very_slight"
    if d.shape == "oscillatory":
        assert count_reversals(y, TH.eps) >= 3
