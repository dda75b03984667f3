import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmk import errors
from gmk.motion import ChannelDescriptor, PoseSequence
from gmk.patterns import Thresholds
from gmk.windows import Window, WordTiming, describe_window, segment_windows, select_keyframes


def words(*spans):
    return [WordTiming(f"w{i}", a, b) for i, (a, b) in enumerate(spans)]


def test_greedy_single_window():
    (w,) = segment_windows(words((0, 0.5), (0.5, 1.0), (1.0, 1.5)))
    assert (w.start, w.end, len(w.words), w.residue) == (0, 1.5, 3, False)


def test_long_word_bisected():
    ws = segment_windows(words((0, 3.2)))
    assert [(w.start, w.end) for w in ws] == [(0, 1.6), (1.6, 3.2)]
    assert not any(w.residue for w in ws)


def test_empty():
    assert segment_windows([]) == []


def test_short_utterance_is_residue():
    (w,) = segment_windows(words((0, 0.3), (0.3, 0.6)))
    assert w.residue


def test_short_tail_is_rebalanced():
    ws = segment_windows(words((0, 0.5), (0.5, 1.0), (1.0, 1.5), (1.5, 1.9), (1.9, 2.3)))
    assert [(w.start, w.end) for w in ws] == [(0, 1.0), (1.0, 2.3)]
    assert not any(w.residue for w in ws)


def test_word_order_errors():
    with pytest.raises(errors.UnsortedWords):
        segment_windows(words((1, 2), (0, 0.5)))
    with pytest.raises(errors.OverlappingWords):
        segment_windows(words((0, 1), (0.5, 1.5)))


def test_frame_span():
    (w,) = segment_windows(words((0, 0.5), (0.5, 1.5)), fps=30)
    assert w.frame_span == (0, 45)


@st.composite
def word_lists(draw):
    n = draw(st.integers(1, 15))
    t = draw(st.floats(0, 2))
    out = []
    for i in range(n):
        t += draw(st.sampled_from([0.0, 0.0, 0.1, 0.4]))
        dur = draw(st.floats(0.05, 4.5))
        out.append(WordTiming(f"w{i}", t, t + dur))
        t += dur
    return out


@settings(max_examples=300, deadline=None)
@given(word_lists())
def test_window_invariants(ws):
    wins = segment_windows(ws)
    assert wins[0].start == ws[0].start and wins[-1].end == ws[-1].end
    for a, b in zip(wins, wins[1:]):
        assert a.end == b.start
    for w in wins:
        assert w.end - w.start <= 2.0 + 1e-12 or w.residue
        if not w.residue:
            assert 1.0 - 1e-12 <= w.end - w.start
    for word in ws:
        if word.end - word.start <= 2.0:
            owners = [w for w in wins if word in w.words]
            assert len(owners) == 1
            assert owners[0].start <= word.start and word.end <= owners[0].end


def body_seq(data, fps=30.0):
    chans = (ChannelDescriptor("hand", "position_x", "hands_fingers"),
             ChannelDescriptor("head", "angle", "head"),
             ChannelDescriptor("elbow", "angle", "arms_shoulders"))
    return PoseSequence(data, fps, chans)


def test_select_keyframes():
    seq = body_seq(np.zeros((5, 3)))
    assert select_keyframes(Window((), 0, 1, (1, 2)), seq) == (1, 2, 1)
    ramp = np.tile(np.linspace(0, 1, 5)[:, None], (1, 3))
    assert select_keyframes(Window((), 0, 1, (0, 4)), body_seq(ramp)) == (0, 4, 0)
    apex = np.zeros((3, 3))
    apex[1, 0] = 1.0
    assert select_keyframes(Window((), 0, 1, (0, 2)), body_seq(apex)) == (0, 2, 1)
    with pytest.raises(errors.FrameSpanOutOfBounds):
        select_keyframes(Window((), 0, 1, (0, 9)), seq)
    with pytest.raises(errors.EmptySpan):
        select_keyframes(Window((), 0, 1, (3, 2)), seq)


TH = Thresholds.from_static(0.01)


def test_describe_static():
    seq = body_seq(np.zeros((30, 3)))
    regions = describe_window(Window((), 0, 1, (0, 29)), seq, TH, [1.0] * 3)
    assert {r.region for r in regions} == {"hands_fingers", "head", "arms_shoulders"}
    assert all(r.magnitude == "static" and r.tier == "very_slight" for r in regions)


def test_describe_one_moving_hand():
    sigma = 0.2
    data = np.zeros((30, 3))
    data[:, 0] = np.linspace(0, 2 * sigma, 30)
    regions = {r.region: r for r in describe_window(Window((), 0, 1, (0, 29)), body_seq(data), TH, [sigma] * 3)}
    assert regions["hands_fingers"].magnitude == "significant"
    assert regions["hands_fingers"].tier == "significant"
    assert regions["head"].magnitude == "static" and regions["arms_shoulders"].magnitude == "static"


def test_describe_single_frame():
    seq = body_seq(np.random.default_rng(0).normal(size=(10, 3)))
    regions = describe_window(Window((), 0, 0.01, (4, 4)), seq, TH, [1.0] * 3)
    for r in regions:
        assert all(d.pattern == "insufficient_data" for d in r.descriptors.values())
        assert r.keyframes == (4, 4, 4)
