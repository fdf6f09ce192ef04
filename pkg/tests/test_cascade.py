import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_cascade, random_feature
from vjamp import _kernels
from vjamp.cascade import (
    FIXED_ONE,
    Cascade,
    CascadeFormatError,
    EvalCounters,
    HaarFeature,
    Stage,
    WeakClassifier,
    eval_feature,
    eval_weak,
    lint_cascade,
    load_cascade,
    parse_cascade,
    run_cascade,
    save_cascade,
    serialize_cascade,
    stage_trace,
)
from vjamp.imaging import GrayImage, Rect, compute_integrals, rect_sum, window_stddev

EDGE = HaarFeature(((Rect(0, 0, 12, 24), 1), (Rect(12, 0, 12, 24), -1)))


def _window(rng, w=24, h=24):
    return compute_integrals(GrayImage(rng.integers(0, 256, (h, w), dtype=np.uint8)))


def test_feature_needs_two_or_three_rects():
    with pytest.raises(ValueError):
        HaarFeature(((Rect(0, 0, 1, 1), 1),))
    with pytest.raises(ValueError):
        HaarFeature(tuple((Rect(0, 0, 1, 1), 1) for _ in range(4)))


def test_eval_feature_is_weighted_rect_sum(rng):
    ip = _window(rng)
    want = rect_sum(ip, Rect(0, 0, 12, 24)) - rect_sum(ip, Rect(12, 0, 12, 24))
    assert eval_feature(EDGE, ip, (0, 0)) == want


def test_eval_feature_rejects_scaling(rng):
    with pytest.raises(ValueError):
        eval_feature(EDGE, _window(rng), (0, 0), scale=1.5)


def test_weak_rule_compares_against_scaled_threshold():
    img = np.zeros((24, 24), dtype=np.uint8)
    img[:, :12] = 100
    ip = compute_integrals(GrayImage(img))
    f = eval_feature(EDGE, ip, (0, 0))
    sigma = window_stddev(ip, (0, 0), 24, 24)
    assert f == 100 * 288 and sigma == 576 * 50
    # f / sigma_n == 1 exactly, so a threshold of 1.0 sends the window right
    at = WeakClassifier(EDGE, FIXED_ONE, -7, 9)
    above = WeakClassifier(EDGE, FIXED_ONE + 1, -7, 9)
    assert eval_weak(at, ip, (0, 0), sigma, 576) == 9
    assert eval_weak(above, ip, (0, 0), sigma, 576) == -7


def test_roundtrip_serialization(rng, tmp_path):
    c = random_cascade(rng, 4)
    assert parse_cascade(serialize_cascade(c)) == c
    save_cascade(c, tmp_path / "c.vjc")
    assert load_cascade(tmp_path / "c.vjc") == c
    assert (tmp_path / "c.vjc").read_text() == serialize_cascade(c)


def test_serialized_layout():
    c = Cascade((Stage((WeakClassifier(EDGE, 5, -1, 2),), 1),))
    assert serialize_cascade(c).splitlines() == [
        "VJC1 1 24 24",
        "STAGE 1 1",
        "0 0 12 24 1 12 0 12 24 -1 0 0 0 0 0 5 -1 2",
    ]


GOOD = "VJC1 1 24 24\nSTAGE 1 0\n0 0 12 24 1 12 0 12 24 -1 0 0 0 0 0 5 -1 2\n"


@pytest.mark.parametrize(
    "text, line, msg",
    [
        (GOOD.replace("VJC1", "VJC2"), 1, "header"),
        (GOOD.replace(" 5 -1 2", " 5 -1"), 3, "18 numbers"),
        (GOOD.replace("STAGE 1 0", "STAGE 0 0"), 2, "no weak"),
        (GOOD.replace(" 5 -1 2", " 5 -1 99999999999"), 3, "overflows"),
        (GOOD.replace("12 0 12 24 -1", "13 0 12 24 -1"), 3, "outside"),
        (GOOD.replace("12 0 12 24 -1", "0 0 0 0 0"), 3, "two rectangles"),
        (GOOD + "STAGE 1 0\n", 4, "trailing"),
        (GOOD.replace("VJC1 1", "VJC1 2"), 4, "expected 2 stages"),
        (GOOD.replace(" 5 ", " five "), 3, "not an integer"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, msg):
    with pytest.raises(CascadeFormatError, match=msg) as ei:
        parse_cascade(text)
    assert ei.value.line == line


def test_lint_flags_small_late_stage_and_nonzero_mean():
    w = WeakClassifier(EDGE, 0, 1, 0)
    lopsided = WeakClassifier(HaarFeature(((Rect(0, 0, 2, 2), 1), (Rect(2, 0, 1, 2), -1))), 0, 1, 0)
    c = Cascade((Stage((w, w), 1), Stage((lopsided,), 1)))
    msgs = lint_cascade(c)
    assert any("fewer weak" in m for m in msgs)
    assert any("not zero-mean" in m for m in msgs)
    assert lint_cascade(Cascade((Stage((w,), 1), Stage((w, w), 1)))) == []


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_early_exit_agrees_with_full_conjunction(seed):
    rng = np.random.default_rng(seed)
    c = random_cascade(rng)
    ip = _window(rng, 30, 28)
    origin = (int(rng.integers(0, 7)), int(rng.integers(0, 5)))
    trace = stage_trace(c, ip, origin)
    assert run_cascade(c, ip, origin) == all(ok for _, ok in trace)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_compiled_window_matches_scalar(seed):
    rng = np.random.default_rng(seed)
    c = random_cascade(rng)
    ip = _window(rng, 27, 26)
    x, y = int(rng.integers(0, 4)), int(rng.integers(0, 3))
    counters = EvalCounters()
    accepted = run_cascade(c, ip, (x, y), counters)
    depth, evals = _kernels.run_window(ip.padded, ip.sq_padded, x, y, *c.packed.args())
    assert (depth == len(c.stages)) == accepted
    assert evals == counters.weak_evals
    trace = stage_trace(c, ip, (x, y))
    first_fail = next((i for i, (_, ok) in enumerate(trace) if not ok), len(trace))
    assert depth == first_fail


def test_counters_merge():
    a = EvalCounters(1, 2, 3)
    a += EvalCounters(10, 20, 30)
    assert (a.windows, a.stages, a.weak_evals) == (11, 22, 33)


def test_with_stage_thresholds(rng):
    c = random_cascade(rng, 3)
    d = c.with_stage_thresholds([1, 2, 3])
    assert [s.threshold for s in d.stages] == [1, 2, 3]
    assert [s.weak for s in d.stages] == [s.weak for s in c.stages]


def test_random_features_fit(rng):
    for _ in range(50):
        assert random_feature(rng).fits(24, 24)
