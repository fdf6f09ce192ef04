import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, random_cascade
from vjamp.cascade import Cascade, EvalCounters, HaarFeature, Stage, WeakClassifier, run_cascade
from vjamp.detector import (
    DetectParams,
    Detection,
    UndefinedMetricError,
    annotate,
    candidate_xs,
    detect,
    group_detections,
    iou,
    partition_static,
    rit,
    scan_origins,
    scan_scale,
    to_original,
)
from vjamp.imaging import GrayImage, Rect, build_pyramid, compute_integrals, load_image, pyramid_dims

ACCEPT_ALL = Cascade((Stage((WeakClassifier(HaarFeature(((Rect(0, 0, 2, 2), 1), (Rect(2, 0, 2, 2), -1))), 0, 1, 1),), 1),))


def _random_image(rng, w, h):
    return GrayImage(rng.integers(0, 256, (h, w), dtype=np.uint8))


@pytest.mark.parametrize("kw", [dict(scale_factor=1.0), dict(step=0), dict(step=1.5), dict(min_window=20), dict(group_overlap=0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        DetectParams(**kw)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_scan_matches_scalar_cascade(seed, step):
    rng = np.random.default_rng(seed)
    c = random_cascade(rng)
    ip = compute_integrals(_random_image(rng, 40, 33))
    counters = EvalCounters()
    got = scan_scale(c, ip, step, counters)
    want = [o for o in scan_origins(40, 33, 24, step) if run_cascade(c, ip, o)]
    assert got == want
    ref = EvalCounters()
    for o in scan_origins(40, 33, 24, step):
        run_cascade(c, ip, o, ref)
    assert (counters.windows, counters.stages, counters.weak_evals) == (ref.windows, ref.stages, ref.weak_evals)


def test_scan_order_is_x_outer_y_inner():
    assert scan_origins(26, 26, 24, 1) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]


def test_accept_all_reports_every_window():
    ip = compute_integrals(GrayImage.blank(30, 27))
    assert scan_scale(ACCEPT_ALL, ip, 2) == scan_origins(30, 27, 24, 2)


def test_window_larger_than_image_scans_nothing():
    assert scan_scale(ACCEPT_ALL, compute_integrals(GrayImage.blank(20, 30)), 1) == []
    rep = detect(GrayImage.blank(23, 23), ACCEPT_ALL)
    assert rep.detections == [] and rep.windows_scanned == 0


@given(st.integers(0, 200), st.integers(1, 16))
def test_static_partition_is_contiguous_and_complete(n, workers):
    xs = np.arange(n)
    blocks = partition_static(xs, workers)
    assert len(blocks) <= workers
    joined = np.concatenate(blocks) if blocks else np.array([], dtype=xs.dtype)
    assert np.array_equal(joined, xs)
    if blocks:
        sizes = [b.size for b in blocks]
        assert max(sizes) - min(sizes) <= 1


def test_windows_scanned_counts_every_level():
    img = GrayImage.blank(60, 50)
    p = DetectParams(scale_factor=1.25, step=2)
    rep = detect(img, ACCEPT_ALL, p)
    want = sum(len(candidate_xs(w, 24, 2)) * len(range(0, h - 23, 2)) for _, w, h, _ in pyramid_dims(60, 50, 1.25))
    assert rep.windows_scanned == want
    assert rep.weak_evals == want


@pytest.mark.parametrize("workers", [2, 3, 4, 8])
def test_parallel_detect_is_identical(workers, rng):
    c = random_cascade(rng, 2)
    img = _random_image(rng, 90, 70)
    seq = detect(img, c, DetectParams(group_min_neighbors=1))
    par = detect(img, c, DetectParams(group_min_neighbors=1), workers=workers)
    assert par.raw == seq.raw
    assert par.detections == seq.detections
    assert (par.windows_scanned, par.weak_evals) == (seq.windows_scanned, seq.weak_evals)


def test_workers_must_be_positive():
    with pytest.raises(ValueError):
        detect(GrayImage.blank(30, 30), ACCEPT_ALL, workers=0)


def test_to_original_rounds_half_up_and_clamps():
    d = to_original(5, 3, 1, 1.5, 24, 100, 100)
    assert d.box() == (8, 5, 36, 36)  # 7.5 -> 8, 4.5 -> 5
    edge = to_original(30, 30, 2, 1.44, 24, 76, 76)
    assert edge.x + edge.w <= 76 and edge.y + edge.h <= 76


def test_iou():
    assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert iou((0, 0, 10, 10), (10, 0, 10, 10)) == 0.0
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(50 / 150)


def test_grouping_is_transitive():
    # a~b and b~c overlap, a and c do not: still one class
    a, b, c = Detection(0, 0, 10, 10), Detection(3, 0, 10, 10), Detection(6, 0, 10, 10)
    assert iou(a.box(), c.box()) < 0.4 <= iou(a.box(), b.box())
    out = group_detections([a, b, c], min_neighbors=2, overlap=0.4)
    assert out == [Detection(3, 0, 10, 10, 0, 3)]


def test_grouping_drops_small_classes_and_averages():
    raw = [Detection(0, 0, 10, 10), Detection(1, 1, 11, 11), Detection(50, 50, 10, 10)]
    out = group_detections(raw, min_neighbors=2)
    assert out == [Detection(1, 1, 11, 11, 0, 2)]  # means 0.5 and 10.5 round half up
    assert len(group_detections(raw, min_neighbors=1)) == 2


def test_blank_image_has_no_detections(reference_cascade):
    rep = detect(GrayImage.blank(120, 90, 128), reference_cascade)
    assert rep.detections == []
    assert rep.integral_value == 128 * 120 * 90


def test_rit():
    assert rit(2.0, 1000, 4) == 500.0
    with pytest.raises(UndefinedMetricError):
        rit(2.0, 1000, 0)


def test_annotate_writes_p6(tmp_path):
    img = GrayImage.blank(40, 30, 10)
    annotate(img, [Detection(2, 3, 10, 10)], tmp_path / "a.ppm")
    data = (tmp_path / "a.ppm").read_bytes()
    assert data.startswith(b"P6\n40 30\n255\n")
    rgb = np.frombuffer(data[len(b"P6\n40 30\n255\n"):], dtype=np.uint8).reshape(30, 40, 3)
    assert (rgb[3, 2:12] == 255).all() and rgb[4, 4, 0] == 10


def test_portrait_golden(reference_cascade):
    golden = json.loads((DATA / "golden_portrait.json").read_text())
    img = load_image(DATA / golden["image"])
    rep = detect(img, reference_cascade, DetectParams())
    assert [[d.x, d.y, d.w, d.h, d.score] for d in rep.detections] == golden["detections"]
    assert rep.windows_scanned == golden["windows_scanned"]
    assert rep.weak_evals == golden["weak_evals"]
    assert len(rep.detections) == 1
    assert iou(rep.detections[0].box(), tuple(golden["truth"])) >= 0.5


def test_windows_scanned_decreases_with_step_and_scale():
    img = GrayImage.blank(192, 144)
    by_step = [detect(img, ACCEPT_ALL, DetectParams(step=s)).windows_scanned for s in (1, 2, 3, 4)]
    by_scale = [detect(img, ACCEPT_ALL, DetectParams(scale_factor=f)).windows_scanned for f in (1.1, 1.2, 1.3, 1.4, 1.5)]
    assert all(a > b for a, b in zip(by_step, by_step[1:]))
    assert all(a > b for a, b in zip(by_scale, by_scale[1:]))


def test_pyramid_levels_match_report_scale_levels(rng):
    img = _random_image(rng, 64, 48)
    rep = detect(img, ACCEPT_ALL, DetectParams(group_min_neighbors=1))
    n_levels = len(build_pyramid(img, 1.2))
    assert {d.scale_level for d in rep.raw} == set(range(n_levels))


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(1, 12), st.integers(1, 12)), max_size=25),
       st.sampled_from([0.2, 0.4, 0.5, 1.0]))
@settings(max_examples=80, deadline=None)
def test_grouping_components_match_flood_fill(boxes, overlap):
    from oracles import overlap_classes

    raw = [Detection(*b) for b in boxes]
    want_labels = overlap_classes(boxes, overlap)
    classes = {}
    for i, lab in enumerate(want_labels):
        classes.setdefault(lab, []).append(i)
    out = group_detections(raw, min_neighbors=1, overlap=overlap)
    assert [d.score for d in out] == [len(m) for m in sorted(classes.values(), key=lambda m: m[0])]
