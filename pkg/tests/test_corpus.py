import numpy as np
import pytest

from conftest import DATA
from vjamp.corpus import (
    detection_image,
    face_window,
    load_training_corpus,
    read_manifest,
    read_training_manifest,
    scene_window,
    write_detection_corpus,
    write_manifest,
    write_training_corpus,
)
from vjamp.imaging import load_image


def test_manifest_roundtrip(tmp_path):
    entries = [("a.pgm", ((1, 2, 30, 30),)), ("b.pgm", ()), ("c.pgm", ((0, 0, 5, 5), (9, 9, 6, 6)))]
    write_manifest(tmp_path / "m.txt", entries)
    got = read_manifest(tmp_path / "m.txt")
    assert [(e.path, e.boxes) for e in got] == [(str(tmp_path / p), b) for p, b in entries]


@pytest.mark.parametrize("line, msg", [("a.pgm 1 1 2 3\n", "expected 4 box numbers"), ("a.pgm x\n", "malformed")])
def test_manifest_errors_name_the_line(tmp_path, line, msg):
    (tmp_path / "m.txt").write_text("# header\n" + line)
    with pytest.raises(ValueError, match=rf"m.txt:2: {msg}"):
        read_manifest(tmp_path / "m.txt")


def test_training_manifest_errors(tmp_path):
    (tmp_path / "m.txt").write_text("a.pgm 2\n")
    with pytest.raises(ValueError, match=":1:"):
        read_training_manifest(tmp_path / "m.txt")


def test_generation_is_seeded(tmp_path):
    write_training_corpus(tmp_path / "a", 3, 4, seed=11)
    write_training_corpus(tmp_path / "b", 3, 4, seed=11)
    for f in sorted((tmp_path / "a").rglob("*.pgm")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()
    pos, neg = load_training_corpus(tmp_path / "a")
    assert (len(pos), len(neg)) == (3, 4)
    assert all((im.width, im.height) == (24, 24) for im in pos + neg)


def test_windows_are_24x24():
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert (face_window(rng).width, scene_window(rng).height) == (24, 24)


def test_detection_images_keep_faces_inside_and_apart():
    rng = np.random.default_rng(1)
    for _ in range(10):
        img, boxes = detection_image(160, 120, 3, rng)
        for x, y, w, h in boxes:
            assert x >= 0 and y >= 0 and x + w <= 160 and y + h <= 120
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                assert not (a[0] < b[0] + b[2] and b[0] < a[0] + a[2] and a[1] < b[1] + b[3] and b[1] < a[1] + a[3])


def test_detection_corpus_writer(tmp_path):
    write_detection_corpus(tmp_path, 2, seed=3, width=80, height=64)
    entries = read_manifest(tmp_path / "manifest.txt")
    assert len(entries) == 2 and all(len(e.boxes) == 1 for e in entries)


def test_bundled_corpora():
    entries = read_manifest(DATA / "faces" / "manifest.txt")
    assert len(entries) >= 20
    for e in entries:
        img = load_image(e.path)
        assert len(e.boxes) == 1
        x, y, w, h = e.boxes[0]
        assert x + w <= img.width and y + h <= img.height
    labels = read_training_manifest(DATA / "train" / "manifest.txt")
    assert sum(lab == 1 for _, lab in labels) >= 200
    assert sum(lab == 0 for _, lab in labels) >= 500
