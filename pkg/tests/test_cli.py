import csv
import io
import json
import shutil

import numpy as np
import pytest

from conftest import DATA, random_cascade
from vjamp import amp, cli
from vjamp.cascade import Cascade, HaarFeature, Stage, WeakClassifier, save_cascade
from vjamp.corpus import detection_image, write_manifest
from vjamp.imaging import GrayImage, Rect, save_pgm

EDGE = HaarFeature(((Rect(0, 0, 12, 24), 1), (Rect(12, 0, 12, 24), -1)))


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cascade_file(tmp_path):
    path = tmp_path / "c.vjc"
    save_cascade(random_cascade(np.random.default_rng(7), 2), path)
    return path


@pytest.fixture
def silent_cascade(tmp_path):
    path = tmp_path / "silent.vjc"
    save_cascade(Cascade((Stage((WeakClassifier(EDGE, 0, 0, 0),), 1),)), path)
    return path


@pytest.fixture
def small_corpus(tmp_path):
    rng = np.random.default_rng(5)
    entries = []
    for i in range(2):
        img, truth = detection_image(96, 72, 1, rng)
        path = tmp_path / f"img{i}.pgm"
        save_pgm(img, path)
        entries.append((path.name, truth))
    write_manifest(tmp_path / "manifest.txt", entries)
    return tmp_path


def test_detect_blank_image(capsys, tmp_path, silent_cascade):
    save_pgm(GrayImage.blank(64, 48), tmp_path / "blank.pgm")
    code, out, _ = _run(capsys, "detect", "--cascade", silent_cascade, "--image", tmp_path / "blank.pgm")
    assert code == 0
    rep = json.loads(out)
    assert rep["detections"] == [] and rep["windows_scanned"] > 0


def test_detect_workers_do_not_change_the_report(capsys, tmp_path, cascade_file):
    img = DATA / "faces" / "img_000.pgm"
    bodies = []
    for w in (1, 4):
        code, out, _ = _run(capsys, "detect", "--cascade", cascade_file, "--image", img, "--workers", w,
                            "--min-neighbors", 1)
        assert code == 0
        body = json.loads(out)
        body.pop("elapsed_s", None)
        body.pop("elapsed", None)
        bodies.append(body)
    assert bodies[0] == bodies[1]


def test_annotate_writes_p6_of_input_size(capsys, tmp_path, cascade_file):
    out = tmp_path / "a.ppm"
    code, _, _ = _run(capsys, "detect", "--cascade", cascade_file, "--image", DATA / "faces" / "img_001.pgm",
                      "--annotate", out, "--json", tmp_path / "r.json")
    assert code == 0
    assert out.read_bytes().startswith(b"P6\n192 144\n255\n")
    assert json.loads((tmp_path / "r.json").read_text())["detections"] is not None


@pytest.mark.parametrize(
    "argv",
    [
        ["detect", "--image", "missing.pgm"],
        ["detect", "--cascade", "missing.vjc", "--image", str(DATA / "faces" / "img_000.pgm")],
        ["detect", "--image", str(DATA / "faces" / "img_000.pgm"), "--scale", "1.0"],
        ["detect", "--image", str(DATA / "faces" / "img_000.pgm"), "--workers", "0"],
        ["sim", "--policy", "random"],
        ["sim", "--freqs", "1234"],
        ["sim", "--image-dims", "12by12"],
        ["eval", "--corpus", "/nonexistent"],
        ["bogus"],
        [],
    ],
)
def test_input_errors_exit_2(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2 and err


def test_bad_cascade_file_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.vjc"
    bad.write_text("VJC9\n")
    code, _, err = _run(capsys, "detect", "--cascade", bad, "--image", DATA / "faces" / "img_000.pgm")
    assert code == 2 and "line 1" in err


def test_env_threads(monkeypatch, capsys):
    monkeypatch.setenv("VJ_THREADS", "zero")
    assert _run(capsys, "sim")[0] == 2
    monkeypatch.setenv("VJ_THREADS", "3")
    assert cli.default_workers() == 3


def test_invariant_failure_exits_3(monkeypatch, capsys):
    monkeypatch.setattr(amp, "check_schedule", lambda g, s: ["broken"])
    code, _, err = _run(capsys, "sim", "--policy", "botlev")
    assert code == 3 and "invariant" in err


def test_eval_silent_cascade(capsys, small_corpus, silent_cascade):
    code, out, _ = _run(capsys, "eval", "--cascade", silent_cascade, "--corpus", small_corpus)
    assert code == 0
    rows = dict(line.strip().rsplit(None, 1) for line in out.splitlines()[1:])
    rows = {k.strip(): v for k, v in rows.items()}
    assert rows["precision"] == "n/a"
    assert rows["recall"] == "0.00%"
    assert rows["false negative"] == "2"


def test_sim_orders_parallel_against_sequential(capsys, tmp_path):
    code, out, _ = _run(capsys, "sim", "--dot", tmp_path / "g.dot", "--schedule-csv", tmp_path / "s.csv")
    assert code == 0
    rows = {r["policy"]: r for r in csv.DictReader(io.StringIO(out))}
    assert set(rows) == set(amp.POLICIES)
    par, seq = rows["all_cores_fifo"], rows["big_only_sequential"]
    assert float(par["makespan_s"]) < float(seq["makespan_s"])
    assert float(par["joules"]) > float(seq["joules"])
    assert (tmp_path / "g.dot").read_text().startswith("digraph")
    sched = list(csv.DictReader(io.StringIO((tmp_path / "s.csv").read_text())))
    assert {r["policy"] for r in sched} == set(amp.POLICIES)


def test_sim_frequency_sweep_selects_one_row(capsys):
    code, out, _ = _run(capsys, "sim", "--policy", "botlev", "--freqs", "2000,1500,1000,800")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["big_mhz"] for r in rows if r["selected"] == "1"] == ["1500"]


def test_sweep_single_cell_matches_eval(capsys, small_corpus, cascade_file, tmp_path):
    code, out, _ = _run(capsys, "sweep", "--cascade", cascade_file, "--corpus", small_corpus, "--steps", "1",
                        "--scales", "1.2", "--csv", tmp_path / "s.csv", "--svg", tmp_path / "s.svg")
    assert code == 0
    (row,) = list(csv.DictReader(io.StringIO((tmp_path / "s.csv").read_text())))
    assert int(row["total_error"]) == int(row["fp"]) + int(row["fn"])
    code, out, _ = _run(capsys, "eval", "--cascade", cascade_file, "--corpus", small_corpus)
    total = next(line for line in out.splitlines() if "total error" in line).split()[-1]
    assert total == row["total_error"]
    assert (tmp_path / "s.svg").read_text().startswith("<svg")


def test_sweep_windows_fall_with_step(capsys, small_corpus, silent_cascade, tmp_path):
    code, _, _ = _run(capsys, "sweep", "--cascade", silent_cascade, "--corpus", small_corpus, "--steps", "1,2,3,4",
                      "--scales", "1.2", "--csv", tmp_path / "s.csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "s.csv").read_text())))
    windows = [int(r["windows_scanned"]) for r in rows]
    assert all(a > b for a, b in zip(windows, windows[1:]))


def test_sweep_model_mode_needs_no_cascade(capsys, small_corpus):
    code, out, _ = _run(capsys, "sweep", "--cascade", "missing.vjc", "--corpus", small_corpus, "--mode", "model",
                        "--steps", "1", "--scales", "1.2", "--freqs", "2000,1500")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2 and all(r["total_error"] == "" for r in rows)


def test_train_is_byte_identical(capsys, tmp_path):
    for kind, n in (("pos", 40), ("neg", 80)):
        (tmp_path / kind).mkdir()
        for f in sorted((DATA / "train" / kind).glob("*.pgm"))[:n]:
            shutil.copy(f, tmp_path / kind / f.name)
    outs = []
    for i in range(2):
        out = tmp_path / f"c{i}.vjc"
        code, text, _ = _run(capsys, "train", "--pos", tmp_path / "pos", "--neg", tmp_path / "neg", "--stages", 2,
                             "--stride", 4, "--size-step", 3, "--holdout", 0.25, "--seed", 3, "-o", out)
        assert code == 0 and "held-out DR" in text
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_train_rejects_missing_directory(capsys, tmp_path):
    code, _, err = _run(capsys, "train", "--pos", tmp_path / "nope", "--neg", tmp_path, "-o", tmp_path / "c.vjc")
    assert code == 2 and "not a directory" in err
