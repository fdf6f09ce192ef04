"""Regenerate the bundled data: corpora, the reference cascade and goldens.

    python -m vjamp.fixtures [--out DIR] [--only corpus|cascade|golden]

Everything is seeded; rerunning produces identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import _kernels
from .cascade import Cascade, load_cascade, save_cascade
from .corpus import (
    load_training_corpus,
    render_face,
    render_scene,
    to_gray,
    write_detection_corpus,
    write_training_corpus,
)
from .detector import DetectParams, detect
from .imaging import GrayImage, build_pyramid, compute_integrals, save_pgm
from .trainer import SampleSet, StageTargets, enumerate_features, train_cascade

DATA = Path(__file__).with_name("data")
TRAIN_SEED = 1234
DETECT_SEED = 4321
MINE_SEED = 99
PORTRAIT_SEED = 7
N_STAGES = 25
N_WEAK = 2913


def ramp_schedule(n_stages: int = N_STAGES, total: int = N_WEAK, first: int = 9) -> list[int]:
    """Non-decreasing stage sizes starting at ``first`` and summing to ``total``."""
    if n_stages == 1:
        return [total]
    # linear ramp first..last with mean total/n_stages
    last = 2 * total / n_stages - first
    raw = [first + (last - first) * i / (n_stages - 1) for i in range(n_stages)]
    sizes = [int(round(v)) for v in raw]
    sizes[-1] += total - sum(sizes)
    return sizes


class SceneMiner:
    """Hard negatives: windows of face-free scenes that pass a partial cascade.

    Scenes are scanned on a coarse pyramid with step 2.  When fewer than
    ``n`` survivors turn up within ``max_scenes`` scenes, the rest is filled
    with fresh random scene windows so training can go on.
    """

    def __init__(self, seed: int = MINE_SEED, max_scenes: int = 60, width: int = 160, height: int = 120):
        self.rng = np.random.default_rng(seed)
        self.max_scenes = max_scenes
        self.width, self.height = width, height
        self.mined = 0
        self.filled = 0

    def __call__(self, cascade: Cascade | None, n: int) -> SampleSet:
        from .corpus import scene_window

        found: list[GrayImage] = []
        if cascade is not None:
            p = cascade.packed
            for _ in range(self.max_scenes):
                scene = to_gray(render_scene(self.width, self.height, self.rng))
                for limg, _ in build_pyramid(scene, 1.25, 24, 24):
                    ip = compute_integrals(limg)
                    xs = np.arange(0, ip.width - 23, 2, dtype=np.int64)
                    acc, *_ = _kernels.scan_columns(ip.padded, ip.sq_padded, xs, ip.height - 24, 2, *p.args())
                    for x, y in acc:
                        found.append(limg.crop(int(x), int(y), 24, 24))
                if len(found) >= n:
                    break
        if len(found) > n:
            idx = self.rng.choice(len(found), size=n, replace=False)
            found = [found[i] for i in sorted(idx)]
        self.mined += len(found)
        fresh = [scene_window(self.rng) for _ in range(n - len(found))]
        self.filled += len(fresh)
        return SampleSet.from_images(found + fresh, [0] * (len(found) + len(fresh)))


def training_sets(root: Path):
    pos_imgs, neg_imgs = load_training_corpus(root)
    pos = SampleSet.from_images(pos_imgs, [1] * len(pos_imgs))
    neg = SampleSet.from_images(neg_imgs, [0] * len(neg_imgs))
    return pos, neg


def desk_features():
    return enumerate_features((24, 24), stride=2, size_step=2)


def build_reference_cascade(root: Path, out: Path, log=print) -> Cascade:
    pos, neg = training_sets(root)
    miner = SceneMiner()
    t0 = time.perf_counter()
    res = train_cascade(
        pos,
        neg,
        StageTargets(d_min=0.995, f_max=0.5, max_stages=N_STAGES, max_weak=400),
        desk_features(),
        rounds=ramp_schedule(),
        negative_source=miner,
        log=log,
    )
    log(f"trained in {time.perf_counter() - t0:.0f}s; mined {miner.mined}, filled {miner.filled}")
    save_cascade(res.cascade, out)
    return res.cascade


def portrait_image() -> tuple[GrayImage, tuple[int, int, int, int]]:
    """A 96x96 portrait with one face, used for the golden detection list."""
    rng = np.random.default_rng(PORTRAIT_SEED)
    canvas = render_scene(96, 96, rng)
    render_face(canvas, 24, 20, 48, rng, jitter=False)
    return to_gray(canvas), (24, 20, 48, 48)


def build_golden(cascade: Cascade, out_dir: Path) -> None:
    img, box = portrait_image()
    save_pgm(img, out_dir / "portrait.pgm")
    rep = detect(img, cascade, DetectParams())
    golden = {
        "image": "portrait.pgm",
        "truth": list(box),
        "params": {"scale_factor": 1.2, "step": 1, "min_neighbors": 2, "overlap": 0.4},
        "detections": [[d.x, d.y, d.w, d.h, d.score] for d in rep.detections],
        "integral_value": rep.integral_value,
        "windows_scanned": rep.windows_scanned,
        "weak_evals": rep.weak_evals,
    }
    (out_dir / "golden_portrait.json").write_text(json.dumps(golden, indent=1) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m vjamp.fixtures", description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA)
    ap.add_argument("--only", choices=("corpus", "cascade", "golden"))
    args = ap.parse_args(argv)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.only in (None, "corpus"):
        write_training_corpus(out / "train", 1000, 2000, TRAIN_SEED)
        write_detection_corpus(out / "faces", 24, DETECT_SEED)
        print("corpora written", file=sys.stderr)
    if args.only in (None, "cascade"):
        build_reference_cascade(out / "train", out / "reference.vjc", log=lambda m: print(m, file=sys.stderr))
    if args.only in (None, "golden"):
        build_golden(load_cascade(out / "reference.vjc"), out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
