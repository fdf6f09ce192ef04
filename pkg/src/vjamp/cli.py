"""``vjamp`` command line: detect, train, eval, sweep and sim.

Exit codes: 0 success, 2 usage or input error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import amp
from .cascade import CascadeFormatError, load_cascade, save_cascade
from .corpus import read_manifest
from .detector import DetectParams, annotate, detect, report_json
from .evaluation import evaluate_corpus, report_table
from .imaging import ImageFormatError, load_image
from .svg import sweep_svg

DATA = Path(__file__).with_name("data")
DEFAULT_CASCADE = DATA / "reference.vjc"


class InputError(Exception):
    """Bad flags or unreadable input: exit status 2."""


class InvariantError(Exception):
    """A checked invariant failed: exit status 3."""


def default_workers() -> int:
    env = os.environ.get("VJ_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise InputError(f"VJ_THREADS must be an integer, got {env!r}") from None
        if v < 1:
            raise InputError("VJ_THREADS must be >= 1")
        return v
    return 1


def _list(conv):
    def parse(text: str):
        try:
            return [conv(t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None

    return parse


def _dims(text: str) -> tuple[int, int]:
    try:
        w, h = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _params(args) -> DetectParams:
    try:
        return DetectParams(scale_factor=args.scale, step=args.step, group_min_neighbors=args.min_neighbors)
    except ValueError as e:
        raise InputError(str(e)) from None


def _cascade(path):
    try:
        return load_cascade(path)
    except FileNotFoundError:
        raise InputError(f"cascade not found: {path}") from None
    except CascadeFormatError as e:
        raise InputError(f"{path}: {e}") from None


def _image(path):
    try:
        return load_image(path)
    except FileNotFoundError:
        raise InputError(f"image not found: {path}") from None
    except ImageFormatError as e:
        raise InputError(f"{path}: {e}") from None


def _manifest(args):
    """Entries of ``--manifest`` (default ``<corpus>/manifest.txt``); image paths are relative to it."""
    path = Path(args.manifest) if args.manifest else Path(args.corpus) / "manifest.txt"
    if args.manifest and not path.is_absolute() and not path.exists():
        path = Path(args.corpus) / args.manifest
    try:
        entries = read_manifest(path)
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    except ValueError as e:
        raise InputError(str(e)) from None
    for e in entries:
        if not Path(e.path).exists():
            raise InputError(f"manifest lists missing image {e.path}")
    return entries


def _write(text: str, dest) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_detect(args) -> int:
    c = _cascade(args.cascade)
    img = _image(args.image)
    p = _params(args)
    rep = detect(img, c, p, workers=args.workers)
    _write(report_json(rep) + "\n", args.json)
    if args.annotate:
        annotate(img, rep.detections, args.annotate)
    return 0


def _load_dir(d) -> list:
    d = Path(d)
    if not d.is_dir():
        raise InputError(f"not a directory: {d}")
    files = sorted(d.glob("*.pgm")) + sorted(d.glob("*.ppm"))
    if not files:
        raise InputError(f"no PGM/PPM images in {d}")
    return [_image(f) for f in files]


def cmd_train(args) -> int:
    from .trainer import SampleSet, StageTargets, cascade_rates, enumerate_features, train_cascade

    pos_imgs, neg_imgs = _load_dir(args.pos), _load_dir(args.neg)
    rng = np.random.default_rng(args.seed)
    hold_p = hold_n = None
    if args.holdout > 0:
        ip, ineg = rng.permutation(len(pos_imgs)), rng.permutation(len(neg_imgs))
        kp, kn = int(len(pos_imgs) * args.holdout), int(len(neg_imgs) * args.holdout)
        hold_p = [pos_imgs[i] for i in sorted(ip[:kp])]
        hold_n = [neg_imgs[i] for i in sorted(ineg[:kn])]
        pos_imgs = [pos_imgs[i] for i in sorted(ip[kp:])]
        neg_imgs = [neg_imgs[i] for i in sorted(ineg[kn:])]
    try:
        pos = SampleSet.from_images(pos_imgs, [1] * len(pos_imgs))
        neg = SampleSet.from_images(neg_imgs, [0] * len(neg_imgs))
        targets = StageTargets(args.dmin, args.fmax, args.stages, args.max_weak)
    except ValueError as e:
        raise InputError(str(e)) from None
    feats = enumerate_features((24, 24), args.stride, args.size_step)
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    res = train_cascade(pos, neg, targets, feats, workers=args.workers, log=log)
    if res.cascade is None:
        raise InputError("training produced no stage")
    save_cascade(res.cascade, args.output)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(res.cascade.stages)} stages, {res.cascade.n_weak} weak classifiers -> {args.output}")
    if hold_p and hold_n:
        r = cascade_rates(res.cascade, SampleSet.from_images(hold_p, [1] * len(hold_p)),
                          SampleSet.from_images(hold_n, [0] * len(hold_n)))
        print(f"held-out DR {float(r.detection_rate):.4f} FPR {float(r.false_positive_rate):.4f}")
    return 0


def cmd_eval(args) -> int:
    c = _cascade(args.cascade)
    entries = _manifest(args)
    try:
        r = evaluate_corpus(c, entries, _params(args), args.workers, args.iou)
    except ValueError as e:
        raise InputError(str(e)) from None
    _write(report_table(f"{len(entries)} images, cascade {Path(args.cascade).name}", r), args.output)
    return 0


def _check_record(r: amp.SweepRecord) -> None:
    if r.fp is not None and r.total_error != r.fp + r.fn:
        raise InvariantError("total_error != fp + fn")


def cmd_sweep(args) -> int:
    entries = _manifest(args)
    platform = _platform(args.platform)
    freqs = args.freqs or [platform.freqs["big"]]
    little = args.little_freq or platform.freqs.get("little", 0)
    c = _cascade(args.cascade) if args.mode != "model" else None
    dims = [(img.width, img.height) for img in (_image(e.path) for e in entries)]
    records: list[amp.SweepRecord] = []
    for step in args.steps:
        for scale in args.scales:
            try:
                p = DetectParams(scale_factor=scale, step=step, group_min_neighbors=args.min_neighbors)
            except ValueError as e:
                raise InputError(str(e)) from None
            counts = elapsed = windows = evals_per = None
            if c is not None:
                res = evaluate_corpus(c, entries, p, args.workers, args.iou)
                counts, elapsed, windows = res.counts, res.elapsed, res.windows_scanned
                evals_per = res.weak_evals / res.windows_scanned if res.windows_scanned else None
            graphs = [amp.build_detection_dag(w, h, p, args.block, evals_per or 20.0) for w, h in dims]
            for f in freqs:
                try:
                    plat = platform.with_freqs(big=f, **({"little": little} if "little" in platform.clusters else {}))
                except amp.PlatformError as e:
                    raise InputError(str(e)) from None
                for pol in args.policies:
                    span = joules = 0.0
                    for g in graphs:
                        s = amp.simulate_schedule(g, plat, pol)
                        if amp.check_schedule(g, s):
                            raise InvariantError(f"invalid {pol} schedule")
                        span += s.makespan
                        joules += amp.energy_of(s, plat).total_joules
                    rec = amp.SweepRecord(
                        pol, f, little, step, scale, span, joules, joules / span if span else 0.0,
                        fp=counts.fp if counts else None, fn=counts.fn if counts else None,
                        elapsed_s=elapsed, windows_scanned=windows,
                    )
                    _check_record(rec)
                    records.append(rec)
    amp.mark_pareto(records, args.slack)
    _write(amp.records_to_csv(records), args.csv)
    if args.svg:
        Path(args.svg).write_text(sweep_svg(records), encoding="utf-8")
    return 0


def _platform(path):
    try:
        return amp.load_platform(path)
    except FileNotFoundError:
        raise InputError(f"platform file not found: {path}") from None
    except amp.PlatformError as e:
        raise InputError(str(e)) from None


def cmd_sim(args) -> int:
    platform = _platform(args.platform)
    w, h = args.image_dims
    try:
        p = DetectParams(scale_factor=args.scale, step=args.step)
    except ValueError as e:
        raise InputError(str(e)) from None
    g = amp.build_detection_dag(w, h, p, args.block, args.evals_per_window)
    freqs = args.freqs or [platform.freqs["big"]]
    little = args.little_freq or platform.freqs.get("little", 0)
    records = []
    schedules = []
    for f in freqs:
        try:
            plat = platform.with_freqs(big=f, **({"little": little} if "little" in platform.clusters else {}))
        except amp.PlatformError as e:
            raise InputError(str(e)) from None
        for pol in args.policy:
            try:
                s = amp.simulate_schedule(g, plat, pol)
            except amp.PlatformError as e:
                raise InputError(str(e)) from None
            if amp.check_schedule(g, s):
                raise InvariantError(f"invalid {pol} schedule")
            e = amp.energy_of(s, plat)
            records.append(amp.SweepRecord(pol, f, little, args.step, args.scale, s.makespan, e.total_joules, e.avg_watts))
            schedules.append((pol, f, s))
    amp.mark_pareto(records, args.slack)
    _write(amp.records_to_csv(records), args.csv)
    if args.dot:
        Path(args.dot).write_text(g.to_dot(), encoding="utf-8")
    if args.schedule_csv:
        parts = []
        for pol, f, s in schedules:
            body = amp.schedule_csv(s, g).splitlines()
            if not parts:
                parts.append("policy,big_mhz," + body[0])
            parts += [f"{pol},{f},{ln}" for ln in body[1:]]
        Path(args.schedule_csv).write_text("\n".join(parts) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# parser


def _detect_flags(sp, workers_default):
    sp.add_argument("--step", type=int, default=1, help="window step in pixels")
    sp.add_argument("--scale", type=float, default=1.2, help="pyramid scale factor")
    sp.add_argument("--min-neighbors", type=int, default=2, help="smallest kept detection class")
    sp.add_argument("--workers", type=int, default=workers_default, help="scan threads (default: $VJ_THREADS or 1)")


def build_parser(workers_default: int = 1) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vjamp", description="Cascade face detection and big.LITTLE scheduling model")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect faces in one image")
    d.add_argument("--cascade", default=str(DEFAULT_CASCADE))
    d.add_argument("--image", required=True)
    d.add_argument("--json", help="write the report here (default stdout)")
    d.add_argument("--annotate", help="write a P6 copy with detection outlines")
    _detect_flags(d, workers_default)
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("train", help="train a cascade from pos/neg window directories")
    t.add_argument("--pos", required=True)
    t.add_argument("--neg", required=True)
    t.add_argument("--stages", type=int, default=5)
    t.add_argument("--dmin", type=float, default=0.99)
    t.add_argument("--fmax", type=float, default=0.5)
    t.add_argument("--max-weak", type=int, default=200)
    t.add_argument("--stride", type=int, default=2)
    t.add_argument("--size-step", type=int, default=2)
    t.add_argument("--holdout", type=float, default=0.0, help="fraction held out to report rates")
    t.add_argument("--seed", type=int, default=0, help="seed of the held-out split")
    t.add_argument("--workers", type=int, default=workers_default)
    t.add_argument("-v", "--verbose", action="store_true")
    t.add_argument("-o", "--output", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="precision/recall on a labelled corpus")
    e.add_argument("--cascade", default=str(DEFAULT_CASCADE))
    e.add_argument("--corpus", default=str(DATA / "faces"))
    e.add_argument("--manifest")
    e.add_argument("--iou", type=float, default=0.4)
    e.add_argument("--output")
    _detect_flags(e, workers_default)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="grid over step, scale and big-cluster frequency")
    s.add_argument("--cascade", default=str(DEFAULT_CASCADE))
    s.add_argument("--corpus", default=str(DATA / "faces"))
    s.add_argument("--manifest")
    s.add_argument("--steps", type=_list(int), default=[1, 2, 3, 4])
    s.add_argument("--scales", type=_list(float), default=[1.1, 1.2, 1.3, 1.4, 1.5])
    s.add_argument("--freqs", type=_list(int), help="big-cluster MHz list")
    s.add_argument("--little-freq", type=int)
    s.add_argument("--policies", type=_list(str), default=["botlev"])
    s.add_argument("--platform")
    s.add_argument("--mode", choices=("real", "model", "both"), default="both")
    s.add_argument("--block", type=int, default=8, help="candidate columns per scan task")
    s.add_argument("--min-neighbors", type=int, default=2)
    s.add_argument("--iou", type=float, default=0.4)
    s.add_argument("--workers", type=int, default=workers_default)
    s.add_argument("--slack", type=float, default=1.25, help="makespan slack of the selection")
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("sim", help="schedule and energy model of one detection run")
    m.add_argument("--platform")
    m.add_argument("--image-dims", type=_dims, default=(192, 144))
    m.add_argument("--policy", type=_list(str), default=list(amp.POLICIES))
    m.add_argument("--freqs", type=_list(int))
    m.add_argument("--little-freq", type=int)
    m.add_argument("--step", type=int, default=1)
    m.add_argument("--scale", type=float, default=1.2)
    m.add_argument("--block", type=int, default=8)
    m.add_argument("--evals-per-window", type=float, default=20.0)
    m.add_argument("--slack", type=float, default=1.25)
    m.add_argument("--csv")
    m.add_argument("--dot")
    m.add_argument("--schedule-csv")
    m.set_defaults(func=cmd_sim)
    return ap


def main(argv=None) -> int:
    try:
        workers = default_workers()
    except InputError as e:
        print(f"vjamp: {e}", file=sys.stderr)
        return 2
    ap = build_parser(workers)
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    for attr in ("policy", "policies"):
        for pol in getattr(args, attr, None) or []:
            if pol not in amp.POLICIES:
                print(f"vjamp: unknown policy {pol!r}", file=sys.stderr)
                return 2
    if getattr(args, "workers", 1) < 1:
        print("vjamp: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except InputError as e:
        print(f"vjamp: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"vjamp: {e}", file=sys.stderr)
        return 2
    except InvariantError as e:
        print(f"vjamp: invariant failed: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
