"""Detection scoring: box matching, precision/recall and corpus evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from .cascade import Cascade
from .corpus import LabeledImage
from .detector import DetectParams, detect, iou
from .imaging import load_image

NA = "n/a"


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int
    total_faces: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.total_faces) < 0:
            raise ValueError("counts must be non-negative")
        if self.tp + self.fn != self.total_faces:
            raise ValueError(f"tp + fn ({self.tp} + {self.fn}) != total faces {self.total_faces}")

    @classmethod
    def from_errors(cls, fp: int, fn: int, total_faces: int) -> "EvalCounts":
        return cls(total_faces - fn, fp, fn, total_faces)

    @property
    def total_error(self) -> int:
        return self.fp + self.fn

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                          self.total_faces + other.total_faces)


def match_detections(dets, truth, iou_min: float = 0.4) -> EvalCounts:
    """Greedy one-to-one matching, highest IoU first.

    ``dets`` and ``truth`` hold ``(x, y, w, h)`` boxes (or objects with a
    ``box()`` method).  Pairs tie-break on detection then truth index.
    """
    if not 0 < iou_min <= 1:
        raise ValueError("iou_min must lie in (0, 1]")
    db = [d.box() if hasattr(d, "box") else tuple(d) for d in dets]
    tb = [tuple(t) for t in truth]
    pairs = sorted(
        ((iou(a, b), i, j) for i, a in enumerate(db) for j, b in enumerate(tb)),
        key=lambda p: (-p[0], p[1], p[2]),
    )
    used_d, used_t = set(), set()
    tp = 0
    for v, i, j in pairs:
        if v < iou_min:
            break
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        tp += 1
    return EvalCounts(tp, len(db) - tp, len(tb) - tp, len(tb))


def precision_recall(c: EvalCounts):
    """``tp / (tp + fp)`` and ``tp / (tp + fn)``; :data:`NA` where undefined."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else NA
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else NA
    return precision, recall


def fmt_pct(v) -> str:
    return NA if v == NA else f"{100 * v:.2f}%"


@dataclass
class CorpusResult:
    counts: EvalCounts
    elapsed: float
    windows_scanned: int
    weak_evals: int
    n_images: int
    per_image: list[EvalCounts]


def evaluate_corpus(c: Cascade, entries: list[LabeledImage], p: DetectParams | None = None,
                    workers: int = 1, iou_min: float = 0.4) -> CorpusResult:
    """Run the detector on every labelled image and pool the counts.

    ``elapsed`` sums the detector's own timings (decoding excluded).
    """
    p = p or DetectParams()
    total = EvalCounts(0, 0, 0, 0)
    per = []
    elapsed = 0.0
    windows = evals = 0
    for e in entries:
        img = load_image(e.path)
        for x, y, w, h in e.boxes:
            if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
                raise ValueError(f"{e.path}: box {(x, y, w, h)} outside the image")
        rep = detect(img, c, p, workers=workers)
        cnt = match_detections(rep.detections, e.boxes, iou_min)
        per.append(cnt)
        total = total + cnt
        elapsed += rep.elapsed
        windows += rep.windows_scanned
        evals += rep.weak_evals
    return CorpusResult(total, elapsed, windows, evals, len(entries), per)


def report_table(name: str, r: CorpusResult) -> str:
    """Plain-text summary with error counts, time and precision/recall."""
    prec, rec = precision_recall(r.counts)
    rows = [
        ("images", str(r.n_images)),
        ("faces", str(r.counts.total_faces)),
        ("false positive", str(r.counts.fp)),
        ("false negative", str(r.counts.fn)),
        ("total error", str(r.counts.total_error)),
        ("execution time (min)", f"{r.elapsed / 60:.4f}"),
        ("precision", fmt_pct(prec)),
        ("recall", fmt_pct(rec)),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [name]
    lines += [f"  {k.ljust(width)}  {v}" for k, v in rows]
    return "\n".join(lines) + "\n"

