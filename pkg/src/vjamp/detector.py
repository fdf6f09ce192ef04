"""Multi-scale sliding-window detection with an optional fork-join scan."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cascade import Cascade, EvalCounters
from .imaging import GrayImage, IntegralPair, build_pyramid, compute_integrals, save_ppm


@dataclass(frozen=True)
class DetectParams:
    scale_factor: float = 1.2
    step: int = 1
    min_window: int = 24
    group_min_neighbors: int = 2
    group_overlap: float = 0.4

    def __post_init__(self):
        if not self.scale_factor > 1:
            raise ValueError(f"scale_factor must be > 1, got {self.scale_factor}")
        if int(self.step) != self.step or self.step < 1:
            raise ValueError(f"step must be an integer >= 1, got {self.step}")
        if self.min_window < 24:
            raise ValueError("min_window must be >= 24")
        if not 0 < self.group_overlap <= 1:
            raise ValueError("group_overlap must lie in (0, 1]")


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    scale_level: int = 0
    score: int = 0

    def box(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h

    def to_json(self) -> str:
        return json.dumps({"x": self.x, "y": self.y, "w": self.w, "h": self.h, "score": self.score})


@dataclass
class DetectReport:
    detections: list[Detection]
    elapsed: float
    integral_value: int
    windows_scanned: int = 0
    weak_evals: int = 0
    raw: list[Detection] = field(default_factory=list)

    def to_dict(self, include_elapsed: bool = True) -> dict:
        d = {
            "detections": [
                {"x": t.x, "y": t.y, "w": t.w, "h": t.h, "score": t.score} for t in self.detections
            ],
            "integral_value": self.integral_value,
            "windows_scanned": self.windows_scanned,
            "weak_evals": self.weak_evals,
            "raw_count": len(self.raw),
        }
        if include_elapsed:
            d["elapsed"] = self.elapsed
        return d


def candidate_xs(width: int, window: int, step: int) -> np.ndarray:
    return np.arange(0, width - window + 1, step, dtype=np.int64)


def partition_static(xs: np.ndarray, workers: int) -> list[np.ndarray]:
    """Split the outer loop into contiguous, near-equal blocks (one per worker)."""
    return [b for b in np.array_split(xs, workers) if b.size]


def _scan_block(c: Cascade, ip: IntegralPair, xs: np.ndarray, step: int):
    p = c.packed
    y_stop = ip.height - c.window_h
    return _kernels.scan_columns(ip.padded, ip.sq_padded, xs, y_stop, step, *p.args())


def scan_scale(c: Cascade, ip: IntegralPair, step: int, counters: EvalCounters | None = None):
    """Accepted window origins on one level, x outer and y inner."""
    if ip.width < c.window_w or ip.height < c.window_h:
        return []
    xs = candidate_xs(ip.width, c.window_w, step)
    acc, windows, stages, evals = _scan_block(c, ip, xs, step)
    if counters is not None:
        counters += EvalCounters(windows, stages, evals)
    return [(int(x), int(y)) for x, y in acc]


def scan_origins(width: int, height: int, window: int, step: int) -> list[tuple[int, int]]:
    """Every origin the scan visits, in scan order (no cascade involved)."""
    return [
        (x, y)
        for x in range(0, width - window + 1, step)
        for y in range(0, height - window + 1, step)
    ]


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def to_original(x: int, y: int, level: int, scale: float, window: int, width: int, height: int) -> Detection:
    size = min(_round_half_up(window * scale), width, height)
    ox = min(max(_round_half_up(x * scale), 0), width - size)
    oy = min(max(_round_half_up(y * scale), 0), height - size)
    return Detection(ox, oy, size, size, level, 0)


def detect(img: GrayImage, c: Cascade, p: DetectParams | None = None, workers: int = 1) -> DetectReport:
    """Run the cascade over every pyramid level and group the hits.

    ``workers == 1`` scans in the calling thread.  Larger values split each
    level's x range into ``workers`` contiguous blocks scanned concurrently
    (static schedule); the per-block results and counters are joined in
    block order, so the output is identical to the sequential scan.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    p = p or DetectParams()
    t0 = time.perf_counter()
    window = max(c.window_w, c.window_h)
    min_side = max(p.min_window, window)
    counters = EvalCounters()
    raw: list[Detection] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    integral_value = int(img.pixels.sum(dtype=np.int64))
    try:
        for level, (limg, scale) in enumerate(build_pyramid(img, p.scale_factor, min_side, min_side)):
            ip = compute_integrals(limg)
            xs = candidate_xs(ip.width, c.window_w, p.step)
            if pool is None:
                results = [_scan_block(c, ip, xs, p.step)]
            else:
                blocks = partition_static(xs, workers)
                futures = [pool.submit(_scan_block, c, ip, b, p.step) for b in blocks]
                results = [f.result() for f in futures]
            for acc, windows, stages, evals in results:
                counters += EvalCounters(windows, stages, evals)
                for x, y in acc:
                    raw.append(to_original(int(x), int(y), level, scale, window, img.width, img.height))
    finally:
        if pool is not None:
            pool.shutdown()
    grouped = group_detections(raw, p.group_min_neighbors, p.group_overlap, bounds=(img.width, img.height))
    elapsed = time.perf_counter() - t0
    return DetectReport(grouped, elapsed, integral_value, counters.windows, counters.weak_evals, raw)


# ---------------------------------------------------------------------------
# grouping


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def group_detections(raw, min_neighbors: int = 2, overlap: float = 0.4, bounds=None) -> list[Detection]:
    """Merge raw hits into classes linked by IoU >= ``overlap``.

    Classes are the connected components of the overlap graph; those with
    fewer than ``min_neighbors`` members are dropped and the rest collapse
    to their coordinate-wise mean box, scored by class size.  Output order
    follows each class's first raw member.
    """
    if not 0 < overlap <= 1:
        raise ValueError("overlap must lie in (0, 1]")
    boxes = [d.box() for d in raw]
    arr = np.array(boxes, dtype=np.int64).reshape(len(boxes), 4)
    roots = _kernels.overlap_components(arr, float(overlap))
    classes: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        classes.setdefault(int(r), []).append(i)
    out = []
    for members in sorted(classes.values(), key=lambda m: m[0]):
        if len(members) < min_neighbors:
            continue
        k = len(members)
        mx = _round_half_up(sum(boxes[i][0] for i in members) / k)
        my = _round_half_up(sum(boxes[i][1] for i in members) / k)
        mw = _round_half_up(sum(boxes[i][2] for i in members) / k)
        mh = _round_half_up(sum(boxes[i][3] for i in members) / k)
        if bounds is not None:
            mx = max(0, min(mx, bounds[0] - mw))
            my = max(0, min(my, bounds[1] - mh))
        out.append(Detection(mx, my, mw, mh, raw[members[0]].scale_level, k))
    return out


# ---------------------------------------------------------------------------
# reporting


class UndefinedMetricError(ValueError):
    pass


def rit(elapsed: float, integral_value: int, n_faces: int) -> float:
    """Execution time times integral value, per face."""
    if n_faces < 1:
        raise UndefinedMetricError("RIT is undefined for an image without faces")
    return elapsed * integral_value / n_faces


def annotate(img: GrayImage, detections, path) -> None:
    """Write ``img`` as P6 with 1-pixel white outlines around each detection."""
    rgb = np.repeat(img.pixels[:, :, None], 3, axis=2).copy()
    for d in detections:
        x0, y0, x1, y1 = d.x, d.y, d.x + d.w - 1, d.y + d.h - 1
        rgb[y0, x0 : x1 + 1] = 255
        rgb[y1, x0 : x1 + 1] = 255
        rgb[y0 : y1 + 1, x0] = 255
        rgb[y0 : y1 + 1, x1] = 255
    save_ppm(rgb, path)


def report_json(report: DetectReport, include_elapsed: bool = True) -> str:
    return json.dumps(report.to_dict(include_elapsed), indent=1, sort_keys=True)
