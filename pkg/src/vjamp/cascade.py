"""Haar features, boosted stages and the cascade, plus the VJC1 text format.

Thresholds and stage contributions are fixed-point integers with
``FIXED_ONE = 2**12`` units per 1.0.  A weak classifier compares the raw
feature sum against ``threshold * sigma_n`` where ``sigma_n`` is the
window's scaled deviation (see :func:`vjamp.imaging.window_stddev`); both
sides are multiplied out so the test never divides::

    feature * FIXED_ONE < threshold * sigma_n   ->  left_val
    otherwise                                   ->  right_val
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .imaging import IntegralPair, Rect, rect_sum, window_stddev

FIXED_SHIFT = 12
FIXED_ONE = 1 << FIXED_SHIFT
INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1
MAGIC = "VJC1"


class CascadeFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class HaarFeature:
    """Weighted sum of two or three rectangles (the third slot may be empty)."""

    rects: tuple[tuple[Rect, int], ...]

    def __post_init__(self):
        if not 2 <= len(self.rects) <= 3:
            raise ValueError(f"a feature has 2 or 3 rectangles, got {len(self.rects)}")
        object.__setattr__(self, "rects", tuple((r, int(w)) for r, w in self.rects))

    @property
    def slots(self) -> tuple[tuple[Rect, int] | None, ...]:
        return self.rects + (None,) * (3 - len(self.rects))

    def weighted_area(self) -> int:
        return sum(w * r.area for r, w in self.rects)

    def fits(self, width: int, height: int) -> bool:
        return all(r.x >= 0 and r.y >= 0 and r.x + r.w <= width and r.y + r.h <= height for r, _ in self.rects)

    def negated(self) -> "HaarFeature":
        return HaarFeature(tuple((r, -w) for r, w in self.rects))


@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    threshold: int
    left_val: int
    right_val: int

    def params(self) -> list[int]:
        """The 18 serialised integers."""
        out = []
        for slot in self.feature.slots:
            if slot is None:
                out.extend((0, 0, 0, 0, 0))
            else:
                r, w = slot
                out.extend((r.x, r.y, r.w, r.h, w))
        out.extend((self.threshold, self.left_val, self.right_val))
        return out


@dataclass(frozen=True)
class Stage:
    weak: tuple[WeakClassifier, ...]
    threshold: int

    def __post_init__(self):
        object.__setattr__(self, "weak", tuple(self.weak))
        if not self.weak:
            raise ValueError("a stage needs at least one weak classifier")


@dataclass(frozen=True)
class Cascade:
    stages: tuple[Stage, ...]
    window_w: int = 24
    window_h: int = 24

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("a cascade needs at least one stage")

    @property
    def n_weak(self) -> int:
        return sum(len(s.weak) for s in self.stages)

    @property
    def window_area(self) -> int:
        return self.window_w * self.window_h

    @cached_property
    def packed(self) -> "PackedCascade":
        return PackedCascade.from_cascade(self)

    def with_stage_thresholds(self, thresholds: Sequence[int]) -> "Cascade":
        stages = [Stage(s.weak, int(t)) for s, t in zip(self.stages, thresholds)]
        return Cascade(tuple(stages), self.window_w, self.window_h)


@dataclass
class EvalCounters:
    """Per-worker evaluation tally; merge with ``+=`` after a parallel region."""

    windows: int = 0
    stages: int = 0
    weak_evals: int = 0

    def __iadd__(self, other: "EvalCounters"):
        self.windows += other.windows
        self.stages += other.stages
        self.weak_evals += other.weak_evals
        return self


@dataclass(frozen=True)
class PackedCascade:
    """Flat integer arrays consumed by the compiled scanning kernels."""

    rects: np.ndarray  # (n_weak, 3, 5): x, y, w, h, weight; empty slot all zero
    thresholds: np.ndarray  # (n_weak,)
    left: np.ndarray
    right: np.ndarray
    stage_start: np.ndarray  # (n_stages + 1,) offsets into the weak arrays
    stage_thresholds: np.ndarray  # (n_stages,)
    window_w: int
    window_h: int

    @classmethod
    def from_cascade(cls, c: Cascade) -> "PackedCascade":
        weak = [wc for s in c.stages for wc in s.weak]
        params = np.array([wc.params() for wc in weak], dtype=np.int64)
        starts = np.zeros(len(c.stages) + 1, dtype=np.int64)
        starts[1:] = np.cumsum([len(s.weak) for s in c.stages])
        return cls(
            rects=np.ascontiguousarray(params[:, :15].reshape(-1, 3, 5)),
            thresholds=np.ascontiguousarray(params[:, 15]),
            left=np.ascontiguousarray(params[:, 16]),
            right=np.ascontiguousarray(params[:, 17]),
            stage_start=starts,
            stage_thresholds=np.array([s.threshold for s in c.stages], dtype=np.int64),
            window_w=c.window_w,
            window_h=c.window_h,
        )

    def args(self):
        return (
            self.rects,
            self.thresholds,
            self.left,
            self.right,
            self.stage_start,
            self.stage_thresholds,
            self.window_w,
            self.window_h,
        )


# ---------------------------------------------------------------------------
# text format


def serialize_cascade(c: Cascade) -> str:
    lines = [f"{MAGIC} {len(c.stages)} {c.window_w} {c.window_h}"]
    for s in c.stages:
        lines.append(f"STAGE {len(s.weak)} {s.threshold}")
        lines.extend(" ".join(map(str, wc.params())) for wc in s.weak)
    return "\n".join(lines) + "\n"


def _int32(tok: str, lineno: int, what: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise CascadeFormatError(f"{what}: not an integer: {tok!r}", lineno) from None
    if not INT32_MIN <= v <= INT32_MAX:
        raise CascadeFormatError(f"{what}: value {v} overflows 32 bits", lineno)
    return v


def _parse_weak(tokens: list[str], lineno: int, ww: int, wh: int) -> WeakClassifier:
    if len(tokens) != 18:
        raise CascadeFormatError(f"weak classifier needs 18 numbers, found {len(tokens)}", lineno)
    v = [_int32(t, lineno, "weak classifier") for t in tokens]
    rects = []
    for i in range(3):
        x, y, w, h, wt = v[5 * i : 5 * i + 5]
        if x == y == w == h == wt == 0:
            continue
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > ww or y + h > wh:
            raise CascadeFormatError(
                f"rectangle {i + 1} ({x},{y},{w},{h}) outside the {ww}x{wh} window", lineno
            )
        rects.append((Rect(x, y, w, h), wt))
    if len(rects) < 2:
        raise CascadeFormatError("a feature needs at least two rectangles", lineno)
    return WeakClassifier(HaarFeature(tuple(rects)), v[15], v[16], v[17])


def parse_cascade(text: str) -> Cascade:
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(n, toks) for n, toks in lines if toks]
    if not lines:
        raise CascadeFormatError("empty cascade file", 1)
    it = iter(lines)
    n, head = next(it)
    if head[0] != MAGIC or len(head) != 4:
        raise CascadeFormatError(f"expected '{MAGIC} <stages> <w> <h>' header", n)
    n_stages, ww, wh = (_int32(t, n, "header") for t in head[1:])
    if n_stages < 1 or ww < 1 or wh < 1:
        raise CascadeFormatError("header values must be positive", n)
    stages = []
    for _ in range(n_stages):
        try:
            n, toks = next(it)
        except StopIteration:
            raise CascadeFormatError(
                f"expected {n_stages} stages, found {len(stages)}", lines[-1][0] + 1
            ) from None
        if toks[0] != "STAGE" or len(toks) != 3:
            raise CascadeFormatError("expected 'STAGE <n_weak> <threshold>'", n)
        n_weak = _int32(toks[1], n, "stage")
        thr = _int32(toks[2], n, "stage")
        if n_weak < 1:
            raise CascadeFormatError("stage has no weak classifiers", n)
        weak = []
        for _ in range(n_weak):
            try:
                n, toks = next(it)
            except StopIteration:
                raise CascadeFormatError(
                    f"stage {len(stages) + 1}: expected {n_weak} weak classifiers", lines[-1][0] + 1
                ) from None
            weak.append(_parse_weak(toks, n, ww, wh))
        stages.append(Stage(tuple(weak), thr))
    extra = next(it, None)
    if extra is not None:
        raise CascadeFormatError("trailing content after the last stage", extra[0])
    return Cascade(tuple(stages), ww, wh)


def load_cascade(path) -> Cascade:
    with open(path, encoding="utf-8") as fh:
        return parse_cascade(fh.read())


def save_cascade(c: Cascade, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_cascade(c))


def lint_cascade(c: Cascade) -> list[str]:
    """Soft checks on a trained cascade; returns human-readable warnings."""
    warnings = []
    sizes = [len(s.weak) for s in c.stages]
    for i in range(1, len(sizes)):
        if sizes[i] < sizes[0]:
            warnings.append(f"stage {i + 1} has fewer weak classifiers ({sizes[i]}) than stage 1 ({sizes[0]})")
    for si, s in enumerate(c.stages):
        for wi, wc in enumerate(s.weak):
            if wc.feature.weighted_area() != 0:
                warnings.append(f"stage {si + 1} weak {wi + 1}: feature is not zero-mean")
    return warnings


# ---------------------------------------------------------------------------
# scalar evaluation (reference path)


def eval_feature(f: HaarFeature, ip: IntegralPair, origin: tuple[int, int], scale: float = 1.0) -> int:
    if scale != 1.0:
        raise ValueError("features are evaluated at scale 1; scale the image instead")
    ox, oy = origin
    return sum(w * rect_sum(ip, r.shifted(ox, oy)) for r, w in f.rects)


def eval_weak(wc: WeakClassifier, ip: IntegralPair, origin, sigma_n: int, n: int) -> int:
    value = eval_feature(wc.feature, ip, origin)
    if value * FIXED_ONE < wc.threshold * sigma_n:
        return wc.left_val
    return wc.right_val


def eval_stage(s: Stage, ip: IntegralPair, origin, sigma_n: int, n: int) -> tuple[int, bool]:
    total = 0
    for wc in s.weak:
        total += eval_weak(wc, ip, origin, sigma_n, n)
    return total, total >= s.threshold


def run_cascade(c: Cascade, ip: IntegralPair, origin, counters: EvalCounters | None = None) -> bool:
    """Evaluate one window, stopping at the first stage that rejects it."""
    n = c.window_area
    sigma_n = window_stddev(ip, origin, c.window_w, c.window_h)
    if counters is not None:
        counters.windows += 1
    for s in c.stages:
        _, passed = eval_stage(s, ip, origin, sigma_n, n)
        if counters is not None:
            counters.stages += 1
            counters.weak_evals += len(s.weak)
        if not passed:
            return False
    return True


def stage_trace(c: Cascade, ip: IntegralPair, origin) -> list[tuple[int, bool]]:
    """All stage sums and flags for a window, without early exit."""
    sigma_n = window_stddev(ip, origin, c.window_w, c.window_h)
    return [eval_stage(s, ip, origin, sigma_n, c.window_area) for s in c.stages]
