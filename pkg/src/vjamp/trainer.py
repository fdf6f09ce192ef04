"""AdaBoost stage training and cascade assembly.

Training runs in 64-bit floats on the variance-normalised feature value
``v = f / sigma_n`` and quantises to the runtime's fixed point only when a
weak classifier is emitted (``theta_q = round(theta * 4096)``, votes
``round(alpha * 4096)``).  Every prediction used for reweighting or rate
measurement goes through the integer runtime rule, so training and the
detector can never disagree about a sample.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .cascade import FIXED_ONE, Cascade, HaarFeature, PackedCascade, Stage, WeakClassifier
from .imaging import GrayImage, Rect, compute_integrals

ALPHA_SENTINEL = math.log(1e12)
TEMPLATES = ("edge_x", "edge_y", "line_x", "line_y", "diag")


class NoWeakLearnerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# features


def _template(kind: str, x: int, y: int, w: int, h: int) -> HaarFeature:
    """Feature of ``kind`` whose unit cell is ``w`` x ``h`` at (x, y)."""
    if kind == "edge_x":
        return HaarFeature(((Rect(x, y, w, h), 1), (Rect(x + w, y, w, h), -1)))
    if kind == "edge_y":
        return HaarFeature(((Rect(x, y, w, h), 1), (Rect(x, y + h, w, h), -1)))
    if kind == "line_x":
        return HaarFeature(((Rect(x, y, w, h), 1), (Rect(x + w, y, w, h), -2), (Rect(x + 2 * w, y, w, h), 1)))
    if kind == "line_y":
        return HaarFeature(((Rect(x, y, w, h), 1), (Rect(x, y + h, w, h), -2), (Rect(x, y + 2 * h, w, h), 1)))
    if kind == "diag":
        # TL + BR - TR - BL, written with three slots
        return HaarFeature(((Rect(x, y, 2 * w, 2 * h), -1), (Rect(x, y, w, h), 2), (Rect(x + w, y + h, w, h), 2)))
    raise ValueError(f"unknown template {kind!r}")


_SPAN = {"edge_x": (2, 1), "edge_y": (1, 2), "line_x": (3, 1), "line_y": (1, 3), "diag": (2, 2)}


def enumerate_features(window: tuple[int, int] = (24, 24), stride: int = 1, size_step: int = 1,
                       templates: Sequence[str] = TEMPLATES) -> list[HaarFeature]:
    """All template placements on a grid.

    Unit cells take sizes ``1, 1 + size_step, ...`` and positions ``0,
    stride, ...``; ``stride = size_step = 1`` is exhaustive.
    """
    if stride < 1 or size_step < 1:
        raise ValueError("stride and size_step must be >= 1")
    ww, wh = window
    out = []
    for kind in templates:
        sx, sy = _SPAN[kind]
        for h in range(1, wh // sy + 1, size_step):
            for w in range(1, ww // sx + 1, size_step):
                for y in range(0, wh - sy * h + 1, stride):
                    for x in range(0, ww - sx * w + 1, stride):
                        out.append(_template(kind, x, y, w, h))
    return out


def pack_features(features: Sequence[HaarFeature]) -> np.ndarray:
    out = np.zeros((len(features), 3, 5), dtype=np.int64)
    for i, f in enumerate(features):
        for j, (r, w) in enumerate(f.rects):
            out[i, j] = (r.x, r.y, r.w, r.h, w)
    return out


# ---------------------------------------------------------------------------
# samples


@dataclass
class SampleSet:
    """Window integrals, labels and scaled deviations of a batch of samples."""

    ii: np.ndarray  # (n, h+1, w+1) padded integral images
    sq: np.ndarray
    labels: np.ndarray  # 1 face, 0 background
    sigma_n: np.ndarray
    window: tuple[int, int] = (24, 24)

    @classmethod
    def from_images(cls, images: Sequence[GrayImage], labels: Sequence[int], window=(24, 24)) -> "SampleSet":
        ww, wh = window
        n = len(images)
        ii = np.zeros((n, wh + 1, ww + 1), dtype=np.int64)
        sq = np.zeros_like(ii)
        for i, img in enumerate(images):
            if (img.width, img.height) != (ww, wh):
                raise ValueError(f"sample {i} is {img.width}x{img.height}, expected {ww}x{wh}")
            ip = compute_integrals(img)
            ii[i], sq[i] = ip.padded, ip.sq_padded
        sig = np.array([_kernels.window_sigma_n(ii[i], sq[i], 0, 0, ww, wh) for i in range(n)], dtype=np.int64)
        return cls(ii, sq, np.asarray(labels, dtype=np.int64), sig, tuple(window))

    @classmethod
    def concat(cls, parts: Sequence["SampleSet"]) -> "SampleSet":
        parts = [p for p in parts if len(p)]
        return cls(
            np.concatenate([p.ii for p in parts]),
            np.concatenate([p.sq for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.sigma_n for p in parts]),
            parts[0].window,
        )

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx, dtype=np.int64)
        return SampleSet(self.ii[idx], self.sq[idx], self.labels[idx], self.sigma_n[idx], self.window)

    def raw_values(self, packed_features: np.ndarray) -> np.ndarray:
        return _kernels.feature_values(self.ii, packed_features)

    def depths(self, c: Cascade) -> np.ndarray:
        """Number of stages each sample passes."""
        if (c.window_w, c.window_h) != self.window:
            raise ValueError("cascade and sample windows differ")
        return _kernels.batch_depths(self.ii, self.sq, *PackedCascade.from_cascade(c).args())


def normalized_values(raw: np.ndarray, sigma_n: np.ndarray) -> np.ndarray:
    """``f / sigma_n`` per sample.

    Flat windows (sigma_n == 0) map to ``+inf``: the runtime rule sends them
    right under every threshold.
    """
    sig = sigma_n.astype(np.float64)
    safe = np.where(sig > 0, sig, 1.0)
    return np.where(sig > 0, raw / safe, np.inf)


@dataclass
class FeatureMatrix:
    """Feature values of a fixed sample set, with per-feature sort orders."""

    features: list[HaarFeature]
    packed: np.ndarray
    raw: np.ndarray  # (F, n) raw feature sums
    order: np.ndarray  # (F, n) argsort of the normalised values
    sorted_values: np.ndarray  # normalised values gathered through order
    sigma_n: np.ndarray

    @classmethod
    def build(cls, features: Sequence[HaarFeature], samples: SampleSet) -> "FeatureMatrix":
        if not len(features):
            raise ValueError("empty feature list")
        if not len(samples):
            raise ValueError("empty sample set")
        packed = pack_features(features)
        return cls.from_raw(samples.raw_values(packed), samples.sigma_n, list(features), packed)

    @classmethod
    def from_raw(cls, raw: np.ndarray, sigma_n: np.ndarray, features=None, packed=None) -> "FeatureMatrix":
        """Matrix over precomputed ``(features, samples)`` integer sums."""
        raw = np.asarray(raw)
        sigma_n = np.asarray(sigma_n, dtype=np.int64)
        values = normalized_values(raw, sigma_n)
        order = np.argsort(values, axis=1, kind="stable").astype(np.int32)
        sorted_values = np.take_along_axis(values, order, axis=1)
        del values
        return cls(features if features is not None else [], packed, raw.astype(np.int32), order, sorted_values, sigma_n)

    @property
    def values(self) -> np.ndarray:
        """Normalised values in sample order."""
        out = np.empty_like(self.sorted_values)
        np.put_along_axis(out, self.order.astype(np.int64), self.sorted_values, axis=1)
        return out


# ---------------------------------------------------------------------------
# weak learner


@dataclass(frozen=True)
class StumpChoice:
    feature: int
    theta_q: int  # fixed-point threshold, FIXED_ONE per unit of f / sigma_n
    polarity: int
    error: float

    @property
    def theta(self) -> float:
        return self.theta_q / FIXED_ONE


def stump_search(fm: "FeatureMatrix", weights: np.ndarray, labels: np.ndarray, workers: int = 1) -> StumpChoice:
    """Exact minimum-weighted-error stump over every feature of ``fm``.

    Thresholds range over the fixed-point grid the runtime uses, so the
    reported error is the error of the emitted classifier.  With
    ``workers > 1`` disjoint feature ranges are searched concurrently and
    reduced by ``(error, feature)``, which reproduces the sequential
    tie-break.
    """
    weights = np.asarray(weights, dtype=np.float64)
    is_pos = np.asarray(labels) == 1
    signed = np.where(is_pos, weights, -weights)
    t_pos = float(weights[is_pos].sum())
    t_neg = float(weights[~is_pos].sum())
    sv, order, raw, sig = fm.sorted_values, fm.order, fm.raw, fm.sigma_n
    nf = sv.shape[0]
    if workers <= 1 or nf < 2 * workers:
        f, q, pol, err = _kernels.best_stump(sv, order, raw, sig, signed, t_pos, t_neg)
        return StumpChoice(int(f), int(q), int(pol), float(err))
    bounds = np.linspace(0, nf, workers + 1).astype(int)

    def run(a, b):
        f, q, pol, err = _kernels.best_stump(sv[a:b], order[a:b], raw[a:b], sig, signed, t_pos, t_neg)
        return err, a + int(f), int(q), int(pol)

    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda ab: run(*ab), zip(bounds[:-1], bounds[1:])))
    err, f, q, pol = min(parts, key=lambda r: (r[0], r[1]))
    return StumpChoice(f, q, pol, float(err))


def quantize_threshold(theta: float) -> int:
    return int(round(theta * FIXED_ONE))


def weak_predictions(raw: np.ndarray, sigma_n: np.ndarray, theta_q: int, polarity: int) -> np.ndarray:
    """0/1 predictions of a stump under the integer runtime rule."""
    below = raw.astype(np.int64) * FIXED_ONE < theta_q * sigma_n.astype(np.int64)
    return (below if polarity == 1 else ~below).astype(np.int64)


def make_weak(feature: HaarFeature, theta_q: int, polarity: int, vote: int) -> WeakClassifier:
    """Weak classifier voting ``vote`` on its predicted-positive side."""
    if polarity == 1:
        return WeakClassifier(feature, theta_q, vote, 0)
    return WeakClassifier(feature, theta_q, 0, vote)


def best_weak(features, samples: SampleSet, weights, fm: FeatureMatrix | None = None,
              workers: int = 1) -> tuple[WeakClassifier, float]:
    """Select the stump with least weighted error.

    Returns the emitted weak classifier (votes ``FIXED_ONE`` for a positive
    prediction) and its weighted error under the integer rule.
    """
    if not len(features):
        raise ValueError("empty feature list")
    if not len(samples):
        raise ValueError("empty sample set")
    weights = np.asarray(weights, dtype=np.float64)
    fm = fm or FeatureMatrix.build(features, samples)
    ch = stump_search(fm, weights, samples.labels, workers)
    theta_q = ch.theta_q
    pred = weak_predictions(fm.raw[ch.feature], samples.sigma_n, theta_q, ch.polarity)
    err = float(weights[pred != samples.labels].sum())
    return make_weak(fm.features[ch.feature], theta_q, ch.polarity, FIXED_ONE), err


# ---------------------------------------------------------------------------
# boosting


@dataclass
class BoostRound:
    weak: WeakClassifier
    alpha: float
    beta: float
    error: float
    feature_index: int


@dataclass
class BoostState:
    weights: np.ndarray
    rounds: list[BoostRound] = field(default_factory=list)
    weight_sums: list[float] = field(default_factory=list)
    stopped_early: bool = False


def initial_weights(labels: np.ndarray) -> np.ndarray:
    """``1/(2l)`` for each of ``l`` positives and ``1/(2m)`` for each of ``m`` negatives."""
    labels = np.asarray(labels)
    l = int((labels == 1).sum())
    m = int((labels == 0).sum())
    if l == 0 or m == 0:
        raise ValueError("need at least one positive and one negative sample")
    return np.where(labels == 1, 1.0 / (2 * l), 1.0 / (2 * m))


class Booster:
    """Round-by-round AdaBoost over a fixed feature matrix."""

    def __init__(self, fm: FeatureMatrix, samples: SampleSet, workers: int = 1):
        self.fm = fm
        self.samples = samples
        self.workers = workers
        self.state = BoostState(initial_weights(samples.labels))
        self.scores = np.zeros(len(samples), dtype=np.int64)  # fixed-point stage sums

    def step(self) -> BoostRound:
        st = self.state
        if st.stopped_early:
            raise RuntimeError("boosting already reached zero training error")
        st.weights = st.weights / st.weights.sum()
        st.weight_sums.append(float(st.weights.sum()))
        ch = stump_search(self.fm, st.weights, self.samples.labels, self.workers)
        theta_q = ch.theta_q
        pred = weak_predictions(self.fm.raw[ch.feature], self.samples.sigma_n, theta_q, ch.polarity)
        wrong = pred != self.samples.labels
        eps = float(st.weights[wrong].sum())
        if eps >= 0.5:
            raise NoWeakLearnerError("no weak learner better than chance")
        if eps <= 0.0:
            beta, alpha = 0.0, ALPHA_SENTINEL
            st.stopped_early = True
        else:
            beta = eps / (1.0 - eps)
            alpha = math.log(1.0 / beta)
            st.weights = np.where(wrong, st.weights, st.weights * beta)
        vote = int(round(alpha * FIXED_ONE))
        weak = make_weak(self.fm.features[ch.feature], theta_q, ch.polarity, vote)
        self.scores += pred * vote
        rnd = BoostRound(weak, alpha, beta, eps, ch.feature)
        st.rounds.append(rnd)
        return rnd

    @property
    def default_threshold(self) -> int:
        """``ceil(sum(votes) / 2)``: the integer form of ``sum >= alpha_total / 2``."""
        total = sum(max(r.weak.left_val, r.weak.right_val) for r in self.state.rounds)
        return -(-total // 2)

    def stage(self, threshold: int | None = None) -> Stage:
        thr = self.default_threshold if threshold is None else threshold
        return Stage(tuple(r.weak for r in self.state.rounds), int(thr))


def adaboost_train(samples: SampleSet, features, T: int, fm: FeatureMatrix | None = None,
                   workers: int = 1) -> tuple[Stage, BoostState]:
    """Boost ``T`` rounds (fewer if a round is perfect) into a stage with threshold ``sum(alpha)/2``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    fm = fm or FeatureMatrix.build(features, samples)
    b = Booster(fm, samples, workers)
    for _ in range(T):
        b.step()
        if b.state.stopped_early:
            break
    return b.stage(), b.state


def strong_predictions(stage: Stage, fm: FeatureMatrix, samples: SampleSet, feature_index: Sequence[int]) -> np.ndarray:
    total = np.zeros(len(samples), dtype=np.int64)
    for wc, fi in zip(stage.weak, feature_index):
        below = fm.raw[fi].astype(np.int64) * FIXED_ONE < wc.threshold * samples.sigma_n
        total += np.where(below, wc.left_val, wc.right_val)
    return (total >= stage.threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# cascade


@dataclass(frozen=True)
class StageTargets:
    d_min: float = 0.99
    f_max: float = 0.5
    max_stages: int = 10
    max_weak: int = 200

    def __post_init__(self):
        if not 0 < self.d_min <= 1:
            raise ValueError("d_min must lie in (0, 1]")
        if not 0 < self.f_max < 1:
            raise ValueError("f_max must lie in (0, 1)")
        if self.max_stages < 1 or self.max_weak < 1:
            raise ValueError("max_stages and max_weak must be >= 1")


@dataclass
class StageRecord:
    n_weak: int
    threshold: int
    detection_rate: float
    false_positive_rate: float
    n_pos: int
    n_neg: int


@dataclass
class TrainingResult:
    cascade: Cascade | None
    stages: list[StageRecord]
    warnings: list[str]


def lowered_threshold(pos_scores: np.ndarray, d_min: float, default: int) -> int:
    """Largest threshold (never above ``default``) keeping at least ``d_min`` of positives."""
    n = pos_scores.shape[0]
    k = max(1, math.ceil(d_min * n - 1e-9))
    kth = int(np.sort(pos_scores)[::-1][k - 1])
    return min(default, kth)


NegativeSource = Callable[[Cascade | None, int], SampleSet]


def train_cascade(pos: SampleSet, neg: SampleSet, targets: StageTargets, features,
                  rounds: Sequence[int] | None = None, negative_source: NegativeSource | None = None,
                  workers: int = 1, log: Callable[[str], None] | None = None) -> TrainingResult:
    """Grow stages until the targets are met.

    Each stage boosts one weak classifier at a time, lowers its threshold
    to keep ``d_min`` of the positives that reached it, and stops once its
    false-positive rate on the current negatives is at most ``f_max`` (or
    ``max_weak`` is hit).  ``rounds`` instead fixes every stage's size.
    Only negatives that pass all finished stages train the next stage;
    ``negative_source(cascade, n)`` tops the pool back up when given.
    """
    if not len(pos) or not len(neg):
        raise ValueError("need non-empty positive and negative pools")
    features = list(features)
    n_stages = len(rounds) if rounds is not None else targets.max_stages
    pool_size = len(neg)
    stages: list[Stage] = []
    records: list[StageRecord] = []
    notes: list[str] = []
    cur_pos, cur_neg = pos, neg
    for si in range(n_stages):
        if not len(cur_neg):
            notes.append(f"negative pool empty before stage {si + 1}; stopping")
            break
        both = SampleSet.concat([cur_pos, cur_neg])
        fm = FeatureMatrix.build(features, both)
        b = Booster(fm, both, workers)
        is_pos = both.labels == 1
        budget = rounds[si] if rounds is not None else targets.max_weak
        while True:
            b.step()
            n_weak = len(b.state.rounds)
            thr = lowered_threshold(b.scores[is_pos], targets.d_min, b.default_threshold)
            fpr = float((b.scores[~is_pos] >= thr).mean())
            done = n_weak >= budget or b.state.stopped_early
            if rounds is None and fpr <= targets.f_max:
                done = True
            if done:
                break
        dr = float((b.scores[is_pos] >= thr).mean())
        stages.append(b.stage(thr))
        records.append(StageRecord(n_weak, thr, dr, fpr, len(cur_pos), len(cur_neg)))
        if log:
            log(f"stage {si + 1}: {n_weak} weak, thr {thr}, d {dr:.4f}, f {fpr:.4f}, neg {len(cur_neg)}")
        if rounds is not None and n_weak < budget:
            notes.append(f"stage {si + 1} stopped at {n_weak} weak (zero training error)")
        keep_pos = np.flatnonzero(b.scores[is_pos] >= thr)
        keep_neg = np.flatnonzero(b.scores[~is_pos] >= thr)
        cur_pos = cur_pos.subset(keep_pos)
        cur_neg = cur_neg.subset(keep_neg)
        if negative_source is not None and si + 1 < n_stages and len(cur_neg) < pool_size:
            extra = negative_source(Cascade(tuple(stages)), pool_size - len(cur_neg))
            if len(extra):
                cur_neg = SampleSet.concat([cur_neg, extra])
    if not stages:
        warnings.warn("no stage could be trained")
        return TrainingResult(None, records, notes)
    for n in notes:
        warnings.warn(n)
    return TrainingResult(Cascade(tuple(stages), pos.window[0], pos.window[1]), records, notes)


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class CascadeRates:
    detection_rate: Fraction
    false_positive_rate: Fraction
    per_stage: list[tuple[Fraction, Fraction]]

    @property
    def dr_product(self) -> Fraction:
        return math.prod((d for d, _ in self.per_stage), start=Fraction(1))

    @property
    def fpr_product(self) -> Fraction:
        return math.prod((f for _, f in self.per_stage), start=Fraction(1))


def _conditional(depths: np.ndarray, n_stages: int) -> list[Fraction]:
    out = []
    for s in range(n_stages):
        entered = int((depths >= s).sum())
        passed = int((depths >= s + 1).sum())
        out.append(Fraction(passed, entered) if entered else Fraction(1))
    return out


def cascade_rates(c: Cascade, pos: SampleSet, neg: SampleSet) -> CascadeRates:
    """Measured whole-cascade rates and per-stage rates conditional on reaching the stage."""
    if not len(pos) or not len(neg):
        raise ValueError("need non-empty positive and negative sets")
    n = len(c.stages)
    dp, dn = pos.depths(c), neg.depths(c)
    dr = Fraction(int((dp == n).sum()), len(pos))
    fpr = Fraction(int((dn == n).sum()), len(neg))
    per = list(zip(_conditional(dp, n), _conditional(dn, n)))
    return CascadeRates(dr, fpr, per)


def predicted_rates(per_stage: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Cascade detection and false-positive rates as products of stage rates."""
    dr = math.prod(d for d, _ in per_stage)
    fpr = math.prod(f for _, f in per_stage)
    return dr, fpr
