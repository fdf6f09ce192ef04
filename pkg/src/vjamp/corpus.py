"""Seeded synthetic face corpus.

Faces are drawn procedurally in a unit "window frame" (u, v in [0, 1]) that
maps onto the 24x24 training window: eyebrows, eyes, nose ridge and mouth
on a skin-tone ellipse, with random illumination gradient, pose jitter and
sensor noise.  Scenes are clutter (gradients, boxes, blobs, stripes) with
no faces.  Everything is a pure function of the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import GrayImage, load_image, save_pgm

WINDOW = 24


def _ellipse(u, v, cu, cv, ru, rv, soft=0.08):
    d = np.sqrt(((u - cu) / ru) ** 2 + ((v - cv) / rv) ** 2)
    return np.clip((1.0 + soft - d) / (2 * soft), 0.0, 1.0)


def _box(u, v, u0, u1, v0, v1, soft=0.02):
    a = np.clip((u - u0) / soft + 0.5, 0, 1) * np.clip((u1 - u) / soft + 0.5, 0, 1)
    b = np.clip((v - v0) / soft + 0.5, 0, 1) * np.clip((v1 - v) / soft + 0.5, 0, 1)
    return a * b


@dataclass(frozen=True)
class FaceStyle:
    skin: float
    eye_drop: float
    brow_drop: float
    mouth_drop: float
    nose_gain: float
    hair: float | None
    eye_dy: float
    eye_sep: float
    mouth_w: float
    grad_u: float
    grad_v: float
    noise: float

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "FaceStyle":
        return cls(
            skin=rng.uniform(115, 215),
            eye_drop=rng.uniform(70, 125),
            brow_drop=rng.uniform(35, 85),
            mouth_drop=rng.uniform(45, 95),
            nose_gain=rng.uniform(4, 22),
            hair=rng.uniform(15, 85) if rng.random() < 0.7 else None,
            eye_dy=rng.uniform(-0.025, 0.025),
            eye_sep=rng.uniform(0.17, 0.21),
            mouth_w=rng.uniform(0.13, 0.2),
            grad_u=rng.uniform(-0.25, 0.25),
            grad_v=rng.uniform(-0.15, 0.15),
            noise=rng.uniform(2.0, 6.0),
        )


def face_layers(u, v, st: FaceStyle):
    """Return (intensity, alpha) of a face drawn in window-frame coordinates."""
    skin = st.skin
    img = np.full_like(u, skin)
    if st.hair is not None:
        hair = _ellipse(u, v, 0.5, 0.30, 0.46, 0.34) * (v < 0.17)
        img = img * (1 - hair) + st.hair * hair
    ey = 0.38 + st.eye_dy
    for cu in (0.5 - st.eye_sep, 0.5 + st.eye_sep):
        brow = _box(u, v, cu - 0.11, cu + 0.11, ey - 0.13, ey - 0.085)
        img = img - st.brow_drop * brow
        eye = _ellipse(u, v, cu, ey, 0.085, 0.045, soft=0.25)
        img = img - st.eye_drop * eye
    nose = _box(u, v, 0.45, 0.55, ey + 0.02, 0.62, soft=0.05)
    img = img + st.nose_gain * nose
    for cu in (0.46, 0.54):
        img = img - 0.5 * st.mouth_drop * _ellipse(u, v, cu, 0.645, 0.025, 0.018, soft=0.3)
    mouth = _ellipse(u, v, 0.5, 0.78, st.mouth_w, 0.035, soft=0.3)
    img = img - st.mouth_drop * mouth
    img = img * (1 + st.grad_u * (u - 0.5) * 2 + st.grad_v * (v - 0.5) * 2)
    alpha = _ellipse(u, v, 0.5, 0.52, 0.46, 0.56, soft=0.06)
    return img, alpha


def render_face(canvas: np.ndarray, x0: float, y0: float, size: float, rng: np.random.Generator,
                jitter: bool = True, style: FaceStyle | None = None, supersample: int = 3) -> None:
    """Composite a face whose window frame spans ``size`` pixels at (x0, y0) into ``canvas``."""
    st = style or FaceStyle.sample(rng)
    if jitter:
        sc = rng.uniform(0.9, 1.1)
        du, dv = rng.uniform(-0.04, 0.04, size=2)
        rot = math.radians(rng.uniform(-6, 6))
    else:
        sc, du, dv, rot = 1.0, 0.0, 0.0, 0.0
    h, w = canvas.shape
    xa = max(0, int(math.floor(x0 - 0.2 * size)))
    xb = min(w, int(math.ceil(x0 + 1.2 * size)))
    ya = max(0, int(math.floor(y0 - 0.2 * size)))
    yb = min(h, int(math.ceil(y0 + 1.2 * size)))
    if xa >= xb or ya >= yb:
        return
    ss = supersample
    offs = (np.arange(ss) + 0.5) / ss
    px = (np.arange(xa, xb)[:, None] + offs[None, :]).ravel()
    py = (np.arange(ya, yb)[:, None] + offs[None, :]).ravel()
    X, Y = np.meshgrid(px, py)
    # window frame -> pixel: centre at the window centre, scaled and rotated
    cx, cy = x0 + size * (0.5 + du), y0 + size * (0.5 + dv)
    dx, dy = (X - cx) / (size * sc), (Y - cy) / (size * sc)
    cr, sr = math.cos(rot), math.sin(rot)
    u = 0.5 + cr * dx + sr * dy
    v = 0.5 - sr * dx + cr * dy
    inten, alpha = face_layers(u, v, st)
    inten = inten.reshape(yb - ya, ss, xb - xa, ss).mean(axis=(1, 3))
    alpha = alpha.reshape(yb - ya, ss, xb - xa, ss).mean(axis=(1, 3))
    inten = inten + rng.normal(0, st.noise, inten.shape)
    region = canvas[ya:yb, xa:xb]
    canvas[ya:yb, xa:xb] = region * (1 - alpha) + inten * alpha


def render_scene(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """Face-free clutter as a float array (not yet clipped)."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    base = rng.uniform(40, 200)
    img = base + rng.uniform(-0.6, 0.6) * (xx - width / 2) + rng.uniform(-0.6, 0.6) * (yy - height / 2)
    area = width * height
    for _ in range(rng.integers(3, 8 + area // 2500)):
        kind = rng.random()
        val = rng.uniform(0, 255)
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        if kind < 0.45:
            bw, bh = rng.uniform(4, width / 2), rng.uniform(4, height / 2)
            m = (np.abs(xx - cx) < bw / 2) & (np.abs(yy - cy) < bh / 2)
            img[m] = img[m] * 0.3 + val * 0.7
        elif kind < 0.75:
            rx, ry = rng.uniform(3, width / 4), rng.uniform(3, height / 4)
            m = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 < 1
            img[m] = val
        elif kind < 0.9:
            th = rng.uniform(0, math.pi)
            period = rng.uniform(4, 30)
            amp = rng.uniform(10, 50)
            r = rng.uniform(10, max(12, min(width, height) / 2))
            m = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
            img[m] += amp * np.sin(2 * math.pi * (xx[m] * math.cos(th) + yy[m] * math.sin(th)) / period)
        else:
            th = rng.uniform(0, math.pi)
            d = (xx - cx) * math.sin(th) - (yy - cy) * math.cos(th)
            m = np.abs(d) < rng.uniform(1, 4)
            img[m] = val
    img += rng.normal(0, rng.uniform(2, 8), img.shape)
    return img


def to_gray(arr: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(np.rint(arr), 0, 255).astype(np.uint8))


def face_window(rng: np.random.Generator) -> GrayImage:
    """A 24x24 positive: a jittered face over a scene patch."""
    pad = 4
    canvas = render_scene(WINDOW + 2 * pad, WINDOW + 2 * pad, rng)
    render_face(canvas, pad, pad, WINDOW, rng)
    return to_gray(canvas[pad : pad + WINDOW, pad : pad + WINDOW])


def scene_window(rng: np.random.Generator) -> GrayImage:
    """A 24x24 negative cropped (at a random scale) from a face-free scene."""
    side = int(rng.integers(WINDOW, 4 * WINDOW))
    canvas = to_gray(render_scene(side, side, rng))
    if side == WINDOW:
        return canvas
    idx = (np.arange(WINDOW) * side) // WINDOW
    return GrayImage(canvas.pixels[np.ix_(idx, idx)])


@dataclass(frozen=True)
class LabeledImage:
    path: str
    boxes: tuple[tuple[int, int, int, int], ...]


def detection_image(width: int, height: int, n_faces: int, rng: np.random.Generator,
                    min_size: int = 30, max_size: int = 72):
    """A scene with ``n_faces`` non-overlapping faces; returns (image, boxes)."""
    canvas = render_scene(width, height, rng)
    boxes: list[tuple[int, int, int, int]] = []
    tries = 0
    while len(boxes) < n_faces and tries < 200:
        tries += 1
        size = int(rng.integers(min_size, min(max_size, width, height) + 1))
        x = int(rng.integers(0, width - size + 1))
        y = int(rng.integers(0, height - size + 1))
        if any(x < bx + bw and bx < x + size and y < by + bh and by < y + size for bx, by, bw, bh in boxes):
            continue
        render_face(canvas, x, y, size, rng, jitter=False)
        boxes.append((x, y, size, size))
    return to_gray(canvas), tuple(boxes)


# ---------------------------------------------------------------------------
# manifests


def read_manifest(path) -> list[LabeledImage]:
    """Parse ``path n_faces x y w h [x y w h ...]`` lines; paths are relative to the manifest."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            try:
                n = int(toks[1])
                nums = [int(t) for t in toks[2:]]
            except (IndexError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed manifest line") from None
            if len(nums) != 4 * n:
                raise ValueError(f"{path}:{lineno}: expected {4 * n} box numbers, found {len(nums)}")
            boxes = tuple(tuple(nums[4 * i : 4 * i + 4]) for i in range(n))
            out.append(LabeledImage(str(path.parent / toks[0]), boxes))
    return out


def write_manifest(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rel, boxes in entries:
            nums = " ".join(f"{x} {y} {w} {h}" for x, y, w, h in boxes)
            fh.write(f"{rel} {len(boxes)} {nums}".rstrip() + "\n")


def read_training_manifest(path) -> list[tuple[str, int]]:
    """Parse ``file label`` lines of a training corpus manifest."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != 2 or toks[1] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: expected '<file> <0|1>'")
            out.append((str(path.parent / toks[0]), int(toks[1])))
    return out


def load_training_corpus(root) -> tuple[list[GrayImage], list[GrayImage]]:
    """Load positives and negatives listed in ``root/manifest.txt``."""
    pos, neg = [], []
    for p, label in read_training_manifest(Path(root) / "manifest.txt"):
        (pos if label == 1 else neg).append(load_image(p))
    return pos, neg


def write_training_corpus(root, n_pos: int, n_neg: int, seed: int) -> None:
    root = Path(root)
    (root / "pos").mkdir(parents=True, exist_ok=True)
    (root / "neg").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_pos):
        save_pgm(face_window(rng), root / "pos" / f"face_{i:04d}.pgm")
        lines.append(f"pos/face_{i:04d}.pgm 1")
    for i in range(n_neg):
        save_pgm(scene_window(rng), root / "neg" / f"bg_{i:04d}.pgm")
        lines.append(f"neg/bg_{i:04d}.pgm 0")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_detection_corpus(root, n_images: int, seed: int, width: int = 192, height: int = 144) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_images):
        img, boxes = detection_image(width, height, 1, rng)
        name = f"img_{i:03d}.pgm"
        save_pgm(img, root / name)
        entries.append((name, boxes))
    write_manifest(root / "manifest.txt", entries)
