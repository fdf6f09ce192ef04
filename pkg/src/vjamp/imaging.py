"""Grayscale images, netpbm I/O, integral images and the downscaling pyramid.

Arrays are indexed ``[row, col]``, i.e. ``[y, x]``; public functions take
``(x, y)`` coordinates like the detector code that calls them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Raised when a netpbm file cannot be decoded."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class BoundsError(IndexError):
    """A rectangle or window does not fit inside the image."""


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rectangle extent must be >= 1, got {self.w}x{self.h}")

    def shifted(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    @property
    def area(self) -> int:
        return self.w * self.h


class GrayImage:
    """An immutable 8-bit grayscale raster."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @classmethod
    def blank(cls, width: int, height: int, value: int = 0) -> "GrayImage":
        return cls(np.full((height, width), value, dtype=np.uint8))

    def crop(self, x: int, y: int, w: int, h: int) -> "GrayImage":
        if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
            raise BoundsError(f"crop ({x},{y},{w},{h}) outside {self.width}x{self.height}")
        return GrayImage(self.pixels[y : y + h, x : x + w])

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class IntegralPair:
    """Plain and squared integral images of a :class:`GrayImage`.

    ``ii[y, x]`` holds the sum of all pixels above and to the left of
    ``(x, y)``, inclusive; ``sq_ii`` the same for squared intensities.
    Both are stored zero-padded by one row and column (``padded`` and
    ``sq_padded``) so that rectangle sums never need edge cases.
    """

    __slots__ = ("padded", "sq_padded")

    def __init__(self, padded: np.ndarray, sq_padded: np.ndarray):
        padded.setflags(write=False)
        sq_padded.setflags(write=False)
        object.__setattr__(self, "padded", padded)
        object.__setattr__(self, "sq_padded", sq_padded)

    def __setattr__(self, name, value):
        raise AttributeError("IntegralPair is immutable")

    @property
    def width(self) -> int:
        return self.padded.shape[1] - 1

    @property
    def height(self) -> int:
        return self.padded.shape[0] - 1

    @property
    def ii(self) -> np.ndarray:
        return self.padded[1:, 1:]

    @property
    def sq_ii(self) -> np.ndarray:
        return self.sq_padded[1:, 1:]

    @property
    def integral_value(self) -> int:
        """Sum of every pixel, the bottom-right entry of ``ii``."""
        return int(self.padded[-1, -1])


# ---------------------------------------------------------------------------
# netpbm


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def decode_netpbm(data: bytes) -> GrayImage:
    """Decode a binary P5/P6 byte string (maxval 255) to grayscale."""
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic[:2]!r}", field="magic")
    header = {}
    for name in ("width", "height", "maxval"):
        tok, pos = _read_token(data, pos)
        if not tok:
            raise ImageFormatError(f"truncated header: missing {name}", field=name)
        try:
            header[name] = int(tok)
        except ValueError:
            raise ImageFormatError(f"bad {name} {tok!r}", field=name) from None
    if header["width"] < 1 or header["height"] < 1:
        bad = "width" if header["width"] < 1 else "height"
        raise ImageFormatError(f"{bad} must be >= 1", field=bad)
    if header["maxval"] != 255:
        raise ImageFormatError(f"maxval must be 255, got {header['maxval']}", field="maxval")
    pos += 1  # single whitespace byte after maxval
    w, h = header["width"], header["height"]
    channels = 1 if magic == b"P5" else 3
    need = w * h * channels
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise ImageFormatError(
            f"truncated payload: expected {need} bytes, got {len(payload)}", field="payload"
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return GrayImage(raw.reshape(h, w))
    rgb = raw.reshape(h, w, 3).astype(np.int64)
    # integer Rec.601 luma, rounded half up
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return GrayImage(np.clip(luma, 0, 255).astype(np.uint8))


def load_image(path) -> GrayImage:
    return decode_netpbm(Path(path).read_bytes())


def encode_pgm(img: GrayImage) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def save_pgm(img: GrayImage, path) -> None:
    Path(path).write_bytes(encode_pgm(img))


def save_ppm(rgb: np.ndarray, path) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes())


# ---------------------------------------------------------------------------
# integral images


def compute_integrals(img: GrayImage) -> IntegralPair:
    """Plain and squared integral images in one pass over the pixels.

    Uses the running-row recurrence ``s(x, y) = s(x-1, y) + p(x, y)`` and
    ``ii(x, y) = ii(x, y-1) + s(x, y)``, vectorised across columns.
    """
    px = img.pixels.astype(np.int64)
    h, w = px.shape
    pad = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    row = np.cumsum(px, axis=1)
    row_sq = np.cumsum(px * px, axis=1)
    for y in range(h):
        pad[y + 1, 1:] = pad[y, 1:] + row[y]
        sq[y + 1, 1:] = sq[y, 1:] + row_sq[y]
    return IntegralPair(pad, sq)


def rect_sum(ip: IntegralPair, r: Rect, use_squared: bool = False) -> int:
    """Sum of the pixels (or squared pixels) inside ``r`` with four lookups."""
    if r.x < 0 or r.y < 0 or r.x + r.w > ip.width or r.y + r.h > ip.height:
        raise BoundsError(
            f"rect (x={r.x}, y={r.y}, w={r.w}, h={r.h}) outside {ip.width}x{ip.height} image"
        )
    t = ip.sq_padded if use_squared else ip.padded
    x0, y0, x1, y1 = r.x, r.y, r.x + r.w, r.y + r.h
    return int(t[y1, x1]) + int(t[y0, x0]) - int(t[y0, x1]) - int(t[y1, x0])


def window_stddev(ip: IntegralPair, origin: tuple[int, int], w: int, h: int) -> int:
    """Scaled deviation ``isqrt(N*sum(x^2) - sum(x)^2)`` of a window.

    With ``N = w*h`` this equals ``floor(N * sigma)`` for the population
    standard deviation ``sigma`` of the window's pixels.
    """
    r = Rect(origin[0], origin[1], w, h)
    s = rect_sum(ip, r)
    s2 = rect_sum(ip, r, use_squared=True)
    return math.isqrt(max(0, r.area * s2 - s * s))


# ---------------------------------------------------------------------------
# pyramid


def downscale_nearest(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Nearest-neighbour resampling; output (i, j) samples source (i*W//out_w, j*H//out_h)."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {out_w}x{out_h}")
    if out_w > img.width or out_h > img.height:
        raise ValueError(
            f"target {out_w}x{out_h} larger than source {img.width}x{img.height}"
        )
    cols = (np.arange(out_w) * img.width) // out_w
    rows = (np.arange(out_h) * img.height) // out_h
    return GrayImage(img.pixels[np.ix_(rows, cols)])


def pyramid_dims(width: int, height: int, scale_factor: float, min_w: int = 24, min_h: int = 24):
    """Yield ``(level, w, h, absolute_scale)`` for every pyramid level."""
    if scale_factor <= 1:
        raise ValueError("scale_factor must be > 1")
    k = 0
    while True:
        s = scale_factor**k
        # tolerance keeps exact ratios such as 48/1.2 from flooring to 39
        lw = math.floor(width / s + 1e-9)
        lh = math.floor(height / s + 1e-9)
        if lw < min_w or lh < min_h:
            return
        yield k, lw, lh, s
        k += 1


def build_pyramid(
    img: GrayImage, scale_factor: float, min_w: int = 24, min_h: int = 24
) -> list[tuple[GrayImage, float]]:
    levels = []
    for k, lw, lh, s in pyramid_dims(img.width, img.height, scale_factor, min_w, min_h):
        levels.append((img if k == 0 else downscale_nearest(img, lw, lh), s))
    return levels
