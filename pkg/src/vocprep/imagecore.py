"""8-bit raster type, binary PGM/PPM I/O, grayscale conversion and resizing."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedHeader, TruncatedPayload, UnsupportedMaxval, WrongChannelCount

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def round_half_away(x):
    """Round half away from zero. Works on scalars and arrays."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))


def div_round(num, den):
    """Exact half-away rounding of ``num / den`` for non-negative integers."""
    num = np.asarray(num, dtype=np.int64)
    den = np.asarray(den, dtype=np.int64)
    return (2 * num + den) // (2 * den)


def to_u8(x) -> np.ndarray:
    """Round half away from zero and clamp to [0, 255]."""
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Immutable 8-bit image.

    ``pixels`` has shape ``(height, width)`` for gray images and
    ``(height, width, 3)`` for RGB. The array is made read-only on
    construction.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if not (arr.ndim == 2 or (arr.ndim == 3 and arr.shape[2] == 3)):
            raise WrongChannelCount(f"unsupported pixel array shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        arr = np.ascontiguousarray(arr).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, channels: int, data) -> ImageBuffer:
        arr = np.asarray(data, dtype=np.int64)
        if arr.size != width * height * channels:
            raise ValueError("pixel count does not match width * height * channels")
        shape = (height, width) if channels == 1 else (height, width, channels)
        return cls(arr.reshape(shape))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def is_gray(self) -> bool:
        return self.pixels.ndim == 2

    def flat(self) -> list[int]:
        return self.pixels.reshape(-1).tolist()

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"ImageBuffer({self.width}x{self.height}x{self.channels})"


def require_gray(image: ImageBuffer, what: str = "operation") -> np.ndarray:
    if not image.is_gray:
        raise WrongChannelCount(f"{what} requires a grayscale image, got {image.channels} channels")
    return image.pixels


def _header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and comment lines
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise MalformedHeader("unterminated header comment")
            pos = nl + 1
            continue
        break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of header")
    return data[start:pos], pos


def read_image(data: bytes) -> ImageBuffer:
    """Decode a binary PGM (P5) or PPM (P6) with maxval 255."""
    if len(data) < 2:
        raise MalformedHeader("file too short for a netpbm header")
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MalformedHeader(f"bad magic {magic!r}; expected P5 or P6")
    pos = 2
    if pos < len(data) and not (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
        raise MalformedHeader("magic must be followed by whitespace")
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _header_token(data, pos)
        if not tok.isdigit():
            raise MalformedHeader(f"non-numeric {name} {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} is not supported (only 255)")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise TruncatedPayload("missing whitespace after maxval")
    pos += 1
    need = width * height * channels
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, found {len(payload)}")
    if len(data) > pos + need:
        raise TruncatedPayload(f"{len(data) - pos - need} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return ImageBuffer(arr.reshape(shape))


def write_image(image: ImageBuffer) -> bytes:
    magic = b"P5" if image.is_gray else b"P6"
    header = magic + b"\n%d %d\n255\n" % (image.width, image.height)
    return header + image.pixels.tobytes()


def load(path) -> ImageBuffer:
    return read_image(Path(path).read_bytes())


def save(path, image: ImageBuffer) -> None:
    Path(path).write_bytes(write_image(image))


def rgb_to_gray(image: ImageBuffer) -> ImageBuffer:
    if image.is_gray:
        raise WrongChannelCount("rgb_to_gray requires a 3-channel image")
    rgb = image.pixels.astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    y = r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2]
    return ImageBuffer(to_u8(y))


def _axis_coords(n_in: int, n_out: int):
    i = np.arange(n_out, dtype=np.float64)
    src = (i + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(image: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    """Bilinear resize with pixel-center alignment and edge clamping."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be at least 1")
    if (out_w, out_h) == (image.width, image.height):
        return image
    src = image.pixels.astype(np.float64)
    x0, x1, fx = _axis_coords(image.width, out_w)
    y0, y1, fy = _axis_coords(image.height, out_h)
    if src.ndim == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
    else:
        fx = fx[None, :]
        fy = fy[:, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return ImageBuffer(to_u8(out))
