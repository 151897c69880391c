"""Point transforms and histogram-based enhancement.

Every operation reduces to a 256-entry lookup table over gray levels. The
histogram-family operations return the table alongside the image so callers
can inspect the mapping directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptyReference,
    EvenWindow,
    InvalidControlPoints,
    InvalidRange,
    NonPositiveGain,
    NonPositiveParam,
)
from .imagecore import ImageBuffer, div_round, require_gray, round_half_away

LEVELS = 256
LEVEL_VALUES = np.arange(LEVELS, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class IntensityMap:
    lut: np.ndarray

    def __post_init__(self):
        lut = np.asarray(self.lut)
        if lut.shape != (LEVELS,):
            raise ValueError("an intensity map needs exactly 256 entries")
        if lut.min() < 0 or lut.max() > 255:
            raise ValueError("intensity map outputs must lie in [0, 255]")
        lut = lut.astype(np.uint8)
        lut.flags.writeable = False
        object.__setattr__(self, "lut", lut)

    def __call__(self, image: ImageBuffer) -> ImageBuffer:
        return ImageBuffer(self.lut[require_gray(image)])

    def __eq__(self, other):
        return isinstance(other, IntensityMap) and np.array_equal(self.lut, other.lut)

    def __getitem__(self, r):
        return int(self.lut[r])

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.lut.astype(np.int64)) >= 0))


@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (LEVELS,) or counts.min() < 0:
            raise ValueError("a histogram needs 256 non-negative counts")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    def __eq__(self, other):
        return isinstance(other, Histogram) and np.array_equal(self.counts, other.counts)


def _apply_lut(image: ImageBuffer, lut) -> ImageBuffer:
    return IntensityMap(lut)(image)


def _clamp_lut(values) -> np.ndarray:
    return np.clip(round_half_away(values), 0, 255).astype(np.int64)


# -- point operations ---------------------------------------------------------

def negative(image: ImageBuffer) -> ImageBuffer:
    return _apply_lut(image, 255 - LEVEL_VALUES)


def threshold(image: ImageBuffer, T: int) -> ImageBuffer:
    if not 0 <= T <= 255:
        raise InvalidRange(f"threshold {T} outside [0, 255]")
    return _apply_lut(image, np.where(LEVEL_VALUES >= T, 255, 0))


DEFAULT_LOG_GAIN = 255.0 / math.log(256.0)


def log_transform(image: ImageBuffer, c: float = DEFAULT_LOG_GAIN) -> ImageBuffer:
    if not c > 0:
        raise NonPositiveGain(f"log gain must be positive, got {c}")
    return _apply_lut(image, _clamp_lut(c * np.log1p(LEVEL_VALUES)))


def gamma_transform(image: ImageBuffer, gamma: float, c: float = 1.0) -> ImageBuffer:
    if not (gamma > 0 and c > 0):
        raise NonPositiveParam(f"gamma and gain must be positive, got gamma={gamma}, c={c}")
    return _apply_lut(image, _clamp_lut(255.0 * c * (LEVEL_VALUES / 255.0) ** gamma))


def piecewise_lut(r1: int, s1: int, r2: int, s2: int) -> np.ndarray:
    if not (0 <= r1 <= r2 <= 255 and 0 <= s1 <= s2 <= 255):
        raise InvalidControlPoints(f"control points ({r1},{s1}), ({r2},{s2}) are not ordered within [0, 255]")
    lut = np.empty(LEVELS, dtype=np.int64)
    for r in range(LEVELS):
        # exact rational evaluation, rounded half away from zero
        if r <= r1:
            lut[r] = s1 if r1 == 0 else div_round(s1 * r, r1)
        elif r <= r2:
            lut[r] = s1 + div_round((s2 - s1) * (r - r1), r2 - r1)
        else:
            lut[r] = s2 + div_round((255 - s2) * (r - r2), 255 - r2)
    return lut


def piecewise_stretch(image: ImageBuffer, p1: tuple[int, int], p2: tuple[int, int]) -> ImageBuffer:
    return _apply_lut(image, piecewise_lut(p1[0], p1[1], p2[0], p2[1]))


def gray_level_slice(image: ImageBuffer, A: int, B: int, mode: str = "preserve") -> ImageBuffer:
    if not 0 <= A <= B <= 255:
        raise InvalidRange(f"slice range [{A}, {B}] invalid")
    if mode not in ("preserve", "binary"):
        raise InvalidRange(f"unknown slice mode {mode!r}")
    inside = (LEVEL_VALUES >= A) & (LEVEL_VALUES <= B)
    outside = LEVEL_VALUES if mode == "preserve" else 0
    return _apply_lut(image, np.where(inside, 255, outside))


# -- histogram family ---------------------------------------------------------

def compute_histogram(image: ImageBuffer) -> Histogram:
    return Histogram(np.bincount(require_gray(image).ravel(), minlength=LEVELS))


def equalization_lut(hist: Histogram) -> np.ndarray:
    return div_round(255 * hist.cumulative(), hist.total)


def equalize(image: ImageBuffer) -> tuple[ImageBuffer, IntensityMap]:
    lut = IntensityMap(equalization_lut(compute_histogram(image)))
    return lut(image), lut


def matching_lut(source: Histogram, reference: Histogram) -> np.ndarray:
    if reference.total <= 0:
        raise EmptyReference("reference histogram is empty")
    cum_src = source.cumulative()
    cum_ref = reference.cumulative()
    # CDF_ref(z) >= CDF_src(r)  <=>  cum_ref[z] * total_src >= cum_src[r] * total_ref
    lhs = cum_ref * source.total
    rhs = cum_src * reference.total
    return np.searchsorted(lhs, rhs, side="left")


def match_histogram(image: ImageBuffer, reference: Histogram) -> ImageBuffer:
    lut = matching_lut(compute_histogram(image), reference)
    return _apply_lut(image, lut)


def local_equalize(image: ImageBuffer, window: int) -> ImageBuffer:
    """Per-pixel equalization over a ``window`` x ``window`` neighborhood.

    Only the center pixel is remapped, with the lookup table of its own
    (edge-replicated) neighborhood: ``round(255 * #{v <= center} / W**2)``.
    """
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be a positive odd integer, got {window}")
    px = require_gray(image).astype(np.int64)
    half = window // 2
    padded = np.pad(px, half, mode="edge")
    below = np.zeros_like(px)
    h, w = px.shape
    for dy in range(window):
        for dx in range(window):
            below += padded[dy : dy + h, dx : dx + w] <= px
    return ImageBuffer(div_round(255 * below, window * window))


# -- MMSICHE ------------------------------------------------------------------

@dataclass(frozen=True)
class MmsicheDecomposition:
    median_xm: int
    plateau_tc: int
    lower_mean_xml: int
    upper_mean_xmu: int
    clipped_hist: Histogram
    sub_ranges: tuple[tuple[int, int], ...]
    lut: IntensityMap | None = None


def _weighted_mean_level(counts: np.ndarray, lo: int, hi: int) -> int | None:
    part = counts[lo : hi + 1]
    total = int(part.sum())
    if total == 0:
        return None
    moment = int((part * LEVEL_VALUES[lo : hi + 1]).sum())
    return int(div_round(moment, total))


def mmsiche_decompose(hist: Histogram) -> MmsicheDecomposition:
    counts = hist.counts
    total = hist.total
    if total == 0:
        raise ValueError("cannot decompose an empty histogram")
    cum = hist.cumulative()
    xm = int(np.argmax(2 * cum >= total))

    occupied = np.sort(counts[counts > 0])
    tc = int(occupied[(len(occupied) - 1) // 2])
    clipped = np.minimum(counts, tc)

    xml = _weighted_mean_level(clipped, 0, xm)
    xmu = _weighted_mean_level(clipped, xm + 1, 255) if xm < 255 else None
    if xmu is None:
        # nothing above the median: the upper half is one empty range
        xmu = 255
    ranges = ((0, xml), (xml + 1, xm), (xm + 1, xmu), (xmu + 1, 255))
    return MmsicheDecomposition(xm, tc, xml, xmu, Histogram(clipped), ranges)


def mmsiche_lut(decomp: MmsicheDecomposition) -> np.ndarray:
    clipped = decomp.clipped_hist.counts
    lut = LEVEL_VALUES.copy()
    for a, b in decomp.sub_ranges:
        if a >= b:
            continue
        sub = clipped[a : b + 1]
        sub_total = int(sub.sum())
        if sub_total == 0:
            continue
        lut[a : b + 1] = a + div_round((b - a) * np.cumsum(sub), sub_total)
    return lut


def mmsiche(image: ImageBuffer) -> tuple[ImageBuffer, MmsicheDecomposition]:
    """Median-mean sub-image-clipped histogram equalization.

    The histogram is clipped at the median of its occupied-bin counts, split
    at the median intensity and again at the clipped means of both halves,
    and each of the four ranges is equalized into itself.
    """
    decomp = mmsiche_decompose(compute_histogram(image))
    lut = IntensityMap(mmsiche_lut(decomp))
    return lut(image), replace(decomp, lut=lut)
