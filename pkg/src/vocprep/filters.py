"""Spatial denoising/sharpening filters, Haar-DWT upscaling and noise models.

All neighborhoods use replicate-clamp edges. Noise draws come from numpy's
Philox4x64-10 counter-based generator so that a given seed produces the same
bytes on every platform; see ``noise_generator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvenKernel, InvalidVarianceBand, NegativeNoiseVar, OddDimensions
from .imagecore import ImageBuffer, require_gray, resize_bilinear, to_u8

WIENER_EPS = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "gaussian" | "impulse"
    sigma: float = 0.0
    p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "impulse"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or not 0 <= self.p <= 1:
            raise ValueError("sigma must be >= 0 and p within [0, 1]")

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        if self.kind == "gaussian":
            return add_gaussian(image, self.sigma, self.seed)
        return add_impulse(image, self.p, self.seed)


def _check_kernel(k: int, minimum: int = 1) -> None:
    if k < minimum or k % 2 == 0:
        raise EvenKernel(f"kernel size must be odd and >= {minimum}, got {k}")


def _windows(px: np.ndarray, k: int) -> np.ndarray:
    """(h, w, k*k) view of the edge-replicated k x k neighborhoods."""
    padded = np.pad(px, k // 2, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return win.reshape(px.shape[0], px.shape[1], k * k)


def _local_moments(px: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    win = _windows(px.astype(np.float64), k)
    mean = win.mean(axis=2)
    var = win.var(axis=2)
    return mean, var


def box_filter(image: ImageBuffer, k: int) -> ImageBuffer:
    _check_kernel(k)
    px = require_gray(image, "box_filter")
    sums = _windows(px.astype(np.int64), k).sum(axis=2)
    # k*k is odd, so an exact .5 tie cannot occur
    return ImageBuffer((2 * sums + k * k) // (2 * k * k))


def median_filter(image: ImageBuffer, k: int) -> ImageBuffer:
    _check_kernel(k)
    px = require_gray(image, "median_filter")
    if k == 1:
        return image
    win = _windows(px, k)
    return ImageBuffer(np.partition(win, k * k // 2, axis=2)[:, :, k * k // 2])


def wiener_filter(image: ImageBuffer, k: int = 5, noise_var: float | None = None) -> ImageBuffer:
    """Locally adaptive (Lee-style) Wiener filter.

    Shrinks each pixel toward its local mean by ``max(var - noise, 0) / var``.
    When ``noise_var`` is omitted it is estimated as the mean local variance.
    """
    _check_kernel(k, minimum=3)
    if noise_var is not None and noise_var < 0:
        raise NegativeNoiseVar(f"noise variance must be >= 0, got {noise_var}")
    px = require_gray(image, "wiener_filter").astype(np.float64)
    mean, var = _local_moments(px, k)
    nu2 = float(var.mean()) if noise_var is None else float(noise_var)
    gain = np.maximum(var - nu2, 0.0) / np.maximum(var, WIENER_EPS)
    return ImageBuffer(to_u8(mean + gain * (px - mean)))


def unsharp_adaptive(
    image: ImageBuffer, k: int = 3, gain_high: float = 1.0, var_lo: float = 25.0, var_hi: float = 400.0
) -> ImageBuffer:
    """Unsharp masking gated by local variance.

    Smooth regions (variance <= ``var_lo``) are left alone, busy regions
    (>= ``var_hi``) get the full ``gain_high``, with a linear ramp between.
    """
    _check_kernel(k)
    if not (0 <= var_lo < var_hi) or gain_high < 0:
        raise InvalidVarianceBand(f"need 0 <= var_lo < var_hi and gain_high >= 0, got {var_lo}, {var_hi}, {gain_high}")
    px = require_gray(image, "unsharp_adaptive").astype(np.int64)
    mask = px - box_filter(image, k).pixels.astype(np.int64)
    _, var = _local_moments(px, k)
    gain = gain_high * np.clip((var - var_lo) / (var_hi - var_lo), 0.0, 1.0)
    return ImageBuffer(to_u8(px + gain * mask))


# -- Haar DWT -----------------------------------------------------------------

def haar_forward(x: np.ndarray):
    """One-level 2-D Haar analysis with ``LL = (a + b + c + d) / 2``.

    ``a b / c d`` are the top-left, top-right, bottom-left and bottom-right
    pixels of each 2x2 block. Returns ``(LL, HL, LH, HH)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] % 2 or x.shape[1] % 2:
        raise OddDimensions(f"Haar transform needs even dimensions, got {x.shape}")
    a, b = x[0::2, 0::2], x[0::2, 1::2]
    c, d = x[1::2, 0::2], x[1::2, 1::2]
    ll = (a + b + c + d) / 2
    hl = (a - b + c - d) / 2
    lh = (a + b - c - d) / 2
    hh = (a - b - c + d) / 2
    return ll, hl, lh, hh


def haar_inverse(ll, hl, lh, hh) -> np.ndarray:
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w), dtype=np.float64)
    out[0::2, 0::2] = (ll + hl + lh + hh) / 2
    out[0::2, 1::2] = (ll - hl + lh - hh) / 2
    out[1::2, 0::2] = (ll + hl - lh - hh) / 2
    out[1::2, 1::2] = (ll - hl - lh + hh) / 2
    return out


def dwt_upscale(image: ImageBuffer) -> ImageBuffer:
    """2x upscaling: bilinear estimate whose Haar LL band is replaced by the input."""
    px = require_gray(image, "dwt_upscale")
    if image.width < 2 or image.height < 2 or image.width % 2 or image.height % 2:
        raise OddDimensions(f"dwt_upscale needs even dimensions >= 2, got {image.width}x{image.height}")
    estimate = resize_bilinear(image, 2 * image.width, 2 * image.height)
    _, hl, lh, hh = haar_forward(estimate.pixels)
    ll = 2.0 * px.astype(np.float64)
    return ImageBuffer(to_u8(haar_inverse(ll, hl, lh, hh)))


# -- noise injection ----------------------------------------------------------

def noise_generator(seed: int) -> np.random.Generator:
    """Philox4x64-10 generator keyed by the low 64 bits of ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def gaussian_draws(n: int, seed: int) -> np.ndarray:
    """``n`` standard normals via Box-Muller over consecutive uniform pairs.

    Pair ``i`` consumes uniforms ``2i`` and ``2i + 1`` and yields draw ``2i``
    (cosine branch) and ``2i + 1`` (sine branch).
    """
    pairs = (n + 1) // 2
    u = noise_generator(seed).random(2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(theta)
    z[1::2] = radius * np.sin(theta)
    return z[:n]


def add_gaussian(image: ImageBuffer, sigma: float, seed: int) -> ImageBuffer:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return image
    px = image.pixels.astype(np.float64)
    noise = sigma * gaussian_draws(px.size, seed).reshape(px.shape)
    return ImageBuffer(to_u8(px + noise))


def add_impulse(image: ImageBuffer, p: float, seed: int) -> ImageBuffer:
    """Salt-and-pepper noise: each pixel hit with probability ``p``."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    px = image.pixels
    u = noise_generator(seed).random(2 * px.size)
    hit = (u[0::2] < p).reshape(px.shape)
    salt = (u[1::2] < 0.5).reshape(px.shape)
    out = px.copy()
    out[hit] = np.where(salt[hit], 255, 0)
    return ImageBuffer(out)
