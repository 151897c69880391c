"""Seeded synthetic VOC-style corpora for tests, demos and sanity experiments."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import imagecore
from .imagecore import ImageBuffer, to_u8

SHAPE_CLASSES = ("bar", "blob", "ring")


def annotation_xml(filename: str, width: int, height: int, objects) -> str:
    """VOC-2007-style annotation text for ``objects`` = [(name, (xmin, ymin, xmax, ymax)), ...]."""
    parts = [
        "<annotation>",
        "\t<folder>VOC2007</folder>",
        f"\t<filename>{filename}</filename>",
        "\t<source>",
        "\t\t<database>synthetic</database>",
        "\t</source>",
        "\t<size>",
        f"\t\t<width>{width}</width>",
        f"\t\t<height>{height}</height>",
        "\t\t<depth>1</depth>",
        "\t</size>",
        "\t<segmented>0</segmented>",
    ]
    for name, (x0, y0, x1, y1) in objects:
        parts += [
            "\t<object>",
            f"\t\t<name>{name}</name>",
            "\t\t<pose>Unspecified</pose>",
            "\t\t<truncated>0</truncated>",
            "\t\t<difficult>0</difficult>",
            "\t\t<bndbox>",
            f"\t\t\t<xmin>{x0}</xmin>",
            f"\t\t\t<ymin>{y0}</ymin>",
            f"\t\t\t<xmax>{x1}</xmax>",
            f"\t\t\t<ymax>{y1}</ymax>",
            "\t\t</bndbox>",
            "\t</object>",
        ]
    parts.append("</annotation>")
    return "\n".join(parts) + "\n"


def _shape_mask(
    kind: str, size: int, rng: np.random.Generator, jitter: float = 0.15
) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0.5 - jitter, 0.5 + jitter, size=2) * size
    r = rng.uniform(0.22, 0.3) * size
    if kind == "bar":
        mask = (np.abs(yy - cy) < r * 0.35) & (np.abs(xx - cx) < r)
    elif kind == "blob":
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
    elif kind == "ring":
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        mask = (d2 < r * r) & (d2 > (0.55 * r) ** 2)
    else:
        raise ValueError(f"unknown shape {kind!r}")
    ys, xs = np.nonzero(mask)
    box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    return mask.astype(np.float64), box


def shape_image(
    kind: str,
    size: int,
    rng: np.random.Generator,
    contrast: float = 0.35,
    noise: float = 0.08,
    background: tuple[float, float] = (0.25, 0.6),
    jitter: float = 0.15,
):
    """Clean shape-on-background image with intensities in [0, 1]."""
    background = rng.uniform(*background)
    mask, box = _shape_mask(kind, size, rng, jitter)
    base = background + contrast * mask + noise * rng.standard_normal((size, size))
    return np.clip(base, 0.0, 1.0), box


def darken(unit: np.ndarray, gamma: float) -> np.ndarray:
    return unit**gamma


def write_corpus(root, images, annotations) -> tuple[Path, Path]:
    """Write ``JPEGImages``-style PGM files and ``Annotations`` XML under ``root``."""
    root = Path(root)
    img_dir, ann_dir = root / "images", root / "annotations"
    img_dir.mkdir(parents=True, exist_ok=True)
    ann_dir.mkdir(parents=True, exist_ok=True)
    for name, image in images.items():
        imagecore.save(img_dir / f"{name}.pgm", image)
    for name, xml in annotations.items():
        (ann_dir / f"{name}.xml").write_text(xml, encoding="utf-8")
    return ann_dir, img_dir


DARK_CORPUS_DEFAULTS = {
    "contrast": 0.15,
    "noise": 0.05,
    "background": (0.15, 0.35),
    "jitter": 0.05,
}


def dark_shape_corpus(
    root, seed: int, per_class: int = 40, size: int = 32, dark_gamma: float = 4.0, **shape_kw
) -> tuple[Path, Path]:
    """Three-class shape corpus pushed into the shadows by ``x ** dark_gamma``.

    The clean shapes are centered with little jitter, so they are linearly
    separable. Darkening squeezes them into a handful of low gray levels; a
    brightening gamma (< 1) spreads them back out.
    """
    kw = {**DARK_CORPUS_DEFAULTS, **shape_kw}
    rng = np.random.default_rng(seed)
    images, annotations = {}, {}
    k = 0
    for _ in range(per_class):
        for kind in SHAPE_CLASSES:
            unit, box = shape_image(kind, size, rng, **kw)
            name = f"{k:06d}"
            images[name] = ImageBuffer(to_u8(255.0 * darken(unit, dark_gamma)))
            annotations[name] = annotation_xml(f"{name}.jpg", size, size, [(kind, box)])
            k += 1
    return write_corpus(root, images, annotations)
