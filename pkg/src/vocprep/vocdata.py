"""VOC-style annotations, dataset indexing, corpus statistics and
representative subset selection."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imagecore
from .errors import DataError, InvalidBox, InvalidFraction, MissingField, MissingImage, UnreadableImage
from .imagecore import round_half_away
from .vocxml import Element, parse_xml

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".ppm")
LUMINANCE_BINS = 16
SWAP_ITERATIONS = 1000


@dataclass(frozen=True)
class VocObject:
    class_name: str
    xmin: int | float
    ymin: int | float
    xmax: int | float
    ymax: int | float
    difficult: bool = False


@dataclass(frozen=True)
class Annotation:
    filename: str
    width: int
    height: int
    objects: tuple[VocObject, ...] = ()

    def dominant_class(self) -> str | None:
        """Class with the most objects; ties go to the smallest name."""
        if not self.objects:
            return None
        counts = Counter(o.class_name for o in self.objects)
        return min(counts, key=lambda c: (-counts[c], c))

    def dump(self) -> str:
        lines = [f"filename: {self.filename}", f"size: {self.width}x{self.height}", f"objects: {len(self.objects)}"]
        for i, o in enumerate(self.objects):
            lines.append(
                f"object {i}: {o.class_name} difficult={int(o.difficult)} box=({o.xmin},{o.ymin},{o.xmax},{o.ymax})"
            )
        return "\n".join(lines) + "\n"


def _text(node: Element, tag: str, where: str) -> str:
    child = node.find(tag)
    if child is None or child.text == "":
        raise MissingField(f"missing <{tag}> in {where}")
    return child.text


def _number(node: Element, tag: str, where: str) -> int | float:
    raw = _text(node, tag, where)
    try:
        value = float(raw)
    except ValueError:
        raise MissingField(f"<{tag}> in {where} is not a number: {raw!r}") from None
    return int(value) if value.is_integer() else value


def parse_annotation(xml_text: str) -> Annotation:
    root = parse_xml(xml_text)
    if root.tag != "annotation":
        raise MissingField(f"root element is <{root.tag}>, expected <annotation>")
    filename = _text(root, "filename", "<annotation>")
    size = root.find("size")
    if size is None:
        raise MissingField("missing <size> in <annotation>")
    width = _number(size, "width", "<size>")
    height = _number(size, "height", "<size>")
    if not (isinstance(width, int) and isinstance(height, int)) or width < 1 or height < 1:
        raise InvalidBox(f"invalid image size {width}x{height}")

    objects = []
    for i, obj in enumerate(root.findall("object")):
        where = f"<object> #{i}"
        name = _text(obj, "name", where)
        diff_node = obj.find("difficult")
        difficult = diff_node is not None and diff_node.text not in ("", "0")
        box = obj.find("bndbox")
        if box is None:
            raise MissingField(f"missing <bndbox> in {where}")
        xmin, ymin, xmax, ymax = (_number(box, t, f"{where} <bndbox>") for t in ("xmin", "ymin", "xmax", "ymax"))
        if not (0 <= xmin < xmax <= width and 0 <= ymin < ymax <= height):
            raise InvalidBox(f"{where} ({name}) box ({xmin},{ymin},{xmax},{ymax}) outside {width}x{height}")
        objects.append(VocObject(name, xmin, ymin, xmax, ymax, difficult))
    return Annotation(filename, width, height, tuple(objects))


@dataclass(frozen=True)
class Record:
    image_path: Path
    annotation: Annotation
    annotation_path: Path | None = None


@dataclass
class DatasetIndex:
    records: list[Record]
    errors: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        paths = [r.image_path for r in self.records]
        if len(set(paths)) != len(paths):
            raise DataError("image paths in an index must be unique")

    @property
    def class_set(self) -> list[str]:
        return sorted({o.class_name for r in self.records for o in r.annotation.objects})

    def __len__(self):
        return len(self.records)

    def subset(self, positions) -> DatasetIndex:
        return DatasetIndex([self.records[i] for i in sorted(positions)])


def _find_image(image_dir: Path, stem: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = image_dir / (stem + suffix)
        if candidate.is_file():
            return candidate
    return None


def scan_dataset(annotation_dir, image_dir) -> DatasetIndex:
    """Pair every ``*.xml`` annotation with the same-stem PGM/PPM image.

    Failures (orphan annotations, parse errors) are collected in
    ``index.errors`` and the scan continues.
    """
    annotation_dir, image_dir = Path(annotation_dir), Path(image_dir)
    for d in (annotation_dir, image_dir):
        if not d.is_dir():
            raise DataError(f"not a directory: {d}")
    records, errors = [], []
    for xml_path in sorted(annotation_dir.glob("*.xml")):
        try:
            ann = parse_annotation(xml_path.read_text(encoding="utf-8"))
            image_path = _find_image(image_dir, xml_path.stem)
            if image_path is None:
                raise MissingImage(f"no {'/'.join(IMAGE_SUFFIXES)} image for {xml_path.name} in {image_dir}")
        except DataError as exc:
            log.warning("%s: %s", xml_path, exc)
            errors.append((str(xml_path), f"{type(exc).__name__}: {exc}"))
            continue
        records.append(Record(image_path, ann, xml_path))
    return DatasetIndex(records, errors)


def image_luminance(path) -> float:
    """Mean intensity of the grayscale version of an image file."""
    try:
        image = imagecore.load(path)
    except (OSError, DataError) as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc
    if not image.is_gray:
        image = imagecore.rgb_to_gray(image)
    return float(image.pixels.mean())


def luminance_bin(mean: float) -> int:
    return min(int(mean * LUMINANCE_BINS / 256.0), LUMINANCE_BINS - 1)


@dataclass
class DatasetStats:
    resolution_hist: dict[tuple[int, int], int]
    class_counts: dict[str, int]
    luminance_hist: list[int]
    objects_per_image_mean: float
    objects_per_image_max: int
    image_count: int

    def to_json(self) -> dict:
        return {
            "image_count": self.image_count,
            "resolution_hist": [
                {"width": w, "height": h, "count": c} for (w, h), c in sorted(self.resolution_hist.items())
            ],
            "class_counts": dict(sorted(self.class_counts.items())),
            "luminance_hist": {"bins": LUMINANCE_BINS, "bin_width": 256 // LUMINANCE_BINS, "counts": self.luminance_hist},
            "objects_per_image": {"mean": self.objects_per_image_mean, "max": self.objects_per_image_max},
        }

    def text_bars(self, width: int = 40) -> str:
        """Plain-text histogram bars for terminals and logs."""

        def bars(title, items):
            items = list(items)
            top = max((c for _, c in items), default=0) or 1
            out = [title]
            for label, count in items:
                out.append(f"  {label:>14} | {'#' * round(width * count / top):<{width}} {count}")
            return out

        lines = bars("luminance", ((f"{16 * i}-{16 * i + 15}", c) for i, c in enumerate(self.luminance_hist)))
        lines += bars("classes", sorted(self.class_counts.items()))
        lines += bars("resolution", ((f"{w}x{h}", c) for (w, h), c in sorted(self.resolution_hist.items())))
        return "\n".join(lines) + "\n"


def luminances(index: DatasetIndex) -> list[float]:
    return [image_luminance(r.image_path) for r in index.records]


def compute_stats(index: DatasetIndex, lums: list[float] | None = None) -> DatasetStats:
    if len(index) == 0:
        raise DataError("cannot compute statistics of an empty index")
    lums = luminances(index) if lums is None else lums
    resolution = Counter((r.annotation.width, r.annotation.height) for r in index.records)
    classes = Counter(o.class_name for r in index.records for o in r.annotation.objects)
    lum_hist = [0] * LUMINANCE_BINS
    for value in lums:
        lum_hist[luminance_bin(value)] += 1
    per_image = [len(r.annotation.objects) for r in index.records]
    return DatasetStats(
        resolution_hist=dict(resolution),
        class_counts=dict(classes),
        luminance_hist=lum_hist,
        objects_per_image_mean=float(np.mean(per_image)),
        objects_per_image_max=int(max(per_image)),
        image_count=len(index),
    )


# -- representative subsets ---------------------------------------------------

def chi_square(sub_counts: np.ndarray, full_counts: np.ndarray) -> float:
    """Chi-square distance between two count vectors' add-one smoothed proportions."""
    k = len(full_counts)
    p_sub = (sub_counts + 1.0) / (sub_counts.sum() + k)
    p_full = (full_counts + 1.0) / (full_counts.sum() + k)
    return float(np.sum((p_sub - p_full) ** 2 / p_full))


class _Profile:
    """Per-record class and luminance count vectors for fast D evaluation."""

    def __init__(self, index: DatasetIndex, lums: list[float]):
        classes = index.class_set
        pos = {c: i for i, c in enumerate(classes)}
        n = len(index)
        self.class_counts = np.zeros((n, max(len(classes), 1)))
        self.lum_counts = np.zeros((n, LUMINANCE_BINS))
        for i, rec in enumerate(index.records):
            for o in rec.annotation.objects:
                self.class_counts[i, pos[o.class_name]] += 1
            self.lum_counts[i, luminance_bin(lums[i])] = 1
        self.full_class = self.class_counts.sum(axis=0)
        self.full_lum = self.lum_counts.sum(axis=0)

    def divergence(self, members) -> float:
        members = list(members)
        return chi_square(self.class_counts[members].sum(axis=0), self.full_class) + chi_square(
            self.lum_counts[members].sum(axis=0), self.full_lum
        )


def subset_divergence(index: DatasetIndex, positions, lums: list[float] | None = None) -> float:
    """The representativeness objective D of a subset given by record positions."""
    lums = luminances(index) if lums is None else lums
    return _Profile(index, lums).divergence(positions)


def subset_size(n: int, fraction: float) -> int:
    return max(1, int(round_half_away(fraction * n)))


def _stratified_draw(index: DatasetIndex, m: int, rng: np.random.Generator) -> list[int]:
    strata: dict[str, list[int]] = {}
    for i, rec in enumerate(index.records):
        strata.setdefault(rec.annotation.dominant_class() or "", []).append(i)
    n = len(index)
    names = sorted(strata)
    exact = {c: m * len(strata[c]) / n for c in names}
    quota = {c: int(exact[c]) for c in names}
    # largest remainder, ties by class name
    leftover = m - sum(quota.values())
    for c in sorted(names, key=lambda c: (-(exact[c] - quota[c]), c))[:leftover]:
        quota[c] += 1
    chosen = []
    for c in names:
        members = strata[c]
        order = rng.permutation(len(members))
        chosen.extend(members[j] for j in order[: quota[c]])
    return sorted(chosen)


def select_subset(
    index: DatasetIndex,
    fraction: float,
    seed: int,
    lums: list[float] | None = None,
    trace: list[float] | None = None,
) -> DatasetIndex:
    """Pick ``round(fraction * n)`` records whose class and luminance
    distributions track the full set.

    A class-stratified random draw is refined by up to 1000 seeded one-in,
    one-out swaps, each kept only if it lowers the chi-square objective.
    ``trace`` (if given) receives the objective after the draw and after
    every accepted swap.
    """
    if not 0 < fraction <= 1:
        raise InvalidFraction(f"fraction must lie in (0, 1], got {fraction}")
    n = len(index)
    if n == 0:
        return DatasetIndex([])
    m = subset_size(n, fraction)
    if m >= n:
        return DatasetIndex(list(index.records))
    lums = luminances(index) if lums is None else lums
    profile = _Profile(index, lums)
    rng = np.random.default_rng(seed)
    members = _stratified_draw(index, m, rng)
    inside = set(members)
    outside = sorted(set(range(n)) - inside)
    best = profile.divergence(members)
    if trace is not None:
        trace.append(best)
    for _ in range(SWAP_ITERATIONS):
        i = int(rng.integers(m))
        j = int(rng.integers(n - m))
        candidate = members.copy()
        candidate[i] = outside[j]
        d = profile.divergence(candidate)
        if d < best:
            members[i], outside[j] = outside[j], members[i]
            best = d
            if trace is not None:
                trace.append(best)
    return index.subset(members)
