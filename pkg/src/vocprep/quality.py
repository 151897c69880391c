"""Image quality metrics: MSE, PSNR, AMBE, entropy, luminance, background level."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch
from .imagecore import ImageBuffer, require_gray
from .transforms import compute_histogram

PEAK = 255.0
CSV_COLUMNS = ("file", "mse", "psnr_db", "ambe", "entropy_bits", "avg_luminance", "background_gray")


def _pair(a: ImageBuffer, b: ImageBuffer) -> tuple[np.ndarray, np.ndarray]:
    pa, pb = require_gray(a, "metric"), require_gray(b, "metric")
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    return pa.astype(np.float64), pb.astype(np.float64)


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    pa, pb = _pair(a, b)
    return float(np.mean((pa - pb) ** 2))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical images."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


def ambe(a: ImageBuffer, b: ImageBuffer) -> float:
    pa, pb = _pair(a, b)
    return abs(float(pa.mean()) - float(pb.mean()))


def entropy(image: ImageBuffer) -> float:
    counts = compute_histogram(image).counts
    p = counts[counts > 0] / counts.sum()
    h = float(-(p * np.log2(p)).sum())
    return h if h > 0 else 0.0


def avg_luminance(image: ImageBuffer) -> float:
    return float(require_gray(image, "avg_luminance").mean())


def background_gray(image: ImageBuffer) -> int:
    # np.argmax returns the first maximum, i.e. the smallest tied level
    return int(np.argmax(compute_histogram(image).counts))


@dataclass
class QualityReport:
    file: str
    mse: float
    psnr_db: float
    ambe: float
    entropy_bits: float
    avg_luminance: float
    background_gray: int

    @classmethod
    def compare(cls, reference: ImageBuffer, test: ImageBuffer, file: str = "") -> QualityReport:
        """Fidelity of ``test`` against ``reference``; per-image stats describe ``test``."""
        return cls(
            file=file,
            mse=mse(reference, test),
            psnr_db=psnr(reference, test),
            ambe=ambe(reference, test),
            entropy_bits=entropy(test),
            avg_luminance=avg_luminance(test),
            background_gray=background_gray(test),
        )

    def to_json(self) -> dict:
        # infinite PSNR is encoded as null plus a flag
        row = asdict(self)
        row["psnr_infinite"] = math.isinf(self.psnr_db)
        if row["psnr_infinite"]:
            row["psnr_db"] = None
        return row


def to_csv(reports: list[QualityReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        psnr_text = "inf" if math.isinf(r.psnr_db) else repr(r.psnr_db)
        writer.writerow(
            [r.file, repr(r.mse), psnr_text, repr(r.ambe), repr(r.entropy_bits), repr(r.avg_luminance), r.background_gray]
        )
    return buf.getvalue()
