"""Matplotlib figures written next to the JSON/CSV reports."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def dataset_stats(stats, outdir) -> list[Path]:
    outdir = Path(outdir)
    written = []
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        edges = [16 * i for i in range(len(stats.luminance_hist))]
        ax.bar(edges, stats.luminance_hist, width=14, align="edge", color="0.35")
        ax.set_xlabel("mean image luminance")
        ax.set_ylabel("images")
        ax.set_xlim(0, 256)
        written.append(_save(fig, outdir / "luminance_hist.png"))

        fig, ax = plt.subplots()
        names = sorted(stats.class_counts)
        ax.barh(names, [stats.class_counts[n] for n in names], color="0.35")
        ax.set_xlabel("objects")
        ax.invert_yaxis()
        written.append(_save(fig, outdir / "class_counts.png"))

        fig, ax = plt.subplots()
        res = sorted(stats.resolution_hist.items())
        sizes = [c for _, c in res]
        top = max(sizes, default=1)
        ax.scatter([w for (w, _), _ in res], [h for (_, h), _ in res], s=[20 + 180 * c / top for c in sizes], alpha=0.6)
        ax.set_xlabel("width (px)")
        ax.set_ylabel("height (px)")
        written.append(_save(fig, outdir / "resolution.png"))
    return written


def convergence(report, outdir, threshold: float | None = None) -> list[Path]:
    """Validation accuracy and training hinge loss per epoch, one line per pipeline."""
    outdir = Path(outdir)
    with plt.rc_context(RC):
        fig, (acc_ax, loss_ax) = plt.subplots(1, 2, figsize=(10, 4))
        for r in report.results:
            epochs = [row.epoch for row in r.log.rows]
            acc_ax.plot(epochs, [row.val_accuracy for row in r.log.rows], marker="o", ms=3, label=r.id)
            loss_ax.plot(epochs, [row.train_hinge_loss for row in r.log.rows], marker="o", ms=3, label=r.id)
        if threshold is not None:
            acc_ax.axhline(threshold, color="k", lw=0.8, ls="--")
        acc_ax.set_xlabel("epoch")
        acc_ax.set_ylabel("validation accuracy")
        acc_ax.set_ylim(0, 1.02)
        loss_ax.set_xlabel("epoch")
        loss_ax.set_ylabel("mean training hinge loss")
        acc_ax.legend()
        return [_save(fig, outdir / "convergence.png")]


def tune_trials(report, outdir) -> list[Path]:
    outdir = Path(outdir)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(6.4, 0.35 * len(report.trials)), 4.0))
        ids = [t.trial_id for t in report.trials]
        values = [t.objective if t.ok else math.nan for t in report.trials]
        best = report.best.trial_id if report.best is not None else None
        colors = ["C3" if i == best else "0.5" for i in ids]
        ax.bar([str(i) for i in ids], values, color=colors)
        ax.set_xlabel("trial")
        ax.set_ylabel("validation accuracy")
        ax.set_ylim(0, 1.02)
        return [_save(fig, outdir / "trials.png")]


def quality_metrics(reports, outdir) -> list[Path]:
    outdir = Path(outdir)
    with plt.rc_context(RC):
        fig, (psnr_ax, ambe_ax) = plt.subplots(1, 2, figsize=(10, 4))
        names = [r.file for r in reports]
        psnr_ax.bar(names, [r.psnr_db if math.isfinite(r.psnr_db) else math.nan for r in reports], color="0.35")
        psnr_ax.set_ylabel("PSNR (dB)")
        ambe_ax.bar(names, [r.ambe for r in reports], color="0.35")
        ambe_ax.set_ylabel("AMBE")
        for ax in (psnr_ax, ambe_ax):
            ax.tick_params(axis="x", labelrotation=60)
        return [_save(fig, outdir / "quality.png")]
