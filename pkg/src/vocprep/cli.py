"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, autotune, bench, imagecore, plots, quality, vocdata
from .errors import DataError, MalformedJson, UsageError
from .pipeline import PipelineSpec, apply_pipeline, parse_pipeline

log = logging.getLogger("vocprep")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _dump_json(path: Path, payload) -> None:
    path = Path(path)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _load_config(path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: config must be a JSON object")
    return data, path.parent


def _require(config: dict, key: str, where: str):
    if key not in config:
        raise DataError(f"{where}: missing required field {key!r}")
    return config[key]


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _image_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in vocdata.IMAGE_SUFFIXES and p.is_file())


# -- subcommands --------------------------------------------------------------

def cmd_analyze(args) -> int:
    index = vocdata.scan_dataset(args.annotations, args.images)
    for path, message in index.errors:
        print(f"error: {path}: {message}", file=sys.stderr)
    stats = vocdata.compute_stats(index)
    payload = {
        "config": {"annotations": str(args.annotations), "images": str(args.images)},
        "stats": stats.to_json(),
        "errors": [{"file": p, "message": m} for p, m in index.errors],
    }
    _dump_json(args.out, payload)
    sys.stdout.write(stats.text_bars())
    if args.figures:
        plots.dataset_stats(stats, args.figures)
    return EXIT_DATA if index.errors else EXIT_OK


def cmd_apply(args) -> int:
    spec = parse_pipeline(Path(args.pipeline).read_text(encoding="utf-8"))
    src, dst = Path(args.in_dir), Path(args.out_dir)
    files = _image_files(src)
    dst.mkdir(parents=True, exist_ok=True)

    def work(item):
        i, path = item
        target = dst / path.name
        if not spec.steps:
            shutil.copyfile(path, target)
            return
        try:
            out = apply_pipeline(spec, imagecore.load(path), args.seed ^ i)
        except DataError as exc:
            raise type(exc)(f"{path.name}: {exc}") from exc
        imagecore.save(target, out)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        list(pool.map(work, enumerate(files)))
    log.info("wrote %d images to %s", len(files), dst)
    return EXIT_OK


def cmd_quality(args) -> int:
    ref_dir, test_dir = Path(args.ref), Path(args.test)
    ref_files = _image_files(ref_dir)
    missing = [p.name for p in ref_files if not (test_dir / p.name).is_file()]
    for name in missing:
        print(f"error: {name} has no counterpart in {test_dir}", file=sys.stderr)

    def work(path):
        ref = imagecore.load(path)
        test = imagecore.load(test_dir / path.name)
        if not ref.is_gray:
            ref = imagecore.rgb_to_gray(ref)
        if not test.is_gray:
            test = imagecore.rgb_to_gray(test)
        return quality.QualityReport.compare(ref, test, path.name)

    paired = [p for p in ref_files if p.name not in missing]
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        reports = list(pool.map(work, paired))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(quality.to_csv(reports), encoding="utf-8")
    if args.json:
        _dump_json(
            args.json,
            {"config": {"ref": str(ref_dir), "test": str(test_dir)}, "rows": [r.to_json() for r in reports]},
        )
    if args.figures and reports:
        plots.quality_metrics(reports, args.figures)
    return EXIT_DATA if missing else EXIT_OK


def _index_from_config(config: dict, base: Path, where: str) -> vocdata.DatasetIndex:
    index = vocdata.scan_dataset(
        _resolve(base, _require(config, "annotations", where)), _resolve(base, _require(config, "images", where))
    )
    if index.errors:
        details = "; ".join(f"{p}: {m}" for p, m in index.errors)
        raise DataError(f"{where}: dataset scan failed: {details}")
    return index


def _bench_pipelines(raw) -> list[tuple[str, PipelineSpec]]:
    if not isinstance(raw, list) or not raw:
        raise DataError("bench config: 'pipelines' must be a non-empty array")
    out = []
    for i, item in enumerate(raw):
        if isinstance(item, list):
            pid, steps = f"p{i}", item
        elif isinstance(item, dict) and "steps" in item:
            pid, steps = str(item.get("id", f"p{i}")), item["steps"]
        else:
            raise DataError(f"bench config: pipelines[{i}] must be a step array or {{'id', 'steps'}}")
        try:
            out.append((pid, PipelineSpec.from_json(steps)))
        except DataError as exc:
            raise type(exc)(f"pipeline {pid!r}: {exc}") from exc
    ids = [pid for pid, _ in out]
    if len(set(ids)) != len(ids):
        raise DataError("bench config: pipeline ids must be unique")
    return out


def cmd_bench(args) -> int:
    config, base = _load_config(args.config)
    where = str(args.config)
    pipelines = _bench_pipelines(_require(config, "pipelines", where))
    feature = bench.FeatureSpec.from_json(config.get("feature"))
    lam = float(_require(config, "lambda", where))
    epochs = int(_require(config, "epochs", where))
    threshold = float(_require(config, "threshold", where))
    seed = int(_require(config, "seed", where))
    index = _index_from_config(config, base, where)
    echo = {
        "annotations": config["annotations"],
        "images": config["images"],
        "pipelines": [{"id": pid, "steps": spec.to_json()} for pid, spec in pipelines],
        "feature": feature.to_json(),
        "lambda": lam,
        "epochs": epochs,
        "threshold": threshold,
        "seed": seed,
    }
    report = bench.run_benchmark(index, pipelines, feature, lam, epochs, threshold, seed, config=echo)
    _dump_json(args.out, report.to_json())
    if args.csv_dir:
        csv_dir = Path(args.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        for r in report.results:
            (csv_dir / f"{r.id}.csv").write_text(r.log.to_csv(), encoding="utf-8")
    if args.figures:
        plots.convergence(report, args.figures, threshold)
    for r in report.results:
        print(f"{r.id}: final val acc {r.final_val_accuracy}, epochs to {threshold}: {r.epochs_to_threshold}")
    return EXIT_OK


def cmd_tune(args) -> int:
    config, base = _load_config(args.config)
    where = str(args.config)
    space = autotune.SearchSpace.from_json(_require(config, "search_space", where))
    feature = bench.FeatureSpec.from_json(config.get("feature"))
    fraction = float(_require(config, "subset_fraction", where))
    n_trials = int(config.get("n_trials", 1))
    epochs = int(_require(config, "epochs", where))
    lam = float(_require(config, "lambda", where))
    seed = int(_require(config, "seed", where))
    index = _index_from_config(config, base, where)
    echo = {
        "annotations": config["annotations"],
        "images": config["images"],
        "search_space": space.to_json(),
        "subset_fraction": fraction,
        "n_trials": n_trials,
        "epochs": epochs,
        "lambda": lam,
        "seed": seed,
        "feature": feature.to_json(),
    }
    report = autotune.run_search(space, index, fraction, n_trials, epochs, lam, seed, feature, config=echo)
    _dump_json(args.out, report.to_json())
    if args.figures:
        plots.tune_trials(report, args.figures)
    if report.best is None:
        print("all trials failed", file=sys.stderr)
        return EXIT_DATA
    print(f"best trial {report.best.trial_id}: {report.best.pipeline} (objective {report.best.objective})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vocprep", description="Image preprocessing catalog and SVM convergence benchmark.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("analyze", help="dataset statistics for a VOC-style corpus")
    p.add_argument("--annotations", required=True, type=Path)
    p.add_argument("--images", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="stats JSON")
    p.add_argument("--figures", type=Path, help="directory for histogram figures")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("apply", help="run a pipeline over a directory of PGM/PPM images")
    p.add_argument("--pipeline", required=True, type=Path)
    p.add_argument("--in", dest="in_dir", required=True, type=Path)
    p.add_argument("--out", dest="out_dir", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("quality", help="quality metrics of test images against references")
    p.add_argument("--ref", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="CSV report")
    p.add_argument("--json", type=Path, help="also write a JSON report")
    p.add_argument("--figures", type=Path)
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("bench", help="SVM convergence benchmark across pipelines")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--csv-dir", type=Path, help="write one TrainLog CSV per pipeline")
    p.add_argument("--figures", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", help="search pipeline parameters on a representative subset")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--figures", type=Path)
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
