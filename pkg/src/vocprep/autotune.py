"""Parameter search over preprocessing pipelines on a representative subset.

A search space is a JSON object::

    {"mode": "random",
     "steps": [
        {"op": "gamma", "params": {"gamma": {"choice": [0.5, 1.0, 2.2]}}},
        {"op": "wiener", "params": {"k": 5, "noise_var": {"continuous": [10, 200]}}},
        {"one_of": [[], [{"op": "equalize"}], [{"op": "mmsiche"}]]}
     ]}

Plain parameter values are fixed. ``{"choice": [...]}`` and
``{"continuous": [lo, hi]}`` are searchable; in grid mode a continuous
parameter must also give ``"grid": [...]``. ``one_of`` picks one of several
fixed-or-searchable sub-pipelines.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .bench import FeatureSpec, evaluate_pipeline, raw_features
from .errors import BadParam, DataError, EmptySpace
from .pipeline import OPS, PipelineSpec
from .vocdata import DatasetIndex, luminances, select_subset, subset_divergence

log = logging.getLogger(__name__)

MODES = ("random", "grid")


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    grid: tuple | None = None


@dataclass(frozen=True)
class Choice:
    values: tuple


@dataclass(frozen=True)
class OpTemplate:
    op: str
    params: dict  # name -> fixed value | Continuous | Choice


@dataclass(frozen=True)
class OneOf:
    alternatives: tuple  # of tuple[step template, ...]


@dataclass(frozen=True)
class SearchSpace:
    steps: tuple
    mode: str = "random"

    @classmethod
    def from_json(cls, data: dict) -> SearchSpace:
        if not isinstance(data, dict) or not isinstance(data.get("steps"), list):
            raise BadParam("search space must be an object with a 'steps' array")
        mode = data.get("mode", "random")
        if mode not in MODES:
            raise BadParam(f"unknown search mode {mode!r}")
        return cls(_parse_steps(data["steps"], "steps"), mode)

    def to_json(self) -> dict:
        return {"mode": self.mode, "steps": _steps_json(self.steps)}


def _parse_param(value, where):
    if isinstance(value, dict) and "choice" in value:
        values = value["choice"]
        if not isinstance(values, list) or not values:
            raise EmptySpace(f"{where}: choice list must be non-empty")
        return Choice(tuple(values))
    if isinstance(value, dict) and "continuous" in value:
        bounds = value["continuous"]
        if not (isinstance(bounds, list) and len(bounds) == 2 and bounds[0] < bounds[1]):
            raise BadParam(f"{where}: continuous bounds must be [lo, hi] with lo < hi")
        grid = value.get("grid")
        if grid is not None:
            if not grid:
                raise EmptySpace(f"{where}: grid must be non-empty")
            if any(not bounds[0] <= g <= bounds[1] for g in grid):
                raise BadParam(f"{where}: grid values must lie within the bounds")
            grid = tuple(grid)
        return Continuous(float(bounds[0]), float(bounds[1]), grid)
    return value


def _parse_steps(raw_steps, where) -> tuple:
    steps = []
    for i, raw in enumerate(raw_steps):
        here = f"{where}[{i}]"
        if isinstance(raw, dict) and "one_of" in raw:
            alts = raw["one_of"]
            if not isinstance(alts, list) or not alts:
                raise EmptySpace(f"{here}: one_of needs at least one alternative")
            steps.append(OneOf(tuple(_parse_steps(a, f"{here}.one_of[{j}]") for j, a in enumerate(alts))))
            continue
        if not isinstance(raw, dict) or "op" not in raw:
            raise BadParam(f"{here}: expected an op step or a one_of block")
        if raw["op"] not in OPS:
            raise BadParam(f"{here}: unknown op {raw['op']!r}")
        params = {k: _parse_param(v, f"{here}.{k}") for k, v in (raw.get("params") or {}).items()}
        steps.append(OpTemplate(raw["op"], params))
    return tuple(steps)


def _param_json(value):
    if isinstance(value, Choice):
        return {"choice": list(value.values)}
    if isinstance(value, Continuous):
        out = {"continuous": [value.lo, value.hi]}
        if value.grid is not None:
            out["grid"] = list(value.grid)
        return out
    return value


def _steps_json(steps) -> list:
    out = []
    for s in steps:
        if isinstance(s, OneOf):
            out.append({"one_of": [_steps_json(a) for a in s.alternatives]})
        else:
            out.append({"op": s.op, "params": {k: _param_json(v) for k, v in s.params.items()}})
    return out


def _cast(op: str, name: str, value):
    param = OPS[op].params.get(name)
    if param is not None and param.kind is int and isinstance(value, float):
        return int(round(value))
    return value


def _sample_steps(steps, rng: np.random.Generator) -> list[dict]:
    out = []
    for s in steps:
        if isinstance(s, OneOf):
            alt = s.alternatives[int(rng.integers(len(s.alternatives)))]
            out.extend(_sample_steps(alt, rng))
            continue
        params = {}
        for name, v in s.params.items():
            if isinstance(v, Choice):
                v = v.values[int(rng.integers(len(v.values)))]
            elif isinstance(v, Continuous):
                v = _cast(s.op, name, float(rng.uniform(v.lo, v.hi)))
            params[name] = v
        out.append({"op": s.op, "params": params} if params else {"op": s.op})
    return out


def _grid_steps(steps) -> list[list[dict]]:
    """Cross-product of every searchable dimension, in declaration order."""
    if not steps:
        return [[]]
    head, rest = steps[0], _grid_steps(steps[1:])
    if isinstance(head, OneOf):
        heads = [p for alt in head.alternatives for p in _grid_steps(alt)]
    else:
        names = list(head.params)
        axes = []
        for name in names:
            v = head.params[name]
            if isinstance(v, Choice):
                axes.append(v.values)
            elif isinstance(v, Continuous):
                if v.grid is None:
                    raise BadParam(f"grid search needs a 'grid' list for continuous param {head.op}.{name}")
                axes.append(tuple(_cast(head.op, name, g) for g in v.grid))
            else:
                axes.append((v,))
        heads = []
        for combo in itertools.product(*axes):
            params = dict(zip(names, combo))
            heads.append([{"op": head.op, "params": params} if params else {"op": head.op}])
    return [h + r for h in heads for r in rest]


def sample_trials(space: SearchSpace, n: int, seed: int, mode: str | None = None) -> list[PipelineSpec]:
    """Concrete pipelines to evaluate.

    Random mode draws ``n`` pipelines (continuous uniform, choices uniform).
    Grid mode ignores ``n`` and enumerates the whole cross-product.
    """
    mode = mode or space.mode
    if mode == "grid":
        return [PipelineSpec.from_json(steps) for steps in _grid_steps(space.steps)]
    if n < 1:
        raise EmptySpace(f"need at least one trial, got {n}")
    rng = np.random.default_rng(seed)
    return [PipelineSpec.from_json(_sample_steps(space.steps, rng)) for _ in range(n)]


@dataclass
class Trial:
    trial_id: int
    pipeline: PipelineSpec
    seed: int
    objective: float | None = None
    wall_ms: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "pipeline": self.pipeline.to_json(),
            "content_hash": self.pipeline.content_hash(),
            "status": "ok" if self.ok else "failed",
            "objective": self.objective,
            "wall_ms": self.wall_ms,
            "seed": self.seed,
            "error": self.error,
        }


def pick_best(trials: list[Trial]) -> Trial | None:
    """Highest objective; ties go to fewer steps, then the lower trial id."""
    ok = [t for t in trials if t.ok]
    if not ok:
        return None
    return min(ok, key=lambda t: (-t.objective, len(t.pipeline), t.trial_id))


@dataclass
class TuneReport:
    trials: list[Trial]
    best: Trial | None
    config: dict
    subset_images: list[str]
    subset_divergence: float
    full_size: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "subset": {
                "size": len(self.subset_images),
                "full_size": self.full_size,
                "divergence": self.subset_divergence,
                "images": self.subset_images,
            },
            "trials": [t.to_json() for t in self.trials],
            "best": None if self.best is None else self.best.to_json(),
        }


def run_search(
    space: SearchSpace,
    index: DatasetIndex,
    subset_fraction: float,
    n_trials: int,
    epochs: int,
    lam: float,
    seed: int,
    feature: FeatureSpec | None = None,
    mode: str | None = None,
    config: dict | None = None,
) -> TuneReport:
    """Evaluate sampled pipelines on a representative subset.

    Each trial trains the benchmark SVM for ``epochs`` with the shared seed;
    its objective is the final validation accuracy. A failing trial is kept
    in the report with its error and never selected as best.
    """
    feature = feature or FeatureSpec()
    if epochs < 1:
        raise DataError("epochs must be >= 1")
    lums = luminances(index)
    subset = select_subset(index, subset_fraction, seed, lums)
    position = {r.image_path: i for i, r in enumerate(index.records)}
    members = [position[r.image_path] for r in subset.records]
    divergence = subset_divergence(index, members, lums)

    cache: dict[str, np.ndarray] = {}
    trials = []
    for trial_id, spec in enumerate(sample_trials(space, n_trials, seed, mode)):
        trial = Trial(trial_id, spec, seed)
        try:
            key = spec.content_hash()
            if key not in cache:
                cache[key] = raw_features(subset, spec, feature, seed)
            _, tlog = evaluate_pipeline(subset, spec, feature, lam, epochs, seed, raw=cache[key])
            trial.objective = tlog.rows[-1].val_accuracy
            trial.wall_ms = tlog.rows[-1].cumulative_wall_ms
        except (DataError, ArithmeticError) as exc:
            log.warning("trial %d (%s) failed: %s", trial_id, spec, exc)
            trial.error = f"{type(exc).__name__}: {exc}"
        trials.append(trial)

    echo = config if config is not None else {
        "search_space": space.to_json(),
        "mode": mode or space.mode,
        "subset_fraction": subset_fraction,
        "n_trials": n_trials,
        "epochs": epochs,
        "lambda": lam,
        "seed": seed,
        "feature": feature.to_json(),
    }
    return TuneReport(
        trials=trials,
        best=pick_best(trials),
        config=echo,
        subset_images=[r.image_path.name for r in subset.records],
        subset_divergence=divergence,
        full_size=len(index),
    )
