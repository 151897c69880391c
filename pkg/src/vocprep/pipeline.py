"""Pipeline specification: an ordered list of parameterised preprocessing steps.

Pipelines are written as JSON arrays such as::

    [{"op": "gamma", "params": {"gamma": 0.5}}, {"op": "equalize"}]

Parameters are validated against each op's preconditions at parse time, so a
parsed ``PipelineSpec`` is always runnable on a compatible image.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from . import filters, transforms
from .errors import BadParam, ChannelMismatch, DataError, MalformedJson, UnknownOp
from .imagecore import ImageBuffer, rgb_to_gray


@dataclass(frozen=True)
class Param:
    kind: type  # int, float, str or list
    default: Any = None
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    required: bool = False


def _p(kind, default=None, check=None, rule="", required=False):
    return Param(kind, default, check, rule, required)


def _odd(minimum):
    return lambda k: k >= minimum and k % 2 == 1


def _level(v):
    return 0 <= v <= 255


def _reference_hist(v):
    return len(v) == 256 and all(isinstance(c, int) and c >= 0 for c in v) and sum(v) > 0


@dataclass(frozen=True)
class OpDef:
    params: dict[str, Param]
    run: Callable[..., ImageBuffer]
    gray_only: bool = True
    noisy: bool = False
    cross_check: Callable[[dict], str | None] | None = None


def _piecewise_check(p):
    if not (p["r1"] <= p["r2"] and p["s1"] <= p["s2"]):
        return "control points must satisfy r1 <= r2 and s1 <= s2"
    return None


def _slice_check(p):
    return None if p["A"] <= p["B"] else "A must not exceed B"


def _unsharp_check(p):
    return None if p["var_lo"] < p["var_hi"] else "var_lo must be below var_hi"


OPS: dict[str, OpDef] = {
    "to_gray": OpDef({}, lambda im, seed: im if im.is_gray else rgb_to_gray(im), gray_only=False),
    "negative": OpDef({}, lambda im, seed: transforms.negative(im)),
    "threshold": OpDef(
        {"T": _p(int, 128, _level, "0 <= T <= 255")},
        lambda im, seed, T: transforms.threshold(im, T),
    ),
    "log": OpDef(
        {"c": _p(float, transforms.DEFAULT_LOG_GAIN, lambda c: c > 0, "c > 0")},
        lambda im, seed, c: transforms.log_transform(im, c),
    ),
    "gamma": OpDef(
        {
            "gamma": _p(float, None, lambda g: g > 0, "gamma > 0", required=True),
            "c": _p(float, 1.0, lambda c: c > 0, "c > 0"),
        },
        lambda im, seed, gamma, c: transforms.gamma_transform(im, gamma, c),
    ),
    "piecewise": OpDef(
        {k: _p(int, None, _level, "0 <= value <= 255", required=True) for k in ("r1", "s1", "r2", "s2")},
        lambda im, seed, r1, s1, r2, s2: transforms.piecewise_stretch(im, (r1, s1), (r2, s2)),
        cross_check=_piecewise_check,
    ),
    "slice": OpDef(
        {
            "A": _p(int, None, _level, "0 <= A <= 255", required=True),
            "B": _p(int, None, _level, "0 <= B <= 255", required=True),
            "mode": _p(str, "preserve", lambda m: m in ("preserve", "binary"), "preserve or binary"),
        },
        lambda im, seed, A, B, mode: transforms.gray_level_slice(im, A, B, mode),
        cross_check=_slice_check,
    ),
    "equalize": OpDef({}, lambda im, seed: transforms.equalize(im)[0]),
    "match": OpDef(
        {"reference": _p(list, None, _reference_hist, "256 non-negative integer counts, not all zero", required=True)},
        lambda im, seed, reference: transforms.match_histogram(im, transforms.Histogram(reference)),
    ),
    "local_equalize": OpDef(
        {"window": _p(int, 7, _odd(1), "odd and >= 1")},
        lambda im, seed, window: transforms.local_equalize(im, window),
    ),
    "mmsiche": OpDef({}, lambda im, seed: transforms.mmsiche(im)[0]),
    "box": OpDef({"k": _p(int, 3, _odd(1), "odd and >= 1")}, lambda im, seed, k: filters.box_filter(im, k)),
    "median": OpDef({"k": _p(int, 3, _odd(1), "odd and >= 1")}, lambda im, seed, k: filters.median_filter(im, k)),
    "wiener": OpDef(
        {
            "k": _p(int, 5, _odd(3), "odd and >= 3"),
            "noise_var": _p(float, None, lambda v: v >= 0, "noise_var >= 0"),
        },
        lambda im, seed, k, noise_var: filters.wiener_filter(im, k, noise_var),
    ),
    "unsharp": OpDef(
        {
            "k": _p(int, 3, _odd(1), "odd and >= 1"),
            "gain_high": _p(float, 1.0, lambda g: g >= 0, "gain_high >= 0"),
            "var_lo": _p(float, 25.0, lambda v: v >= 0, "var_lo >= 0"),
            "var_hi": _p(float, 400.0, lambda v: v > 0, "var_hi > 0"),
        },
        lambda im, seed, k, gain_high, var_lo, var_hi: filters.unsharp_adaptive(im, k, gain_high, var_lo, var_hi),
        cross_check=_unsharp_check,
    ),
    "dwt_upscale": OpDef({}, lambda im, seed: filters.dwt_upscale(im)),
    "add_gaussian": OpDef(
        {"sigma": _p(float, None, lambda s: s >= 0, "sigma >= 0", required=True)},
        lambda im, seed, sigma: filters.add_gaussian(im, sigma, seed),
        noisy=True,
    ),
    "add_impulse": OpDef(
        {"p": _p(float, None, lambda p: 0 <= p <= 1, "0 <= p <= 1", required=True)},
        lambda im, seed, p: filters.add_impulse(im, p, seed),
        noisy=True,
    ),
}


def _coerce(value, param: Param):
    if param.kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise TypeError
        return float(value)
    if param.kind is int:
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise TypeError
        return value
    if not isinstance(value, param.kind):
        raise TypeError
    return value


@dataclass(frozen=True)
class Step:
    op: str
    params: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Params with defaults filled in."""
        out = {}
        for name, param in OPS[self.op].params.items():
            out[name] = self.params.get(name, param.default)
        return out

    def to_json(self) -> dict:
        out = {"op": self.op}
        if self.params:
            out["params"] = {k: self.params[k] for k in sorted(self.params)}
        return out

    def __hash__(self):
        return hash(json.dumps(self.to_json(), sort_keys=True))


def validate_step(raw, index: int) -> Step:
    if not isinstance(raw, dict) or "op" not in raw:
        raise BadParam(f"step {index}: expected an object with an 'op' field")
    extra = set(raw) - {"op", "params"}
    if extra:
        raise BadParam(f"step {index}: unexpected keys {sorted(extra)}")
    op = raw["op"]
    if op not in OPS:
        raise UnknownOp(f"step {index}: unknown op {op!r}; known ops: {', '.join(sorted(OPS))}")
    opdef = OPS[op]
    given = raw.get("params") or {}
    if not isinstance(given, dict):
        raise BadParam(f"step {index} ({op}): 'params' must be an object")
    params = {}
    for name, value in given.items():
        if name not in opdef.params:
            raise BadParam(f"step {index} ({op}): unknown param {name!r}")
        param = opdef.params[name]
        if value is None and not param.required and param.default is None:
            continue
        try:
            value = _coerce(value, param)
        except TypeError:
            raise BadParam(f"step {index} ({op}): param {name!r} must be {param.kind.__name__}, got {value!r}") from None
        if param.check is not None and not param.check(value):
            raise BadParam(f"step {index} ({op}): param {name}={value!r} violates {param.rule}")
        params[name] = value
    missing = [n for n, p in opdef.params.items() if p.required and n not in params]
    if missing:
        raise BadParam(f"step {index} ({op}): missing required params {missing}")
    step = Step(op, params)
    if opdef.cross_check is not None:
        problem = opdef.cross_check(step.resolved())
        if problem:
            raise BadParam(f"step {index} ({op}): {problem}")
    return step


@dataclass(frozen=True)
class PipelineSpec:
    steps: tuple[Step, ...] = ()

    def __len__(self):
        return len(self.steps)

    def to_json(self) -> list:
        return [s.to_json() for s in self.steps]

    def serialize(self) -> str:
        """Canonical form: compact JSON with sorted keys."""
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, data) -> PipelineSpec:
        if not isinstance(data, list):
            raise BadParam("a pipeline must be a JSON array of steps")
        return cls(tuple(validate_step(raw, i) for i, raw in enumerate(data)))

    def __str__(self):
        if not self.steps:
            return "identity"
        parts = []
        for s in self.steps:
            args = ",".join(f"{k}={v}" for k, v in sorted(s.params.items()) if k != "reference")
            parts.append(f"{s.op}({args})" if args else s.op)
        return " > ".join(parts)


def parse_pipeline(json_text: str) -> PipelineSpec:
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"pipeline is not valid JSON: {exc}") from None
    return PipelineSpec.from_json(data)


def apply_pipeline(spec: PipelineSpec, image: ImageBuffer, seed: int = 0, auto_gray: bool = False) -> ImageBuffer:
    """Run ``spec`` on ``image``.

    RGB input reaching a gray-only step is converted only when ``auto_gray``
    is set (the feature extractor asks for it); otherwise a ``to_gray`` step
    must come first. Noise steps draw from seed ``seed ^ step_index``.
    """
    for i, step in enumerate(spec.steps):
        opdef = OPS[step.op]
        if opdef.gray_only and not image.is_gray:
            if not auto_gray:
                raise ChannelMismatch(f"step {i} ({step.op}) needs a grayscale image; add a to_gray step first")
            image = rgb_to_gray(image)
        try:
            image = opdef.run(image, seed ^ i, **step.resolved())
        except DataError as exc:
            raise type(exc)(f"step {i} ({step.op}): {exc}") from exc
    return image
