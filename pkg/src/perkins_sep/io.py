"""Instance files and deterministic serialization.

Floats are written with 17 significant digits so that re-runs produce
byte-identical files and every value round-trips exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ParseError
from .measures import DiscreteMeasure

DEFAULT_OPTIONS = {"tolerance": 1e-10, "mc_paths": 1_000_000, "seed": 42, "dt_root_rost": 1e-4}


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, ".17g")
    if text == "-0":
        text = "0"
    return text


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with fixed 17-digit floats and sorted-as-given keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if hasattr(obj, "item") and not isinstance(obj, (list, tuple, dict, str)):
        return dumps(obj.item(), indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Instance:
    lam: DiscreteMeasure
    mu: DiscreteMeasure
    tolerance: float = DEFAULT_OPTIONS["tolerance"]
    mc_paths: int = DEFAULT_OPTIONS["mc_paths"]
    seed: int = DEFAULT_OPTIONS["seed"]
    dt_root_rost: float = DEFAULT_OPTIONS["dt_root_rost"]

    def to_json(self) -> dict:
        return {
            "lambda": self.lam.to_json(),
            "mu": self.mu.to_json(),
            "options": {
                "tolerance": self.tolerance,
                "mc_paths": self.mc_paths,
                "seed": self.seed,
                "dt_root_rost": self.dt_root_rost,
            },
        }

    @classmethod
    def from_json(cls, doc) -> "Instance":
        if not isinstance(doc, dict):
            raise ParseError("instance must be a JSON object")
        unknown = set(doc) - {"lambda", "mu", "options"}
        if unknown or not {"lambda", "mu"} <= set(doc):
            raise ParseError(f"instance needs 'lambda' and 'mu' (unknown keys: {sorted(unknown)})")
        opts = doc.get("options", {})
        if not isinstance(opts, dict) or set(opts) - set(DEFAULT_OPTIONS):
            raise ParseError(f"unknown options: {sorted(set(opts) - set(DEFAULT_OPTIONS))}")
        merged = {**DEFAULT_OPTIONS, **opts}
        try:
            inst = cls(
                DiscreteMeasure.from_json(doc["lambda"]),
                DiscreteMeasure.from_json(doc["mu"]),
                float(merged["tolerance"]),
                int(merged["mc_paths"]),
                int(merged["seed"]),
                float(merged["dt_root_rost"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad option value: {exc}") from exc
        if not inst.tolerance > 0 or inst.mc_paths < 1 or not inst.dt_root_rost > 0:
            raise ParseError("options must be positive")
        for name, m in (("lambda", inst.lam), ("mu", inst.mu)):
            if not m.is_probability():
                raise ParseError(f"{name} must have total mass 1")
        return inst
