"""Python access to the spr reasoning engine.

Trees are canonical JSON text (as written by the engine); other structured
values are plain dicts and lists.
"""

from __future__ import annotations

import json
from os import PathLike
from typing import Any, Iterable, Mapping, Optional, Sequence

from . import _spr
from ._spr import SprError

__all__ = [
    "SprError",
    "run",
    "resynthesize",
    "beta_paths",
    "apply_rule",
    "sensitivity",
    "wmc_probability",
    "eval_formula",
    "bias_variance",
    "evaluate",
    "calibrate_threshold",
    "binary_complement",
]


def _dump(value: Any) -> str:
    return json.dumps(value)


def run(job: Mapping[str, Any], base_dir: str | PathLike[str] = "") -> dict:
    """Run a job ({"query", "config", "agents"}). Returns {"tree": text, "manifest": dict}."""
    return json.loads(_spr.run(_dump(job), str(base_dir)))


def resynthesize(tree: str, edits: Sequence[Mapping[str, Any]], job: Mapping[str, Any],
                 base_dir: str | PathLike[str] = "") -> dict:
    """Apply [{"id", "p_true"?, "statement"?}] edits. Returns {"tree", "delta", "dirty"}."""
    return json.loads(_spr.resynthesize(tree, _dump(list(edits)), _dump(job), str(base_dir)))


def beta_paths(tree: str) -> dict:
    return json.loads(_spr.beta_paths(tree))


def apply_rule(record: Mapping[str, Any], values: Mapping[str, float]) -> float:
    return _spr.apply_rule(_dump(record), _dump(values))


def sensitivity(record: Mapping[str, Any], values: Mapping[str, float]) -> dict:
    return json.loads(_spr.sensitivity(_dump(record), _dump(values)))


def wmc_probability(record: Mapping[str, Any], priors: Mapping[str, float], normalization: str = "none") -> float:
    return _spr.wmc_probability(_dump(record), _dump(priors), normalization)


def eval_formula(formula: str, values: Mapping[str, float]) -> float:
    return _spr.eval_formula(formula, dict(values))


def bias_variance(spec: Mapping[str, Any], noise: Mapping[str, Any], rule: str = "linear", runs: int = 10000,
                  seed: int = 0, workers: int = 1) -> dict:
    return json.loads(_spr.bias_variance(_dump(spec), _dump(noise), rule, runs, seed, workers))


def evaluate(events: str, predictions: str, threshold: Optional[float] = None) -> dict:
    """Score JSONL predictions against JSONL event tasks."""
    return json.loads(_spr.evaluate(events, predictions, threshold))


def calibrate_threshold(validation: Iterable[tuple[float, bool]]) -> tuple[float, float]:
    return _spr.calibrate_threshold(list(validation))


def binary_complement(p: float) -> float:
    return _spr.binary_complement(p)
