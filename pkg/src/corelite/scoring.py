"""Score normalization to 0-100, cross-dataset aggregation, and lite-vs-full correlation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import CoreliteError
from .corpus import ScaleSpec, ScoreTable

DEFAULT_SCALE = (0.0, 100.0)


def load_scales(path) -> ScaleSpec:
    """Read a {"<dataset>": {"min": ..., "max": ...}} JSON config."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    scales: dict[str, tuple[float, float]] = {}
    for dataset, spec in raw.items():
        if not isinstance(spec, dict) or "min" not in spec or "max" not in spec:
            raise CoreliteError(f"scale for {dataset!r} must have min and max")
        scales[dataset] = (float(spec["min"]), float(spec["max"]))
    return ScaleSpec(scales)


def resolve_scale(scales: ScaleSpec, dataset: str, raw: float) -> tuple[float, float]:
    """Scale for a dataset; defaults to (0, 100) but refuses to guess for raw > 100."""
    if dataset in scales.scales:
        return scales.scales[dataset]
    if raw > DEFAULT_SCALE[1]:
        raise CoreliteError(
            f"dataset {dataset!r}: score {raw} exceeds the default (0, 100) scale; "
            "configure an explicit scale"
        )
    return DEFAULT_SCALE


def normalize_score(raw: float, scale: tuple[float, float]) -> float:
    """Affine rescale to 0-100, clamped; judge-style metrics may exceed declared maxima."""
    lo, hi = scale
    if not hi > lo:
        raise CoreliteError("scale max must exceed min")
    value = 100.0 * (raw - lo) / (hi - lo)
    return min(100.0, max(0.0, value))


@dataclass(frozen=True)
class AggregateResult:
    per_model: dict[str, float]
    weighting: str  # "unweighted" | "instance_weighted"


@dataclass(frozen=True)
class CorrelationResult:
    per_dataset: dict[str, float | None]
    method: str  # "pearson" | "spearman"
    sample_count: dict[str, int]
    undefined_reason: dict[str, str] = field(default_factory=dict)


def aggregate(
    scores: ScoreTable,
    scales: ScaleSpec,
    weighting: str = "unweighted",
) -> AggregateResult:
    """Normalize each dataset's score to 0-100 and average per model."""
    if weighting not in ("unweighted", "instance_weighted"):
        raise CoreliteError(f"unknown weighting {weighting!r}")
    if not scores.entries:
        raise CoreliteError("score table is empty")

    per_model: dict[str, float] = {}
    for model in scores.models():
        datasets = sorted(d for m, d in scores.entries if m == model)
        normalized = []
        weights = []
        for dataset in datasets:
            raw = scores.entries[(model, dataset)]
            normalized.append(
                normalize_score(raw, resolve_scale(scales, dataset, raw))
            )
            if weighting == "instance_weighted":
                key = (model, dataset)
                if key not in scores.counts:
                    raise CoreliteError(
                        f"instance-weighted aggregation needs a count for {key}"
                    )
                weights.append(scores.counts[key])
        if weighting == "instance_weighted":
            total = sum(weights)
            value = sum(w * v for w, v in zip(weights, normalized)) / total
        else:
            value = sum(normalized) / len(normalized)
        per_model[model] = value
    return AggregateResult(per_model, weighting)


def pearson(x, y) -> float:
    """Product-moment correlation with 64-bit accumulation."""
    x = np.asarray(list(x), dtype=np.float64)
    y = np.asarray(list(y), dtype=np.float64)
    if x.shape != y.shape:
        raise CoreliteError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise CoreliteError("correlation needs at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise CoreliteError("undefined correlation: constant input")
    return float(xc @ yc) / denom


def _average_ranks(v: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties assigned the mean of their rank range."""
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    sorted_v = v[order]
    i = 0
    while i < v.size:
        j = i
        while j < v.size and sorted_v[j] == sorted_v[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: pearson over average-ranked data."""
    x = np.asarray(list(x), dtype=np.float64)
    y = np.asarray(list(y), dtype=np.float64)
    if x.shape != y.shape:
        raise CoreliteError(f"length mismatch: {x.size} vs {y.size}")
    return pearson(_average_ranks(x), _average_ranks(y))


_METHODS = {"pearson": pearson, "spearman": spearman}


def correlate_lite(
    full: ScoreTable, lite: ScoreTable, method: str = "pearson"
) -> CorrelationResult:
    """Per-dataset correlation between full-set and lite-set model scores."""
    if method not in _METHODS:
        raise CoreliteError(f"unknown method {method!r}")
    estimator = _METHODS[method]

    datasets = sorted(set(full.datasets()) & set(lite.datasets()))
    per_dataset: dict[str, float | None] = {}
    sample_count: dict[str, int] = {}
    undefined_reason: dict[str, str] = {}
    for dataset in datasets:
        models = sorted(
            {m for m, d in full.entries if d == dataset}
            & {m for m, d in lite.entries if d == dataset}
        )
        sample_count[dataset] = len(models)
        if len(models) < 2:
            per_dataset[dataset] = None
            undefined_reason[dataset] = (
                f"only {len(models)} shared model(s); need at least 2"
            )
            continue
        xs = [full.entries[(m, dataset)] for m in models]
        ys = [lite.entries[(m, dataset)] for m in models]
        try:
            per_dataset[dataset] = estimator(xs, ys)
        except CoreliteError as exc:
            per_dataset[dataset] = None
            undefined_reason[dataset] = str(exc)
    return CorrelationResult(per_dataset, method, sample_count, undefined_reason)
