"""Command-line front end: select, gap, index/scan, aggregate, correlate.

Every subcommand writes its primary output plus a run manifest recording the
resolved parameters, input digests, and tool version, so identical inputs
reproduce byte-identical outputs.

Exit codes: 0 success, 1 data/content error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import CoreliteError, __version__
from . import coreset, decontam, scoring
from .corpus import (
    EmbeddingMatrix,
    ScaleSpec,
    load_embeddings,
    load_scores,
    load_text_corpus,
    load_token_corpus,
)


def _workers() -> int:
    raw = os.environ.get("CORELITE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise CoreliteError(f"CORELITE_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise CoreliteError("CORELITE_THREADS must be >= 0")
    return os.cpu_count() or 1 if value == 0 else value


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _sig6(value: float) -> float:
    return float(f"{value:.6g}")


def _write_manifest(out_path, subcommand: str, params: dict, inputs: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "parameters": params,
        "input_digests": {name: _sha256(p) for name, p in sorted(inputs.items())},
    }
    _write_json(f"{out_path}.manifest.json", manifest)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be ≥ 1")
    return value


def _report_to_json(report: decontam.OverlapReport) -> dict:
    return {
        "per_instance": {
            inst_id: {
                "text_hit": inst.text_hit,
                "image_hit": inst.image_hit,
                "exact_image": inst.exact_image,
                "category": inst.category.value,
                "matched_windows": inst.matched_windows,
            }
            for inst_id, inst in report.per_instance.items()
        },
        "text_overlap_pct": report.text_overlap_pct,
        "image_overlap_pct": report.image_overlap_pct,
    }


def _row_normalize(emb: EmbeddingMatrix) -> EmbeddingMatrix:
    norms = np.linalg.norm(emb.data.astype(np.float64), axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return EmbeddingMatrix(emb.ids, (emb.data / safe).astype(np.float32))


def cmd_select(args) -> int:
    emb = load_embeddings(args.embeddings, args.ids)
    if args.k is None:
        if args.dataset is None:
            raise CoreliteError("either --k or --dataset is required")
        key = args.dataset.lower()
        if key not in coreset.LITE_K_DEFAULTS:
            raise CoreliteError(f"no default lite size for dataset {args.dataset!r}")
        k = coreset.LITE_K_DEFAULTS[key]
    else:
        k = args.k
    if args.normalize:
        emb = _row_normalize(emb)
    sel = coreset.k_center_greedy(emb, k, seed=args.seed, workers=_workers())
    _write_json(
        args.out,
        {
            "k": sel.k,
            "seed": sel.seed,
            "metric": sel.metric,
            "coverage_radius": sel.coverage_radius,
            "center_indices": list(sel.center_indices),
            "center_ids": [emb.ids[i] for i in sel.center_indices],
        },
    )
    _write_manifest(
        args.out,
        "select",
        {"k": k, "seed": args.seed, "normalize": args.normalize, "metric": "l2"},
        {"embeddings": args.embeddings, "ids": args.ids},
    )
    return 0


def _load_instance_scores(path) -> tuple[list[str], list[float]]:
    """Per-instance scores in file order: a one-model table with dataset = instance id."""
    load_scores(path)  # full validation with the shared rules
    ids: list[str] = []
    values: list[float] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            ids.append(row[1])
            values.append(float(row[2]))
    return ids, values


def cmd_gap(args) -> int:
    ids, values = _load_instance_scores(args.scores)
    with open(args.selection, encoding="utf-8") as fh:
        sel = json.load(fh)
    positions = {inst_id: i for i, inst_id in enumerate(ids)}
    subset = []
    for inst_id in sel["center_ids"]:
        if inst_id not in positions:
            raise CoreliteError(f"selected id {inst_id!r} not present in scores")
        subset.append(positions[inst_id])
    gap = coreset.subset_gap(values, subset)
    _write_json(
        args.out,
        {
            "full_mean": gap.full_mean,
            "subset_mean": gap.subset_mean,
            "gap": gap.gap,
            "subset_size": len(subset),
            "total": len(values),
        },
    )
    _write_manifest(
        args.out, "gap", {}, {"scores": args.scores, "selection": args.selection}
    )
    print(f"gap={gap.gap}")
    return 0


def cmd_index_text(args) -> int:
    train = load_text_corpus(args.train)
    index = decontam.build_text_index(
        train, n=args.n, freq_threshold=args.freq_threshold, hashed=args.hashed
    )
    decontam.save_index(index, args.out)
    _write_manifest(
        args.out,
        "index-text",
        {"n": args.n, "freq_threshold": args.freq_threshold, "hashed": args.hashed},
        {"train": args.train},
    )
    return 0


def cmd_scan_text(args) -> int:
    index = decontam.load_index(args.index)
    if not isinstance(index, decontam.TextNGramIndex):
        raise CoreliteError(f"{args.index}: not a text index")
    if args.n is not None and args.n != index.n:
        raise CoreliteError(
            f"index was built with n={index.n}, scan requested n={args.n}"
        )
    bench = load_text_corpus(args.bench)
    report = decontam.scan_text(bench, index, ratio_threshold=args.ratio_threshold)
    _write_json(args.report, _report_to_json(report))
    _write_manifest(
        args.report,
        "scan-text",
        {"ratio_threshold": args.ratio_threshold, "n": index.n},
        {"index": args.index, "bench": args.bench},
    )
    print(f"text_overlap_pct={report.text_overlap_pct}")
    return 0


def cmd_index_image(args) -> int:
    train = load_token_corpus(args.train)
    index = decontam.build_image_index(train, hashed=args.hashed)
    decontam.save_index(index, args.out)
    _write_manifest(
        args.out, "index-image", {"n": 8, "hashed": args.hashed}, {"train": args.train}
    )
    return 0


def cmd_scan_image(args) -> int:
    index = decontam.load_index(args.index)
    if not isinstance(index, decontam.ImageNGramIndex):
        raise CoreliteError(f"{args.index}: not an image index")
    bench = load_token_corpus(args.bench)
    report = decontam.scan_image(bench, index)
    _write_json(args.report, _report_to_json(report))
    _write_manifest(
        args.report,
        "scan-image",
        {"n": index.n},
        {"index": args.index, "bench": args.bench},
    )
    print(f"image_overlap_pct={report.image_overlap_pct}")
    return 0


def cmd_aggregate(args) -> int:
    scores = load_scores(args.scores)
    scales = scoring.load_scales(args.scales) if args.scales else ScaleSpec({})
    weighting = "instance_weighted" if args.weighted else "unweighted"
    result = scoring.aggregate(scores, scales, weighting)
    _write_json(
        args.out,
        {
            "weighting": result.weighting,
            "per_model": {m: _sig6(v) for m, v in result.per_model.items()},
        },
    )
    inputs = {"scores": args.scores}
    if args.scales:
        inputs["scales"] = args.scales
    _write_manifest(args.out, "aggregate", {"weighted": args.weighted}, inputs)
    return 0


def cmd_correlate(args) -> int:
    full = load_scores(args.full)
    lite = load_scores(args.lite)
    result = scoring.correlate_lite(full, lite, method=args.method)
    _write_json(
        args.out,
        {
            "method": result.method,
            "per_dataset": {
                d: (None if r is None else _sig6(r))
                for d, r in result.per_dataset.items()
            },
            "sample_count": result.sample_count,
            "undefined_reason": result.undefined_reason,
        },
    )
    _write_manifest(
        args.out,
        "correlate",
        {"method": args.method},
        {"full": args.full, "lite": args.lite},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corelite",
        description="Lite benchmark selection, contamination scanning, score aggregation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="k-center greedy coreset selection")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--ids", required=True)
    p.add_argument("--k", type=_positive_int, metavar="K",
                   help="number of centers (must be ≥ 1)")
    p.add_argument("--dataset", help="use the default lite size for this dataset")
    p.add_argument("--seed", type=int, default=0)
    norm = p.add_mutually_exclusive_group()
    norm.add_argument("--normalize", dest="normalize", action="store_true",
                      default=True)
    norm.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("gap", help="subset gap between full and selected means")
    p.add_argument("--scores", required=True)
    p.add_argument("--selection", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("index-text", help="build a text 8-gram index")
    p.add_argument("--train", required=True)
    p.add_argument("--n", type=_positive_int, default=8)
    p.add_argument("--freq-threshold", type=_positive_int, default=10)
    p.add_argument("--hashed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_text)

    p = sub.add_parser("scan-text", help="scan a benchmark for text overlap")
    p.add_argument("--index", required=True)
    p.add_argument("--bench", required=True)
    p.add_argument("--n", type=_positive_int, help="assert the index n")
    p.add_argument("--ratio-threshold", type=float, default=0.75)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_scan_text)

    p = sub.add_parser("index-image", help="build an image-token 8-gram index")
    p.add_argument("--train", required=True)
    p.add_argument("--hashed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index_image)

    p = sub.add_parser("scan-image", help="scan a benchmark for image overlap")
    p.add_argument("--index", required=True)
    p.add_argument("--bench", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_scan_image)

    p = sub.add_parser("aggregate", help="normalize and average scores per model")
    p.add_argument("--scores", required=True)
    p.add_argument("--scales")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("correlate", help="lite-vs-full per-dataset correlation")
    p.add_argument("--full", required=True)
    p.add_argument("--lite", required=True)
    p.add_argument("--method", choices=("pearson", "spearman"), default="pearson")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CoreliteError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"corelite: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
