#!/usr/bin/env python3
"""End-to-end demo on synthetic data: select a lite subset, check its score
gap, scan for text/image contamination, then aggregate and correlate scores.

Usage: python3 scripts/demo_pipeline.py [workdir]
"""

import json
import random
import sys
from pathlib import Path

import numpy as np

from corelite.cli import main as corelite
from corelite.corpus import EmbeddingMatrix, save_embeddings


def make_inputs(work: Path, n: int = 2000, d: int = 64) -> None:
    rng = np.random.default_rng(0)
    prng = random.Random(0)

    # Clustered embeddings so the coreset has structure to exploit.
    centers = rng.standard_normal((8, d)) * 4.0
    assignment = rng.integers(0, 8, size=n)
    data = (centers[assignment] + rng.standard_normal((n, d))).astype(np.float32)
    ids = tuple(f"inst{i:05d}" for i in range(n))
    save_embeddings(EmbeddingMatrix(ids, data), work / "emb.bin", work / "emb.ids")

    # Per-instance scores correlated with cluster identity.
    with open(work / "instance_scores.csv", "w") as fh:
        fh.write("model,dataset,score\n")
        for i, inst_id in enumerate(ids):
            base = 30.0 + 8.0 * assignment[i]
            fh.write(f"m,{inst_id},{base + rng.normal(0, 3):.3f}\n")

    vocab = [f"tok{i}" for i in range(3000)]
    train_docs = [
        {"id": f"train{i}", "text": " ".join(prng.choices(vocab, k=40))}
        for i in range(400)
    ]
    bench_docs = [
        {"id": f"bench{i}", "text": " ".join(prng.choices(vocab, k=40))}
        for i in range(90)
    ]
    bench_docs += [
        {"id": f"leak{i}", "text": train_docs[i]["text"]} for i in range(10)
    ]
    for name, docs in (("train_text.jsonl", train_docs), ("bench_text.jsonl", bench_docs)):
        with open(work / name, "w") as fh:
            for doc in docs:
                fh.write(json.dumps(doc) + "\n")

    train_imgs = [
        {"id": f"timg{i}", "tokens": [prng.randrange(4096) for _ in range(32)]}
        for i in range(300)
    ]
    bench_imgs = [
        {"id": f"bimg{i}", "tokens": [prng.randrange(4096) for _ in range(28)] + train_imgs[i]["tokens"][:4]}
        for i in range(95)
    ]
    bench_imgs += [{"id": f"dupimg{i}", "tokens": train_imgs[i]["tokens"]} for i in range(5)]
    for name, seqs in (("train_img.jsonl", train_imgs), ("bench_img.jsonl", bench_imgs)):
        with open(work / name, "w") as fh:
            for seq in seqs:
                fh.write(json.dumps(seq) + "\n")

    # Model-level score tables for aggregation/correlation.
    models = [f"model{i}" for i in range(6)]
    datasets = {"ai2d": (0, 100), "chartqa": (0, 100), "mme": (0, 2800)}
    with open(work / "scales.json", "w") as fh:
        json.dump({"mme": {"min": 0, "max": 2800}}, fh)
    for name, noise in (("full_scores.csv", 0.0), ("lite_scores.csv", 1.5)):
        with open(work / name, "w") as fh:
            fh.write("model,dataset,score\n")
            for mi, model in enumerate(models):
                for ds, (lo, hi) in datasets.items():
                    value = lo + (hi - lo) * (0.3 + 0.1 * mi) + rng.normal(0, noise * (hi - lo) / 100)
                    fh.write(f"{model},{ds},{value:.2f}\n")


def run(argv) -> None:
    print("+ corelite " + " ".join(argv))
    rc = corelite(argv)
    if rc != 0:
        sys.exit(rc)


def main_demo() -> None:
    work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
    work.mkdir(parents=True, exist_ok=True)
    make_inputs(work)

    run(["select", "--embeddings", str(work / "emb.bin"),
         "--ids", str(work / "emb.ids"), "--k", "200", "--seed", "0",
         "--out", str(work / "selection.json")])
    run(["gap", "--scores", str(work / "instance_scores.csv"),
         "--selection", str(work / "selection.json"),
         "--out", str(work / "gap.json")])
    run(["index-text", "--train", str(work / "train_text.jsonl"),
         "--out", str(work / "text_index.bin")])
    run(["scan-text", "--index", str(work / "text_index.bin"),
         "--bench", str(work / "bench_text.jsonl"),
         "--report", str(work / "text_report.json")])
    run(["index-image", "--train", str(work / "train_img.jsonl"),
         "--out", str(work / "image_index.bin")])
    run(["scan-image", "--index", str(work / "image_index.bin"),
         "--bench", str(work / "bench_img.jsonl"),
         "--report", str(work / "image_report.json")])
    run(["aggregate", "--scores", str(work / "full_scores.csv"),
         "--scales", str(work / "scales.json"),
         "--out", str(work / "aggregate.json")])
    run(["correlate", "--full", str(work / "full_scores.csv"),
         "--lite", str(work / "lite_scores.csv"),
         "--out", str(work / "correlation.json")])

    sel = json.loads((work / "selection.json").read_text())
    gap = json.loads((work / "gap.json").read_text())
    corr = json.loads((work / "correlation.json").read_text())
    print(f"\ncoverage radius @ k={sel['k']}: {sel['coverage_radius']:.4f}")
    print(f"subset gap: {gap['gap']:.4f} (full mean {gap['full_mean']:.2f})")
    print(f"lite-vs-full correlations: {corr['per_dataset']}")
    print(f"outputs in {work}/")


if __name__ == "__main__":
    main_demo()
