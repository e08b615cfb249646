"""Seeded synthetic corpus for demos and end-to-end tests.

Generates, deterministically from one seed, every input the pipeline
consumes: a web-search manifest with planted cross-category overlap,
train/test signature files with planted near-duplicates straddling the
purge threshold, a score pool with ground truth, golden pools, synthetic
predictions whose errors concentrate inside genera, a taxonomy, a
data-worth curve, and a ready-to-run config.
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .catalog import Category, ImageRecord, SearchManifest, save_categories, save_manifest
from .dedup import BinarySignature, write_signatures
from .sampler import ScoreMatrix, save_scores

GENERA = ("Corvus", "Larus", "Parus", "Turdus")
EPITHETS = ("alpha", "bravo", "charlie")

_FIXED_FETCH = datetime(2016, 3, 1, tzinfo=timezone.utc)


def _categories() -> list[Category]:
    cats = []
    for g, genus in enumerate(GENERA):
        for e, epithet in enumerate(EPITHETS):
            k = g * len(EPITHETS) + e
            cats.append(Category(f"sp{k:02d}", f"{genus} {epithet}", "bird"))
    return cats


def _flip_bits(bits: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    out = bits.copy()
    if k:
        out[rng.choice(bits.shape[0], size=k, replace=False)] ^= 1
    return out


def generate_corpus(
    out_dir: str | Path,
    seed: int,
    *,
    images_per_category: int = 30,
    shared_images: int = 10,
    pool_size: int = 360,
    test_images: int = 36,
    eval_rows_per_category: int = 8,
    width: int = 256,
) -> dict[str, Path]:
    """Write the full corpus into ``out_dir``; returns the path map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    pyrng = random.Random(seed)
    cats = _categories()
    paths: dict[str, Path] = {}

    paths["categories"] = out / "categories.tsv"
    save_categories(cats, paths["categories"])

    # --- web-search manifest with cross-category overlap ------------------
    records = []
    shared_pool = [f"web-shared{j:03d}" for j in range(shared_images)]
    own_images: dict[str, list[str]] = {}
    for cat in cats:
        ids = [f"web-{cat.id}-{j:03d}" for j in range(images_per_category - 2)]
        ids += pyrng.sample(shared_pool, 2)  # every category lists 2 shared images
        own_images[cat.id] = ids
        for rank, image_id in enumerate(ids):
            title = f"{cat.display_name} in the wild" if rank % 3 == 0 else None
            records.append(ImageRecord(
                image_id=image_id,
                url=f"http://images.example/{image_id}",
                category=cat,
                rank=rank,
                title=title,
            ))
    manifest = SearchManifest(domain="bird", records=tuple(records), fetched_at=_FIXED_FETCH)
    paths["manifest"] = out / "manifest.jsonl"
    save_manifest(manifest, paths["manifest"])

    # --- signatures: test set, then train with planted near-duplicates ----
    test_sigs = []
    test_bits = rng.integers(0, 2, size=(test_images, width), dtype=np.uint8)
    for j in range(test_images):
        test_sigs.append(BinarySignature.from_bits(f"test-{j:03d}", test_bits[j]))
    paths["test_signatures"] = out / "test.sig"
    write_signatures(paths["test_signatures"], test_sigs)

    # plant leaks on single-category images so filtering alone cannot save us;
    # distances straddle the threshold: 0/5/12/18 purged, 19 must survive
    plant_distances = [0, 5, 12, 18, 19]
    planted = {
        own_images[cats[i].id][0]: (dist, i % test_images)
        for i, dist in enumerate(plant_distances)
    }
    train_sigs = []
    all_web_ids = sorted({rec.image_id for rec in records})
    for image_id in all_web_ids:
        if image_id in planted:
            dist, test_index = planted[image_id]
            bits = _flip_bits(test_bits[test_index], dist, rng)
        else:
            bits = rng.integers(0, 2, size=width, dtype=np.uint8)
        train_sigs.append(BinarySignature.from_bits(image_id, bits))
    paths["train_signatures"] = out / "train.sig"
    write_signatures(paths["train_signatures"], train_sigs)

    # --- unlabeled pool scores with known truth ---------------------------
    class_ids = [c.id for c in cats]
    pool_ids = [f"pool-{j:04d}" for j in range(pool_size)]
    truth: dict[str, str | None] = {}
    matrix = rng.normal(0.0, 1.0, size=(pool_size, len(cats)))
    for i, image_id in enumerate(pool_ids):
        if pyrng.random() < 0.15:
            truth[image_id] = None  # out-of-domain junk in the pool
        else:
            cls = pyrng.randrange(len(cats))
            truth[image_id] = class_ids[cls]
            matrix[i, cls] += 2.5  # confident signal for the true class
    scores = ScoreMatrix(pool_ids, class_ids, matrix)
    paths["scores"] = out / "scores.bin"
    save_scores(scores, paths["scores"])
    paths["truth"] = out / "truth.json"
    paths["truth"].write_text(json.dumps(truth, indent=2, sort_keys=True), encoding="utf-8")

    # --- golden pools ------------------------------------------------------
    goldens = {
        cat.id: (
            [[f"gold-{cat.id}-t{j}", True] for j in range(6)]
            + [[f"gold-{cat.id}-f{j}", False] for j in range(3)]
        )
        for cat in cats
    }
    paths["goldens"] = out / "goldens.json"
    paths["goldens"].write_text(json.dumps(goldens, indent=2, sort_keys=True), encoding="utf-8")

    # urls for everything the annotation API may serve
    pool_urls = {img: f"http://images.example/{img}" for img in pool_ids}
    for pairs in goldens.values():
        for img, _ in pairs:
            pool_urls[img] = f"http://images.example/{img}"
    paths["pool_urls"] = out / "pool_urls.json"
    paths["pool_urls"].write_text(json.dumps(pool_urls, indent=2, sort_keys=True),
                                  encoding="utf-8")

    # --- synthetic predictions: errors concentrate within the genus -------
    pred_lines = [json.dumps({"classes": class_ids})]
    for c, cat in enumerate(cats):
        genus = c // len(EPITHETS)
        siblings = [k for k in range(len(cats))
                    if k != c and k // len(EPITHETS) == genus]
        for j in range(eval_rows_per_category):
            roll = pyrng.random()
            if roll < 0.7:
                predicted = c
            elif roll < 0.9:
                predicted = pyrng.choice(siblings)
            else:
                predicted = pyrng.choice([k for k in range(len(cats)) if k != c])
            row_scores = [round(pyrng.uniform(0.0, 0.3), 6) for _ in cats]
            row_scores[predicted] = round(pyrng.uniform(0.7, 1.0), 6)
            pred_lines.append(json.dumps({
                "image_id": f"ev-{cat.id}-{j:02d}",
                "true_class": cat.id,
                "scores": row_scores,
            }))
    paths["predictions"] = out / "predictions.jsonl"
    paths["predictions"].write_text("\n".join(pred_lines) + "\n", encoding="utf-8")

    # --- taxonomy: species -> genus -> family -> class --------------------
    tax_lines = ["tax-root\tBirds\tclass\t-"]
    for f in range(2):
        tax_lines.append(f"fam{f}\tFamily {f}\tfamily\ttax-root")
    for g, genus in enumerate(GENERA):
        tax_lines.append(f"gen{g}\t{genus}\tgenus\tfam{g // 2}")
    for c, cat in enumerate(cats):
        tax_lines.append(f"{cat.id}\t{cat.display_name}\tspecies\tgen{c // len(EPITHETS)}")
    paths["taxonomy"] = out / "taxonomy.tsv"
    paths["taxonomy"].write_text("\n".join(tax_lines) + "\n", encoding="utf-8")

    # --- data-worth curve: crosses the baseline exactly at 1200 -----------
    paths["worth_curve"] = out / "worth_curve.csv"
    paths["worth_curve"].write_text(
        "web_images_used,accuracy\n300,0.50\n600,0.70\n1200,0.80\n2400,0.85\n",
        encoding="utf-8",
    )

    # --- run config --------------------------------------------------------
    config = {
        "seed": seed,
        "out_dir": str(out / "run"),
        "paths": {
            "manifest": str(paths["manifest"]),
            "categories": str(paths["categories"]),
            "train_signatures": str(paths["train_signatures"]),
            "test_signatures": str(paths["test_signatures"]),
            "scores": str(paths["scores"]),
            "goldens": str(paths["goldens"]),
            "pool_urls": str(paths["pool_urls"]),
            "predictions": str(paths["predictions"]),
            "taxonomy": str(paths["taxonomy"]),
            "worth_curve": str(paths["worth_curve"]),
        },
        "filter": {"identity_mode": "exact", "r_dup": 4},
        "dedup": {"width": width, "chunks": 32, "r_max": 31, "threshold": 18},
        "sampler": {"prior": "uniform", "budget": 60, "round_multiplier": 10, "rounds": 1},
        "annotate": {"golden_rate": 0.1, "port": 8787},
        "eval": {
            "metrics": ["top1", "map", "confusion", "lca", "worth"],
            "worth_gt_size": 600,
            "worth_gt_accuracy": 0.8,
        },
    }
    paths["config"] = out / "config.yaml"
    paths["config"].write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    return paths
