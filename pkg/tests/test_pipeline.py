import json

import pytest

from webcurate.catalog import load_manifest
from webcurate.cli import main
from webcurate.dedup import read_signatures
from webcurate.errors import ValidationError
from webcurate.pipeline import RunConfig, build_annotation_store, run
from webcurate.synthcorpus import generate_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return generate_corpus(out, seed=7)


def load_config(corpus, out_dir):
    return RunConfig.load(corpus["config"], {"out_dir": str(out_dir)})


def test_corpus_generation_is_deterministic(tmp_path):
    a = generate_corpus(tmp_path / "a", seed=7)
    b = generate_corpus(tmp_path / "b", seed=7)
    for key in a:
        if key == "config":
            continue  # config embeds its own absolute paths
        assert a[key].read_bytes() == b[key].read_bytes(), key


def test_ingest_records_artifact(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    artifacts = run(cfg, ["ingest"])
    assert len(artifacts) == 1
    art = artifacts[0]
    assert art.stage == "ingest"
    assert any(k.startswith("file:manifest") for k in art.input_digests)
    assert (tmp_path / "run" / "ingested.jsonl").exists()
    stats = json.loads((tmp_path / "run" / "corpus_stats.json").read_text())
    assert stats["total_categories"] == 12


def test_stage_caching_skips_clean_stages(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    first = run(cfg, ["ingest", "filter"])
    assert all(not a.cached for a in first)
    second = run(cfg, ["ingest", "filter"])
    assert all(a.cached for a in second)
    forced = run(cfg, ["ingest"], force=True)
    assert not forced[0].cached


def test_missing_upstream_stage_is_named(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    with pytest.raises(ValidationError, match="ingest"):
        run(cfg, ["filter"])


def test_threshold_above_r_max_rejected_before_running(corpus, tmp_path):
    raw = dict(
        seed=1, out_dir=str(tmp_path / "run"),
        paths={"manifest": str(corpus["manifest"])},
        dedup={"chunks": 32, "r_max": 10, "threshold": 18},
    )
    cfg = RunConfig.from_dict(raw)
    with pytest.raises(ValidationError, match="r_max"):
        run(cfg, ["ingest"])
    assert not (tmp_path / "run" / "ingested.jsonl").exists()


def test_config_requires_seed(corpus):
    with pytest.raises(ValidationError, match="seed"):
        RunConfig.from_dict({"paths": {}})


def test_full_pipeline_deterministic_and_purged(corpus, tmp_path):
    cfg_a = load_config(corpus, tmp_path / "run_a")
    cfg_b = load_config(corpus, tmp_path / "run_b")
    artifacts_a = run(cfg_a)
    artifacts_b = run(cfg_b)
    assert [a.stage for a in artifacts_a] == list(
        ("ingest", "filter", "dedup", "sample", "export", "eval")
    )
    export_a = (tmp_path / "run_a" / "export.jsonl").read_bytes()
    export_b = (tmp_path / "run_b" / "export.jsonl").read_bytes()
    assert export_a == export_b
    digests_a = {a.stage: a.output_digests for a in artifacts_a}
    digests_b = {b.stage: b.output_digests for b in artifacts_b}
    assert digests_a == digests_b

    purge = json.loads((tmp_path / "run_a" / "purge_report.json").read_text())
    exported_ids = {
        json.loads(line)["image_id"]
        for line in export_a.decode().splitlines()
    }
    # the planted leaks at distance 0/5/12/18 are gone, the 19 survives
    assert len(purge["removed_ids"]) == 4
    assert set(purge["removed_ids"]) & exported_ids == set()
    assert "web-sp04-000" in exported_ids  # planted at distance 19: kept


def test_export_set_algebra(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    run(cfg)
    filtered = load_manifest(tmp_path / "run" / "filtered.jsonl")
    purge = json.loads((tmp_path / "run" / "purge_report.json").read_text())
    expected = {
        (rec.category.id, rec.image_id)
        for rec in filtered.records
        if rec.image_id not in set(purge["removed_ids"])
    }
    exported = {
        (obj["category_id"], obj["image_id"])
        for obj in map(json.loads, (tmp_path / "run" / "export.jsonl").read_text().splitlines())
    }
    assert exported == expected


def test_filter_report_drops_shared_images(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    run(cfg, ["ingest", "filter"])
    report = json.loads((tmp_path / "run" / "filter_report.json").read_text())
    assert all(img.startswith("web-shared") for img in report["removed"])
    # every shared id picked by >= 2 categories is out
    manifest = load_manifest(tmp_path / "run" / "ingested.jsonl")
    cats_of = {}
    for rec in manifest.records:
        cats_of.setdefault(rec.image_id, set()).add(rec.category.id)
    expected_removed = {i for i, cs in cats_of.items() if len(cs) > 1}
    assert set(report["removed"]) == expected_removed


def test_eval_report_contents(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    run(cfg, ["eval"])
    report = json.loads((tmp_path / "run" / "eval_report.json").read_text())
    assert 0.4 < report["top1_accuracy"] <= 1.0
    assert 0.0 < report["mean_ap"] <= 1.0
    assert report["data_worth"]["ratio"] == pytest.approx(0.5)
    hist = report["lca_histogram"]
    assert sum(hist.values()) == pytest.approx(1.0)
    assert hist.get("genus", 0) > hist.get("class", 0)  # errors planted mostly in-genus
    assert (tmp_path / "run" / "confusion.csv").exists()
    assert (tmp_path / "run" / "lca_histogram.csv").exists()


def test_annotation_store_from_pipeline(corpus, tmp_path):
    cfg = load_config(corpus, tmp_path / "run")
    run(cfg, ["sample"])
    store = build_annotation_store(cfg, data_dir=tmp_path / "run" / "annotation")
    try:
        batch = store.next_batch("rater-1")
        assert batch is not None
        assert batch["tasks"]
        assert batch["negatives"]
    finally:
        store.close()


def test_export_includes_accepted_annotations(corpus, tmp_path):
    from webcurate.annotate import Judgment

    cfg = load_config(corpus, tmp_path / "run")
    run(cfg, ["ingest", "filter", "dedup", "sample"])
    store = build_annotation_store(cfg)
    accepted_img = None
    try:
        batch = store.next_batch("r1")
        for rater in ("r1", "r2", "r3"):
            store.next_batch(rater)
            for task in batch["tasks"]:
                store.submit(Judgment(task["task_id"], rater, True, 0.5))
        golden_ids = {t.image_id for t in store.tasks if t.is_golden}
        accepted_img = next(t["image_id"] for t in batch["tasks"]
                            if t["image_id"] not in golden_ids)
    finally:
        store.close()
    run(cfg, ["export"])
    rows = [json.loads(line)
            for line in (tmp_path / "run" / "export.jsonl").read_text().splitlines()]
    by_img = {}
    for row in rows:
        by_img.setdefault(row["image_id"], []).extend(row["provenance"])
    assert accepted_img is not None
    assert "annotation" in by_img[accepted_img]
    golden_exported = [img for img in golden_ids if img in by_img]
    assert golden_exported == []


# ---------------------------------------------------------------------------
# export_dataset semantics


def _mini_manifest(assignments):
    from webcurate.catalog import Category, ImageRecord, SearchManifest

    records = []
    for cat_id, image_ids in assignments.items():
        cat = Category(cat_id, f"Species {cat_id}", "bird")
        for rank, image_id in enumerate(image_ids):
            records.append(ImageRecord(image_id, f"http://img/{image_id}", cat, rank))
    return SearchManifest(domain="bird", records=tuple(records))


def _empty_purge(*removed):
    from webcurate.dedup import PurgePair, PurgeReport

    return PurgeReport(
        removed_ids=frozenset(removed),
        pairs=tuple(PurgePair(r, "test-0", 3) for r in sorted(removed)),
        threshold=18,
    )


def test_export_without_annotations_or_purges_is_filtered_set():
    from webcurate.pipeline import export_dataset

    filtered = _mini_manifest({"a": ["x", "y"], "b": ["z"]})
    rows = export_dataset(filtered, _empty_purge())
    assert [(r["category_id"], r["image_id"]) for r in rows] == \
        [("a", "x"), ("a", "y"), ("b", "z")]
    assert all(r["provenance"] == ["web"] for r in rows)


def test_export_purge_wins_over_accepted_annotation():
    from webcurate.pipeline import export_dataset

    filtered = _mini_manifest({"a": ["x"]})
    rows = export_dataset(filtered, _empty_purge("leaky"),
                          annotations={"a": ["leaky", "clean"]})
    ids = {r["image_id"] for r in rows}
    assert "leaky" not in ids
    assert {"x", "clean"} <= ids


def test_export_collisions_keep_provenance():
    from webcurate.pipeline import export_dataset

    filtered = _mini_manifest({"a": ["x"]})
    gt = _mini_manifest({"a": ["x", "gt-only"]})
    rows = export_dataset(filtered, _empty_purge(), gt_manifest=gt)
    by_id = {r["image_id"]: r for r in rows}
    assert by_id["x"]["provenance"] == ["web", "gt"]
    assert by_id["gt-only"]["provenance"] == ["gt"]
    assert len(rows) == 2


def test_ingest_three_line_manifest(tmp_path):
    manifest = tmp_path / "tiny.jsonl"
    manifest.write_text(
        "# manifest domain=bird\n"
        '{"image_id": "i0", "url": "u", "category_id": "c", "rank": 0}\n'
        '{"image_id": "i1", "url": "u", "category_id": "c", "rank": 1}\n'
        '{"image_id": "i2", "url": "u", "category_id": "c", "rank": 2}\n'
    )
    cfg = RunConfig.from_dict({
        "seed": 1,
        "out_dir": str(tmp_path / "run"),
        "paths": {"manifest": str(manifest)},
    })
    artifacts = run(cfg, ["ingest"])
    assert len(artifacts) == 1
    assert artifacts[0].input_digests["file:manifest"]
    assert artifacts[0].output_digests["file:ingested"]


# ---------------------------------------------------------------------------
# CLI


def test_cli_synth_and_run(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "data"), "--seed", "3"]) == 0
    config = tmp_path / "data" / "config.yaml"
    code = main(["--config", str(config), "--out", str(tmp_path / "out"), "run"])
    out = capsys.readouterr().out
    assert code == 0
    assert "export" in out
    assert (tmp_path / "out" / "export.jsonl").exists()


def test_cli_exit_codes(tmp_path):
    assert main(["--config", str(tmp_path / "missing.yaml"), "ingest"]) == 1  # validation
    assert main(["ingest"]) == 1  # no config at all
    assert main(["dedup", "query", "--index", "nope.npz"]) == 2  # runtime: unreadable file


def test_cli_dedup_round_trip(tmp_path, capsys):
    import numpy as np

    from webcurate.dedup import BinarySignature, write_signatures

    rng = np.random.default_rng(0)
    sigs = [BinarySignature(f"s{i}", rng.integers(0, 256, 32, dtype=np.uint8))
            for i in range(20)]
    sig_path = tmp_path / "sigs.bin"
    write_signatures(sig_path, sigs)
    index_path = tmp_path / "index.npz"
    assert main(["dedup", "build", "--signatures", str(sig_path),
                 "--out", str(index_path)]) == 0
    capsys.readouterr()
    assert main(["dedup", "query", "--index", str(index_path),
                 "--probe-id", "s3", "-r", "0"]) == 0
    hits = json.loads(capsys.readouterr().out)
    assert hits == [{"image_id": "s3", "distance": 0}]
    assert main(["dedup", "purge", "--train", str(sig_path), "--test", str(sig_path),
                 "--threshold", "0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["removed_ids"]) == 20  # every signature matches itself


def test_cli_audit(tmp_path, capsys):
    main(["synth", "--out", str(tmp_path / "data"), "--seed", "5"])
    config = tmp_path / "data" / "config.yaml"
    capsys.readouterr()
    code = main(["--config", str(config), "--out", str(tmp_path / "out"),
                 "audit", "--n", "50"])
    assert code == 0
    audit = json.loads((tmp_path / "out" / "noise_audit.json").read_text())
    assert len(audit["sample"]) == 50
    judgments = {img: ("cross_domain" if k < 10 else "in_domain")
                 for k, img in enumerate(audit["sample"])}
    jpath = tmp_path / "judgments.json"
    jpath.write_text(json.dumps(judgments))
    code = main(["--config", str(config), "--out", str(tmp_path / "out"),
                 "audit", "--n", "50", "--judgments", str(jpath)])
    out = capsys.readouterr().out
    assert code == 0
    assert "20.0%" in out
