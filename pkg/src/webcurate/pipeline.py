"""Staged pipeline: ingest -> filter -> dedup -> sample -> export -> eval.

Each stage records a run artifact (input/output content digests, wall
time, tool version) and is skipped on re-run when its input digests
still match, so multi-million-row corpora only pay for what changed.
Identical config + inputs + seed reproduce byte-identical exports; the
export stage re-verifies as a final assertion that nothing within the
purge threshold of a test signature survived.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import yaml

from . import __version__
from .annotate import aggregate_votes, export_positives, load_tasks, read_judgment_log
from .catalog import (
    SearchManifest,
    corpus_stats,
    load_categories,
    load_manifest,
    save_manifest,
)
from .crossfilter import FilterReport, filter_cross_category
from .dedup import (
    DedupIndex,
    PurgeReport,
    purge_train_vs_test,
    read_signatures,
)
from .errors import ValidationError, WebcurateError
from .evalkit import (
    AP_DEFINITION,
    confusion_matrix,
    curve_csv,
    histogram_csv,
    lca_histogram,
    load_predictions,
    load_taxonomy,
    load_worth_curve,
    mean_ap,
    top1_accuracy,
    worth_estimate,
)
from .sampler import (
    ClassPrior,
    SamplingBudget,
    SelectionResult,
    load_scores,
    select_confident,
)

BATCH_STAGES = ("ingest", "filter", "dedup", "sample", "export", "eval")

_PATH_KEYS = (
    "manifest", "categories", "train_signatures", "test_signatures", "scores",
    "goldens", "pool_urls", "predictions", "taxonomy", "worth_curve",
    "gt_manifest", "judgments", "tasks",
)


@dataclass
class RunConfig:
    seed: int
    out_dir: Path
    paths: dict[str, Path | None]
    filter_identity_mode: str = "exact"
    filter_r_dup: int = 4
    dedup_width: int = 256
    dedup_chunks: int = 32
    dedup_r_max: int | None = None
    dedup_threshold: int = 18
    sampler_prior: object = "uniform"  # "uniform", inline {class: weight}, or a json path
    sampler_budget: int = 0
    sampler_round_multiplier: float = 10.0
    sampler_rounds: int = 1
    annotate_golden_rate: float = 0.1
    annotate_port: int = 8787
    eval_metrics: tuple[str, ...] = ("top1", "map", "confusion", "lca")
    eval_worth_gt_size: int | None = None
    eval_worth_gt_accuracy: float | None = None

    @classmethod
    def load(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file not found: {path}")
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if overrides:
            for key, value in overrides.items():
                if value is None:
                    continue
                raw[key] = value
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if "seed" not in raw or raw["seed"] is None:
            raise ValidationError("config must set an explicit integer seed")
        paths_raw = raw.get("paths", {}) or {}
        unknown = set(paths_raw) - set(_PATH_KEYS)
        if unknown:
            raise ValidationError(f"unknown path keys in config: {sorted(unknown)}")
        paths = {
            key: (Path(paths_raw[key]) if paths_raw.get(key) else None)
            for key in _PATH_KEYS
        }
        filt = raw.get("filter", {}) or {}
        dedup = raw.get("dedup", {}) or {}
        sampler = raw.get("sampler", {}) or {}
        annotate = raw.get("annotate", {}) or {}
        ev = raw.get("eval", {}) or {}
        return cls(
            seed=int(raw["seed"]),
            out_dir=Path(raw.get("out_dir", "out")),
            paths=paths,
            filter_identity_mode=filt.get("identity_mode", "exact"),
            filter_r_dup=int(filt.get("r_dup", 4)),
            dedup_width=int(dedup.get("width", 256)),
            dedup_chunks=int(dedup.get("chunks", 32)),
            dedup_r_max=None if dedup.get("r_max") is None else int(dedup["r_max"]),
            dedup_threshold=int(dedup.get("threshold", 18)),
            sampler_prior=sampler.get("prior", "uniform"),
            sampler_budget=int(sampler.get("budget", 0)),
            sampler_round_multiplier=float(sampler.get("round_multiplier", 10.0)),
            sampler_rounds=int(sampler.get("rounds", 1)),
            annotate_golden_rate=float(annotate.get("golden_rate", 0.1)),
            annotate_port=int(annotate.get("port", 8787)),
            eval_metrics=tuple(ev.get("metrics", ("top1", "map", "confusion", "lca"))),
            eval_worth_gt_size=ev.get("worth_gt_size"),
            eval_worth_gt_accuracy=ev.get("worth_gt_accuracy"),
        )

    def validate(self) -> None:
        for key, path in self.paths.items():
            if path is not None and not path.exists():
                raise ValidationError(f"configured path {key} does not exist: {path}")
        r_max = self.dedup_r_max if self.dedup_r_max is not None else self.dedup_chunks - 1
        if self.dedup_threshold > r_max:
            raise ValidationError(
                f"dedup threshold {self.dedup_threshold} exceeds index r_max {r_max}"
            )
        if not 1 <= self.sampler_rounds <= 2:
            raise ValidationError(f"sampler rounds must be 1 or 2, got {self.sampler_rounds}")
        if not 0.0 <= self.annotate_golden_rate <= 1.0:
            raise ValidationError("annotate golden_rate must be in [0, 1]")
        if self.sampler_budget < 0:
            raise ValidationError("sampler budget must be >= 0")

    def effective_r_max(self) -> int:
        return self.dedup_r_max if self.dedup_r_max is not None else self.dedup_chunks - 1


@dataclass
class RunArtifact:
    stage: str
    input_digests: dict[str, str]
    output_digests: dict[str, str]
    wall_time_seconds: float
    tool_version: str = __version__
    cached: bool = False

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "input_digests": dict(sorted(self.input_digests.items())),
            "output_digests": dict(sorted(self.output_digests.items())),
            "wall_time_seconds": self.wall_time_seconds,
            "tool_version": self.tool_version,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RunArtifact":
        return cls(
            stage=obj["stage"],
            input_digests=dict(obj["input_digests"]),
            output_digests=dict(obj["output_digests"]),
            wall_time_seconds=float(obj["wall_time_seconds"]),
            tool_version=obj.get("tool_version", "unknown"),
        )


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _config_digest(parts: dict) -> str:
    return hashlib.sha256(
        json.dumps(parts, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


class _Stage:
    """One pipeline stage: named inputs, named outputs, a work function."""

    def __init__(self, name: str, config_slice: Callable[[RunConfig], dict],
                 inputs: Callable[[RunConfig], dict[str, Path]],
                 outputs: Callable[[RunConfig], dict[str, Path]],
                 work: Callable[[RunConfig], None],
                 requires: tuple[str, ...] = ()):
        self.name = name
        self.config_slice = config_slice
        self.inputs = inputs
        self.outputs = outputs
        self.work = work
        self.requires = requires


def _require(cfg: RunConfig, key: str, stage: str) -> Path:
    path = cfg.paths.get(key)
    if path is None:
        raise ValidationError(f"stage {stage!r} needs paths.{key} in the config")
    return path


def _out(cfg: RunConfig, name: str) -> Path:
    return cfg.out_dir / name


def _load_prior(cfg: RunConfig, class_ids: Sequence[str]) -> ClassPrior:
    spec = cfg.sampler_prior
    if spec == "uniform" or spec is None:
        return ClassPrior.uniform(class_ids)
    if isinstance(spec, dict):
        return ClassPrior({str(k): float(v) for k, v in spec.items()})
    weights = json.loads(Path(str(spec)).read_text(encoding="utf-8"))
    return ClassPrior({str(k): float(v) for k, v in weights.items()})


def _load_filtered(cfg: RunConfig, stage: str) -> SearchManifest:
    path = _out(cfg, "filtered.jsonl")
    if not path.exists():
        raise ValidationError(f"stage {stage!r} needs {path}; run the 'filter' stage first")
    return load_manifest(path)


# --------------------------------------------------------------------------
# stage implementations


def _stage_ingest(cfg: RunConfig) -> None:
    manifest_path = _require(cfg, "manifest", "ingest")
    categories = None
    if cfg.paths.get("categories"):
        categories = load_categories(cfg.paths["categories"])
    manifest = load_manifest(manifest_path, categories=categories)
    save_manifest(manifest, _out(cfg, "ingested.jsonl"))
    stats = corpus_stats(manifest)
    _out(cfg, "corpus_stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )


def _stage_filter(cfg: RunConfig) -> None:
    ingested = _out(cfg, "ingested.jsonl")
    if not ingested.exists():
        raise ValidationError("stage 'filter' needs ingested.jsonl; run the 'ingest' stage first")
    manifest = load_manifest(ingested)
    signatures = None
    if cfg.filter_identity_mode == "signature":
        sig_path = _require(cfg, "train_signatures", "filter")
        signatures = {s.image_id: s for s in read_signatures(sig_path)}
    report = filter_cross_category(
        manifest, cfg.filter_identity_mode,
        signatures=signatures, r_dup=cfg.filter_r_dup,
    )
    _out(cfg, "filter_report.json").write_text(report.to_json(), encoding="utf-8")
    _out(cfg, "filter_summary.txt").write_text(report.summary_table() + "\n", encoding="utf-8")
    kept = tuple(rec for rec in manifest.records if rec.image_id in report.retained)
    save_manifest(
        SearchManifest(domain=manifest.domain, records=kept, fetched_at=manifest.fetched_at,
                       per_category_cap=manifest.per_category_cap),
        _out(cfg, "filtered.jsonl"),
    )


def _stage_dedup(cfg: RunConfig) -> None:
    train = read_signatures(_require(cfg, "train_signatures", "dedup"))
    test = read_signatures(_require(cfg, "test_signatures", "dedup"))
    report = purge_train_vs_test(train, test, cfg.dedup_threshold, m=cfg.dedup_chunks)
    _out(cfg, "purge_report.json").write_text(report.to_json(), encoding="utf-8")


def _stage_sample(cfg: RunConfig) -> None:
    scores = load_scores(_require(cfg, "scores", "sample"))
    prior = _load_prior(cfg, scores.class_ids)
    budget = SamplingBudget(b=cfg.sampler_budget,
                            round_multiplier=cfg.sampler_round_multiplier)
    excluded: set[str] = set()
    for round_index in range(cfg.sampler_rounds):
        result = select_confident(scores, prior, budget, excluded=excluded,
                                  round_index=round_index)
        _out(cfg, f"selection_round{round_index + 1}.json").write_text(
            result.to_json(), encoding="utf-8"
        )
        excluded |= result.selected_ids()


def export_dataset(
    filtered: SearchManifest,
    purge: PurgeReport,
    annotations: dict[str, list[str]] | None = None,
    gt_manifest: SearchManifest | None = None,
) -> list[dict]:
    """Assemble the final training rows: (filtered ∪ accepted ∪ gt) minus purged.

    Purging wins over every other source: an image the dedup pass flagged
    never ships, even when annotators accepted it. Identical
    (category, image) rows from different sources collapse into one row
    whose provenance lists every source. Output order is canonical
    (category id, then image id) so identical inputs yield identical bytes.
    """
    records: dict[tuple[str, str], dict] = {}

    def add(category_id: str, image_id: str, url: str, source: str) -> None:
        key = (category_id, image_id)
        row = records.get(key)
        if row is None:
            records[key] = {
                "category_id": category_id,
                "image_id": image_id,
                "url": url,
                "provenance": [source],
            }
        elif source not in row["provenance"]:
            row["provenance"].append(source)
            if not row["url"] and url:
                row["url"] = url

    for rec in filtered.records:
        add(rec.category.id, rec.image_id, rec.url, "web")
    for class_id, image_ids in (annotations or {}).items():
        for image_id in image_ids:
            add(class_id, image_id, "", "annotation")
    if gt_manifest is not None:
        for rec in gt_manifest.records:
            add(rec.category.id, rec.image_id, rec.url, "gt")

    return [
        records[key]
        for key in sorted(records)
        if records[key]["image_id"] not in purge.removed_ids
    ]


def _stage_export(cfg: RunConfig) -> None:
    filtered = _load_filtered(cfg, "export")
    purge_path = _out(cfg, "purge_report.json")
    if not purge_path.exists():
        raise ValidationError("stage 'export' needs purge_report.json; run the 'dedup' stage first")
    purge = PurgeReport.from_dict(json.loads(purge_path.read_text(encoding="utf-8")))

    annotations: dict[str, list[str]] = {}
    tasks_path = cfg.paths.get("tasks") or (cfg.out_dir / "annotation" / "tasks.json")
    judgments_path = cfg.paths.get("judgments") or (cfg.out_dir / "annotation" / "judgments.log")
    if tasks_path.exists() and judgments_path.exists():
        tasks = load_tasks(tasks_path)
        outcomes = aggregate_votes(read_judgment_log(judgments_path))
        annotations = export_positives(outcomes, tasks)

    gt = load_manifest(cfg.paths["gt_manifest"]) if cfg.paths.get("gt_manifest") else None
    rows = export_dataset(filtered, purge, annotations, gt)
    export_path = _out(cfg, "export.jsonl")
    with export_path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    _verify_export(cfg, [row["image_id"] for row in rows])


def _verify_export(cfg: RunConfig, exported_ids: Sequence[str]) -> None:
    """Final assertion: nothing exported sits within threshold of a test image."""
    train_path = cfg.paths.get("train_signatures")
    test_path = cfg.paths.get("test_signatures")
    if train_path is None or test_path is None:
        return
    by_id = {s.image_id: s for s in read_signatures(train_path)}
    index = DedupIndex.build(
        read_signatures(test_path),
        m=cfg.dedup_chunks,
        r_max=max(cfg.effective_r_max(), cfg.dedup_threshold),
    )
    for image_id in exported_ids:
        sig = by_id.get(image_id)
        if sig is None:
            continue
        hits = index.query(sig, cfg.dedup_threshold)
        if hits:
            raise WebcurateError(
                f"post-export check failed: {image_id!r} is {hits[0][1]} bits from "
                f"test image {hits[0][0]!r} (threshold {cfg.dedup_threshold})"
            )


def _stage_eval(cfg: RunConfig) -> None:
    preds = load_predictions(_require(cfg, "predictions", "eval"))
    metrics = set(cfg.eval_metrics)
    report: dict = {
        "definitions": {
            "ap": AP_DEFINITION,
            "argmax_ties": "broken by ascending class id",
            "intervals": "Wilson, 95%",
        },
        "rows": len(preds.rows),
        "classes": len(preds.classes),
    }
    if "top1" in metrics:
        report["top1_accuracy"] = top1_accuracy(preds)
    if "map" in metrics:
        ap = mean_ap(preds)
        report["mean_ap"] = ap.mean
        report["ap_per_class"] = dict(sorted(ap.per_class.items()))
        report["ap_skipped_classes"] = list(ap.skipped)
    if "confusion" in metrics:
        cm = confusion_matrix(preds)
        _out(cfg, "confusion.csv").write_text(cm.to_csv(), encoding="utf-8")
        report["top_confused"] = cm.top_confused()
    if "lca" in metrics:
        tax = load_taxonomy(_require(cfg, "taxonomy", "eval"))
        hist = lca_histogram(preds, tax)
        report["lca_histogram"] = hist
        _out(cfg, "lca_histogram.csv").write_text(histogram_csv(hist), encoding="utf-8")
    if "worth" in metrics:
        curve_path = _require(cfg, "worth_curve", "eval")
        if cfg.eval_worth_gt_size is None or cfg.eval_worth_gt_accuracy is None:
            raise ValidationError("worth metric needs eval.worth_gt_size and eval.worth_gt_accuracy")
        curve = load_worth_curve(curve_path, cfg.eval_worth_gt_size, cfg.eval_worth_gt_accuracy)
        report["data_worth"] = worth_estimate(curve).to_dict()
        _out(cfg, "worth_curve.csv").write_text(curve_csv(curve), encoding="utf-8")
    _out(cfg, "eval_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
    )
    _out(cfg, "eval_report.txt").write_text(_eval_text_table(report), encoding="utf-8")


def _eval_text_table(report: dict) -> str:
    lines = [f"{'metric':<24} value"]
    if "top1_accuracy" in report:
        lines.append(f"{'top-1 accuracy':<24} {report['top1_accuracy']:.4f}")
    if "mean_ap" in report:
        lines.append(f"{'mean AP':<24} {report['mean_ap']:.4f}")
    if "data_worth" in report:
        worth = report["data_worth"]
        suffix = "" if worth["reached"] else " (upper bound)"
        lines.append(f"{'data-worth ratio':<24} {worth['ratio']:.3f}{suffix}")
    for rank, fraction in report.get("lca_histogram", {}).items():
        lines.append(f"{'errors @ ' + rank:<24} {fraction:.3f}")
    lines.append(f"{'rows':<24} {report['rows']}")
    lines.append(f"{'classes':<24} {report['classes']}")
    return "\n".join(lines) + "\n"


_STAGES: dict[str, _Stage] = {}


def _register(name: str, requires: tuple[str, ...],
              config_slice: Callable[[RunConfig], dict],
              inputs: Callable[[RunConfig], dict[str, Path]],
              outputs: Callable[[RunConfig], dict[str, Path]],
              work: Callable[[RunConfig], None]) -> None:
    _STAGES[name] = _Stage(name, config_slice, inputs, outputs, work, requires)


def _opt(paths: dict[str, Path], cfg: RunConfig, *keys: str) -> dict[str, Path]:
    for key in keys:
        if cfg.paths.get(key):
            paths[key] = cfg.paths[key]
    return paths


_register(
    "ingest", (),
    lambda cfg: {"seed": cfg.seed},
    lambda cfg: _opt({"manifest": _require(cfg, "manifest", "ingest")}, cfg, "categories"),
    lambda cfg: {"ingested": _out(cfg, "ingested.jsonl"),
                 "corpus_stats": _out(cfg, "corpus_stats.json")},
    _stage_ingest,
)
_register(
    "filter", ("ingest",),
    lambda cfg: {"identity_mode": cfg.filter_identity_mode, "r_dup": cfg.filter_r_dup},
    lambda cfg: _opt({"ingested": _out(cfg, "ingested.jsonl")}, cfg,
                     *(("train_signatures",) if cfg.filter_identity_mode == "signature" else ())),
    lambda cfg: {"filtered": _out(cfg, "filtered.jsonl"),
                 "filter_report": _out(cfg, "filter_report.json"),
                 "filter_summary": _out(cfg, "filter_summary.txt")},
    _stage_filter,
)
_register(
    "dedup", (),
    lambda cfg: {"width": cfg.dedup_width, "chunks": cfg.dedup_chunks,
                 "r_max": cfg.effective_r_max(), "threshold": cfg.dedup_threshold},
    lambda cfg: {"train_signatures": _require(cfg, "train_signatures", "dedup"),
                 "test_signatures": _require(cfg, "test_signatures", "dedup")},
    lambda cfg: {"purge_report": _out(cfg, "purge_report.json")},
    _stage_dedup,
)
_register(
    "sample", (),
    lambda cfg: {"prior": cfg.sampler_prior, "budget": cfg.sampler_budget,
                 "rounds": cfg.sampler_rounds, "seed": cfg.seed},
    lambda cfg: {"scores": _require(cfg, "scores", "sample")},
    lambda cfg: {f"selection_round{r + 1}": _out(cfg, f"selection_round{r + 1}.json")
                 for r in range(cfg.sampler_rounds)},
    _stage_sample,
)
_register(
    "export", ("filter", "dedup"),
    lambda cfg: {"threshold": cfg.dedup_threshold, "seed": cfg.seed},
    lambda cfg: _opt({"filtered": _out(cfg, "filtered.jsonl"),
                      "purge_report": _out(cfg, "purge_report.json")},
                     cfg, "gt_manifest", "judgments", "tasks"),
    lambda cfg: {"export": _out(cfg, "export.jsonl")},
    _stage_export,
)
_register(
    "eval", (),
    lambda cfg: {"metrics": list(cfg.eval_metrics),
                 "worth_gt_size": cfg.eval_worth_gt_size,
                 "worth_gt_accuracy": cfg.eval_worth_gt_accuracy},
    lambda cfg: _opt({"predictions": _require(cfg, "predictions", "eval")}, cfg,
                     *(("taxonomy",) if "lca" in cfg.eval_metrics else ()),
                     *(("worth_curve",) if "worth" in cfg.eval_metrics else ())),
    lambda cfg: {
        "eval_report": _out(cfg, "eval_report.json"),
        "eval_table": _out(cfg, "eval_report.txt"),
        **({"confusion_csv": _out(cfg, "confusion.csv")}
           if "confusion" in cfg.eval_metrics else {}),
        **({"lca_csv": _out(cfg, "lca_histogram.csv")}
           if "lca" in cfg.eval_metrics else {}),
        **({"worth_csv": _out(cfg, "worth_curve.csv")}
           if "worth" in cfg.eval_metrics else {}),
    },
    _stage_eval,
)


def _artifact_path(cfg: RunConfig, stage: str) -> Path:
    return cfg.out_dir / "artifacts" / f"{stage}.json"


def _collect_input_digests(cfg: RunConfig, stage: _Stage) -> dict[str, str]:
    digests = {}
    for name, path in stage.inputs(cfg).items():
        if not path.exists():
            hint = f"; run the {' and '.join(repr(s) for s in stage.requires)} stage first" \
                if stage.requires else ""
            raise ValidationError(
                f"stage {stage.name!r} is missing input {path}{hint}"
            )
        digests[f"file:{name}"] = file_digest(path)
    digests["config"] = _config_digest(stage.config_slice(cfg))
    return digests


def run(cfg: RunConfig, stages: Sequence[str] | None = None, force: bool = False) -> list[RunArtifact]:
    """Execute the requested stages in dependency order.

    A stage whose recorded artifact still matches its input digests (and
    whose outputs are intact) is skipped unless ``force``. Requesting a
    stage whose upstream outputs are missing fails with the name of the
    stage to run first.
    """
    cfg.validate()
    requested = list(stages) if stages else list(BATCH_STAGES)
    unknown = [s for s in requested if s not in _STAGES]
    if unknown:
        raise ValidationError(f"unknown stage(s) {unknown}; valid: {list(_STAGES)}")
    ordered = [s for s in BATCH_STAGES if s in requested]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "artifacts").mkdir(exist_ok=True)

    artifacts = []
    for name in ordered:
        stage = _STAGES[name]
        input_digests = _collect_input_digests(cfg, stage)
        artifact_path = _artifact_path(cfg, name)
        if not force and artifact_path.exists():
            previous = RunArtifact.from_dict(
                json.loads(artifact_path.read_text(encoding="utf-8"))
            )
            outputs = stage.outputs(cfg)
            if previous.input_digests == input_digests and all(
                p.exists() and file_digest(p) == previous.output_digests.get(f"file:{n}")
                for n, p in outputs.items()
            ):
                previous.cached = True
                artifacts.append(previous)
                continue
        started = time.monotonic()
        stage.work(cfg)
        elapsed = time.monotonic() - started
        output_digests = {
            f"file:{n}": file_digest(p) for n, p in stage.outputs(cfg).items()
        }
        artifact = RunArtifact(
            stage=name,
            input_digests=input_digests,
            output_digests=output_digests,
            wall_time_seconds=elapsed,
        )
        artifact_path.write_text(
            json.dumps(artifact.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        artifacts.append(artifact)
    return artifacts


def build_annotation_store(cfg: RunConfig, data_dir: Path | None = None):
    """Assemble the annotation store the serve stage runs on."""
    from .annotate import AnnotationStore, make_batches

    selection_path = _out(cfg, "selection_round1.json")
    if not selection_path.exists():
        raise ValidationError("serving needs selection_round1.json; run the 'sample' stage first")
    selection = SelectionResult.from_dict(
        json.loads(selection_path.read_text(encoding="utf-8"))
    )
    goldens_raw = json.loads(
        _require(cfg, "goldens", "serve").read_text(encoding="utf-8")
    )
    goldens = {cls: [(img, bool(ans)) for img, ans in pairs]
               for cls, pairs in goldens_raw.items()}
    preds = load_predictions(_require(cfg, "predictions", "serve"))
    confusion = confusion_matrix(preds).top_confused()
    # a class the model never confuses still needs instructional negatives;
    # fall back to the nearest other class ids, deterministically
    all_classes = sorted(goldens)
    for class_id in selection.per_class:
        if not confusion.get(class_id):
            confusion[class_id] = [c for c in all_classes if c != class_id][:2]
    tasks = make_batches(selection, goldens, cfg.annotate_golden_rate, confusion,
                         seed=cfg.seed)
    class_names = {}
    if cfg.paths.get("categories"):
        class_names = {
            cat_id: cat.display_name
            for cat_id, cat in load_categories(cfg.paths["categories"]).items()
        }
    urls = {}
    if cfg.paths.get("pool_urls"):
        urls = {
            str(img): str(url)
            for img, url in json.loads(
                cfg.paths["pool_urls"].read_text(encoding="utf-8")
            ).items()
        }
    return AnnotationStore(
        tasks,
        data_dir or (cfg.out_dir / "annotation"),
        class_names=class_names,
        urls=urls,
    )
