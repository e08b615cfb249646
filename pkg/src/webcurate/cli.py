"""The ``webcurate`` command line.

Stage subcommands (ingest, filter, dedup, sample, export, eval) run the
staged pipeline against a YAML run config; ``run`` executes all batch
stages, ``serve`` starts the annotation API and blocks. Global flags
--seed / --out / --force override their config fields. Exit codes:
0 success, 1 validation problem, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .catalog import load_manifest
from .dedup import (
    BinarySignature,
    DedupIndex,
    load_index,
    purge_train_vs_test,
    read_signatures,
    save_index,
)
from .errors import ValidationError, WebcurateError
from .evalkit import audit_sample
from .pipeline import BATCH_STAGES, RunConfig, build_annotation_store, run
from .synthcorpus import generate_corpus


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="Run config (YAML).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Override the config output directory.")
@click.option("--force", is_flag=True, help="Re-run stages even when cached.")
@click.pass_context
def cli(ctx, config_path, seed, out_dir, force):
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out_dir"] = out_dir
    ctx.obj["force"] = force


def _load_config(ctx) -> RunConfig:
    path = ctx.obj.get("config_path")
    if path is None:
        raise ValidationError("this command needs --config pointing at a run config")
    overrides = {}
    if ctx.obj.get("seed") is not None:
        overrides["seed"] = ctx.obj["seed"]
    if ctx.obj.get("out_dir") is not None:
        overrides["out_dir"] = str(ctx.obj["out_dir"])
    return RunConfig.load(path, overrides)


def _run_stages(ctx, stages):
    cfg = _load_config(ctx)
    artifacts = run(cfg, stages, force=ctx.obj["force"])
    for artifact in artifacts:
        status = "cached" if artifact.cached else f"{artifact.wall_time_seconds:.2f}s"
        click.echo(f"{artifact.stage:<8} {status}")
    return artifacts


@cli.command()
@click.pass_context
def ingest(ctx):
    """Load and validate the manifest; write the canonical copy + stats."""
    _run_stages(ctx, ["ingest"])


@cli.command("filter")
@click.pass_context
def filter_cmd(ctx):
    """Drop images listed under more than one category."""
    _run_stages(ctx, ["filter"])


@cli.command()
@click.pass_context
def sample(ctx):
    """Select the most confident images per class for annotation."""
    _run_stages(ctx, ["sample"])


@cli.command()
@click.pass_context
def export(ctx):
    """Assemble the final training manifest (filtered + accepted - purged)."""
    _run_stages(ctx, ["export"])


@cli.command("eval")
@click.pass_context
def eval_cmd(ctx):
    """Score predictions: accuracy, mAP, confusion, LCA histogram, data worth."""
    _run_stages(ctx, ["eval"])


@cli.command("run")
@click.option("--stages", default=None,
              help=f"Comma-separated subset of {','.join(BATCH_STAGES)}.")
@click.pass_context
def run_cmd(ctx, stages):
    """Run every batch stage in dependency order."""
    names = [s.strip() for s in stages.split(",")] if stages else None
    _run_stages(ctx, names)


# --------------------------------------------------------------------------
# dedup subcommands


@cli.group()
def dedup():
    """Build, query, and purge with the Hamming-radius index."""


@dedup.command("build")
@click.option("--signatures", "sig_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--chunks", default=32, show_default=True)
@click.option("--r-max", default=None, type=int)
def dedup_build(sig_path, out_path, chunks, r_max):
    """Index a signature file for radius queries."""
    sigs = read_signatures(sig_path)
    index = DedupIndex.build(sigs, m=chunks, r_max=r_max)
    save_index(index, out_path)
    click.echo(f"indexed {len(index)} signatures ({index.width} bits, m={index.m}) -> {out_path}")


@dedup.command("query")
@click.option("--index", "index_path", required=True, type=click.Path(path_type=Path))
@click.option("--probe-hex", default=None, help="Probe signature as hex bytes.")
@click.option("--probe-id", default=None, help="Use a stored signature as the probe.")
@click.option("--radius", "-r", default=18, show_default=True)
def dedup_query(index_path, probe_hex, probe_id, radius):
    """Find every indexed signature within a Hamming radius of the probe."""
    index = load_index(index_path)
    if (probe_hex is None) == (probe_id is None):
        raise ValidationError("provide exactly one of --probe-hex / --probe-id")
    if probe_hex is not None:
        probe = BinarySignature.from_hex("probe", probe_hex)
    else:
        try:
            row = index.ids.index(probe_id)
        except ValueError:
            raise ValidationError(f"id {probe_id!r} is not in the index")
        probe = BinarySignature(probe_id, index._matrix()[row])
    hits = index.query(probe, radius)
    click.echo(json.dumps([{"image_id": i, "distance": d} for i, d in hits], indent=2))


@dedup.command("purge")
@click.option("--train", "train_path", required=True, type=click.Path(path_type=Path))
@click.option("--test", "test_path", required=True, type=click.Path(path_type=Path))
@click.option("--threshold", default=18, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(path_type=Path))
def dedup_purge(train_path, test_path, threshold, out_path):
    """Report training signatures within the threshold of any test signature."""
    report = purge_train_vs_test(
        read_signatures(train_path), read_signatures(test_path), threshold
    )
    text = report.to_json()
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        click.echo(f"purged {len(report.removed_ids)} -> {out_path}")
    else:
        click.echo(text)


# --------------------------------------------------------------------------
# annotation serving and audits


@cli.command()
@click.option("--port", default=None, type=int, help="Override the config port.")
@click.option("--static-dir", default=None, type=click.Path(path_type=Path),
              help="Serve a built annotator UI bundle at /.")
@click.pass_context
def serve(ctx, port, static_dir):
    """Start the annotation HTTP API (blocks until stopped)."""
    import uvicorn

    from .annotate.api import create_app

    cfg = _load_config(ctx)
    cfg.validate()
    store = build_annotation_store(cfg)
    app = create_app(store, static_dir=str(static_dir) if static_dir else None)
    try:
        uvicorn.run(app, host="127.0.0.1", port=port or cfg.annotate_port, log_level="info")
    finally:
        store.close()


@cli.command()
@click.option("--n", default=1000, show_default=True, help="Sample size.")
@click.option("--judgments", "judgments_path", default=None, type=click.Path(path_type=Path),
              help="JSON map image_id -> in_domain|cross_domain; completes the audit.")
@click.pass_context
def audit(ctx, n, judgments_path):
    """Draw (or finish) a manual noise audit over the manifest."""
    cfg = _load_config(ctx)
    cfg.validate()
    source = cfg.out_dir / "ingested.jsonl"
    if not source.exists():
        source = cfg.paths.get("manifest")
        if source is None:
            raise ValidationError("audit needs paths.manifest in the config")
    manifest = load_manifest(source)
    audit_obj = audit_sample(manifest, n=n, seed=cfg.seed)
    if judgments_path is not None:
        judgments = json.loads(Path(judgments_path).read_text(encoding="utf-8"))
        for image_id, label in judgments.items():
            audit_obj.judge(image_id, label)
        audit_obj.complete()
        click.echo(f"cross-domain fraction: {audit_obj.fraction:.1%} "
                   f"(95% interval {audit_obj.interval95[0]:.3f}..{audit_obj.interval95[1]:.3f})")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = cfg.out_dir / "noise_audit.json"
    out_path.write_text(audit_obj.to_json() + "\n", encoding="utf-8")
    click.echo(f"audit written to {out_path}")


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=7, show_default=True)
def synth(out_dir, seed):
    """Generate the bundled synthetic corpus (demo inputs + run config)."""
    paths = generate_corpus(out_dir, seed)
    click.echo(f"synthetic corpus written to {out_dir}")
    click.echo(f"try: webcurate --config {paths['config']} run")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 2
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        return 1
    except WebcurateError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        click.echo(f"unexpected error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
