"""Search-result manifests, category lists, and corpus statistics.

A manifest is one row per (category, rank, image) search hit. Files are
line-delimited UTF-8: JSON-lines is the canonical encoding, tab-separated
is accepted. A leading ``# manifest ...`` comment carries the domain tag
and fetch timestamp so that save -> load round-trips exactly.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError

KNOWN_DOMAINS = ("bird", "butterfly", "aircraft", "dog")
DEFAULT_CATEGORY_CAP = 800

_HEADER_PREFIX = "# manifest"


@dataclass(frozen=True)
class Category:
    """A fine-grained category: opaque id, human-readable name, domain tag.

    ``domain`` is one of KNOWN_DOMAINS or any other lowercase token for
    domains this toolkit was not tuned on.
    """

    id: str
    display_name: str
    domain: str

    def __post_init__(self):
        if not self.id:
            raise ValidationError("category id must be non-empty")
        if not self.display_name:
            raise ValidationError(f"category {self.id!r}: display_name must be non-empty")
        if not self.domain:
            raise ValidationError(f"category {self.id!r}: domain must be non-empty")


@dataclass(frozen=True)
class ImageRecord:
    """One search hit: an image listed under a category at a result rank."""

    image_id: str
    url: str
    category: Category
    rank: int
    title: str | None = None

    def __post_init__(self):
        if not self.image_id:
            raise ValidationError("image_id must be non-empty")
        if self.rank < 0:
            raise ValidationError(f"record {self.image_id!r}: rank must be >= 0, got {self.rank}")


@dataclass(frozen=True)
class SearchManifest:
    """An immutable, validated collection of search hits for one domain.

    Per-category record counts are checked against ``per_category_cap``
    (public search results top out around 800 per query; the cap is
    configuration, not a law).
    """

    domain: str
    records: tuple[ImageRecord, ...]
    fetched_at: datetime | None = None
    per_category_cap: int = DEFAULT_CATEGORY_CAP

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: dict[tuple[str, int], str] = {}
        counts: dict[str, int] = {}
        for rec in self.records:
            if rec.category.domain != self.domain:
                raise ValidationError(
                    f"record {rec.image_id!r}: category {rec.category.id!r} has domain "
                    f"{rec.category.domain!r}, manifest is {self.domain!r}"
                )
            key = (rec.category.id, rec.rank)
            if key in seen:
                raise ValidationError(
                    f"duplicate (category, rank) = ({key[0]!r}, {key[1]}) "
                    f"for images {seen[key]!r} and {rec.image_id!r}"
                )
            seen[key] = rec.image_id
            counts[rec.category.id] = counts.get(rec.category.id, 0) + 1
        for cat_id, n in counts.items():
            if n > self.per_category_cap:
                raise ValidationError(
                    f"category {cat_id!r} has {n} records, cap is {self.per_category_cap}"
                )

    def categories(self) -> list[Category]:
        """Distinct categories in first-appearance order."""
        out: dict[str, Category] = {}
        for rec in self.records:
            out.setdefault(rec.category.id, rec.category)
        return list(out.values())

    def image_ids(self) -> set[str]:
        return {rec.image_id for rec in self.records}


@dataclass(frozen=True)
class CorpusStats:
    """Per-category counts plus totals and the mean images/category."""

    per_category_counts: dict[str, int]
    total_images: int
    total_categories: int
    mean_images_per_category: float

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "CorpusStats":
        total = sum(counts.values())
        ncat = len(counts)
        mean = total / ncat if ncat else 0.0
        return cls(dict(counts), total, ncat, mean)

    def to_dict(self) -> dict:
        return {
            "total_images": self.total_images,
            "total_categories": self.total_categories,
            "mean_images_per_category": self.mean_images_per_category,
            "per_category_counts": dict(sorted(self.per_category_counts.items())),
        }


def corpus_stats(manifest: SearchManifest) -> CorpusStats:
    counts: dict[str, int] = {}
    for rec in manifest.records:
        counts[rec.category.id] = counts.get(rec.category.id, 0) + 1
    return CorpusStats.from_counts(counts)


# --------------------------------------------------------------------------
# category list files: one "id <TAB> display_name <TAB> domain" per line


def load_categories(path: str | Path) -> dict[str, Category]:
    path = Path(path)
    out: dict[str, Category] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields (id, display_name, domain), got {len(parts)}",
                    path=str(path), line=lineno,
                )
            cat = Category(id=parts[0], display_name=parts[1], domain=parts[2])
            if cat.id in out:
                raise ParseError(f"duplicate category id {cat.id!r}", path=str(path), line=lineno)
            out[cat.id] = cat
    return out


def save_categories(categories: Iterable[Category], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for cat in categories:
            fh.write(f"{cat.id}\t{cat.display_name}\t{cat.domain}\n")


# --------------------------------------------------------------------------
# manifest files


def _parse_header(line: str) -> dict[str, str]:
    fields = {}
    for token in line[len(_HEADER_PREFIX):].strip().split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key] = value
    return fields


def _record_from_obj(obj: dict, lineno: int, path: str,
                     domain: str, categories: Mapping[str, Category] | None) -> ImageRecord:
    try:
        image_id = obj["image_id"]
        url = obj.get("url", "")
        cat_id = obj["category_id"]
        rank = int(obj["rank"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad record: {exc}", path=path, line=lineno) from exc
    title = obj.get("title")
    if categories is not None and cat_id in categories:
        category = categories[cat_id]
        if category.domain != domain:
            raise ParseError(
                f"category {cat_id!r} has domain {category.domain!r}, expected {domain!r}",
                path=path, line=lineno,
            )
    else:
        category = Category(id=cat_id, display_name=cat_id, domain=domain)
    try:
        return ImageRecord(image_id=image_id, url=url, category=category, rank=rank, title=title)
    except ValidationError as exc:
        raise ParseError(str(exc), path=path, line=lineno) from exc


def load_manifest(
    path: str | Path,
    *,
    domain: str | None = None,
    categories: Mapping[str, Category] | None = None,
    per_category_cap: int = DEFAULT_CATEGORY_CAP,
) -> SearchManifest:
    """Load a manifest file, JSON-lines or tab-separated.

    The domain comes from the ``# manifest domain=...`` header or the
    ``domain`` argument (the argument wins). Duplicate (category, rank)
    pairs and mixed-domain categories are rejected with line numbers.
    """
    path = Path(path)
    header_domain: str | None = None
    fetched_at: datetime | None = None
    records: list[ImageRecord] = []
    seen: dict[tuple[str, int], int] = {}

    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith(_HEADER_PREFIX):
                    fields = _parse_header(line)
                    header_domain = fields.get("domain", header_domain)
                    if "fetched_at" in fields:
                        try:
                            fetched_at = datetime.fromisoformat(fields["fetched_at"])
                        except ValueError as exc:
                            raise ParseError(f"bad fetched_at: {exc}", path=str(path), line=lineno)
                continue
            effective_domain = domain or header_domain
            if effective_domain is None:
                raise ParseError(
                    "manifest domain unknown: no '# manifest domain=...' header and no domain argument",
                    path=str(path), line=lineno,
                )
            if line.startswith("{"):
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc}", path=str(path), line=lineno) from exc
            else:
                parts = line.split("\t")
                if len(parts) not in (4, 5):
                    raise ParseError(
                        f"expected 4 or 5 tab-separated fields, got {len(parts)}",
                        path=str(path), line=lineno,
                    )
                obj = {
                    "image_id": parts[0],
                    "url": parts[1],
                    "category_id": parts[2],
                    "rank": parts[3],
                }
                if len(parts) == 5 and parts[4] != "":
                    obj["title"] = parts[4]
            rec = _record_from_obj(obj, lineno, str(path), effective_domain, categories)
            key = (rec.category.id, rec.rank)
            if key in seen:
                raise ParseError(
                    f"duplicate (category, rank) = ({key[0]!r}, {key[1]}), first seen on line {seen[key]}",
                    path=str(path), line=lineno,
                )
            seen[key] = lineno
            records.append(rec)

    effective_domain = domain or header_domain or "other"
    return SearchManifest(
        domain=effective_domain,
        records=tuple(records),
        fetched_at=fetched_at,
        per_category_cap=per_category_cap,
    )


def record_to_obj(rec: ImageRecord) -> dict:
    obj = {
        "image_id": rec.image_id,
        "url": rec.url,
        "category_id": rec.category.id,
        "rank": rec.rank,
    }
    if rec.title is not None:
        obj["title"] = rec.title
    return obj


def save_manifest(manifest: SearchManifest, path: str | Path, fmt: str = "jsonl") -> None:
    """Write a manifest; ``fmt`` is "jsonl" (canonical) or "tsv"."""
    if fmt not in ("jsonl", "tsv"):
        raise ValidationError(f"unknown manifest format {fmt!r}")
    path = Path(path)
    header = f"{_HEADER_PREFIX} domain={manifest.domain}"
    if manifest.fetched_at is not None:
        header += f" fetched_at={manifest.fetched_at.isoformat()}"
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for rec in manifest.records:
            if fmt == "jsonl":
                fh.write(json.dumps(record_to_obj(rec), sort_keys=True, ensure_ascii=False) + "\n")
            else:
                title = rec.title if rec.title is not None else ""
                fields = (rec.image_id, rec.url, rec.category.id, str(rec.rank), title)
                if any("\t" in f or "\n" in f for f in fields):
                    raise ValidationError(
                        f"record {rec.image_id!r} contains tab/newline; use the jsonl format"
                    )
                fh.write("\t".join(fields) + "\n")


# --------------------------------------------------------------------------
# evaluation-set construction from titled candidates


def normalize_text(text: str) -> str:
    """Unicode-fold, lowercase, and collapse whitespace runs."""
    folded = unicodedata.normalize("NFKC", text).casefold()
    return " ".join(folded.split())


@dataclass(frozen=True)
class FlickrEvalResult:
    """Output of build_flickr_eval: the kept manifest plus drop counters."""

    manifest: SearchManifest
    considered: int
    dropped_missing_title: int
    dropped_no_match: int


def build_flickr_eval(
    candidates: Sequence[ImageRecord],
    per_category_cap: int = 25,
    *,
    domain: str | None = None,
) -> FlickrEvalResult:
    """Keep candidates whose title contains the category name, capped per category.

    A candidate survives iff its normalized title contains the normalized
    category display name as a contiguous substring. Per category at most
    ``per_category_cap`` survivors are kept, lowest original rank first,
    and re-ranked 0..k-1. Candidates without a title are dropped and
    counted, never fatal.
    """
    if per_category_cap < 0:
        raise ValidationError("per_category_cap must be >= 0")
    missing = 0
    no_match = 0
    by_category: dict[str, list[ImageRecord]] = {}
    category_of: dict[str, Category] = {}
    for rec in candidates:
        if rec.title is None or not rec.title.strip():
            missing += 1
            continue
        if normalize_text(rec.category.display_name) in normalize_text(rec.title):
            by_category.setdefault(rec.category.id, []).append(rec)
            category_of[rec.category.id] = rec.category
        else:
            no_match += 1

    kept: list[ImageRecord] = []
    for cat_id in sorted(by_category):
        matches = sorted(by_category[cat_id], key=lambda r: (r.rank, r.image_id))
        for new_rank, rec in enumerate(matches[:per_category_cap]):
            kept.append(replace(rec, rank=new_rank))

    if domain is None:
        domains = {rec.category.domain for rec in candidates}
        domain = domains.pop() if len(domains) == 1 else "other"
    manifest = SearchManifest(domain=domain, records=tuple(kept), per_category_cap=max(per_category_cap, 1))
    return FlickrEvalResult(
        manifest=manifest,
        considered=len(candidates),
        dropped_missing_title=missing,
        dropped_no_match=no_match,
    )
