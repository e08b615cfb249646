"""Cross-category filtering: drop images that show up under multiple categories.

An image listed in the search results of two different categories has an
explicitly ambiguous label; removing such images targets wrong-category
noise directly. Identity between records is either exact image_id
equality or, optionally, near-duplicate equality at a small Hamming
radius over binary signatures (re-hosted copies of one photo rarely share
an id but do share a signature neighborhood).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .catalog import SearchManifest
from .errors import ValidationError

DEFAULT_CROP_RADIUS = 4  # near-duplicate crops/rescales land within ~4 bits


@dataclass(frozen=True)
class FilterReport:
    """Which images survived filtering, with per-category retention rates."""

    retained: frozenset[str]
    removed: frozenset[str]
    per_category_retention: dict[str, float]
    overall_retention: float
    identity_mode: str = "exact"

    def __post_init__(self):
        if self.retained & self.removed:
            raise ValidationError("retained and removed overlap")
        for cat, frac in self.per_category_retention.items():
            if not 0.0 <= frac <= 1.0:
                raise ValidationError(f"retention for {cat!r} out of [0,1]: {frac}")
        if not 0.0 <= self.overall_retention <= 1.0:
            raise ValidationError(f"overall retention out of [0,1]: {self.overall_retention}")

    def to_dict(self) -> dict:
        return {
            "identity_mode": self.identity_mode,
            "overall_retention": self.overall_retention,
            "per_category_retention": dict(sorted(self.per_category_retention.items())),
            "retained": sorted(self.retained),
            "removed": sorted(self.removed),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "FilterReport":
        return cls(
            retained=frozenset(obj["retained"]),
            removed=frozenset(obj["removed"]),
            per_category_retention=dict(obj["per_category_retention"]),
            overall_retention=obj["overall_retention"],
            identity_mode=obj.get("identity_mode", "exact"),
        )

    def summary_table(self) -> str:
        lines = [f"{'category':<28} {'retention':>9}"]
        for cat in sorted(self.per_category_retention):
            lines.append(f"{cat:<28} {self.per_category_retention[cat]:>9.3f}")
        lines.append(f"{'OVERALL':<28} {self.overall_retention:>9.3f}")
        lines.append(f"retained {len(self.retained)} of "
                     f"{len(self.retained) + len(self.removed)} images "
                     f"(identity: {self.identity_mode})")
        return "\n".join(lines)


def filter_cross_category(
    manifest: SearchManifest,
    identity_mode: str = "exact",
    *,
    signatures: Mapping[str, "object"] | None = None,
    r_dup: int = DEFAULT_CROP_RADIUS,
) -> FilterReport:
    """Remove every image whose identity occurs under two or more categories.

    identity_mode "exact" keys images by image_id. identity_mode
    "signature" treats images within Hamming radius ``r_dup`` of each
    other as one image; ``signatures`` must then map every image_id in
    the manifest to its BinarySignature. The result is independent of
    record order.
    """
    domains = {rec.category.domain for rec in manifest.records}
    if len(domains) > 1:
        raise ValidationError(f"manifest mixes domains {sorted(domains)}; filtering is per-domain")

    cats_of: dict[str, set[str]] = {}
    ids_of_cat: dict[str, set[str]] = {}
    for rec in manifest.records:
        cats_of.setdefault(rec.image_id, set()).add(rec.category.id)
        ids_of_cat.setdefault(rec.category.id, set()).add(rec.image_id)

    if identity_mode == "exact":
        removed = {img for img, cats in cats_of.items() if len(cats) >= 2}
    elif identity_mode == "signature":
        if signatures is None:
            raise ValidationError("identity_mode 'signature' requires a signatures mapping")
        from .dedup import DedupIndex  # local import; dedup never imports this module

        missing = sorted(set(cats_of) - set(signatures))
        if missing:
            raise ValidationError(
                f"{len(missing)} image(s) lack signatures, e.g. {missing[:3]}"
            )
        index = DedupIndex.build([signatures[img] for img in sorted(cats_of)])
        removed = set()
        for img in cats_of:
            neighborhood: set[str] = set()
            for other_id, _dist in index.query(signatures[img], r_dup):
                neighborhood |= cats_of[other_id]
                if len(neighborhood) >= 2:
                    break
            if len(neighborhood) >= 2:
                removed.add(img)
    else:
        raise ValidationError(f"unknown identity_mode {identity_mode!r}")

    all_ids = set(cats_of)
    retained = all_ids - removed
    per_cat = {
        cat: len(ids & retained) / len(ids)
        for cat, ids in ids_of_cat.items()
    }
    overall = len(retained) / len(all_ids) if all_ids else 1.0
    return FilterReport(
        retained=frozenset(retained),
        removed=frozenset(removed),
        per_category_retention=per_cat,
        overall_retention=overall,
        identity_mode=identity_mode,
    )


def retention_curve(
    reports: Sequence[FilterReport],
    category_counts: Sequence[int],
) -> list[tuple[int, float]]:
    """Pair category counts with overall retention, sorted by count.

    Used to chart how aggressively filtering bites as the category list
    grows (more categories, more collisions, lower retention).
    """
    if len(reports) != len(category_counts):
        raise ValidationError(
            f"got {len(reports)} reports but {len(category_counts)} category counts"
        )
    if not reports:
        raise ValidationError("need at least one report")
    rows = [(int(n), rep.overall_retention) for n, rep in zip(category_counts, reports)]
    rows.sort(key=lambda row: row[0])
    return rows
