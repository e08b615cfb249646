"""Rank-labeled taxonomy trees and the least-common-ancestor error histogram.

Bucketing each misclassification by the rank of the LCA of the predicted
and true leaves separates near-misses (two species in one genus) from
real blunders (an error only reconcilable at the root). Known ranks are
ordered species < genus < family < order < class; other rank labels are
allowed anywhere between known ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from ..errors import ParseError, ValidationError
from .predictions import PredictionSet

RANK_ORDER = {"species": 0, "genus": 1, "family": 2, "order": 3, "class": 4}


@dataclass(frozen=True)
class TaxonNode:
    id: str
    name: str
    rank: str
    parent: str | None


class Taxonomy:
    """A single-rooted tree of taxa plus a category-to-leaf mapping."""

    def __init__(self, nodes: Mapping[str, TaxonNode], leaf_of: Mapping[str, str] | None = None):
        self.nodes = dict(nodes)
        self.leaf_of = dict(leaf_of) if leaf_of else {}
        roots = [n.id for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1:
            raise ValidationError(f"taxonomy must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        self._ancestors: dict[str, tuple[str, ...]] = {}
        for node in self.nodes.values():
            chain = self.ancestors(node.id)  # walks and caches; raises on cycles
            last_known = -1
            for taxon_id in chain:
                rank = self.nodes[taxon_id].rank
                if rank in RANK_ORDER:
                    if RANK_ORDER[rank] <= last_known:
                        raise ValidationError(
                            f"rank {rank!r} does not increase toward the root near {taxon_id!r}"
                        )
                    last_known = RANK_ORDER[rank]
        for category_id, taxon_id in self.leaf_of.items():
            if taxon_id not in self.nodes:
                raise ValidationError(
                    f"category {category_id!r} maps to unknown taxon {taxon_id!r}"
                )

    def ancestors(self, taxon_id: str) -> tuple[str, ...]:
        """Chain from the node itself up to the root."""
        if taxon_id in self._ancestors:
            return self._ancestors[taxon_id]
        chain = []
        seen = set()
        cursor: str | None = taxon_id
        while cursor is not None:
            if cursor in seen:
                raise ValidationError(f"parent cycle at taxon {cursor!r}")
            if cursor not in self.nodes:
                raise ValidationError(f"unknown taxon {cursor!r}")
            seen.add(cursor)
            chain.append(cursor)
            cursor = self.nodes[cursor].parent
        result = tuple(chain)
        self._ancestors[taxon_id] = result
        return result

    def leaf_for(self, category_id: str) -> str:
        """Resolve a category to its leaf: explicit mapping, else id identity."""
        if category_id in self.leaf_of:
            return self.leaf_of[category_id]
        if category_id in self.nodes:
            return category_id
        raise ValidationError(f"category {category_id!r} is not mapped to the taxonomy")

    def lca(self, a: str, b: str) -> str:
        chain_a = self.ancestors(a)
        in_b = set(self.ancestors(b))
        for taxon_id in chain_a:
            if taxon_id in in_b:
                return taxon_id
        raise ValidationError(f"no common ancestor for {a!r} and {b!r}")  # unreachable: single root


def load_taxonomy(path: str | Path, leaf_map_path: str | Path | None = None) -> Taxonomy:
    """Read the 4-column tree file (taxon_id, name, rank, parent_id).

    parent_id is empty or "-" for the root. The optional leaf map file
    is 2 columns: category_id, taxon_id; without it categories resolve
    by id identity.
    """
    path = Path(path)
    nodes: dict[str, TaxonNode] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 tab-separated fields (taxon_id, name, rank, parent_id), "
                    f"got {len(parts)}",
                    path=str(path), line=lineno,
                )
            taxon_id, name, rank, parent = parts
            if taxon_id in nodes:
                raise ParseError(f"duplicate taxon {taxon_id!r}", path=str(path), line=lineno)
            nodes[taxon_id] = TaxonNode(
                id=taxon_id, name=name, rank=rank,
                parent=None if parent in ("", "-") else parent,
            )
    leaf_of = {}
    if leaf_map_path is not None:
        with Path(leaf_map_path).open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError("expected 2 tab-separated fields",
                                     path=str(leaf_map_path), line=lineno)
                leaf_of[parts[0]] = parts[1]
    return Taxonomy(nodes, leaf_of)


def lca_histogram(preds: PredictionSet, tax: Taxonomy) -> dict[str, float]:
    """Fraction of errors whose LCA sits at each taxonomic rank.

    Correct rows contribute nothing; with at least one error the
    fractions sum to 1. Every class must resolve to a taxonomy leaf.
    """
    leaves = {cls: tax.leaf_for(cls) for cls in preds.classes}
    tallies: dict[str, int] = {}
    errors = 0
    for row in preds.rows:
        predicted = PredictionSet.predicted(row)
        if predicted == row.true_class:
            continue
        errors += 1
        rank = tax.nodes[tax.lca(leaves[predicted], leaves[row.true_class])].rank
        tallies[rank] = tallies.get(rank, 0) + 1
    if errors == 0:
        return {}
    return {rank: count / errors for rank, count in sorted(tallies.items())}


def histogram_csv(histogram: Mapping[str, float]) -> str:
    known = sorted(histogram, key=lambda r: (RANK_ORDER.get(r, 99), r))
    lines = ["rank,fraction_of_errors"]
    lines += [f"{rank},{histogram[rank]:.6f}" for rank in known]
    return "\n".join(lines) + "\n"
