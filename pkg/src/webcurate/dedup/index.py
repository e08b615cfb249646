"""Exact Hamming-radius search and train-vs-test near-duplicate purging.

The index splits each W-bit signature into m disjoint substrings and
hashes every substring into its own table. If two signatures are within
Hamming distance r, at least one substring pair is within floor(r / m),
so probing each table with all values at that substring radius yields a
candidate superset; a full popcount then verifies every candidate. By
the pigeonhole argument the search is exact: no false negatives, no
unverified hits. With the default 32 chunks, any radius up to 31 reduces
to plain equality lookups in the chunk tables.

The distance scale is a property of whatever embedding produced the
signatures, not of this index: re-encodes and crops of one photo usually
land within a handful of bits, genuinely distinct images far away, and
the purge threshold (default 18, inclusive) should be tuned for recall
against a hand-checked sample of pairs near the boundary.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import ValidationError
from .kernels import hamming_gather, hamming_one_to_many
from .signatures import BinarySignature, _check_width

DEFAULT_CHUNKS = 32
DEFAULT_PURGE_THRESHOLD = 18  # inclusive: distance <= 18 counts as "too similar"

_MAX_PROBES_PER_TABLE = 4096

_mask_cache: dict[tuple[int, int], tuple[int, ...]] = {}


def _substring_masks(chunk_bits: int, radius: int) -> tuple[int, ...]:
    """All XOR masks with at most ``radius`` bits set in a chunk_bits-bit space."""
    key = (chunk_bits, radius)
    if key not in _mask_cache:
        masks = [0]
        for k in range(1, radius + 1):
            for positions in combinations(range(chunk_bits), k):
                mask = 0
                for p in positions:
                    mask |= 1 << p
                masks.append(mask)
        _mask_cache[key] = tuple(masks)
    return _mask_cache[key]


def _chunk_values(packed: np.ndarray, m: int) -> np.ndarray:
    """Per-row substring values, shape (n, m); MSB-first within each chunk."""
    n = packed.shape[0]
    width = packed.shape[1] * 8
    c = width // m
    bits = np.unpackbits(packed, axis=1).reshape(n, m, c)
    weights = (1 << np.arange(c - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


class DedupIndex:
    """Append-only store of signatures answering exact radius queries.

    All stored signatures share one width. ``m`` substrings per signature
    and the maximum supported query radius ``r_max`` are fixed at
    construction; querying past r_max raises instead of silently
    truncating results.
    """

    def __init__(self, width: int = 256, m: int = DEFAULT_CHUNKS, r_max: int | None = None):
        _check_width(width)
        if m < 1 or width % m != 0:
            raise ValidationError(f"chunk count {m} must divide signature width {width}")
        if r_max is None:
            r_max = m - 1
        if r_max < 0:
            raise ValidationError("r_max must be >= 0")
        chunk_bits = width // m
        probe_radius = r_max // m
        if probe_radius > chunk_bits:
            raise ValidationError(
                f"r_max {r_max} needs substring radius {probe_radius} but chunks are only "
                f"{chunk_bits} bits; raise m"
            )
        if len(_substring_masks(chunk_bits, probe_radius)) > _MAX_PROBES_PER_TABLE:
            raise ValidationError(
                f"r_max {r_max} with {m} chunks of {chunk_bits} bits needs too many probes; raise m"
            )
        self.width = width
        self.m = m
        self.r_max = r_max
        self._ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._packed: np.ndarray = np.empty((0, width // 8), dtype=np.uint8)
        self._dirty = False
        self._consolidate = threading.Lock()  # queries are concurrent; writes are not
        self._tables: list[dict[int, list[int]]] = [dict() for _ in range(m)]

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._ids)

    @classmethod
    def build(
        cls,
        signatures: Iterable[BinarySignature],
        m: int = DEFAULT_CHUNKS,
        r_max: int | None = None,
    ) -> "DedupIndex":
        sigs = list(signatures)
        if not sigs:
            return cls(m=m, r_max=r_max)
        index = cls(width=sigs[0].width, m=m, r_max=r_max)
        index.add_many(sigs)
        return index

    def add(self, signature: BinarySignature) -> None:
        self.add_many([signature])

    def add_many(self, signatures: Sequence[BinarySignature]) -> None:
        if not signatures:
            return
        for sig in signatures:
            if sig.width != self.width:
                raise ValidationError(
                    f"signature {sig.image_id!r} is {sig.width} bits, index is {self.width}"
                )
        block = np.stack([sig.packed for sig in signatures])
        values = _chunk_values(block, self.m)
        base = len(self._ids)
        for offset, sig in enumerate(signatures):
            row = base + offset
            self._ids.append(sig.image_id)
            for j in range(self.m):
                self._tables[j].setdefault(int(values[offset, j]), []).append(row)
        self._rows.append(block)
        self._dirty = True

    def _matrix(self) -> np.ndarray:
        if self._dirty:
            with self._consolidate:
                if self._dirty:
                    self._packed = np.concatenate([self._packed, *self._rows], axis=0)
                    self._rows = []
                    self._dirty = False
        return self._packed

    def query(self, probe: BinarySignature, r: int) -> list[tuple[str, int]]:
        """All stored (image_id, distance) with distance <= r, sorted by (distance, id)."""
        if probe.width != self.width:
            raise ValidationError(f"probe is {probe.width} bits, index is {self.width}")
        if r < 0:
            raise ValidationError("radius must be >= 0")
        if r > self.r_max:
            raise ValidationError(f"radius {r} exceeds index r_max {self.r_max}")
        if not self._ids:
            return []
        matrix = self._matrix()
        probe_vals = _chunk_values(probe.packed[None, :], self.m)[0]
        masks = _substring_masks(self.width // self.m, r // self.m)
        candidates: set[int] = set()
        for j in range(self.m):
            table = self._tables[j]
            value = int(probe_vals[j])
            for mask in masks:
                bucket = table.get(value ^ mask)
                if bucket:
                    candidates.update(bucket)
        if not candidates:
            return []
        idx = np.fromiter(candidates, dtype=np.int64, count=len(candidates))
        dists = hamming_gather(probe.packed, matrix, idx)
        hits = [
            (self._ids[int(i)], int(d))
            for i, d in zip(idx, dists)
            if d <= r
        ]
        hits.sort(key=lambda h: (h[1], h[0]))
        return hits

    def scan(self, probe: BinarySignature) -> np.ndarray:
        """Distances from the probe to every stored signature (no radius cut)."""
        if probe.width != self.width:
            raise ValidationError(f"probe is {probe.width} bits, index is {self.width}")
        return hamming_one_to_many(probe.packed, self._matrix())


def query_radius(index: DedupIndex, probe: BinarySignature, r: int) -> list[tuple[str, int]]:
    return index.query(probe, r)


@dataclass(frozen=True)
class PurgePair:
    train_id: str
    test_id: str
    distance: int


@dataclass(frozen=True)
class PurgeReport:
    """Training images too close to any test image, with witness pairs.

    Each removed training image carries exactly one witness: the
    minimum-distance test match, ties broken by test image id.
    """

    removed_ids: frozenset[str]
    pairs: tuple[PurgePair, ...]
    threshold: int

    def __post_init__(self):
        for pair in self.pairs:
            if pair.distance > self.threshold:
                raise ValidationError(
                    f"witness pair ({pair.train_id}, {pair.test_id}) at distance "
                    f"{pair.distance} exceeds threshold {self.threshold}"
                )
        if self.removed_ids != {p.train_id for p in self.pairs}:
            raise ValidationError("removed_ids must be exactly the witnessed train ids")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "removed_ids": sorted(self.removed_ids),
            "pairs": [
                {"train_id": p.train_id, "test_id": p.test_id, "distance": p.distance}
                for p in self.pairs
            ],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "PurgeReport":
        return cls(
            removed_ids=frozenset(obj["removed_ids"]),
            pairs=tuple(
                PurgePair(p["train_id"], p["test_id"], int(p["distance"]))
                for p in obj["pairs"]
            ),
            threshold=int(obj["threshold"]),
        )


def purge_train_vs_test(
    train: Sequence[BinarySignature],
    test: Sequence[BinarySignature],
    threshold: int = DEFAULT_PURGE_THRESHOLD,
    *,
    m: int = DEFAULT_CHUNKS,
) -> PurgeReport:
    """Flag training signatures within ``threshold`` bits of any test signature.

    The threshold is inclusive (a pair at exactly the threshold is
    purged), favoring recall over training-set size. Output ordering is
    canonical: pairs sorted by train image id.
    """
    if threshold < 0:
        raise ValidationError("threshold must be >= 0")
    widths = {sig.width for sig in train} | {sig.width for sig in test}
    if len(widths) > 1:
        raise ValidationError(f"mixed signature widths {sorted(widths)}")
    if not train or not test:
        return PurgeReport(removed_ids=frozenset(), pairs=(), threshold=threshold)

    width = widths.pop()
    m_eff = m if width % m == 0 else max(d for d in range(1, m + 1) if width % d == 0)
    r_max = max(threshold, m_eff - 1)
    index = DedupIndex.build(test, m=m_eff, r_max=r_max)

    best: dict[str, tuple[int, str]] = {}
    for sig in train:
        hits = index.query(sig, threshold)
        if not hits:
            continue
        test_id, dist = hits[0]  # hits sorted by (distance, id): first is the witness
        current = best.get(sig.image_id)
        if current is None or (dist, test_id) < current:
            best[sig.image_id] = (dist, test_id)

    pairs = tuple(
        PurgePair(train_id=train_id, test_id=test_id, distance=dist)
        for train_id, (dist, test_id) in sorted(best.items())
    )
    return PurgeReport(
        removed_ids=frozenset(best),
        pairs=pairs,
        threshold=threshold,
    )


def save_index(index: DedupIndex, path: str | Path) -> None:
    """Persist signatures + parameters; chunk tables are rebuilt on load."""
    np.savez_compressed(
        Path(path),
        packed=index._matrix(),
        ids=np.array(index.ids, dtype=np.str_),
        params=np.array([index.width, index.m, index.r_max], dtype=np.int64),
    )


def load_index(path: str | Path) -> DedupIndex:
    with np.load(Path(path), allow_pickle=False) as data:
        width, m, r_max = (int(x) for x in data["params"])
        packed = data["packed"]
        ids = [str(x) for x in data["ids"]]
    index = DedupIndex(width=width, m=m, r_max=r_max)
    index.add_many([
        BinarySignature(image_id=ident, packed=packed[i])
        for i, ident in enumerate(ids)
    ])
    return index
