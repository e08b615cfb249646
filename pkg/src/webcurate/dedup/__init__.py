"""Near-duplicate detection over binary image signatures."""

from .index import (
    DEFAULT_CHUNKS,
    DEFAULT_PURGE_THRESHOLD,
    DedupIndex,
    PurgePair,
    PurgeReport,
    load_index,
    purge_train_vs_test,
    query_radius,
    save_index,
)
from .kernels import BACKEND, hamming_distance
from .signatures import (
    DEFAULT_WIDTH,
    BinarySignature,
    dhash64,
    read_signatures,
    write_signatures,
)

__all__ = [
    "BACKEND",
    "BinarySignature",
    "DEFAULT_CHUNKS",
    "DEFAULT_PURGE_THRESHOLD",
    "DEFAULT_WIDTH",
    "DedupIndex",
    "PurgePair",
    "PurgeReport",
    "dhash64",
    "hamming_distance",
    "load_index",
    "purge_train_vs_test",
    "query_radius",
    "read_signatures",
    "save_index",
    "write_signatures",
]
