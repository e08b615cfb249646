"""Binary image signatures: the value type, file I/O, and a demo hash.

The signature file layout is binary: a header of magic ``b"WSIG"``, a
version byte, then width W and count N as little-endian uint32. Each of
the N records is a uint16 length-prefixed UTF-8 image id followed by
W / 8 signature bytes, most-significant-bit first.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import ParseError, ValidationError

DEFAULT_WIDTH = 256

_MAGIC = b"WSIG"
_VERSION = 1


def _check_width(width: int) -> None:
    if width < 64 or width & (width - 1) != 0:
        raise ValidationError(f"signature width must be a power of two >= 64, got {width}")


@dataclass(frozen=True)
class BinarySignature:
    """A fixed-width bit signature for one image, stored bit-packed."""

    image_id: str
    packed: np.ndarray  # uint8, shape (width // 8,), MSB-first

    def __post_init__(self):
        if not self.image_id:
            raise ValidationError("signature image_id must be non-empty")
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.ndim != 1:
            raise ValidationError("packed signature must be one-dimensional")
        _check_width(packed.shape[0] * 8)
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)

    @property
    def width(self) -> int:
        return self.packed.shape[0] * 8

    @classmethod
    def from_bits(cls, image_id: str, bits: Sequence[int] | np.ndarray) -> "BinarySignature":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
            raise ValidationError("bits must be a flat 0/1 vector")
        _check_width(arr.shape[0])
        return cls(image_id=image_id, packed=np.packbits(arr))

    @classmethod
    def from_bytes(cls, image_id: str, raw: bytes) -> "BinarySignature":
        return cls(image_id=image_id, packed=np.frombuffer(raw, dtype=np.uint8).copy())

    @classmethod
    def from_hex(cls, image_id: str, hexstr: str) -> "BinarySignature":
        return cls.from_bytes(image_id, bytes.fromhex(hexstr))

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed)

    def to_hex(self) -> str:
        return self.packed.tobytes().hex()


def write_signatures(path: str | Path, signatures: Iterable[BinarySignature]) -> int:
    """Write a signature file; returns the record count."""
    sigs = list(signatures)
    widths = {s.width for s in sigs}
    if len(widths) > 1:
        raise ValidationError(f"mixed signature widths {sorted(widths)}")
    width = widths.pop() if widths else DEFAULT_WIDTH
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BII", _VERSION, width, len(sigs)))
        for sig in sigs:
            ident = sig.image_id.encode("utf-8")
            if len(ident) > 0xFFFF:
                raise ValidationError(f"image id too long: {len(ident)} bytes")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(sig.packed.tobytes())
    return len(sigs)


def read_signatures(path: str | Path) -> list[BinarySignature]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ParseError(f"not a signature file (magic {magic!r})", path=str(path))
        version, width, count = struct.unpack("<BII", fh.read(9))
        if version != _VERSION:
            raise ParseError(f"unsupported signature file version {version}", path=str(path))
        _check_width(width)
        nbytes = width // 8
        out: list[BinarySignature] = []
        for i in range(count):
            raw_len = fh.read(2)
            if len(raw_len) != 2:
                raise ParseError(f"truncated record {i}", path=str(path))
            (id_len,) = struct.unpack("<H", raw_len)
            ident = fh.read(id_len)
            payload = fh.read(nbytes)
            if len(ident) != id_len or len(payload) != nbytes:
                raise ParseError(f"truncated record {i}", path=str(path))
            out.append(BinarySignature.from_bytes(ident.decode("utf-8"), payload))
        if fh.read(1):
            raise ParseError("trailing bytes after final record", path=str(path))
    return out


def dhash64(gray: np.ndarray, image_id: str) -> BinarySignature:
    """64-bit difference hash over a grayscale image array.

    A crude pixel-gradient stand-in for a learned similarity embedding,
    provided so the toolkit can be demoed end to end without any model.
    Do not expect its distance scale to match embedding-derived
    signatures; it is for self-contained demos only.
    """
    arr = np.asarray(gray, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValidationError("dhash64 needs a 2-D grayscale array, at least 1x2")
    rows = np.linspace(0, arr.shape[0] - 1, 8).round().astype(int)
    cols = np.linspace(0, arr.shape[1] - 1, 9).round().astype(int)
    small = arr[np.ix_(rows, cols)]
    bits = (small[:, :-1] > small[:, 1:]).astype(np.uint8).ravel()
    return BinarySignature.from_bits(image_id, bits)
