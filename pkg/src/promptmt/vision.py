"""Per-image visual tokens: the VTOK binary container and a deterministic
pseudo-feature generator.

The real vision backbone is external and frozen; this package only consumes
its outputs. A VTOK file holds a matrix of M_v token vectors of width d_v
per image id. The pseudo generator stands in for a backbone so the whole
system is testable without one: features are derived from a hash of
(image_id, seed), so the same inputs produce bit-identical matrices on any
platform.

VTOK layout, all integers little-endian:
    magic "VTOK" | version u32 | count u32 | M_v u32 | d_v u32
    then `count` records: id_len u16 | id utf-8 | M_v*d_v float32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import FormatError
from .seeding import rng_for

MAGIC = b"VTOK"
VERSION = 1


@dataclass
class VisualTokens:
    image_id: str
    tokens: np.ndarray  # [M_v, d_v] float32

    def __post_init__(self):
        self.tokens = np.ascontiguousarray(self.tokens, dtype=np.float32)
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1:
            raise FormatError(f"visual tokens for {self.image_id!r} must be a "
                              f"non-empty matrix, got shape {self.tokens.shape}")
        if not np.isfinite(self.tokens).all():
            raise FormatError(f"non-finite visual token for {self.image_id!r}")


def write_vtok(records: Iterable[VisualTokens] | Mapping[str, VisualTokens],
               path: str | Path):
    """Serialize records to a VTOK file. All records must share one
    (M_v, d_v) shape and ids must be unique."""
    if isinstance(records, Mapping):
        records = list(records.values())
    else:
        records = list(records)
    if records:
        m_v, d_v = records[0].tokens.shape
    else:
        m_v = d_v = 0
    seen = set()
    for rec in records:
        if rec.tokens.shape != (m_v, d_v):
            raise FormatError(f"record {rec.image_id!r} has shape "
                              f"{rec.tokens.shape}, file uses ({m_v}, {d_v})")
        if rec.image_id in seen:
            raise FormatError(f"duplicate image id {rec.image_id!r}")
        seen.add(rec.image_id)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, len(records), m_v, d_v))
        for rec in records:
            ident = rec.image_id.encode("utf-8")
            f.write(struct.pack("<H", len(ident)))
            f.write(ident)
            f.write(rec.tokens.astype("<f4").tobytes())


def read_vtok(path: str | Path) -> dict[str, VisualTokens]:
    """Parse a VTOK file into an id -> VisualTokens map.

    Structural defects (bad magic, truncation, duplicate ids) raise
    FormatError carrying the byte offset of the problem.
    """
    path = Path(path)
    data = path.read_bytes()
    offset = 0

    def take(n, what):
        nonlocal offset
        if offset + n > len(data):
            raise FormatError(f"{path}: truncated while reading {what}",
                              offset=offset)
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: bad magic, not a VTOK file", offset=0)
    version, count, m_v, d_v = struct.unpack("<IIII", take(16, "header"))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)

    out: dict[str, VisualTokens] = {}
    for i in range(count):
        (id_len,) = struct.unpack("<H", take(2, f"id length of record {i}"))
        ident = take(id_len, f"id of record {i}").decode("utf-8")
        rec_offset = offset
        raw = take(m_v * d_v * 4, f"tokens of record {i} ({ident!r})")
        if ident in out:
            raise FormatError(f"{path}: duplicate image id {ident!r}",
                              offset=rec_offset)
        tokens = np.frombuffer(raw, dtype="<f4").reshape(m_v, d_v).copy()
        if not np.isfinite(tokens).all():
            raise FormatError(f"{path}: non-finite value in record {ident!r}",
                              offset=rec_offset)
        out[ident] = VisualTokens(image_id=ident, tokens=tokens)
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after "
                          f"declared {count} records", offset=offset)
    return out


def pseudo_visual_tokens(image_id: str, m_v: int, d_v: int,
                         seed: int) -> VisualTokens:
    """Deterministic unit-norm pseudo features for one image id."""
    if m_v < 1 or d_v < 1:
        raise FormatError(f"m_v and d_v must be >= 1, got ({m_v}, {d_v})")
    rng = rng_for("pseudo-vtok", image_id, seed)
    mat = rng.standard_normal((m_v, d_v))
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    return VisualTokens(image_id=image_id, tokens=mat.astype(np.float32))


def make_pseudo_vtok(image_ids: Iterable[str], m_v: int, d_v: int, seed: int,
                     path: str | Path) -> int:
    """Write pseudo features for every id to ``path``; returns the count."""
    records = [pseudo_visual_tokens(i, m_v, d_v, seed) for i in image_ids]
    write_vtok(records, path)
    return len(records)
