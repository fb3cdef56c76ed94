"""Word-embedding store: text/binary model IO, label resolution, vector math.

Models follow the common word2vec layouts. Text: a "V D" header line then V
rows of "token c1 ... cD". Binary: the same ascii header, then V records of
token bytes, a single 0x20, and D little-endian float32 values with an
optional trailing newline.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DataError,
    DimensionMismatchError,
    DuplicateTokenError,
    MalformedHeaderError,
    TruncatedRecordError,
    ZeroVectorError,
)

#: Distinguished token standing in for every label the store cannot resolve.
UNKNOWN_TOKEN = "<unk>"

_DISALLOWED = re.compile(r"[^a-z0-9 ]+")
_MULTISPACE = re.compile(r" +")


def clean_label(raw: str) -> str:
    """Lowercase, strip characters outside [a-z0-9 ], collapse spaces, trim."""
    lowered = raw.lower()
    kept = _DISALLOWED.sub("", lowered)
    return _MULTISPACE.sub(" ", kept).strip()


class Permutation(enum.Enum):
    """Spelling variant that matched during label resolution."""

    AS_IS = "as_is"
    NO_SPACE = "no_space"
    UNDERSCORE = "underscore"
    TITLE_UNDERSCORE = "title_underscore"


@dataclass(frozen=True)
class LabelResolution:
    """Outcome of resolving one raw label against a store."""

    raw_label: str
    token: str | None
    permutation: Permutation | None

    @property
    def is_resolved(self) -> bool:
        return self.token is not None


class EmbeddingStore:
    """Immutable token -> vector index.

    Vectors are float32 and read-only once loaded; concurrent reads are safe.
    """

    __slots__ = ("dim", "source_path", "_entries")

    def __init__(self, entries: Iterable[tuple[str, np.ndarray]], dim: int,
                 source_path: str = ""):
        indexed: dict[str, np.ndarray] = {}
        for token, vector in entries:
            if token in indexed:
                raise DuplicateTokenError(token)
            arr = np.asarray(vector, dtype=np.float32)
            if arr.shape != (dim,):
                raise DimensionMismatchError(
                    f"vector for {token!r} has {arr.size} components, expected {dim}")
            arr.setflags(write=False)
            indexed[token] = arr
        self.dim = dim
        self.source_path = source_path
        self._entries = indexed

    @property
    def vocab_size(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, token: str) -> bool:
        return token in self._entries

    def get(self, token: str) -> np.ndarray | None:
        return self._entries.get(token)

    def tokens(self) -> Iterator[str]:
        return iter(self._entries)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._entries.items())


def _parse_header(line: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise MalformedHeaderError(f"expected 'V D' header, got {line!r}")
    try:
        vocab, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise MalformedHeaderError(f"non-integer header fields: {line!r}") from None
    if vocab < 0 or dim < 0:
        raise MalformedHeaderError(f"negative header fields: {line!r}")
    return vocab, dim


def load_text_model(path: str | Path) -> EmbeddingStore:
    """Load a text-format model. Raises on header/row inconsistencies."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline()
        if not header.strip():
            raise MalformedHeaderError(f"{path}: empty file")
        vocab, dim = _parse_header(header)
        entries: list[tuple[str, np.ndarray]] = []
        line_no = 1
        for raw_line in handle:
            line_no += 1
            line = raw_line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise DimensionMismatchError(
                    f"{path} line {line_no}: expected {dim} components, "
                    f"found {len(parts) - 1}", line_no=line_no)
            token = parts[0]
            try:
                values = np.array([float(p) for p in parts[1:]], dtype=np.float32)
            except ValueError:
                raise DataError(f"{path} line {line_no}: unparseable number") from None
            entries.append((token, values))
    if len(entries) != vocab:
        raise MalformedHeaderError(
            f"{path}: header declares {vocab} rows, found {len(entries)}")
    return EmbeddingStore(entries, dim=dim, source_path=str(path))


def load_binary_model(path: str | Path) -> EmbeddingStore:
    """Load a binary-format model."""
    path = Path(path)
    blob = path.read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise MalformedHeaderError(f"{path}: missing header line")
    try:
        header = blob[:newline].decode("ascii")
    except UnicodeDecodeError:
        raise MalformedHeaderError(f"{path}: non-ascii header") from None
    vocab, dim = _parse_header(header)
    record_bytes = 4 * dim
    offset = newline + 1
    entries: list[tuple[str, np.ndarray]] = []
    for index in range(vocab):
        # Tolerate a newline left over from the previous record.
        while offset < len(blob) and blob[offset:offset + 1] == b"\n":
            offset += 1
        space = blob.find(b" ", offset)
        if space < 0:
            raise TruncatedRecordError(index)
        token = blob[offset:space].decode("utf-8")
        start = space + 1
        end = start + record_bytes
        if end > len(blob):
            raise TruncatedRecordError(index)
        vector = np.frombuffer(blob, dtype="<f4", count=dim, offset=start).copy()
        entries.append((token, vector))
        offset = end
    while offset < len(blob) and blob[offset:offset + 1] == b"\n":
        offset += 1
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes after last record")
    return EmbeddingStore(entries, dim=dim, source_path=str(path))


def load_model(path: str | Path, fmt: str = "auto") -> EmbeddingStore:
    """Dispatch on format; 'auto' treats a .bin suffix as binary."""
    if fmt == "auto":
        fmt = "binary" if Path(path).suffix == ".bin" else "text"
    if fmt == "text":
        return load_text_model(path)
    if fmt == "binary":
        return load_binary_model(path)
    raise ValueError(f"unknown model format: {fmt!r}")


def _checked_token(token: str) -> str:
    # Both serializations delimit the token with whitespace.
    if " " in token or "\n" in token:
        raise DataError(f"token contains whitespace and cannot be serialized: {token!r}")
    return token


def save_text_model(store: EmbeddingStore, path: str | Path) -> None:
    """Write a text model. 9 significant digits keep float32 exact."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{store.vocab_size} {store.dim}\n")
        for token, vector in store.items():
            rendered = " ".join(f"{float(c):.8e}" for c in vector)
            handle.write(f"{_checked_token(token)} {rendered}\n")


def save_binary_model(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(f"{store.vocab_size} {store.dim}\n".encode("ascii"))
        for token, vector in store.items():
            handle.write(_checked_token(token).encode("utf-8"))
            handle.write(b" ")
            handle.write(np.asarray(vector, dtype="<f4").tobytes())
            handle.write(b"\n")


def resolve_label(store: EmbeddingStore, raw: str) -> LabelResolution:
    """Resolve a raw label by trying its spelling permutations in order.

    Tries the cleaned label as-is, then with spaces removed, then with spaces
    replaced by underscores, then with each word capitalized and joined by
    underscores. The first token present in the store wins.
    """
    cleaned = clean_label(raw)
    if not cleaned:
        return LabelResolution(raw_label=raw, token=None, permutation=None)
    candidates = (
        (cleaned, Permutation.AS_IS),
        (cleaned.replace(" ", ""), Permutation.NO_SPACE),
        (cleaned.replace(" ", "_"), Permutation.UNDERSCORE),
        ("_".join(w.capitalize() for w in cleaned.split(" ")),
         Permutation.TITLE_UNDERSCORE),
    )
    for candidate, permutation in candidates:
        if candidate in store:
            return LabelResolution(raw_label=raw, token=candidate,
                                   permutation=permutation)
    return LabelResolution(raw_label=raw, token=None, permutation=None)


def _as_float64(u, v) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"vector dimensions differ: {a.shape} vs {b.shape}")
    return a, b


def cosine(u, v) -> float:
    """Cosine similarity (u.v)/(|u||v|), clamped to [-1, 1]."""
    a, b = _as_float64(u, v)
    norm_a = math.sqrt(float(np.dot(a, a)))
    norm_b = math.sqrt(float(np.dot(b, b)))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for zero vector")
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, value))


def euclidean(u, v) -> float:
    """Euclidean distance |u - v|."""
    a, b = _as_float64(u, v)
    diff = a - b
    return math.sqrt(float(np.dot(diff, diff)))
