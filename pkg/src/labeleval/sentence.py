"""Aggregated bag-of-words similarity through a sentence-embedding provider.

The truth and prediction label bags are rendered to deterministic
space-joined texts and embedded out-of-process, either by lookup in a
precomputed vector file or over HTTP. The wire format is a POST of
{"model": ..., "texts": [...]} answered by {"vectors": [[...], ...]};
precomputed files are newline-delimited {"digest", "model", "vector"}
records keyed by the sha256 hex digest of the text.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .embeddings import clean_label, cosine
from .errors import (
    CacheCorruptError,
    DimensionInconsistentError,
    EmptyBagError,
    ProviderUnavailableError,
)
from .labelset import PredictedObject

#: Environment variable that overrides the remote provider endpoint.
ENDPOINT_ENV_VAR = "LABELEVAL_SENTENCE_ENDPOINT"


@dataclass(frozen=True)
class BowProvenance:
    kind: str
    api_id: str | None = None
    k: int | None = None

    @classmethod
    def truth(cls) -> "BowProvenance":
        return cls(kind="truth")

    @classmethod
    def prediction(cls, api_id: str, k: int) -> "BowProvenance":
        return cls(kind="prediction", api_id=api_id, k=k)


@dataclass(frozen=True)
class BowText:
    text: str
    provenance: BowProvenance


@dataclass(frozen=True)
class ProviderConfig:
    """Where sentence vectors come from.

    mode 'file' reads a precomputed vector file at ``path``; mode 'remote'
    POSTs batches to ``endpoint`` with retry/backoff and caches replies under
    ``cache_dir`` keyed by (model, text digest).
    """

    mode: str
    model: str
    path: str | None = None
    endpoint: str | None = None
    timeout: float = 10.0
    max_retries: int = 3
    batch_size: int = 16
    cache_dir: str | None = None

    def __post_init__(self):
        if self.mode not in ("file", "remote"):
            raise ValueError(f"unknown provider mode: {self.mode!r}")
        if self.mode == "file" and not self.path:
            raise ValueError("file provider requires a path")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def render_bow_text(bag, provenance: BowProvenance | None = None) -> BowText:
    """Join a label bag into one cleaned, space-separated string.

    Accepts truth labels in file order or PredictedObject entries in
    post-top-k order; object synonyms keep their listed order.
    """
    words: list[str] = []
    for item in bag:
        if isinstance(item, PredictedObject):
            words.extend(clean_label(s) for s in item.synonyms)
        else:
            words.append(clean_label(item))
    words = [w for w in words if w]
    if not words:
        raise EmptyBagError("no renderable labels in bag")
    return BowText(text=" ".join(words),
                   provenance=provenance or BowProvenance.truth())


def _load_precomputed(path: str, model: str) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                digest = record["digest"]
                vector = np.asarray(record["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise CacheCorruptError(
                    f"{path} line {line_no}: unreadable vector record") from None
            if record.get("model") == model:
                vectors[digest] = vector
    return vectors


class _DiskCache:
    """One JSON file per (model, digest); atomic writes, concurrent-read safe."""

    def __init__(self, root: str, model: str):
        self._dir = Path(root) / hashlib.sha256(model.encode("utf-8")).hexdigest()[:16]
        self._dir.mkdir(parents=True, exist_ok=True)

    def get(self, digest: str) -> np.ndarray | None:
        path = self._dir / f"{digest}.json"
        if not path.exists():
            return None
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            return np.asarray(record["vector"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise CacheCorruptError(f"unreadable cache entry: {path}") from None

    def put(self, digest: str, vector: np.ndarray) -> None:
        path = self._dir / f"{digest}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"vector": [float(x) for x in vector]}),
                       encoding="utf-8")
        tmp.replace(path)


def _post_json(endpoint: str, payload: dict, timeout: float) -> dict:
    import requests

    response = requests.post(endpoint, json=payload, timeout=timeout)
    response.raise_for_status()
    return response.json()


def _fetch_remote(config: ProviderConfig, texts: Sequence[str],
                  post: Callable[[str, dict, float], dict],
                  sleep: Callable[[float], None]) -> list[np.ndarray]:
    endpoint = config.endpoint
    cache = _DiskCache(config.cache_dir, config.model) if config.cache_dir else None
    resolved: dict[str, np.ndarray] = {}
    missing: list[str] = []
    for text in texts:
        digest = text_digest(text)
        if digest in resolved:
            continue
        cached = cache.get(digest) if cache else None
        if cached is not None:
            resolved[digest] = cached
        elif text not in missing:
            missing.append(text)
    for start in range(0, len(missing), config.batch_size):
        batch = missing[start:start + config.batch_size]
        payload = {"model": config.model, "texts": batch}
        reply = None
        for attempt in range(config.max_retries + 1):
            try:
                reply = post(endpoint, payload, config.timeout)
                break
            except Exception as exc:
                if attempt == config.max_retries:
                    raise ProviderUnavailableError(
                        f"provider at {endpoint} failed after "
                        f"{config.max_retries + 1} attempts: {exc}") from exc
                sleep(0.25 * 2 ** attempt)
        vectors = reply.get("vectors") if isinstance(reply, dict) else None
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            raise ProviderUnavailableError(
                f"provider returned {0 if not isinstance(vectors, list) else len(vectors)}"
                f" vectors for {len(batch)} texts")
        for text, vector in zip(batch, vectors):
            digest = text_digest(text)
            arr = np.asarray(vector, dtype=np.float64)
            resolved[digest] = arr
            if cache:
                cache.put(digest, arr)
    out = [resolved[text_digest(text)] for text in texts]
    dims = {v.shape for v in out}
    if len(dims) > 1:
        raise DimensionInconsistentError(f"provider vector lengths differ: {sorted(dims)}")
    return out


def fetch_embeddings(config: ProviderConfig, texts: Sequence[str], *,
                     post: Callable[[str, dict, float], dict] = _post_json,
                     sleep: Callable[[float], None] = time.sleep) -> list[np.ndarray]:
    """One vector per input text, from the configured provider."""
    if not texts:
        raise ValueError("texts must be non-empty")
    if config.mode == "file":
        table = _load_precomputed(config.path, config.model)
        out = []
        for text in texts:
            digest = text_digest(text)
            if digest not in table:
                raise ProviderUnavailableError(
                    f"precomputed file {config.path} lacks digest {digest}"
                    f" for model {config.model!r}")
            out.append(table[digest])
        dims = {v.shape for v in out}
        if len(dims) > 1:
            raise DimensionInconsistentError(
                f"precomputed vector lengths differ: {sorted(dims)}")
        return out
    return _fetch_remote(config, texts, post, sleep)


def sentence_score(truth_text: BowText | str, predicted_text: BowText | str,
                   config: ProviderConfig, **fetch_kwargs) -> float:
    """Cosine similarity of the two texts' provider embeddings."""
    left = truth_text.text if isinstance(truth_text, BowText) else truth_text
    right = predicted_text.text if isinstance(predicted_text, BowText) else predicted_text
    vectors = fetch_embeddings(config, [left, right], **fetch_kwargs)
    return cosine(vectors[0], vectors[1])
