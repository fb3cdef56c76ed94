"""Evaluation orchestration and optional prediction fetching.

Fetching and evaluating are separate phases: ``fetch_predictions`` talks to a
rate-limited endpoint and fills a persistent response cache, while
``run_evaluation`` is pure file-in, report-out and never touches the network.
Images are processed in natural ascending image_id order ("2" before "10"),
and per-image work parallelizes without changing any output byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import report as reporting
from .bipartition import (
    ConfusionLedger,
    ExampleScores,
    dedup_normalized,
    example_scores,
    label_based_scores,
    mean_scores,
)
from .embeddings import EmbeddingStore, cosine, load_model
from .errors import (
    AuthMissingError,
    BadConfidenceError,
    CacheCorruptError,
    DataError,
    DuplicateImageError,
    EmptyBagError,
    EmptyDatasetError,
    EvaluationError,
    QuotaExhaustedError,
    UpstreamError,
)
from .labelset import (
    EvaluationUnit,
    PredictedObject,
    PredictionRecord,
    label_bag,
    metadata_stats,
    read_ground_truth,
    read_predictions,
    top_k,
)
from .semantic import DEFAULT_THRESHOLD, semantic_example_scores
from .sentence import BowProvenance, ProviderConfig, fetch_embeddings, render_bow_text
from .wmd import dataset_wmd

logger = logging.getLogger(__name__)

_NATURAL_CHUNKS = re.compile(r"(\d+)")


def natural_key(value: str):
    """Sort key ordering embedded integers numerically: '2.jpg' < '10.jpg'."""
    return tuple(
        (0, int(chunk), "") if chunk.isdigit() else (1, 0, chunk)
        for chunk in _NATURAL_CHUNKS.split(value)
    )


# -- fetching ----------------------------------------------------------------

@dataclass(frozen=True)
class ApiClientSpec:
    """One upstream classifier endpoint plus its response-shape adapter.

    The *_path fields are dot-separated key paths into the JSON response:
    objects_path locates the predicted-object array, labels_path the label
    string or array inside each object, confidence_path (optional) the score.
    """

    api_id: str
    endpoint: str
    auth_env_var: str = ""
    requests_per_period: int = 60
    period_seconds: float = 60.0
    max_total: int | None = None
    objects_path: str = "objects"
    labels_path: str = "labels"
    confidence_path: str | None = "confidence"

    def __post_init__(self):
        if self.requests_per_period < 1:
            raise ValueError("requests_per_period must be >= 1")
        if self.period_seconds <= 0:
            raise ValueError("period_seconds must be positive")

    @classmethod
    def from_json(cls, payload: Mapping) -> "ApiClientSpec":
        return cls(
            api_id=payload["api_id"],
            endpoint=payload["endpoint"],
            auth_env_var=payload.get("auth_env_var", ""),
            requests_per_period=payload.get("requests_per_period", 60),
            period_seconds=payload.get("period_seconds", 60.0),
            max_total=payload.get("max_total"),
            objects_path=payload.get("objects_path", "objects"),
            labels_path=payload.get("labels_path", "labels"),
            confidence_path=payload.get("confidence_path", "confidence"),
        )


@dataclass(frozen=True)
class ImageRef:
    image_id: str
    path: str

    def load_bytes(self) -> bytes:
        return Path(self.path).read_bytes()


class SlidingWindowLimiter:
    """Allows at most ``limit`` acquisitions in any window of ``period``."""

    def __init__(self, limit: int, period: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self._limit = limit
        self._period = period
        self._clock = clock
        self._sleep = sleep
        self._issued: deque[float] = deque()

    def acquire(self) -> float:
        now = self._clock()
        while self._issued and self._issued[0] <= now - self._period:
            self._issued.popleft()
        if len(self._issued) >= self._limit:
            wait = self._issued[0] + self._period - now
            if wait > 0:
                self._sleep(wait)
            now = self._clock()
            while self._issued and self._issued[0] <= now - self._period:
                self._issued.popleft()
        self._issued.append(now)
        return now


def _dig(payload, dotted: str):
    value = payload
    for part in dotted.split("."):
        if not isinstance(value, Mapping) or part not in value:
            raise UpstreamError(f"response lacks field path {dotted!r}")
        value = value[part]
    return value


def normalize_response(spec: ApiClientSpec, image_id: str,
                       payload: Mapping) -> PredictionRecord:
    """Map a raw endpoint response onto a PredictionRecord via field paths."""
    raw_objects = _dig(payload, spec.objects_path)
    if not isinstance(raw_objects, list):
        raise UpstreamError(f"field {spec.objects_path!r} is not an array")
    objects = []
    for entry in raw_objects:
        labels = _dig(entry, spec.labels_path)
        if isinstance(labels, str):
            labels = [labels]
        if not isinstance(labels, list) or not labels:
            raise UpstreamError(f"field {spec.labels_path!r} is not a label list")
        confidence = None
        if spec.confidence_path is not None:
            try:
                raw_confidence = _dig(entry, spec.confidence_path)
            except UpstreamError:
                raw_confidence = None  # absent confidence ranks below present ones
            if raw_confidence is not None:
                try:
                    confidence = float(raw_confidence)
                except (TypeError, ValueError):
                    raise UpstreamError(
                        f"confidence field is not numeric: {raw_confidence!r}") \
                        from None
                if not (0.0 <= confidence <= 1.0):
                    raise BadConfidenceError(confidence)
        objects.append(PredictedObject(synonyms=tuple(labels), confidence=confidence))
    return PredictionRecord(image_id=image_id, api_id=spec.api_id,
                            objects=tuple(objects))


def _requests_transport(url: str, headers: Mapping[str, str], body: bytes,
                        timeout: float = 30.0) -> tuple[int, bytes]:
    import requests

    response = requests.post(url, headers=dict(headers), data=body, timeout=timeout)
    return response.status_code, response.content


_RETRYABLE = {429, 500, 502, 503, 504}
_FETCH_ATTEMPTS = 3


def fetch_predictions(spec: ApiClientSpec, refs: Sequence[ImageRef],
                      cache_dir: str | Path, *,
                      transport: Callable[..., tuple[int, bytes]] | None = None,
                      clock: Callable[[], float] = time.monotonic,
                      sleep: Callable[[float], None] = time.sleep,
                      env: Mapping[str, str] | None = None) -> list[PredictionRecord]:
    """Fetch (or reuse cached) predictions for every image reference.

    The cache holds one normalized record per (api_id, image digest); cached
    images cost zero upstream requests and do not count against max_total.
    Transient failures (connection errors, 429, 5xx) are retried up to three
    attempts with exponential backoff.
    """
    env = os.environ if env is None else env
    if spec.auth_env_var and not env.get(spec.auth_env_var):
        raise AuthMissingError(
            f"environment variable {spec.auth_env_var!r} is required but not set")
    transport = transport or _requests_transport
    limiter = SlidingWindowLimiter(spec.requests_per_period, spec.period_seconds,
                                   clock=clock, sleep=sleep)
    headers = {"Content-Type": "application/octet-stream"}
    if spec.auth_env_var:
        headers["Authorization"] = f"Bearer {env[spec.auth_env_var]}"
    cache_root = Path(cache_dir) / spec.api_id
    cache_root.mkdir(parents=True, exist_ok=True)
    issued = 0
    records: list[PredictionRecord] = []
    for ref in refs:
        body = ref.load_bytes()
        digest = hashlib.sha256(body).hexdigest()
        cache_path = cache_root / f"{digest}.json"
        if cache_path.exists():
            try:
                payload = json.loads(cache_path.read_text(encoding="utf-8"))
                records.append(_record_from_cache(payload))
            except (json.JSONDecodeError, KeyError, TypeError):
                raise CacheCorruptError(f"unreadable cache entry: {cache_path}") \
                    from None
            continue
        if spec.max_total is not None and issued + 1 > spec.max_total:
            raise QuotaExhaustedError(
                f"request #{issued + 1} for {spec.api_id} exceeds "
                f"max_total={spec.max_total}")
        issued += 1
        record = _fetch_one(spec, ref, body, headers, transport, limiter, sleep)
        tmp = cache_path.with_suffix(".tmp")
        tmp.write_text(_record_to_cache(record), encoding="utf-8")
        tmp.replace(cache_path)
        records.append(record)
    return records


def _fetch_one(spec, ref, body, headers, transport, limiter, sleep) -> PredictionRecord:
    last_error: Exception | None = None
    for attempt in range(_FETCH_ATTEMPTS):
        limiter.acquire()
        try:
            status, content = transport(spec.endpoint, headers, body)
        except Exception as exc:
            last_error = exc
        else:
            if status == 200:
                try:
                    payload = json.loads(content)
                except json.JSONDecodeError:
                    raise UpstreamError(
                        f"{spec.api_id}: non-JSON response for {ref.image_id}",
                        status=status) from None
                return normalize_response(spec, ref.image_id, payload)
            if status not in _RETRYABLE:
                raise UpstreamError(
                    f"{spec.api_id}: status {status} for {ref.image_id}",
                    status=status)
            last_error = UpstreamError(f"status {status}", status=status)
        if attempt < _FETCH_ATTEMPTS - 1:
            sleep(0.5 * 2 ** attempt)
    raise UpstreamError(
        f"{spec.api_id}: {ref.image_id} failed after {_FETCH_ATTEMPTS} attempts: "
        f"{last_error}")


def _record_to_cache(record: PredictionRecord) -> str:
    objects = []
    for obj in record.objects:
        payload: dict = {"labels": list(obj.synonyms)}
        if obj.confidence is not None:
            payload["confidence"] = obj.confidence
        objects.append(payload)
    return json.dumps({"image_id": record.image_id, "api_id": record.api_id,
                       "objects": objects})


def _record_from_cache(payload: Mapping) -> PredictionRecord:
    objects = tuple(
        PredictedObject(synonyms=tuple(obj["labels"]),
                        confidence=obj.get("confidence"))
        for obj in payload["objects"])
    return PredictionRecord(image_id=payload["image_id"], api_id=payload["api_id"],
                            objects=objects)


# -- evaluation --------------------------------------------------------------

@dataclass
class RunConfig:
    ground_truth_path: str
    prediction_paths: tuple[str, ...]
    embeddings_path: str
    embeddings_format: str = "auto"
    top_ks: tuple[int, ...] = (1, 3, 5)
    threshold: float = DEFAULT_THRESHOLD
    workers: int = 1
    include_semantic: bool = True
    include_label_based: bool = True
    include_wmd: bool = True
    sentence: ProviderConfig | None = None
    output_path: str = "report"
    output_format: str = "json_lines"

    def __post_init__(self):
        if not self.top_ks or any(k < 1 for k in self.top_ks):
            raise ValueError("top_ks must be non-empty with every k >= 1")
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError("threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        sentence = payload.get("sentence")
        return cls(
            ground_truth_path=payload["ground_truth"],
            prediction_paths=tuple(payload["predictions"]),
            embeddings_path=payload["embeddings"],
            embeddings_format=payload.get("embeddings_format", "auto"),
            top_ks=tuple(payload.get("top_ks", (1, 3, 5))),
            threshold=payload.get("threshold", DEFAULT_THRESHOLD),
            workers=payload.get("workers", 1),
            include_semantic=payload.get("semantic", True),
            include_label_based=payload.get("label_based", True),
            include_wmd=payload.get("wmd", True),
            sentence=ProviderConfig(**sentence) if sentence else None,
            output_path=payload.get("output", {}).get("path", "report"),
            output_format=payload.get("output", {}).get("format", "json_lines"),
        )


@dataclass(frozen=True)
class _PerImage:
    exact: ExampleScores
    semantic: ExampleScores | None
    truth_bag: tuple[str, ...]
    predicted_bag: tuple[str, ...]


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _annotate(exc: EvaluationError, api_id: str, image_id: str) -> EvaluationError:
    message = f"{api_id}/{image_id}: {exc}"
    try:
        return type(exc)(message)
    except TypeError:
        return DataError(message)


def run_evaluation(config: RunConfig) -> reporting.MetricReport:
    """Score every api_id x k combination and assemble the metric report.

    Output is deterministic: images are reduced in natural ascending
    image_id order regardless of the worker count, and the provenance block
    echoes only evaluation-relevant settings.
    """
    store = load_model(config.embeddings_path, config.embeddings_format)
    truth_records = read_ground_truth(config.ground_truth_path)
    usable_truth = {r.image_id: r for r in truth_records if r.usable}
    unusable_ids = {r.image_id for r in truth_records if not r.usable}
    if unusable_ids:
        logger.warning("skipping %d ground-truth records with no labels",
                       len(unusable_ids))

    by_api: dict[str, dict[str, PredictionRecord]] = {}
    for path in config.prediction_paths:
        for record in read_predictions(path):
            per_image = by_api.setdefault(record.api_id, {})
            if record.image_id in per_image:
                raise DuplicateImageError(record.image_id)
            per_image[record.image_id] = record

    if not by_api:
        raise EmptyDatasetError("no prediction records found")

    provenance = {
        "ground_truth_digest": _sha256_file(config.ground_truth_path),
        "prediction_digests": {str(p): _sha256_file(p)
                               for p in config.prediction_paths},
        "embeddings_digest": _sha256_file(config.embeddings_path),
        "config": {
            "top_ks": list(config.top_ks),
            "threshold": config.threshold,
            "semantic": config.include_semantic,
            "label_based": config.include_label_based,
            "wmd": config.include_wmd,
            "sentence_model": config.sentence.model if config.sentence else None,
        },
    }

    rows: list[reporting.ReportRow] = []
    for api_id in sorted(by_api):
        per_image = by_api[api_id]
        eval_ids = sorted((i for i in per_image if i in usable_truth),
                          key=natural_key)
        skip_missing_truth = sum(1 for i in per_image
                                 if i not in usable_truth and i not in unusable_ids)
        skip_empty_truth = sum(1 for i in per_image if i in unusable_ids)
        if not eval_ids:
            raise EmptyDatasetError(f"{api_id}: no images overlap the ground truth")
        label_space = sorted({
            label
            for image_id in eval_ids
            for label in dedup_normalized(usable_truth[image_id].labels)})
        for k in config.top_ks:
            units = [
                EvaluationUnit(
                    image_id=image_id,
                    truth_labels=usable_truth[image_id].labels,
                    objects=top_k(per_image[image_id], k).objects)
                for image_id in eval_ids
            ]
            results = _score_units(units, store, config, api_id)
            cells: dict[str, float] = {}
            exact_mean = mean_scores([r.exact for r in results])
            cells["accuracy"] = exact_mean.accuracy
            cells["precision"] = exact_mean.precision
            cells["recall"] = exact_mean.recall
            cells["f1"] = exact_mean.f1
            if config.include_semantic:
                semantic_mean = mean_scores([r.semantic for r in results])
                cells["accuracy_semantic"] = semantic_mean.accuracy
                cells["precision_semantic"] = semantic_mean.precision
                cells["recall_semantic"] = semantic_mean.recall
                cells["f1_semantic"] = semantic_mean.f1
            if config.include_label_based:
                ledger = ConfusionLedger(label_space)
                for unit in units:
                    ledger.accumulate(unit.truth_labels, unit.objects)
                label_scores = label_based_scores(ledger)
                cells["macro_precision"] = label_scores.macro_precision
                cells["macro_recall"] = label_scores.macro_recall
                cells["macro_f1"] = label_scores.macro_f1
                cells["micro_precision"] = label_scores.micro_precision
                cells["micro_recall"] = label_scores.micro_recall
                cells["micro_f1"] = label_scores.micro_f1
            skips = {"missing_truth": skip_missing_truth,
                     "empty_truth": skip_empty_truth}
            if config.include_wmd:
                try:
                    wmd_result = dataset_wmd(
                        ((r.truth_bag, r.predicted_bag) for r in results), store)
                except EvaluationError as exc:
                    raise _annotate(exc, api_id, "<dataset>") from exc
                cells["wmd"] = wmd_result.value
                skips["wmd_empty_prediction"] = wmd_result.skipped
            if config.sentence is not None:
                sentence_mean, sentence_skipped = _sentence_mean(
                    units, config.sentence, api_id, k)
                cells["sentence_similarity"] = sentence_mean
                skips["sentence_empty_prediction"] = sentence_skipped
            unknown_rate, labels_per_object = metadata_stats(
                [per_image[image_id] for image_id in eval_ids], store, k)
            rows.append(reporting.ReportRow(
                api_id=api_id, k=k, cells=cells,
                extras={"unknown_object_rate": unknown_rate,
                        "mean_labels_per_object": labels_per_object},
                skips=skips))

    columns = reporting.columns_for(rows[0].cells.keys())
    return reporting.MetricReport(columns=columns, rows=rows,
                                  provenance=provenance)


def _score_units(units: Sequence[EvaluationUnit], store: EmbeddingStore,
                 config: RunConfig, api_id: str) -> list[_PerImage]:
    def job(unit: EvaluationUnit) -> _PerImage:
        try:
            exact = example_scores(unit.truth_labels, unit.objects)
            semantic = (semantic_example_scores(unit.truth_labels, unit.objects,
                                                store, config.threshold)
                        if config.include_semantic else None)
            truth_bag = tuple(label_bag(unit.truth_labels, store))
            predicted_bag = tuple(label_bag(unit.objects, store))
        except EvaluationError as exc:
            raise _annotate(exc, api_id, unit.image_id) from exc
        return _PerImage(exact=exact, semantic=semantic,
                         truth_bag=truth_bag, predicted_bag=predicted_bag)

    if config.workers == 1:
        return [job(unit) for unit in units]
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        return list(executor.map(job, units))


def _sentence_mean(units: Sequence[EvaluationUnit], provider: ProviderConfig,
                   api_id: str, k: int) -> tuple[float, int]:
    texts: list[str] = []
    spans: list[tuple[int, int] | None] = []
    for unit in units:
        truth_text = render_bow_text(unit.truth_labels, BowProvenance.truth())
        try:
            predicted_text = render_bow_text(unit.objects,
                                             BowProvenance.prediction(api_id, k))
        except EmptyBagError:
            spans.append(None)
            continue
        spans.append((len(texts), len(texts) + 1))
        texts.extend([truth_text.text, predicted_text.text])
    skipped = sum(1 for span in spans if span is None)
    if not texts:
        raise EmptyDatasetError(f"{api_id}: no prediction texts to embed")
    vectors = fetch_embeddings(provider, texts)
    scores = [cosine(vectors[a], vectors[b])
              for span in spans if span is not None
              for a, b in (span,)]
    return sum(scores) / len(scores), skipped
