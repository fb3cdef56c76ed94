"""Ground-truth and prediction ingestion, top-k selection, and label bags.

Record files are newline-delimited JSON, one record per line:
ground truth {"image_id": ..., "labels": [...]}, predictions
{"image_id": ..., "api_id": ..., "objects": [{"labels": [...],
"confidence": ...}]} where confidence may be omitted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .embeddings import UNKNOWN_TOKEN, EmbeddingStore, resolve_label
from .errors import (
    BadConfidenceError,
    DuplicateImageError,
    EmptyInputError,
    ParseError,
)


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: str
    labels: tuple[str, ...]

    @property
    def usable(self) -> bool:
        return len(self.labels) > 0


@dataclass(frozen=True)
class PredictedObject:
    """One predicted object carrying interchangeable synonym labels."""

    synonyms: tuple[str, ...]
    confidence: float | None = None


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    api_id: str
    objects: tuple[PredictedObject, ...]


@dataclass(frozen=True)
class EvaluationUnit:
    """One image's truth labels paired with its post-top-k objects."""

    image_id: str
    truth_labels: tuple[str, ...]
    objects: tuple[PredictedObject, ...]


def _require(condition: bool, message: str, line_no: int) -> None:
    if not condition:
        raise ParseError(message, line_no=line_no)


def _string_list(value, field: str, line_no: int) -> tuple[str, ...]:
    _require(isinstance(value, list), f"{field} must be an array", line_no)
    for item in value:
        _require(isinstance(item, str), f"{field} entries must be strings", line_no)
    return tuple(value)


def read_ground_truth(path: str | Path) -> list[GroundTruthRecord]:
    records: list[GroundTruthRecord] = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no=line_no) from None
            _require(isinstance(payload, dict), "record must be an object", line_no)
            image_id = payload.get("image_id")
            _require(isinstance(image_id, str) and image_id != "",
                     "image_id must be a non-empty string", line_no)
            labels = _string_list(payload.get("labels"), "labels", line_no)
            if image_id in seen:
                raise DuplicateImageError(image_id)
            seen.add(image_id)
            records.append(GroundTruthRecord(image_id=image_id, labels=labels))
    return records


def _parse_object(payload, line_no: int) -> PredictedObject:
    _require(isinstance(payload, dict), "object entries must be objects", line_no)
    synonyms = _string_list(payload.get("labels"), "labels", line_no)
    _require(len(synonyms) > 0, "object labels must be non-empty", line_no)
    confidence = payload.get("confidence")
    if confidence is not None:
        _require(isinstance(confidence, (int, float)) and not isinstance(confidence, bool),
                 "confidence must be a number", line_no)
        confidence = float(confidence)
        if not (0.0 <= confidence <= 1.0):
            raise BadConfidenceError(confidence)
    return PredictedObject(synonyms=synonyms, confidence=confidence)


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no=line_no) from None
            _require(isinstance(payload, dict), "record must be an object", line_no)
            image_id = payload.get("image_id")
            api_id = payload.get("api_id")
            _require(isinstance(image_id, str) and image_id != "",
                     "image_id must be a non-empty string", line_no)
            _require(isinstance(api_id, str) and api_id != "",
                     "api_id must be a non-empty string", line_no)
            objects_payload = payload.get("objects")
            _require(isinstance(objects_payload, list), "objects must be an array", line_no)
            objects = tuple(_parse_object(o, line_no) for o in objects_payload)
            records.append(PredictionRecord(image_id=image_id, api_id=api_id,
                                            objects=objects))
    return records


def ground_truth_to_json(record: GroundTruthRecord) -> str:
    return json.dumps({"image_id": record.image_id, "labels": list(record.labels)})


def prediction_to_json(record: PredictionRecord) -> str:
    objects = []
    for obj in record.objects:
        payload: dict = {"labels": list(obj.synonyms)}
        if obj.confidence is not None:
            payload["confidence"] = obj.confidence
        objects.append(payload)
    return json.dumps({"image_id": record.image_id, "api_id": record.api_id,
                       "objects": objects})


def write_ground_truth(records: Sequence[GroundTruthRecord], path: str | Path) -> None:
    Path(path).write_text(
        "".join(ground_truth_to_json(r) + "\n" for r in records), encoding="utf-8")


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    Path(path).write_text(
        "".join(prediction_to_json(r) + "\n" for r in records), encoding="utf-8")


def top_k(record: PredictionRecord, k: int) -> PredictionRecord:
    """Keep the k most confident objects.

    Stable sort: ties keep file order, objects without a confidence rank
    below every object that has one.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        record.objects,
        key=lambda obj: math.inf if obj.confidence is None else -obj.confidence,
    )
    return PredictionRecord(image_id=record.image_id, api_id=record.api_id,
                            objects=tuple(ranked[:k]))


def _resolve_token(store: EmbeddingStore, raw: str) -> str:
    resolution = resolve_label(store, raw)
    return resolution.token if resolution.token is not None else UNKNOWN_TOKEN


def label_bag(side, store: EmbeddingStore) -> list[str]:
    """Flatten one side of an evaluation unit into resolved tokens.

    Accepts either a sequence of truth labels or a sequence of
    PredictedObject; unresolved labels become UNKNOWN_TOKEN.
    """
    bag: list[str] = []
    for item in side:
        if isinstance(item, PredictedObject):
            bag.extend(_resolve_token(store, syn) for syn in item.synonyms)
        else:
            bag.append(_resolve_token(store, item))
    return bag


def metadata_stats(records: Sequence[PredictionRecord], store: EmbeddingStore,
                   k: int) -> tuple[float, float]:
    """(unknown_object_rate, mean_labels_per_object) over the top-k objects.

    An object counts as unknown only when every one of its synonyms fails to
    resolve.
    """
    total_objects = 0
    unknown_objects = 0
    total_synonyms = 0
    for record in records:
        for obj in top_k(record, k).objects:
            total_objects += 1
            total_synonyms += len(obj.synonyms)
            if all(not resolve_label(store, syn).is_resolved for syn in obj.synonyms):
                unknown_objects += 1
    if total_objects == 0:
        raise EmptyInputError("no objects to compute metadata statistics over")
    return unknown_objects / total_objects, total_synonyms / total_objects
