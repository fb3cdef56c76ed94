"""Shared worked-example fixture: one street-scene image, fifteen APIs.

The embedding store is constructed so that exactly the intended
similar-label pairs clear the 0.4 threshold (each such word mixes its
target's axis with a private axis at the designed cosine) while every other
truth/prediction pair is orthogonal. Multi-word tokens are stored under the
spelling permutation the resolver is expected to discover.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from labeleval.embeddings import EmbeddingStore
from labeleval.labelset import (
    GroundTruthRecord,
    PredictedObject,
    PredictionRecord,
    write_ground_truth,
    write_predictions,
)

IMAGE_ID = "1.jpg"

TRUTH_LABELS = [
    "arm", "back", "bike", "bikes", "building", "car", "chin", "clock",
    "glasses", "guy", "headlight", "jacket", "lamp post", "man", "pants",
    "parking meter", "shade", "shirt", "shoes", "sidewalk", "sign",
    "sneakers", "street", "tree", "tree trunk",
]

# api_id -> top-5 objects (synonym tuples, most confident first)
PREDICTIONS: dict[str, list[tuple[str, ...]]] = {
    "clarifai": [("city",), ("vehicle",), ("people",), ("road",), ("street",)],
    "google_cloud_vision": [("city",), ("pedestrian",), ("street",),
                            ("signage",), ("walking",)],
    "ibm_watson": [("street",), ("city",), ("crowd",), ("people",)],
    "imagga": [("sidewalk",), ("walk",), ("street",), ("road",), ("city",)],
    "microsoft_computer_vision": [("outdoor",), ("building",), ("street",),
                                  ("road",), ("sidewalk",)],
    "wolfram": [("road",), ("path",), ("container",), ("conveyance",),
                ("vehicle",)],
    "deepdetect": [("ski",), ("crutch",), ("prison", "prison house"),
                   ("sliding door",), ("shovel",)],
    "inception_resnet_v2": [
        ("parking meter",),
        ("traffic light", "traffic signal", "stoplight"),
        ("pay-phone", "pay-station"),
        ("mailbox", "letter box"),
        ("cash machine", "cash dispenser", "automated teller machine"),
    ],
    "inception_v3": [
        ("jinrikisha", "ricksha", "rickshaw"),
        ("ashcan", "trash can", "garbage can", "wastebin"),
        ("streetcar", "tram", "tramcar", "trolley", "trolley car"),
        ("bookshop", "bookstore", "bookstall"),
        ("plastic bag",),
    ],
    "mobilenet_v2": [
        ("parking meter",),
        ("jinrikisha", "ricksha", "rickshaw"),
        ("police van", "police wagon", "paddy wagon"),
        ("cab", "hack", "taxi", "taxicab"),
        ("crutch",),
    ],
    "resnet50": [
        ("parking meter",),
        ("mailbox", "letter box"),
        ("ashcan", "trash can", "garbage can", "wastebin"),
        ("traffic light", "traffic signal", "stoplight"),
        ("jinrikisha", "ricksha", "rickshaw"),
    ],
    "resnet50_coco": [("person",), ("car",), ("bicycle",), ("traffic light",),
                      ("truck",)],
    "vgg19": [
        ("parking meter",),
        ("jinrikisha", "ricksha", "rickshaw"),
        ("gas pump", "gasoline pump", "petrol pump"),
        ("ski",),
        ("ambulance",),
    ],
    "yolo_v3": [("pole",), ("cash machine",), ("guillotine",), ("plastic bag",),
                ("jean",)],
    "yolo_v3_coco": [("person",), ("car",), ("truck",), ("bicycle",),
                     ("parking meter",)],
}

# (recall, precision) over exact matches; hand-checkable: matches / 25 truth
# labels and matches / object count
EXPECTED_EXACT: dict[str, tuple[float, float]] = {
    "clarifai": (0.04, 0.2),
    "google_cloud_vision": (0.04, 0.2),
    "ibm_watson": (0.04, 0.25),
    "imagga": (0.08, 0.4),
    "microsoft_computer_vision": (0.12, 0.6),
    "wolfram": (0.0, 0.0),
    "deepdetect": (0.0, 0.0),
    "inception_resnet_v2": (0.04, 0.2),
    "inception_v3": (0.0, 0.0),
    "mobilenet_v2": (0.04, 0.2),
    "resnet50": (0.04, 0.2),
    "resnet50_coco": (0.04, 0.2),
    "vgg19": (0.04, 0.2),
    "yolo_v3": (0.0, 0.0),
    "yolo_v3_coco": (0.08, 0.4),
}

# (recall_semantic, precision_semantic); yolo_v3 is deliberately absent, its
# upstream-reported semantic recall cannot be reproduced by any count / 25.
EXPECTED_SEMANTIC: dict[str, tuple[float, float]] = {
    "clarifai": (0.08, 0.4),
    "google_cloud_vision": (0.08, 0.4),
    "ibm_watson": (0.04, 0.25),
    "imagga": (0.08, 0.4),
    "microsoft_computer_vision": (0.12, 0.6),
    "wolfram": (0.04, 0.2),
    "deepdetect": (0.0, 0.0),
    "inception_resnet_v2": (0.08, 0.4),
    "inception_v3": (0.04, 0.2),
    "mobilenet_v2": (0.12, 0.6),
    "resnet50": (0.12, 0.6),
    "resnet50_coco": (0.12, 0.6),
    "vgg19": (0.08, 0.4),
    "yolo_v3_coco": (0.16, 0.8),
}

#: Rows whose semantic cells the acceptance gate requires.
SEMANTIC_GRID_ROWS = [
    "clarifai", "google_cloud_vision", "wolfram", "mobilenet_v2", "resnet50",
    "resnet50_coco", "inception_resnet_v2", "yolo_v3_coco",
]

# predicted word -> (truth label it should clear the threshold against, cosine)
SIMILAR_PAIRS: dict[str, tuple[str, float]] = {
    "vehicle": ("car", 0.78),
    "cab": ("car", 0.66),
    "pedestrian": ("man", 0.55),
    "person": ("man", 0.58),
    "stoplight": ("lamp post", 0.52),
    "rickshaw": ("bike", 0.62),
    "bicycle": ("bike", 0.72),
    "jean": ("pants", 0.57),
}

# Multi-word truth labels live in the store under one spelling permutation
# each; "parking meter" deliberately only under the capitalized form.
TRUTH_TOKEN = {
    "lamp post": "lamp_post",
    "parking meter": "Parking_Meter",
    "tree trunk": "tree_trunk",
}

# Predicted words stored on private axes (orthogonal to everything).
PLAIN_PREDICTED_TOKENS = [
    "city", "people", "road", "signage", "walking", "crowd", "walk",
    "outdoor", "path", "container", "conveyance", "ski", "crutch", "prison",
    "shovel", "traffic_light", "mailbox", "ashcan", "wastebin", "streetcar",
    "tram", "tramcar", "trolley", "bookshop", "bookstore", "bookstall",
    "jinrikisha", "ricksha", "hack", "taxi", "taxicab", "truck", "pole",
    "guillotine", "ambulance",
]


def _truth_token(label: str) -> str:
    return TRUTH_TOKEN.get(label, label)


def build_store() -> EmbeddingStore:
    axis_tokens = ([_truth_token(label) for label in TRUTH_LABELS]
                   + PLAIN_PREDICTED_TOKENS + sorted(SIMILAR_PAIRS))
    axis = {token: index for index, token in enumerate(axis_tokens)}
    dim = len(axis_tokens)
    entries = []
    for label in TRUTH_LABELS:
        token = _truth_token(label)
        vector = np.zeros(dim, dtype=np.float32)
        vector[axis[token]] = 1.0
        entries.append((token, vector))
    for token in PLAIN_PREDICTED_TOKENS:
        vector = np.zeros(dim, dtype=np.float32)
        vector[axis[token]] = 1.0
        entries.append((token, vector))
    for word, (target_label, similarity) in SIMILAR_PAIRS.items():
        vector = np.zeros(dim, dtype=np.float32)
        vector[axis[_truth_token(target_label)]] = similarity
        vector[axis[word]] = math.sqrt(1.0 - similarity ** 2)
        entries.append((word, vector))
    return EmbeddingStore(entries, dim=dim, source_path="<fixture>")


def truth_record() -> GroundTruthRecord:
    return GroundTruthRecord(image_id=IMAGE_ID, labels=tuple(TRUTH_LABELS))


def prediction_record(api_id: str) -> PredictionRecord:
    objects = tuple(
        PredictedObject(synonyms=synonyms, confidence=0.95 - 0.05 * rank)
        for rank, synonyms in enumerate(PREDICTIONS[api_id]))
    return PredictionRecord(image_id=IMAGE_ID, api_id=api_id, objects=objects)


def write_fixture_files(directory: Path) -> tuple[Path, list[Path]]:
    """Materialize the fixture as record files for harness/CLI runs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    truth_path = directory / "ground_truth.jsonl"
    write_ground_truth([truth_record()], truth_path)
    prediction_paths = []
    for api_id in sorted(PREDICTIONS):
        path = directory / f"predictions_{api_id}.jsonl"
        write_predictions([prediction_record(api_id)], path)
        prediction_paths.append(path)
    return truth_path, prediction_paths
