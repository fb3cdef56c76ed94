"""Semantic variants of the example-based metrics.

A predicted object counts as a semantic true positive when the cosine
similarity between its embedding and a ground-truth label's embedding reaches
the threshold (default 0.4). Cells where the object's synonyms textually
equal the truth label are pinned to 1.0 and always count, so semantic scores
can never fall below the exact ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bipartition import dedup_normalized, scores_from_counts, ExampleScores
from .embeddings import EmbeddingStore, clean_label, cosine, resolve_label
from .errors import ZeroVectorError
from .labelset import PredictedObject

#: Default semantic true-positive threshold.
DEFAULT_THRESHOLD = 0.4


@dataclass(frozen=True)
class SimilarityMatrix:
    """Truth (rows, deduplicated) x objects (columns) similarity grid.

    values holds -1.0 where either side is unresolvable, so such cells never
    reach a positive threshold; exact marks text-equality cells pinned at 1.0.
    """

    truth_labels: tuple[str, ...]
    values: np.ndarray
    exact: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SemanticMatch:
    """One-to-one (truth index, object index, similarity) pairs."""

    pairs: tuple[tuple[int, int, float], ...]
    threshold: float

    @property
    def matched(self) -> int:
        return len(self.pairs)


def similarity_matrix(truth: Sequence[str], objects: Sequence[PredictedObject],
                      store: EmbeddingStore) -> SimilarityMatrix:
    truth_d = dedup_normalized(truth)
    truth_vectors = []
    for label in truth_d:
        resolution = resolve_label(store, label)
        truth_vectors.append(store.get(resolution.token) if resolution.is_resolved
                             else None)
    values = np.full((len(truth_d), len(objects)), -1.0)
    exact = np.zeros((len(truth_d), len(objects)), dtype=bool)
    for oj, obj in enumerate(objects):
        cleaned = [clean_label(s) for s in obj.synonyms]
        vectors = []
        for synonym in obj.synonyms:
            resolution = resolve_label(store, synonym)
            if resolution.is_resolved:
                vectors.append(store.get(resolution.token))
        for ti, label in enumerate(truth_d):
            if label in cleaned:
                values[ti, oj] = 1.0
                exact[ti, oj] = True
                continue
            truth_vec = truth_vectors[ti]
            if truth_vec is None or not vectors:
                continue  # stays at -1
            best = -1.0
            for vec in vectors:
                try:
                    best = max(best, cosine(truth_vec, vec))
                except ZeroVectorError:
                    continue  # a zero-norm stored vector cannot be scored
            values[ti, oj] = best
    return SimilarityMatrix(truth_labels=tuple(truth_d), values=values, exact=exact)


def semantic_intersection(matrix: SimilarityMatrix, threshold: float) -> SemanticMatch:
    """Greedy one-to-one matching of cells at or above the threshold.

    Exact cells are matched first, replicating the exact matcher's object
    order, and count at any threshold; the remaining cells are then taken
    highest-similarity first, ties broken by lower truth index then lower
    object index. This keeps the semantic match a superset of the exact one.
    """
    n_truth, n_objects = matrix.shape
    truth_used = [False] * n_truth
    object_used = [False] * n_objects
    pairs: list[tuple[int, int, float]] = []
    for oj in range(n_objects):
        for ti in range(n_truth):
            if not truth_used[ti] and not object_used[oj] and matrix.exact[ti, oj]:
                truth_used[ti] = True
                object_used[oj] = True
                pairs.append((ti, oj, float(matrix.values[ti, oj])))
                break
    candidates = [
        (ti, oj, float(matrix.values[ti, oj]))
        for ti in range(n_truth)
        for oj in range(n_objects)
        if not matrix.exact[ti, oj] and matrix.values[ti, oj] >= threshold
    ]
    candidates.sort(key=lambda cell: (-cell[2], cell[0], cell[1]))
    for ti, oj, similarity in candidates:
        if not truth_used[ti] and not object_used[oj]:
            truth_used[ti] = True
            object_used[oj] = True
            pairs.append((ti, oj, similarity))
    return SemanticMatch(pairs=tuple(pairs), threshold=threshold)


def semantic_example_scores(truth: Sequence[str], objects: Sequence[PredictedObject],
                            store: EmbeddingStore,
                            threshold: float = DEFAULT_THRESHOLD) -> ExampleScores:
    truth_d = dedup_normalized(truth)
    matrix = similarity_matrix(truth, objects, store)
    match = semantic_intersection(matrix, threshold)
    return scores_from_counts(match.matched, len(truth_d), len(objects))
