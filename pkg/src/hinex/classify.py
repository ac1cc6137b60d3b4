"""Apply a classifier to region or image embeddings.

Scoring is one cosine per class; prediction is the argmax. The classifier
matrix is read-only, so everything here is stateless and freely parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nexus import NexusClassifier


@dataclass(frozen=True)
class Prediction:
    class_index: int
    class_name: str
    score: float
    all_scores: np.ndarray | None = None


def _check_dim(clf: NexusClassifier, width: int) -> None:
    if width != clf.dim:
        raise ValueError(f"query dimension {width} != classifier dimension {clf.dim}")


def scores(clf: NexusClassifier, z: np.ndarray, *, normalize_query: bool = True) -> np.ndarray:
    """Per-class cosine scores in vocabulary order.

    Raw region embeddings are accepted and normalized by default; pass
    normalize_query=False to get plain dot products against the unit rows.
    """
    q = np.asarray(z, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("scores expects a single query vector")
    _check_dim(clf, q.shape[0])
    if normalize_query:
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            raise ValueError("cannot score a zero query vector")
        q = q / norm
    return clf.matrix.astype(np.float64) @ q


def predict(clf: NexusClassifier, z: np.ndarray) -> Prediction:
    """Highest-scoring class; exact ties go to the lowest class index."""
    q = np.asarray(z, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("predict expects a single query vector")
    return predict_batch(clf, q[np.newaxis, :])[0]


def predict_batch(clf: NexusClassifier, zs: np.ndarray) -> list[Prediction]:
    """Element-wise predict over a (N, D) batch, order-preserving.

    Runs as one matrix product, so the per-query cost depends only on the
    vocabulary size and embedding width.
    """
    batch = np.asarray(zs, dtype=np.float64)
    if batch.size == 0:
        return []
    if batch.ndim != 2:
        raise ValueError("predict_batch expects a (N, D) array")
    _check_dim(clf, batch.shape[1])
    norms = np.linalg.norm(batch, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot score a zero query vector")
    all_scores = (batch / norms) @ clf.matrix.astype(np.float64).T
    indices = np.argmax(all_scores, axis=1)
    return [
        Prediction(
            class_index=int(i),
            class_name=clf.class_names[int(i)],
            score=float(row[i]),
            all_scores=row,
        )
        for i, row in zip(indices, all_scores)
    ]
