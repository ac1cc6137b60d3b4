"""Fuse sentence embeddings into one classifier vector per class.

Strategies cover the full constructor plus its controls: branch-set fusion
by mean or principal eigenvector, single-sentence Is-A/concatenation,
name ensembling, and the bare "a {Class}" baseline.
"""

from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedding import EmbeddingBackend, normalize
from .hierarchy import SemanticHierarchy, Vocabulary
from .sentences import Branch, enumerate_branches, render_concat, render_ensemble_names, render_is_a

STRATEGIES = (
    "shine-mean",
    "shine-pe",
    "is-a-single",
    "concat-single",
    "ensemble",
    "baseline-name",
)
HIERARCHY_STRATEGIES = frozenset(STRATEGIES) - {"baseline-name"}

# Spectral gap below which the top singular direction is ill-determined.
_SV_TIE_TOL = 1e-9


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class NexusClassifier:
    """Unit-norm classifier rows, one per vocabulary class, in vocabulary order."""

    class_names: tuple[str, ...]
    matrix: np.ndarray
    strategy: str
    provenance: dict

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.class_names):
            raise ValueError("classifier matrix must have one row per class")
        norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)
        if not np.allclose(norms, 1.0, atol=1e-4):
            raise ValueError("classifier rows must be unit-norm")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.class_names)


def _as_matrix(vectors: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[np.newaxis, :]
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise AggregationError("aggregation needs a non-empty set of equal-width vectors")
    return mat


def aggregate_mean(vectors: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Arithmetic mean of the vectors, L2-normalized.

    A zero mean (mutually cancelling inputs) is an error: it signals a
    pathological sentence set rather than something worth guessing at.
    """
    mat = _as_matrix(vectors)
    mean = mat.mean(axis=0)
    if float(np.linalg.norm(mean)) == 0.0:
        raise AggregationError("mean of vectors is zero; inputs cancel out")
    return normalize(mean)


def aggregate_principal_eigenvector(vectors: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Top right-singular vector of the stacked embedding matrix, unit-norm.

    The SVD leaves the sign free, so the result is oriented toward the
    (unnormalized) mean of the inputs; with a zero mean the first nonzero
    coordinate is made positive. A near-tie between the top two singular
    values is reported as a warning and resolved by projecting the mean
    onto the tied top subspace, which keeps the pick deterministic.
    """
    mat = _as_matrix(vectors)
    mean = mat.mean(axis=0)
    _, svals, vt = np.linalg.svd(mat, full_matrices=False)

    principal = vt[0]
    if svals.shape[0] > 1 and float(svals[0] - svals[1]) <= _SV_TIE_TOL:
        warnings.warn(
            "top two singular values are degenerate; using the mean's projection "
            "onto the tied subspace",
            stacklevel=2,
        )
        tied = vt[svals[0] - svals <= _SV_TIE_TOL]
        projected = (tied @ mean) @ tied
        if float(np.linalg.norm(projected)) > 0.0:
            return normalize(projected)

    alignment = float(principal @ mean)
    if alignment < 0.0:
        principal = -principal
    elif alignment == 0.0:
        nonzero = np.flatnonzero(principal)
        if nonzero.size and principal[nonzero[0]] < 0.0:
            principal = -principal
    return normalize(principal)


def _longest_super_chain(hierarchy: SemanticHierarchy, node_id: str) -> tuple[str, ...]:
    # length ties resolve to the first chain in declaration order
    chains = hierarchy.super_chains(node_id)
    return tuple(max(chains, key=len))


def strategy_sentences(
    hierarchy: SemanticHierarchy | None,
    node_id: str | None,
    class_name: str,
    strategy: str,
) -> tuple[list[str], list[Branch]]:
    """Prompt texts a strategy feeds the encoder for one class, plus their branches."""
    if strategy == "baseline-name":
        bare = Branch((), class_name, ())
        return [f"a {class_name}"], [bare]
    assert hierarchy is not None and node_id is not None
    if strategy in ("shine-mean", "shine-pe"):
        branches = enumerate_branches(hierarchy, node_id)
        return [render_is_a(b) for b in branches], branches
    single = Branch((), class_name, _longest_super_chain(hierarchy, node_id))
    if strategy == "is-a-single":
        return [render_is_a(single)], [single]
    if strategy == "concat-single":
        return [render_concat(single)], [single]
    if strategy == "ensemble":
        return render_ensemble_names(single), [single] * (len(single.super_chain) + 1)
    raise ValueError(f"unknown strategy: {strategy!r}")


def _resolve_node(hierarchy: SemanticHierarchy, vocab: Vocabulary, class_name: str) -> str:
    if vocab.node_bindings is not None:
        return vocab.node_bindings[class_name]
    ids = hierarchy.find_by_name(class_name, level=vocab.level)
    if not ids:
        raise ValueError(f"vocabulary class {class_name!r} is not bound to any hierarchy node")
    if len(ids) > 1:
        raise ValueError(f"vocabulary class {class_name!r} matches several hierarchy nodes: {ids}")
    return ids[0]


def _class_row(
    hierarchy: SemanticHierarchy | None,
    node_id: str | None,
    class_name: str,
    backend: EmbeddingBackend,
    strategy: str,
) -> np.ndarray:
    texts, _ = strategy_sentences(hierarchy, node_id, class_name, strategy)
    embeddings = backend.embed_texts(texts)
    if strategy == "shine-pe":
        return aggregate_principal_eigenvector(embeddings)
    return aggregate_mean(embeddings)


def build_classifier(
    hierarchy: SemanticHierarchy | None,
    vocab: Vocabulary,
    backend: EmbeddingBackend,
    strategy: str,
    *,
    jobs: int = 1,
) -> NexusClassifier:
    """Assemble the classifier matrix for a vocabulary, rows in vocabulary order.

    Per-class work is independent; with jobs > 1 classes are embedded in
    worker threads while assembly order stays fixed. The row count depends
    only on the vocabulary, never on how bushy the hierarchy is.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy in HIERARCHY_STRATEGIES and hierarchy is None:
        raise ValueError(f"strategy {strategy!r} needs a hierarchy")

    node_ids: list[str | None] = []
    for name in vocab.class_names:
        node_ids.append(
            _resolve_node(hierarchy, vocab, name) if strategy in HIERARCHY_STRATEGIES else None
        )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    lambda args: _class_row(hierarchy, args[0], args[1], backend, strategy),
                    zip(node_ids, vocab.class_names),
                )
            )
    else:
        rows = [
            _class_row(hierarchy, nid, name, backend, strategy)
            for nid, name in zip(node_ids, vocab.class_names)
        ]

    matrix = np.vstack(rows).astype(np.float32)
    provenance = {
        "hierarchy": hierarchy.fingerprint() if hierarchy is not None else None,
        "backend": backend.identity,
    }
    return NexusClassifier(
        class_names=tuple(vocab.class_names),
        matrix=matrix,
        strategy=strategy,
        provenance=provenance,
    )


def save_classifier(clf: NexusClassifier, path: str | Path) -> None:
    """Single-file JSON format: header fields plus the row-major float32 matrix
    as base64 (little-endian)."""
    payload = {
        "classes": list(clf.class_names),
        "dim": clf.dim,
        "strategy": clf.strategy,
        "provenance": clf.provenance,
        "matrix_b64": base64.b64encode(
            np.ascontiguousarray(clf.matrix, dtype="<f4").tobytes()
        ).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def load_classifier(path: str | Path) -> NexusClassifier:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    raw = base64.b64decode(payload["matrix_b64"])
    matrix = np.frombuffer(raw, dtype="<f4").reshape(len(payload["classes"]), payload["dim"])
    return NexusClassifier(
        class_names=tuple(payload["classes"]),
        matrix=matrix.copy(),
        strategy=payload["strategy"],
        provenance=payload["provenance"],
    )
