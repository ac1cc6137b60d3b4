"""Embedding backends: a uniform boundary over text-embedding providers.

Every backend maps a batch of strings to unit-norm float32 vectors of a
fixed width, deterministically for identical inputs. Nothing here runs a
neural model; real encoders sit behind the JSONL store or the HTTP
protocol.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np
import requests


class EmbeddingError(Exception):
    """Backend failure: missing store entry, bad service response, shape mismatch."""


class StoreMissError(EmbeddingError):
    def __init__(self, text: str):
        super().__init__(f"embedding store has no entry for text: {text!r}")
        self.text = text


class ServiceError(EmbeddingError):
    pass


class DimensionMismatchError(EmbeddingError):
    pass


def normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm. Rejects the zero vector."""
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (v / norm).astype(np.float32)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return (matrix / norms).astype(np.float32)


class EmbeddingBackend:
    """Shared batch plumbing; subclasses implement the per-batch raw lookup."""

    kind: str = "abstract"
    identity: str = "abstract"
    dim: int | None = None

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        """Unit-norm float32 matrix with one row per input text, in input order."""
        if len(texts) == 0:
            raise ValueError("embed_texts requires at least one text")
        matrix = self._embed_batch(list(texts))
        if matrix.ndim != 2 or matrix.shape[0] != len(texts):
            raise DimensionMismatchError(
                f"backend returned shape {matrix.shape} for {len(texts)} texts"
            )
        if self.dim is None:
            self.dim = int(matrix.shape[1])
        elif matrix.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"backend dimension changed from {self.dim} to {matrix.shape[1]}"
            )
        return matrix

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_texts([text])[0]

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError


class DeterministicBackend(EmbeddingBackend):
    """Test backend: a pure function of (seed, text) with no model behind it.

    Each text is hashed into an RNG seed and expanded to gaussian
    coordinates, so any character change moves the vector and identical
    inputs agree across processes and platforms.
    """

    kind = "deterministic-test"

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.identity = f"deterministic-test:dim={dim}:seed={seed}"

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(f"{self.seed}\x1f{text}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            rows[i] = normalize(rng.standard_normal(self.dim))
        return rows


class FileStoreBackend(EmbeddingBackend):
    """Read-only JSONL store of precomputed embeddings, keyed by exact text.

    Lookups never fuzzy-match: a near-miss would corrupt classifiers
    silently, so an absent text raises StoreMissError carrying the text
    verbatim.
    """

    kind = "file-store"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._table: dict[str, np.ndarray] = {}
        dim: int | None = None
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                text = record["text"]
                if text in self._table:
                    raise EmbeddingError(
                        f"{self.path}: duplicate store entry for text {text!r} (line {lineno})"
                    )
                vec = np.asarray(record["embedding"], dtype=np.float32)
                if vec.ndim != 1:
                    raise EmbeddingError(f"{self.path}:{lineno}: embedding is not a flat vector")
                if dim is None:
                    dim = int(vec.shape[0])
                elif vec.shape[0] != dim:
                    raise DimensionMismatchError(
                        f"{self.path}:{lineno}: dimension {vec.shape[0]} != {dim}"
                    )
                self._table[text] = normalize(vec)
        if dim is None:
            raise EmbeddingError(f"{self.path}: store is empty")
        self.dim = dim
        self.identity = f"file-store:{self.path.name}:dim={dim}"

    def __contains__(self, text: str) -> bool:
        return text in self._table

    def texts(self) -> list[str]:
        return list(self._table)

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            try:
                rows[i] = self._table[text]
            except KeyError:
                raise StoreMissError(text) from None
        return rows


class HttpBackend(EmbeddingBackend):
    """Client for the embedding service protocol.

    POST {endpoint}/embed with {"texts": [...]} and expect
    {"dim": int, "embeddings": [[...], ...]}. Responses may arrive
    unnormalized; rows are normalized here.
    """

    kind = "http-service"

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        if not self.endpoint.endswith("/embed"):
            self.endpoint += "/embed"
        self.timeout = timeout
        self.identity = f"http-service:{self.endpoint}"

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        try:
            resp = requests.post(self.endpoint, json={"texts": texts}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ServiceError(f"embedding service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceError(
                f"embedding service returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
            dim = int(payload["dim"])
            matrix = np.asarray(payload["embeddings"], dtype=np.float32)
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed embedding service response: {exc}") from exc
        if matrix.ndim != 2 or matrix.shape != (len(texts), dim):
            raise DimensionMismatchError(
                f"service reported dim={dim} but returned shape {matrix.shape} "
                f"for {len(texts)} texts"
            )
        return _normalize_rows(matrix.astype(np.float64))


def save_embedding_store(path: str | Path, texts: Sequence[str], matrix: np.ndarray) -> None:
    """Write a JSONL store; rejects duplicate texts to keep the file loadable."""
    if len(texts) != matrix.shape[0]:
        raise ValueError("texts and matrix rows differ in length")
    if len(set(texts)) != len(texts):
        raise ValueError("duplicate texts in store payload")
    with open(path, "w", encoding="utf-8") as fh:
        for text, row in zip(texts, matrix):
            record = {"text": text, "embedding": [float(x) for x in np.asarray(row, dtype=np.float32)]}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def backend_from_spec(spec: str, *, seed: int = 0) -> EmbeddingBackend:
    """Build a backend from a selector string.

    Forms: "deterministic[:dim]", "store:<path>", "http:<url>".
    """
    if spec.startswith("deterministic"):
        _, _, dim = spec.partition(":")
        return DeterministicBackend(dim=int(dim) if dim else 64, seed=seed)
    if spec.startswith("store:"):
        return FileStoreBackend(spec[len("store:"):])
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpBackend(spec)
    raise ValueError(f"unknown backend selector: {spec!r}")
