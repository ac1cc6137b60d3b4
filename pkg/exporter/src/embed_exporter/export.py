"""Batch export of embeddings into the JSONL store format.

One record per line: {"text": ..., "embedding": [float32, ...]}, dimension
constant per file, unique keys. Image records additionally carry
"kind": "image" and use the image id as the key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    encoder: object
    input_path: str | Path
    output_path: str | Path
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def _read_sentences(path: Path) -> list[str]:
    """Unique input sentences in first-seen order; lines are taken verbatim."""
    seen: set[str] = set()
    out: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            sentence = line.rstrip("\n")
            if not sentence.strip() or sentence in seen:
                continue
            seen.add(sentence)
            out.append(sentence)
    if not out:
        raise ExportError(f"{path}: no sentences to export")
    return out


def _write_records(path: Path, keys: list[str], matrix: np.ndarray, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, row in zip(keys, matrix):
            record = {"text": key}
            if extra:
                record.update(extra)
            record["embedding"] = [float(x) for x in np.asarray(row, dtype=np.float32)]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _encode_batched(encode, items, batch_size: int) -> np.ndarray:
    chunks = [
        encode(items[i:i + batch_size]) for i in range(0, len(items), batch_size)
    ]
    return np.vstack(chunks)


def export_text_embeddings(job: ExportJob) -> int:
    """Embed every unique sentence from the input list file; returns the record count."""
    sentences = _read_sentences(Path(job.input_path))
    matrix = _encode_batched(job.encoder.encode_texts, sentences, job.batch_size)
    _write_records(Path(job.output_path), sentences, matrix)
    return len(sentences)


def export_image_embeddings(job: ExportJob) -> int:
    """Embed images from a JSONL manifest of {"id", "path"}; keys are the image ids."""
    manifest_path = Path(job.input_path)
    ids: list[str] = []
    paths: list[Path] = []
    seen: set[str] = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            image_id = record["id"]
            if image_id in seen:
                raise ExportError(f"{manifest_path}: duplicate image id {image_id!r}")
            seen.add(image_id)
            path = Path(record["path"])
            if not path.is_file():
                raise ExportError(f"image {image_id!r}: file not found at {path}")
            ids.append(image_id)
            paths.append(path)
    if not ids:
        raise ExportError(f"{manifest_path}: no images to export")

    matrix = _encode_batched(job.encoder.encode_images, paths, job.batch_size)
    _write_records(Path(job.output_path), ids, matrix, extra={"kind": "image"})
    return len(ids)
