"""Encoders behind the exporter: a real CLIP-family model or a hash stand-in.

Every encoder maps texts (or image files) to unit-norm float32 vectors and
is deterministic in inference mode on a given platform.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_CLIP_MODEL = "openai/clip-vit-base-patch32"


class EncoderError(RuntimeError):
    pass


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    mat = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise EncoderError("encoder produced a zero vector")
    return (mat / norms).astype(np.float32)


class HashEncoder:
    """Deterministic fixture encoder: no model, no weights, stable everywhere.

    Texts hash to RNG seeds expanded into gaussian coordinates; images embed
    by a hash of their file bytes, so identical files agree regardless of id.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.identity = f"hash:{dim}"

    def _from_seed(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows = [self._from_seed(b"text\x1f" + t.encode("utf-8")) for t in texts]
        return _unit_rows(np.stack(rows))

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray:
        rows = []
        for path in paths:
            rows.append(self._from_seed(b"image\x1f" + Path(path).read_bytes()))
        return _unit_rows(np.stack(rows))


class ClipEncoder:
    """CLIP-family encoder via transformers, frozen in inference mode."""

    def __init__(self, model_name: str = DEFAULT_CLIP_MODEL, device: str = "cpu"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderError(
                "CLIP export needs the [clip] extra (torch, transformers, Pillow)"
            ) from exc
        self._torch = torch
        self.device = device
        self.model = CLIPModel.from_pretrained(model_name).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_name)
        self.dim = int(self.model.config.projection_dim)
        self.identity = f"clip:{model_name}"

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        inputs = self.processor(
            text=list(texts), return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with self._torch.no_grad():
            features = self.model.get_text_features(**inputs)
        return _unit_rows(features.cpu().numpy())

    def encode_images(self, paths: Sequence[Path]) -> np.ndarray:
        from PIL import Image

        images = [Image.open(p).convert("RGB") for p in paths]
        inputs = self.processor(images=images, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            features = self.model.get_image_features(**inputs)
        return _unit_rows(features.cpu().numpy())


def encoder_from_spec(spec: str, device: str = "cpu"):
    """Selector: "hash:<dim>" for the fixture encoder, anything else is a CLIP model name."""
    if spec.startswith("hash:"):
        return HashEncoder(dim=int(spec[len("hash:"):]))
    if spec == "hash":
        return HashEncoder()
    return ClipEncoder(spec, device=device)
