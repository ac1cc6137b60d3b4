"""Embedding exporter: bridge real vision-language encoders to the toolkit.

Writes the canonical JSONL embedding store and serves the HTTP /embed
protocol, so classifiers can be built against genuine CLIP-family
embeddings (or the deterministic hash encoder for fixtures).
"""

from .encoders import ClipEncoder, HashEncoder, encoder_from_spec
from .export import ExportJob, export_image_embeddings, export_text_embeddings
from .service import create_app, serve

__version__ = "0.1.0"
