"""Cross-component acceptance: exporter output feeding the primary toolkit.

The toolkit is consumed strictly through its external interfaces: the JSONL
embedding store read by its file-store backend and the HTTP protocol spoken
by its http backend.
"""

import socket
import threading
import time

import numpy as np
import pytest
import uvicorn

from embed_exporter.encoders import HashEncoder
from embed_exporter.export import ExportJob, export_text_embeddings
from embed_exporter.service import create_app

from hinex.embedding import FileStoreBackend, HttpBackend

SENTENCES = [f"a sample sentence number {i}" for i in range(20)]


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def exported_store(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("export")
    inp = tmp / "sentences.txt"
    inp.write_text("\n".join(SENTENCES) + "\n", encoding="utf-8")
    out = tmp / "store.jsonl"
    export_text_embeddings(ExportJob(HashEncoder(dim=32), inp, out))
    return out


@pytest.fixture(scope="module")
def served_endpoint():
    port = _free_port()
    config = uvicorn.Config(
        create_app(HashEncoder(dim=32)), host="127.0.0.1", port=port, log_level="error"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("embedding service did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_wire_format_round_trip(exported_store):
    store = FileStoreBackend(exported_store)
    matrix = store.embed_texts(SENTENCES)  # zero misses by construction
    assert matrix.shape == (20, 32)
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-4
    print("[acceptance] exporter store loads in the file-store backend with zero misses: PASS")


def test_service_agrees_with_file_export(exported_store, served_endpoint):
    file_vectors = FileStoreBackend(exported_store).embed_texts(SENTENCES)
    http_vectors = HttpBackend(served_endpoint).embed_texts(SENTENCES)
    assert np.max(np.abs(file_vectors.astype(np.float64) - http_vectors.astype(np.float64))) < 1e-6
    print("[acceptance] http backend against the service matches the file export: PASS")


def test_image_store_loads_in_file_store_backend(tmp_path):
    import json

    from embed_exporter.export import export_image_embeddings

    files = []
    for i in range(3):
        path = tmp_path / f"img{i}.bin"
        path.write_bytes(bytes([i, i + 1]) * 32)
        files.append({"id": f"frame-{i}", "path": str(path)})
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(f) for f in files) + "\n", encoding="utf-8")
    out = tmp_path / "images.jsonl"
    export_image_embeddings(ExportJob(HashEncoder(dim=16), manifest, out))

    store = FileStoreBackend(out)  # the extra "kind" field must not confuse the loader
    matrix = store.embed_texts([f["id"] for f in files])
    assert matrix.shape == (3, 16)
