"""Named-tensor containers on disk.

A blob file holds one tensor: an 8-byte little-endian header length, a JSON
header ``{"name", "shape", "dtype"}`` and the raw little-endian float64 data.
A container is a directory with ``manifest.json`` listing the blobs in order,
their shapes, a format version and a SHA-256 over all blob bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


class CheckpointError(Exception):
    pass


def encode_blob(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    header = json.dumps(
        {"name": name, "shape": list(array.shape), "dtype": "float64"}, sort_keys=True
    ).encode()
    return len(header).to_bytes(8, "little") + header + array.tobytes()


def decode_blob(raw: bytes) -> tuple[str, np.ndarray]:
    if len(raw) < 8:
        raise CheckpointError("truncated blob")
    n = int.from_bytes(raw[:8], "little")
    try:
        header = json.loads(raw[8 : 8 + n])
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"unreadable blob header: {exc}") from exc
    if header.get("dtype") != "float64":
        raise CheckpointError(f"unsupported dtype {header.get('dtype')!r}")
    shape = tuple(header["shape"])
    data = np.frombuffer(raw[8 + n :], dtype="<f8")
    if data.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"blob {header['name']!r}: size does not match shape {shape}")
    return header["name"], data.reshape(shape).astype(np.float64)


def _blob_filename(index: int, name: str) -> str:
    safe = "".join(c if c.isalnum() or c in "._-" else "_" for c in name)
    return f"{index:04d}_{safe}.bin"


def save_tensors(tensors: dict[str, np.ndarray], path, meta: dict | None = None) -> Path:
    """Write ``tensors`` (insertion order preserved) into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    names = list(tensors)
    if len(set(names)) != len(names):
        raise CheckpointError("tensor names must be unique")
    digest = hashlib.sha256()
    entries = []
    for i, name in enumerate(names):
        raw = encode_blob(name, np.asarray(tensors[name]))
        fname = _blob_filename(i, name)
        (path / fname).write_bytes(raw)
        digest.update(raw)
        entries.append({"name": name, "file": fname, "shape": list(np.shape(tensors[name]))})
    manifest = {
        "format_version": FORMAT_VERSION,
        "tensors": entries,
        "content_hash": digest.hexdigest(),
        "meta": meta or {},
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except FileNotFoundError as exc:
        raise CheckpointError(f"no manifest in {path}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"format version {manifest.get('format_version')} != supported {FORMAT_VERSION}"
        )
    return manifest


def load_tensors(path) -> dict[str, np.ndarray]:
    path = Path(path)
    manifest = read_manifest(path)
    digest = hashlib.sha256()
    out = {}
    for entry in manifest["tensors"]:
        blob = path / entry["file"]
        if not blob.exists():
            raise CheckpointError(f"missing tensor {entry['name']!r} ({entry['file']})")
        raw = blob.read_bytes()
        digest.update(raw)
        name, array = decode_blob(raw)
        if name != entry["name"] or list(array.shape) != entry["shape"]:
            raise CheckpointError(f"blob {entry['file']} does not match its manifest entry")
        out[name] = array
    if digest.hexdigest() != manifest["content_hash"]:
        raise CheckpointError("content hash mismatch")
    return out


save_checkpoint = save_tensors
load_checkpoint = load_tensors


def tree_digest(root) -> dict[str, str]:
    """Relative path -> SHA-256 for every file under ``root``."""
    root = Path(root)
    out = {}
    for dirpath, _, files in sorted(os.walk(root)):
        for f in sorted(files):
            p = Path(dirpath) / f
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out
