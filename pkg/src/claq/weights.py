"""In-memory weight model and the manifest + raw-blob input format.

A model on disk is a JSON manifest listing tensors by name, shape, dtype
(f32 or f16) and the relative path of a raw little-endian binary blob,
row-major. Blobs are widened to float64 on load; all downstream math runs
in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

_DTYPES = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}


@dataclass
class WeightMatrix:
    """A dense rows x cols weight matrix, float64, with a unique name."""

    name: str
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValidationError(f"tensor {self.name!r}: data must be 2-D")
        rows, cols = self.data.shape
        if rows < 1 or cols < 1:
            raise ValidationError(f"tensor {self.name!r}: empty shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValidationError(f"tensor {self.name!r}: non-finite values")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass
class ModelWeights:
    """An ordered collection of uniquely named weight matrices."""

    matrices: list[WeightMatrix]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen = set()
        for m in self.matrices:
            if m.name in seen:
                raise ValidationError(f"duplicate name {m.name!r}")
            seen.add(m.name)

    def __iter__(self):
        return iter(self.matrices)

    def __len__(self) -> int:
        return len(self.matrices)

    def get(self, name: str) -> WeightMatrix:
        for m in self.matrices:
            if m.name == name:
                return m
        raise KeyError(name)


def load_model(manifest_path: str | Path) -> ModelWeights:
    """Load a manifest + blob model, validating shapes and finiteness."""
    manifest_path = Path(manifest_path)
    try:
        spec = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}")

    entries = spec.get("tensors")
    if not isinstance(entries, list):
        raise ValidationError('manifest must contain a "tensors" list')

    matrices = []
    for entry in entries:
        try:
            name = entry["name"]
            rows = int(entry["rows"])
            cols = int(entry["cols"])
            dtype = entry["dtype"]
            rel = entry["file"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed tensor entry: {exc}")
        if dtype not in _DTYPES:
            raise ValidationError(f"tensor {name!r}: unsupported dtype {dtype!r}")
        if rows < 1 or cols < 1:
            raise ValidationError(f"tensor {name!r}: invalid shape {rows}x{cols}")
        blob_path = manifest_path.parent / rel
        if not blob_path.is_file():
            raise ValidationError(f"tensor {name!r}: missing blob file {blob_path}")
        raw = blob_path.read_bytes()
        expected = rows * cols * _DTYPES[dtype].itemsize
        if len(raw) != expected:
            raise ValidationError(
                f"tensor {name!r}: size mismatch, blob is {len(raw)} bytes, "
                f"expected {expected}"
            )
        data = np.frombuffer(raw, dtype=_DTYPES[dtype]).astype(np.float64)
        matrices.append(WeightMatrix(name=name, data=data.reshape(rows, cols)))

    metadata = spec.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ValidationError('"metadata" must be an object')
    return ModelWeights(matrices=matrices, metadata={str(k): str(v) for k, v in metadata.items()})


def save_model(model: ModelWeights, manifest_path: str | Path, dtype: str = "f32") -> None:
    """Write a model back out as manifest + blobs (inverse of load)."""
    if dtype not in _DTYPES:
        raise ValidationError(f"unsupported dtype {dtype!r}")
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for m in model:
        fname = m.name.replace("/", "_") + ".bin"
        (manifest_path.parent / fname).write_bytes(
            np.ascontiguousarray(m.data.astype(_DTYPES[dtype])).tobytes()
        )
        entries.append(
            {"name": m.name, "rows": m.rows, "cols": m.cols, "dtype": dtype, "file": fname}
        )
    manifest = {"tensors": entries, "metadata": dict(model.metadata)}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
