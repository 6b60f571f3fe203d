import json

import numpy as np
import pytest

from claq.packed import PackedTensor
from claq.weights import ModelWeights, WeightMatrix, save_model


def write_manifest(tmp_path, tensors, metadata=None):
    """Write a manifest + blobs from a list of (name, array, dtype) triples."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, array, dtype in tensors:
        array = np.asarray(array)
        np_dtype = {"f32": "<f4", "f16": "<f2"}[dtype]
        fname = name.replace("/", "_") + ".bin"
        (tmp_path / fname).write_bytes(array.astype(np_dtype).tobytes())
        entries.append(
            {
                "name": name,
                "rows": array.shape[0],
                "cols": array.shape[1],
                "dtype": dtype,
                "file": fname,
            }
        )
    manifest = tmp_path / "model.json"
    manifest.write_text(json.dumps({"tensors": entries, "metadata": metadata or {}}))
    return manifest


def random_packed_tensor(rng, max_rows=16, max_cols=8, name="t"):
    """A random but valid PackedTensor for round-trip tests."""
    rows = int(rng.integers(1, max_rows + 1))
    cols = int(rng.integers(1, max_cols + 1))
    bits = rng.choice([2, 3, 4], size=cols)
    codebooks = []
    indices = np.zeros((rows, cols), dtype=np.uint8)
    for j, b in enumerate(bits):
        cents = np.sort(rng.normal(size=1 << int(b)).astype(np.float16))
        codebooks.append(cents)
        indices[:, j] = rng.integers(0, 1 << int(b), size=rows)
    n_out = int(rng.integers(0, min(6, rows * cols) + 1))
    flat = rng.choice(rows * cols, size=n_out, replace=False)
    return PackedTensor(
        name=name,
        rows=rows,
        cols=cols,
        precision_map=bits,
        codebooks=codebooks,
        indices=indices,
        outlier_rows=flat // cols,
        outlier_cols=flat % cols,
        outlier_values=rng.normal(size=n_out).astype(np.float16),
    )


@pytest.fixture
def small_model():
    rng = np.random.default_rng(7)
    return ModelWeights(
        matrices=[
            WeightMatrix("layers.0.attn.weight", rng.normal(size=(24, 12))),
            WeightMatrix("layers.1.attn.weight", rng.normal(size=(24, 12))),
        ]
    )


@pytest.fixture
def model_dir(tmp_path, small_model):
    manifest = tmp_path / "model.json"
    save_model(small_model, manifest)
    return manifest
