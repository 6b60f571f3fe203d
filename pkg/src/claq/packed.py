"""Packed tensor model, size accounting, and the CLAQPK01 container.

File layout::

    bytes 0-7    magic "CLAQPK01"
    bytes 8-11   manifest length, uint32 little-endian
    ...          manifest JSON (canonical: sorted keys, compact separators)
    padding      zeros up to the next 8-byte boundary
    data         per tensor, in manifest order:
                     codebook blob  (per-column float16 centroids, column order)
                     index blob     (bitstream, see bitpack)
                     outlier blob   (uint32 row-major position + float16 value)
                 each blob zero-padded to an 8-byte boundary

Offsets in the manifest are relative to the start of the data section.
The cost model is fixed: indices cost rows*bits per column, codebooks 16
bits per centroid, outliers 48 bits each (16-bit value plus a packed
32-bit position), and the precision map 2 bits per column. Those bit
totals translate exactly into the blob byte sizes; alignment padding,
header and manifest are the only bytes on top.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bitpack import pack_indices, unpack_indices
from .errors import FormatError, ValidationError
from .weights import WeightMatrix

MAGIC = b"CLAQPK01"
MAGIC_PREFIX = b"CLAQPK"

CODEBOOK_ENTRY_BITS = 16
OUTLIER_VALUE_BITS = 16
OUTLIER_POSITION_BITS = 32
OUTLIER_BITS = OUTLIER_VALUE_BITS + OUTLIER_POSITION_BITS
PRECISION_MAP_BITS_PER_COL = 2

ALLOWED_BITS = (2, 3, 4)

_OUTLIER_DTYPE = np.dtype([("pos", "<u4"), ("val", "<f2")])


@dataclass
class PackedTensor:
    """One quantized matrix: codebooks, index matrix, sparse outlier overlay.

    ``indices`` is kept unpacked (rows x cols uint8) for convenience; the
    bit-packed form is produced at serialization time. Outliers are three
    parallel arrays; their stored order is preserved exactly by the
    container round trip.
    """

    name: str
    rows: int
    cols: int
    precision_map: np.ndarray  # per-column bits, each in {2, 3, 4}
    codebooks: list[np.ndarray]  # per-column float16, length 2**bits, ascending
    indices: np.ndarray  # rows x cols uint8
    outlier_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    outlier_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    outlier_values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float16))

    def __post_init__(self) -> None:
        self.precision_map = np.asarray(self.precision_map, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.uint8)
        self.outlier_rows = np.asarray(self.outlier_rows, dtype=np.int64)
        self.outlier_cols = np.asarray(self.outlier_cols, dtype=np.int64)
        self.outlier_values = np.asarray(self.outlier_values, dtype=np.float16)
        self.validate()

    def validate(self) -> None:
        name = self.name
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"tensor {name!r}: invalid shape")
        if self.precision_map.shape != (self.cols,):
            raise ValidationError(f"tensor {name!r}: precision map length mismatch")
        bad = set(self.precision_map.tolist()) - set(ALLOWED_BITS)
        if bad:
            raise ValidationError(f"tensor {name!r}: unsupported bit widths {sorted(bad)}")
        if self.indices.shape != (self.rows, self.cols):
            raise ValidationError(f"tensor {name!r}: index matrix shape mismatch")
        if len(self.codebooks) != self.cols:
            raise ValidationError(f"tensor {name!r}: need one codebook per column")
        for j, cb in enumerate(self.codebooks):
            b = int(self.precision_map[j])
            if cb.shape != (1 << b,):
                raise FormatError(f"tensor {name!r}: index out of codebook range in column {j}")
            if cb.dtype != np.float16:
                raise ValidationError(f"tensor {name!r}: codebook {j} must be float16")
            if not np.isfinite(cb.astype(np.float64)).all():
                raise ValidationError(f"tensor {name!r}: non-finite centroid in column {j}")
            if np.any(np.diff(cb.astype(np.float64)) < 0):
                raise ValidationError(f"tensor {name!r}: codebook {j} not ascending")
            if self.indices[:, j].max(initial=0) >= (1 << b):
                raise FormatError(f"tensor {name!r}: index out of codebook range in column {j}")
        n = self.outlier_rows.shape[0]
        if self.outlier_cols.shape[0] != n or self.outlier_values.shape[0] != n:
            raise ValidationError(f"tensor {name!r}: outlier arrays disagree in length")
        if n:
            if self.outlier_rows.min() < 0 or self.outlier_rows.max() >= self.rows:
                raise ValidationError(f"tensor {name!r}: outlier row out of bounds")
            if self.outlier_cols.min() < 0 or self.outlier_cols.max() >= self.cols:
                raise ValidationError(f"tensor {name!r}: outlier column out of bounds")
            pos = self.outlier_rows * self.cols + self.outlier_cols
            if np.unique(pos).size != n:
                raise ValidationError(f"tensor {name!r}: duplicate outlier positions")
            if not np.isfinite(self.outlier_values.astype(np.float64)).all():
                raise ValidationError(f"tensor {name!r}: non-finite outlier value")

    @property
    def outlier_count(self) -> int:
        return int(self.outlier_rows.shape[0])

    def codebook_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(cb.astype("<f2")).tobytes() for cb in self.codebooks)

    def index_bytes(self) -> bytes:
        return pack_indices(self.indices, self.precision_map)

    def outlier_bytes(self) -> bytes:
        rec = np.empty(self.outlier_count, dtype=_OUTLIER_DTYPE)
        rec["pos"] = (self.outlier_rows * self.cols + self.outlier_cols).astype("<u4")
        rec["val"] = self.outlier_values
        return rec.tobytes()


@dataclass
class SizeReport:
    """Bit totals under the fixed cost model, plus equivalent widths."""

    index_bits: int
    codebook_bits: int
    outlier_bits: int
    precision_map_bits: int
    param_count: int
    equivalent_bits_index_only: float
    equivalent_bits_total: float

    def as_dict(self) -> dict:
        return {
            "index_bits": self.index_bits,
            "codebook_bits": self.codebook_bits,
            "outlier_bits": self.outlier_bits,
            "precision_map_bits": self.precision_map_bits,
            "param_count": self.param_count,
            "equivalent_bits_index_only": self.equivalent_bits_index_only,
            "equivalent_bits_total": self.equivalent_bits_total,
        }


def index_bits_for(rows: int, bits: np.ndarray) -> int:
    return int(rows * np.asarray(bits, dtype=np.int64).sum())


def codebook_bits_for(bits: np.ndarray) -> int:
    b = np.asarray(bits, dtype=np.int64)
    return int((np.left_shift(1, b)).sum() * CODEBOOK_ENTRY_BITS)


def size_report_from_counts(
    index_bits: int, codebook_bits: int, outlier_count: int, cols_total: int, param_count: int
) -> SizeReport:
    outlier_bits = outlier_count * OUTLIER_BITS
    pmap_bits = PRECISION_MAP_BITS_PER_COL * cols_total
    total = index_bits + codebook_bits + outlier_bits + pmap_bits
    return SizeReport(
        index_bits=index_bits,
        codebook_bits=codebook_bits,
        outlier_bits=outlier_bits,
        precision_map_bits=pmap_bits,
        param_count=param_count,
        equivalent_bits_index_only=index_bits / param_count,
        equivalent_bits_total=total / param_count,
    )


def measure_size(tensors: list[PackedTensor] | PackedTensor) -> SizeReport:
    """Apply the cost model to one tensor or a whole packed model."""
    if isinstance(tensors, PackedTensor):
        tensors = [tensors]
    if not tensors:
        raise ValidationError("cannot measure an empty model")
    index_bits = sum(index_bits_for(t.rows, t.precision_map) for t in tensors)
    codebook_bits = sum(codebook_bits_for(t.precision_map) for t in tensors)
    outliers = sum(t.outlier_count for t in tensors)
    cols_total = sum(t.cols for t in tensors)
    params = sum(t.rows * t.cols for t in tensors)
    return size_report_from_counts(index_bits, codebook_bits, outliers, cols_total, params)


def dequantize_tensor(t: PackedTensor) -> WeightMatrix:
    """Reconstruct the dense matrix; outliers override codebook lookups."""
    out = np.empty((t.rows, t.cols), dtype=np.float64)
    for j in range(t.cols):
        out[:, j] = t.codebooks[j].astype(np.float64)[t.indices[:, j]]
    if t.outlier_count:
        out[t.outlier_rows, t.outlier_cols] = t.outlier_values.astype(np.float64)
    return WeightMatrix(name=t.name, data=out)


def _align8(n: int) -> int:
    return (n + 7) & ~7


def _rle(values: list[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in values:
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([int(v), 1])
    return runs


def _unrle(runs: list, expected_len: int) -> np.ndarray:
    out: list[int] = []
    for item in runs:
        v, count = int(item[0]), int(item[1])
        out.extend([v] * count)
    if len(out) != expected_len:
        raise FormatError("run-length data does not match the declared column count")
    return np.asarray(out, dtype=np.int64)


def pack_container(tensors: list[PackedTensor]) -> bytes:
    """Serialize a packed model to container bytes (see module docstring)."""
    seen: set[str] = set()
    entries = []
    blobs: list[bytes] = []
    rel = 0
    for t in tensors:
        t.validate()
        if t.name in seen:
            raise ValidationError(f"duplicate name {t.name!r}")
        seen.add(t.name)
        cb, idx, out = t.codebook_bytes(), t.index_bytes(), t.outlier_bytes()
        entry = {"name": t.name, "rows": t.rows, "cols": t.cols,
                 "precision_rle": _rle(t.precision_map.tolist()),
                 "outlier_count": t.outlier_count}
        for label, blob in (("codebook", cb), ("index", idx), ("outlier", out)):
            entry[f"{label}_offset"] = rel
            entry[f"{label}_bytes"] = len(blob)
            blobs.append(blob)
            blobs.append(b"\x00" * (_align8(len(blob)) - len(blob)))
            rel = _align8(rel + len(blob))
        entries.append(entry)

    manifest = json.dumps(
        {"version": 1, "tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode()
    head = MAGIC + struct.pack("<I", len(manifest)) + manifest
    head += b"\x00" * (_align8(len(head)) - len(head))
    return head + b"".join(blobs)


def parse_container(raw: bytes) -> list[PackedTensor]:
    """Parse container bytes back into validated tensors."""
    if len(raw) < 12:
        raise FormatError("truncated file")
    if raw[:6] != MAGIC_PREFIX:
        raise FormatError("bad magic")
    if raw[:8] != MAGIC:
        raise FormatError(f"unsupported version {raw[6:8].decode(errors='replace')!r}")
    (manifest_len,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + manifest_len:
        raise FormatError("truncated file")
    try:
        manifest = json.loads(raw[12 : 12 + manifest_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt manifest: {exc}")
    if manifest.get("version") != 1:
        raise FormatError("unsupported version")
    data_start = _align8(12 + manifest_len)

    tensors = []
    for entry in manifest.get("tensors", []):
        try:
            name = entry["name"]
            rows, cols = int(entry["rows"]), int(entry["cols"])
            bits = _unrle(entry["precision_rle"], cols)
            count = int(entry["outlier_count"])
            spans = {
                label: (int(entry[f"{label}_offset"]), int(entry[f"{label}_bytes"]))
                for label in ("codebook", "index", "outlier")
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"corrupt manifest entry: {exc}")

        raw_blobs = {}
        for label, (off, nbytes) in spans.items():
            lo = data_start + off
            if lo + nbytes > len(raw):
                raise FormatError("truncated file")
            raw_blobs[label] = raw[lo : lo + nbytes]

        widths = np.left_shift(1, bits)
        if len(raw_blobs["codebook"]) != int(widths.sum()) * 2:
            raise FormatError(f"tensor {name!r}: index out of codebook range")
        flat = np.frombuffer(raw_blobs["codebook"], dtype="<f2")
        codebooks = []
        pos = 0
        for w in widths.tolist():
            codebooks.append(flat[pos : pos + w].astype(np.float16))
            pos += w

        indices = unpack_indices(raw_blobs["index"], rows, bits)

        if len(raw_blobs["outlier"]) != count * _OUTLIER_DTYPE.itemsize:
            raise FormatError(f"tensor {name!r}: outlier blob length mismatch")
        rec = np.frombuffer(raw_blobs["outlier"], dtype=_OUTLIER_DTYPE)
        lin = rec["pos"].astype(np.int64)
        tensors.append(
            PackedTensor(
                name=name,
                rows=rows,
                cols=cols,
                precision_map=bits,
                codebooks=codebooks,
                indices=indices,
                outlier_rows=lin // cols,
                outlier_cols=lin % cols,
                outlier_values=rec["val"].astype(np.float16),
            )
        )
    return tensors


def save_packed(tensors: list[PackedTensor], path: str | Path) -> None:
    Path(path).write_bytes(pack_container(tensors))


def load_packed(path: str | Path) -> list[PackedTensor]:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"packed file not found: {p}")
    return parse_container(p.read_bytes())
