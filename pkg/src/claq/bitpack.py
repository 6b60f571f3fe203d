"""Bit-level packing of per-column index arrays.

Indices are written as one continuous bitstream: column 0 first, then
column 1, and so on, with no padding between columns. Within each value
the least significant bit comes first, and bits fill each byte starting
at bit 0 (numpy's ``bitorder="little"`` convention). Only the final byte
of the stream may carry unused bits, which are always zero.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def pack_indices(indices: np.ndarray, bits: np.ndarray) -> bytes:
    """Pack a rows x cols index matrix into the column-concatenated bitstream.

    ``bits[j]`` gives the width of every index in column j; indices must
    already satisfy ``indices[:, j] < 2**bits[j]``.
    """
    indices = np.asarray(indices)
    bits = np.asarray(bits, dtype=np.int64)
    if indices.ndim != 2:
        raise ValidationError("index array must be 2-D")
    rows, cols = indices.shape
    if bits.shape != (cols,):
        raise ValidationError("bit-width array must have one entry per column")
    chunks = []
    for j in range(cols):
        b = int(bits[j])
        if not 1 <= b <= 8:
            raise ValidationError(f"unsupported bit width {b} in column {j}")
        col = indices[:, j].astype(np.uint8)
        if col.size and int(col.max()) >= (1 << b):
            raise ValidationError(f"index out of range for {b}-bit column {j}")
        colbits = (col[:, None] >> np.arange(b, dtype=np.uint8)) & 1
        chunks.append(colbits.reshape(-1))
    if not chunks:
        return b""
    stream = np.concatenate(chunks)
    return np.packbits(stream, bitorder="little").tobytes()


def unpack_indices(blob: bytes, rows: int, bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_indices`; returns a rows x cols uint8 matrix."""
    bits = np.asarray(bits, dtype=np.int64)
    cols = bits.shape[0]
    total_bits = int(rows * bits.sum())
    if len(blob) * 8 < total_bits:
        raise ValidationError("index blob shorter than the declared bit count")
    raw = np.frombuffer(blob, dtype=np.uint8)
    stream = np.unpackbits(raw, count=total_bits, bitorder="little")
    out = np.zeros((rows, cols), dtype=np.uint8)
    pos = 0
    for j in range(cols):
        b = int(bits[j])
        seg = stream[pos : pos + rows * b].reshape(rows, b)
        out[:, j] = seg @ (1 << np.arange(b, dtype=np.uint8))
        pos += rows * b
    return out
