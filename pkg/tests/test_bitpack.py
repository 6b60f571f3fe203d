import numpy as np
import pytest
from hypothesis import given, strategies as st

from claq.bitpack import pack_indices, unpack_indices
from claq.errors import ValidationError


def test_golden_byte_four_two_bit_values():
    # Little-endian within bytes: values 0,1,2,3 pack to 0b11100100.
    blob = pack_indices(np.array([[0], [1], [2], [3]]), np.array([2]))
    assert blob == bytes([0b11100100])


def test_mixed_widths_concatenate_without_padding():
    # Column 0: 3 rows x 2 bits = 6 bits; column 1 starts mid-byte.
    indices = np.array([[1, 7], [2, 0], [3, 5]])
    blob = pack_indices(indices, np.array([2, 3]))
    assert len(blob) == 2  # 15 bits -> 2 bytes
    out = unpack_indices(blob, 3, np.array([2, 3]))
    assert (out == indices).all()


def test_out_of_range_index_rejected():
    with pytest.raises(ValidationError):
        pack_indices(np.array([[4]]), np.array([2]))


def test_truncated_blob_rejected():
    with pytest.raises(ValidationError):
        unpack_indices(b"\x00", 8, np.array([2, 2]))


@given(st.data())
def test_pack_unpack_round_trip(data):
    rows = data.draw(st.integers(1, 24))
    cols = data.draw(st.integers(1, 8))
    bits = np.array(data.draw(st.lists(st.sampled_from([2, 3, 4]), min_size=cols, max_size=cols)))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    indices = np.zeros((rows, cols), dtype=np.uint8)
    for j in range(cols):
        indices[:, j] = rng.integers(0, 1 << bits[j], size=rows)
    blob = pack_indices(indices, bits)
    assert len(blob) == (rows * int(bits.sum()) + 7) // 8
    assert (unpack_indices(blob, rows, bits) == indices).all()
