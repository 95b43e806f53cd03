"""Bit-string conventions shared by every module.

Bit strings are sequences of 0/1 ints. Tables are indexed big-endian: the
first bit of an input is the most significant bit of its row index.
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np

Bits = Tuple[int, ...]


def parse_bits(text: str) -> Bits:
    """Parse ``"0110"`` into ``(0, 1, 1, 0)``; whitespace and commas are ignored."""
    cleaned = [ch for ch in text if ch not in " ,\n\t"]
    if any(ch not in "01" for ch in cleaned):
        raise ValueError(f"Not a bit string: {text!r}")
    return tuple(int(ch) for ch in cleaned)


def format_bits(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def bits_to_index(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def index_to_bits(index: int, length: int) -> Bits:
    return tuple((index >> (length - 1 - j)) & 1 for j in range(length))


def all_inputs(length: int) -> np.ndarray:
    """All ``2**length`` inputs as a uint8 matrix, row ``r`` spelling ``r`` big-endian."""
    rows = np.arange(2**length, dtype=np.int64)
    shifts = np.arange(length - 1, -1, -1, dtype=np.int64)
    return ((rows[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def row_indices(matrix: np.ndarray) -> np.ndarray:
    """Big-endian integer value of every row of a 0/1 matrix."""
    width = matrix.shape[1]
    if width == 0:
        return np.zeros(matrix.shape[0], dtype=np.int64)
    if width > 62:
        raise ValueError(f"Rows of width {width} do not fit a machine integer")
    weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
    return matrix.astype(np.int64) @ weights


def int_to_lsb_bits(value: int, length: int) -> List[int]:
    """Least-significant-first bit vector (field-element convention)."""
    return [(value >> i) & 1 for i in range(length)]


def lsb_bits_to_int(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def parity(value: int) -> int:
    return bin(value).count("1") & 1


def parity_array(values: np.ndarray) -> np.ndarray:
    """Elementwise parity of non-negative int64 values."""
    v = np.asarray(values, dtype=np.int64).copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return (v & 1).astype(np.uint8)
