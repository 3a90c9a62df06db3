"""Dyadic folding of long vectors and binary multi-index coding.

A vector of length 2**L is treated as an order-L tensor with two entries
per mode, but the L-dimensional array is never materialised: every access
goes through the coding between 1-based linear indices i and digit tuples
(j_1, ..., j_L) with j_v in {1, 2}, where

    i - 1 = sum_v (j_v - 1) * 2**(v - 1)

and mode 1 carries the least-significant bit.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantizedVector:
    """A length-2**order sample vector together with its binary order."""

    values: np.ndarray
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be at least 1")
        values = np.array(self.values, dtype=float).ravel()
        if values.size != 1 << self.order:
            raise ValueError(
                f"expected 2**{self.order} = {1 << self.order} values, got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def linear_to_multi(i, order):
    """Digits (j_1, ..., j_L) of the 1-based linear index ``i``.

    Mode 1 holds the least-significant bit, so i=1 maps to all ones and
    i=2**order maps to all twos.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if not 1 <= i <= 1 << order:
        raise ValueError(f"linear index {i} out of range [1, {1 << order}]")
    n = i - 1
    return tuple(((n >> v) & 1) + 1 for v in range(order))


def multi_to_linear(digits):
    """1-based linear index of a digit tuple; inverse of `linear_to_multi`."""
    if len(digits) == 0:
        raise ValueError("empty multi-index")
    n = 0
    for v, d in enumerate(digits):
        if d not in (1, 2):
            raise ValueError(f"digit {d} at mode {v + 1} outside {{1, 2}}")
        n += (d - 1) << v
    return n + 1


def multi_index_rows(indices, order):
    """Digit rows for an array of 1-based linear indices.

    Returns an (len(indices), order) int8 array with entries in {1, 2},
    row m being linear_to_multi(indices[m], order).
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("indices must be one-dimensional")
    if idx.size and (idx.min() < 1 or idx.max() > 1 << order):
        raise ValueError(f"linear indices out of range [1, {1 << order}]")
    shifts = np.arange(order, dtype=np.int64)
    return ((((idx - 1)[:, None] >> shifts[None, :]) & 1) + 1).astype(np.int8)


def mode_slice(vec, mode, digit):
    """Entries of ``vec`` whose digit in ``mode`` equals ``digit``.

    The 2**(L-1) returned entries are ordered by increasing linear index,
    i.e. the remaining modes keep their least-significant-first order.
    """
    if not 1 <= mode <= vec.order:
        raise ValueError(f"mode {mode} out of range [1, {vec.order}]")
    if digit not in (1, 2):
        raise ValueError(f"digit {digit} outside {{1, 2}}")
    low = 1 << (mode - 1)
    high = 1 << (vec.order - mode)
    return vec.values.reshape(high, 2, low)[:, digit - 1, :].reshape(-1)
