"""Integer-backed state sets.

State sets throughout the checker are plain Python ints used as bitsets,
keyed by the canonical state index of the owning model.  Python's arbitrary
precision ints make union/intersection/complement single operations and keep
the fixpoint kernels allocation-free.
"""

from __future__ import annotations

from typing import Iterator


def bit(i: int) -> int:
    return 1 << i


def full_set(n: int) -> int:
    """Set containing the indices 0..n-1."""
    return (1 << n) - 1


def complement(s: int, n: int) -> int:
    return ~s & ((1 << n) - 1)


def contains(s: int, i: int) -> bool:
    return (s >> i) & 1 == 1


def iter_bits(s: int) -> Iterator[int]:
    """Yield set bit indices in increasing order."""
    while s:
        low = s & -s
        yield low.bit_length() - 1
        s ^= low


def from_indices(indices) -> int:
    s = 0
    for i in indices:
        s |= 1 << i
    return s


def size(s: int) -> int:
    return s.bit_count()
