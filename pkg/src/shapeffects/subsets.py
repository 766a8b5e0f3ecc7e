"""Bit-mask encoding of variable subsets.

A subset u of the p input variables is a p-bit mask: bit i set means variable
i (0-based) belongs to u. Masks index dense arrays of length 2**p, which is
how per-subset quantities are stored everywhere in this package. The dimension
is capped at MAX_DIM because subset enumeration is inherently 2**p.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import SubsetError

MAX_DIM = 30


def check_dim(p: int) -> int:
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise SubsetError(f"dimension must be a positive integer, got {p!r}")
    if p > MAX_DIM:
        raise SubsetError(
            f"dimension {p} exceeds the supported maximum {MAX_DIM} "
            f"(subset enumeration is 2**p)"
        )
    return int(p)


def check_mask(mask: int, p: int) -> int:
    check_dim(p)
    mask = int(mask)
    if mask < 0 or mask >= (1 << p):
        raise SubsetError(f"mask {mask} out of range for p={p}")
    return mask


def full_mask(p: int) -> int:
    return (1 << check_dim(p)) - 1


def mask_size(mask: int) -> int:
    return int(mask).bit_count()


@lru_cache(maxsize=4096)
def _mask_indices_tuple(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    m = mask
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


def mask_indices(mask: int) -> np.ndarray:
    """Ascending 0-based variable indices contained in the mask."""
    return np.array(_mask_indices_tuple(int(mask)), dtype=np.intp)


def mask_from_indices(indices, p: int) -> int:
    mask = 0
    for i in indices:
        i = int(i)
        if i < 0 or i >= p:
            raise SubsetError(f"variable index {i} out of range for p={p}")
        bit = 1 << i
        if mask & bit:
            raise SubsetError(f"duplicate variable index {i}")
        mask |= bit
    return mask


@lru_cache(maxsize=64)
def popcounts(p: int) -> np.ndarray:
    """|u| for every mask 0..2**p-1."""
    check_dim(p)
    return np.bitwise_count(np.arange(1 << p, dtype=np.uint32)).astype(np.int64)


@lru_cache(maxsize=64)
def binomial_row(p: int) -> np.ndarray:
    """C(p, k) for k = 0..p, computed exactly then converted to float."""
    return np.array([comb(p, k) for k in range(p + 1)], dtype=float)


@dataclass(frozen=True)
class SubsetIndex:
    """A subset of the p variables, encoded as a bit mask.

    Hashable and usable as a table key; `mask` indexes dense 2**p arrays.
    """

    mask: int
    p: int

    def __post_init__(self):
        check_mask(self.mask, self.p)

    @classmethod
    def from_indices(cls, indices, p: int) -> "SubsetIndex":
        return cls(mask_from_indices(indices, p), p)

    @classmethod
    def empty(cls, p: int) -> "SubsetIndex":
        return cls(0, p)

    @classmethod
    def full(cls, p: int) -> "SubsetIndex":
        return cls(full_mask(p), p)

    def complement(self) -> "SubsetIndex":
        return SubsetIndex(self.mask ^ full_mask(self.p), self.p)

    def union(self, other: "SubsetIndex") -> "SubsetIndex":
        self._check_same_dim(other)
        return SubsetIndex(self.mask | other.mask, self.p)

    __or__ = union

    def intersection(self, other: "SubsetIndex") -> "SubsetIndex":
        self._check_same_dim(other)
        return SubsetIndex(self.mask & other.mask, self.p)

    __and__ = intersection

    def add(self, i: int) -> "SubsetIndex":
        return SubsetIndex(self.mask | (1 << _check_var(i, self.p)), self.p)

    def contains(self, i: int) -> bool:
        return bool(self.mask >> _check_var(i, self.p) & 1)

    def indices(self) -> np.ndarray:
        return mask_indices(self.mask)

    def is_empty(self) -> bool:
        return self.mask == 0

    def is_full(self) -> bool:
        return self.mask == full_mask(self.p)

    def is_proper(self) -> bool:
        """Nonempty and not the full set."""
        return not (self.is_empty() or self.is_full())

    def __len__(self) -> int:
        return mask_size(self.mask)

    def __iter__(self):
        return iter(_mask_indices_tuple(self.mask))

    def __repr__(self):
        inside = ",".join(str(i) for i in self)
        return f"SubsetIndex({{{inside}}}, p={self.p})"

    def _check_same_dim(self, other):
        if self.p != other.p:
            raise SubsetError(f"dimension mismatch: p={self.p} vs p={other.p}")


def _check_var(i: int, p: int) -> int:
    i = int(i)
    if i < 0 or i >= p:
        raise SubsetError(f"variable index {i} out of range for p={p}")
    return i


def as_mask(u, p: int) -> int:
    """Coerce a SubsetIndex, mask int, or iterable of indices to a valid mask."""
    if isinstance(u, SubsetIndex):
        if u.p != p:
            raise SubsetError(f"SubsetIndex has p={u.p}, expected {p}")
        return u.mask
    if isinstance(u, (int, np.integer)):
        return check_mask(int(u), p)
    return mask_from_indices(u, p)
