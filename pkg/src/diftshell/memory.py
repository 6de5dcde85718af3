"""Word-addressable main memory with interleaved security tags.

Layout convention: ``first_offset`` data words precede the first tag, then a
tag follows every further ``tag_offset`` data words. A trailing group shorter
than ``tag_offset`` carries no tag, so for ``n`` data words::

    tag_count(n) = (n - f) // t + 1   if f <= n else 0

Tag ``j`` sits at relative physical index ``f + j * (t + 1)`` and data word
``k`` at ``k + tag_count(k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1


class LayoutError(ValueError):
    pass


class LengthInconsistent(LayoutError):
    """No data length maps onto the given physical length."""


class MemoryAccessError(IndexError):
    pass


def check_word(value: int) -> int:
    value = int(value)
    if not 0 <= value <= WORD_MASK:
        raise ValueError(f"word out of 64-bit range: {value:#x}")
    return value


def as_words(data: Iterable[int]) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.dtype == np.uint64:
        return data
    return np.array([check_word(v) for v in data], dtype=np.uint64)


@dataclass(frozen=True)
class TaggedLayout:
    tag_offset: int
    first_offset: int
    tag_value: int = 0
    base_addr: int = 0

    def __post_init__(self):
        if self.tag_offset < 1:
            raise LayoutError(f"tag_offset must be >= 1, got {self.tag_offset}")
        if not 1 <= self.first_offset <= self.tag_offset:
            raise LayoutError(
                f"first_offset must lie in [1, {self.tag_offset}], got {self.first_offset}"
            )
        if self.base_addr < 0:
            raise LayoutError("base_addr must be non-negative")
        check_word(self.tag_value)

    @classmethod
    def worst_case(cls, tag_offset: int, tag_value: int = 0, base_addr: int = 0) -> "TaggedLayout":
        """Layout with the first tag as far from ``base_addr`` as allowed."""
        return cls(tag_offset, tag_offset, tag_value, base_addr)

    def tag_count(self, n: int) -> int:
        if n < self.first_offset:
            return 0
        return (n - self.first_offset) // self.tag_offset + 1

    def physical_length(self, n: int) -> int:
        return n + self.tag_count(n)

    def data_length(self, physical_len: int) -> int:
        """Invert :meth:`physical_length`."""
        if physical_len < 0:
            raise LengthInconsistent(f"negative physical length {physical_len}")
        f, t = self.first_offset, self.tag_offset
        if physical_len < f:
            return physical_len
        q, r = divmod(physical_len - f - 1, t + 1)
        if physical_len == f or r == t:
            raise LengthInconsistent(
                f"physical length {physical_len} ends on a data word that must be followed by a tag"
            )
        return f + q * t + r

    def with_base(self, base_addr: int) -> "TaggedLayout":
        return TaggedLayout(self.tag_offset, self.first_offset, self.tag_value, base_addr)


def logical_to_physical(logical_index: int, layout: TaggedLayout) -> int:
    if logical_index < 0:
        raise ValueError("logical_index must be non-negative")
    return layout.base_addr + logical_index + layout.tag_count(logical_index)


def tag_positions(data_len: int, layout: TaggedLayout) -> list[int]:
    if data_len < 0:
        raise ValueError("data_len must be non-negative")
    start = layout.base_addr + layout.first_offset
    return list(range(start, start + layout.tag_count(data_len) * (layout.tag_offset + 1), layout.tag_offset + 1))


def _relative_tag_mask(physical_len: int, layout: TaggedLayout) -> np.ndarray:
    mask = np.zeros(physical_len, dtype=bool)
    mask[layout.first_offset :: layout.tag_offset + 1] = True
    return mask


def interleave(data: Sequence[int], layout: TaggedLayout) -> np.ndarray:
    words = as_words(data)
    out = np.empty(layout.physical_length(len(words)), dtype=np.uint64)
    mask = _relative_tag_mask(len(out), layout)
    out[mask] = np.uint64(layout.tag_value)
    out[~mask] = words
    return out


def deinterleave(physical: Sequence[int], layout: TaggedLayout) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Split a physical image into data words and ``(physical index, observed)`` tag checks.

    Indices in the tag checks are absolute (offset by ``layout.base_addr``).
    Whether a tag matches is left to the caller.
    """
    words = as_words(physical)
    layout.data_length(len(words))
    mask = _relative_tag_mask(len(words), layout)
    idx = np.flatnonzero(mask)
    checks = [(layout.base_addr + int(i), int(words[i])) for i in idx]
    return words[~mask], checks


class Memory:
    """Flat array of 64-bit words; every access is bounds-checked."""

    def __init__(self, size: int):
        if size < 0:
            raise ValueError("memory size must be non-negative")
        self.words = np.zeros(size, dtype=np.uint64)

    @classmethod
    def from_words(cls, words: Sequence[int]) -> "Memory":
        mem = cls(0)
        mem.words = as_words(words).copy()
        return mem

    @property
    def size(self) -> int:
        return len(self.words)

    def _check(self, addr: int, length: int):
        if addr < 0 or length < 0 or addr + length > self.size:
            raise MemoryAccessError(
                f"access [{addr}, {addr + length}) outside memory of {self.size} words"
            )

    def read(self, addr: int, length: int) -> np.ndarray:
        self._check(addr, length)
        return self.words[addr : addr + length].copy()

    def write(self, addr: int, words: Sequence[int]):
        words = as_words(words)
        self._check(addr, len(words))
        self.words[addr : addr + len(words)] = words

    def __getitem__(self, addr: int) -> int:
        self._check(addr, 1)
        return int(self.words[addr])

    def __setitem__(self, addr: int, value: int):
        self._check(addr, 1)
        self.words[addr] = check_word(value)

    def copy(self) -> "Memory":
        return Memory.from_words(self.words)

    def __eq__(self, other):
        return isinstance(other, Memory) and np.array_equal(self.words, other.words)
