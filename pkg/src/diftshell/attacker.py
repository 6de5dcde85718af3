"""Software adversary that overwrites part of an accelerator's input image."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .memory import Memory, MemoryAccessError, TaggedLayout, as_words, check_word, tag_positions

DEFAULT_ATTACK_WORD = 0x0BAD_F00D_0BAD_F00D


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class Corruption:
    start: int
    length: int
    payload: tuple[int, ...]

    def __post_init__(self):
        if self.length < 1:
            raise AttackError("a corruption must cover at least one word")
        if self.start < 0:
            raise AttackError("corruption start must be non-negative")
        if len(self.payload) != self.length:
            raise AttackError(f"payload has {len(self.payload)} words for a region of {self.length}")
        for w in self.payload:
            check_word(w)

    @classmethod
    def constant(cls, start: int, length: int, word: int = DEFAULT_ATTACK_WORD) -> "Corruption":
        return cls(start, length, (check_word(word),) * length)

    @classmethod
    def from_words(cls, start: int, words: Sequence[int]) -> "Corruption":
        return cls(start, len(words), tuple(int(w) for w in as_words(words)))

    @property
    def stop(self) -> int:
        return self.start + self.length

    def covers(self, addr: int) -> bool:
        return self.start <= addr < self.stop

    def touches_tag(self, data_len: int, layout: TaggedLayout) -> bool:
        """True if some tag of ``layout`` lies inside the region."""
        return any(self.covers(p) for p in tag_positions(data_len, layout))


def _check(memory: Memory, c: Corruption, src_tag: int | None):
    if src_tag is not None and src_tag in c.payload:
        raise AttackError("the adversary cannot write the secret src_tag value")
    if c.stop > memory.size:
        raise MemoryAccessError(f"corruption [{c.start}, {c.stop}) outside memory of {memory.size} words")


def apply(memory: Memory, c: Corruption, src_tag: int | None = None) -> Memory:
    """Overwrite ``[c.start, c.stop)`` in place and return the memory."""
    _check(memory, c, src_tag)
    memory.write(c.start, c.payload)
    return memory


def apply_avoiding_tags(memory: Memory, c: Corruption, data_len: int, layout: TaggedLayout,
                        src_tag: int | None = None) -> Memory:
    """Oracle adversary: knows the layout and skips every tag position."""
    _check(memory, c, src_tag)
    region = np.arange(c.start, c.stop)
    keep = ~np.isin(region, tag_positions(data_len, layout))
    memory.words[region[keep]] = np.asarray(c.payload, dtype=np.uint64)[keep]
    return memory
