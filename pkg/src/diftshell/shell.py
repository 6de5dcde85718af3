"""Coarse-grain DIFT shell wrapped around an unmodified accelerator.

The shell sits between the accelerator and memory. Loads are widened to
cover the tags interleaved with the requested data; every tag must equal
``src_tag`` or the run stops before the next burst. Stores are widened the
same way and the gaps filled with ``dst_tag``.

First-tag offsets are drawn from numpy's PCG64 generator seeded with the run
seed, so a given seed always yields the same layout.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .kernels import (
    DEFAULT_PLM_WORDS,
    Accelerator,
    AcceleratorConfig,
    BurstEvent,
    KernelKind,
    Workload,
    input_extent,
    output_extent,
)
from .memory import (
    Memory,
    TaggedLayout,
    as_words,
    check_word,
    deinterleave,
    interleave,
    logical_to_physical,
)

DEFAULT_SRC_TAG = 0x5A17_C0DE_5A17_C0DE
DEFAULT_DST_TAG = 0xD057_7A60_D057_7A60


class ShellError(ValueError):
    pass


class InvalidOffset(ShellError):
    pass


class RegisterTagMismatch(ShellError):
    pass


@dataclass(frozen=True)
class ShellConfig:
    acc_registers: tuple[int, ...]
    acc_register_tags: tuple[int, ...]
    src_tag: int = DEFAULT_SRC_TAG
    dst_tag: int = DEFAULT_DST_TAG
    tag_offset: int = 1
    first_tag_offset: int = 1

    @classmethod
    def for_accelerator(cls, acc: AcceleratorConfig, tag_offset: int, first_tag_offset: int | None = None,
                        src_tag: int = DEFAULT_SRC_TAG, dst_tag: int = DEFAULT_DST_TAG) -> "ShellConfig":
        """Driver-side setup: every accelerator register is tagged with ``src_tag``."""
        regs = tuple(acc.registers)
        return cls(regs, (src_tag,) * len(regs), src_tag, dst_tag, tag_offset,
                   tag_offset if first_tag_offset is None else first_tag_offset)

    @property
    def n_acc_registers(self) -> int:
        return len(self.acc_registers)

    @property
    def driver_visible_registers(self) -> int:
        # N data registers, N register tags, src_tag, dst_tag
        return 2 * self.n_acc_registers + 2

    @property
    def register_count(self) -> int:
        return self.driver_visible_registers + 1

    def application_view(self) -> tuple[int, ...]:
        """The only registers software applications can read back."""
        return self.acc_registers

    @property
    def accelerator(self) -> AcceleratorConfig:
        return AcceleratorConfig.from_registers(self.acc_registers)

    def input_layout(self) -> TaggedLayout:
        return TaggedLayout(self.tag_offset, self.first_tag_offset, self.src_tag, self.accelerator.input_base)

    def output_layout(self) -> TaggedLayout:
        return TaggedLayout.worst_case(self.tag_offset, self.dst_tag, self.accelerator.output_base)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def draw_first_offset(tag_offset: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, tag_offset, endpoint=True))


def configure(config: ShellConfig, seed: int = 0, randomize: bool = False) -> ShellConfig:
    """Validate a register file and optionally randomize the first-tag offset."""
    if config.tag_offset < 1:
        raise InvalidOffset(f"tag_offset must be >= 1, got {config.tag_offset}")
    check_word(config.src_tag)
    check_word(config.dst_tag)
    if len(config.acc_register_tags) != len(config.acc_registers):
        raise ShellError("one tag register is required per accelerator register")
    for i, tag in enumerate(config.acc_register_tags):
        if tag != config.src_tag:
            raise RegisterTagMismatch(f"accelerator register {i} carries tag {tag:#x}, expected src_tag")
    if randomize:
        return dataclasses.replace(config, first_tag_offset=draw_first_offset(config.tag_offset, make_rng(seed)))
    if not 1 <= config.first_tag_offset <= config.tag_offset:
        raise InvalidOffset(f"first_tag_offset {config.first_tag_offset} outside [1, {config.tag_offset}]")
    return config


class PhysicalSpan(NamedTuple):
    start: int
    stop: int
    tags: tuple[int, ...]

    def __len__(self):
        return self.stop - self.start


def _span(start: int, length: int, layout: TaggedLayout) -> PhysicalSpan:
    lo = logical_to_physical(start, layout)
    hi = logical_to_physical(start + length, layout)
    first_tag = layout.tag_count(start)
    last_tag = layout.tag_count(start + length)
    step = layout.tag_offset + 1
    first_pos = layout.base_addr + layout.first_offset
    return PhysicalSpan(lo, hi, tuple(first_pos + j * step for j in range(first_tag, last_tag)))


def rewrite_load(request: BurstEvent, layout: TaggedLayout) -> PhysicalSpan:
    """Physical span of a load, including the tag after each requested word."""
    return _span(request.start, request.length, layout)


class Mismatch(NamedTuple):
    index: int
    observed: int


def check_tags(span: PhysicalSpan, words: Sequence[int], expected: int) -> Mismatch | None:
    """First tag in ``span`` that differs from ``expected``, or None."""
    for pos in span.tags:
        observed = int(words[pos - span.start])
        if observed != expected:
            return Mismatch(pos, observed)
    return None


def rewrite_store(request: BurstEvent, data: Sequence[int], layout: TaggedLayout) -> tuple[int, np.ndarray]:
    """Start address and physical words for a store, tags filled with ``layout.tag_value``."""
    data = as_words(data)
    if len(data) != request.length:
        raise ShellError(f"store of {request.length} words given {len(data)} data words")
    span = _span(request.start, request.length, layout)
    out = np.full(len(span), layout.tag_value, dtype=np.uint64)
    mask = np.ones(len(span), dtype=bool)
    mask[[p - span.start for p in span.tags]] = False
    out[mask] = data
    return span.start, out


class RunStatus(str, enum.Enum):
    COMPLETED = "completed"
    HALTED = "halted"


@dataclass
class RunOutcome:
    status: RunStatus
    outputs_stored: int
    total_outputs: int
    output_layout: TaggedLayout
    mismatch: Mismatch | None = None
    events: list[BurstEvent] = field(default_factory=list, repr=False)

    @property
    def halted(self) -> bool:
        return self.status is RunStatus.HALTED


class ShellHalt(Exception):
    def __init__(self, mismatch: Mismatch):
        super().__init__(f"tag mismatch at {mismatch.index}: {mismatch.observed:#x}")
        self.mismatch = mismatch


class ShellPort:
    """Memory port seen by the wrapped accelerator: de-tagged loads, tagged stores."""

    def __init__(self, memory: Memory, input_layout: TaggedLayout, output_layout: TaggedLayout, src_tag: int):
        self.memory = memory
        self.input_layout = input_layout
        self.output_layout = output_layout
        self.src_tag = src_tag
        self.outputs_stored = 0
        self.events: list[BurstEvent] = []

    def load(self, start, length):
        request = BurstEvent(False, start, length)
        self.events.append(request)
        span = rewrite_load(request, self.input_layout)
        words = self.memory.read(span.start, len(span))
        mismatch = check_tags(span, words, self.src_tag)
        if mismatch is not None:
            raise ShellHalt(mismatch)
        if not span.tags:
            return words.tolist()
        keep = np.ones(len(span), dtype=bool)
        keep[[p - span.start for p in span.tags]] = False
        return words[keep].tolist()

    def store(self, start, words):
        request = BurstEvent(True, start, len(words))
        self.events.append(request)
        addr, physical = rewrite_store(request, words, self.output_layout)
        self.memory.write(addr, physical)
        self.outputs_stored += len(words)


def run_shelled(kind: "KernelKind | str", config: ShellConfig, burst_words: int, memory: Memory,
                plm_words: int = DEFAULT_PLM_WORDS) -> RunOutcome:
    kind = KernelKind.parse(kind)
    acc = config.accelerator
    w = acc.workload
    port = ShellPort(memory, config.input_layout(), config.output_layout(), config.src_tag)
    try:
        Accelerator(kind, burst_words, plm_words).run(w, port)
    except ShellHalt as halt:
        return RunOutcome(RunStatus.HALTED, port.outputs_stored, output_extent(kind, w),
                          port.output_layout, halt.mismatch, port.events)
    return RunOutcome(RunStatus.COMPLETED, port.outputs_stored, output_extent(kind, w),
                      port.output_layout, None, port.events)


@dataclass
class TaggedSystem:
    """A memory image holding one tagged input region followed by an output region."""

    kind: KernelKind
    workload: Workload
    shell: ShellConfig
    memory: Memory

    @classmethod
    def build(cls, kind: "KernelKind | str", w: Workload, input_matrix, tag_offset: int,
              first_tag_offset: int | None = None, seed: int = 0, randomize: bool = False,
              src_tag: int = DEFAULT_SRC_TAG, dst_tag: int = DEFAULT_DST_TAG) -> "TaggedSystem":
        kind = KernelKind.parse(kind)
        n_in, n_out = input_extent(kind, w), output_extent(kind, w)
        draft = ShellConfig.for_accelerator(AcceleratorConfig(0, 0, w.rows, w.cols), tag_offset,
                                            first_tag_offset, src_tag, dst_tag)
        draft = configure(draft, seed, randomize)
        in_len = draft.input_layout().physical_length(n_in)
        out_len = draft.output_layout().physical_length(n_out)
        acc = AcceleratorConfig(0, in_len, w.rows, w.cols)
        shell = dataclasses.replace(draft, acc_registers=tuple(acc.registers))
        memory = Memory(in_len + out_len)
        memory.write(0, interleave(np.asarray(input_matrix, dtype=np.uint64).ravel(), shell.input_layout()))
        return cls(kind, w, shell, memory)

    @property
    def input_span(self) -> tuple[int, int]:
        acc = self.shell.accelerator
        return acc.input_base, acc.output_base

    @property
    def output_span(self) -> tuple[int, int]:
        return self.shell.accelerator.output_base, self.memory.size

    def run(self, burst_words: int, plm_words: int = DEFAULT_PLM_WORDS) -> RunOutcome:
        return run_shelled(self.kind, self.shell, burst_words, self.memory, plm_words)

    def output_data(self) -> tuple[list[int], list[tuple[int, int]]]:
        lo, hi = self.output_span
        data, checks = deinterleave(self.memory.read(lo, hi - lo), self.shell.output_layout())
        return data.tolist(), checks
