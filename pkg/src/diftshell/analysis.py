"""Leakage, space-overhead and transfer-cost metrics.

Leakage counts output words written to memory before the shell halts on a
corrupted tag. The worst case places the first input tag ``tag_offset``
words past the base address and lets the adversary overwrite the whole
input image; it is computed by replaying the kernel's burst trace
symbolically (no data, only addresses). :func:`leakage_measured` runs the
full memory-level simulation instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .attacker import Corruption, apply
from .kernels import (
    DEFAULT_PLM_WORDS,
    BurstEvent,
    KernelKind,
    Workload,
    input_extent,
    output_extent,
    random_input,
    trace,
)
from .memory import TaggedLayout
from .shell import RunOutcome, RunStatus, TaggedSystem, make_rng


@dataclass(frozen=True)
class LeakageResult:
    leaked_words: int
    total_output_words: int
    status: RunStatus
    halt_index: int | None = None

    def __post_init__(self):
        if not 0 <= self.leaked_words <= self.total_output_words:
            raise ValueError(f"leaked {self.leaked_words} of {self.total_output_words} output words")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.leaked_words, self.total_output_words)

    @property
    def percent(self) -> float:
        return 100.0 * self.leaked_words / self.total_output_words

    @property
    def detected(self) -> bool:
        return self.status is RunStatus.HALTED


def replay(events: Iterable[BurstEvent], layout: TaggedLayout, corrupt_lo: int, corrupt_hi: int,
           total_outputs: int) -> LeakageResult:
    """Replay a trace against a layout whose physical words ``[corrupt_lo, corrupt_hi)`` are corrupted.

    The corrupted words are assumed to differ from the tag value. Stops at the
    first load whose span holds a corrupted tag.
    """
    t, f, base = layout.tag_offset, layout.first_offset, layout.base_addr
    step = t + 1
    first_pos = base + f
    # indices j of corrupted tags: first_pos + j*step in [lo, hi)
    j_lo = max(0, -((first_pos - corrupt_lo) // step))
    j_hi = (corrupt_hi - 1 - first_pos) // step  # inclusive
    stored = 0
    if j_hi < j_lo:
        for is_store, _start, length in events:
            if is_store:
                stored += length
        return LeakageResult(stored, total_outputs, RunStatus.COMPLETED)
    for is_store, start, length in events:
        if is_store:
            stored += length
            continue
        # tags inside this load: j in [count(start), count(start + length))
        end = start + length
        if end < f:
            continue
        a = 0 if start < f else (start - f) // t + 1
        b = (end - f) // t + 1
        lo, hi = max(a, j_lo), min(b - 1, j_hi)
        if lo <= hi:
            return LeakageResult(stored, total_outputs, RunStatus.HALTED, first_pos + lo * step)
    return LeakageResult(stored, total_outputs, RunStatus.COMPLETED)


def leakage_worst_case(kind: "KernelKind | str", w: Workload, burst_words: int, tag_offset: int,
                       plm_words: int = DEFAULT_PLM_WORDS) -> LeakageResult:
    """Upper bound: first tag at ``base + tag_offset``, whole input image overwritten."""
    kind = KernelKind.parse(kind)
    layout = TaggedLayout.worst_case(tag_offset)
    n_in, n_out = input_extent(kind, w), output_extent(kind, w)
    events = trace(kind, w, burst_words, plm_words)
    if layout.tag_count(n_in) == 0:
        return LeakageResult(n_out, n_out, RunStatus.COMPLETED)
    return replay(events, layout, 0, layout.physical_length(n_in), n_out)


def gray_leakage_closed_form(n_words: int, burst_words: int, tag_offset: int) -> int:
    """Worst-case leaked words for GRAY without replaying: whole bursts before the first tag."""
    if tag_offset > n_words:
        return n_words
    return (tag_offset - 1) // burst_words * burst_words


def whole_input_corruption(kind: "KernelKind | str", w: Workload, tag_offset: int, first_offset: int | None = None,
                           word: int | None = None) -> Corruption:
    layout = TaggedLayout(tag_offset, tag_offset if first_offset is None else first_offset)
    length = layout.physical_length(input_extent(KernelKind.parse(kind), w))
    return Corruption.constant(0, length) if word is None else Corruption.constant(0, length, word)


@dataclass
class MeasuredLeakage:
    result: LeakageResult
    outcome: RunOutcome
    system: TaggedSystem

    @property
    def percent(self) -> float:
        return self.result.percent


def leakage_measured(kind: "KernelKind | str", w: Workload, burst_words: int, tag_offset: int, first_offset: int,
                     corruption: Corruption | None, seed: int = 0, plm_words: int = DEFAULT_PLM_WORDS,
                     input_matrix=None) -> MeasuredLeakage:
    """Full simulation: tagged input image, corruption, shelled run.

    Corruption addresses are physical word indices; the input image starts
    at address 0.
    """
    kind = KernelKind.parse(kind)
    if input_matrix is None:
        input_matrix = random_input(kind, w, make_rng(seed))
    system = TaggedSystem.build(kind, w, input_matrix, tag_offset, first_offset)
    if corruption is not None:
        apply(system.memory, corruption, system.shell.src_tag)
    outcome = system.run(burst_words, plm_words)
    halt_index = outcome.mismatch.index if outcome.mismatch else None
    result = LeakageResult(outcome.outputs_stored, outcome.total_outputs, outcome.status, halt_index)
    return MeasuredLeakage(result, outcome, system)


# -- space ------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceOverhead:
    input_tags: int
    output_tags: int
    input_words: int
    output_words: int

    @property
    def overhead_ratio(self) -> float:
        return (self.input_tags + self.output_tags) / (self.input_words + self.output_words)

    @property
    def total_tags(self) -> int:
        return self.input_tags + self.output_tags


def space_overhead(kind: "KernelKind | str", w: Workload, tag_offset: int, f_in: int | None = None,
                   f_out: int | None = None) -> SpaceOverhead:
    kind = KernelKind.parse(kind)
    n_in, n_out = input_extent(kind, w), output_extent(kind, w)
    lin = TaggedLayout(tag_offset, tag_offset if f_in is None else f_in)
    lout = TaggedLayout(tag_offset, tag_offset if f_out is None else f_out)
    return SpaceOverhead(lin.tag_count(n_in), lout.tag_count(n_out), n_in, n_out)


# -- transfer cost ------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Abstract DMA timing: fixed setup per burst plus a per-word charge.

    The defaults are modeling constants, not measured hardware numbers.
    """

    per_burst_setup: float = 100.0
    per_word: float = 1.0

    def __post_init__(self):
        if self.per_burst_setup < 0 or self.per_word < 0:
            raise ValueError("cost model constants must be non-negative")


@dataclass(frozen=True)
class TraceStats:
    loads: int
    stores: int
    load_words: int
    store_words: int
    load_tags: int = 0
    store_tags: int = 0

    @property
    def bursts(self) -> int:
        return self.loads + self.stores

    @property
    def logical_words(self) -> int:
        return self.load_words + self.store_words

    @property
    def physical_words(self) -> int:
        return self.logical_words + self.load_tags + self.store_tags


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def trace_stats(kind: "KernelKind | str", w: Workload, burst_words: int, in_layout: TaggedLayout,
                out_layout: TaggedLayout) -> TraceStats:
    """Burst and word counts of a trace, in closed form."""
    kind = KernelKind.parse(kind)
    b, rows, cols = burst_words, w.rows, w.cols
    n = w.words
    t_in = in_layout.tag_count(n)
    t_out = out_layout.tag_count(output_extent(kind, w))
    if kind is KernelKind.GRAY:
        k = _ceil_div(n, b)
        return TraceStats(k, k, n, n, t_in, t_out)
    if kind is KernelKind.MEAN:
        return TraceStats(rows * _ceil_div(cols, b), _ceil_div(rows, b), n, rows, t_in, t_out)
    stores = rows * _ceil_div(rows, b)
    if b >= cols:
        return TraceStats(rows * (rows + 1), stores, n * (rows + 1), rows * rows, t_in * (rows + 1), t_out)
    return TraceStats(2 * rows * rows * _ceil_div(cols, b), stores, 2 * rows * n, rows * rows, 2 * rows * t_in, t_out)


def trace_stats_by_replay(events: Iterable[BurstEvent], in_layout: TaggedLayout,
                          out_layout: TaggedLayout) -> TraceStats:
    """Same counts as :func:`trace_stats`, by walking every event."""
    loads = stores = lw = sw = lt = st = 0
    for is_store, start, length in events:
        layout = out_layout if is_store else in_layout
        tags = layout.tag_count(start + length) - layout.tag_count(start)
        if is_store:
            stores, sw, st = stores + 1, sw + length, st + tags
        else:
            loads, lw, lt = loads + 1, lw + length, lt + tags
    return TraceStats(loads, stores, lw, sw, lt, st)


def transfer_cost(kind: "KernelKind | str", w: Workload, burst_words: int, tag_offset: int,
                  model: CostModel = CostModel(), shelled: bool = True) -> float:
    """Abstract transfer time of one run; tags use the worst-case placement ``f = t``."""
    layout = TaggedLayout.worst_case(tag_offset)
    stats = trace_stats(kind, w, burst_words, layout, layout)
    words = stats.physical_words if shelled else stats.logical_words
    return model.per_burst_setup * stats.bursts + model.per_word * words


def cost_overhead(kind: "KernelKind | str", w: Workload, burst_words: int, tag_offset: int,
                  model: CostModel = CostModel()) -> float:
    """Shelled cost relative to the bare accelerator, minus one."""
    bare = transfer_cost(kind, w, burst_words, tag_offset, model, shelled=False)
    return transfer_cost(kind, w, burst_words, tag_offset, model, shelled=True) / bare - 1.0


# -- search -------------------------------------------------------------------

def find_zero_leakage_offset(kind: "KernelKind | str", w: Workload, burst_words: int,
                             plm_words: int = DEFAULT_PLM_WORDS) -> int:
    """Largest tag offset whose worst-case leakage is zero.

    Relies on worst-case leakage being non-decreasing in the tag offset.
    """
    kind = KernelKind.parse(kind)
    n_in = input_extent(kind, w)

    def leaks(t):
        return leakage_worst_case(kind, w, burst_words, t, plm_words).leaked_words > 0

    lo, hi = 1, n_in + 1  # leaks(1) is False: the very first load carries a tag
    if not leaks(hi):
        return n_in
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if leaks(mid):
            hi = mid
        else:
            lo = mid
    return lo
