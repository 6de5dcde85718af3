"""Behavioral models of the GRAY, MEAN and MULTS accelerators.

Each accelerator talks to memory only through a port with ``load(start,
length)`` and ``store(start, words)``; indices are logical word offsets into
the input or output extent. The same access pattern is also available as a
pure event stream via :func:`trace`, which does no arithmetic and is what the
analysis code replays.

Data words are unsigned Q32.32 fixed point with wraparound, except GRAY
inputs which pack three 16-bit channels (R in bits 0-15, G in 16-31, B in
32-47).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Protocol, Sequence

import numpy as np

from .memory import WORD_MASK, Memory, as_words

FRAC_BITS = 32
ONE = 1 << FRAC_BITS

# largest default burst is 2**13 bytes = 1024 words; the PLM double-buffers it
DEFAULT_PLM_WORDS = 2 * 1024


class KernelError(ValueError):
    pass


class BurstTooLarge(KernelError):
    pass


class DimensionMismatch(KernelError):
    pass


class KernelKind(str, enum.Enum):
    GRAY = "GRAY"
    MEAN = "MEAN"
    MULTS = "MULTS"

    @classmethod
    def parse(cls, name: "str | KernelKind") -> "KernelKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise KernelError(f"unknown kernel {name!r}; expected one of GRAY, MEAN, MULTS") from None


@dataclass(frozen=True)
class Workload:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DimensionMismatch(f"workload must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def words(self) -> int:
        return self.rows * self.cols

    def __str__(self):
        return f"{self.rows}x{self.cols}"


TABLE_I_WORKLOADS = (Workload(128, 128), Workload(512, 512), Workload(2048, 2048))


class BurstEvent(NamedTuple):
    is_store: bool
    start: int
    length: int

    def __repr__(self):
        return f"{'Store' if self.is_store else 'Load'}({self.start},{self.length})"


def Load(start: int, length: int) -> BurstEvent:
    return BurstEvent(False, start, length)


def Store(start: int, length: int) -> BurstEvent:
    return BurstEvent(True, start, length)


def input_extent(kind: KernelKind, w: Workload) -> int:
    return w.words


def output_extent(kind: KernelKind, w: Workload) -> int:
    kind = KernelKind.parse(kind)
    if kind is KernelKind.GRAY:
        return w.words
    if kind is KernelKind.MEAN:
        return w.rows
    return w.rows * w.rows


def _check_burst(burst_words: int, plm_words: int):
    if burst_words < 1:
        raise KernelError(f"burst_words must be >= 1, got {burst_words}")
    if burst_words > plm_words:
        raise BurstTooLarge(f"burst of {burst_words} words exceeds PLM capacity of {plm_words} words")


def trace(kind: "KernelKind | str", w: Workload, burst_words: int, plm_words: int = DEFAULT_PLM_WORDS) -> Iterator[BurstEvent]:
    """Yield the accelerator's load/store bursts in execution order."""
    kind = KernelKind.parse(kind)
    _check_burst(burst_words, plm_words)
    if kind is KernelKind.GRAY:
        return _gray_trace(w, burst_words)
    if kind is KernelKind.MEAN:
        return _mean_trace(w, burst_words)
    return _mults_trace(w, burst_words)


def _gray_trace(w, b):
    n = w.words
    for start in range(0, n, b):
        length = min(b, n - start)
        yield BurstEvent(False, start, length)
        yield BurstEvent(True, start, length)


def _mean_trace(w, b):
    rows, cols = w.rows, w.cols
    stored = 0
    for r in range(rows):
        base = r * cols
        for c0 in range(0, cols, b):
            yield BurstEvent(False, base + c0, min(b, cols - c0))
        done = r + 1
        if done - stored == b or done == rows:
            yield BurstEvent(True, stored, done - stored)
            stored = done


def _mults_trace(w, b):
    rows, cols = w.rows, w.cols
    for i in range(rows):
        if b >= cols:
            yield BurstEvent(False, i * cols, cols)
            for j in range(rows):
                yield BurstEvent(False, j * cols, cols)
        else:
            for j in range(rows):
                for c0 in range(0, cols, b):
                    length = min(b, cols - c0)
                    yield BurstEvent(False, i * cols + c0, length)
                    yield BurstEvent(False, j * cols + c0, length)
        for o in range(0, rows, b):
            yield BurstEvent(True, i * rows + o, min(b, rows - o))


# -- reference semantics ----------------------------------------------------

def pack_rgb(r: int, g: int, b: int) -> int:
    return (r & 0xFFFF) | (g & 0xFFFF) << 16 | (b & 0xFFFF) << 32


def gray_pixel(word: int) -> int:
    r, g, b = word & 0xFFFF, (word >> 16) & 0xFFFF, (word >> 32) & 0xFFFF
    return ((r + g + b) // 3) << FRAC_BITS


def row_mean(values: Sequence[int]) -> int:
    return (sum(int(v) for v in values) // len(values)) & WORD_MASK


def fixed_dot(a: Sequence[int], b: Sequence[int]) -> int:
    acc = 0
    for x, y in zip(a, b):
        acc = (acc + ((int(x) * int(y)) >> FRAC_BITS)) & WORD_MASK
    return acc


def _as_matrix(data, w: Workload | None = None) -> np.ndarray:
    m = np.asarray(data, dtype=np.uint64)
    if w is not None:
        if m.size != w.words:
            raise DimensionMismatch(f"input has {m.size} words, workload {w} needs {w.words}")
        m = m.reshape(w.rows, w.cols)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def compute_reference(kind: "KernelKind | str", matrix, w: Workload | None = None) -> list[int]:
    """Whole-matrix functional model; the correctness oracle for every run."""
    kind = KernelKind.parse(kind)
    m = _as_matrix(matrix, w)
    rows = m.tolist()
    if kind is KernelKind.GRAY:
        return [gray_pixel(v) for row in rows for v in row]
    if kind is KernelKind.MEAN:
        return [row_mean(row) for row in rows]
    return [fixed_dot(ri, rj) for ri in rows for rj in rows]


# -- accelerators ----------------------------------------------------------

class MemoryPort(Protocol):
    def load(self, start: int, length: int) -> Sequence[int]: ...

    def store(self, start: int, words: Sequence[int]) -> None: ...


class Plm:
    """Private local memory; cleared at every invocation."""

    def __init__(self, capacity_words: int):
        self.capacity_words = capacity_words
        self.contents: list[list[int]] = []

    def reset(self):
        self.contents = []

    def fill(self, *bursts: Sequence[int]):
        total = sum(len(b) for b in bursts)
        if total > self.capacity_words:
            raise BurstTooLarge(f"{total} words do not fit a PLM of {self.capacity_words} words")
        self.contents = [list(map(int, b)) for b in bursts]


@dataclass
class AcceleratorConfig:
    """Configuration registers: input base, output base, rows, cols."""

    input_base: int
    output_base: int
    rows: int
    cols: int

    N_REGISTERS = 4

    @property
    def registers(self) -> list[int]:
        return [self.input_base, self.output_base, self.rows, self.cols]

    @classmethod
    def from_registers(cls, regs: Sequence[int]) -> "AcceleratorConfig":
        if len(regs) != cls.N_REGISTERS:
            raise KernelError(f"expected {cls.N_REGISTERS} registers, got {len(regs)}")
        return cls(*(int(r) for r in regs))

    @property
    def workload(self) -> Workload:
        return Workload(self.rows, self.cols)


class Accelerator:
    """Issues bursts against a port and computes outputs from what it loads.

    The accelerator never sees tags: whatever the port returns is treated as
    plain data.
    """

    def __init__(self, kind: "KernelKind | str", burst_words: int, plm_words: int = DEFAULT_PLM_WORDS):
        self.kind = KernelKind.parse(kind)
        _check_burst(burst_words, plm_words)
        self.burst_words = burst_words
        self.plm = Plm(plm_words)

    def run(self, w: Workload, port: MemoryPort):
        self.plm.reset()
        getattr(self, f"_run_{self.kind.value.lower()}")(w, port)

    def _run_gray(self, w, port):
        b, n = self.burst_words, w.words
        for start in range(0, n, b):
            self.plm.fill(port.load(start, min(b, n - start)))
            port.store(start, [gray_pixel(v) for v in self.plm.contents[0]])

    def _run_mean(self, w, port):
        b = self.burst_words
        pending: list[int] = []
        stored = 0
        for r in range(w.rows):
            acc = 0
            for c0 in range(0, w.cols, b):
                self.plm.fill(port.load(r * w.cols + c0, min(b, w.cols - c0)))
                acc += sum(self.plm.contents[0])
            pending.append((acc // w.cols) & WORD_MASK)
            if len(pending) == b or r + 1 == w.rows:
                port.store(stored, pending)
                stored += len(pending)
                pending = []

    def _run_mults(self, w, port):
        b, rows, cols = self.burst_words, w.rows, w.cols
        for i in range(rows):
            out_row = []
            if b >= cols:
                row_i = port.load(i * cols, cols)
                for j in range(rows):
                    self.plm.fill(row_i, port.load(j * cols, cols))
                    out_row.append(fixed_dot(*self.plm.contents))
            else:
                for j in range(rows):
                    acc = 0
                    for c0 in range(0, cols, b):
                        length = min(b, cols - c0)
                        self.plm.fill(port.load(i * cols + c0, length), port.load(j * cols + c0, length))
                        acc = (acc + fixed_dot(*self.plm.contents)) & WORD_MASK
                    out_row.append(acc)
            for o in range(0, rows, b):
                port.store(i * rows + o, out_row[o : o + b])


class RawPort:
    """Direct, untagged memory access at fixed input/output bases."""

    def __init__(self, memory: Memory, input_base: int, output_base: int):
        self.memory = memory
        self.input_base = input_base
        self.output_base = output_base
        self.events: list[BurstEvent] = []

    def load(self, start, length):
        self.events.append(Load(start, length))
        return self.memory.read(self.input_base + start, length).tolist()

    def store(self, start, words):
        self.events.append(Store(start, len(words)))
        self.memory.write(self.output_base + start, words)


class RecordingPort:
    """Returns zeros and records the burst sequence."""

    def __init__(self):
        self.events: list[BurstEvent] = []

    def load(self, start, length):
        self.events.append(Load(start, length))
        return [0] * length

    def store(self, start, words):
        self.events.append(Store(start, len(words)))


def shell_unaware_run(kind: "KernelKind | str", config: AcceleratorConfig, memory: Memory, burst_words: int,
                      plm_words: int = DEFAULT_PLM_WORDS) -> list[int]:
    """Run the bare accelerator against untagged memory; returns the output words."""
    kind = KernelKind.parse(kind)
    w = config.workload
    Accelerator(kind, burst_words, plm_words).run(w, RawPort(memory, config.input_base, config.output_base))
    return memory.read(config.output_base, output_extent(kind, w)).tolist()


def random_input(kind: "KernelKind | str", w: Workload, rng: np.random.Generator) -> np.ndarray:
    """Random input matrix of the right shape and encoding for ``kind``."""
    kind = KernelKind.parse(kind)
    if kind is KernelKind.GRAY:
        rgb = rng.integers(0, 1 << 16, size=(w.rows, w.cols, 3), dtype=np.uint64)
        return rgb[..., 0] | rgb[..., 1] << np.uint64(16) | rgb[..., 2] << np.uint64(32)
    return rng.integers(0, 1 << 64, size=(w.rows, w.cols), dtype=np.uint64, endpoint=False)
