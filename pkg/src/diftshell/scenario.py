"""Coupled-tag host running a buffer-overflow attack against a MEAN offload.

The host is an abstract tagged machine: a byte-addressed global memory of
64-bit words, each carrying a 4-bit tag lane. Only whole-word stores occur,
so the four lane bits are always set or cleared together. The attacker asks
for the mean of a 5x5 matrix; ``st_data`` has room for four results, so the
fifth lands on the function pointer ``func`` that the program calls
afterwards.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .kernels import Accelerator, KernelKind, Workload
from .memory import WORD_MASK, check_word

TAG_BITS = 4
CLEAN = 0x0
SPURIOUS = 0xF

WORD_BYTES = 8
GLOBAL_BASE = 0x1000_0000

LD_DATA_WORDS = 32
ST_DATA_WORDS = 4

DEFAULT_FUNCTIONS = {"bar": 0x0000_2040, "foo": 0x0000_20C0}


@dataclass(frozen=True)
class CoupledTaggedWord:
    value: int
    tag: int = CLEAN

    def __post_init__(self):
        check_word(self.value)
        if not 0 <= self.tag < 1 << TAG_BITS:
            raise ValueError(f"tag lane is {TAG_BITS} bits, got {self.tag:#x}")

    @property
    def spurious(self) -> bool:
        return self.tag != CLEAN


def taint_source(words: Sequence[int | CoupledTaggedWord]) -> list[CoupledTaggedWord]:
    """Mark every byte of data from an untrusted channel as spurious."""
    out = []
    for w in words:
        value = w.value if isinstance(w, CoupledTaggedWord) else w
        out.append(CoupledTaggedWord(value, SPURIOUS))
    return out


def propagate(op: Callable[..., int], *operands: CoupledTaggedWord) -> CoupledTaggedWord:
    """Apply ``op`` to the operand values; the result tag is the OR of operand tags."""
    tag = CLEAN
    for o in operands:
        tag |= o.tag
    return CoupledTaggedWord(op(*(o.value for o in operands)) & WORD_MASK, tag)


def tagged_mean(values: Sequence[CoupledTaggedWord]) -> CoupledTaggedWord:
    return propagate(lambda *vs: sum(vs) // len(vs), *values)


class PointerCheck(enum.Enum):
    OK = "ok"
    POLICY_VIOLATION = "policy-violation"


def check_pointer_use(word: CoupledTaggedWord) -> PointerCheck:
    """Spurious values may never be used as indirect-call targets."""
    return PointerCheck.POLICY_VIOLATION if word.spurious else PointerCheck.OK


class Mode(str, enum.Enum):
    SOFTWARE = "software"
    HW_NOSHELL = "hw-noshell"
    HW_SHELL = "hw-shell"


class OutcomeKind(str, enum.Enum):
    EXCEPTION_RAISED = "ExceptionRaised"
    ATTACK_SUCCEEDED = "AttackSucceeded"
    NORMAL_TERMINATION = "NormalTermination"


@dataclass
class ScenarioOutcome:
    kind: OutcomeKind
    called: str | None = None
    outputs: list[CoupledTaggedWord] = field(default_factory=list)
    image: list[tuple[int, str, CoupledTaggedWord]] = field(default_factory=list, repr=False)

    def __str__(self):
        if self.kind is OutcomeKind.EXCEPTION_RAISED:
            return "ExceptionRaised"
        return f"{self.kind.value}({self.called})"


class HostMachine:
    """Flat tagged global memory: ``ld_data``, then ``st_data``, then ``func``."""

    def __init__(self, functions: dict[str, int] | None = None):
        self.functions = dict(DEFAULT_FUNCTIONS if functions is None else functions)
        self.symbols = {
            "ld_data": 0,
            "st_data": LD_DATA_WORDS,
            "func": LD_DATA_WORDS + ST_DATA_WORDS,
        }
        self.words = [CoupledTaggedWord(0)] * (LD_DATA_WORDS + ST_DATA_WORDS + 1)
        self.words[self.symbols["func"]] = CoupledTaggedWord(self.functions["bar"])

    def address(self, index: int) -> int:
        return GLOBAL_BASE + index * WORD_BYTES

    def load_input(self, argv: Sequence[int]):
        # no bounds check, as in the vulnerable program
        for i, w in enumerate(taint_source(argv)):
            self.words[self.symbols["ld_data"] + i] = w

    def write_outputs(self, outputs: Sequence[CoupledTaggedWord]):
        # st_data holds four words; nothing stops a fifth
        for i, w in enumerate(outputs):
            self.words[self.symbols["st_data"] + i] = w

    def input_words(self, n: int) -> list[CoupledTaggedWord]:
        base = self.symbols["ld_data"]
        return self.words[base : base + n]

    def call_func(self) -> tuple[OutcomeKind, str | None]:
        target = self.words[self.symbols["func"]]
        if check_pointer_use(target) is PointerCheck.POLICY_VIOLATION:
            return OutcomeKind.EXCEPTION_RAISED, None
        for name, addr in self.functions.items():
            if addr == target.value:
                if name == "bar":
                    return OutcomeKind.NORMAL_TERMINATION, name
                return OutcomeKind.ATTACK_SUCCEEDED, name
        return OutcomeKind.ATTACK_SUCCEEDED, f"{target.value:#x}"

    def image(self) -> list[tuple[int, str, CoupledTaggedWord]]:
        names = {}
        for name, base in self.symbols.items():
            size = {"ld_data": LD_DATA_WORDS, "st_data": ST_DATA_WORDS, "func": 1}[name]
            for i in range(size):
                names[base + i] = name if size == 1 else f"{name}[{i}]"
        return [(self.address(i), names[i], w) for i, w in enumerate(self.words)]


class TagCheckFailed(RuntimeError):
    pass


class _CoupledPort:
    """Accelerator port over the host's input words; tags never reach the kernel."""

    def __init__(self, inputs: Sequence[CoupledTaggedWord], shell_tags: tuple[int, int] | None):
        self.inputs = inputs
        self.shell_tags = shell_tags
        self.outputs: list[CoupledTaggedWord] = []

    def load(self, start, length):
        words = self.inputs[start : start + length]
        if self.shell_tags is not None:
            src_tag = self.shell_tags[0]
            for w in words:
                if w.tag != src_tag:
                    raise TagCheckFailed(f"input tag {w.tag:#x} differs from src_tag {src_tag:#x}")
        return [w.value for w in words]

    def store(self, start, words):
        tag = CLEAN if self.shell_tags is None else self.shell_tags[1]
        for i, v in enumerate(words):
            pos = start + i
            while len(self.outputs) <= pos:
                self.outputs.append(CoupledTaggedWord(0))
            self.outputs[pos] = CoupledTaggedWord(int(v), tag)


def mean_offload(inputs: Sequence[CoupledTaggedWord], rows: int, cols: int, shelled: bool) -> list[CoupledTaggedWord]:
    """MEAN accelerator over coupled-tag inputs, with or without the shell."""
    shell_tags = None
    if shelled:
        # the driver passes tags decided by the processor from the input tags
        src_tag = CLEAN
        for w in inputs:
            src_tag |= w.tag
        shell_tags = (src_tag, src_tag)
    port = _CoupledPort(inputs, shell_tags)
    Accelerator(KernelKind.MEAN, burst_words=cols).run(Workload(rows, cols), port)
    return port.outputs


def mean_software(inputs: Sequence[CoupledTaggedWord], rows: int, cols: int) -> list[CoupledTaggedWord]:
    return [tagged_mean(inputs[r * cols : (r + 1) * cols]) for r in range(rows)]


def attack_input(rows: int = 5, cols: int = 5, foo_addr: int = DEFAULT_FUNCTIONS["foo"]) -> list[int]:
    return [foo_addr] * (rows * cols)


def run_scenario(mode: "Mode | str", rows: int = 5, cols: int = 5, argv: Sequence[int] | None = None,
                 functions: dict[str, int] | None = None) -> ScenarioOutcome:
    """Load attacker input, compute row means into ``st_data``, call ``func``.

    With the default 5x5 request the fifth mean overwrites ``func`` with the
    address of ``foo``.
    """
    mode = Mode(mode)
    host = HostMachine(functions)
    if argv is None:
        argv = attack_input(rows, cols, host.functions["foo"])
    if len(argv) != rows * cols:
        raise ValueError(f"argv has {len(argv)} values for a {rows}x{cols} request")
    host.load_input(argv)
    inputs = host.input_words(rows * cols)
    if mode is Mode.SOFTWARE:
        outputs = mean_software(inputs, rows, cols)
    else:
        outputs = mean_offload(inputs, rows, cols, shelled=mode is Mode.HW_SHELL)
    host.write_outputs(outputs)
    kind, called = host.call_func()
    return ScenarioOutcome(kind, called, list(outputs), host.image())


def render_image(outcome: ScenarioOutcome, only: Sequence[str] = ("st_data", "func")) -> str:
    lines = ["address     symbol       value               tag"]
    for addr, name, w in outcome.image:
        if any(name.startswith(p) for p in only):
            lines.append(f"{addr:#010x}  {name:<11}  {w.value:#018x}  {w.tag:#03x}")
    return "\n".join(lines)
