import itertools

import numpy as np
import pytest

from diftshell.attacker import Corruption, apply
from diftshell.kernels import (
    Accelerator,
    AcceleratorConfig,
    KernelKind,
    Load,
    RawPort,
    Store,
    Workload,
    compute_reference,
    random_input,
)
from diftshell.memory import Memory, TaggedLayout, interleave, tag_positions
from diftshell.shell import (
    DEFAULT_DST_TAG,
    DEFAULT_SRC_TAG,
    InvalidOffset,
    Mismatch,
    PhysicalSpan,
    RegisterTagMismatch,
    RunStatus,
    ShellConfig,
    ShellPort,
    TaggedSystem,
    check_tags,
    configure,
    rewrite_load,
    rewrite_store,
)

SRC = 0x51
DST = 0xD5


def base_config(t=4, f=None):
    return ShellConfig.for_accelerator(AcceleratorConfig(0, 100, 4, 4), t, f, SRC, DST)


def test_register_file_size():
    cfg = base_config()
    assert cfg.n_acc_registers == 4
    assert cfg.driver_visible_registers == 2 * 4 + 2
    assert cfg.register_count == 2 * 4 + 3
    assert cfg.application_view() == (0, 100, 4, 4)


def test_register_guard():
    cfg = base_config()
    bad = ShellConfig(cfg.acc_registers, (SRC, SRC, 0x99, SRC), SRC, DST, 4, 4)
    with pytest.raises(RegisterTagMismatch):
        configure(bad)


def test_configure_keeps_or_rejects_offset():
    assert configure(base_config(8, 8)).first_tag_offset == 8
    with pytest.raises(InvalidOffset):
        configure(base_config(8, 9))
    with pytest.raises(InvalidOffset):
        configure(ShellConfig((0,) * 4, (SRC,) * 4, SRC, DST, 0, 1))


def test_configure_randomized():
    assert configure(base_config(1, 1), seed=123, randomize=True).first_tag_offset == 1
    draws = {configure(base_config(1024), seed=7, randomize=True).first_tag_offset for _ in range(5)}
    assert len(draws) == 1
    offsets = [configure(base_config(1024), seed=s, randomize=True).first_tag_offset for s in range(200)]
    assert all(1 <= f <= 1024 for f in offsets)
    assert len(set(offsets)) > 100


def test_rewrite_load_examples():
    span = rewrite_load(Load(0, 2), TaggedLayout(1, 1))
    assert (span.start, span.stop, len(span.tags)) == (0, 4, 2)
    span = rewrite_load(Load(0, 16), TaggedLayout(64, 40))
    assert (span.start, span.stop, span.tags) == (0, 16, ())
    layout = TaggedLayout(1024, 1024)
    span = rewrite_load(Load(1008, 16), layout)
    assert tag_positions(16384, layout)[0] in span.tags
    assert span == PhysicalSpan(1008, 1025, (1024,))


def test_rewrite_load_spans_partition_image():
    layout = TaggedLayout(5, 3, base_addr=10)
    n = 37
    spans = [rewrite_load(Load(s, min(4, n - s)), layout) for s in range(0, n, 4)]
    assert spans[0].start == 10
    assert all(a.stop == b.start for a, b in zip(spans, spans[1:]))
    assert spans[-1].stop == 10 + layout.physical_length(n)
    assert [p for s in spans for p in s.tags] == tag_positions(n, layout)


def test_check_tags():
    span = PhysicalSpan(0, 4, (1, 3))
    assert check_tags(span, [7, SRC, 8, SRC], SRC) is None
    assert check_tags(span, [7, 0xBAD, 8, SRC], SRC) == Mismatch(1, 0xBAD)


def test_check_tags_reports_lowest_index():
    layout = TaggedLayout(2, 1)
    data = list(range(10))
    image = interleave(data, TaggedLayout(2, 1, SRC)).tolist()
    tags = tag_positions(10, layout)
    span = rewrite_load(Load(0, 10), layout)
    for a, b in itertools.permutations(tags, 2):
        img = list(image)
        img[a], img[b] = 0xE1, 0xE2
        assert check_tags(span, img, SRC).index == min(a, b)


def test_rewrite_store_examples():
    layout = TaggedLayout(1, 1, DST)
    addr, words = rewrite_store(Store(0, 2), [10, 11], layout)
    assert addr == 0 and words.tolist() == [10, DST, 11, DST]

    # tag offset beyond the output extent: no tags at all
    addr, words = rewrite_store(Store(0, 3), [1, 2, 3], TaggedLayout.worst_case(8, DST))
    assert words.tolist() == [1, 2, 3]


def test_rewrite_store_idempotent():
    layout = TaggedLayout(3, 3, DST, base_addr=2)
    mem = Memory(20)
    for _ in range(2):
        addr, words = rewrite_store(Store(1, 5), [9, 8, 7, 6, 5], layout)
        mem.write(addr, words)
        snap = mem.copy()
    assert mem == snap


@pytest.mark.parametrize("kind", list(KernelKind))
@pytest.mark.parametrize("t,f", [(1, 1), (3, 2), (7, 7), (64, 10), (4096, 4096)])
def test_uncorrupted_run_completes(kind, t, f):
    w = Workload(6, 5)
    m = random_input(kind, w, np.random.default_rng(t))
    system = TaggedSystem.build(kind, w, m, t, f)
    outcome = system.run(4)
    assert outcome.status is RunStatus.COMPLETED
    data, checks = system.output_data()
    assert data == compute_reference(kind, m)
    assert all(v == DEFAULT_DST_TAG for _, v in checks)
    assert outcome.outputs_stored == outcome.total_outputs


def test_no_tags_full_corruption_leaks_everything():
    w = Workload(4, 4)
    m = random_input("GRAY", w, np.random.default_rng(0))
    system = TaggedSystem.build("GRAY", w, m, 100)
    apply(system.memory, Corruption.constant(0, 16), DEFAULT_SRC_TAG)
    outcome = system.run(4)
    assert outcome.status is RunStatus.COMPLETED
    assert outcome.outputs_stored == 16
    assert system.output_data()[0] != compute_reference("GRAY", m)


def test_example_gray_halt():
    w = Workload(128, 128)
    m = random_input("GRAY", w, np.random.default_rng(3))
    system = TaggedSystem.build("GRAY", w, m, 1024, 1024)
    apply(system.memory, Corruption.constant(0, system.memory.size - 16384), DEFAULT_SRC_TAG)
    outcome = system.run(16)
    assert outcome.halted
    assert outcome.outputs_stored == 1008
    assert outcome.mismatch.index == 1024
    # nothing after the fatal load: 63 load/store pairs and the fatal load
    assert len(outcome.events) == 127 and outcome.events[-1] == Load(1008, 16)


def test_black_box_inputs_match_bare():
    """The wrapped kernel sees exactly the words a bare kernel would."""
    w = Workload(5, 7)
    m = random_input("MEAN", w, np.random.default_rng(5))
    seen = {}

    class Spy:
        def __init__(self, inner, key):
            self.inner, self.key = inner, key
            seen[key] = []

        def load(self, s, n):
            words = self.inner.load(s, n)
            seen[self.key].append(list(words))
            return words

        def store(self, s, words):
            self.inner.store(s, words)

    bare_mem = Memory(35 + 5)
    bare_mem.write(0, m.ravel())
    Accelerator("MEAN", 3).run(w, Spy(RawPort(bare_mem, 0, 35), "bare"))

    system = TaggedSystem.build("MEAN", w, m, 2, 1)
    cfg = system.shell
    port = ShellPort(system.memory, cfg.input_layout(), cfg.output_layout(), cfg.src_tag)
    Accelerator("MEAN", 3).run(w, Spy(port, "shell"))
    assert seen["bare"] == seen["shell"]
    assert all(isinstance(v, int) for burst in seen["shell"] for v in burst)


def test_layout_of_system():
    system = TaggedSystem.build("GRAY", Workload(2, 2), np.zeros((2, 2)), 1)
    assert system.shell.accelerator.output_base == 8
    assert system.memory.size == 16
    assert system.memory.read(0, 8).tolist()[1::2] == [DEFAULT_SRC_TAG] * 4
