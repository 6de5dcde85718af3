import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diftshell.memory import (
    LayoutError,
    LengthInconsistent,
    Memory,
    MemoryAccessError,
    TaggedLayout,
    deinterleave,
    interleave,
    logical_to_physical,
    tag_positions,
)
from oracles import brute_interleave, brute_physical, brute_tag_positions

T = 0xABCD


@st.composite
def layouts(draw, max_t=40):
    t = draw(st.integers(1, max_t))
    f = draw(st.integers(1, t))
    base = draw(st.integers(0, 50))
    return TaggedLayout(t, f, T, base)


words = st.lists(st.integers(0, 2**64 - 1), max_size=120)


def test_layout_validation():
    with pytest.raises(LayoutError):
        TaggedLayout(0, 1)
    with pytest.raises(LayoutError):
        TaggedLayout(4, 0)
    with pytest.raises(LayoutError):
        TaggedLayout(4, 5)
    assert TaggedLayout.worst_case(8).first_offset == 8


def test_interleave_every_word():
    assert interleave([10, 11], TaggedLayout(1, 1, T)).tolist() == [10, T, 11, T]


def test_interleave_empty():
    assert interleave([], TaggedLayout(3, 2, T)).tolist() == []


def test_interleave_partial_trailing_group():
    out = interleave([0, 1, 2, 3, 4], TaggedLayout(2, 2, T)).tolist()
    assert out == [0, 1, T, 2, 3, T, 4]
    assert out == brute_interleave([0, 1, 2, 3, 4], 2, 2, T)
    assert TaggedLayout(2, 2).tag_count(5) == 2


def test_deinterleave_examples():
    data, checks = deinterleave([10, T, 11, T], TaggedLayout(1, 1, T))
    assert data.tolist() == [10, 11]
    assert checks == [(1, T), (3, T)]

    image = brute_interleave([0, 1, 2, 3, 4], 2, 2, T)
    image[2] = 0x666
    data, checks = deinterleave(image, TaggedLayout(2, 2, T))
    assert data.tolist() == [0, 1, 2, 3, 4]
    assert (2, 0x666) in checks


def test_deinterleave_rejects_impossible_length():
    layout = TaggedLayout(3, 2, T)
    # two data words must be followed by a tag
    with pytest.raises(LengthInconsistent):
        deinterleave([1, 2], layout)
    possible = {layout.physical_length(n) for n in range(200)}
    for p in range(max(possible)):
        if p in possible:
            assert layout.physical_length(layout.data_length(p)) == p
        else:
            with pytest.raises(LengthInconsistent):
                layout.data_length(p)


def test_logical_to_physical_examples():
    assert logical_to_physical(0, TaggedLayout(7, 3, base_addr=40)) == 40
    assert logical_to_physical(1024, TaggedLayout(1024, 1024)) == 1025
    for k in range(20):
        assert logical_to_physical(k, TaggedLayout(1, 1)) == 2 * k


def test_tag_positions_examples():
    assert tag_positions(0, TaggedLayout(4, 4)) == []
    assert len(tag_positions(128 * 128, TaggedLayout(1024, 1024))) == 16
    assert tag_positions(3, TaggedLayout(1, 1, base_addr=100)) == [101, 103, 105]
    assert tag_positions(16384, TaggedLayout(1024, 1024)) == brute_tag_positions(16384, 1024, 1024)


@given(words, layouts())
def test_round_trip(data, layout):
    image = interleave(data, layout)
    assert image.tolist() == brute_interleave(data, layout.tag_offset, layout.first_offset, T)
    back, checks = deinterleave(image, layout)
    assert back.tolist() == data
    assert all(v == T for _, v in checks)
    assert [i for i, _ in checks] == tag_positions(len(data), layout)


@given(st.integers(0, 300), layouts())
def test_mapping_partitions_span(n, layout):
    phys = [logical_to_physical(k, layout) for k in range(n)]
    tags = tag_positions(n, layout)
    assert all(a < b for a, b in zip(phys, phys[1:]))
    assert sorted(phys + tags) == list(range(layout.base_addr, layout.base_addr + n + len(tags)))
    for k in range(0, n, max(1, n // 7)):
        assert phys[k] == brute_physical(k, layout.tag_offset, layout.first_offset, layout.base_addr)


def test_tag_count_exhaustive_small():
    for n in range(0, 60):
        for t in range(1, 20):
            for f in range(1, t + 1):
                assert TaggedLayout(t, f).tag_count(n) == len(brute_tag_positions(n, t, f))


@settings(max_examples=200)
@given(st.data())
def test_tag_count_randomized_large(data):
    n = data.draw(st.integers(1, 10**5))
    t = data.draw(st.integers(1, n))
    f = data.draw(st.integers(1, t))
    layout = TaggedLayout(t, f)
    expected = (n - f) // t + 1
    assert layout.tag_count(n) == expected == len(tag_positions(n, layout))


def test_memory_bounds():
    mem = Memory(8)
    mem.write(2, [1, 2, 3])
    assert mem.read(2, 3).tolist() == [1, 2, 3]
    assert mem[3] == 2
    with pytest.raises(MemoryAccessError):
        mem.read(6, 3)
    with pytest.raises(MemoryAccessError):
        mem.write(-1, [0])
    with pytest.raises(MemoryAccessError):
        mem[8] = 1
    with pytest.raises(ValueError):
        mem[0] = 2**64


def test_memory_copy_is_independent():
    mem = Memory.from_words(np.arange(4, dtype=np.uint64))
    other = mem.copy()
    other[0] = 9
    assert mem[0] == 0 and mem != other
