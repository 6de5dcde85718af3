"""Design-space sweeps over kernel x workload x burst size x tag offset."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import (
    CostModel,
    leakage_worst_case,
    replay,
    space_overhead,
    transfer_cost,
)
from .kernels import TABLE_I_WORKLOADS, KernelKind, Workload, input_extent, output_extent, trace
from .memory import TaggedLayout
from .shell import draw_first_offset

WORD_BYTES = 8
HEADER = ("kernel", "rows", "cols", "burst_bytes", "tag_offset", "metric", "value", "status")
METRICS = ("leakage", "space", "cost")

DEFAULT_BURST_BYTES = tuple(2**k for k in range(6, 14))
# powers of four from 1 to 2**20; contains 1, 64 and 4096 and exceeds every default input extent
DEFAULT_TAG_OFFSETS = tuple(4**k for k in range(11))
DESK_WORKLOADS = (Workload(16, 16), Workload(64, 64), Workload(128, 128), Workload(512, 512))
FIG9_TAG_OFFSETS = (1, 64, 4096)


class SweepError(ValueError):
    pass


class EmitError(OSError):
    pass


def burst_words(burst_bytes: int) -> int:
    if burst_bytes < WORD_BYTES or burst_bytes % WORD_BYTES:
        raise SweepError(f"burst of {burst_bytes} bytes is not a whole number of 8-byte words")
    return burst_bytes // WORD_BYTES


@dataclass(frozen=True)
class SweepSpec:
    kernels: tuple[KernelKind, ...] = tuple(KernelKind)
    workloads: tuple[Workload, ...] = DESK_WORKLOADS
    burst_bytes: tuple[int, ...] = DEFAULT_BURST_BYTES
    tag_offsets: tuple[int, ...] = DEFAULT_TAG_OFFSETS
    seed: int = 0
    metrics: tuple[str, ...] = ("leakage",)
    randomize_offset: bool = False
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        for b in self.burst_bytes:
            burst_words(b)
        for t in self.tag_offsets:
            if t < 1:
                raise SweepError(f"tag offset must be >= 1, got {t}")
        for m in self.metrics:
            if m not in METRICS:
                raise SweepError(f"unknown metric {m!r}; expected one of {', '.join(METRICS)}")
        object.__setattr__(self, "kernels", tuple(KernelKind.parse(k) for k in self.kernels))

    @classmethod
    def default(cls, large: bool = False, **kw) -> "SweepSpec":
        workloads = DESK_WORKLOADS + (TABLE_I_WORKLOADS[2:] if large else ())
        return cls(workloads=workloads, **kw)

    def points(self) -> list[tuple]:
        return [
            (k.value, w.rows, w.cols, b, t, m)
            for m in self.metrics
            for k in self.kernels
            for w in self.workloads
            for b in self.burst_bytes
            for t in self.tag_offsets
        ]


@dataclass(frozen=True)
class SweepRow:
    kernel: str
    rows: int
    cols: int
    burst_bytes: int
    tag_offset: int
    metric: str
    value: float
    status: str

    def sort_key(self):
        return (self.kernel, self.rows, self.cols, self.burst_bytes, self.tag_offset, self.metric)


def _point_seed(seed: int, point: tuple) -> int:
    kernel, rows, cols, b, t, _metric = point
    ss = np.random.SeedSequence([seed, list(KernelKind).index(KernelKind(kernel)), rows, cols, b, t])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def evaluate_point(point: tuple, seed: int = 0, randomize_offset: bool = False,
                   cost_model: CostModel = CostModel()) -> SweepRow:
    kernel, rows, cols, b, t, metric = point
    try:
        kind = KernelKind(kernel)
        w = Workload(rows, cols)
        bw = burst_words(b)
        if metric == "leakage":
            if randomize_offset:
                f = draw_first_offset(t, np.random.Generator(np.random.PCG64(_point_seed(seed, point))))
                layout = TaggedLayout(t, f)
                n_in = input_extent(kind, w)
                res = replay(trace(kind, w, bw), layout, 0, layout.physical_length(n_in), output_extent(kind, w))
            else:
                res = leakage_worst_case(kind, w, bw, t)
            value, status = res.percent, res.status.value
        elif metric == "space":
            value, status = space_overhead(kind, w, t).overhead_ratio, "ok"
        else:
            value, status = transfer_cost(kind, w, bw, t, cost_model, shelled=True), "ok"
    except Exception as exc:  # recorded per point; a sweep never aborts
        value, status = 0.0, f"error: {exc}"
    if not math.isfinite(value):
        value, status = 0.0, "error: non-finite value"
    return SweepRow(kernel, rows, cols, b, t, metric, round(float(value), 6), status)


def _evaluate_chunk(args):
    points, seed, randomize, model = args
    return [evaluate_point(p, seed, randomize, model) for p in points]


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Evaluate every grid point; output order is independent of ``workers``."""
    points = spec.points()
    if workers <= 1:
        rows = [evaluate_point(p, spec.seed, spec.randomize_offset, spec.cost_model) for p in points]
    else:
        chunks = [points[i::workers * 4] for i in range(workers * 4)]
        args = [(c, spec.seed, spec.randomize_offset, spec.cost_model) for c in chunks if c]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for chunk in pool.map(_evaluate_chunk, args) for r in chunk]
    return sorted(rows, key=SweepRow.sort_key)


# -- serialization -------------------------------------------------------------

def format_number(value) -> str:
    if isinstance(value, int):
        return str(value)
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([r.kernel, r.rows, r.cols, r.burst_bytes, r.tag_offset, r.metric,
                         format_number(r.value), r.status])
    return buf.getvalue()


def to_json(rows: Iterable[SweepRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1) + "\n"


def _row_from_fields(d: dict) -> SweepRow:
    return SweepRow(str(d["kernel"]), int(d["rows"]), int(d["cols"]), int(d["burst_bytes"]),
                    int(d["tag_offset"]), str(d["metric"]), float(d["value"]), str(d["status"]))


def parse_csv(text: str) -> list[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != HEADER:
        raise SweepError(f"unexpected CSV header {reader.fieldnames}")
    return [_row_from_fields(d) for d in reader]


def parse_json(text: str) -> list[SweepRow]:
    return [_row_from_fields(d) for d in json.loads(text)]


def emit(rows: Sequence[SweepRow], fmt: str = "csv", path: str | Path | None = None) -> str:
    """Serialize ``rows``; also write them to ``path`` when given."""
    if fmt == "csv":
        text = to_csv(rows)
    elif fmt == "json":
        text = to_json(rows)
    else:
        raise SweepError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise EmitError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


# -- per-figure tables -----------------------------------------------------------

def figure_tables(spec: SweepSpec) -> dict[str, list[SweepRow]]:
    """Rows grouped like the published panels (one panel per kernel and workload).

    ``leakage_vs_burst``: leakage over every burst and tag offset.
    ``leakage_vs_tags``: leakage at the smallest and largest burst plus the
    total tag count (metric ``tags``) for the x-axis.
    ``cost_vs_burst``: shelled cost for offsets 1, 64, 4096 and the bare
    accelerator as metric ``cost_baseline`` with tag_offset 0.
    """
    leak = run_sweep(SweepSpec(spec.kernels, spec.workloads, spec.burst_bytes, spec.tag_offsets, spec.seed,
                               ("leakage",), spec.randomize_offset))
    extremes = {min(spec.burst_bytes), max(spec.burst_bytes)}
    tags = [
        SweepRow(k.value, w.rows, w.cols, b, t, "tags", float(space_overhead(k, w, t).total_tags), "ok")
        for k in spec.kernels for w in spec.workloads for b in sorted(extremes) for t in spec.tag_offsets
    ]
    cost_spec = SweepSpec(spec.kernels, spec.workloads, spec.burst_bytes, FIG9_TAG_OFFSETS, spec.seed,
                          ("cost",), cost_model=spec.cost_model)
    baseline = [
        SweepRow(k.value, w.rows, w.cols, b, 0, "cost_baseline",
                 round(transfer_cost(k, w, burst_words(b), 1, spec.cost_model, shelled=False), 6), "ok")
        for k in spec.kernels for w in spec.workloads for b in spec.burst_bytes
    ]
    return {
        "leakage_vs_burst": leak,
        "leakage_vs_tags": sorted([r for r in leak if r.burst_bytes in extremes] + tags, key=SweepRow.sort_key),
        "cost_vs_burst": sorted(run_sweep(cost_spec) + baseline, key=SweepRow.sort_key),
    }
