"""Command-line driver.

Exit codes: 0 on success, 1 on usage errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import (
    CostModel,
    find_zero_leakage_offset,
    leakage_measured,
    leakage_worst_case,
    space_overhead,
    transfer_cost,
)
from .attacker import DEFAULT_ATTACK_WORD, AttackError, Corruption
from .kernels import AcceleratorConfig, KernelError, KernelKind, Workload
from .memory import LayoutError, MemoryAccessError, TaggedLayout
from .scenario import Mode, render_image, run_scenario
from .shell import ShellConfig, ShellError, configure
from .sweep import (
    DEFAULT_BURST_BYTES,
    DEFAULT_TAG_OFFSETS,
    DESK_WORKLOADS,
    TABLE_I_WORKLOADS,
    EmitError,
    SweepError,
    SweepRow,
    SweepSpec,
    burst_words,
    emit,
    figure_tables,
    run_sweep,
)

USAGE_ERRORS = (KernelError, LayoutError, ShellError, AttackError, SweepError, MemoryAccessError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int(text: str) -> int:
    return int(text, 0)


def _int_list(text: str) -> list[int]:
    return [int(x, 0) for x in text.split(",") if x]


def _add_point_args(p, sweep=False):
    if sweep:
        p.add_argument("--kernel", default="GRAY,MEAN,MULTS", help="comma-separated kernels")
        p.add_argument("--rows", type=_int_list, help="comma-separated row counts (paired with --cols)")
        p.add_argument("--cols", type=_int_list)
        p.add_argument("--burst-bytes", type=_int_list, default=list(DEFAULT_BURST_BYTES))
        p.add_argument("--tag-offset", type=_int_list, default=list(DEFAULT_TAG_OFFSETS))
        p.add_argument("--large", action="store_true", help="add the 2048x2048 workload")
    else:
        p.add_argument("--kernel", default="GRAY", type=str.upper, choices=[k.value for k in KernelKind])
        p.add_argument("--rows", type=_int, default=128)
        p.add_argument("--cols", type=_int, default=128)
        p.add_argument("--burst-bytes", type=_int, default=128)
        p.add_argument("--tag-offset", type=_int, default=1024)


def _add_output_args(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", metavar="PATH", help="write results here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diftshell", description="DIFT shell simulator and design-space explorer")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("leakage", help="information leakage of one configuration")
    _add_point_args(p)
    p.add_argument("--first-offset", type=_int, help="first-tag offset (default: tag offset, the worst case)")
    p.add_argument("--randomize-offset", action="store_true")
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--attack-start", type=_int, default=0, help="physical word index of the corruption")
    p.add_argument("--attack-len", type=_int, help="words to overwrite (default: the whole input image)")
    p.add_argument("--attack-word", type=_int, default=DEFAULT_ATTACK_WORD)
    _add_output_args(p)

    p = sub.add_parser("space", help="tag count and space overhead")
    _add_point_args(p)
    p.add_argument("--first-offset", type=_int)
    _add_output_args(p)

    p = sub.add_parser("cost", help="abstract transfer cost with and without the shell")
    _add_point_args(p)
    p.add_argument("--setup", type=float, default=CostModel.per_burst_setup, help="cost per burst")
    p.add_argument("--per-word", type=float, default=CostModel.per_word, help="cost per transferred word")
    _add_output_args(p)

    p = sub.add_parser("sweep", help="full design-space sweep")
    _add_point_args(p, sweep=True)
    p.add_argument("--metric", default="leakage", help="comma-separated: leakage,space,cost")
    p.add_argument("--seed", type=_int, default=0)
    p.add_argument("--randomize-offset", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--figures", metavar="DIR", help="also write per-figure CSV files into DIR")
    _add_output_args(p)

    p = sub.add_parser("find-zero-offset", help="largest tag offset with zero worst-case leakage")
    _add_point_args(p)
    _add_output_args(p)

    p = sub.add_parser("scenario", help="buffer-overflow case study on the coupled-tag host")
    p.add_argument("--mode", required=True, choices=[m.value for m in Mode])
    p.add_argument("--rows", type=_int, default=5)
    p.add_argument("--cols", type=_int, default=5)
    return parser


def _point(args):
    kind = KernelKind.parse(args.kernel)
    return kind, Workload(args.rows, args.cols), burst_words(args.burst_bytes)


def _row(args, metric, value, status="ok") -> SweepRow:
    return SweepRow(args.kernel, args.rows, args.cols, args.burst_bytes, args.tag_offset, metric,
                    round(float(value), 6), status)


def _write(rows, args):
    text = emit(rows, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def cmd_leakage(args):
    kind, w, bw = _point(args)
    t = args.tag_offset
    plain_worst = (args.first_offset in (None, t) and not args.randomize_offset
                   and args.attack_start == 0 and args.attack_len is None
                   and args.attack_word == DEFAULT_ATTACK_WORD)
    if plain_worst:
        res = leakage_worst_case(kind, w, bw, t)
    else:
        draft = ShellConfig.for_accelerator(AcceleratorConfig(0, 0, w.rows, w.cols), t, args.first_offset)
        f = configure(draft, args.seed, args.randomize_offset).first_tag_offset
        image_len = TaggedLayout(t, f).physical_length(w.words)
        if not 0 <= args.attack_start < image_len:
            raise UsageError(f"--attack-start {args.attack_start} is outside the {image_len}-word input image")
        length = args.attack_len if args.attack_len is not None else image_len - args.attack_start
        corruption = Corruption.constant(args.attack_start, length, args.attack_word) if length > 0 else None
        res = leakage_measured(kind, w, bw, t, f, corruption, seed=args.seed).result
    _write([_row(args, "leakage", res.percent, res.status.value)], args)


def cmd_space(args):
    kind = KernelKind.parse(args.kernel)
    so = space_overhead(kind, Workload(args.rows, args.cols), args.tag_offset, args.first_offset, None)
    _write([
        _row(args, "input_tags", so.input_tags),
        _row(args, "output_tags", so.output_tags),
        _row(args, "space", so.overhead_ratio),
    ], args)


def cmd_cost(args):
    kind, w, bw = _point(args)
    model = CostModel(args.setup, args.per_word)
    bare = transfer_cost(kind, w, bw, args.tag_offset, model, shelled=False)
    shelled = transfer_cost(kind, w, bw, args.tag_offset, model, shelled=True)
    _write([_row(args, "cost", shelled), _row(args, "cost_baseline", bare)], args)


def _workloads(args):
    if args.rows is None and args.cols is None:
        base = DESK_WORKLOADS
    else:
        rows = args.rows or args.cols
        cols = args.cols or args.rows
        if len(rows) != len(cols):
            raise UsageError("--rows and --cols must list the same number of values")
        base = tuple(Workload(r, c) for r, c in zip(rows, cols))
    return base + (TABLE_I_WORKLOADS[2:] if args.large else ())


def cmd_sweep(args):
    spec = SweepSpec(
        kernels=tuple(KernelKind.parse(k) for k in args.kernel.split(",") if k),
        workloads=_workloads(args),
        burst_bytes=tuple(args.burst_bytes),
        tag_offsets=tuple(args.tag_offset),
        seed=args.seed,
        metrics=tuple(m for m in args.metric.split(",") if m),
        randomize_offset=args.randomize_offset,
    )
    _write(run_sweep(spec, workers=args.workers), args)
    if args.figures:
        out = Path(args.figures)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise EmitError(f"cannot create {out}: {exc.strerror or exc}") from exc
        for name, rows in figure_tables(spec).items():
            emit(rows, args.format, out / f"{name}.{args.format}")


def cmd_find_zero_offset(args):
    kind, w, bw = _point(args)
    t_star = find_zero_leakage_offset(kind, w, bw)
    args.tag_offset = t_star
    _write([_row(args, "zero_leakage_offset", t_star)], args)


def cmd_scenario(args):
    outcome = run_scenario(args.mode, args.rows, args.cols)
    print(f"mode: {args.mode}")
    print(f"outcome: {outcome}")
    print(render_image(outcome))


COMMANDS = {
    "leakage": cmd_leakage,
    "space": cmd_space,
    "cost": cmd_cost,
    "sweep": cmd_sweep,
    "find-zero-offset": cmd_find_zero_offset,
    "scenario": cmd_scenario,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (EmitError, OSError) as exc:
        print(f"diftshell: {exc}", file=sys.stderr)
        return 2
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"diftshell: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
