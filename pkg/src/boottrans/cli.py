"""Command-line entry point: dataset building, transpilation, training,
evaluation, reporting, and pool inspection behind one binary."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .config import load_run_config
from .evaluator import evaluate_ca1, format_direction_table, leakage_filter, write_results
from .orchestrator import run_training
from .pools import import_pool, inspect_entries
from .report import MissingMetrics, generate_report
from .sandbox import Sandbox
from .testspec import (
    DatasetRecord,
    EmptySuite,
    EntrypointSignature,
    ParseError,
    SemanticType,
    load_dataset,
    parse_scaffold,
    subsample_suite,
    validate_suite,
    write_dataset,
)
from .transpiler import UnmappableType, emit_harness

_ENTRYPOINT_DIRECTIVE = re.compile(
    r"^#\s*entrypoint:\s*(\w+)\s*\(([^)]*)\)\s*->\s*(.+?)\s*$", re.MULTILINE
)


def _parse_signature(scaffold_text: str) -> EntrypointSignature:
    match = _ENTRYPOINT_DIRECTIVE.search(scaffold_text)
    if match is None:
        raise ParseError("scaffold lacks an '# entrypoint: name(types) -> type' directive")
    name, params, ret = match.groups()
    param_types = tuple(
        SemanticType.parse(p) for p in params.split(",") if p.strip()
    ) if params.strip() else ()
    return EntrypointSignature(
        function_name=name, param_types=param_types, return_type=SemanticType.parse(ret)
    )


def _apply_fraction(records: list[DatasetRecord], fraction: float, seed: int) -> list[DatasetRecord]:
    if fraction >= 1.0:
        return records
    return [
        DatasetRecord(
            suite=subsample_suite(r.suite, fraction, seed),
            pivot_source=r.pivot_source,
            references=r.references,
        )
        for r in records
    ]


def cmd_build_seed(args: argparse.Namespace) -> int:
    scaffold_dir = Path(args.scaffolds)
    config = load_run_config(args.config)
    languages = config.train.languages
    benchmark_names: set[str] = set()
    if args.benchmark_names:
        benchmark_names = {
            line.strip()
            for line in Path(args.benchmark_names).read_text(encoding="utf-8").splitlines()
            if line.strip()
        }

    parsed = 0
    rejected = 0
    records: list[DatasetRecord] = []
    for tests_path in sorted(scaffold_dir.glob("*.tests.py")):
        stem = tests_path.name[: -len(".tests.py")]
        solution_path = scaffold_dir / f"{stem}.solution.py"
        if not solution_path.exists():
            print(f"[skip] {stem}: no matching solution file", file=sys.stderr)
            rejected += 1
            continue
        scaffold_text = tests_path.read_text(encoding="utf-8")
        try:
            signature = _parse_signature(scaffold_text)
            outcome = parse_scaffold(scaffold_text, signature, suite_id=stem)
        except (ParseError, EmptySuite, ValueError) as exc:
            print(f"[reject] {stem}: {exc}", file=sys.stderr)
            rejected += 1
            continue
        for rej in outcome.rejections:
            print(f"[reject] {stem} line {rej.line}: {rej.reason}", file=sys.stderr)
        suite = outcome.suite
        report = validate_suite(suite)
        if not report.ok:
            print(f"[reject] {stem}: {report.violations[0].message}", file=sys.stderr)
            rejected += 1
            continue
        try:
            for target in languages.members:
                emit_harness(suite, target)
        except UnmappableType as exc:
            print(f"[reject] {stem}: not transpilable: {exc}", file=sys.stderr)
            rejected += 1
            continue
        parsed += 1
        records.append(
            DatasetRecord(suite=suite, pivot_source=solution_path.read_text(encoding="utf-8"))
        )

    records, removed = leakage_filter(records, benchmark_names)
    for removal in removed:
        print(f"[leak] {removal.suite_id}: entrypoint {removal.function_name}", file=sys.stderr)
    print(f"parsed={parsed} rejected={rejected} leak_filtered={len(removed)} kept={len(records)}")
    if not records:
        print("no records survived; refusing to write an empty dataset", file=sys.stderr)
        return 1
    write_dataset(records, args.out)
    return 0


def cmd_transpile(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    records = load_dataset(args.dataset)
    records = _apply_fraction(records, args.fraction, args.seed)
    targets = args.target or list(config.train.languages.members)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for record in records:
        for target in targets:
            harness = emit_harness(record.suite, target)
            path = out_dir / f"{record.suite.suite_id}.{target}.harness"
            path.write_text(harness.source_text, encoding="utf-8")
            written += 1
    print(f"wrote {written} harness files to {out_dir}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    overrides: dict = {"train": {}, "policy": {}}
    if args.steps is not None:
        overrides["train"]["num_steps"] = args.steps
    if args.seed is not None:
        overrides["train"]["rng_seed"] = args.seed
    if args.policy is not None:
        overrides["policy"]["kind"] = args.policy
    config = load_run_config(args.config, overrides)
    dataset_path = args.dataset or config.dataset_path
    if not dataset_path:
        print("no dataset configured (paths.dataset or --dataset)", file=sys.stderr)
        return 1
    records = load_dataset(dataset_path)
    records = _apply_fraction(records, args.fraction, config.train.rng_seed)
    export_dir = args.export_dir or config.export_dir or None
    policy = config.build_policy()
    summary = run_training(
        config.train, records, policy, export_dir=export_dir
    )
    print(
        f"steps={summary.steps} items={summary.total_items} skipped={summary.total_skipped} "
        f"pools={summary.final_pool_sizes}"
    )
    for direction, rate in summary.reward_rate.items():
        print(f"  {direction}: reward_rate={rate:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    records = load_dataset(args.benchmark)
    records = _apply_fraction(records, args.fraction, args.seed)
    languages = config.train.languages
    if args.directions == "all":
        directions = list(languages.directions())
    else:
        directions = []
        for part in args.directions.split(","):
            src, _, tgt = part.strip().partition("->")
            if not tgt:
                print(f"bad direction {part!r}; use src->tgt", file=sys.stderr)
                return 1
            directions.append((src.strip(), tgt.strip()))
    policy = config.build_policy()
    results = evaluate_ca1(
        policy, records, directions, limits=config.train.limits, verifier=Sandbox()
    )
    print(format_direction_table(results))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results(results, out / "directions.jsonl")
        (out / "table.txt").write_text(format_direction_table(results) + "\n", encoding="utf-8")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        summary = generate_report(args.run_dir, args.out_dir)
    except MissingMetrics as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2))
    return 0


def cmd_pools(args: argparse.Namespace) -> int:
    entries = tuple(import_pool(args.snapshot))
    stats = inspect_entries(entries)
    print(f"size={stats.size}")
    print(f"languages={json.dumps(stats.language_histogram)}")
    print(f"age_distribution={json.dumps({str(k): v for k, v in stats.age_histogram.items()})}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boottrans",
        description="Execution-verified RL orchestrator for multilingual code translation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-seed", help="parse scaffolds into a seed dataset")
    p.add_argument("scaffolds", help="directory of <stem>.tests.py / <stem>.solution.py pairs")
    p.add_argument("--benchmark-names", help="file of entrypoint names to leak-filter")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--out", required=True, help="output dataset path")
    p.set_defaults(func=cmd_build_seed)

    p = sub.add_parser("transpile", help="emit test harnesses for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--target", action="append", help="target language (repeatable)")
    p.add_argument("--fraction", type=float, default=1.0, help="test-suite subsample fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("train", help="run the expansion training loop")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--export-dir", default=None)
    p.add_argument("--policy", choices=["scripted", "http"], default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fraction", type=float, default=1.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compute CA@1 over the direction matrix")
    p.add_argument("--config", default=None)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--directions", default="all")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render plots and summary from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pools", help="inspect a pool snapshot")
    pools_sub = p.add_subparsers(dest="pools_command", required=True)
    pi = pools_sub.add_parser("inspect")
    pi.add_argument("snapshot")
    pi.set_defaults(func=cmd_pools)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
