"""The training loop: sample, roll out, verify, expand pools, weight, emit.

Each step draws a batch (exploration entries first), generates G
candidates per missing-language direction for every item, verifies them
in the sandbox, updates the exploration pool, and only then computes
language-aware weights and group advantages.  Items whose translations
failed everywhere carry no learning signal and are skipped.  The step's
result is a TrainingBatch handed to a sink: evaluated locally against the
group objective, exported for an external trainer, or both.

No model parameters are touched here; that is the trainer bridge's job.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .languages import LanguageSet
from .policy import (
    Completion,
    DecodeParams,
    EMPTY_COMPLETION_SENTINEL,
    GenerationRequest,
    PolicyUnavailable,
    ProtocolError,
    ROLLOUT_DECODE,
    render_prompt,
)
from .pools import (
    CodeUnit,
    ExplorationPool,
    ORIGIN_SEED,
    PoolEntry,
    SeedPool,
    enqueue_verified,
    exploration_capacity,
    export_pool,
    import_pool,
    sample_batch,
)
from .rlmath import (
    CandidateRollout,
    GroupBuilder,
    ObjectiveConfig,
    TranslationGroup,
    grpo_objective,
)
from .sandbox import ExecutionLimits, Outcome, Sandbox, Verdict
from .testspec import DatasetRecord, TestSuite, validate_suite
from .transpiler import HarnessSource, emit_harness, render_signature


@dataclass(frozen=True)
class TrainConfig:
    num_steps: int = 1
    batch_size: int = 256
    group_size: int = 8
    clip_epsilon: float = 0.2
    kl_coefficient: float = 0.01
    learning_rate: float = 1e-6  # forwarded to the trainer bridge, unused here
    languages: LanguageSet = field(default_factory=LanguageSet)
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)
    rng_seed: int = 0
    parallelism: int = 4
    decode: DecodeParams = ROLLOUT_DECODE
    batch_mean: bool = False
    evaluate_objective: bool = True
    checkpoint_interval: int = 0

    def __post_init__(self) -> None:
        if self.num_steps < 1 or self.batch_size < 1:
            raise ValueError("num_steps and batch_size must be >= 1")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")

    def objective_config(self) -> ObjectiveConfig:
        return ObjectiveConfig(
            clip_epsilon=self.clip_epsilon,
            kl_coefficient=self.kl_coefficient,
            group_size=self.group_size,
            batch_mean=self.batch_mean,
        )


@dataclass
class StepMetrics:
    reward_rate: dict[str, float] = field(default_factory=dict)
    pool_sizes: dict[str, int] = field(default_factory=dict)
    skip_count: int = 0
    contributing_items: int = 0
    objective: float | None = None
    error_count: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class BatchItem:
    """One (source item, target language) group ready for the update."""

    suite_id: str
    source_lang: str
    target_lang: str
    prompt: str
    group: TranslationGroup

    @property
    def weight(self) -> float:
        assert self.group.weight is not None
        return self.group.weight


@dataclass
class TrainingBatch:
    step: int
    items: list[BatchItem]
    metrics: StepMetrics


@dataclass
class RunSummary:
    steps: int
    total_items: int
    total_skipped: int
    directions_seen: dict[str, int]
    reward_rate: dict[str, float]
    final_pool_sizes: dict[str, int]
    wall_time: float


# ---------------------------------------------------------------------------
# Batch export / import (line-delimited JSON; header record then items)
# ---------------------------------------------------------------------------


class IoError(Exception):
    """Batch file could not be written or read back."""


def _metrics_to_dict(metrics: StepMetrics) -> dict:
    return {
        "reward_rate": metrics.reward_rate,
        "pool_sizes": metrics.pool_sizes,
        "skip_count": metrics.skip_count,
        "contributing_items": metrics.contributing_items,
        "objective": metrics.objective,
        "error_count": metrics.error_count,
        "wall_time": metrics.wall_time,
    }


def _metrics_from_dict(payload: dict) -> StepMetrics:
    return StepMetrics(
        reward_rate=dict(payload.get("reward_rate", {})),
        pool_sizes=dict(payload.get("pool_sizes", {})),
        skip_count=payload.get("skip_count", 0),
        contributing_items=payload.get("contributing_items", 0),
        objective=payload.get("objective"),
        error_count=payload.get("error_count", 0),
        wall_time=payload.get("wall_time", 0.0),
    )


def item_to_record(step: int, item: BatchItem) -> dict:
    return {
        "step": step,
        "suite_id": item.suite_id,
        "source_lang": item.source_lang,
        "target_lang": item.target_lang,
        "weight": item.weight,
        "prompt": item.prompt,
        "candidates": [
            {
                "tokens": list(c.tokens),
                "rollout_logprobs": list(c.rollout_logprobs),
                "reward": c.reward,
                "advantage": a,
            }
            for c, a in zip(item.group.candidates, item.group.advantages)
        ],
    }


def item_from_record(record: dict) -> BatchItem:
    candidates = tuple(
        CandidateRollout(
            tokens=tuple(c["tokens"]),
            rollout_logprobs=tuple(c["rollout_logprobs"]),
            reward=c["reward"],
        )
        for c in record["candidates"]
    )
    own = sum(c.reward for c in candidates)
    group = TranslationGroup(
        source_ref=record["suite_id"],
        target=record["target_lang"],
        candidates=candidates,
        cumulative_reward=own,
        sibling_reward=0,
        weight=record["weight"],
        advantages=tuple(c["advantage"] for c in record["candidates"]),
    )
    return BatchItem(
        suite_id=record["suite_id"],
        source_lang=record["source_lang"],
        target_lang=record["target_lang"],
        prompt=record["prompt"],
        group=group,
    )


def export_batch(batch: TrainingBatch, path: str | Path) -> None:
    """Write one header record plus one record per item."""
    try:
        with Path(path).open("w", encoding="utf-8") as handle:
            header = {"step": batch.step, "metrics": _metrics_to_dict(batch.metrics)}
            handle.write(json.dumps(header, ensure_ascii=False) + "\n")
            for item in batch.items:
                handle.write(json.dumps(item_to_record(batch.step, item), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write batch to {path}: {exc}") from exc


def import_batch(path: str | Path) -> TrainingBatch:
    try:
        with Path(path).open("r", encoding="utf-8") as handle:
            lines = [line for line in handle if line.strip()]
    except OSError as exc:
        raise IoError(f"cannot read batch from {path}: {exc}") from exc
    if not lines:
        raise IoError(f"batch file {path} is empty")
    header = json.loads(lines[0])
    items = [item_from_record(json.loads(line)) for line in lines[1:]]
    return TrainingBatch(
        step=header["step"], items=items, metrics=_metrics_from_dict(header["metrics"])
    )


class ExportSink:
    """Writes each step's batch and a rolling metrics log to a directory."""

    def __init__(self, export_dir: str | Path):
        self.export_dir = Path(export_dir)
        self.export_dir.mkdir(parents=True, exist_ok=True)

    def emit(self, batch: TrainingBatch) -> None:
        export_batch(batch, self.export_dir / f"batch_{batch.step:06d}.jsonl")
        with (self.export_dir / "metrics.jsonl").open("a", encoding="utf-8") as handle:
            record = {"step": batch.step, **_metrics_to_dict(batch.metrics)}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def seed_pool_from_records(records: list[DatasetRecord], languages: LanguageSet) -> SeedPool:
    entries = [
        PoolEntry(
            code=CodeUnit(
                source_text=record.pivot_source,
                language=languages.pivot,
                entrypoint=record.suite.entrypoint,
            ),
            suite_ref=record.suite.suite_id,
            origin=ORIGIN_SEED,
        )
        for record in records
    ]
    return SeedPool(entries)


def _validated_suites(records: list[DatasetRecord]) -> dict[str, TestSuite]:
    suites = {}
    for record in records:
        report = validate_suite(record.suite)
        if not report.ok:
            raise ValueError(
                f"seed suite {record.suite.suite_id!r} is invalid: "
                + "; ".join(v.message for v in report.violations)
            )
        suites[record.suite.suite_id] = record.suite
    return suites


class _HarnessCache:
    def __init__(self, suites: dict[str, TestSuite]):
        self._suites = suites
        self._cache: dict[tuple[str, str], HarnessSource] = {}

    def get(self, suite_id: str, target: str) -> HarnessSource:
        key = (suite_id, target)
        if key not in self._cache:
            self._cache[key] = emit_harness(self._suites[suite_id], target)
        return self._cache[key]


def run_training(
    config: TrainConfig,
    seed_records: list[DatasetRecord],
    policy,
    verifier: Sandbox | None = None,
    sink=None,
    export_dir: str | Path | None = None,
    start_step: int = 1,
    exploration: ExplorationPool | None = None,
    seed_pool: SeedPool | None = None,
) -> RunSummary:
    """Run num_steps of the expansion loop; aborts if any toolchain is missing.

    Per-candidate policy or sandbox failures are degraded to reward 0 with
    an infrastructure-flagged verdict and counted in the step metrics.
    """
    if not seed_records:
        raise ValueError("seed dataset is empty")
    verifier = verifier if verifier is not None else Sandbox()
    for language in config.languages.members:
        verifier.check_available(language)

    suites = _validated_suites(seed_records)
    harnesses = _HarnessCache(suites)
    if seed_pool is None:
        seed_pool = seed_pool_from_records(seed_records, config.languages)
    explore = exploration if exploration is not None else ExplorationPool(
        exploration_capacity(len(config.languages.members), config.batch_size)
    )
    sinks = [sink] if sink is not None else []
    if export_dir is not None:
        sinks.append(ExportSink(export_dir))

    run_started = time.monotonic()
    total_items = 0
    total_skipped = 0
    directions_seen: dict[str, int] = {}
    direction_totals: dict[str, list[int]] = {}

    last_step = start_step - 1
    for step in range(start_step, start_step + config.num_steps):
        last_step = step
        step_started = time.monotonic()
        metrics = StepMetrics()
        batch = sample_batch(seed_pool, explore, config.batch_size, config.rng_seed)

        # Phase 1: roll out, verify, and expand the exploration pool for the
        # whole batch before any weight is computed.
        staged: list[tuple[PoolEntry, list[tuple[str, str, GroupBuilder]]]] = []
        direction_hits: dict[str, list[int]] = {}
        for item in batch:
            per_target: list[tuple[str, str, GroupBuilder]] = []
            suite = suites[item.suite_ref]
            for target in config.languages.targets_for(item.code.language):
                prompt = render_prompt(item.code, target, render_signature(suite.entrypoint, target))
                completions, gen_errors = _generate_candidates(policy, item.code, target, suite, config)
                metrics.error_count += gen_errors
                harness = harnesses.get(item.suite_ref, target)
                results = verifier.verify_group(
                    [c.source_text for c in completions],
                    target,
                    harness,
                    config.limits,
                    config.parallelism,
                )
                rollouts = []
                passing: list[CodeUnit] = []
                for completion, result in zip(completions, results):
                    if isinstance(result, Exception):
                        metrics.error_count += 1
                        verdict = Verdict(
                            outcome=Outcome.RUNTIME_ERROR,
                            diagnostics=f"[infrastructure] {result}",
                        )
                        reward = 0
                    else:
                        verdict, reward = result
                    rollouts.append(
                        CandidateRollout(
                            tokens=completion.tokens,
                            rollout_logprobs=completion.logprobs,
                            reward=reward,
                            verdict_ref=verdict,
                        )
                    )
                    if reward == 1 and completion.source_text.strip():
                        passing.append(
                            CodeUnit(
                                source_text=completion.source_text,
                                language=target,
                                entrypoint=suite.entrypoint,
                            )
                        )
                enqueue_verified(explore, item, passing, target, step, config.rng_seed)
                direction = f"{item.code.language}->{target}"
                direction_hits.setdefault(direction, []).extend(r.reward for r in rollouts)
                per_target.append(
                    (target, prompt, GroupBuilder(item.suite_ref, target, tuple(rollouts)))
                )
            staged.append((item, per_target))

        # Phase 2: weights, advantages, and batch assembly.
        items: list[BatchItem] = []
        for item, per_target in staged:
            reward_total = sum(builder.cumulative_reward for _, _, builder in per_target)
            if reward_total == 0:
                metrics.skip_count += 1
                continue
            metrics.contributing_items += 1
            for target, prompt, builder in per_target:
                group = builder.finish(reward_total - builder.cumulative_reward)
                items.append(
                    BatchItem(
                        suite_id=item.suite_ref,
                        source_lang=item.code.language,
                        target_lang=target,
                        prompt=prompt,
                        group=group,
                    )
                )

        for direction, rewards in sorted(direction_hits.items()):
            metrics.reward_rate[direction] = sum(rewards) / len(rewards)
            directions_seen[direction] = directions_seen.get(direction, 0) + len(rewards)
            totals = direction_totals.setdefault(direction, [0, 0])
            totals[0] += sum(rewards)
            totals[1] += len(rewards)
        metrics.pool_sizes = {"seed": len(seed_pool), "explore": len(explore)}

        if config.evaluate_objective and items:
            # Fresh-policy evaluation: current and reference coincide with the
            # rollout policy, so ratios are 1 and the KL term vanishes.
            logprobs = [[list(c.rollout_logprobs) for c in it.group.candidates] for it in items]
            metrics.objective = grpo_objective(
                [it.group for it in items], logprobs, logprobs, config.objective_config()
            )

        metrics.wall_time = time.monotonic() - step_started
        training_batch = TrainingBatch(step=step, items=items, metrics=metrics)
        for s in sinks:
            s.emit(training_batch)

        total_items += metrics.contributing_items
        total_skipped += metrics.skip_count

        if config.checkpoint_interval and step % config.checkpoint_interval == 0 and export_dir:
            save_checkpoint(Path(export_dir) / "checkpoint", step, seed_pool, explore)

    return RunSummary(
        steps=last_step - start_step + 1,
        total_items=total_items,
        total_skipped=total_skipped,
        directions_seen=dict(sorted(directions_seen.items())),
        reward_rate={
            d: passed / attempted for d, (passed, attempted) in sorted(direction_totals.items())
        },
        final_pool_sizes={"seed": len(seed_pool), "explore": len(explore)},
        wall_time=time.monotonic() - run_started,
    )


def _generate_candidates(policy, code: CodeUnit, target: str, suite, config: TrainConfig):
    """Call the policy, degrading transport failures to flagged placeholders."""
    request = GenerationRequest(
        source=code,
        target=target,
        target_signature=render_signature(suite.entrypoint, target),
        num_candidates=config.group_size,
        decode=config.decode,
    )
    try:
        completions = policy.generate(request)
        if len(completions) != config.group_size:
            raise ProtocolError(
                f"policy returned {len(completions)} candidates, wanted {config.group_size}"
            )
        return completions, 0
    except (PolicyUnavailable, ProtocolError) as exc:
        placeholder = Completion(
            text=f"[policy-error] {exc}",
            source_text=EMPTY_COMPLETION_SENTINEL,
            tokens=(0,),
            logprobs=(0.0,),
        )
        return [placeholder] * config.group_size, config.group_size


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(
    directory: str | Path, step: int, seed_pool: SeedPool, explore: ExplorationPool
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = {
        "step": step,
        "seed_cursor": seed_pool.cursor,
        "seed_epoch": seed_pool.epoch,
    }
    (directory / "state.json").write_text(json.dumps(state), encoding="utf-8")
    export_pool(explore.entries(), directory / "explore.jsonl")


def load_checkpoint(
    directory: str | Path, seed_pool: SeedPool, capacity: int
) -> tuple[int, SeedPool, ExplorationPool]:
    """Restore pool state; returns (next_step, seed_pool, exploration_pool)."""
    directory = Path(directory)
    state = json.loads((directory / "state.json").read_text(encoding="utf-8"))
    seed_pool.cursor = state["seed_cursor"]
    seed_pool.epoch = state["seed_epoch"]
    explore = ExplorationPool(capacity)
    for entry in import_pool(directory / "explore.jsonl"):
        explore.append(entry)
    return state["step"] + 1, seed_pool, explore
