"""Dual-pool training curriculum: static seed pool plus FIFO exploration pool.

The exploration pool holds execution-verified translations and is bounded
by (|languages| - 1) * rollout batch size.  Batches drain the exploration
pool first (entries are consumed, not copied) and top up from the seed
pool, which cycles in shuffled epochs.  Only rollouts whose source item
came straight from the seed pool may be enqueued, so every explored entry
is exactly one hop from a seed and keeps its ancestor's test suite.
"""

from __future__ import annotations

import json
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path

from .seeding import derive_seed
from .testspec import EntrypointSignature, SemanticType

ORIGIN_SEED = "seed"
ORIGIN_EXPLORED = "explored"


@dataclass(frozen=True)
class CodeUnit:
    source_text: str
    language: str
    entrypoint: EntrypointSignature

    def __post_init__(self) -> None:
        if not self.source_text.strip():
            raise ValueError("empty source text")


@dataclass(frozen=True)
class PoolEntry:
    code: CodeUnit
    suite_ref: str
    origin: str
    seed_ancestor: str | None = None
    inserted_step: int = 0

    def __post_init__(self) -> None:
        if self.origin not in (ORIGIN_SEED, ORIGIN_EXPLORED):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.origin == ORIGIN_EXPLORED and not self.seed_ancestor:
            raise ValueError("explored entries must record their seed ancestor")


def exploration_capacity(num_languages: int, rollout_batch_size: int) -> int:
    """Pool capacity rule: (|languages| - 1) * rollout batch size."""
    if num_languages < 2 or rollout_batch_size < 1:
        raise ValueError("need >= 2 languages and a positive batch size")
    return (num_languages - 1) * rollout_batch_size


class ExplorationPool:
    """Bounded FIFO of verified translations; oldest entries evict first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._queue: deque[PoolEntry] = deque()

    def __len__(self) -> int:
        return len(self._queue)

    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._queue)

    def append(self, entry: PoolEntry) -> None:
        if len(self._queue) >= self.capacity:
            self._queue.popleft()
        self._queue.append(entry)

    def take(self, count: int) -> list[PoolEntry]:
        """Dequeue up to `count` oldest entries (consumed, not copied)."""
        taken = []
        while self._queue and len(taken) < count:
            taken.append(self._queue.popleft())
        return taken


class SeedPool:
    """Ordered seed items cycled in shuffled epochs via a cursor."""

    def __init__(self, items: list[PoolEntry]):
        if not items:
            raise ValueError("seed pool cannot be empty")
        ids = [e.suite_ref for e in items]
        if len(set(ids)) != len(ids):
            raise ValueError("seed pool items must reference distinct suites")
        for entry in items:
            if entry.origin != ORIGIN_SEED:
                raise ValueError("seed pool accepts only seed-origin entries")
        self.items = list(items)
        self.cursor = 0
        self.epoch = 0
        self._order: list[int] | None = None

    def __len__(self) -> int:
        return len(self.items)

    def _ensure_order(self, rng_seed: int) -> None:
        if self._order is None:
            self._order = list(range(len(self.items)))
            random.Random(derive_seed(rng_seed, "seed-epoch", self.epoch)).shuffle(self._order)

    def take(self, count: int, rng_seed: int) -> list[PoolEntry]:
        """Next `count` items in cursor order, reshuffling at each wrap."""
        taken: list[PoolEntry] = []
        while len(taken) < count:
            self._ensure_order(rng_seed)
            assert self._order is not None
            taken.append(self.items[self._order[self.cursor]])
            self.cursor += 1
            if self.cursor >= len(self.items):
                self.cursor = 0
                self.epoch += 1
                self._order = None
        return taken


def sample_batch(
    seed: SeedPool, explore: ExplorationPool, batch_size: int, rng_seed: int
) -> list[PoolEntry]:
    """Draw a batch, exploration entries first, topped up from the seed pool."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batch = explore.take(batch_size)
    if len(batch) < batch_size:
        batch.extend(seed.take(batch_size - len(batch), rng_seed))
    return batch


def enqueue_verified(
    explore: ExplorationPool,
    batch_item: PoolEntry,
    passing_candidates: list[CodeUnit],
    target: str,
    step: int,
    rng_seed: int,
) -> PoolEntry | None:
    """Retain one verified rollout of a seed-origin item, or nothing.

    The provenance gate rejects items that did not come straight from the
    seed pool, which prevents multi-hop drift between code and test suite.
    """
    if batch_item.origin != ORIGIN_SEED:
        return None
    if not passing_candidates:
        return None
    if target == batch_item.code.language:
        raise ValueError("target language must differ from the item's language")
    rng = random.Random(derive_seed(rng_seed, "retain", step, batch_item.suite_ref, target))
    chosen = passing_candidates[rng.randrange(len(passing_candidates))]
    entry = PoolEntry(
        code=chosen,
        suite_ref=batch_item.suite_ref,
        origin=ORIGIN_EXPLORED,
        seed_ancestor=batch_item.suite_ref,
        inserted_step=step,
    )
    explore.append(entry)
    return entry


# ---------------------------------------------------------------------------
# Snapshots (checkpoint/resume) and inspection
# ---------------------------------------------------------------------------


def _entry_to_dict(entry: PoolEntry) -> dict:
    return {
        "suite_ref": entry.suite_ref,
        "origin": entry.origin,
        "seed_ancestor": entry.seed_ancestor,
        "inserted_step": entry.inserted_step,
        "language": entry.code.language,
        "source_text": entry.code.source_text,
        "entrypoint": {
            "function_name": entry.code.entrypoint.function_name,
            "param_types": [t.render() for t in entry.code.entrypoint.param_types],
            "return_type": entry.code.entrypoint.return_type.render(),
        },
    }


def _entry_from_dict(payload: dict) -> PoolEntry:
    ep = payload["entrypoint"]
    signature = EntrypointSignature(
        function_name=ep["function_name"],
        param_types=tuple(SemanticType.parse(t) for t in ep["param_types"]),
        return_type=SemanticType.parse(ep["return_type"]),
    )
    return PoolEntry(
        code=CodeUnit(
            source_text=payload["source_text"],
            language=payload["language"],
            entrypoint=signature,
        ),
        suite_ref=payload["suite_ref"],
        origin=payload["origin"],
        seed_ancestor=payload["seed_ancestor"],
        inserted_step=payload["inserted_step"],
    )


def export_pool(entries: list[PoolEntry] | tuple[PoolEntry, ...], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(_entry_to_dict(entry), ensure_ascii=False) + "\n")


def import_pool(path: str | Path) -> list[PoolEntry]:
    entries = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                entries.append(_entry_from_dict(json.loads(line)))
    return entries


@dataclass
class PoolStats:
    size: int
    language_histogram: dict[str, int] = field(default_factory=dict)
    age_histogram: dict[int, int] = field(default_factory=dict)


def inspect_entries(entries: tuple[PoolEntry, ...], current_step: int | None = None) -> PoolStats:
    """Size, per-language counts, and insertion-age distribution."""
    languages = Counter(e.code.language for e in entries)
    newest = current_step if current_step is not None else max(
        (e.inserted_step for e in entries), default=0
    )
    ages = Counter(newest - e.inserted_step for e in entries)
    return PoolStats(
        size=len(entries),
        language_histogram=dict(sorted(languages.items())),
        age_histogram=dict(sorted(ages.items())),
    )
