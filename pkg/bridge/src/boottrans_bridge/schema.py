"""Batch file parsing: the export schema, field for field.

A batch file is line-delimited JSON: one header record {step, metrics}
followed by one record per item with fields {step, suite_id, source_lang,
target_lang, weight, prompt, candidates:[{tokens, rollout_logprobs,
reward, advantage}]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(Exception):
    """The batch file does not match the export schema."""


@dataclass(frozen=True)
class BridgeCandidate:
    tokens: tuple[int, ...]
    rollout_logprobs: tuple[float, ...]
    reward: int
    advantage: float


@dataclass(frozen=True)
class BridgeItem:
    step: int
    suite_id: str
    source_lang: str
    target_lang: str
    weight: float
    prompt: str
    candidates: tuple[BridgeCandidate, ...]


@dataclass
class BridgeBatch:
    step: int
    metrics: dict
    items: list[BridgeItem] = field(default_factory=list)

    @property
    def group_size(self) -> int:
        if not self.items:
            raise SchemaError("empty batch has no group size")
        return len(self.items[0].candidates)


_ITEM_FIELDS = {"step", "suite_id", "source_lang", "target_lang", "weight", "prompt", "candidates"}
_CANDIDATE_FIELDS = {"tokens", "rollout_logprobs", "reward", "advantage"}


def _parse_candidate(payload: dict, where: str) -> BridgeCandidate:
    missing = _CANDIDATE_FIELDS - set(payload)
    if missing:
        raise SchemaError(f"{where}: candidate missing fields {sorted(missing)}")
    tokens = payload["tokens"]
    logprobs = payload["rollout_logprobs"]
    if not tokens or len(tokens) != len(logprobs):
        raise SchemaError(f"{where}: tokens and rollout_logprobs misaligned")
    if payload["reward"] not in (0, 1):
        raise SchemaError(f"{where}: reward must be 0 or 1")
    return BridgeCandidate(
        tokens=tuple(int(t) for t in tokens),
        rollout_logprobs=tuple(float(lp) for lp in logprobs),
        reward=int(payload["reward"]),
        advantage=float(payload["advantage"]),
    )


def _parse_item(payload: dict, line_no: int, group_size: int | None) -> BridgeItem:
    where = f"line {line_no}"
    missing = _ITEM_FIELDS - set(payload)
    if missing:
        raise SchemaError(f"{where}: item missing fields {sorted(missing)}")
    weight = payload["weight"]
    if weight is None or not 0.0 <= float(weight) <= 1.0:
        raise SchemaError(f"{where}: weight must be defined and within [0, 1]")
    candidates = tuple(
        _parse_candidate(c, f"{where} candidate {i}")
        for i, c in enumerate(payload["candidates"])
    )
    if group_size is not None and len(candidates) != group_size:
        raise SchemaError(f"{where}: expected {group_size} candidates, got {len(candidates)}")
    return BridgeItem(
        step=int(payload["step"]),
        suite_id=payload["suite_id"],
        source_lang=payload["source_lang"],
        target_lang=payload["target_lang"],
        weight=float(weight),
        prompt=payload["prompt"],
        candidates=candidates,
    )


def load_batch(path: str | Path) -> BridgeBatch:
    lines = [
        line
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not lines:
        raise SchemaError(f"{path}: empty batch file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed header: {exc}") from exc
    if "step" not in header or "metrics" not in header:
        raise SchemaError(f"{path}: header must carry step and metrics")
    batch = BridgeBatch(step=int(header["step"]), metrics=dict(header["metrics"]))
    group_size = None
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {line_no}: malformed record: {exc}") from exc
        item = _parse_item(payload, line_no, group_size)
        group_size = len(item.candidates)
        if item.step != batch.step:
            raise SchemaError(f"line {line_no}: item step {item.step} != header {batch.step}")
        batch.items.append(item)
    return batch
