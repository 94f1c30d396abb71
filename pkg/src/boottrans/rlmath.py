"""Numerical core of the training objective.

Pure functions over plain floats: language-aware weights from sibling
rewards, group-relative advantages, the clipped importance-sampling
surrogate, the non-negative per-token KL estimator, and their composition
into the weighted group objective.  All accumulation is 64-bit and the
reduction order is fixed (groups in batch order, candidates in index
order, tokens left to right) so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .sandbox import Verdict


class AlignmentError(Exception):
    """Log-probability arrays do not align with candidate token arrays."""


@dataclass(frozen=True)
class CandidateRollout:
    """One sampled translation with its rollout-time log-probabilities."""

    tokens: tuple[int, ...]
    rollout_logprobs: tuple[float, ...]
    reward: int
    verdict_ref: Verdict | None = None

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.rollout_logprobs):
            raise AlignmentError(
                f"{len(self.tokens)} tokens vs {len(self.rollout_logprobs)} logprobs"
            )
        if not self.tokens:
            raise ValueError("rollout must contain at least one token")
        if self.reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {self.reward}")
        if any(lp > 0.0 for lp in self.rollout_logprobs):
            raise ValueError("log-probabilities must be <= 0")


@dataclass(frozen=True)
class TranslationGroup:
    """The G candidates for one (source item, target language) direction."""

    source_ref: str
    target: str
    candidates: tuple[CandidateRollout, ...]
    cumulative_reward: int
    sibling_reward: int
    weight: float | None
    advantages: tuple[float, ...]

    def __post_init__(self) -> None:
        rewards = sum(c.reward for c in self.candidates)
        if self.cumulative_reward != rewards:
            raise ValueError("cumulative_reward must equal the sum of candidate rewards")
        if not 0 <= self.cumulative_reward <= len(self.candidates):
            raise ValueError("cumulative_reward out of range")
        if self.weight is not None and not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight {self.weight} outside [0, 1]")
        if len(self.advantages) != len(self.candidates):
            raise AlignmentError("one advantage per candidate required")


@dataclass(frozen=True)
class ObjectiveConfig:
    clip_epsilon: float = 0.2
    kl_coefficient: float = 0.01
    group_size: int = 8
    # The written objective sums over groups; set batch_mean to average instead.
    batch_mean: bool = False

    def __post_init__(self) -> None:
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be > 0")
        if self.kl_coefficient < 0:
            raise ValueError("kl_coefficient must be >= 0")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")


def language_weight(own: int, sibling: int) -> float | None:
    """Sibling reward over total reward; None means the sample is skipped.

    A direction that lags while its siblings succeed gets weight near 1;
    when no candidate passed in any direction the weight is undefined and
    the item drops out of the update.
    """
    if own < 0 or sibling < 0:
        raise ValueError("reward totals cannot be negative")
    total = own + sibling
    if total == 0:
        return None
    return sibling / total


def group_advantages(rewards: list[int] | tuple[int, ...]) -> list[float]:
    """Standardize rewards within the group (population statistics).

    Degenerate groups (zero variance) yield all-zero advantages; the
    advantage is sequence-level and broadcast over every token of its
    candidate.
    """
    size = len(rewards)
    if size < 2:
        raise ValueError("a group needs at least 2 candidates")
    if min(rewards) == max(rewards):
        return [0.0] * size
    mean = sum(rewards) / size
    variance = sum((r - mean) ** 2 for r in rewards) / size
    std = math.sqrt(variance)
    return [(r - mean) / std for r in rewards]


def token_surrogate(ratio: float, advantage: float, epsilon: float) -> float:
    """Pessimistic min of the unclipped and clipped policy-ratio terms."""
    if ratio <= 0.0:
        raise ValueError("importance ratio must be positive")
    clipped = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon)
    return min(ratio * advantage, clipped * advantage)


def kl_penalty_token(logp_current: float, logp_reference: float) -> float:
    """Non-negative per-token KL estimator exp(d) - d - 1, d = ref - cur."""
    delta = logp_reference - logp_current
    return max(0.0, math.expm1(delta) - delta)


def grpo_objective(
    groups: list[TranslationGroup],
    current_logprobs: list[list[list[float]] | list[tuple[float, ...]]],
    reference_logprobs: list[list[list[float]] | list[tuple[float, ...]]],
    config: ObjectiveConfig,
) -> float:
    """Weighted sum over groups of the per-candidate token-mean surrogate.

    current/reference log-probabilities are indexed [group][candidate][token]
    and must align exactly with each candidate's rollout; ratios come from
    exp(current - rollout).
    """
    if len(current_logprobs) != len(groups) or len(reference_logprobs) != len(groups):
        raise AlignmentError("need one logprob block per group")
    total = 0.0
    for group, cur_block, ref_block in zip(groups, current_logprobs, reference_logprobs):
        if group.weight is None:
            raise ValueError(
                f"group {group.source_ref}->{group.target} has undefined weight; "
                "skip it upstream"
            )
        if len(group.candidates) != config.group_size:
            raise AlignmentError(
                f"group has {len(group.candidates)} candidates, config says "
                f"{config.group_size}"
            )
        if len(cur_block) != len(group.candidates) or len(ref_block) != len(group.candidates):
            raise AlignmentError("need one logprob row per candidate")
        group_sum = 0.0
        for candidate, advantage, cur, ref in zip(
            group.candidates, group.advantages, cur_block, ref_block
        ):
            n_tokens = len(candidate.tokens)
            if len(cur) != n_tokens or len(ref) != n_tokens:
                raise AlignmentError(
                    f"logprob row length mismatch for candidate with {n_tokens} tokens"
                )
            token_sum = 0.0
            for lp_cur, lp_ref, lp_old in zip(cur, ref, candidate.rollout_logprobs):
                ratio = math.exp(lp_cur - lp_old)
                token_sum += token_surrogate(ratio, advantage, config.clip_epsilon)
                token_sum -= config.kl_coefficient * kl_penalty_token(lp_cur, lp_ref)
            group_sum += token_sum / n_tokens
        total += group.weight * group_sum / config.group_size
    if config.batch_mean and groups:
        total /= len(groups)
    return total


@dataclass(frozen=True)
class GroupBuilder:
    """Assembles a TranslationGroup once sibling totals are known."""

    source_ref: str
    target: str
    candidates: tuple[CandidateRollout, ...] = field(default_factory=tuple)

    @property
    def cumulative_reward(self) -> int:
        return sum(c.reward for c in self.candidates)

    def finish(self, sibling_reward: int) -> TranslationGroup:
        own = self.cumulative_reward
        return TranslationGroup(
            source_ref=self.source_ref,
            target=self.target,
            candidates=self.candidates,
            cumulative_reward=own,
            sibling_reward=sibling_reward,
            weight=language_weight(own, sibling_reward),
            advantages=tuple(group_advantages([c.reward for c in self.candidates])),
        )
