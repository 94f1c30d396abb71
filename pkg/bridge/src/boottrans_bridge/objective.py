"""The weighted clipped group objective over a neural policy, in torch.

Same decisions as the orchestrator's math: pessimistic min of the
unclipped and clipped ratio terms, the non-negative per-token KL
estimator exp(d) - d - 1 against a frozen reference, per-candidate token
averaging, 1/G over candidates, and weights summed across groups.
Current and reference log-probabilities are recomputed here: the export
carries only rollout-time values, which is all importance sampling needs.
"""

from __future__ import annotations

import torch

from .model import TinyTokenLM
from .schema import BridgeBatch


class TokenizationMismatch(Exception):
    """The batch references token ids the model's vocabulary lacks."""


def check_tokenization(batch: BridgeBatch, model: TinyTokenLM) -> None:
    for item in batch.items:
        for candidate in item.candidates:
            if any(not 0 <= t < model.vocab_size for t in candidate.tokens):
                raise TokenizationMismatch(
                    f"item {item.suite_id}->{item.target_lang} uses token ids outside "
                    f"the model vocabulary of {model.vocab_size}"
                )


def batch_objective(
    batch: BridgeBatch,
    model: TinyTokenLM,
    reference: TinyTokenLM,
    clip_epsilon: float = 0.2,
    kl_coefficient: float = 0.01,
) -> torch.Tensor:
    """Differentiable objective value for one exported batch."""
    check_tokenization(batch, model)
    total = torch.zeros((), dtype=torch.float64)
    for item in batch.items:
        group_size = len(item.candidates)
        group_sum = torch.zeros((), dtype=torch.float64)
        for candidate in item.candidates:
            tokens = list(candidate.tokens)
            cur = model.sequence_logprobs(tokens)
            with torch.no_grad():
                ref = reference.sequence_logprobs(tokens)
            old = torch.tensor(candidate.rollout_logprobs, dtype=torch.float64)
            advantage = candidate.advantage
            ratio = torch.exp(cur - old)
            clipped = torch.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
            surrogate = torch.minimum(ratio * advantage, clipped * advantage)
            delta = ref - cur
            kl = torch.clamp(torch.expm1(delta) - delta, min=0.0)
            group_sum = group_sum + (surrogate - kl_coefficient * kl).mean()
        total = total + item.weight * group_sum / group_size
    return total


def current_and_reference_logprobs(
    batch: BridgeBatch, model: TinyTokenLM, reference: TinyTokenLM
) -> tuple[list[list[list[float]]], list[list[list[float]]]]:
    """Detached per-token log-probabilities, shaped [group][candidate][token]."""
    cur_blocks = []
    ref_blocks = []
    with torch.no_grad():
        for item in batch.items:
            cur_blocks.append(
                [model.sequence_logprobs(list(c.tokens)).tolist() for c in item.candidates]
            )
            ref_blocks.append(
                [reference.sequence_logprobs(list(c.tokens)).tolist() for c in item.candidates]
            )
    return cur_blocks, ref_blocks
