"""One optimizer step per batch file, with a before/after report."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch

from .model import TinyTokenLM
from .objective import batch_objective
from .schema import BridgeBatch, load_batch


@dataclass
class UpdateReport:
    step: int
    num_items: int
    objective_before: float
    objective_after: float
    grad_norm: float


class BridgeTrainer:
    """Holds the live policy, its frozen reference snapshot, and the optimizer.

    The reference is the policy at trainer construction and is never
    re-anchored; batches are processed one at a time.
    """

    def __init__(
        self,
        model: TinyTokenLM,
        learning_rate: float = 1e-6,
        clip_epsilon: float = 0.2,
        kl_coefficient: float = 0.01,
    ):
        self.model = model
        self.reference = model.clone()
        for param in self.reference.parameters():
            param.requires_grad_(False)
        self.clip_epsilon = clip_epsilon
        self.kl_coefficient = kl_coefficient
        self.optimizer = torch.optim.AdamW(
            model.parameters(), lr=learning_rate, weight_decay=0.0
        )

    def apply_update(self, batch: BridgeBatch | str | Path) -> UpdateReport:
        if not isinstance(batch, BridgeBatch):
            batch = load_batch(batch)
        objective = batch_objective(
            batch, self.model, self.reference, self.clip_epsilon, self.kl_coefficient
        )
        before = float(objective.item())
        self.optimizer.zero_grad()
        (-objective).backward()  # optimizer minimizes; the objective is maximized
        grad_norm = torch.sqrt(
            sum(
                (p.grad.detach() ** 2).sum()
                for p in self.model.parameters()
                if p.grad is not None
            )
        )
        self.optimizer.step()
        with torch.no_grad():
            after = float(
                batch_objective(
                    batch, self.model, self.reference, self.clip_epsilon, self.kl_coefficient
                ).item()
            )
        return UpdateReport(
            step=batch.step,
            num_items=len(batch.items),
            objective_before=before,
            objective_after=after,
            grad_norm=float(grad_norm.item()),
        )
