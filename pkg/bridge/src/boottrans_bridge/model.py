"""Toy autoregressive token model.

Single-device reference policy: embedding -> hidden -> vocab logits, one
step per token, conditioned on the previous token only.  Token ids are
the opaque integers from the rollout backend; the default vocabulary of
256 covers byte-level tokenizations.  float64 throughout so objective
comparisons against the orchestrator's math hold tightly.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn


class TinyTokenLM(nn.Module):
    def __init__(self, vocab_size: int = 256, hidden: int = 32, seed: int = 0):
        super().__init__()
        self.vocab_size = vocab_size
        generator = torch.Generator().manual_seed(seed)
        self.embed = nn.Embedding(vocab_size + 1, hidden, dtype=torch.float64)  # +1 for BOS
        self.proj = nn.Linear(hidden, hidden, dtype=torch.float64)
        self.head = nn.Linear(hidden, vocab_size, dtype=torch.float64)
        with torch.no_grad():
            for param in self.parameters():
                param.copy_(torch.randn(param.shape, generator=generator, dtype=torch.float64) * 0.1)

    @property
    def bos(self) -> int:
        return self.vocab_size

    def step_logits(self, prev_tokens: torch.Tensor) -> torch.Tensor:
        hidden = torch.tanh(self.proj(self.embed(prev_tokens)))
        return self.head(hidden)

    def sequence_logprobs(self, tokens: list[int]) -> torch.Tensor:
        """Per-token log-probabilities of `tokens` under the model."""
        if not tokens:
            raise ValueError("empty token sequence")
        if max(tokens) >= self.vocab_size or min(tokens) < 0:
            raise ValueError(f"token id outside vocabulary of {self.vocab_size}")
        prev = torch.tensor([self.bos] + tokens[:-1], dtype=torch.long)
        logits = self.step_logits(prev)
        logprobs = torch.log_softmax(logits, dim=-1)
        idx = torch.tensor(tokens, dtype=torch.long)
        return logprobs.gather(1, idx.unsqueeze(1)).squeeze(1)

    @torch.no_grad()
    def sample(
        self,
        max_tokens: int,
        temperature: float = 1.0,
        top_p: float = 1.0,
        generator: torch.Generator | None = None,
    ) -> tuple[list[int], list[float]]:
        """Sample a sequence; temperature 0 means greedy decoding."""
        tokens: list[int] = []
        logprobs: list[float] = []
        prev = self.bos
        for _ in range(max_tokens):
            logits = self.step_logits(torch.tensor([prev], dtype=torch.long))[0]
            full = torch.log_softmax(logits, dim=-1)
            if temperature <= 0.0:
                choice = int(torch.argmax(full).item())
            else:
                scaled = torch.log_softmax(logits / temperature, dim=-1)
                probs = scaled.exp()
                if top_p < 1.0:
                    ranked = torch.argsort(probs, descending=True)
                    kept = probs[ranked].cumsum(0) <= top_p
                    kept[0] = True
                    mask = torch.zeros_like(probs, dtype=torch.bool)
                    mask[ranked[kept]] = True
                    probs = torch.where(mask, probs, torch.zeros_like(probs))
                    probs = probs / probs.sum()
                choice = int(torch.multinomial(probs, 1, generator=generator).item())
            tokens.append(choice)
            logprobs.append(float(full[choice].item()))
            prev = choice
        return tokens, logprobs

    def clone(self) -> "TinyTokenLM":
        twin = TinyTokenLM(self.vocab_size, self.head.in_features)
        twin.load_state_dict(self.state_dict())
        return twin

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "vocab_size": self.vocab_size,
                "hidden": self.head.in_features,
                "state": self.state_dict(),
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "TinyTokenLM":
        payload = torch.load(path, weights_only=True)
        model = cls(payload["vocab_size"], payload["hidden"])
        model.load_state_dict(payload["state"])
        return model
