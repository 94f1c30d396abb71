"""HTTP generation service over the live policy.

Speaks the same completion contract the orchestrator's HTTP policy
client expects: POST {prompt, n, temperature, top_p, max_tokens,
logprobs} returning one choice per candidate with text, tokens, and
per-token logprobs.  Generation is paused while an update is applied.
"""

from __future__ import annotations

import threading

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .schema import SchemaError
from .trainer import BridgeTrainer


class CompletionRequest(BaseModel):
    prompt: str
    n: int = 1
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 64
    logprobs: bool = True


class UpdateRequest(BaseModel):
    batch_path: str


def build_app(trainer: BridgeTrainer, seed: int = 0) -> FastAPI:
    app = FastAPI(title="boottrans-bridge")
    lock = threading.Lock()
    generator = torch.Generator().manual_seed(seed)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/completions")
    def completions(request: CompletionRequest):
        if request.n < 1:
            raise HTTPException(status_code=400, detail="n must be >= 1")
        with lock:  # updates pause generation
            choices = []
            for _ in range(request.n):
                tokens, logprobs = trainer.model.sample(
                    max_tokens=request.max_tokens,
                    temperature=request.temperature,
                    top_p=request.top_p,
                    generator=generator,
                )
                text = bytes(t % 256 for t in tokens).decode("latin-1")
                choices.append({"text": text, "tokens": tokens, "logprobs": logprobs})
        return {"choices": choices}

    @app.post("/v1/updates")
    def updates(request: UpdateRequest):
        with lock:
            try:
                report = trainer.apply_update(request.batch_path)
            except (SchemaError, FileNotFoundError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "step": report.step,
            "num_items": report.num_items,
            "objective_before": report.objective_before,
            "objective_after": report.objective_after,
            "grad_norm": report.grad_norm,
        }

    return app
