"""Translation policy backends.

Two implementations of the same generate() contract: a scripted policy
driven by a lookup table (deterministic under its seed, used for every
desk-scale test) and an HTTP client for real inference servers that
return per-token log-probabilities.  Both return raw completions plus the
extracted candidate source (first complete target-language code fence).
"""

from __future__ import annotations

import os
import random
import re
import threading
from dataclasses import dataclass, field

import requests

from .pools import CodeUnit
from .seeding import derive_seed

PROMPT_TEMPLATE = (
    "Please translate source {source_lang} code to target {target_lang} code:\n"
    "```{source_lang}\n"
    "{source_code}```\n"
    "The translated {target_lang} code should be:\n"
    "```{target_lang}\n"
    "{target_signature}```"
)

# Compiles in no configured language, so an empty completion surfaces as a
# CompileError verdict instead of crashing the loop.
EMPTY_COMPLETION_SENTINEL = "@@empty-completion@@"

_FENCE_OPEN = re.compile(r"```([^\n`]*)\n")


class PolicyUnavailable(Exception):
    """The generation endpoint cannot be reached."""


class ProtocolError(Exception):
    """The endpoint responded without the data the contract requires."""


@dataclass(frozen=True)
class DecodeParams:
    mode: str = "sample"
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.mode not in ("greedy", "sample"):
            raise ValueError(f"unknown decode mode {self.mode!r}")
        if self.mode == "sample":
            if self.temperature <= 0:
                raise ValueError("sampling needs temperature > 0")
            if not 0.0 < self.top_p <= 1.0:
                raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


ROLLOUT_DECODE = DecodeParams(mode="sample", temperature=1.0, top_p=1.0)
EVAL_DECODE = DecodeParams(mode="greedy")


@dataclass(frozen=True)
class GenerationRequest:
    source: CodeUnit
    target: str
    target_signature: str
    num_candidates: int
    decode: DecodeParams = ROLLOUT_DECODE

    def __post_init__(self) -> None:
        if self.target == self.source.language:
            raise ValueError("target must differ from the source language")
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be >= 1")


@dataclass(frozen=True)
class Completion:
    """One generated candidate: raw text, extracted source, token data."""

    text: str
    source_text: str
    tokens: tuple[int, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("tokens and logprobs must align")
        if not self.tokens:
            raise ValueError("completion must carry at least one token")


def render_prompt(source: CodeUnit, target: str, target_signature: str) -> str:
    return PROMPT_TEMPLATE.format(
        source_lang=source.language,
        target_lang=target,
        source_code=source.source_text,
        target_signature=target_signature,
    )


def extract_code(completion: str, target: str) -> str:
    """Content of the first complete target-language code fence.

    Fences tagged with a different language are skipped whole.  An
    unterminated matching fence yields everything after it; text without
    a matching fence is returned unchanged, which makes extraction
    idempotent on already-extracted source.
    """
    pos = 0
    while True:
        match = _FENCE_OPEN.search(completion, pos)
        if match is None:
            return completion
        info = match.group(1).strip().lower()
        start = match.end()
        close = completion.find("```", start)
        if info and info != target.lower():
            if close == -1:
                return completion
            pos = close + 3
            continue
        if close == -1:
            return completion[start:]
        return completion[start:close].rstrip("\n")


# ---------------------------------------------------------------------------
# Scripted policy
# ---------------------------------------------------------------------------


@dataclass
class ScriptedPolicy:
    """Deterministic table-driven policy for tests and simulations.

    The table maps (target language, entrypoint name) to a correct
    translation.  Candidates are corrupted (made uncompilable) when the
    entrypoint is listed in fail_names, when no translation is known, or
    with probability corruption_rate under the per-candidate derived seed.
    """

    table: dict[tuple[str, str], str] = field(default_factory=dict)
    corruption_rate: float = 0.0
    fail_names: frozenset[str] = frozenset()
    seed: int = 0

    def generate(self, request: GenerationRequest) -> list[Completion]:
        name = request.source.entrypoint.function_name
        translation = self.table.get((request.target, name))
        completions = []
        for index in range(request.num_candidates):
            key = (name, request.source.language, request.target, index)
            corrupt = translation is None or name in self.fail_names
            if not corrupt and self.corruption_rate > 0.0:
                rng = random.Random(derive_seed(self.seed, "corrupt", *key))
                corrupt = rng.random() < self.corruption_rate
            body = "@@corrupted@@" if corrupt else translation
            text = f"```{request.target}\n{body}\n```"
            tokens = _synthetic_tokens(text, request.decode.max_tokens)
            completions.append(
                Completion(
                    text=text,
                    source_text=extract_code(text, request.target),
                    tokens=tokens,
                    logprobs=_synthetic_logprobs(
                        derive_seed(self.seed, "tok", *key), len(tokens)
                    ),
                )
            )
        return completions


def _synthetic_tokens(text: str, max_tokens: int) -> tuple[int, ...]:
    data = text.encode("utf-8")[:max_tokens]
    return tuple(data) if data else (0,)


def _synthetic_logprobs(seed: int, count: int) -> tuple[float, ...]:
    rng = random.Random(seed)
    return tuple(-(0.01 + 1.99 * rng.random()) for _ in range(count))


# ---------------------------------------------------------------------------
# HTTP policy
# ---------------------------------------------------------------------------


@dataclass
class HttpPolicy:
    """Client for a completion endpoint that reports per-token logprobs.

    Wire contract: POST {prompt, n, temperature, top_p, max_tokens,
    logprobs: true}; the response carries one choice per candidate with
    `text`, `tokens` (ints) and `logprobs` (floats) of equal length.
    """

    endpoint_url: str
    auth_token_env_var: str | None = None
    request_timeout: float = 120.0
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        self._gate = threading.Semaphore(self.max_in_flight)

    def generate(self, request: GenerationRequest) -> list[Completion]:
        prompt = render_prompt(request.source, request.target, request.target_signature)
        payload = {
            "prompt": prompt,
            "n": request.num_candidates,
            "temperature": 0.0 if request.decode.mode == "greedy" else request.decode.temperature,
            "top_p": 1.0 if request.decode.mode == "greedy" else request.decode.top_p,
            "max_tokens": request.decode.max_tokens,
            "logprobs": True,
        }
        headers = {}
        if self.auth_token_env_var:
            token = os.environ.get(self.auth_token_env_var, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        with self._gate:
            try:
                response = requests.post(
                    self.endpoint_url, json=payload, headers=headers, timeout=self.request_timeout
                )
            except requests.RequestException as exc:
                raise PolicyUnavailable(f"endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise PolicyUnavailable(
                f"endpoint returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            choices = response.json()["choices"]
        except (ValueError, KeyError) as exc:
            raise ProtocolError(f"malformed response body: {exc}") from exc
        if len(choices) != request.num_candidates:
            raise ProtocolError(
                f"asked for {request.num_candidates} candidates, got {len(choices)}"
            )
        return [self._parse_choice(choice, request.target) for choice in choices]

    @staticmethod
    def _parse_choice(choice: dict, target: str) -> Completion:
        try:
            text = choice["text"]
            tokens = choice["tokens"]
            logprobs = choice["logprobs"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"choice lacks text/tokens/logprobs: {exc}") from exc
        if logprobs is None or tokens is None:
            raise ProtocolError("response lacks per-token logprobs")
        if len(tokens) != len(logprobs):
            raise ProtocolError("tokens and logprobs differ in length")
        extracted = extract_code(text, target)
        if not extracted.strip():
            extracted = EMPTY_COMPLETION_SENTINEL
        if not tokens:
            tokens, logprobs = [0], [0.0]
        return Completion(
            text=text,
            source_text=extracted,
            tokens=tuple(int(t) for t in tokens),
            logprobs=tuple(min(0.0, float(lp)) for lp in logprobs),
        )
