"""Benchmark evaluation: CA@1 over the direction matrix, error taxonomy,
and the training-data leakage filter.

CA@1 is the fraction of problems whose single greedy translation compiles
and passes all tests.  Failed translations are binned into five classes
by a deterministic pattern cascade over the verdict diagnostics; the
per-language pattern tables live in ``data/error_patterns.json`` and can
be swapped without code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .policy import EVAL_DECODE, GenerationRequest, PolicyUnavailable, ProtocolError
from .pools import CodeUnit
from .sandbox import ExecutionLimits, InternalError, Outcome, Sandbox, Verdict
from .testspec import DatasetRecord, TestSuite
from .transpiler import emit_harness, render_signature


class ErrorClass(str, Enum):
    LOGICAL_INCONSISTENCY = "LogicalInconsistency"
    SYNTACTIC_INVALIDITY = "SyntacticInvalidity"
    API_MISUSE = "ApiMisuse"
    TYPE_MISMATCH = "TypeMismatch"
    SIGNATURE_MISMATCH = "SignatureMismatch"


@dataclass
class DirectionResult:
    source_lang: str
    target_lang: str
    attempted: int = 0
    passed: int = 0
    error_histogram: dict[str, int] = field(default_factory=dict)
    infrastructure_failures: int = 0

    @property
    def ca1(self) -> float:
        return self.passed / self.attempted if self.attempted else 0.0

    @property
    def direction(self) -> str:
        return f"{self.source_lang}->{self.target_lang}"


def load_error_patterns(path: str | Path | None = None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    return json.loads(
        resources.files("boottrans").joinpath("data/error_patterns.json").read_text("utf-8")
    )


def classify_error(
    verdict: Verdict,
    candidate: CodeUnit,
    suite: TestSuite,
    patterns: dict | None = None,
) -> ErrorClass:
    """Deterministic cascade from verdict diagnostics to an error class.

    Entrypoint-lookup failures win over everything; then compile-stage
    diagnostics split into missing-symbol (API misuse), type/conversion,
    and generic syntactic invalidity; everything else is a logic error.
    """
    if verdict.outcome is Outcome.PASS:
        raise ValueError("cannot classify a passing verdict")
    patterns = patterns if patterns is not None else load_error_patterns()
    table = patterns.get(candidate.language, {})
    diagnostics = verdict.diagnostics
    name = suite.entrypoint.function_name

    for template in table.get("entrypoint_missing", ()):
        if template.format(name=name) in diagnostics:
            return ErrorClass.SIGNATURE_MISMATCH

    symbol_stage = verdict.outcome is Outcome.COMPILE_ERROR or (
        table.get("check_runtime_diagnostics", False)
        and verdict.outcome is Outcome.RUNTIME_ERROR
    )
    if symbol_stage:
        if any(p in diagnostics for p in table.get("missing_symbol", ())):
            return ErrorClass.API_MISUSE
        if any(p in diagnostics for p in table.get("type_mismatch", ())):
            return ErrorClass.TYPE_MISMATCH
    if verdict.outcome is Outcome.COMPILE_ERROR:
        return ErrorClass.SYNTACTIC_INVALIDITY
    return ErrorClass.LOGICAL_INCONSISTENCY


def evaluate_ca1(
    policy,
    benchmark: list[DatasetRecord],
    directions: list[tuple[str, str]],
    limits: ExecutionLimits = ExecutionLimits(),
    verifier: Sandbox | None = None,
    patterns: dict | None = None,
) -> list[DirectionResult]:
    """One greedy candidate per problem per direction; pass iff reward 1.

    Policy and sandbox failures count as failed attempts, flagged in
    infrastructure_failures (they still land in the error histogram so its
    total stays attempted - passed).
    """
    verifier = verifier if verifier is not None else Sandbox()
    patterns = patterns if patterns is not None else load_error_patterns()
    results = []
    for src, tgt in directions:
        result = DirectionResult(source_lang=src, target_lang=tgt)
        for record in benchmark:
            source_text = (record.references or {}).get(src)
            if source_text is None:
                continue
            result.attempted += 1
            source = CodeUnit(
                source_text=source_text, language=src, entrypoint=record.suite.entrypoint
            )
            candidate_source, verdict, reward, infra = _translate_and_verify(
                policy, source, tgt, record.suite, limits, verifier
            )
            if reward == 1:
                result.passed += 1
                continue
            if infra:
                result.infrastructure_failures += 1
            candidate = CodeUnit(
                source_text=candidate_source or "@@empty@@",
                language=tgt,
                entrypoint=record.suite.entrypoint,
            )
            label = classify_error(verdict, candidate, record.suite, patterns).value
            result.error_histogram[label] = result.error_histogram.get(label, 0) + 1
        result.error_histogram = dict(sorted(result.error_histogram.items()))
        results.append(result)
    return results


def _translate_and_verify(policy, source, target, suite, limits, verifier):
    request = GenerationRequest(
        source=source,
        target=target,
        target_signature=render_signature(suite.entrypoint, target),
        num_candidates=1,
        decode=EVAL_DECODE,
    )
    try:
        completion = policy.generate(request)[0]
    except (PolicyUnavailable, ProtocolError) as exc:
        verdict = Verdict(
            outcome=Outcome.RUNTIME_ERROR, diagnostics=f"[infrastructure] {exc}"
        )
        return "", verdict, 0, True
    harness = emit_harness(suite, target)
    try:
        verdict, reward = verifier.verify(completion.source_text, target, harness, limits)
    except InternalError as exc:
        verdict = Verdict(
            outcome=Outcome.RUNTIME_ERROR, diagnostics=f"[infrastructure] {exc}"
        )
        return completion.source_text, verdict, 0, True
    return completion.source_text, verdict, reward, False


# ---------------------------------------------------------------------------
# Leakage filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Removal:
    suite_id: str
    function_name: str


def leakage_filter(
    records: list[DatasetRecord],
    benchmark_names: set[str],
    case_sensitive: bool = True,
) -> tuple[list[DatasetRecord], list[Removal]]:
    """Drop every record whose entrypoint name appears in the benchmark set."""
    if not case_sensitive:
        benchmark_names = {n.lower() for n in benchmark_names}
    kept: list[DatasetRecord] = []
    removed: list[Removal] = []
    for record in records:
        name = record.suite.entrypoint.function_name
        probe = name if case_sensitive else name.lower()
        if probe in benchmark_names:
            removed.append(Removal(suite_id=record.suite.suite_id, function_name=name))
        else:
            kept.append(record)
    return kept, removed


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def format_direction_table(results: list[DirectionResult], metric_name: str = "CA@1") -> str:
    """Text table with one column per direction plus the average column."""
    headers = [r.direction for r in results] + ["Avg"]
    scores = [r.ca1 for r in results]
    average = sum(scores) / len(scores) if scores else 0.0
    values = [f"{s:.4f}" for s in scores] + [f"{average:.4f}"]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    name_width = len(metric_name)
    header_row = " " * name_width + "  " + "  ".join(
        h.rjust(w) for h, w in zip(headers, widths)
    )
    value_row = metric_name + "  " + "  ".join(v.rjust(w) for v, w in zip(values, widths))
    return header_row + "\n" + value_row


def results_to_records(results: list[DirectionResult]) -> list[dict]:
    return [
        {
            "source_lang": r.source_lang,
            "target_lang": r.target_lang,
            "attempted": r.attempted,
            "passed": r.passed,
            "ca1": r.ca1,
            "error_histogram": r.error_histogram,
            "infrastructure_failures": r.infrastructure_failures,
        }
        for r in results
    ]


def write_results(results: list[DirectionResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in results_to_records(results):
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
