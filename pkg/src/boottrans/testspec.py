"""Language-neutral test suites parsed from pivot-language assert scaffolds.

The accepted scaffold grammar is deliberately narrow: one assertion per
line, each comparing a call of the declared entrypoint on literal
arguments against a literal expected value.  Anything else is rejected
with a reason instead of being partially supported, which keeps the
oracle trustworthy when it is transpiled to other languages.
"""

from __future__ import annotations

import ast
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .seeding import derive_seed

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
MAX_LITERAL_DEPTH = 4
FLOAT_TOLERANCE = 1e-6

_IDENTIFIER_OK = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_"

# A literal value is represented by the natural Python object: int, float,
# bool, str, None, or a (possibly nested) list of those.
Literal = object


class ParseError(Exception):
    """The scaffold text is not parseable at all."""


class UnsupportedConstruct(Exception):
    """An assertion uses a construct outside the accepted grammar."""


class EmptySuite(Exception):
    """No assertion in the scaffold could be converted."""


@dataclass(frozen=True)
class SemanticType:
    """Cross-language type: int, float, bool, str, or list<elem>."""

    base: str
    elem: "SemanticType | None" = None

    _BASES = ("int", "float", "bool", "str", "list")

    def __post_init__(self) -> None:
        if self.base not in self._BASES:
            raise ValueError(f"unknown semantic type base {self.base!r}")
        if (self.base == "list") != (self.elem is not None):
            raise ValueError("list types need an element type; scalars must not have one")

    def render(self) -> str:
        if self.base == "list":
            assert self.elem is not None
            return f"list<{self.elem.render()}>"
        return self.base

    @classmethod
    def parse(cls, text: str) -> "SemanticType":
        text = text.strip()
        if text.startswith("list<") and text.endswith(">"):
            return cls("list", cls.parse(text[5:-1]))
        return cls(text)

    def depth(self) -> int:
        return 1 + self.elem.depth() if self.elem is not None else 1


INT = SemanticType("int")
FLOAT = SemanticType("float")
BOOL = SemanticType("bool")
STR = SemanticType("str")


def list_of(elem: SemanticType) -> SemanticType:
    return SemanticType("list", elem)


@dataclass(frozen=True)
class EntrypointSignature:
    function_name: str
    param_types: tuple[SemanticType, ...]
    return_type: SemanticType

    def __post_init__(self) -> None:
        if not valid_identifier(self.function_name):
            raise ValueError(f"invalid entrypoint name {self.function_name!r}")

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # domain type, not a pytest class

    args: tuple[Literal, ...]
    expected: Literal


@dataclass(frozen=True)
class TestSuite:
    __test__ = False  # domain type, not a pytest class

    suite_id: str
    entrypoint: EntrypointSignature
    cases: tuple[TestCase, ...]
    float_tolerance: float = FLOAT_TOLERANCE


@dataclass(frozen=True)
class Rejection:
    """One scaffold line that could not be converted."""

    line: int
    reason: str
    text: str = ""


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_suite."""

    message: str
    case_index: int | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ParseOutcome:
    suite: TestSuite
    rejections: tuple[Rejection, ...]


def valid_identifier(name: str) -> bool:
    """Identifier legal in every configured language: [A-Za-z_][A-Za-z0-9_]*."""
    if not name or name[0].isdigit():
        return False
    return all(ch in _IDENTIFIER_OK for ch in name)


# ---------------------------------------------------------------------------
# Literal helpers
# ---------------------------------------------------------------------------


def literal_kind(value: Literal) -> str:
    """Kind tag for a literal; bool is checked before int (bool <: int)."""
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "str"
    if value is None:
        return "null"
    if isinstance(value, list):
        return "list"
    raise TypeError(f"not a literal: {value!r}")


def literal_violations(value: Literal, _depth: int = 1) -> list[str]:
    """Invariant check: homogeneous lists, depth <= 4, finite floats, int64 range."""
    problems: list[str] = []
    kind = literal_kind(value)
    if kind == "int" and not INT64_MIN <= value <= INT64_MAX:
        problems.append(f"integer {value} outside signed 64-bit range")
    elif kind == "float" and not math.isfinite(value):
        problems.append(f"non-finite float {value!r}")
    elif kind == "list":
        if _depth > MAX_LITERAL_DEPTH:
            problems.append(f"list nesting deeper than {MAX_LITERAL_DEPTH}")
            return problems
        kinds = {literal_kind(v) for v in value}
        if len(kinds) > 1:
            problems.append(f"heterogeneous list literal (kinds {sorted(kinds)})")
        for v in value:
            problems.extend(literal_violations(v, _depth + 1))
    return problems


def literal_matches_type(value: Literal, typ: SemanticType) -> bool:
    kind = literal_kind(value)
    if typ.base == "list":
        if kind != "list":
            return False
        assert typ.elem is not None
        return all(literal_matches_type(v, typ.elem) for v in value)
    return kind == typ.base


def _coerce_literal(value: Literal, typ: SemanticType) -> Literal:
    """Fit a parsed literal to its declared type, or raise UnsupportedConstruct.

    The single coercion performed is int -> float where a float is declared;
    everything else must match exactly.
    """
    kind = literal_kind(value)
    if typ.base == "float" and kind == "int":
        return float(value)
    if typ.base == "list":
        if kind != "list":
            raise UnsupportedConstruct(f"expected list literal, got {kind}")
        assert typ.elem is not None
        return [_coerce_literal(v, typ.elem) for v in value]
    if kind != typ.base:
        raise UnsupportedConstruct(f"literal kind {kind} does not match declared {typ.render()}")
    if kind == "int" and not INT64_MIN <= value <= INT64_MAX:
        raise UnsupportedConstruct(f"integer {value} outside signed 64-bit range")
    if kind == "float" and not math.isfinite(value):
        raise UnsupportedConstruct("non-finite float literal")
    return value


def _literal_from_node(node: ast.expr) -> Literal:
    """Evaluate a restricted literal expression node."""
    if isinstance(node, ast.Constant):
        if node.value is None or isinstance(node.value, (bool, int, float, str)):
            return node.value
        raise UnsupportedConstruct(f"unsupported literal kind {type(node.value).__name__}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _literal_from_node(node.operand)
        if isinstance(inner, bool) or not isinstance(inner, (int, float)):
            raise UnsupportedConstruct("unary sign on non-numeric literal")
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.List):
        return [_literal_from_node(el) for el in node.elts]
    if isinstance(node, (ast.Tuple, ast.Dict, ast.Set)):
        raise UnsupportedConstruct(f"unsupported literal kind {type(node).__name__.lower()}")
    if isinstance(node, ast.Name):
        raise UnsupportedConstruct(f"non-literal argument {node.id!r}")
    raise UnsupportedConstruct(f"non-literal expression ({type(node).__name__})")


# ---------------------------------------------------------------------------
# Scaffold parsing
# ---------------------------------------------------------------------------


def parse_scaffold(
    scaffold_text: str, signature: EntrypointSignature, suite_id: str | None = None
) -> ParseOutcome:
    """Convert an assert scaffold into a TestSuite plus per-line rejections.

    Raises ParseError when the scaffold is not valid pivot-language source,
    and EmptySuite when zero assertions convert.
    """
    if not scaffold_text.strip():
        raise ParseError("empty scaffold")
    try:
        tree = ast.parse(scaffold_text)
    except SyntaxError as exc:
        raise ParseError(f"malformed scaffold: {exc}") from exc

    cases: list[TestCase] = []
    rejections: list[Rejection] = []
    lines = scaffold_text.splitlines()

    def reject(node: ast.stmt, reason: str) -> None:
        text = lines[node.lineno - 1].strip() if node.lineno - 1 < len(lines) else ""
        rejections.append(Rejection(line=node.lineno, reason=reason, text=text))

    for stmt in tree.body:
        if not isinstance(stmt, ast.Assert):
            reject(stmt, "not an assertion")
            continue
        try:
            cases.append(_convert_assert(stmt, signature))
        except UnsupportedConstruct as exc:
            reject(stmt, str(exc))

    if not cases:
        raise EmptySuite(
            f"no convertible assertions ({len(rejections)} rejected)"
        )
    return ParseOutcome(
        suite=TestSuite(
            suite_id=suite_id or signature.function_name,
            entrypoint=signature,
            cases=tuple(cases),
        ),
        rejections=tuple(rejections),
    )


def _convert_assert(stmt: ast.Assert, signature: EntrypointSignature) -> TestCase:
    test = stmt.test
    if not isinstance(test, ast.Compare) or len(test.ops) != 1 or not isinstance(test.ops[0], ast.Eq):
        raise UnsupportedConstruct("assertion is not a single == comparison")
    call, expected_node = test.left, test.comparators[0]
    # Accept the symmetric form `assert literal == f(...)` as well.
    if not isinstance(call, ast.Call) and isinstance(expected_node, ast.Call):
        call, expected_node = expected_node, call
    if not isinstance(call, ast.Call):
        raise UnsupportedConstruct("left side is not a call of the entrypoint")
    if not isinstance(call.func, ast.Name) or call.func.id != signature.function_name:
        raise UnsupportedConstruct("call target is not the declared entrypoint")
    if call.keywords:
        raise UnsupportedConstruct("keyword arguments are not supported")
    if len(call.args) != signature.arity:
        raise UnsupportedConstruct(
            f"arity mismatch: {len(call.args)} args, entrypoint takes {signature.arity}"
        )
    args = tuple(
        _coerce_literal(_literal_from_node(node), typ)
        for node, typ in zip(call.args, signature.param_types)
    )
    expected = _coerce_literal(_literal_from_node(expected_node), signature.return_type)
    return TestCase(args=args, expected=expected)


def parse_pivot_tests(
    scaffold_text: str, signature: EntrypointSignature, suite_id: str | None = None
) -> TestSuite:
    """Parse a scaffold, returning only the suite (rejections dropped)."""
    return parse_scaffold(scaffold_text, signature, suite_id).suite


def render_pivot_assertion(case: TestCase, signature: EntrypointSignature) -> str:
    """Re-emit a case as a pivot-language assert line (parse round-trip)."""
    args = ", ".join(_render_pivot_literal(a) for a in case.args)
    return f"assert {signature.function_name}({args}) == {_render_pivot_literal(case.expected)}"


def _render_pivot_literal(value: Literal) -> str:
    if isinstance(value, list):
        return "[" + ", ".join(_render_pivot_literal(v) for v in value) + "]"
    return repr(value)


# ---------------------------------------------------------------------------
# Validation and subsampling
# ---------------------------------------------------------------------------


def validate_suite(suite: TestSuite) -> ValidationReport:
    """List every invariant violation; an empty report means the suite is sound."""
    report = ValidationReport()

    def add(message: str, case_index: int | None = None) -> None:
        report.violations.append(Violation(message=message, case_index=case_index))

    if not valid_identifier(suite.entrypoint.function_name):
        add(f"invalid entrypoint name {suite.entrypoint.function_name!r}")
    if not suite.cases:
        add("suite has no cases")
    if not suite.suite_id:
        add("empty suite_id")
    for typ in (*suite.entrypoint.param_types, suite.entrypoint.return_type):
        if typ.depth() > MAX_LITERAL_DEPTH:
            add(f"type {typ.render()} nests deeper than {MAX_LITERAL_DEPTH}")

    for idx, case in enumerate(suite.cases):
        if len(case.args) != suite.entrypoint.arity:
            add(
                f"arity mismatch: case has {len(case.args)} args, "
                f"entrypoint takes {suite.entrypoint.arity}",
                idx,
            )
        else:
            for pos, (arg, typ) in enumerate(zip(case.args, suite.entrypoint.param_types)):
                for problem in literal_violations(arg):
                    add(f"arg {pos}: {problem}", idx)
                if not literal_matches_type(arg, typ):
                    add(f"arg {pos} does not match declared type {typ.render()}", idx)
        for problem in literal_violations(case.expected):
            add(f"expected value: {problem}", idx)
        if not literal_matches_type(case.expected, suite.entrypoint.return_type):
            add(
                "expected value does not match declared return type "
                f"{suite.entrypoint.return_type.render()}",
                idx,
            )
    return report


def subsample_suite(suite: TestSuite, fraction: float, rng_seed: int) -> TestSuite:
    """Keep max(1, round(fraction * n)) cases, uniformly without replacement.

    Deterministic under rng_seed; original case order is preserved among the
    survivors and the suite id is suffixed with the fraction.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(suite.cases)
    keep = max(1, int(math.floor(fraction * n + 0.5)))
    if keep >= n:
        chosen = list(range(n))
    else:
        rng = random.Random(derive_seed(rng_seed, suite.suite_id, fraction))
        chosen = sorted(rng.sample(range(n), keep))
    return TestSuite(
        suite_id=f"{suite.suite_id}@{fraction:g}",
        entrypoint=suite.entrypoint,
        cases=tuple(suite.cases[i] for i in chosen),
        float_tolerance=suite.float_tolerance,
    )


# ---------------------------------------------------------------------------
# Dataset file format (line-delimited JSON)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetRecord:
    """One dataset line: a suite plus the pivot-language source it verifies."""

    suite: TestSuite
    pivot_source: str
    references: dict[str, str] | None = None  # benchmark-only: per-language solutions


def suite_to_dict(suite: TestSuite) -> dict:
    return {
        "suite_id": suite.suite_id,
        "entrypoint": {
            "function_name": suite.entrypoint.function_name,
            "param_types": [t.render() for t in suite.entrypoint.param_types],
            "return_type": suite.entrypoint.return_type.render(),
        },
        "cases": [{"args": list(c.args), "expected": c.expected} for c in suite.cases],
    }


def suite_from_dict(payload: dict) -> TestSuite:
    ep = payload["entrypoint"]
    signature = EntrypointSignature(
        function_name=ep["function_name"],
        param_types=tuple(SemanticType.parse(t) for t in ep["param_types"]),
        return_type=SemanticType.parse(ep["return_type"]),
    )
    cases = tuple(
        TestCase(args=tuple(c["args"]), expected=c["expected"]) for c in payload["cases"]
    )
    return TestSuite(suite_id=payload["suite_id"], entrypoint=signature, cases=cases)


def record_to_dict(record: DatasetRecord) -> dict:
    payload = suite_to_dict(record.suite)
    payload["pivot_source"] = record.pivot_source
    if record.references is not None:
        payload["references"] = dict(record.references)
    return payload


def record_from_dict(payload: dict) -> DatasetRecord:
    return DatasetRecord(
        suite=suite_from_dict(payload),
        pivot_source=payload["pivot_source"],
        references=payload.get("references"),
    )


def write_dataset(records: list[DatasetRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    records = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            record = record_from_dict(json.loads(line))
            if record.suite.suite_id in seen:
                raise ParseError(f"duplicate suite_id {record.suite.suite_id!r} at line {line_no}")
            seen.add(record.suite.suite_id)
            records.append(record)
    return records
