"""Target-language test harness emission.

Each configured language has a pinned golden template (under
``templates/``) providing the equality helpers and the main scaffold.
Emission fills in one assertion block per test case, in case order, and
leaves a marker line where the sandbox splices in the candidate source.
A failing assertion prints ``FAIL case=<k>`` on stderr and exits 1;
crash/timeout handling belongs to the sandbox.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .testspec import INT64_MIN, EntrypointSignature, Literal, SemanticType, TestSuite

CANDIDATE_MARKER = "<<<CANDIDATE>>>"

SUPPORTED_TARGETS = ("python", "cpp", "rust")


class UnmappableType(Exception):
    """No rendering for this type or literal in the target language."""


class EmitError(Exception):
    """Internal template failure."""


@dataclass(frozen=True)
class HarnessSource:
    language: str
    source_text: str
    entrypoint: EntrypointSignature
    suite_id: str


def _load_template(target: str) -> str:
    try:
        return (
            resources.files("boottrans").joinpath(f"templates/{target}.tmpl").read_text("utf-8")
        )
    except FileNotFoundError as exc:
        raise UnmappableType(f"no harness template for language {target!r}") from exc


# ---------------------------------------------------------------------------
# Type rendering
# ---------------------------------------------------------------------------

_SCALAR_TYPES = {
    "python": {"int": "int", "float": "float", "bool": "bool", "str": "str"},
    "cpp": {"int": "int64_t", "float": "double", "bool": "bool", "str": "std::string"},
    "rust": {"int": "i64", "float": "f64", "bool": "bool", "str": "String"},
}

_LIST_TEMPLATES = {"python": "list[{}]", "cpp": "std::vector<{}>", "rust": "Vec<{}>"}


def map_type(typ: SemanticType, target: str) -> str:
    """Render a semantic type as a target-language type denotation."""
    if target not in _SCALAR_TYPES:
        raise UnmappableType(f"unsupported target language {target!r}")
    if typ.base == "list":
        assert typ.elem is not None
        return _LIST_TEMPLATES[target].format(map_type(typ.elem, target))
    return _SCALAR_TYPES[target][typ.base]


# ---------------------------------------------------------------------------
# Literal rendering
# ---------------------------------------------------------------------------


def _escape_string(value: str, target: str) -> str:
    simple = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
    out: list[str] = []
    for ch in value:
        if ch in simple:
            out.append(simple[ch])
        elif " " <= ch <= "~":
            out.append(ch)
        elif target == "python":
            cp = ord(ch)
            out.append(f"\\u{cp:04x}" if cp <= 0xFFFF else f"\\U{cp:08x}")
        elif target == "rust":
            out.append(f"\\u{{{ord(ch):x}}}")
        else:  # cpp: fixed-width octal escapes of the UTF-8 bytes (never greedy)
            out.extend(f"\\{byte:03o}" for byte in ch.encode("utf-8"))
    return '"' + "".join(out) + '"'


def emit_literal(value: Literal, target: str, typ: SemanticType) -> str:
    """Render a literal so the harness equality helper sees a deep-equal value.

    The declared type is required so empty sequences come out fully typed.
    """
    if target not in _SCALAR_TYPES:
        raise UnmappableType(f"unsupported target language {target!r}")
    if value is None:
        raise UnmappableType(f"null literal has no rendering in {target}")

    if typ.base == "list":
        assert typ.elem is not None
        items = [emit_literal(v, target, typ.elem) for v in value]
        if target == "python":
            return "[" + ", ".join(items) + "]"
        if target == "cpp":
            return map_type(typ, target) + "{" + ", ".join(items) + "}"
        if not items:
            return f"Vec::<{map_type(typ.elem, target)}>::new()"
        return "vec![" + ", ".join(items) + "]"

    if typ.base == "bool":
        if target == "python":
            return "True" if value else "False"
        return "true" if value else "false"
    if typ.base == "int":
        if target == "python":
            return str(value)
        if target == "cpp":
            if value == INT64_MIN:
                return "int64_t{-9223372036854775807 - 1}"
            return f"int64_t{{{value}}}"
        return "i64::MIN" if value == INT64_MIN else f"{value}i64"
    if typ.base == "float":
        text = repr(float(value))
        return text + "f64" if target == "rust" else text
    if typ.base == "str":
        rendered = _escape_string(value, target)
        if target == "cpp":
            return f"std::string({rendered})"
        if target == "rust":
            return f"String::from({rendered})"
        return rendered
    raise UnmappableType(f"no rendering for type {typ.render()} in {target}")


# ---------------------------------------------------------------------------
# Signature rendering (used for prompts and reference authoring)
# ---------------------------------------------------------------------------


def render_signature(signature: EntrypointSignature, target: str) -> str:
    params = [
        (f"arg{i}", map_type(t, target)) for i, t in enumerate(signature.param_types)
    ]
    ret = map_type(signature.return_type, target)
    if target == "python":
        args = ", ".join(f"{name}: {typ}" for name, typ in params)
        return f"def {signature.function_name}({args}) -> {ret}:"
    if target == "cpp":
        args = ", ".join(f"{typ} {name}" for name, typ in params)
        return f"{ret} {signature.function_name}({args})"
    if target == "rust":
        args = ", ".join(f"{name}: {typ}" for name, typ in params)
        return f"fn {signature.function_name}({args}) -> {ret}"
    raise UnmappableType(f"unsupported target language {target!r}")


# ---------------------------------------------------------------------------
# Harness emission
# ---------------------------------------------------------------------------

_CASE_BLOCKS = {
    "python": (
        "    if not _deep_eq({call}, {expected}):\n"
        '        print("FAIL case={index}", file=sys.stderr)\n'
        "        sys.exit(1)"
    ),
    "cpp": (
        "    if (!deep_eq({call}, {expected})) {{\n"
        '        std::cerr << "FAIL case={index}" << std::endl;\n'
        "        return 1;\n"
        "    }}"
    ),
    "rust": (
        "    if !{call}.deep_eq(&{expected}) {{\n"
        '        eprintln!("FAIL case={index}");\n'
        "        std::process::exit(1);\n"
        "    }}"
    ),
}


def emit_harness(suite: TestSuite, target: str) -> HarnessSource:
    """Emit the complete harness for `suite` in `target`.

    Deterministic: identical (suite, target) yields byte-identical text.
    """
    if target not in SUPPORTED_TARGETS:
        raise UnmappableType(f"unsupported target language {target!r}")
    template = _load_template(target)
    signature = suite.entrypoint

    blocks: list[str] = []
    for index, case in enumerate(suite.cases):
        args = ", ".join(
            emit_literal(value, target, typ)
            for value, typ in zip(case.args, signature.param_types)
        )
        call = f"{signature.function_name}({args})"
        expected = emit_literal(case.expected, target, signature.return_type)
        blocks.append(
            _CASE_BLOCKS[target].format(call=call, expected=expected, index=index)
        )
    if not blocks and target == "python":
        blocks.append("    pass")

    source = template.replace("{{TOLERANCE}}", repr(suite.float_tolerance)).replace(
        "{{CASES}}", "\n".join(blocks)
    )
    if CANDIDATE_MARKER not in source:
        raise EmitError(f"template for {target} lost its candidate marker")
    if "{{" in source:
        raise EmitError(f"unfilled placeholder in {target} template")
    return HarnessSource(
        language=target,
        source_text=source,
        entrypoint=signature,
        suite_id=suite.suite_id,
    )


def assemble_program(harness: HarnessSource, candidate_source: str) -> str:
    """Splice the candidate where the harness expects its entrypoint."""
    lines = harness.source_text.splitlines()
    for i, line in enumerate(lines):
        if CANDIDATE_MARKER in line:
            lines[i] = candidate_source
            return "\n".join(lines) + "\n"
    raise EmitError("harness has no candidate marker")
