"""Prompt rendering, fence extraction, scripted and HTTP policies."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boottrans.policy import (
    Completion,
    DecodeParams,
    EVAL_DECODE,
    GenerationRequest,
    HttpPolicy,
    PolicyUnavailable,
    ProtocolError,
    ScriptedPolicy,
    extract_code,
    render_prompt,
)
from boottrans.pools import CodeUnit
from boottrans.transpiler import render_signature

from corpus import problem_by_name, scripted_table

ADD = problem_by_name("add_ints")
ADD_UNIT = CodeUnit(
    source_text=ADD.refs["python"], language="python", entrypoint=ADD.signature
)


def _request(target: str, n: int = 4, decode: DecodeParams | None = None) -> GenerationRequest:
    return GenerationRequest(
        source=ADD_UNIT,
        target=target,
        target_signature=render_signature(ADD.signature, target),
        num_candidates=n,
        decode=decode or DecodeParams(),
    )


class TestRenderPrompt:
    def test_matches_hand_written_golden(self):
        # Golden assembled by hand from the fixed template.
        expected = (
            "Please translate source python code to target cpp code:\n"
            "```python\n"
            "def add_ints(a: int, b: int) -> int:\n"
            "    return a + b\n"
            "```\n"
            "The translated cpp code should be:\n"
            "```cpp\n"
            "int64_t add_ints(int64_t arg0, int64_t arg1)```"
        )
        prompt = render_prompt(ADD_UNIT, "cpp", render_signature(ADD.signature, "cpp"))
        assert prompt == expected

    def test_both_fences_present(self):
        prompt = render_prompt(ADD_UNIT, "rust", "fn add_ints(a: i64, b: i64) -> i64")
        assert "```python\n" in prompt
        assert "```rust\n" in prompt

    def test_empty_signature_block_is_legal(self):
        prompt = render_prompt(ADD_UNIT, "rust", "")
        assert prompt.endswith("```rust\n```")

    def test_golden_fixture_renderings(self):
        goldens = {
            ("cpp", "python"): (
                "Please translate source cpp code to target python code:\n"
                "```cpp\n"
                "int64_t add_ints(int64_t a, int64_t b) { return a + b; }\n"
                "```\n"
                "The translated python code should be:\n"
                "```python\n"
                "def add_ints(arg0: int, arg1: int) -> int:```"
            ),
            ("rust", "cpp"): (
                "Please translate source rust code to target cpp code:\n"
                "```rust\n"
                "fn add_ints(a: i64, b: i64) -> i64 { a + b }\n"
                "```\n"
                "The translated cpp code should be:\n"
                "```cpp\n"
                "int64_t add_ints(int64_t arg0, int64_t arg1)```"
            ),
        }
        for (src, tgt), expected in goldens.items():
            unit = CodeUnit(
                source_text=ADD.refs[src], language=src, entrypoint=ADD.signature
            )
            assert render_prompt(unit, tgt, render_signature(ADD.signature, tgt)) == expected


class TestExtractCode:
    def test_tagged_fence(self):
        text = "Here you go:\n```cpp\nint64_t f() { return 1; }\n```\nDone."
        assert extract_code(text, "cpp") == "int64_t f() { return 1; }"

    def test_untagged_fence_accepted(self):
        text = "```\nfn f() -> i64 { 1 }\n```"
        assert extract_code(text, "rust") == "fn f() -> i64 { 1 }"

    def test_other_language_fence_skipped(self):
        text = "```python\npass\n```\n```rust\nfn f() {}\n```"
        assert extract_code(text, "rust") == "fn f() {}"

    def test_unterminated_fence_returns_rest(self):
        text = "```cpp\nint64_t f() { return 1; }"
        assert extract_code(text, "cpp") == "int64_t f() { return 1; }"

    def test_no_fence_returns_unchanged(self):
        code = "def f():\n    return 1"
        assert extract_code(code, "python") == code

    @given(st.text(max_size=300))
    @settings(max_examples=150)
    def test_idempotent(self, text):
        once = extract_code(text, "cpp")
        assert extract_code(once, "cpp") == once


class TestScriptedPolicy:
    def test_table_lookup_yields_identical_correct_candidates(self):
        policy = ScriptedPolicy(table=scripted_table())
        completions = policy.generate(_request("cpp", n=4))
        assert len(completions) == 4
        assert {c.source_text for c in completions} == {ADD.refs["cpp"].rstrip("\n")}

    def test_extraction_strips_fences(self):
        policy = ScriptedPolicy(table=scripted_table())
        completion = policy.generate(_request("rust", n=1))[0]
        assert completion.text.startswith("```rust\n")
        assert completion.source_text == ADD.refs["rust"].rstrip("\n")

    def test_corruption_is_deterministic(self):
        policy_a = ScriptedPolicy(table=scripted_table(), corruption_rate=0.5, seed=9)
        policy_b = ScriptedPolicy(table=scripted_table(), corruption_rate=0.5, seed=9)
        run_a = policy_a.generate(_request("cpp", n=8))
        run_b = policy_b.generate(_request("cpp", n=8))
        corrupted_a = [i for i, c in enumerate(run_a) if "@@corrupted@@" in c.source_text]
        corrupted_b = [i for i, c in enumerate(run_b) if "@@corrupted@@" in c.source_text]
        assert corrupted_a == corrupted_b
        assert 0 < len(corrupted_a) < 8

    def test_different_seed_changes_corruption(self):
        runs = set()
        for seed in range(6):
            policy = ScriptedPolicy(table=scripted_table(), corruption_rate=0.5, seed=seed)
            completions = policy.generate(_request("cpp", n=8))
            runs.add(tuple("@@corrupted@@" in c.source_text for c in completions))
        assert len(runs) > 1

    def test_fail_names_always_corrupt(self):
        policy = ScriptedPolicy(table=scripted_table(), fail_names=frozenset({"add_ints"}))
        completions = policy.generate(_request("cpp", n=3))
        assert all("@@corrupted@@" in c.source_text for c in completions)

    def test_unknown_entry_is_corrupted(self):
        policy = ScriptedPolicy(table={})
        completions = policy.generate(_request("cpp", n=2))
        assert all("@@corrupted@@" in c.source_text for c in completions)

    def test_tokens_align_with_logprobs(self):
        policy = ScriptedPolicy(table=scripted_table())
        for completion in policy.generate(_request("rust", n=4)):
            assert len(completion.tokens) == len(completion.logprobs) >= 1
            assert all(lp <= 0 for lp in completion.logprobs)

    def test_pure_function_of_request_and_seed(self):
        policy = ScriptedPolicy(table=scripted_table(), corruption_rate=0.3, seed=4)
        first = policy.generate(_request("cpp", n=6))
        second = policy.generate(_request("cpp", n=6))
        assert first == second


class _StubHandler(BaseHTTPRequestHandler):
    recorded: dict = {}
    last_request: dict = {}

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        type(self).last_request = json.loads(self.rfile.read(length))
        body = json.dumps(self.recorded).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/completions"
    server.shutdown()


class TestHttpPolicy:
    def test_candidates_match_recording(self, stub_server):
        recorded_text = f"```cpp\n{ADD.refs['cpp']}```"
        _StubHandler.recorded = {
            "choices": [
                {"text": recorded_text, "tokens": [5, 6, 7], "logprobs": [-0.1, -0.2, -0.3]}
            ]
        }
        policy = HttpPolicy(endpoint_url=stub_server)
        completions = policy.generate(_request("cpp", n=1))
        assert completions[0].text == recorded_text
        assert completions[0].source_text == ADD.refs["cpp"].rstrip("\n")
        assert completions[0].tokens == (5, 6, 7)
        assert completions[0].logprobs == (-0.1, -0.2, -0.3)

    def test_request_carries_decode_params(self, stub_server):
        _StubHandler.recorded = {
            "choices": [{"text": "x", "tokens": [1], "logprobs": [-1.0]}]
        }
        policy = HttpPolicy(endpoint_url=stub_server)
        policy.generate(_request("cpp", n=1, decode=EVAL_DECODE))
        sent = _StubHandler.last_request
        assert sent["n"] == 1
        assert sent["temperature"] == 0.0
        assert sent["logprobs"] is True
        assert "Please translate source python code to target cpp code:" in sent["prompt"]

    def test_missing_logprobs_is_protocol_error(self, stub_server):
        _StubHandler.recorded = {"choices": [{"text": "x", "tokens": [1], "logprobs": None}]}
        with pytest.raises(ProtocolError):
            HttpPolicy(endpoint_url=stub_server).generate(_request("cpp", n=1))

    def test_wrong_candidate_count_is_protocol_error(self, stub_server):
        _StubHandler.recorded = {"choices": [{"text": "x", "tokens": [1], "logprobs": [-1.0]}]}
        with pytest.raises(ProtocolError):
            HttpPolicy(endpoint_url=stub_server).generate(_request("cpp", n=2))

    def test_unreachable_endpoint_is_policy_unavailable(self):
        policy = HttpPolicy(endpoint_url="http://127.0.0.1:1/v1/completions", request_timeout=0.5)
        with pytest.raises(PolicyUnavailable):
            policy.generate(_request("cpp", n=1))

    def test_empty_completion_yields_flagged_rollout(self, stub_server):
        _StubHandler.recorded = {"choices": [{"text": "", "tokens": [], "logprobs": []}]}
        completions = HttpPolicy(endpoint_url=stub_server).generate(_request("cpp", n=1))
        assert completions[0].source_text == "@@empty-completion@@"
        assert len(completions[0].tokens) == len(completions[0].logprobs) == 1


class TestValidation:
    def test_same_language_request_rejected(self):
        with pytest.raises(ValueError):
            GenerationRequest(
                source=ADD_UNIT, target="python", target_signature="", num_candidates=1
            )

    def test_decode_params_validated(self):
        with pytest.raises(ValueError):
            DecodeParams(mode="sample", temperature=0.0)
        with pytest.raises(ValueError):
            DecodeParams(mode="sample", top_p=0.0)
        with pytest.raises(ValueError):
            DecodeParams(mode="beam")

    def test_completion_alignment_enforced(self):
        with pytest.raises(ValueError):
            Completion(text="x", source_text="x", tokens=(1, 2), logprobs=(-0.5,))
