"""Bridge acceptance: schema round-trip, objective parity, update step."""

from __future__ import annotations

import pytest
import torch

from boottrans.orchestrator import (
    BatchItem,
    StepMetrics,
    TrainConfig,
    TrainingBatch,
    export_batch,
    run_training,
)
from boottrans.policy import ScriptedPolicy
from boottrans.rlmath import (
    CandidateRollout,
    ObjectiveConfig,
    TranslationGroup,
    group_advantages,
    grpo_objective,
)

from boottrans_bridge.model import TinyTokenLM
from boottrans_bridge.objective import (
    TokenizationMismatch,
    batch_objective,
    check_tokenization,
    current_and_reference_logprobs,
)
from boottrans_bridge.schema import SchemaError, load_batch
from boottrans_bridge.trainer import BridgeTrainer

from corpus import PROBLEMS, dataset_records, scripted_table
from simulated import SimulatedVerifier


def _handmade_item(suite_id: str, tokens_a, tokens_b, rewards=(1, 0), weight=1.0) -> BatchItem:
    candidates = tuple(
        CandidateRollout(
            tokens=tuple(toks),
            rollout_logprobs=tuple(-0.5 for _ in toks),
            reward=reward,
        )
        for toks, reward in zip((tokens_a, tokens_b), rewards)
    )
    advantages = tuple(group_advantages(list(rewards)))
    group = TranslationGroup(
        source_ref=suite_id,
        target="cpp",
        candidates=candidates,
        cumulative_reward=sum(rewards),
        sibling_reward=2,
        weight=weight,
        advantages=advantages,
    )
    return BatchItem(
        suite_id=suite_id,
        source_lang="python",
        target_lang="cpp",
        prompt=f"translate {suite_id}",
        group=group,
    )


def _handmade_batch(step: int = 1) -> TrainingBatch:
    items = [
        _handmade_item("alpha", [3, 7, 11], [100, 101]),
        _handmade_item("beta", [42, 5], [9, 8, 7, 6], rewards=(0, 1), weight=0.25),
    ]
    return TrainingBatch(step=step, items=items, metrics=StepMetrics(wall_time=1.5))


def _scripted_export(tmp_path):
    """A real export produced by the orchestrator with the scripted policy."""
    export_dir = tmp_path / "run"
    policy = ScriptedPolicy(table=scripted_table(), corruption_rate=0.4, seed=6)
    run_training(
        TrainConfig(num_steps=1, batch_size=3, group_size=2, rng_seed=11),
        dataset_records(PROBLEMS[:6]),
        policy,
        verifier=SimulatedVerifier(),
        export_dir=export_dir,
    )
    return export_dir / "batch_000001.jsonl"


class TestSchemaRoundTrip:
    def test_handmade_batch_round_trips_field_for_field(self, tmp_path):
        batch = _handmade_batch()
        path = tmp_path / "batch.jsonl"
        export_batch(batch, path)
        loaded = load_batch(path)
        assert loaded.step == batch.step
        assert len(loaded.items) == len(batch.items)
        for ours, theirs in zip(batch.items, loaded.items):
            assert theirs.suite_id == ours.suite_id
            assert theirs.source_lang == ours.source_lang
            assert theirs.target_lang == ours.target_lang
            assert theirs.weight == ours.weight
            assert theirs.prompt == ours.prompt
            for c_ours, c_theirs, advantage in zip(
                ours.group.candidates, theirs.candidates, ours.group.advantages
            ):
                assert c_theirs.tokens == c_ours.tokens
                assert c_theirs.rollout_logprobs == c_ours.rollout_logprobs
                assert c_theirs.reward == c_ours.reward
                assert c_theirs.advantage == advantage

    def test_orchestrator_export_parses(self, tmp_path):
        path = _scripted_export(tmp_path)
        batch = load_batch(path)
        assert batch.step == 1
        assert batch.items
        assert batch.group_size == 2
        for item in batch.items:
            assert 0.0 <= item.weight <= 1.0

    def test_schema_errors(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_batch(bad)
        bad.write_text('{"no_step": true}\n', encoding="utf-8")
        with pytest.raises(SchemaError):
            load_batch(bad)
        bad.write_text(
            '{"step": 1, "metrics": {}}\n{"step": 1, "suite_id": "x"}\n', encoding="utf-8"
        )
        with pytest.raises(SchemaError):
            load_batch(bad)

    def test_null_weight_rejected(self, tmp_path):
        import json

        record = {
            "step": 1,
            "suite_id": "x",
            "source_lang": "python",
            "target_lang": "cpp",
            "weight": None,
            "prompt": "p",
            "candidates": [
                {"tokens": [1], "rollout_logprobs": [-0.5], "reward": 1, "advantage": 0.0}
            ],
        }
        path = tmp_path / "nullw.jsonl"
        path.write_text(
            json.dumps({"step": 1, "metrics": {}}) + "\n" + json.dumps(record) + "\n"
        )
        with pytest.raises(SchemaError):
            load_batch(path)


class TestObjectiveParity:
    def test_matches_rlmath_on_fixture_batch(self, tmp_path):
        batch = _handmade_batch()
        path = tmp_path / "batch.jsonl"
        export_batch(batch, path)
        bridge_batch = load_batch(path)

        model = TinyTokenLM(vocab_size=128, seed=3)
        trainer = BridgeTrainer(model, learning_rate=1e-3)
        trainer.apply_update(bridge_batch)  # move the policy off the reference

        bridge_value = float(
            batch_objective(
                bridge_batch, trainer.model, trainer.reference, 0.2, 0.01
            ).item()
        )
        cur, ref = current_and_reference_logprobs(bridge_batch, trainer.model, trainer.reference)
        config = ObjectiveConfig(clip_epsilon=0.2, kl_coefficient=0.01, group_size=2)
        rlmath_value = grpo_objective([item.group for item in batch.items], cur, ref, config)
        assert bridge_value == pytest.approx(rlmath_value, abs=1e-6)

    def test_matches_rlmath_on_scripted_export(self, tmp_path):
        path = _scripted_export(tmp_path)
        bridge_batch = load_batch(path)
        model = TinyTokenLM(vocab_size=256, seed=1)
        trainer = BridgeTrainer(model, learning_rate=1e-3)
        trainer.apply_update(bridge_batch)

        bridge_value = float(
            batch_objective(bridge_batch, trainer.model, trainer.reference, 0.2, 0.01).item()
        )
        cur, ref = current_and_reference_logprobs(bridge_batch, trainer.model, trainer.reference)
        groups = []
        for item in bridge_batch.items:
            candidates = tuple(
                CandidateRollout(
                    tokens=c.tokens, rollout_logprobs=c.rollout_logprobs, reward=c.reward
                )
                for c in item.candidates
            )
            groups.append(
                TranslationGroup(
                    source_ref=item.suite_id,
                    target=item.target_lang,
                    candidates=candidates,
                    cumulative_reward=sum(c.reward for c in candidates),
                    sibling_reward=0,
                    weight=item.weight,
                    advantages=tuple(c.advantage for c in item.candidates),
                )
            )
        config = ObjectiveConfig(clip_epsilon=0.2, kl_coefficient=0.01, group_size=2)
        rlmath_value = grpo_objective(groups, cur, ref, config)
        assert bridge_value == pytest.approx(rlmath_value, abs=1e-6)


class TestUpdateStep:
    def test_zero_advantage_zero_beta_leaves_parameters_unchanged(self, tmp_path):
        # Both candidates rewarded: degenerate group, all-zero advantages.
        item = _handmade_item("flat", [3, 7], [9, 4], rewards=(1, 1), weight=0.5)
        batch = TrainingBatch(step=1, items=[item], metrics=StepMetrics())
        path = tmp_path / "flat.jsonl"
        export_batch(batch, path)

        model = TinyTokenLM(vocab_size=64, seed=9)
        before = [p.detach().clone() for p in model.parameters()]
        trainer = BridgeTrainer(model, learning_rate=1e-2, kl_coefficient=0.0)
        report = trainer.apply_update(path)
        assert report.grad_norm == pytest.approx(0.0, abs=1e-15)
        for old, new in zip(before, model.parameters()):
            assert torch.equal(old, new)
        assert report.objective_before == pytest.approx(0.0, abs=1e-12)
        assert report.objective_after == pytest.approx(0.0, abs=1e-12)

    def test_positive_advantage_candidate_logprob_strictly_increases(self, tmp_path):
        item = _handmade_item("push", [5, 6, 7], [50, 51], rewards=(1, 0), weight=1.0)
        batch = TrainingBatch(step=1, items=[item], metrics=StepMetrics())
        path = tmp_path / "push.jsonl"
        export_batch(batch, path)

        model = TinyTokenLM(vocab_size=64, seed=5)
        winner = [5, 6, 7]
        with torch.no_grad():
            before = float(model.sequence_logprobs(winner).sum().item())
        trainer = BridgeTrainer(model, learning_rate=1e-3)
        report = trainer.apply_update(path)
        with torch.no_grad():
            after = float(model.sequence_logprobs(winner).sum().item())
        assert after > before, (before, after)
        assert report.grad_norm > 0

    def test_objective_improves_over_repeated_steps(self, tmp_path):
        item = _handmade_item("climb", [5, 6, 7], [50, 51], rewards=(1, 0), weight=1.0)
        batch = TrainingBatch(step=1, items=[item], metrics=StepMetrics())
        path = tmp_path / "climb.jsonl"
        export_batch(batch, path)
        trainer = BridgeTrainer(TinyTokenLM(vocab_size=64, seed=5), learning_rate=1e-3)
        first = trainer.apply_update(path)
        for _ in range(5):
            last = trainer.apply_update(path)
        assert last.objective_after >= first.objective_before

    def test_tokenization_mismatch_detected(self, tmp_path):
        item = _handmade_item("big", [300], [2], rewards=(1, 0))
        batch = TrainingBatch(step=1, items=[item], metrics=StepMetrics())
        path = tmp_path / "big.jsonl"
        export_batch(batch, path)
        loaded = load_batch(path)
        model = TinyTokenLM(vocab_size=64)
        with pytest.raises(TokenizationMismatch):
            check_tokenization(loaded, model)
        trainer = BridgeTrainer(model)
        with pytest.raises(TokenizationMismatch):
            trainer.apply_update(path)


def test_criterion_13_bridge_acceptance(tmp_path):
    """Schema round-trip, objective parity with the orchestrator's math to
    1e-6, and a strict log-probability increase from one update step."""
    batch = _handmade_batch()
    path = tmp_path / "fixture.jsonl"
    export_batch(batch, path)
    loaded = load_batch(path)
    for ours, theirs in zip(batch.items, loaded.items):
        assert (theirs.suite_id, theirs.weight, theirs.prompt) == (
            ours.suite_id,
            ours.group.weight,
            ours.prompt,
        )
        for c_ours, c_theirs, advantage in zip(
            ours.group.candidates, theirs.candidates, ours.group.advantages
        ):
            assert (c_theirs.tokens, c_theirs.rollout_logprobs, c_theirs.reward) == (
                c_ours.tokens,
                c_ours.rollout_logprobs,
                c_ours.reward,
            )
            assert c_theirs.advantage == advantage

    trainer = BridgeTrainer(TinyTokenLM(vocab_size=128, seed=3), learning_rate=1e-3)
    trainer.apply_update(loaded)
    bridge_value = float(
        batch_objective(loaded, trainer.model, trainer.reference, 0.2, 0.01).item()
    )
    cur, ref = current_and_reference_logprobs(loaded, trainer.model, trainer.reference)
    config = ObjectiveConfig(clip_epsilon=0.2, kl_coefficient=0.01, group_size=2)
    rlmath_value = grpo_objective([item.group for item in batch.items], cur, ref, config)
    assert bridge_value == pytest.approx(rlmath_value, abs=1e-6)

    lone = TrainingBatch(
        step=2, items=[_handmade_item("lone", [5, 6, 7], [50, 51])], metrics=StepMetrics()
    )
    lone_path = tmp_path / "lone.jsonl"
    export_batch(lone, lone_path)
    model = TinyTokenLM(vocab_size=64, seed=5)
    with torch.no_grad():
        before = float(model.sequence_logprobs([5, 6, 7]).sum().item())
    BridgeTrainer(model, learning_rate=1e-3).apply_update(lone_path)
    with torch.no_grad():
        after = float(model.sequence_logprobs([5, 6, 7]).sum().item())
    assert after > before
    print(
        "[criterion 13] PASS: schema round-trip exact; bridge objective within "
        f"{abs(bridge_value - rlmath_value):.2e} of the orchestrator's math; "
        f"positive-advantage logprob {before:.4f} -> {after:.4f}"
    )


class TestModel:
    def test_sequence_logprobs_are_normalized(self):
        model = TinyTokenLM(vocab_size=32, seed=2)
        logprobs = model.sequence_logprobs([1, 2, 3])
        assert logprobs.shape == (3,)
        assert (logprobs <= 0).all()
        # Distribution at the first step sums to one.
        logits = model.step_logits(torch.tensor([model.bos]))
        assert float(torch.log_softmax(logits, -1).exp().sum().item()) == pytest.approx(1.0)

    def test_greedy_sampling_is_deterministic(self):
        model = TinyTokenLM(vocab_size=32, seed=2)
        a_tokens, a_lps = model.sample(max_tokens=8, temperature=0.0)
        b_tokens, b_lps = model.sample(max_tokens=8, temperature=0.0)
        assert a_tokens == b_tokens
        assert a_lps == b_lps

    def test_save_load_round_trip(self, tmp_path):
        model = TinyTokenLM(vocab_size=48, seed=7)
        path = tmp_path / "model.pt"
        model.save(path)
        twin = TinyTokenLM.load(path)
        with torch.no_grad():
            ours = model.sequence_logprobs([1, 2, 3])
            theirs = twin.sequence_logprobs([1, 2, 3])
        assert torch.equal(ours, theirs)

    def test_clone_is_detached(self):
        model = TinyTokenLM(vocab_size=16, seed=1)
        twin = model.clone()
        with torch.no_grad():
            next(model.parameters()).add_(1.0)
        assert not torch.equal(next(model.parameters()), next(twin.parameters()))
