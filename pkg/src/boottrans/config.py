"""Run configuration: JSON file validated against the checked-in schema.

Every key is documented (with its default) in ``data/config_schema.json``;
an absent section falls back to the schema defaults, which carry the
standard hyperparameters (batch 256, group 8, clip 0.2, KL 0.01, learning
rate 1e-6, greedy evaluation decoding).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .languages import LanguageSet
from .orchestrator import TrainConfig
from .policy import DecodeParams, HttpPolicy, ScriptedPolicy
from .sandbox import ExecutionLimits


def load_schema() -> dict:
    return json.loads(
        resources.files("boottrans").joinpath("data/config_schema.json").read_text("utf-8")
    )


def schema_defaults(schema: dict | None = None) -> dict:
    """Materialize the default value of every documented key."""
    schema = schema if schema is not None else load_schema()

    def walk(node: dict):
        if "default" in node and "properties" not in node:
            return node["default"]
        if node.get("type") == "object":
            return {key: walk(sub) for key, sub in node.get("properties", {}).items()}
        return node.get("default")

    return {key: walk(sub) for key, sub in schema["properties"].items()}


def _merge(defaults: dict, overrides: dict) -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass
class RunConfig:
    train: TrainConfig
    policy_config: dict
    dataset_path: str
    export_dir: str
    eval_decode_mode: str

    def build_policy(self):
        cfg = self.policy_config
        if cfg["kind"] == "http":
            if not cfg["endpoint_url"]:
                raise ValueError("http policy requires endpoint_url")
            return HttpPolicy(
                endpoint_url=cfg["endpoint_url"],
                auth_token_env_var=cfg["auth_token_env_var"] or None,
            )
        table: dict[tuple[str, str], str] = {}
        if cfg["scripted_table"]:
            raw = json.loads(Path(cfg["scripted_table"]).read_text(encoding="utf-8"))
            for target, translations in raw.items():
                for name, source in translations.items():
                    table[(target, name)] = source
        return ScriptedPolicy(
            table=table, corruption_rate=cfg["corruption_rate"], seed=cfg["seed"]
        )


def load_run_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Load, validate, and default-fill a run configuration."""
    schema = load_schema()
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    jsonschema.validate(raw, schema)
    merged = _merge(schema_defaults(schema), raw)
    if overrides:
        merged = _merge(merged, overrides)

    languages = LanguageSet(
        members=tuple(merged["languages"]["members"]), pivot=merged["languages"]["pivot"]
    )
    limits = ExecutionLimits(
        compile_timeout=merged["limits"]["compile_timeout"],
        run_timeout=merged["limits"]["run_timeout"],
        memory_cap=merged["limits"]["memory_cap"],
        output_cap=merged["limits"]["output_cap"],
    )
    decode_cfg = merged["policy"]["decode"]
    decode = DecodeParams(
        mode=decode_cfg["mode"],
        temperature=decode_cfg["temperature"],
        top_p=decode_cfg["top_p"],
        max_tokens=decode_cfg["max_tokens"],
    )
    t = merged["train"]
    train = TrainConfig(
        num_steps=t["num_steps"],
        batch_size=t["batch_size"],
        group_size=t["group_size"],
        clip_epsilon=t["clip_epsilon"],
        kl_coefficient=t["kl_coefficient"],
        learning_rate=t["learning_rate"],
        languages=languages,
        limits=limits,
        rng_seed=t["rng_seed"],
        parallelism=t["parallelism"],
        decode=decode,
        batch_mean=t["batch_mean"],
        evaluate_objective=t["evaluate_objective"],
        checkpoint_interval=t["checkpoint_interval"],
    )
    return RunConfig(
        train=train,
        policy_config=merged["policy"],
        dataset_path=merged["paths"]["dataset"],
        export_dir=merged["paths"]["export_dir"],
        eval_decode_mode=merged["evaluation"]["decode_mode"],
    )
