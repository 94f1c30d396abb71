"""CLI subcommands, config schema, and run reports."""

from __future__ import annotations

import json

import pytest

from boottrans.cli import main
from boottrans.config import load_run_config, schema_defaults
from boottrans.report import load_metrics, summarize
from boottrans.testspec import load_dataset

from corpus import PROBLEMS, problem_by_name


class TestBuildSeed:
    def test_ten_clean_fixtures(self, scaffold_dir, tmp_path, capsys):
        out = tmp_path / "seed.jsonl"
        code = main(["build-seed", str(scaffold_dir), "--out", str(out)])
        assert code == 0
        records = load_dataset(out)
        assert len(records) == 10
        printed = capsys.readouterr().out
        assert "parsed=10" in printed
        assert "rejected=0" in printed

    def test_unsupported_scaffold_is_rejected(self, scaffold_dir, tmp_path, capsys):
        (scaffold_dir / "mystery.tests.py").write_text(
            "# entrypoint: mystery(int) -> int\nassert helper(mystery(1)) == 1\n"
        )
        (scaffold_dir / "mystery.solution.py").write_text("def mystery(x):\n    return x\n")
        out = tmp_path / "seed.jsonl"
        assert main(["build-seed", str(scaffold_dir), "--out", str(out)]) == 0
        assert len(load_dataset(out)) == 10
        captured = capsys.readouterr()
        assert "rejected=1" in captured.out

    def test_benchmark_collision_is_filtered(self, scaffold_dir, tmp_path, capsys):
        names = tmp_path / "names.txt"
        names.write_text("add_ints\n")
        out = tmp_path / "seed.jsonl"
        code = main(
            ["build-seed", str(scaffold_dir), "--benchmark-names", str(names), "--out", str(out)]
        )
        assert code == 0
        records = load_dataset(out)
        assert len(records) == 9
        assert all(r.suite.suite_id != "add_ints" for r in records)
        assert "leak_filtered=1" in capsys.readouterr().out

    def test_empty_output_exits_nonzero(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        out = tmp_path / "seed.jsonl"
        assert main(["build-seed", str(empty), "--out", str(out)]) == 1
        assert not out.exists()


class TestTranspileCommand:
    def test_writes_harness_files(self, scaffold_dir, tmp_path):
        dataset = tmp_path / "seed.jsonl"
        main(["build-seed", str(scaffold_dir), "--out", str(dataset)])
        out_dir = tmp_path / "harnesses"
        code = main(["transpile", "--dataset", str(dataset), "--out-dir", str(out_dir)])
        assert code == 0
        files = sorted(p.name for p in out_dir.iterdir())
        assert len(files) == 30  # 10 suites x 3 languages
        assert "add_ints.cpp.harness" in files
        assert "add_ints.rust.harness" in files

    def test_fraction_subsamples_cases(self, scaffold_dir, tmp_path):
        dataset = tmp_path / "seed.jsonl"
        main(["build-seed", str(scaffold_dir), "--out", str(dataset)])
        out_dir = tmp_path / "h50"
        main(
            [
                "transpile",
                "--dataset",
                str(dataset),
                "--out-dir",
                str(out_dir),
                "--fraction",
                "0.5",
                "--target",
                "python",
            ]
        )
        text = (out_dir / "add_ints@0.5.python.harness").read_text()
        assert text.count("FAIL case=") == 2  # 4 cases halved


def _write_config(tmp_path, scripted_table_file, **train_overrides) -> str:
    config = {
        "train": {
            "num_steps": 1,
            "batch_size": 2,
            "group_size": 2,
            "parallelism": 4,
            **train_overrides,
        },
        "policy": {"kind": "scripted", "scripted_table": str(scripted_table_file)},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


class TestTrainCommand:
    def test_small_real_run(self, tmp_path, scripted_table_file, capsys):
        from boottrans.testspec import write_dataset
        from corpus import dataset_records

        dataset = tmp_path / "seed.jsonl"
        write_dataset(dataset_records(PROBLEMS[:2]), dataset)
        config = _write_config(tmp_path, scripted_table_file)
        export_dir = tmp_path / "run"
        code = main(
            [
                "train",
                "--config",
                config,
                "--dataset",
                str(dataset),
                "--export-dir",
                str(export_dir),
            ]
        )
        assert code == 0
        assert (export_dir / "batch_000001.jsonl").exists()
        assert (export_dir / "metrics.jsonl").exists()
        printed = capsys.readouterr().out
        assert "python->cpp: reward_rate=1.0000" in printed
        assert "python->rust: reward_rate=1.0000" in printed


class TestEvalCommand:
    def test_single_direction(self, tmp_path, scripted_table_file, capsys):
        from boottrans.testspec import write_dataset
        from corpus import benchmark_records

        bench = tmp_path / "bench.jsonl"
        write_dataset(benchmark_records(PROBLEMS[:2]), bench)
        config = _write_config(tmp_path, scripted_table_file)
        out_dir = tmp_path / "eval"
        code = main(
            [
                "eval",
                "--config",
                config,
                "--benchmark",
                str(bench),
                "--directions",
                "python->cpp",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert "python->cpp" in printed
        assert "1.0000" in printed
        assert (out_dir / "directions.jsonl").exists()
        assert (out_dir / "table.txt").exists()

    def test_bad_direction_spec(self, tmp_path, scripted_table_file):
        from boottrans.testspec import write_dataset
        from corpus import benchmark_records

        bench = tmp_path / "bench.jsonl"
        write_dataset(benchmark_records(PROBLEMS[:1]), bench)
        config = _write_config(tmp_path, scripted_table_file)
        assert (
            main(["eval", "--config", config, "--benchmark", str(bench), "--directions", "xyz"])
            == 1
        )


class TestReportCommand:
    def _run_dir(self, tmp_path) -> str:
        from boottrans.orchestrator import TrainConfig, run_training
        from boottrans.policy import ScriptedPolicy
        from corpus import dataset_records, scripted_table
        from simulated import SimulatedVerifier

        export_dir = tmp_path / "run"
        run_training(
            TrainConfig(num_steps=10, batch_size=4, group_size=2, rng_seed=5),
            dataset_records(PROBLEMS[:6]),
            ScriptedPolicy(table=scripted_table(), corruption_rate=0.3, seed=2),
            verifier=SimulatedVerifier(),
            export_dir=export_dir,
        )
        return str(export_dir)

    def test_plots_and_summary(self, tmp_path, capsys):
        run_dir = self._run_dir(tmp_path)
        code = main(["report", run_dir])
        assert code == 0
        report_dir = tmp_path / "run" / "report"
        for name in ("reward_rates.png", "pool_sizes.png", "skip_rate.png", "direction_matrix.png"):
            assert (report_dir / name).exists(), name
        summary = json.loads((report_dir / "summary.json").read_text())
        assert summary["steps"] == 10

    def test_summary_matches_raw_metrics_exactly(self, tmp_path):
        run_dir = self._run_dir(tmp_path)
        records = load_metrics(run_dir)
        summary = summarize(records)
        for direction, mean_rate in summary["mean_reward_rate"].items():
            values = [r["reward_rate"][direction] for r in records if direction in r["reward_rate"]]
            assert abs(mean_rate - sum(values) / len(values)) <= 1e-12
        recomputed_avg = sum(summary["mean_reward_rate"].values()) / len(
            summary["mean_reward_rate"]
        )
        assert abs(summary["direction_average"] - recomputed_avg) <= 1e-12

    def test_empty_run_dir_exits_nonzero(self, tmp_path, capsys):
        empty = tmp_path / "nothing"
        empty.mkdir()
        assert main(["report", str(empty)]) == 1
        assert "metrics" in capsys.readouterr().err


class TestPoolsCommand:
    def test_inspect_snapshot(self, tmp_path, capsys):
        from boottrans.pools import CodeUnit, PoolEntry, ORIGIN_EXPLORED, export_pool

        problem = problem_by_name("add_ints")
        entries = [
            PoolEntry(
                code=CodeUnit(
                    source_text=problem.refs["cpp"],
                    language="cpp",
                    entrypoint=problem.signature,
                ),
                suite_ref="add_ints",
                origin=ORIGIN_EXPLORED,
                seed_ancestor="add_ints",
                inserted_step=3,
            )
        ]
        snapshot = tmp_path / "pool.jsonl"
        export_pool(entries, snapshot)
        assert main(["pools", "inspect", str(snapshot)]) == 0
        printed = capsys.readouterr().out
        assert "size=1" in printed
        assert '"cpp": 1' in printed


class TestConfigSchema:
    def test_defaults_match_standard_hyperparameters(self):
        defaults = schema_defaults()
        assert defaults["train"]["group_size"] == 8
        assert defaults["train"]["batch_size"] == 256
        assert defaults["train"]["clip_epsilon"] == 0.2
        assert defaults["train"]["kl_coefficient"] == 0.01
        assert defaults["train"]["learning_rate"] == 1e-6
        assert defaults["evaluation"]["decode_mode"] == "greedy"

    def test_train_config_defaults_agree_with_schema(self):
        from boottrans.orchestrator import TrainConfig

        defaults = schema_defaults()["train"]
        config = TrainConfig()
        assert config.batch_size == defaults["batch_size"]
        assert config.group_size == defaults["group_size"]
        assert config.clip_epsilon == defaults["clip_epsilon"]
        assert config.kl_coefficient == defaults["kl_coefficient"]
        assert config.learning_rate == defaults["learning_rate"]

    def test_unknown_keys_rejected(self, tmp_path):
        import jsonschema

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"train": {"nonsense": 1}}))
        with pytest.raises(jsonschema.ValidationError):
            load_run_config(bad)

    def test_capacity_instantiation_from_defaults(self):
        from boottrans.pools import exploration_capacity

        defaults = schema_defaults()
        members = defaults["languages"]["members"]
        batch = defaults["train"]["batch_size"]
        assert exploration_capacity(len(members), batch) == 512

    def test_loading_without_file_gives_defaults(self):
        config = load_run_config(None)
        assert config.train.batch_size == 256
        assert config.train.languages.pivot == "python"
        assert config.eval_decode_mode == "greedy"


class TestHelp:
    def test_help_lists_documented_flags(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        top = capsys.readouterr().out
        for sub in ("build-seed", "transpile", "train", "eval", "report", "pools"):
            assert sub in top
        for sub, flags in {
            "train": ["--config", "--export-dir", "--policy", "--seed", "--fraction"],
            "eval": ["--directions", "--fraction"],
        }.items():
            with pytest.raises(SystemExit):
                main([sub, "--help"])
            text = capsys.readouterr().out
            for flag in flags:
                assert flag in text, (sub, flag)
