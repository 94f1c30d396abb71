from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import PROBLEMS, Problem  # noqa: E402


def write_scaffold_pair(directory: Path, problem: Problem) -> None:
    (directory / f"{problem.name}.tests.py").write_text(problem.scaffold, encoding="utf-8")
    (directory / f"{problem.name}.solution.py").write_text(
        problem.refs["python"], encoding="utf-8"
    )


@pytest.fixture()
def scaffold_dir(tmp_path) -> Path:
    directory = tmp_path / "scaffolds"
    directory.mkdir()
    for problem in PROBLEMS[:10]:
        write_scaffold_pair(directory, problem)
    return directory


@pytest.fixture()
def scripted_table_file(tmp_path) -> Path:
    from corpus import LANGS

    table: dict[str, dict[str, str]] = {lang: {} for lang in LANGS}
    for problem in PROBLEMS:
        for lang in LANGS:
            table[lang][problem.name] = problem.refs[lang]
    path = tmp_path / "scripted_table.json"
    path.write_text(json.dumps(table), encoding="utf-8")
    return path
