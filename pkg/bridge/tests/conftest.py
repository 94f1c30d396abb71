from __future__ import annotations

import sys
from pathlib import Path

# The primary package's fixture corpus and simulated verifier, used only to
# build realistic export files; runtime consumption stays at the file and
# HTTP boundaries.
PRIMARY_TESTS = Path(__file__).resolve().parents[2] / "tests"
sys.path.insert(0, str(PRIMARY_TESTS))
