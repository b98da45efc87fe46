from __future__ import annotations

import sys

import pytest

from puzzleforge.judge import LocalBackend, parse_source
from puzzleforge.model import Origin, Puzzle
from puzzleforge.validator import validate_puzzle

FIG1_F = "def f(c: int):\n    return c + 50000 == 174653"
FIG1_G = "def g():\n    return 174653 - 50000"

# Scripted worker for supervisor tests: behavior keyed on the solution text.
FAKE_WORKER_SRC = """
import json, os, sys, time
for line in sys.stdin:
    req = json.loads(line)
    g = req.get("g", "")
    if "SLEEP" in g:
        time.sleep(10)
    if "CRASH" in g:
        sys.exit(1)
    detail = os.environ.get("PYTHONHASHSEED", "") if "HASHSEED" in g else ""
    print(json.dumps({"ok": True, "verdict": "Correct",
                      "detail": detail, "wall_ms": 1}), flush=True)
"""

FAKE_WORKER_CMD = (sys.executable, "-c", FAKE_WORKER_SRC)


def make_puzzle(src: str, origin: Origin | None = None,
                domain_tag: str | None = None) -> Puzzle:
    report = parse_source(src)
    outcome = validate_puzzle(src, report, origin or Origin.human_train(),
                              domain_tag)
    assert isinstance(outcome, Puzzle), f"fixture source rejected: {outcome}"
    return outcome


@pytest.fixture
def local_backend():
    return LocalBackend()


@pytest.fixture
def fig1_puzzle():
    return make_puzzle(FIG1_F)
