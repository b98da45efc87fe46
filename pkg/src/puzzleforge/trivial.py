"""Removal of puzzles solvable by a fixed candidate-value enumeration.

The candidate sets are small finite pools per input type; a puzzle whose
verifier returns True on any of them teaches nothing and is dropped.
Boolean-input puzzles are trivial unconditionally (both inputs can always
be tried).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .judge import ProbeResult, SandboxBackend, SandboxJob, static_screen
from .model import Puzzle, TypeHint

INT_CANDIDATES = tuple(range(-10, 101))
FLOAT_CANDIDATES = (-100.0, -10.0, -2.0, -1.0, -0.5, -0.1, 0.0,
                    0.1, 0.5, 1.0, 2.0, 10.0, 100.0)
STR_CANDIDATES = ("cat", "dog", "aa", "ab", "foo", "bar", "baz", "")

LIST_INT_ITEMS = tuple(range(-3, 4))
LIST_FLOAT_ITEMS = (-1.0, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0)
LIST_STR_ITEMS = ("a", "b", "foo", "bar", "baz")
LIST_BOOL_ITEMS = (True, False)

MAX_LIST_LEN = 3
CANDIDATE_CAP = 10_000


class UnsupportedDepth(ValueError):
    """Nested-list enumeration would exceed the per-puzzle candidate cap."""


def _element_pool(element: TypeHint) -> list:
    if element.kind == "int":
        return list(LIST_INT_ITEMS)
    if element.kind == "float":
        return list(LIST_FLOAT_ITEMS)
    if element.kind == "str":
        return list(LIST_STR_ITEMS)
    if element.kind == "bool":
        return list(LIST_BOOL_ITEMS)
    assert element.is_list and element.inner is not None
    return _list_values(element.inner)


def _list_count(element: TypeHint) -> int:
    if element.is_list:
        assert element.inner is not None
        size = _list_count(element.inner)
    else:
        size = len(_element_pool(element))
    total = sum(size ** n for n in range(MAX_LIST_LEN + 1))
    if total > CANDIDATE_CAP:
        raise UnsupportedDepth(
            f"{total} list candidates exceed the cap of {CANDIDATE_CAP}")
    return total


def _list_values(element: TypeHint) -> list:
    _list_count(element)
    pool = _element_pool(element)
    values: list = []
    for length in range(MAX_LIST_LEN + 1):
        for combo in itertools.product(pool, repeat=length):
            values.append(list(combo))
    return values


def candidate_values(t: TypeHint) -> list[str]:
    """Ordered literal texts to try for an input of type ``t``.

    Ints cover -10..100, floats/strings their fixed pools, lists all
    length-0..3 tuples over per-element pools (recursing for nested lists).
    Raises UnsupportedDepth when a nested enumeration would exceed the cap.
    """
    if t.kind == "int":
        return [str(v) for v in INT_CANDIDATES]
    if t.kind == "float":
        return [repr(v) for v in FLOAT_CANDIDATES]
    if t.kind == "str":
        return [repr(v) for v in STR_CANDIDATES]
    if t.kind == "bool":
        return ["True", "False"]
    assert t.is_list and t.inner is not None
    return [repr(v) for v in _list_values(t.inner)]


@dataclass(frozen=True)
class TrivialityResult:
    trivial: bool
    witness: str | None = None
    detail: str = ""


def is_trivial(puzzle: Puzzle, backend: SandboxBackend,
               timeout_ms: int = 1000) -> TrivialityResult:
    """Probe the verifier over the candidate pool for its input type.

    Trivial iff some candidate makes it return the boolean True; the first
    such candidate (in the fixed pool order) is recorded as the witness.
    Candidates that error or time out count as non-witnesses. Puzzles whose
    enumeration exceeds the cap are conservatively kept (never marked
    trivial), as are puzzles that fail the static screen (they cannot be
    probed and will die at judging instead).
    """
    if puzzle.input_type.kind == "bool":
        return TrivialityResult(True, None, "boolean input")
    try:
        values = candidate_values(puzzle.input_type)
    except UnsupportedDepth as exc:
        return TrivialityResult(False, None, str(exc))
    if static_screen(puzzle.f_src) is not None:
        return TrivialityResult(False, None, "screened source not probed")
    job = SandboxJob.probe(puzzle.f_src, tuple(values), timeout_ms)
    result = backend.run(job)
    assert isinstance(result, ProbeResult)
    if result.witness is not None:
        return TrivialityResult(True, result.witness)
    return TrivialityResult(False, None, result.detail)
