"""Shared value types for the puzzle self-play toolkit.

A puzzle is a verifier function ``f`` taking one required, type-annotated
argument; a solution is a function ``g`` whose output makes ``f`` return the
boolean True. All types here are immutable values, safe to share across
worker threads and processes.
"""

from __future__ import annotations

import hashlib
import io
import re
import tokenize
from dataclasses import dataclass, field
from enum import Enum

GENERATION_STUB = "def f("

_LEAF_KINDS = ("bool", "int", "float", "str")

_TOP_LEVEL_DEF_RE = re.compile(r"^def\s+([A-Za-z_]\w*)\s*\(", re.MULTILINE)


@dataclass(frozen=True)
class TypeHint:
    """Allowed input type: bool, int, float, str, or List of these, nested freely."""

    kind: str
    inner: TypeHint | None = None

    def __post_init__(self) -> None:
        if self.kind == "list":
            if self.inner is None:
                raise ValueError("list hint requires an element type")
        elif self.kind in _LEAF_KINDS:
            if self.inner is not None:
                raise ValueError(f"{self.kind} hint takes no element type")
        else:
            raise ValueError(f"unknown type hint kind: {self.kind!r}")

    @property
    def is_list(self) -> bool:
        return self.kind == "list"

    def render(self) -> str:
        """Canonical annotation text, e.g. ``List[List[int]]``."""
        if self.is_list:
            assert self.inner is not None
            return f"List[{self.inner.render()}]"
        return self.kind


BOOL = TypeHint("bool")
INT = TypeHint("int")
FLOAT = TypeHint("float")
STR = TypeHint("str")


def list_of(inner: TypeHint) -> TypeHint:
    return TypeHint("list", inner)


def rename_function(src: str, old: str, new: str) -> str:
    """Rename every whole-word occurrence of ``old`` in ``src`` (def line and body)."""
    if old == new:
        return src
    return re.sub(rf"\b{re.escape(old)}\b", new, src)


def _strip_comments(src: str) -> str:
    """Drop ``#`` comments using the tokenizer; return src unchanged if unlexable."""
    comments: list[tuple[int, int]] = []
    try:
        for tok in tokenize.generate_tokens(io.StringIO(src).readline):
            if tok.type == tokenize.COMMENT:
                comments.append((tok.start[0], tok.start[1]))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        return src
    if not comments:
        return src
    lines = src.splitlines(keepends=True)
    for row, col in comments:
        line = lines[row - 1]
        ending = "\n" if line.endswith("\n") else ""
        lines[row - 1] = line[:col] + ending
    return "".join(lines)


def canonical_key(f_src: str) -> str:
    """Deduplication key for a puzzle source.

    Comments are stripped, trailing whitespace removed, blank lines dropped,
    and the verifier's name replaced by the fixed placeholder ``f``, so
    verbatim repeats that differ only in name or comment noise collide.
    Unlexable text is keyed after the whitespace normalization alone.
    """
    text = _strip_comments(f_src)
    lines = [line.rstrip() for line in text.splitlines()]
    text = "\n".join(line for line in lines if line)
    match = _TOP_LEVEL_DEF_RE.search(text)
    if match:
        text = rename_function(text, match.group(1), "f")
    return text


def puzzle_id(f_src: str) -> str:
    """Stable content id: hash of the canonical key, so merges are deterministic."""
    key = canonical_key(f_src)
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Origin:
    """Where a puzzle came from: the human train/test splits or a synthesis round."""

    kind: str
    iteration: int | None = None
    model_tag: str | None = None

    def __post_init__(self) -> None:
        if self.kind in ("human-train", "human-test"):
            if self.iteration is not None or self.model_tag is not None:
                raise ValueError("human origins carry no iteration or model tag")
        elif self.kind == "synthetic":
            if self.iteration is None or self.iteration < 1:
                raise ValueError("synthetic origin requires iteration >= 1")
            if not self.model_tag:
                raise ValueError("synthetic origin requires a model tag")
        else:
            raise ValueError(f"unknown origin kind: {self.kind!r}")

    @classmethod
    def human_train(cls) -> Origin:
        return cls("human-train")

    @classmethod
    def human_test(cls) -> Origin:
        return cls("human-test")

    @classmethod
    def synthetic(cls, iteration: int, model_tag: str) -> Origin:
        return cls("synthetic", iteration=iteration, model_tag=model_tag)


@dataclass(frozen=True)
class Puzzle:
    """A validated verifier function plus its parsed signature facts."""

    id: str
    f_src: str
    fn_name: str
    input_type: TypeHint
    extra_defaults_src: str
    origin: Origin
    domain_tag: str | None = None
    ast_node_count: int | None = None

    def __post_init__(self) -> None:
        if self.ast_node_count is not None and self.ast_node_count < 1:
            raise ValueError("ast_node_count must be >= 1 when known")


@dataclass(frozen=True)
class GenMeta:
    model_tag: str
    temperature: float
    attempt_index: int


@dataclass(frozen=True)
class Solution:
    """Candidate solution source plus the sampling metadata that produced it."""

    g_src: str
    char_length: int
    gen_meta: GenMeta

    def __post_init__(self) -> None:
        if self.char_length != len(self.g_src):
            raise ValueError("char_length must equal len(g_src)")

    @classmethod
    def from_src(cls, g_src: str, gen_meta: GenMeta) -> Solution:
        return cls(g_src=g_src, char_length=len(g_src), gen_meta=gen_meta)


class VerdictKind(str, Enum):
    CORRECT = "Correct"
    WRONG_ANSWER = "WrongAnswer"
    TIMEOUT = "Timeout"
    RUNTIME_ERROR = "RuntimeError"
    PARSE_ERROR = "ParseError"
    DISALLOWED = "Disallowed"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    detail: str = ""
    wall_ms: int = 0

    def __post_init__(self) -> None:
        if self.wall_ms < 0:
            raise ValueError("wall_ms must be >= 0")


@dataclass(frozen=True)
class JudgedPair:
    puzzle: Puzzle
    solution: Solution
    verdict: Verdict


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for the generate/solve/verify loop.

    ``attempts_a`` and ``max_solutions_m`` are the per-puzzle attempt and
    retained-solution caps; ``gen_requests`` is the number of generation
    completions requested per iteration. The prompt budget is counted in
    tokens and approximated as ``chars_per_token`` characters each.
    """

    n_iterations: int = 1
    attempts_a: int = 128
    max_solutions_m: int = 8
    solve_temperature: float = 0.9
    test_temperature: float = 0.8
    gen_temperature: float = 0.9
    judge_timeout_ms: int = 1000
    prompt_token_budget: int = 2048
    rng_seed: int = 0
    gen_requests: int = 20
    max_new_tokens: int = 512
    chars_per_token: int = 4
    unverified: bool = False

    def __post_init__(self) -> None:
        for name in ("n_iterations", "attempts_a", "max_solutions_m",
                     "judge_timeout_ms", "prompt_token_budget", "gen_requests",
                     "max_new_tokens", "chars_per_token"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("solve_temperature", "test_temperature", "gen_temperature"):
            value = getattr(self, name)
            if not 0.0 <= value <= 2.0:
                raise ValueError(f"{name} must be in [0, 2]")


@dataclass(frozen=True)
class DatasetEntry:
    puzzle: Puzzle
    solutions: tuple[Solution, ...]


class Dataset:
    """Ordered, key-deduplicated collection of puzzles with verified solutions."""

    def __init__(self) -> None:
        self._entries: dict[str, DatasetEntry] = {}
        self._keys: set[str] = set()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def __contains__(self, puzzle_id_: str) -> bool:
        return puzzle_id_ in self._entries

    @property
    def ids(self) -> list[str]:
        return list(self._entries)

    def get(self, puzzle_id_: str) -> DatasetEntry | None:
        return self._entries.get(puzzle_id_)

    def has_key(self, key: str) -> bool:
        return key in self._keys

    def add(self, puzzle: Puzzle, solutions: tuple[Solution, ...] = ()) -> bool:
        """Insert a puzzle; returns False when its canonical key is already present."""
        key = canonical_key(puzzle.f_src)
        if key in self._keys:
            return False
        self._keys.add(key)
        self._entries[puzzle.id] = DatasetEntry(puzzle, tuple(solutions))
        return True

    def merge(self, other: Dataset) -> int:
        """Add every entry of ``other`` not already keyed here; returns the count added."""
        added = 0
        for entry in other:
            if self.add(entry.puzzle, entry.solutions):
                added += 1
        return added

    def pair_count(self) -> int:
        return sum(len(entry.solutions) for entry in self)
