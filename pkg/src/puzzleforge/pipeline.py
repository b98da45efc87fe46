"""The self-play loop: propose puzzles, solve them, verify, and emit data.

Each iteration packs random training puzzles into a generation prompt,
validates and de-duplicates what the model proposes, drops trivially
solvable puzzles, samples solution attempts against a fixed five-example
tutorial prompt, and keeps at most m shortest verified solutions per
puzzle. Fine-tuning itself is out of process; the hand-off is the dataset
delta plus the emitted fine-tune file.
"""

from __future__ import annotations

import random
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from .judge import SandboxBackend, SandboxJob, judge_batch
from .model import (
    GENERATION_STUB,
    Dataset,
    GenMeta,
    Origin,
    PipelineConfig,
    Puzzle,
    Solution,
    VerdictKind,
    canonical_key,
    rename_function,
)
from .trivial import is_trivial
from .validator import (
    ParseReport,
    Rejection,
    RejectionReason,
    extract_candidate_puzzles,
    validate_puzzle,
)

FUNNEL_STAGES = ("generated", "parsed", "type_valid", "nontrivial", "deduped", "solved")

# The fixed five tutorial puzzle/solution pairs shown before every puzzle to
# be solved. The target is appended as f6 and the completion continues the
# open g6 stub.
SOLVE_PROMPT_PREFIX = '''from typing import List

def f1(s: str):
    return "Hello " + s == "Hello world"

def g1():
    return "world"

assert f1(g1())

def f2(s: str):
    return "Hello " + s[::-1] == "Hello world"

def g2():
    return "world"[::-1]

assert f2(g2())

def f3(x: List[int]):
    return len(x) == 2 and sum(x) == 3

def g3():
    return [1, 2]

assert f3(g3())

def f4(s: List[str]):
    return len(set(s)) == 1000 and all((x.count("a") > x.count("b")) and ('b' in x) for x in s)

def g4():
    return ["a"*(i+2)+"b" for i in range(1000)]

assert f4(g4())

def f5(n: int):
    return str(n * n).startswith("123456789")

def g5():
    return int(int("123456789" + "0"*9) ** 0.5) + 1

assert f5(g5())

'''


class BudgetTooSmall(ValueError):
    """No training puzzle fits in the generation prompt budget."""


@runtime_checkable
class LMClient(Protocol):
    """Completion model interface; implementations must return exactly
    ``n_samples`` texts per call."""

    model_tag: str

    def complete(self, prompt: str, temperature: float, max_new_tokens: int,
                 n_samples: int) -> list[str]:
        ...


@dataclass
class IterationReport:
    """Funnel counts for one iteration; the stage counts shrink in order."""

    iteration: int
    counts: dict[str, int] = field(default_factory=dict)
    wall_s: float = 0.0

    def funnel_monotone(self) -> bool:
        values = [self.counts.get(stage, 0) for stage in FUNNEL_STAGES]
        return all(a >= b for a, b in zip(values, values[1:]))


class LMClientError(RuntimeError):
    """LM call failure, carrying the funnel counts gathered so far."""

    def __init__(self, message: str, report: IterationReport) -> None:
        super().__init__(message)
        self.report = report


def build_generation_prompt(train_puzzles: list[Puzzle], rng: random.Random,
                            budget_tokens: int, chars_per_token: int = 4,
                            headroom_chars: int | None = None) -> str:
    """Pack a random permutation of training puzzles, then open a new stub.

    Puzzles are appended greedily until the next one would overflow the
    budget minus headroom for one new puzzle; the prompt always ends with an
    open ``def f(`` line.
    """
    if not train_puzzles:
        raise BudgetTooSmall("no training puzzles to sample from")
    if headroom_chars is None:
        headroom_chars = max(len(p.f_src) for p in train_puzzles)
    char_budget = budget_tokens * chars_per_token - headroom_chars
    order = rng.sample(range(len(train_puzzles)), len(train_puzzles))
    packed: list[str] = []
    used = 0
    for index in order:
        src = train_puzzles[index].f_src
        cost = len(src) + (2 if packed else 0)
        if used + cost > char_budget:
            break
        packed.append(src)
        used += cost
    if not packed:
        raise BudgetTooSmall(
            f"budget of {budget_tokens} tokens fits no training puzzle")
    return "\n\n".join(packed) + "\n\n" + GENERATION_STUB


def build_solve_prompt(puzzle: Puzzle) -> str:
    """Tutorial pairs, the target renamed to f6, and its open g6 signature."""
    f6_src = rename_function(puzzle.f_src, puzzle.fn_name, "f6")
    return (SOLVE_PROMPT_PREFIX + f6_src + "\n\n"
            + f"def g6({puzzle.extra_defaults_src}):")


def extract_solution(completion: str, puzzle: Puzzle,
                     gen_meta: GenMeta) -> Solution | Rejection:
    """Rebuild the solution source from a completion of the g6 stub.

    The body runs until the first column-0 token after it began (a new def,
    an assert, or any other top-level statement); inner blank lines are kept.
    """
    body: list[str] = []
    started = False
    for line in completion.splitlines():
        stripped = line.strip()
        if not started:
            if not stripped:
                continue
            if not line[0].isspace():
                break
            started = True
            body.append(line)
            continue
        if stripped and not line[0].isspace():
            break
        body.append(line)
    while body and not body[-1].strip():
        body.pop()
    if not body:
        return Rejection(RejectionReason.EMPTY_BODY, "no indented body produced")
    text = "\n".join(body)
    g_src = f"def g({puzzle.extra_defaults_src}):\n" + rename_function(text, "g6", "g")
    return Solution.from_src(g_src, gen_meta)


def select_solutions(correct: list[Solution], m: int) -> list[Solution]:
    """Distinct solutions, shortest first (ties by text), capped at m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    distinct = {sol.g_src: sol for sol in correct}
    ranked = sorted(distinct.values(), key=lambda s: (s.char_length, s.g_src))
    return ranked[:m]


def run_iteration(
    config: PipelineConfig,
    lm: LMClient,
    backend: SandboxBackend,
    train: list[Puzzle],
    state: Dataset,
    iteration: int = 1,
    workers: int = 1,
) -> tuple[Dataset, IterationReport]:
    """One generate/solve/verify pass; returns the dataset delta and report.

    Only puzzles with at least one verified-correct solution (or any
    extracted solution, in unverified mode) enter the delta, each carrying
    at most m solutions and deduplicated against both state and train.
    """
    started = time.perf_counter()
    report = IterationReport(iteration=iteration)
    rng = random.Random(config.rng_seed * 1_000_003 + iteration)
    origin = Origin.synthetic(iteration, lm.model_tag)

    fragments: list[str] = []
    for _ in range(config.gen_requests):
        prompt = build_generation_prompt(
            train, rng, config.prompt_token_budget, config.chars_per_token)
        try:
            completions = lm.complete(prompt, config.gen_temperature,
                                      config.max_new_tokens, 1)
        except Exception as exc:
            report.counts["generated"] = len(fragments)
            report.wall_s = time.perf_counter() - started
            raise LMClientError(f"generation call failed: {exc}", report) from exc
        for completion in completions:
            fragments.extend(extract_candidate_puzzles(completion))
    report.counts["generated"] = len(fragments)

    parse_jobs = [SandboxJob.parse(src, config.judge_timeout_ms) for src in fragments]
    reports = backend.run_many(parse_jobs, workers)
    parsed_pairs = [(src, rep) for src, rep in zip(fragments, reports)
                    if isinstance(rep, ParseReport) and rep.ok]
    report.counts["parsed"] = len(parsed_pairs)

    validated: list[Puzzle] = []
    for src, parse_report in parsed_pairs:
        outcome = validate_puzzle(src, parse_report, origin)
        if isinstance(outcome, Puzzle):
            validated.append(outcome)
    report.counts["type_valid"] = len(validated)

    nontrivial = [p for p in validated
                  if not is_trivial(p, backend, config.judge_timeout_ms).trivial]
    report.counts["nontrivial"] = len(nontrivial)

    seen = {canonical_key(p.f_src) for p in train}
    deduped: list[Puzzle] = []
    for puzzle in nontrivial:
        key = canonical_key(puzzle.f_src)
        if key in seen or state.has_key(key):
            continue
        seen.add(key)
        deduped.append(puzzle)
    report.counts["deduped"] = len(deduped)

    delta_entries: dict[str, tuple[Puzzle, list[Solution]]] = {}
    pairs_emitted = 0
    for puzzle in deduped:
        prompt = build_solve_prompt(puzzle)
        try:
            completions = lm.complete(prompt, config.solve_temperature,
                                      config.max_new_tokens, config.attempts_a)
        except Exception as exc:
            report.wall_s = time.perf_counter() - started
            raise LMClientError(f"solve call failed: {exc}", report) from exc
        solutions = []
        for index, completion in enumerate(completions):
            meta = GenMeta(lm.model_tag, config.solve_temperature, index)
            extracted = extract_solution(completion, puzzle, meta)
            if isinstance(extracted, Solution):
                solutions.append(extracted)
        if config.unverified:
            kept = solutions
        else:
            judged = judge_batch([(puzzle, s) for s in solutions], workers,
                                 backend, config.judge_timeout_ms)
            kept = [j.solution for j in judged
                    if j.verdict.kind is VerdictKind.CORRECT]
        selected = select_solutions(kept, config.max_solutions_m)
        if selected:
            delta_entries[puzzle.id] = (puzzle, selected)
            pairs_emitted += len(selected)
    report.counts["solved"] = len(delta_entries)
    report.counts["pairs_emitted"] = pairs_emitted

    delta = Dataset()
    for pid in sorted(delta_entries):
        puzzle, selected = delta_entries[pid]
        delta.add(puzzle, tuple(selected))
    report.wall_s = time.perf_counter() - started
    return delta, report


def run_pipeline(
    config: PipelineConfig,
    lm: LMClient,
    backend: SandboxBackend,
    train: list[Puzzle],
    workers: int = 1,
) -> tuple[Dataset, list[IterationReport]]:
    """Run the configured number of iterations, merging deltas into one dataset."""
    state = Dataset()
    reports = []
    for iteration in range(1, config.n_iterations + 1):
        delta, report = run_iteration(config, lm, backend, train, state,
                                      iteration=iteration, workers=workers)
        state.merge(delta)
        reports.append(report)
    return state, reports


def emit_finetune_file(dataset: Dataset, path: str) -> int:
    """Write puzzle/solution/assertion blocks in the solve-prompt format.

    One block per (puzzle, solution) pair, named f and g and closed by the
    literal ``assert f(g())`` line; blocks are separated by one blank line.
    Returns the number of blocks written.
    """
    if len(dataset) == 0:
        raise ValueError("refusing to emit an empty fine-tune file")
    blocks = []
    for entry in dataset:
        f_src = rename_function(entry.puzzle.f_src, entry.puzzle.fn_name, "f")
        for solution in entry.solutions:
            blocks.append(f"{f_src}\n\n{solution.g_src}\n\nassert f(g())\n")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(blocks))
    return len(blocks)


_INT_BODY_RE = re.compile(r"return x \+ (\d+) == (\d+)")
_STR_BODY_RE = re.compile(r"return s == '([a-z]+)' \* (\d+)")
_LIST_BODY_RE = re.compile(r"return li == list\(range\((\d+)\)\)")

_MOCK_LETTERS = "jkpqvwxyz"


class MockLM:
    """Deterministic stand-in model built from a small template bank.

    Generation completions continue the open ``def f(`` stub with arithmetic,
    string, and list puzzles whose answers lie outside the trivial candidate
    pools; solve completions are correct for exactly
    ``round(correct_rate * n_samples)`` of the attempts, with distinct
    lengths so shortest-m selection is exercised.
    """

    def __init__(self, seed: int = 0, correct_rate: float = 1.0,
                 model_tag: str = "mock-lm") -> None:
        if not 0.0 <= correct_rate <= 1.0:
            raise ValueError("correct_rate must be in [0, 1]")
        self._rng = random.Random(seed)
        self.correct_rate = correct_rate
        self.model_tag = model_tag

    def complete(self, prompt: str, temperature: float, max_new_tokens: int,
                 n_samples: int) -> list[str]:
        if prompt.endswith(GENERATION_STUB):
            return [self._puzzle_completion() for _ in range(n_samples)]
        return self._solve_completions(prompt, n_samples)

    def _puzzle_completion(self) -> str:
        kind = self._rng.choice(("int", "str", "list"))
        if kind == "int":
            left = self._rng.randrange(10_000, 100_000)
            answer = self._rng.randrange(1_000, 1_000_000)
            return f"x: int):\n    return x + {left} == {left + answer}\n"
        if kind == "str":
            word = "".join(self._rng.sample(_MOCK_LETTERS, 2))
            reps = self._rng.randrange(3, 10)
            return f"s: str):\n    return s == '{word}' * {reps}\n"
        length = self._rng.randrange(4, 10)
        return f"li: List[int]):\n    return li == list(range({length}))\n"

    def _solve_completions(self, prompt: str, n_samples: int) -> list[str]:
        target_start = prompt.rfind("def f6(")
        target = prompt[target_start:] if target_start >= 0 else ""
        expr, filler = self._solution_expr(target)
        n_correct = round(self.correct_rate * n_samples) if expr else 0
        completions = []
        for i in range(n_samples):
            if i < n_correct:
                body = f"    return {expr}" + filler * i
            else:
                body = f"    return {self._wrong_value(target, i)}"
            completions.append(f"\n{body}\n\nassert f6(g6())\n")
        return completions

    @staticmethod
    def _solution_expr(target: str) -> tuple[str | None, str]:
        match = _INT_BODY_RE.search(target)
        if match:
            left, total = int(match.group(1)), int(match.group(2))
            return f"{total} - {left}", " + 0"
        match = _STR_BODY_RE.search(target)
        if match:
            return f"'{match.group(1)}' * {match.group(2)}", " + ''"
        match = _LIST_BODY_RE.search(target)
        if match:
            return f"list(range({match.group(1)}))", " + []"
        return None, ""

    @staticmethod
    def _wrong_value(target: str, index: int) -> str:
        if _STR_BODY_RE.search(target):
            return f"'wrong{index}'"
        if _LIST_BODY_RE.search(target):
            return f"[{index}]"
        return str(index)
