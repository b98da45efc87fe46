"""Line-JSON persistence for datasets, verdicts, and embeddings.

Every file format is one JSON object per line so million-record datasets
stream without loading into memory. ``SCHEMAS`` documents the exact record
shapes and is printed by the CLI's ``--schema`` flag.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Iterator

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .diversity import EmbeddingSet
from .metrics import PassSample
from .model import (
    Dataset,
    GenMeta,
    JudgedPair,
    Origin,
    PipelineConfig,
    Puzzle,
    Solution,
    VerdictKind,
)
from .validator import parse_type_hint, split_signature

LM_CREDENTIAL_ENV = "PUZZLEFORGE_LM_CREDENTIAL"

SCHEMAS = {
    "dataset": {
        "id": "str: content hash of the canonical puzzle key",
        "f_src": "str: verifier source text",
        "input_type": "str: canonical type hint, e.g. List[int]",
        "origin": {"kind": "human-train|human-test|synthetic",
                   "iteration": "int, synthetic only", "model_tag": "str, synthetic only"},
        "domain_tag": "str|null",
        "ast_nodes": "int|null",
        "solutions": [{"g_src": "str", "len": "int",
                       "meta": {"model_tag": "str", "temperature": "float",
                                "attempt_index": "int"}}],
    },
    "raw_puzzles": {"src": "str: candidate verifier source",
                    "domain_tag": "str|null (optional)"},
    "solutions": {"puzzle_id": "str", "g_src": "str",
                  "meta": "object (optional, as dataset solutions.meta)"},
    "verdicts": {"puzzle_id": "str", "attempt_index": "int",
                 "verdict": "Correct|WrongAnswer|Timeout|RuntimeError|ParseError|Disallowed",
                 "detail": "str", "wall_ms": "int"},
    "validation_report": {"ok": "bool", "puzzle": "dataset record sans solutions (ok)",
                          "reason": "str (rejected)", "detail": "str (rejected)",
                          "src": "str (rejected)"},
    "triviality_report": {"id": "str", "trivial": "bool", "witness": "str|null",
                          "detail": "str"},
    "domains": {"id": "str", "domain_tag": "str"},
    "embeddings": {"id": "str", "v": "[float] * D, D fixed by the first row"},
    "config": "TOML mirroring PipelineConfig plus [lm] {kind, seed, correct_rate}; "
              f"the {LM_CREDENTIAL_ENV} env var overrides lm.credential",
}


def iter_jsonl(path: str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON record: {exc}") from exc


def write_jsonl(path: str, records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def origin_to_obj(origin: Origin) -> dict:
    obj: dict = {"kind": origin.kind}
    if origin.kind == "synthetic":
        obj["iteration"] = origin.iteration
        obj["model_tag"] = origin.model_tag
    return obj


def origin_from_obj(obj: dict) -> Origin:
    kind = obj.get("kind", "")
    if kind == "synthetic":
        return Origin.synthetic(int(obj["iteration"]), str(obj["model_tag"]))
    return Origin(kind)


def puzzle_to_record(puzzle: Puzzle, solutions: tuple[Solution, ...] = ()) -> dict:
    return {
        "id": puzzle.id,
        "f_src": puzzle.f_src,
        "input_type": puzzle.input_type.render(),
        "origin": origin_to_obj(puzzle.origin),
        "domain_tag": puzzle.domain_tag,
        "ast_nodes": puzzle.ast_node_count,
        "solutions": [
            {"g_src": s.g_src, "len": s.char_length,
             "meta": {"model_tag": s.gen_meta.model_tag,
                      "temperature": s.gen_meta.temperature,
                      "attempt_index": s.gen_meta.attempt_index}}
            for s in solutions
        ],
    }


def puzzle_from_record(record: dict) -> tuple[Puzzle, tuple[Solution, ...]]:
    f_src = record["f_src"]
    fn_name, _, defaults_src = split_signature(f_src)
    puzzle = Puzzle(
        id=record["id"],
        f_src=f_src,
        fn_name=fn_name,
        input_type=parse_type_hint(record["input_type"]),
        extra_defaults_src=defaults_src,
        origin=origin_from_obj(record.get("origin", {"kind": "human-train"})),
        domain_tag=record.get("domain_tag"),
        ast_node_count=record.get("ast_nodes"),
    )
    solutions = []
    for sol in record.get("solutions", ()):
        meta = sol.get("meta", {})
        solutions.append(Solution.from_src(
            sol["g_src"],
            GenMeta(model_tag=str(meta.get("model_tag", "unknown")),
                    temperature=float(meta.get("temperature", 0.0)),
                    attempt_index=int(meta.get("attempt_index", 0))),
        ))
    return puzzle, tuple(solutions)


def save_dataset(dataset: Dataset, path: str) -> int:
    return write_jsonl(path, (puzzle_to_record(e.puzzle, e.solutions) for e in dataset))


def load_dataset(path: str) -> Dataset:
    dataset = Dataset()
    for record in iter_jsonl(path):
        puzzle, solutions = puzzle_from_record(record)
        dataset.add(puzzle, solutions)
    return dataset


def load_puzzles(path: str) -> list[Puzzle]:
    return [puzzle_from_record(record)[0] for record in iter_jsonl(path)]


def judged_pair_to_record(pair: JudgedPair, attempt_index: int | None = None) -> dict:
    index = pair.solution.gen_meta.attempt_index if attempt_index is None else attempt_index
    return {
        "puzzle_id": pair.puzzle.id,
        "attempt_index": index,
        "verdict": pair.verdict.kind.value,
        "detail": pair.verdict.detail,
        "wall_ms": pair.verdict.wall_ms,
    }


def fold_attempts(records: Iterable[dict]) -> dict[str, PassSample]:
    """Fold per-attempt verdict records into per-puzzle (n, c) tallies."""
    totals: dict[str, list[int]] = {}
    for record in records:
        pid = str(record["puzzle_id"])
        bucket = totals.setdefault(pid, [0, 0])
        bucket[0] += 1
        if record.get("verdict") == VerdictKind.CORRECT.value:
            bucket[1] += 1
    return {pid: PassSample(n=n, c=c) for pid, (n, c) in totals.items()}


def load_domains(path: str) -> dict[str, str]:
    return {str(r["id"]): str(r["domain_tag"]) for r in iter_jsonl(path)}


def load_embeddings(path: str) -> EmbeddingSet:
    rows = [(str(r["id"]), r["v"]) for r in iter_jsonl(path)]
    return EmbeddingSet.from_rows(rows)


def load_config(path: str) -> tuple[PipelineConfig, dict]:
    """Read the TOML config; returns (PipelineConfig, lm section).

    Unknown keys are rejected so typos fail loudly. The LM credential can be
    overridden by the environment (env beats file).
    """
    with open(path, "rb") as handle:
        data = tomllib.load(handle)
    lm = data.pop("lm", {})
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    config = PipelineConfig(**data)
    credential = os.environ.get(LM_CREDENTIAL_ENV)
    if credential:
        lm["credential"] = credential
    return config, lm
