"""Validity filtering for candidate puzzles.

Deep parsing (AST node counts, exact signatures) is a sandbox job; this
module does the lightweight text work — type-hint grammar, fragment
splitting, signature scanning — and turns parse reports into accepted
Puzzles or Rejections.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .model import GENERATION_STUB, Origin, Puzzle, TypeHint, list_of, puzzle_id

_DEF_START_RE = re.compile(r"^def\s+([A-Za-z_]\w*)\s*\(", re.MULTILINE)


class InvalidTypeHint(ValueError):
    """Annotation text outside the bool/int/float/str/List grammar."""


class RejectionReason(str, Enum):
    NO_PARSE = "NoParse"
    NO_ANNOTATION = "NoAnnotation"
    BAD_TYPE_HINT = "BadTypeHint"
    MULTIPLE_REQUIRED_PARAMS = "MultipleRequiredParams"
    EMPTY_BODY = "EmptyBody"


@dataclass(frozen=True)
class Rejection:
    reason: RejectionReason
    detail: str = ""


@dataclass(frozen=True)
class FirstParam:
    name: str
    annotation: str | None


@dataclass(frozen=True)
class ParseReport:
    """Outcome of a sandbox parse job on one candidate source."""

    ok: bool
    fn_name: str | None = None
    first_param: FirstParam | None = None
    defaults_src: str = ""
    required_params: int = 0
    extra_defs: int = 0
    ast_node_count: int = 0
    error: str | None = None


_LEAVES = {"bool": TypeHint("bool"), "int": TypeHint("int"),
           "float": TypeHint("float"), "str": TypeHint("str")}


def parse_type_hint(annotation_text: str) -> TypeHint:
    """Parse ``T ::= bool | int | float | str | List[T]`` (lowercase list accepted)."""
    text = annotation_text.strip()
    if not text:
        raise InvalidTypeHint("empty annotation")
    if text in _LEAVES:
        return _LEAVES[text]
    for prefix in ("List[", "list["):
        if text.startswith(prefix) and text.endswith("]"):
            return list_of(parse_type_hint(text[len(prefix):-1]))
    raise InvalidTypeHint(f"annotation not in allowed grammar: {annotation_text!r}")


def validate_puzzle(
    raw_src: str,
    report: ParseReport,
    origin: Origin,
    domain_tag: str | None = None,
) -> Puzzle | Rejection:
    """Accept a candidate when it parses as a single function whose one
    required parameter is the first and carries an allowed type hint."""
    if not report.ok:
        return Rejection(RejectionReason.NO_PARSE, report.error or "did not parse")
    if report.extra_defs:
        return Rejection(RejectionReason.NO_PARSE,
                         "expected exactly one top-level function")
    if report.first_param is None or report.first_param.annotation is None:
        return Rejection(RejectionReason.NO_ANNOTATION,
                         "first parameter must carry a type annotation")
    if report.required_params != 1:
        return Rejection(
            RejectionReason.MULTIPLE_REQUIRED_PARAMS,
            f"expected exactly one required parameter, found {report.required_params}",
        )
    try:
        input_type = parse_type_hint(report.first_param.annotation)
    except InvalidTypeHint as exc:
        return Rejection(RejectionReason.BAD_TYPE_HINT, str(exc))
    assert report.fn_name is not None
    return Puzzle(
        id=puzzle_id(raw_src),
        f_src=raw_src,
        fn_name=report.fn_name,
        input_type=input_type,
        extra_defaults_src=report.defaults_src,
        origin=origin,
        domain_tag=domain_tag,
        ast_node_count=report.ast_node_count or None,
    )


def extract_candidate_puzzles(completion: str, stub: str = GENERATION_STUB) -> list[str]:
    """Split an LM completion that continues an open ``def f(`` prompt.

    Fragments start at column-0 ``def `` lines; the text before the first
    such line is the continuation of the prompt's stub. A final fragment cut
    off mid-line (completion without a trailing newline) is dropped.
    """
    if not completion:
        return []
    truncated_tail = not completion.endswith("\n")
    lines = completion.splitlines()
    fragments: list[list[str]] = [[]]
    for line in lines:
        if line.startswith("def "):
            fragments.append([line])
        else:
            fragments[-1].append(line)
    sources: list[str] = []
    head = "\n".join(fragments[0]).strip()
    if head:
        sources.append((stub + "\n".join(fragments[0])).rstrip())
    for chunk in fragments[1:]:
        src = "\n".join(chunk).rstrip()
        if src:
            sources.append(src)
    if truncated_tail and sources:
        sources.pop()
    return sources


def split_signature(f_src: str) -> tuple[str, str, str]:
    """Scan a def line for (fn_name, first_param_src, extra_defaults_src).

    Verbatim text split on top-level commas, quote- and bracket-aware, so the
    defaults text matches the source exactly. Raises ValueError when no
    function signature is found.
    """
    match = _DEF_START_RE.search(f_src)
    if match is None:
        raise ValueError("no function definition found")
    name, open_paren = match.group(1), match.end() - 1
    depth = 0
    params: list[str] = []
    current: list[str] = []
    in_string: str | None = None
    escaped = False
    for ch in f_src[open_paren:]:
        if in_string:
            current.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == in_string:
                in_string = None
            continue
        if ch in "\"'":
            in_string = ch
            current.append(ch)
            continue
        if ch in "([{":
            depth += 1
            if depth == 1:
                continue
        elif ch in ")]}":
            depth -= 1
            if depth == 0:
                params.append("".join(current))
                break
        elif ch == "," and depth == 1:
            params.append("".join(current))
            current = []
            continue
        current.append(ch)
    else:
        raise ValueError("unterminated signature")
    params = [p.strip() for p in params]
    params = [p for p in params if p]
    first = params[0] if params else ""
    rest = ", ".join(params[1:])
    return name, first, rest
