"""In-interpreter sandbox worker.

Reads one JSON request per line on stdin and answers one JSON response per
line on stdout. Three job kinds: ``parse`` (syntax facts and node count),
``probe`` (evaluate a verifier over candidate literals), and ``judge``
(run a puzzle/solution pair and check for an exactly-True return). Every
job executes in a fresh namespace with dangerous builtins removed, stdout
and stderr swallowed, and a soft SIGALRM deadline backing up the parent's
hard kill. The parent pins PYTHONHASHSEED=0 so set iteration order is
reproducible across worker restarts.

Not an OS-level sandbox: run it only under a supervisor that kills on
timeout, and never on adversarial input outside a disposable environment.
"""

from __future__ import annotations

import ast
import builtins
import contextlib
import io
import json
import os
import re
import signal
import sys
import time
import typing

__version__ = "0.1.0"

_REMOVED_BUILTINS = ("open", "exec", "eval", "__import__", "compile", "input")

_DEF_START_RE = re.compile(r"^def\s+([A-Za-z_]\w*)\s*\(", re.MULTILINE)


class _SoftTimeout(Exception):
    pass


def _namespace() -> dict:
    safe = {k: v for k, v in vars(builtins).items() if k not in _REMOVED_BUILTINS}
    return {
        "__builtins__": safe,
        "List": typing.List,
        "Set": typing.Set,
        "Dict": typing.Dict,
        "Tuple": typing.Tuple,
        "Optional": typing.Optional,
    }


@contextlib.contextmanager
def _deadline(timeout_ms: int):
    def handler(signum, frame):
        raise _SoftTimeout()

    previous = signal.signal(signal.SIGALRM, handler)
    signal.setitimer(signal.ITIMER_REAL, max(timeout_ms, 1) / 1000.0)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous)


@contextlib.contextmanager
def _quiet_io():
    sink_out, sink_err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(sink_out), contextlib.redirect_stderr(sink_err):
        yield


def _first_def_name(tree: ast.Module) -> str | None:
    for node in tree.body:
        if isinstance(node, ast.FunctionDef):
            return node.name
    return None


def _signature_split(src: str) -> str:
    """Verbatim text of the parameters after the first, scanned from source."""
    match = _DEF_START_RE.search(src)
    if match is None:
        return ""
    depth = 0
    params: list[str] = []
    current: list[str] = []
    in_string: str | None = None
    escaped = False
    for ch in src[match.end() - 1:]:
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
        return ""
    cleaned = [p.strip() for p in params if p.strip()]
    return ", ".join(cleaned[1:])


def _handle_parse(request: dict) -> dict:
    start = time.perf_counter()
    src = str(request["f"])
    try:
        tree = ast.parse(src)
    except (SyntaxError, ValueError) as exc:
        return {"ok": False, "error": f"syntax error: {exc}"}
    defs = [node for node in tree.body
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if not defs:
        return {"ok": False, "error": "no top-level function definition"}
    fn = defs[0]
    args = fn.args
    positional = list(args.posonlyargs) + list(args.args)
    required = len(positional) - len(args.defaults)
    required += sum(1 for default in args.kw_defaults if default is None)
    first_param = None
    if positional:
        annotation = None
        if positional[0].annotation is not None:
            annotation = ast.get_source_segment(src, positional[0].annotation)
            if annotation is None:
                annotation = ast.unparse(positional[0].annotation)
        first_param = {"name": positional[0].arg, "annotation": annotation}
    return {
        "ok": True,
        "fn_name": fn.name,
        "first_param": first_param,
        "defaults_src": _signature_split(src),
        "required_params": required,
        "extra_defs": len(defs) - 1,
        "ast_nodes": sum(1 for _ in ast.walk(tree)),
        "wall_ms": int((time.perf_counter() - start) * 1000),
    }


def _handle_probe(request: dict) -> dict:
    start = time.perf_counter()
    f_src = str(request["f"])
    timeout_ms = int(request.get("timeout_ms", 1000))
    if "values" in request:
        values = [str(v) for v in request["values"]]
    elif "value" in request:
        values = [str(request["value"])]
    else:
        values = []

    def wall() -> int:
        return int((time.perf_counter() - start) * 1000)

    ns = _namespace()
    try:
        tree = ast.parse(f_src)
        fn_name = _first_def_name(tree)
        if fn_name is None:
            raise NameError("no function defined")
        with _deadline(timeout_ms), _quiet_io():
            exec(compile(tree, "<puzzle>", "exec"), ns)
        fn = ns[fn_name]
    except BaseException as exc:
        return {"ok": True, "witness": None, "checked": 0, "wall_ms": wall(),
                "detail": f"verifier failed: {type(exc).__name__}: {exc}"}
    checked = 0
    for text in values:
        checked += 1
        try:
            value = ast.literal_eval(text)
            with _deadline(timeout_ms), _quiet_io():
                result = fn(value)
        except BaseException:
            continue
        if result is True:
            return {"ok": True, "witness": text, "checked": checked,
                    "wall_ms": wall()}
    return {"ok": True, "witness": None, "checked": checked, "wall_ms": wall()}


def _handle_judge(request: dict) -> dict:
    start = time.perf_counter()
    timeout_ms = int(request.get("timeout_ms", 1000))
    truthy = bool(request.get("truthy", False))

    def wall() -> int:
        return int((time.perf_counter() - start) * 1000)

    def verdict(kind: str, detail: str = "", wall_ms: int | None = None) -> dict:
        return {"ok": True, "verdict": kind, "detail": detail,
                "wall_ms": wall() if wall_ms is None else wall_ms}

    f_src, g_src = str(request["f"]), str(request["g"])
    try:
        tree_f = ast.parse(f_src)
        tree_g = ast.parse(g_src)
    except (SyntaxError, ValueError) as exc:
        return verdict("ParseError", str(exc))
    f_name = _first_def_name(tree_f)
    g_name = _first_def_name(tree_g)
    if f_name is None or g_name is None:
        return verdict("ParseError", "source defines no function")
    ns = _namespace()
    try:
        with _deadline(timeout_ms), _quiet_io():
            exec(compile(tree_f, "<puzzle>", "exec"), ns)
            exec(compile(tree_g, "<solution>", "exec"), ns)
            result = ns[f_name](ns[g_name]())
    except _SoftTimeout:
        return verdict("Timeout", "soft-alarm", max(wall(), timeout_ms))
    except BaseException as exc:
        return verdict("RuntimeError", f"{type(exc).__name__}: {exc}")
    passed = bool(result) if truthy else result is True
    if passed:
        return verdict("Correct")
    return verdict("WrongAnswer", f"returned {result!r}")


_HANDLERS = {"parse": _handle_parse, "probe": _handle_probe, "judge": _handle_judge}


def handle_request(request) -> dict:
    """Dispatch one decoded request; any malformed input maps to bad-request."""
    try:
        handler = _HANDLERS[request["kind"]]
    except (TypeError, KeyError):
        return {"ok": False, "error": "bad-request"}
    try:
        return handler(request)
    except _SoftTimeout:
        return {"ok": True, "verdict": "Timeout", "detail": "soft-alarm",
                "wall_ms": int(request.get("timeout_ms", 1000))}
    except BaseException:
        return {"ok": False, "error": "bad-request"}


def serve(stdin=None, stdout=None) -> None:
    """Answer requests until stdin closes; job errors never end the loop."""
    in_stream = sys.stdin if stdin is None else stdin
    out_stream = sys.stdout if stdout is None else stdout
    if os.environ.get("PYTHONHASHSEED") != "0":
        print("warning: PYTHONHASHSEED is not pinned to 0; set determinism "
              "is not guaranteed", file=sys.stderr)
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            response = {"ok": False, "error": "bad-request"}
        else:
            response = handle_request(request)
        out_stream.write(json.dumps(response) + "\n")
        out_stream.flush()
