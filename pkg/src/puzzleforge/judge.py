"""Sandboxed verification of candidate solutions.

Every execution happens in a worker process that speaks one JSON object per
line on stdin/stdout (see the shim protocol below); the supervisor here
enforces hard deadlines by killing and replacing workers. An in-process
backend with the same job semantics exists for trusted fixtures, and a
scripted backend for protocol-level tests.

Wire protocol, one request and one response line per job:
  request:  {"kind": "judge"|"probe"|"parse", "f": "...", "g": "...",
             "values": ["..."], "timeout_ms": 1000}      (fields per kind)
  response: {"ok": true, "verdict": "Correct", "detail": "...",
             "wall_ms": 12, "ast_nodes": 9, "fn_name": "f",
             "first_param": {"name": "x", "annotation": "int"}, ...}
Workers run with the hash-seed environment variable pinned to 0 so set
iteration order is reproducible across restarts.
"""

from __future__ import annotations

import abc
import ast
import builtins
import json
import os
import queue
import re
import shlex
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .model import JudgedPair, Puzzle, Solution, Verdict, VerdictKind
from .validator import FirstParam, ParseReport, split_signature

DEFAULT_TIMEOUT_MS = 1000
KILL_GRACE_MS = 500

SHIM_CMD_ENV = "PUZZLEFORGE_SHIM_CMD"
DEFAULT_SHIM_CMD = (sys.executable, "-m", "puzzleforge_shim")

_DENYLIST_RE = re.compile(
    r"\b__import__\b|\bimport\b|\bopen\b|\bexec\b|\beval\b"
    r"|\bcompile\b|\bglobals\b|\bsubprocess\b|\bos\.|\bsys\."
)


def static_screen(src: str) -> str | None:
    """Return the first denylisted token found in ``src``, or None when clean.

    Matching is word-boundary aware, so e.g. ``importance`` or a trailing
    ``imported`` passes while ``import os`` is caught. This is advisory
    defense-in-depth before dispatch; the worker additionally strips
    dangerous builtins from the execution namespace.
    """
    match = _DENYLIST_RE.search(src)
    return match.group(0) if match else None


class JobKind(str, Enum):
    PARSE = "parse"
    PROBE = "probe"
    JUDGE = "judge"


@dataclass(frozen=True)
class SandboxJob:
    kind: JobKind
    f_src: str = ""
    g_src: str = ""
    values: tuple[str, ...] = ()
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    truthy: bool = False

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")

    @classmethod
    def parse(cls, src: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> SandboxJob:
        return cls(JobKind.PARSE, f_src=src, timeout_ms=timeout_ms)

    @classmethod
    def probe(cls, f_src: str, values: tuple[str, ...],
              timeout_ms: int = DEFAULT_TIMEOUT_MS) -> SandboxJob:
        return cls(JobKind.PROBE, f_src=f_src, values=tuple(values),
                   timeout_ms=timeout_ms)

    @classmethod
    def judge(cls, f_src: str, g_src: str, timeout_ms: int = DEFAULT_TIMEOUT_MS,
              truthy: bool = False) -> SandboxJob:
        return cls(JobKind.JUDGE, f_src=f_src, g_src=g_src,
                   timeout_ms=timeout_ms, truthy=truthy)

    def to_request(self) -> dict:
        req: dict = {"kind": self.kind.value, "timeout_ms": self.timeout_ms}
        if self.kind is JobKind.PARSE:
            req["f"] = self.f_src
        elif self.kind is JobKind.PROBE:
            req["f"] = self.f_src
            req["values"] = list(self.values)
        else:
            req["f"] = self.f_src
            req["g"] = self.g_src
            if self.truthy:
                req["truthy"] = True
        return req

    def budget_ms(self) -> int:
        """Wall budget before the supervisor hard-kills the worker."""
        if self.kind is JobKind.PROBE:
            return self.timeout_ms * max(1, len(self.values)) + KILL_GRACE_MS
        return self.timeout_ms + KILL_GRACE_MS


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of probing a verifier over candidate values."""

    witness: str | None
    wall_ms: int = 0
    checked: int = 0
    detail: str = ""


class SandboxBackend(abc.ABC):
    """Executes sandbox jobs; ``run`` is total, hangs become Timeout verdicts."""

    @abc.abstractmethod
    def run(self, job: SandboxJob):
        ...

    def run_many(self, jobs: list[SandboxJob], parallelism: int = 1) -> list:
        """Run jobs preserving input order; default implementation is sequential."""
        return [self.run(job) for job in jobs]

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ScriptedBackend(SandboxBackend):
    """Replays canned responses; pass a callable or an ordered list of results."""

    def __init__(self, script) -> None:
        self._fn = script if callable(script) else None
        self._queue = None if callable(script) else list(script)

    def run(self, job: SandboxJob):
        if self._fn is not None:
            return self._fn(job)
        if not self._queue:
            raise AssertionError("scripted backend exhausted")
        return self._queue.pop(0)


_REMOVED_BUILTINS = ("open", "exec", "eval", "__import__", "compile", "input")


def _restricted_namespace() -> dict:
    import typing

    safe = {k: v for k, v in vars(builtins).items() if k not in _REMOVED_BUILTINS}
    return {
        "__builtins__": safe,
        "List": typing.List,
        "Set": typing.Set,
        "Dict": typing.Dict,
        "Tuple": typing.Tuple,
        "Optional": typing.Optional,
    }


def parse_source(src: str) -> ParseReport:
    """AST-based parse report: names, first-parameter annotation (verbatim),
    required-parameter count, and total syntax-tree node count."""
    try:
        tree = ast.parse(src)
    except (SyntaxError, ValueError) as exc:
        return ParseReport(ok=False, error=f"syntax error: {exc}")
    defs = [node for node in tree.body
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if not defs:
        return ParseReport(ok=False, error="no top-level function definition")
    fn = defs[0]
    args = fn.args
    positional = list(args.posonlyargs) + list(args.args)
    required = len(positional) - len(args.defaults)
    required += sum(1 for d in args.kw_defaults if d is None)
    first_param = None
    if positional:
        annotation = None
        if positional[0].annotation is not None:
            annotation = ast.get_source_segment(src, positional[0].annotation)
            if annotation is None:
                annotation = ast.unparse(positional[0].annotation)
        first_param = FirstParam(name=positional[0].arg, annotation=annotation)
    try:
        _, _, defaults_src = split_signature(src)
    except ValueError:
        defaults_src = ""
    return ParseReport(
        ok=True,
        fn_name=fn.name,
        first_param=first_param,
        defaults_src=defaults_src,
        required_params=required,
        extra_defs=len(defs) - 1,
        ast_node_count=sum(1 for _ in ast.walk(tree)),
    )


def _first_function(ns: dict, src: str):
    tree = ast.parse(src)
    for node in tree.body:
        if isinstance(node, ast.FunctionDef):
            return ns[node.name]
    raise NameError("no function defined")


class LocalBackend(SandboxBackend):
    """In-process job execution with the worker's semantics but no preemption.

    Suitable only for trusted fixture code: a hanging job hangs the caller.
    Probe loops stop early once ``budget_ms`` of wall time has elapsed.
    """

    def run(self, job: SandboxJob):
        if job.kind is JobKind.PARSE:
            return parse_source(job.f_src)
        if job.kind is JobKind.PROBE:
            return self._probe(job)
        return self._judge(job)

    def _probe(self, job: SandboxJob) -> ProbeResult:
        start = time.perf_counter()
        deadline = start + job.budget_ms() / 1000.0
        ns = _restricted_namespace()
        try:
            exec(compile(job.f_src, "<puzzle>", "exec"), ns)
            fn = _first_function(ns, job.f_src)
        except Exception as exc:
            wall = int((time.perf_counter() - start) * 1000)
            return ProbeResult(None, wall, 0, f"verifier failed: {exc}")
        checked = 0
        for text in job.values:
            if time.perf_counter() > deadline:
                break
            checked += 1
            try:
                value = ast.literal_eval(text)
                result = fn(value)
            except Exception:
                continue
            if result is True:
                wall = int((time.perf_counter() - start) * 1000)
                return ProbeResult(text, wall, checked)
        wall = int((time.perf_counter() - start) * 1000)
        return ProbeResult(None, wall, checked)

    def _judge(self, job: SandboxJob) -> Verdict:
        start = time.perf_counter()

        def wall() -> int:
            return int((time.perf_counter() - start) * 1000)

        ns = _restricted_namespace()
        try:
            code_f = compile(job.f_src, "<puzzle>", "exec")
            code_g = compile(job.g_src, "<solution>", "exec")
        except SyntaxError as exc:
            return Verdict(VerdictKind.PARSE_ERROR, str(exc), wall())
        try:
            exec(code_f, ns)
            f_fn = _first_function(ns, job.f_src)
            exec(code_g, ns)
            g_fn = _first_function(ns, job.g_src)
            result = f_fn(g_fn())
        except Exception as exc:
            return Verdict(VerdictKind.RUNTIME_ERROR,
                           f"{type(exc).__name__}: {exc}", wall())
        passed = bool(result) if job.truthy else result is True
        if passed:
            return Verdict(VerdictKind.CORRECT, "", wall())
        return Verdict(VerdictKind.WRONG_ANSWER, f"returned {result!r}", wall())


def resolve_worker_cmd() -> tuple[str, ...]:
    """Worker argv: the shim-command env var when set, else ``python -m puzzleforge_shim``."""
    configured = os.environ.get(SHIM_CMD_ENV)
    if configured:
        return tuple(shlex.split(configured))
    return DEFAULT_SHIM_CMD


class _Worker:
    """One shim process plus a reader thread feeding a line queue."""

    def __init__(self, cmd: tuple[str, ...], env: dict[str, str]) -> None:
        self.proc = subprocess.Popen(
            list(cmd),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
            env=env,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def request(self, payload: dict, budget_s: float) -> tuple[str, dict | None]:
        """Send one request; returns ("ok", response) | ("timeout", None) | ("lost", None)."""
        assert self.proc.stdin is not None
        try:
            self.proc.stdin.write(json.dumps(payload) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            return "lost", None
        try:
            line = self._lines.get(timeout=budget_s)
        except queue.Empty:
            return "timeout", None
        if line is None:
            return "lost", None
        try:
            return "ok", json.loads(line)
        except json.JSONDecodeError:
            return "lost", None

    def kill(self) -> None:
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass


class ProcessPoolBackend(SandboxBackend):
    """Supervises a pool of single-job-at-a-time worker processes.

    A worker that misses its deadline is killed and replaced; a crashed
    worker yields a "worker-lost" result. Safe to call from multiple
    threads; results of ``run_many`` keep input order.
    """

    def __init__(self, worker_cmd: tuple[str, ...] | None = None,
                 env: dict[str, str] | None = None) -> None:
        self._cmd = tuple(worker_cmd) if worker_cmd else resolve_worker_cmd()
        base = dict(os.environ if env is None else env)
        base["PYTHONHASHSEED"] = "0"
        self._env = base
        self._idle: queue.SimpleQueue[_Worker] = queue.SimpleQueue()
        self._all: list[_Worker] = []
        self._lock = threading.Lock()
        self._closed = False

    def _acquire(self) -> _Worker:
        try:
            worker = self._idle.get_nowait()
            if worker.proc.poll() is None:
                return worker
            worker.kill()
        except queue.Empty:
            pass
        worker = _Worker(self._cmd, self._env)
        with self._lock:
            self._all.append(worker)
        return worker

    def _discard(self, worker: _Worker) -> None:
        worker.kill()
        with self._lock:
            if worker in self._all:
                self._all.remove(worker)

    def run(self, job: SandboxJob):
        if self._closed:
            raise RuntimeError("backend closed")
        worker = self._acquire()
        start = time.perf_counter()
        status, response = worker.request(job.to_request(), job.budget_ms() / 1000.0)
        elapsed_ms = int((time.perf_counter() - start) * 1000)
        if status == "ok":
            self._idle.put(worker)
            return _decode_response(job, response, elapsed_ms)
        self._discard(worker)
        if status == "timeout":
            return _timeout_result(job, elapsed_ms)
        return _lost_result(job, elapsed_ms)

    def run_many(self, jobs: list[SandboxJob], parallelism: int = 1) -> list:
        if not jobs:
            return []
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if parallelism == 1 or len(jobs) == 1:
            return [self.run(job) for job in jobs]
        results: list = [None] * len(jobs)
        with ThreadPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
            futures = {pool.submit(self.run, job): i for i, job in enumerate(jobs)}
            for future, i in futures.items():
                results[i] = future.result()
        return results

    def close(self) -> None:
        self._closed = True
        with self._lock:
            workers = list(self._all)
            self._all.clear()
        for worker in workers:
            worker.kill()


def _decode_response(job: SandboxJob, response: dict, elapsed_ms: int):
    if not isinstance(response, dict):
        return _lost_result(job, elapsed_ms)
    if job.kind is JobKind.PARSE:
        if not response.get("ok"):
            return ParseReport(ok=False, error=str(response.get("error", "parse failed")))
        raw_param = response.get("first_param")
        first_param = None
        if raw_param:
            first_param = FirstParam(name=str(raw_param.get("name", "")),
                                     annotation=raw_param.get("annotation"))
        return ParseReport(
            ok=True,
            fn_name=response.get("fn_name"),
            first_param=first_param,
            defaults_src=str(response.get("defaults_src", "")),
            required_params=int(response.get("required_params", 0)),
            extra_defs=int(response.get("extra_defs", 0)),
            ast_node_count=int(response.get("ast_nodes", 0)),
        )
    if job.kind is JobKind.PROBE:
        if not response.get("ok"):
            return ProbeResult(None, elapsed_ms, 0,
                               str(response.get("error", "probe failed")))
        witness = response.get("witness")
        return ProbeResult(
            witness if witness is None else str(witness),
            int(response.get("wall_ms", elapsed_ms)),
            int(response.get("checked", 0)),
        )
    if not response.get("ok"):
        return Verdict(VerdictKind.RUNTIME_ERROR,
                       str(response.get("error", "bad response")), elapsed_ms)
    try:
        kind = VerdictKind(response.get("verdict"))
    except ValueError:
        return Verdict(VerdictKind.RUNTIME_ERROR,
                       f"unknown verdict {response.get('verdict')!r}", elapsed_ms)
    return Verdict(kind, str(response.get("detail", "")),
                   int(response.get("wall_ms", elapsed_ms)))


def _timeout_result(job: SandboxJob, elapsed_ms: int):
    wall = max(elapsed_ms, job.timeout_ms)
    if job.kind is JobKind.PARSE:
        return ParseReport(ok=False, error="timeout")
    if job.kind is JobKind.PROBE:
        return ProbeResult(None, wall, 0, "timeout")
    return Verdict(VerdictKind.TIMEOUT, "supervisor-kill", wall)


def _lost_result(job: SandboxJob, elapsed_ms: int):
    if job.kind is JobKind.PARSE:
        return ParseReport(ok=False, error="worker-lost")
    if job.kind is JobKind.PROBE:
        return ProbeResult(None, elapsed_ms, 0, "worker-lost")
    return Verdict(VerdictKind.RUNTIME_ERROR, "worker-lost", elapsed_ms)


def judge(puzzle: Puzzle, solution: Solution, backend: SandboxBackend,
          timeout_ms: int = DEFAULT_TIMEOUT_MS, truthy: bool = False) -> JudgedPair:
    """Verify one pair: Correct iff ``f(g())`` returns the boolean True in time.

    Sources failing the static screen get a Disallowed verdict without
    touching the sandbox.
    """
    violation = static_screen(puzzle.f_src) or static_screen(solution.g_src)
    if violation is not None:
        return JudgedPair(puzzle, solution,
                          Verdict(VerdictKind.DISALLOWED, violation, 0))
    job = SandboxJob.judge(puzzle.f_src, solution.g_src, timeout_ms, truthy)
    verdict = backend.run(job)
    return JudgedPair(puzzle, solution, verdict)


def judge_batch(pairs: list[tuple[Puzzle, Solution]], parallelism: int,
                backend: SandboxBackend, timeout_ms: int = DEFAULT_TIMEOUT_MS,
                truthy: bool = False) -> list[JudgedPair]:
    """Judge pairs concurrently; results are returned in input order."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    results: list[JudgedPair | None] = [None] * len(pairs)
    jobs: list[SandboxJob] = []
    pending: list[int] = []
    for i, (puzzle, solution) in enumerate(pairs):
        violation = static_screen(puzzle.f_src) or static_screen(solution.g_src)
        if violation is not None:
            results[i] = JudgedPair(puzzle, solution,
                                    Verdict(VerdictKind.DISALLOWED, violation, 0))
        else:
            jobs.append(SandboxJob.judge(puzzle.f_src, solution.g_src,
                                         timeout_ms, truthy))
            pending.append(i)
    verdicts = backend.run_many(jobs, parallelism)
    for i, verdict in zip(pending, verdicts):
        puzzle, solution = pairs[i]
        results[i] = JudgedPair(puzzle, solution, verdict)
    return results  # type: ignore[return-value]
