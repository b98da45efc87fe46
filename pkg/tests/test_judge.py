from __future__ import annotations

import time

import pytest

from puzzleforge.judge import (
    LocalBackend,
    ProbeResult,
    ProcessPoolBackend,
    SandboxJob,
    ScriptedBackend,
    judge,
    judge_batch,
    static_screen,
)
from puzzleforge.model import GenMeta, Solution, Verdict, VerdictKind

from conftest import FAKE_WORKER_CMD, FIG1_F, FIG1_G, make_puzzle

META = GenMeta("test", 0.9, 0)


def sol(g_src: str) -> Solution:
    return Solution.from_src(g_src, META)


class TestStaticScreen:
    @pytest.mark.parametrize("src", [
        "def g(): return 5",
        "def g(): return 'imported goods'",
        "def g(): return importance + 1",
        "def g(): return macos.version",
        "def g(): return opening",
    ])
    def test_clean_sources_pass(self, src):
        assert static_screen(src) is None

    @pytest.mark.parametrize("src,token", [
        ("def g(): import os; return 1", "import"),
        ("def g(): return __import__('os')", "__import__"),
        ("def g(): return open('/etc/passwd')", "open"),
        ("def g(): exec('x = 1')", "exec"),
        ("def g(): return eval('1')", "eval"),
        ("def g(): return compile('1', '', 'eval')", "compile"),
        ("def g(): return globals()", "globals"),
        ("def g(): return os.getcwd()", "os."),
        ("def g(): return sys.path", "sys."),
        ("def g(): return subprocess", "subprocess"),
    ])
    def test_denylisted_tokens_flagged(self, src, token):
        assert static_screen(src) == token


class TestLocalBackendJudge:
    def test_fig1_pair_correct(self, local_backend, fig1_puzzle):
        pair = judge(fig1_puzzle, sol(FIG1_G), local_backend)
        assert pair.verdict.kind is VerdictKind.CORRECT

    def test_wrong_answer(self, local_backend, fig1_puzzle):
        pair = judge(fig1_puzzle, sol("def g():\n    return 0"), local_backend)
        assert pair.verdict.kind is VerdictKind.WRONG_ANSWER

    def test_truthy_return_is_not_correct_by_default(self, local_backend):
        puzzle = make_puzzle("def f(x: int):\n    return x")
        pair = judge(puzzle, sol("def g():\n    return 1"), local_backend)
        assert pair.verdict.kind is VerdictKind.WRONG_ANSWER

    def test_truthy_mode_accepts_truthy(self, local_backend):
        puzzle = make_puzzle("def f(x: int):\n    return x")
        pair = judge(puzzle, sol("def g():\n    return 1"), local_backend,
                     truthy=True)
        assert pair.verdict.kind is VerdictKind.CORRECT

    def test_syntax_error_is_parse_error(self, local_backend, fig1_puzzle):
        pair = judge(fig1_puzzle, sol("def g(:\n    return 1"), local_backend)
        assert pair.verdict.kind is VerdictKind.PARSE_ERROR

    def test_raising_solution_is_runtime_error(self, local_backend, fig1_puzzle):
        pair = judge(fig1_puzzle, sol("def g():\n    return 1 // 0"),
                     local_backend)
        assert pair.verdict.kind is VerdictKind.RUNTIME_ERROR

    def test_removed_builtin_raises_inside_job(self, local_backend, fig1_puzzle):
        # dispatch directly so the namespace removal is what gets exercised,
        # not the pre-dispatch screen
        job = SandboxJob.judge(fig1_puzzle.f_src,
                               "def g():\n    return open('/etc/hosts')")
        verdict = local_backend.run(job)
        assert verdict.kind is VerdictKind.RUNTIME_ERROR
        assert "NameError" in verdict.detail

    def test_typing_names_available_for_annotations(self, local_backend):
        puzzle = make_puzzle("def f(li: List[int]):\n    return li == [1, 2]")
        pair = judge(puzzle, sol("def g():\n    return [1, 2]"), local_backend)
        assert pair.verdict.kind is VerdictKind.CORRECT


class TestJudgeScreening:
    def test_disallowed_solution_never_dispatches(self, fig1_puzzle):
        def boom(job):
            raise AssertionError("dispatched a screened pair")

        pair = judge(fig1_puzzle, sol("def g():\n    import os\n    return 1"),
                     ScriptedBackend(boom))
        assert pair.verdict.kind is VerdictKind.DISALLOWED
        assert pair.verdict.detail == "import"

    def test_disallowed_puzzle_never_dispatches(self):
        puzzle = make_puzzle("def f(x: int):\n    return x == len(str(os.getcwd))")
        pair = judge(puzzle, sol("def g():\n    return 1"),
                     ScriptedBackend(lambda job: (_ for _ in ()).throw(AssertionError())))
        assert pair.verdict.kind is VerdictKind.DISALLOWED


class TestJudgeBatchLocal:
    def test_order_preserved(self, local_backend, fig1_puzzle):
        pairs = [
            (fig1_puzzle, sol("def g():\n    return 174653 - 50000")),
            (fig1_puzzle, sol("def g():\n    return 0")),
            (fig1_puzzle, sol("def g():\n    return 124653")),
        ]
        judged = judge_batch(pairs, 1, local_backend)
        kinds = [p.verdict.kind for p in judged]
        assert kinds == [VerdictKind.CORRECT, VerdictKind.WRONG_ANSWER,
                         VerdictKind.CORRECT]

    def test_empty_batch(self, local_backend):
        assert judge_batch([], 4, local_backend) == []

    def test_bad_parallelism(self, local_backend):
        with pytest.raises(ValueError):
            judge_batch([], 0, local_backend)


class TestProcessPoolSupervisor:
    def test_order_timeout_and_crash_isolation(self, fig1_puzzle):
        pairs = [
            (fig1_puzzle, sol("def g():\n    return 1  # ok0")),
            (fig1_puzzle, sol("def g():\n    return 'SLEEP'")),
            (fig1_puzzle, sol("def g():\n    return 'CRASH'")),
            (fig1_puzzle, sol("def g():\n    return 1  # ok3")),
            (fig1_puzzle, sol("def g():\n    return 1  # ok4")),
        ]
        with ProcessPoolBackend(worker_cmd=FAKE_WORKER_CMD) as backend:
            started = time.perf_counter()
            judged = judge_batch(pairs, 2, backend, timeout_ms=300)
            elapsed = time.perf_counter() - started
        kinds = [p.verdict.kind for p in judged]
        assert kinds == [
            VerdictKind.CORRECT,
            VerdictKind.TIMEOUT,
            VerdictKind.RUNTIME_ERROR,
            VerdictKind.CORRECT,
            VerdictKind.CORRECT,
        ]
        assert judged[1].verdict.wall_ms >= 300
        assert judged[2].verdict.detail == "worker-lost"
        # hung worker was killed, not waited out
        assert elapsed < 5.0

    def test_hash_seed_pinned_in_worker_env(self, fig1_puzzle):
        with ProcessPoolBackend(worker_cmd=FAKE_WORKER_CMD) as backend:
            pair = judge(fig1_puzzle, sol("def g():\n    return 'HASHSEED'"),
                         backend)
        assert pair.verdict.detail == "0"

    def test_workers_reused_across_jobs(self, fig1_puzzle):
        with ProcessPoolBackend(worker_cmd=FAKE_WORKER_CMD) as backend:
            for _ in range(3):
                pair = judge(fig1_puzzle, sol("def g():\n    return 1"), backend)
                assert pair.verdict.kind is VerdictKind.CORRECT
            assert len(backend._all) == 1


class TestLocalBackendProbe:
    def test_witness_found_in_order(self, local_backend):
        job = SandboxJob.probe("def f(n: int):\n    return n >= 50",
                               tuple(str(v) for v in range(-10, 101)))
        result = local_backend.run(job)
        assert isinstance(result, ProbeResult)
        assert result.witness == "50"

    def test_probe_errors_skipped(self, local_backend):
        job = SandboxJob.probe("def f(n: int):\n    return 1 // n > 0",
                               tuple(str(v) for v in range(-10, 101)))
        result = local_backend.run(job)
        assert result.witness == "1"

    def test_exactly_true_required(self, local_backend):
        job = SandboxJob.probe("def f(n: int):\n    return 1",
                               ("0", "1", "2"))
        result = local_backend.run(job)
        assert result.witness is None
        assert result.checked == 3


class TestScriptedBackend:
    def test_list_script_replays_in_order(self):
        backend = ScriptedBackend([Verdict(VerdictKind.CORRECT),
                                   Verdict(VerdictKind.TIMEOUT, wall_ms=1000)])
        job = SandboxJob.judge("def f(x: int): return True", "def g(): return 1")
        assert backend.run(job).kind is VerdictKind.CORRECT
        assert backend.run(job).kind is VerdictKind.TIMEOUT
        with pytest.raises(AssertionError):
            backend.run(job)
