from __future__ import annotations

import ast
import itertools

import pytest

from puzzleforge.judge import LocalBackend, SandboxJob
from puzzleforge.model import BOOL, FLOAT, INT, STR, TypeHint, list_of
from puzzleforge.trivial import (
    UnsupportedDepth,
    candidate_values,
    is_trivial,
)

from conftest import FIG1_F, make_puzzle


# ---------------------------------------------------------------------------
# Independent oracle: restate the candidate pools from scratch and evaluate
# the verifier on every one of them with a plain exec/eval full scan.

def oracle_pool(hint: TypeHint):
    if hint.kind == "int":
        return list(range(-10, 101))
    if hint.kind == "float":
        return [-100.0, -10.0, -2.0, -1.0, -0.5, -0.1, 0.0,
                0.1, 0.5, 1.0, 2.0, 10.0, 100.0]
    if hint.kind == "str":
        return ["cat", "dog", "aa", "ab", "foo", "bar", "baz", ""]
    if hint.kind == "bool":
        return [True, False]
    assert hint.inner is not None
    element = hint.inner
    if element.kind == "int":
        items = list(range(-3, 4))
    elif element.kind == "float":
        items = [-1.0, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0]
    elif element.kind == "str":
        items = ["a", "b", "foo", "bar", "baz"]
    elif element.kind == "bool":
        items = [True, False]
    else:
        items = oracle_pool(element)
    values = []
    for length in range(4):
        values.extend(list(c) for c in itertools.product(items, repeat=length))
    return values


def oracle_is_trivial(f_src: str, hint: TypeHint):
    """Full-scan triviality: first value making the verifier return True."""
    if hint.kind == "bool":
        return True, None
    import typing

    ns = {"List": typing.List}
    exec(f_src, ns)
    fn_name = next(node.name for node in ast.parse(f_src).body
                   if isinstance(node, ast.FunctionDef))
    fn = ns[fn_name]
    for value in oracle_pool(hint):
        try:
            if fn(value) is True:
                return True, repr(value) if not isinstance(value, int) else str(value)
        except Exception:
            continue
    return False, None


class TestCandidateValues:
    def test_int_cardinality_and_order(self):
        values = candidate_values(INT)
        assert len(values) == 111
        assert values[0] == "-10"
        assert values[-1] == "100"
        assert values == [str(v) for v in range(-10, 101)]

    def test_float_set(self):
        values = candidate_values(FLOAT)
        assert len(values) == 13
        assert values == ['-100.0', '-10.0', '-2.0', '-1.0', '-0.5', '-0.1',
                          '0.0', '0.1', '0.5', '1.0', '2.0', '10.0', '100.0']

    def test_str_set_includes_empty(self):
        values = candidate_values(STR)
        assert len(values) == 8
        assert "''" in values
        assert ast.literal_eval(values[0]) == "cat"

    @pytest.mark.parametrize("hint,expected", [
        (list_of(INT), 400),        # 1 + 7 + 7^2 + 7^3
        (list_of(FLOAT), 400),
        (list_of(STR), 156),        # 1 + 5 + 25 + 125
        (list_of(BOOL), 15),        # 1 + 2 + 4 + 8
        (list_of(list_of(BOOL)), 3616),  # 1 + 15 + 15^2 + 15^3
    ])
    def test_list_cardinalities_match_enumeration_oracle(self, hint, expected):
        values = candidate_values(hint)
        assert len(values) == expected
        assert len(oracle_pool(hint)) == expected

    def test_list_values_parse_back(self):
        for text in candidate_values(list_of(INT))[:50]:
            assert isinstance(ast.literal_eval(text), list)

    def test_nested_int_list_exceeds_cap(self):
        with pytest.raises(UnsupportedDepth):
            candidate_values(list_of(list_of(INT)))

    def test_order_matches_oracle(self):
        ours = [ast.literal_eval(t) for t in candidate_values(list_of(STR))]
        assert ours == oracle_pool(list_of(STR))


class TestIsTrivial:
    def test_bool_puzzle_trivial_without_probing(self):
        puzzle = make_puzzle("def f(b: bool):\n    return not b")

        class Exploding:
            def run(self, job):
                raise AssertionError("bool puzzles must not be probed")

        result = is_trivial(puzzle, Exploding())
        assert result.trivial and result.witness is None

    def test_small_constant_witness(self, local_backend):
        puzzle = make_puzzle("def f(n: int):\n    return n == 5")
        result = is_trivial(puzzle, local_backend)
        assert result.trivial
        assert result.witness == "5"

    def test_fig1_not_trivial(self, local_backend, fig1_puzzle):
        result = is_trivial(fig1_puzzle, local_backend)
        assert not result.trivial
        assert result.witness is None

    def test_probe_errors_are_non_witnesses(self, local_backend):
        puzzle = make_puzzle("def f(n: int):\n    return 1 // n > 0")
        result = is_trivial(puzzle, local_backend)
        assert result.trivial
        assert result.witness == "1"

    def test_first_witness_in_pool_order(self, local_backend):
        puzzle = make_puzzle("def f(n: int):\n    return n >= 50")
        assert is_trivial(puzzle, local_backend).witness == "50"

    def test_deep_nesting_kept_conservatively(self, local_backend):
        puzzle = make_puzzle(
            "def f(m: List[List[int]]):\n    return m == [[0]]")
        result = is_trivial(puzzle, local_backend)
        assert not result.trivial
        assert "cap" in result.detail

    def test_screened_puzzle_not_probed(self):
        puzzle = make_puzzle(
            "def f(n: int):\n    return n == len(str(os.environ))")

        class Exploding:
            def run(self, job):
                raise AssertionError("screened puzzles must not be probed")

        result = is_trivial(puzzle, Exploding())
        assert not result.trivial

    def test_witness_soundness(self, local_backend):
        sources_hints = [
            ("def f(n: int):\n    return n * n == 169", INT),
            ("def f(x: float):\n    return abs(x - 0.5) < 1e-9", FLOAT),
            ("def f(s: str):\n    return len(s) == 2", STR),
            ("def f(li: List[int]):\n    return sum(li) == 6", list_of(INT)),
        ]
        import typing

        for src, hint in sources_hints:
            puzzle = make_puzzle(src)
            result = is_trivial(puzzle, local_backend)
            assert result.trivial
            ns = {"List": typing.List}
            exec(src, ns)
            assert ns["f"](ast.literal_eval(result.witness)) is True

    def test_prefix_monotonicity(self, local_backend):
        # a witness found in a pool prefix stays the witness for the full pool
        puzzle = make_puzzle("def f(n: int):\n    return n % 37 == 5")
        full = candidate_values(INT)
        short = local_backend.run(SandboxJob.probe(puzzle.f_src, tuple(full[:60])))
        long = local_backend.run(SandboxJob.probe(puzzle.f_src, tuple(full)))
        assert short.witness is not None
        assert short.witness == long.witness

    def test_agrees_with_oracle_on_mixed_corpus(self, local_backend):
        corpus = [
            ("def f(n: int):\n    return n == 99", INT),
            ("def f(n: int):\n    return n == 101", INT),
            (FIG1_F, INT),
            ("def f(x: float):\n    return x == 3.25", FLOAT),
            ("def f(x: float):\n    return x == -0.5", FLOAT),
            ("def f(s: str):\n    return s == 'qux'", STR),
            ("def f(s: str):\n    return s == ''", STR),
            ("def f(b: bool):\n    return b", BOOL),
            ("def f(li: List[int]):\n    return li == [3, 3, 3]", list_of(INT)),
            ("def f(li: List[int]):\n    return li == list(range(5))", list_of(INT)),
            ("def f(ls: List[str]):\n    return ls == ['foo', 'bar']", list_of(STR)),
        ]
        for src, hint in corpus:
            puzzle = make_puzzle(src)
            ours = is_trivial(puzzle, local_backend)
            expected_trivial, expected_witness = oracle_is_trivial(src, hint)
            assert ours.trivial == expected_trivial, src
            if expected_trivial and hint.kind != "bool":
                assert ours.witness is not None
                assert ast.literal_eval(ours.witness) == \
                    ast.literal_eval(expected_witness), src
