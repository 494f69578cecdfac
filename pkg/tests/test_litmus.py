import pytest
from conftest import ROOT, load_corpus_test

from memodel.litmus import (Branch, Fence, LitmusError, Load, OutcomeCondition,
                            RegOp, Store, eval_condition, parse_litmus,
                            print_litmus)

SPEC_EXAMPLE = """\
name: example
locations: x=0 y=0 z=0
thread P0:
  St x = 1
  Fence Full
  St y = 1
thread P1:
  r1 = Ld y
  r2 = Ld z + r1 - r1
L0: r3 = r1 + 1
  br r1 == 0, L1
  St y = 2
L1: r4 = Ld x
exists: P1:r1=1 /\\ P1:r2=0
"""


def test_parse_spec_example():
    t = parse_litmus(SPEC_EXAMPLE)
    assert t.name == "example"
    assert t.location_names == ("x", "y", "z")
    p0, p1 = t.threads
    assert [type(i) for i in p0[1]] == [Store, Fence, Store]
    assert p0[1][1].name == "Full"
    assert [type(i) for i in p1[1]] == [Load, Load, RegOp, Branch, Store, Load]
    br = p1[1][3]
    assert br.target == "L1" and br.target_index == 5
    assert p1[1][2].label == "L0"


def test_rsw_has_seven_instructions():
    t = load_corpus_test("rsw")
    assert sum(len(instrs) for _, instrs in t.threads) == 7


def test_empty_threads_valid():
    t = parse_litmus("name: empty\nlocations: x=0\nforall: x=0\n")
    assert t.threads == ()
    assert t.outcome_keys() == ("x",)


def test_backward_branch_rejected():
    text = """\
name: bad
locations: x=0
thread P0:
L0: r1 = Ld x
  br r1 == 0, L0
exists: P0:r1=0
"""
    with pytest.raises(LitmusError, match="not strictly later"):
        parse_litmus(text)


def test_branch_to_missing_label_rejected():
    text = "name: bad\nlocations: x=0\nthread P0:\n  r1 = Ld x\n" \
           "  br r1 == 0, NOPE\nexists: P0:r1=0\n"
    with pytest.raises(LitmusError, match="not found"):
        parse_litmus(text)


def test_undeclared_location_rejected():
    text = "name: bad\nlocations: x=0\nthread P0:\n  St q = 1\nexists: x=0\n"
    with pytest.raises(LitmusError, match="undeclared location 'q'"):
        parse_litmus(text)


def test_condition_validation():
    base = "name: bad\nlocations: x=0\nthread P0:\n  r1 = Ld x\n"
    with pytest.raises(LitmusError, match="unknown thread"):
        parse_litmus(base + "exists: P9:r1=0\n")
    with pytest.raises(LitmusError, match="unknown register"):
        parse_litmus(base + "exists: P0:r7=0\n")
    with pytest.raises(LitmusError, match="undeclared location"):
        parse_litmus(base + "exists: y=0\n")


def test_duplicate_location_rejected():
    with pytest.raises(LitmusError, match="duplicate location"):
        parse_litmus("name: bad\nlocations: x=0 x=1\nforall:\n")


def test_syntax_error_carries_line():
    text = "name: bad\nlocations: x=0\nthread P0:\n  Ld x into r1\nexists: x=0\n"
    with pytest.raises(LitmusError, match="line 4"):
        parse_litmus(text)


def test_corpus_round_trips():
    for path in sorted((ROOT / "corpus").glob("*.litmus")):
        t = parse_litmus(path.read_text())
        assert parse_litmus(print_litmus(t)) == t, path.name


OUTCOMES = frozenset([
    (("P0:r1", 0), ("x", 1)),
    (("P0:r1", 1), ("x", 1)),
])


def _cond(quant, clauses):
    from memodel.litmus import Clause
    return OutcomeCondition(quant, tuple(Clause(*c) for c in clauses))


def test_eval_condition_exists():
    assert eval_condition(_cond("exists", [("P0", "r1", 1)]), OUTCOMES) == "witnessed"
    assert eval_condition(_cond("exists", [("P0", "r1", 2)]), OUTCOMES) == "never"


def test_eval_condition_forbidden():
    assert eval_condition(_cond("forbidden", [("P0", "r1", 2)]), OUTCOMES) == "never"
    assert eval_condition(_cond("forbidden", [("P0", "r1", 0)]), OUTCOMES) == "witnessed"


def test_eval_condition_forall():
    assert eval_condition(_cond("forall", [(None, "x", 1)]), OUTCOMES) == "always"
    assert eval_condition(_cond("forall", [("P0", "r1", 0)]), OUTCOMES) == "witnessed"


def test_eval_condition_order_independent():
    cond = _cond("exists", [("P0", "r1", 1)])
    assert eval_condition(cond, sorted(OUTCOMES)) == \
        eval_condition(cond, sorted(OUTCOMES, reverse=True))
