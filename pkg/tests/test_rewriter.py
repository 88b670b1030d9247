import zlib
from collections import Counter

import pytest

from saptc.dsl import parse_term
from saptc.messages import Const, Var
from saptc.rewriter import (
    RULES, RULES_BY_NAME, ContainsRecursion, NotClosed, RewriteBudgetExceeded, apply_rule,
    prove_equal, random_pair, random_term, redex, to_basic_term,
)
from saptc.terms import Act, ActionEvent, show_term

from helpers import seeded, terms_equivalent


def nf(text, mode="strong"):
    return show_term(to_basic_term(parse_term(text), mode))


@pytest.mark.parametrize("text, expected, mode", [
    ("(a + a) . b", "a . b", "strong"),
    ("delta . a", "delta", "strong"),
    ("[isFresh(N)] (a + b)", "[isFresh(N)] a + [isFresh(N)] b", "strong"),
    ("a || b . c", "(a || b) . c", "strong"),
    ("shadow . a", "a", "rooted_branching"),
    ("a . tau", "a", "rooted_branching"),
    ("a . tau . b", "a . b", "rooted_branching"),
])
def test_normal_form_examples(text, expected, mode):
    assert nf(text, mode) == expected


@pytest.mark.parametrize("p, q, mode", [
    ("a + delta", "a", "strong"),
    ("a . tau", "a", "rooted_branching"),
    ("a || b", "b || a", "strong"),
    ("(a + b) + c", "c + (b + a)", "strong"),
    ("a <> b", "a . b + b . a + a || b", "strong"),
])
def test_proven(p, q, mode):
    assert prove_equal(parse_term(p), parse_term(q), mode) == "proven"


@pytest.mark.parametrize("p, q, mode", [
    ("a . b", "b . a", "strong"),
    ("a || b", "a . b + b . a", "strong"),
    ("tau . a", "a", "rooted_branching"),
    ("a . tau", "a", "strong"),
])
def test_unknown(p, q, mode):
    assert prove_equal(parse_term(p), parse_term(q), mode) == "unknown"


def test_normal_form_is_basic():
    # only prefixes, guards, sums and parallel event steps survive
    out = nf("encap{b}(abs{c}(a <> (b + c . a)))")
    assert "encap" not in out and "abs" not in out and "<>" not in out


def test_sum_needs_domains():
    t = parse_term("sum d in Delta . r(d)")
    with pytest.raises(NotClosed):
        to_basic_term(t)
    out = to_basic_term(t, domains={"Delta": (Const("D1"), Const("D2"))})
    assert show_term(out) == "r(D1) + r(D2)"


def test_free_variable_not_closed():
    with pytest.raises(NotClosed):
        to_basic_term(Act(ActionEvent("s_C", (Var("x"),))))


def test_recursion_rejected():
    with pytest.raises(ContainsRecursion):
        to_basic_term(parse_term("a . X", recvars=("X",)))


def test_budget():
    t = parse_term("(a <> b) <> (c <> a)")
    with pytest.raises(RewriteBudgetExceeded):
        to_basic_term(t, budget=3)
    to_basic_term(t)


def test_termination_within_budget():
    rng = seeded(2)
    for _ in range(200):
        to_basic_term(random_term(rng, depth=5))
        to_basic_term(random_term(rng, depth=5), "rooted_branching")


def test_normal_form_preserves_behaviour():
    rng = seeded(3)
    for _ in range(150):
        t = random_term(rng, depth=3)
        assert terms_equivalent(t, to_basic_term(t), "strong"), show_term(t)
        assert terms_equivalent(t, to_basic_term(t, "rooted_branching"), "rooted_branching")


def test_normal_form_is_idempotent():
    rng = seeded(4)
    for _ in range(100):
        once = to_basic_term(random_term(rng, depth=3))
        assert to_basic_term(once) == once


def test_rule_table():
    names = [r.name for r in RULES]
    assert len(names) == len(set(names))
    families = Counter(r.family for r in RULES)
    assert set(families) == {"A", "G", "P", "C", "CE", "U", "D", "TI", "B", "SC"}
    for r in RULES:
        expected = "rooted_branching" if r.family in ("B", "TI", "SC") else "strong"
        assert r.mode == expected, r.name
    assert {"A3", "A7", "G4", "P2", "SC1", "B1", "B2"} <= set(RULES_BY_NAME)


@pytest.mark.parametrize("rule", RULES, ids=lambda r: r.name)
def test_rule_sample(rule):
    rng = seeded(zlib.crc32(rule.name.encode()))
    for _ in range(10):
        t, conflict = redex(rule, rng)
        out = apply_rule(rule, t, conflict)
        assert out is not None, show_term(t)
        assert terms_equivalent(t, out, rule.mode, conflict), (show_term(t), show_term(out))


def test_rules_reject_non_redexes():
    a = parse_term("a")
    for rule in RULES:
        assert apply_rule(rule, a, frozenset()) is None, rule.name


def test_random_pairs_proven_only_if_equivalent():
    rng = seeded(5)
    proven = 0
    for _ in range(60):
        p, q = random_pair(rng)
        for mode in ("strong", "rooted_branching"):
            if prove_equal(p, q, mode) == "proven":
                proven += 1
                assert terms_equivalent(p, q, mode), (show_term(p), show_term(q))
    assert proven > 10
