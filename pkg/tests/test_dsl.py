import pytest

from saptc import messages as M
from saptc.dsl import (
    ParseError, SourceModel, parse, parse_equation, parse_guard, parse_message, parse_term,
    pretty, tokenize,
)
from saptc.protocols import CATALOGUE, builtin, source
from saptc.terms import (
    DELTA, Act, ActionEvent, Alt, Between, Encap, Eq, RecVar, Seq, SumData, act, show_term,
)

from helpers import random_model, seeded


def test_alice_equation():
    eq = parse_equation("A = sum D in Delta . rCA(D) . af . sCAB(D) . A")
    d = M.Var("D")
    assert eq.name == "A" and eq.params == ()
    assert eq.body == SumData("D", "Delta", Seq(
        Act(ActionEvent("r_CA", (d,))),
        Seq(act("af"), Seq(Act(ActionEvent("s_CAB", (d,))), RecVar("A")))))


def test_empty_input():
    with pytest.raises(ParseError) as exc:
        parse("")
    assert exc.value.position == 0
    assert exc.value.expected == ["model header"]


@pytest.mark.parametrize("text", [
    "model", "model m\nprincipal A {", "model m\ncompose { S = a . }",
    "model m\ncompose { S = (a }", "model m\ncompose { S = a ~ b }",
    "model m\ndomain D = {A,\n", "model m\ncompose { S = [x == ] a }",
])
def test_errors_carry_position_and_expectation(text):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert 0 <= exc.value.position <= len(text)
    assert exc.value.expected


def test_pretty_flattens_alternatives():
    t = Alt(act("a"), Alt(act("b"), act("c")))
    assert show_term(t) == "a + b + c"
    assert show_term(DELTA) == "delta"


def test_unicode_aliases():
    assert parse_term("a ≬ b") == parse_term("a <> b")
    assert parse_term("∂{a}(a · b)") == parse_term("encap{a}(a . b)")
    assert parse_term("τ") == parse_term("tau")
    assert parse_term("a ∥ b") == parse_term("a || b")
    assert isinstance(parse_term("a ≬ b"), Between)
    assert isinstance(parse_term("∂{a}(a)"), Encap)


def test_precedence():
    # . binds tighter than the parallel operators, which bind tighter than +
    assert parse_term("a . b + c") == Alt(Seq(act("a"), act("b")), act("c"))
    assert parse_term("a + b <> c") == Alt(act("a"), Between(act("b"), act("c")))


def test_messages_and_guards():
    m = parse_message("enc_s(key(AB), (A, N))")
    assert m == M.EncSym(M.SymKey(M.Const("AB")), M.Tuple((M.Const("A"), M.Const("N"))))
    assert parse_message("xor(R1, R2, D)") == M.Xor((M.Const("R1"), M.Const("R2"), M.Const("D")))
    g = parse_guard("d1 == B", env={"d1": M.Var("d1")})
    assert g == Eq(M.Var("d1"), M.Const("B"))


def test_comments_and_whitespace():
    kinds = [k for k, _, _ in tokenize("a . # note\n b")]
    assert kinds == ["name", "op", "name", "eof"]


@pytest.mark.parametrize("name", CATALOGUE)
def test_builtin_round_trip(name):
    m = builtin(name)
    assert parse(pretty(m)) == m
    assert pretty(parse(pretty(m))).text == pretty(m).text


def test_shipped_source_parses_to_builtin():
    for name in CATALOGUE:
        assert parse(source(name)) == builtin(name)


def test_random_model_round_trip():
    rng = seeded(7)
    for i in range(500):
        m = random_model(rng, i)
        text = pretty(m).text
        assert parse(text) == m, text


def test_spans_point_at_blocks_and_equations():
    sm = pretty(builtin("needham-schroeder"))
    data = sm.text.encode("utf-8")
    assert sm.spans
    for label, start, end in sm.spans:
        assert 0 <= start < end <= len(data)
        chunk = data[start:end].decode("utf-8")
        assert chunk.startswith(label)
    start, end = sm.span("compose")
    assert data[start:end].decode().endswith("}")


def test_parse_accepts_source_model():
    sm = pretty(builtin("abp"))
    assert parse(SourceModel(sm.text)) == builtin("abp")
