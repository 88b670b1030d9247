import re

import pytest

from saptc.dsl import parse_term
from saptc.equivalence import strong_step_bisim
from saptc.messages import Const, Var
from saptc.model import alphabet, resolve
from saptc.protocols import CATALOGUE, builtin
from saptc.semantics import (
    EMPTY_STATE, BuildConfig, DataState, Semantics, StateSpaceExceeded, Truth, UngroundGuard,
    eval_guard, generate_lts, term_lts, transitions,
)
from saptc.terms import (
    EPS, FALSE, TRUE, Alt, Atom, Between, Eq, Epsilon, Seq, act, show_term,
)

from helpers import seeded


def steps(text):
    return sorted((label, show_term(r)) for label, r, _ in transitions(parse_term(text)))


def test_parallel_is_one_step():
    assert steps("a || b") == [("{a,b}", "eps")]


def test_between_interleaves_and_steps():
    assert steps("a <> b") == [("a", "b"), ("b", "a"), ("{a,b}", "eps")]


def test_encapsulation_blocks():
    assert steps("encap{a}(a . b)") == []


def test_abstraction_renames_to_tau():
    out = transitions(parse_term("abs{a}(a . b)"))
    assert len(out) == 1
    label, residue, state = out[0]
    assert label == "tau" and state == EMPTY_STATE
    assert steps(show_term(residue)) == [("b", "eps")]


def test_communication_substitutes_receive():
    t = parse_term("s_C(D) . p | r_C(d) . q(d)")
    out = transitions(t)
    assert [(label, show_term(r)) for label, r, _ in out] == [("c_C(D)", "p <> q(D)")]


def test_eval_guard_examples():
    assert eval_guard(TRUE) is Truth.TRUE
    assert eval_guard(FALSE) is Truth.FALSE
    s = DataState(bindings=(("d1", Const("B")),))
    assert eval_guard(Eq(Var("d1"), Const("B")), s) is Truth.TRUE
    fresh = Atom("isFresh", (Const("T_A"),))
    assert eval_guard(fresh) is Truth.BOTH
    assert eval_guard(fresh, freshness="honest") is Truth.TRUE
    assert eval_guard(fresh, freshness="replayed") is Truth.FALSE


def test_unbound_guard_raises():
    with pytest.raises(UngroundGuard):
        eval_guard(Eq(Var("d1"), Const("B")))


def test_guard_splits_in_nondet_mode():
    t = parse_term("[isFresh(T)] a + [not isFresh(T)] b")
    assert steps(show_term(t)) == [("a", "eps"), ("b", "eps")]
    sem = Semantics(freshness="honest")
    assert [label for label, *_ in sem.transitions(sem.prepare(t))] == ["a"]


def test_linear_term_lts():
    lts = term_lts(Seq(act("a"), act("b")))
    assert (lts.n_states, lts.n_transitions) == (3, 2)
    assert lts.term == {2}


def test_state_bound():
    with pytest.raises(StateSpaceExceeded):
        generate_lts(builtin("abp"), BuildConfig(max_states=5))
    with pytest.raises(ValueError):
        BuildConfig(max_states=0)


def test_abp_state_count_regression():
    lts = generate_lts(builtin("abp"))
    assert (lts.n_states, lts.n_transitions) == (29, 51)
    assert any(label == "tau" for _, label, _ in lts.trans)


@pytest.mark.parametrize("name", ["private-channel", "abp", "needham-schroeder"])
def test_rebuild_is_deterministic(name):
    m = builtin(name)
    assert generate_lts(m).to_json() == generate_lts(builtin(name)).to_json()


def _names(label):
    return set(re.findall(r"(?:^|[{,])([A-Za-z_]\w*)", label))


@pytest.mark.parametrize("name", CATALOGUE)
def test_encapsulated_and_abstracted_names_never_visible(name):
    m = builtin(name)
    names = alphabet(m)
    hidden = resolve(m.H, names) | resolve(m.I, names)
    lts = generate_lts(m)
    for _, label, _ in lts.trans:
        assert not (_names(label) & hidden), label


def _between_term(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return act(rng.choice("abc"))
    op = rng.choice((Alt, Seq, Between, Between))
    return op(_between_term(rng, depth - 1), _between_term(rng, depth - 1))


def test_step_interleaving_coherence():
    rng = seeded(11)
    sem = Semantics()
    checked = 0
    for _ in range(150):
        t = _between_term(rng, 3)
        for label, evs, r, _ in sem.transitions(t):
            if len(evs) != 2:
                continue
            target = term_lts(r)
            for first, second in ((evs[0],), (evs[1],)), ((evs[1],), (evs[0],)):
                ok = False
                for _, e1, r1, _ in sem.transitions(t):
                    if e1 != first:
                        continue
                    for _, e2, r2, _ in sem.transitions(r1):
                        if e2 == second and strong_step_bisim(term_lts(r2), target).equivalent:
                            ok = True
                assert ok, (show_term(t), label)
                checked += 1
    assert checked > 50


def test_termination_predicate():
    sem = Semantics()
    assert sem.terminates(EPS)
    assert not sem.terminates(act("a"))
    assert sem.terminates(Alt(act("a"), Epsilon()))
