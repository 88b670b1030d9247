import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saptc import messages as M
from saptc.messages import (
    Const, DeSign, DecPriv, DecPub, DecSym, EncPriv, EncPub, EncSym, Hash, Mac, PrivKey,
    PubKey, Sign, SymKey, Var, Xor, ZERO, check_acyclic, match, msg_equal, normalize,
    substitute,
)

from helpers import random_message, seeded

D, D1, D2, E = Const("D"), Const("D1"), Const("D2"), Const("E")
K = SymKey(Const("AB"))
PK, SK = PubKey(Const("A")), PrivKey(Const("A"))

leaves = st.sampled_from(
    [Const("A"), Const("B"), D, D1, M.Nonce("n1"), M.BOTTOM, M.TOP, ZERO, Var("x")])


def _extend(children):
    keyed = st.sampled_from([EncSym, EncPub, EncPriv, DecSym, DecPriv, DecPub, Sign, DeSign, Mac])
    return st.one_of(
        st.builds(lambda t, k, b: t(k, b), keyed, children, children),
        st.builds(lambda items: M.Tuple(tuple(items)), st.lists(children, min_size=2, max_size=3)),
        st.builds(lambda xs: Xor(tuple(xs)), st.lists(children, min_size=2, max_size=4)),
        st.builds(Hash, children),
        st.builds(M.Succ, children),
        st.builds(M.Half, children, st.sampled_from([1, 2])),
        st.builds(lambda t, s: t(s), st.sampled_from([SymKey, PubKey, PrivKey]), children),
    )


messages = st.recursive(leaves, _extend, max_leaves=12)
ground = messages.filter(M.is_ground)


# -- examples -----------------------------------------------------------------------

@pytest.mark.parametrize("m, expected", [
    (DecSym(K, EncSym(K, D)), D),
    (Xor((D, D)), ZERO),
    (Xor((D2, Xor((D1, D2)))), D1),
    (Xor((D, ZERO)), D),
])
def test_normalize_examples(m, expected):
    assert normalize(m) == expected


@pytest.mark.parametrize("a, b, expected", [
    (Hash(D), Hash(D), True),
    (D, D, True),
    (Mac(K, D), Mac(K, E), False),
])
def test_msg_equal_examples(a, b, expected):
    assert msg_equal(a, b) is expected


def test_substitute_examples():
    assert substitute(EncSym(K, Var("d")), {"d": D}) == EncSym(K, D)
    assert substitute(Var("d"), {}) == Var("d")
    assert substitute(DecSym(K, Var("x")), {"x": EncSym(K, D)}) == D


def test_wrong_key_decryption_is_opaque():
    other = SymKey(Const("E"))
    m = normalize(DecSym(other, EncSym(K, D)))
    assert m == DecSym(other, EncSym(K, D))
    assert not msg_equal(m, D)


def test_free_constructors():
    assert normalize(M.Succ(M.Succ(Const("T")))) == M.Succ(M.Succ(Const("T")))
    assert not msg_equal(M.Half(D, 1), M.Half(D, 2))
    assert not msg_equal(M.TOP, M.BOTTOM)


def test_xor_many_operands():
    r = [Const(f"R{i}") for i in range(1, 4)]
    r4 = Xor((*r, D))
    assert normalize(Xor((*r, r4))) == D


def test_cyclic_binding_rejected():
    with pytest.raises(ValueError):
        check_acyclic({"x": Hash(Var("x"))})
    check_acyclic({"x": Hash(Var("y"))})


def test_match_binds_and_checks():
    pat = M.Tuple((Var("a"), EncSym(K, Var("b"))))
    val = normalize(M.Tuple((D, EncSym(K, D1))))
    assert match(pat, val) == {"a": D, "b": D1}
    assert match(M.Tuple((Var("a"), Var("a"))), normalize(M.Tuple((D, D1)))) is None
    assert match(Var("a"), D, {"a": D1}) is None


def test_show():
    assert str(Xor((Const("R1"), D))) == "xor(R1, D)"
    assert str(Sign(SK, M.Tuple((Const("B"), PK)))) == "sign(sk(A), (B, pk(A)))"


# -- properties ---------------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(messages)
def test_normalize_idempotent(m):
    nf = normalize(m)
    assert normalize(nf) == nf


def test_normalize_idempotent_depth6():
    rng = seeded(6)
    for _ in range(500):
        m = random_message(rng, depth=6, names=("x", "y"))
        assert normalize(normalize(m)) == normalize(m)


@settings(max_examples=200, deadline=None)
@given(messages, messages, messages)
def test_xor_assoc_comm(a, b, c):
    assert normalize(Xor((a, Xor((b, c))))) == normalize(Xor((Xor((a, b)), c)))
    assert normalize(Xor((a, b))) == normalize(Xor((b, a)))
    assert normalize(Xor((a, ZERO))) == normalize(a)
    assert normalize(Xor((a, a))) == ZERO
    assert normalize(Xor((b, Xor((a, b))))) == normalize(a)


@settings(max_examples=200, deadline=None)
@given(messages, messages)
def test_cancellation_round_trips(m, seed):
    k = SymKey(seed)
    pk, sk = PubKey(seed), PrivKey(seed)
    nf = normalize(m)
    assert normalize(DecSym(k, EncSym(k, m))) == nf
    assert normalize(EncSym(k, DecSym(k, m))) == nf
    assert normalize(DecPriv(sk, EncPub(pk, m))) == nf
    assert normalize(EncPub(pk, DecPriv(sk, m))) == nf
    assert normalize(DecPub(pk, EncPriv(sk, m))) == nf
    assert normalize(EncPriv(sk, DecPub(pk, m))) == nf
    assert normalize(DeSign(pk, Sign(sk, m))) == nf


@settings(max_examples=200, deadline=None)
@given(messages, ground)
def test_substitute_commutes_with_normalize(m, v):
    b = {"x": v}
    assert normalize(substitute(m, b)) == normalize(substitute(normalize(m), b))


@settings(max_examples=200, deadline=None)
@given(messages, messages)
def test_msg_equal_is_nf_equality(a, b):
    assert msg_equal(a, b) == (normalize(a) == normalize(b))
    assert msg_equal(a, a)
