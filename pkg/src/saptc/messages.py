"""Symbolic message terms and their equational normalization.

Messages form a free term algebra modulo three groups of equations:
decryption cancels a matching encryption (symmetric, public/private and
signatures), encryption cancels a matching decryption, and ``xor`` is an
associative-commutative operator with unit ``zero`` and nilpotent elements.
Normal forms are unique, so equality is structural equality of normal forms.
"""

from collections import Counter

from ._node import cached, node


class Message:
    __slots__ = ()

    def __str__(self):
        return show(self)


@node
class Const(Message):
    name: str


@node
class Var(Message):
    name: str


@node
class Tuple(Message):
    items: tuple


@node
class SymKey(Message):
    seed: Message


@node
class PubKey(Message):
    seed: Message


@node
class PrivKey(Message):
    seed: Message


@node
class Nonce(Message):
    tag: str


@node
class EncSym(Message):
    key: Message
    body: Message


@node
class EncPub(Message):
    key: Message
    body: Message


@node
class EncPriv(Message):
    key: Message
    body: Message


@node
class DecSym(Message):
    key: Message
    body: Message


@node
class DecPriv(Message):
    """Decryption with a private key; undoes ``EncPub``."""
    key: Message
    body: Message


@node
class DecPub(Message):
    """Decryption with a public key; undoes ``EncPriv``."""
    key: Message
    body: Message


@node
class Hash(Message):
    body: Message


@node
class Sign(Message):
    key: Message
    body: Message


@node
class DeSign(Message):
    key: Message
    body: Message


@node
class Mac(Message):
    key: Message
    body: Message


@node
class Xor(Message):
    args: tuple


@node
class Succ(Message):
    body: Message


@node
class Half(Message):
    body: Message
    part: int


@node
class Bottom(Message):
    pass


@node
class Top(Message):
    pass


@node
class Zero(Message):
    pass


BOTTOM = Bottom()
TOP = Top()
ZERO = Zero()

ATOMS = (Const, Var, Nonce, Bottom, Top, Zero)
KEYED = (EncSym, EncPub, EncPriv, DecSym, DecPriv, DecPub, Sign, DeSign, Mac)

# keyword used in the text syntax for each binary keyed constructor
KEYED_NAMES = {
    EncSym: "enc_s", EncPub: "enc_pk", EncPriv: "enc_sk",
    DecSym: "dec_s", DecPriv: "dec_sk", DecPub: "dec_pk",
    Sign: "sign", DeSign: "design", Mac: "mac",
}
UNARY_NAMES = {Hash: "hash", Succ: "succ", SymKey: "key", PubKey: "pk", PrivKey: "sk"}


# -- rendering ---------------------------------------------------------------

def _show(m):
    t = type(m)
    if t is Const or t is Var:
        return m.name
    if t is Nonce:
        return f"nonce({m.tag})"
    if t is Bottom:
        return "bottom"
    if t is Top:
        return "top"
    if t is Zero:
        return "zero"
    if t is Tuple:
        return "(" + ", ".join(show(i) for i in m.items) + ")"
    if t in KEYED_NAMES:
        return f"{KEYED_NAMES[t]}({show(m.key)}, {show(m.body)})"
    if t is Hash or t is Succ:
        return f"{UNARY_NAMES[t]}({show(m.body)})"
    if t in (SymKey, PubKey, PrivKey):
        return f"{UNARY_NAMES[t]}({show(m.seed)})"
    if t is Xor:
        return "xor(" + ", ".join(show(a) for a in m.args) + ")"
    if t is Half:
        return f"half{m.part}({show(m.body)})"
    raise TypeError(f"not a message: {m!r}")


def show(m):
    """Canonical text of a message; also serves as the total sort order."""
    return cached(m, "_txt", _show)


# -- normalization -------------------------------------------------------------

def _key_pair(pk, sk):
    return type(pk) is PubKey and type(sk) is PrivKey and pk.seed == sk.seed


def _normalize(m):
    t = type(m)
    if t in ATOMS:
        return m
    if t is Tuple:
        items = tuple(normalize(i) for i in m.items)
        return items[0] if len(items) == 1 else Tuple(items)
    if t in (SymKey, PubKey, PrivKey):
        return t(normalize(m.seed))
    if t is Hash:
        return Hash(normalize(m.body))
    if t is Succ:
        b = normalize(m.body)
        return b if type(b) is Bottom else Succ(b)
    if t is Half:
        return Half(normalize(m.body), m.part)
    if t is Xor:
        return _xor(m.args)
    k = normalize(m.key)
    b = normalize(m.body)
    tb = type(b)
    if t is EncSym and tb is DecSym and b.key == k:
        return b.body
    if t is DecSym and tb is EncSym and b.key == k:
        return b.body
    if t is EncPub and tb is DecPriv and _key_pair(k, b.key):
        return b.body
    if t is DecPriv and tb is EncPub and _key_pair(b.key, k):
        return b.body
    if t is EncPriv and tb is DecPub and _key_pair(b.key, k):
        return b.body
    if t is DecPub and tb is EncPriv and _key_pair(k, b.key):
        return b.body
    if t is DeSign and tb is Sign and _key_pair(k, b.key):
        return b.body
    return t(k, b)


def _xor(args):
    flat = []
    for a in args:
        a = normalize(a)
        if type(a) is Xor:
            flat.extend(a.args)
        elif type(a) is not Zero:
            flat.append(a)
    counts = Counter(flat)
    kept = sorted((a for a, n in counts.items() if n % 2), key=show)
    if not kept:
        return ZERO
    if len(kept) == 1:
        return kept[0]
    return Xor(tuple(kept))


def normalize(m):
    """Return the unique normal form of ``m``."""
    nf = cached(m, "_nf", _normalize)
    if nf is not m:
        object.__setattr__(nf, "_nf", nf)
    return nf


def msg_equal(a, b):
    return normalize(a) == normalize(b)


# -- variables -------------------------------------------------------------------

def _children(m):
    t = type(m)
    if t in ATOMS:
        return ()
    if t is Tuple:
        return m.items
    if t is Xor:
        return m.args
    if t in KEYED:
        return (m.key, m.body)
    if t in (SymKey, PubKey, PrivKey):
        return (m.seed,)
    return (m.body,)


def _free_vars(m):
    if type(m) is Var:
        return frozenset((m.name,))
    out = frozenset()
    for c in _children(m):
        out |= free_vars(c)
    return out


def free_vars(m):
    return cached(m, "_fv", _free_vars)


def is_ground(m):
    return not free_vars(m)


def subterms(m):
    """Every subterm of ``m`` including ``m`` itself."""
    seen = {m}
    stack = [m]
    while stack:
        for c in _children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def _replace(m, binding):
    t = type(m)
    if t is Var:
        return binding.get(m.name, m)
    if t in ATOMS or not (free_vars(m) & binding.keys()):
        return m
    if t is Tuple:
        return Tuple(tuple(_replace(i, binding) for i in m.items))
    if t is Xor:
        return Xor(tuple(_replace(a, binding) for a in m.args))
    if t in KEYED:
        return t(_replace(m.key, binding), _replace(m.body, binding))
    if t in (SymKey, PubKey, PrivKey):
        return t(_replace(m.seed, binding))
    if t is Half:
        return Half(_replace(m.body, binding), m.part)
    return t(_replace(m.body, binding))


def substitute(m, binding):
    """Replace bound variables of ``m`` and normalize the result."""
    if not binding or not free_vars(m):
        return normalize(m)
    return normalize(_replace(m, binding))


def check_acyclic(binding):
    """Raise ValueError if a binding maps a variable into a term containing it."""
    for name, value in binding.items():
        if name in free_vars(value):
            raise ValueError(f"cyclic binding for {name}")


# -- matching --------------------------------------------------------------------

def match(pattern, value, binding=None):
    """Match a receive pattern against a ground normalized value.

    Unbound pattern variables are bound; repeated variables must agree.
    Subpatterns that become ground are compared modulo the equations, other
    subpatterns must agree constructor by constructor.  Returns the extended
    binding or None.
    """
    binding = dict(binding or {})
    return binding if _match(pattern, value, binding) else None


def _match(p, v, b):
    t = type(p)
    if t is Var:
        if p.name in b:
            return b[p.name] == v
        b[p.name] = v
        return True
    if not (free_vars(p) - b.keys()):
        return substitute(p, b) == v
    if type(v) is not t:
        return False
    if t is Half:
        return p.part == v.part and _match(p.body, v.body, b)
    pc, vc = _children(p), _children(v)
    if len(pc) != len(vc):
        return False
    return all(_match(x, y, b) for x, y in zip(pc, vc))
