"""Process terms with guards, recursion and finite data sums."""

import re
from fnmatch import fnmatchcase

from ._node import cached, node
from .messages import Message, free_vars as msg_vars, show, substitute as msg_subst


class GuardednessError(Exception):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("unguarded recursion through " + " -> ".join(self.cycle))


class UnknownDomain(Exception):
    pass


class ModelError(Exception):
    pass


# -- actions -------------------------------------------------------------------

_CHANNEL = re.compile(r"^([rsc])_([A-Z]\w*)$")
_CHANNEL_SHORT = re.compile(r"^([rsc])(C[A-Z]\w*)$")
_KINDS = {"r": "receive", "s": "send", "c": "comm"}


def canonical_action_name(name):
    """``rCA`` becomes ``r_CA``; every other name is returned unchanged."""
    m = _CHANNEL_SHORT.match(name)
    return f"{m.group(1)}_{m.group(2)}" if m else name


@node
class ActionEvent:
    name: str
    args: tuple = ()

    @property
    def kind(self):
        m = _CHANNEL.match(self.name)
        return _KINDS[m.group(1)] if m else "internal"

    @property
    def channel(self):
        m = _CHANNEL.match(self.name)
        return m.group(2) if m else None

    def __str__(self):
        return show_event(self)


def show_event(e):
    def compute(e):
        if not e.args:
            return e.name
        return e.name + "(" + ", ".join(show(a) for a in e.args) + ")"
    return cached(e, "_txt", compute)


def event_vars(e):
    def compute(e):
        out = frozenset()
        for a in e.args:
            out |= msg_vars(a)
        return out
    return cached(e, "_fv", compute)


def subst_event(e, binding):
    if not (event_vars(e) & binding.keys()):
        return e
    return ActionEvent(e.name, tuple(msg_subst(a, binding) for a in e.args))


# -- guards --------------------------------------------------------------------

class Guard:
    __slots__ = ()

    def __str__(self):
        return show_guard(self)


@node
class TrueG(Guard):
    pass


@node
class FalseG(Guard):
    pass


@node
class Atom(Guard):
    pred: str
    args: tuple = ()


@node
class Eq(Guard):
    lhs: Message
    rhs: Message


@node
class Neq(Guard):
    lhs: Message
    rhs: Message


@node
class Not(Guard):
    arg: Guard


@node
class And(Guard):
    lhs: Guard
    rhs: Guard


@node
class Or(Guard):
    lhs: Guard
    rhs: Guard


TRUE = TrueG()
FALSE = FalseG()


def guard_messages(g):
    t = type(g)
    if t is Atom:
        return g.args
    if t is Eq or t is Neq:
        return (g.lhs, g.rhs)
    if t is Not:
        return guard_messages(g.arg)
    if t is And or t is Or:
        return guard_messages(g.lhs) + guard_messages(g.rhs)
    return ()


def guard_vars(g):
    def compute(g):
        out = frozenset()
        for m in guard_messages(g):
            out |= msg_vars(m)
        return out
    return cached(g, "_fv", compute)


def subst_guard(g, binding):
    if not (guard_vars(g) & binding.keys()):
        return g
    t = type(g)
    if t is Atom:
        return Atom(g.pred, tuple(msg_subst(a, binding) for a in g.args))
    if t is Eq or t is Neq:
        return t(msg_subst(g.lhs, binding), msg_subst(g.rhs, binding))
    if t is Not:
        return Not(subst_guard(g.arg, binding))
    return t(subst_guard(g.lhs, binding), subst_guard(g.rhs, binding))


def guard_atoms(g):
    """The ``Atom`` leaves of a guard."""
    t = type(g)
    if t is Atom:
        return [g]
    if t is Not:
        return guard_atoms(g.arg)
    if t is And or t is Or:
        return guard_atoms(g.lhs) + guard_atoms(g.rhs)
    return []


_GUARD_PREC = {Or: 0, And: 1}


def _show_guard(g, prec=0):
    t = type(g)
    if t is TrueG:
        return "true"
    if t is FalseG:
        return "false"
    if t is Atom:
        if not g.args:
            return g.pred + "()"
        return g.pred + "(" + ", ".join(show(a) for a in g.args) + ")"
    if t is Eq:
        return f"{show(g.lhs)} == {show(g.rhs)}"
    if t is Neq:
        return f"{show(g.lhs)} != {show(g.rhs)}"
    if t is Not:
        inner = g.arg
        body = _show_guard(inner, 2)
        if type(inner) in (Eq, Neq):
            body = "(" + body + ")"
        return "not " + body
    p = _GUARD_PREC[t]
    # right-nested chains print flat, left-nested ones keep parentheses
    text = f"{_show_guard(g.lhs, p + 1)} {'or' if t is Or else 'and'} {_show_guard(g.rhs, p)}"
    return f"({text})" if p < prec else text


def show_guard(g):
    return cached(g, "_txt", _show_guard)


# -- process terms ---------------------------------------------------------------

class Term:
    __slots__ = ()

    def __str__(self):
        return show_term(self)


@node
class Act(Term):
    event: ActionEvent


@node
class Delta(Term):
    pass


@node
class Epsilon(Term):
    pass


@node
class TauP(Term):
    pass


@node
class Shadow(Term):
    """Shadow constant; ``of=None`` is the plain shadow that behaves like eps."""
    of: object = None
    index: int = 0


@node
class Seq(Term):
    p: Term
    q: Term


@node
class Alt(Term):
    p: Term
    q: Term


@node
class Par(Term):
    p: Term
    q: Term


@node
class CommMerge(Term):
    p: Term
    q: Term


@node
class Between(Term):
    p: Term
    q: Term


@node
class Theta(Term):
    p: Term


@node
class Unless(Term):
    p: Term
    q: Term


@node
class Encap(Term):
    H: tuple
    p: Term


@node
class Abstract(Term):
    I: tuple
    p: Term


@node
class GuardPrefix(Term):
    g: Guard
    p: Term


@node
class RecVar(Term):
    name: str
    args: tuple = ()


@node
class SumData(Term):
    var: str
    domain: str
    body: Term


DELTA = Delta()
EPS = Epsilon()
TAU = TauP()

BINARY = (Seq, Alt, Par, CommMerge, Between, Unless)
LEAVES = (Act, Delta, Epsilon, TauP, Shadow, RecVar)


def act(name, *args):
    return Act(ActionEvent(name, tuple(args)))


def seq(*ts):
    """Right-nested sequential composition of the given terms."""
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = Seq(t, out)
    return out


def alt(*ts):
    if not ts:
        return DELTA
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = Alt(t, out)
    return out


def children(t):
    tt = type(t)
    if tt in BINARY:
        return (t.p, t.q)
    if tt in (Theta, Encap, Abstract, GuardPrefix):
        return (t.p,)
    if tt is SumData:
        return (t.body,)
    return ()


def rebuild(t, kids):
    tt = type(t)
    if tt in BINARY:
        return tt(*kids)
    if tt is Theta:
        return Theta(kids[0])
    if tt is Encap:
        return Encap(t.H, kids[0])
    if tt is Abstract:
        return Abstract(t.I, kids[0])
    if tt is GuardPrefix:
        return GuardPrefix(t.g, kids[0])
    if tt is SumData:
        return SumData(t.var, t.domain, kids[0])
    return t


def _term_vars(t):
    tt = type(t)
    if tt is Act:
        return event_vars(t.event)
    if tt is Shadow:
        return event_vars(t.of) if t.of is not None else frozenset()
    if tt is RecVar:
        out = frozenset()
        for a in t.args:
            out |= msg_vars(a)
        return out
    if tt is GuardPrefix:
        return guard_vars(t.g) | term_vars(t.p)
    if tt is SumData:
        return term_vars(t.body) - {t.var}
    out = frozenset()
    for c in children(t):
        out |= term_vars(c)
    return out


def term_vars(t):
    """Variables occurring free in ``t`` (receive binders count as free)."""
    return cached(t, "_fv", _term_vars)


def subst_term(t, binding):
    if not binding:
        return t
    fv = term_vars(t)
    if not fv or fv.isdisjoint(binding):
        return t
    tt = type(t)
    if tt is Act:
        return Act(subst_event(t.event, binding))
    if tt is Shadow:
        return Shadow(subst_event(t.of, binding), t.index)
    if tt is RecVar:
        return RecVar(t.name, tuple(msg_subst(a, binding) for a in t.args))
    if tt is GuardPrefix:
        return GuardPrefix(subst_guard(t.g, binding), subst_term(t.p, binding))
    if tt is SumData:
        inner = {k: v for k, v in binding.items() if k != t.var}
        return SumData(t.var, t.domain, subst_term(t.body, inner))
    return rebuild(t, [subst_term(c, binding) for c in children(t)])


def events_of(t):
    """Action events occurring syntactically in ``t`` (shadows excluded)."""
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if type(x) is Act:
            out.add(x.event)
        stack.extend(children(x))
    return out


def messages_of(t):
    """All message arguments occurring syntactically in ``t``."""
    def compute(t):
        tt = type(t)
        if tt is Act:
            return frozenset(t.event.args)
        if tt is Shadow:
            return frozenset(t.of.args) if t.of is not None else frozenset()
        if tt is RecVar:
            return frozenset(t.args)
        out = frozenset()
        if tt is GuardPrefix:
            out = frozenset(guard_messages(t.g))
        for c in children(t):
            out |= messages_of(c)
        return out
    return cached(t, "_msgs", compute)


def recvars_of(t):
    def compute(t):
        if type(t) is RecVar:
            return frozenset((t.name,))
        out = frozenset()
        for c in children(t):
            out |= recvars_of(c)
        return out
    return cached(t, "_rv", compute)


# -- name patterns -------------------------------------------------------------------

def pattern_name(p):
    """Strip an optional ``(*)`` argument wildcard from an H/I pattern."""
    return p[:-3] if p.endswith("(*)") else p


def in_patterns(name, patterns):
    return any(fnmatchcase(name, pattern_name(p)) for p in patterns)


# -- recursive specifications ---------------------------------------------------------

@node
class Equation:
    name: str
    params: tuple
    body: Term


def expand_sum(t, domains):
    """Replace every finite data sum by the Alt-chain of its instances.

    The chain is left-associated in domain order; an empty domain gives delta.
    """
    tt = type(t)
    if tt is SumData:
        if t.domain not in domains:
            raise UnknownDomain(t.domain)
        body = expand_sum(t.body, domains)
        out = None
        for value in domains[t.domain]:
            inst = subst_term(body, {t.var: value})
            out = inst if out is None else Alt(out, inst)
        return DELTA if out is None else out
    kids = children(t)
    if not kids:
        return t
    new = [expand_sum(c, domains) for c in kids]
    if all(a is b for a, b in zip(new, kids)):
        return t
    return rebuild(t, new)


def _first(t, hidden, nullable):
    """RecVars reachable before a visible action, and whether t blocks silent exit."""
    tt = type(t)
    if tt is Act:
        return frozenset(), not in_patterns(t.event.name, hidden)
    if tt is Delta:
        return frozenset(), True
    if tt in (Epsilon, TauP, Shadow):
        return frozenset(), False
    if tt is RecVar:
        return frozenset((t.name,)), not nullable.get(t.name, False)
    if tt is GuardPrefix or tt is Theta or tt is Encap:
        return _first(t.p, hidden, nullable)
    if tt is Abstract:
        return _first(t.p, hidden + t.I, nullable)
    if tt is SumData:
        return _first(t.body, hidden, nullable)
    lr, lp = _first(t.p, hidden, nullable)
    rr, rp = _first(t.q, hidden, nullable)
    if tt is Seq:
        return (lr if lp else lr | rr), lp or rp
    if tt is Alt:
        return lr | rr, lp and rp
    return lr | rr, lp or rp


def validate_guarded(equations):
    """Check that every recursion cycle passes a visible action prefix.

    ``equations`` maps names to Equation (or bare terms).  Raises
    GuardednessError carrying the offending cycle.
    """
    bodies = {k: (v.body if isinstance(v, Equation) else v) for k, v in equations.items()}
    for name, body in bodies.items():
        for x in recvars_of(body):
            if x not in bodies:
                raise ModelError(f"undefined recursion variable {x} in {name}")
    nullable = {k: False for k in bodies}
    changed = True
    while changed:
        changed = False
        for k, body in bodies.items():
            if not nullable[k] and not _first(body, (), nullable)[1]:
                nullable[k] = True
                changed = True
    graph = {k: sorted(_first(body, (), nullable)[0]) for k, body in bodies.items()}
    state = {}
    for root in bodies:
        cycle = _find_cycle(root, graph, state)
        if cycle:
            raise GuardednessError(cycle)


def _find_cycle(root, graph, state):
    path = []
    stack = [(root, iter(graph[root]))]
    if state.get(root):
        return None
    state[root] = 1
    path.append(root)
    while stack:
        v, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            path.pop()
            state[v] = 2
            continue
        s = state.get(nxt)
        if s == 1:
            return path[path.index(nxt):]
        if s is None:
            state[nxt] = 1
            path.append(nxt)
            stack.append((nxt, iter(graph[nxt])))
    return None


# -- conflict elimination (Theta and the unless operator) ------------------------------

def _conflicts(a, b, conflict):
    return frozenset((a, b)) in conflict or (a == b and frozenset((a,)) in conflict)


def rename_conflicting(x, y, conflict):
    """x <| y: actions of x in conflict with an action named in y become tau."""
    names = {e.name for e in events_of(y)}

    def go(t):
        tt = type(t)
        if tt is Act:
            if any(_conflicts(t.event.name, n, conflict) for n in names):
                return TAU
            return t
        kids = children(t)
        return rebuild(t, [go(c) for c in kids]) if kids else t
    return go(x)


def eliminate_conflicts(t, conflict):
    """Remove Theta and unless operators following the conflict elimination laws.

    With an empty conflict relation both operators are the identity.
    Recursion variables cannot be expanded under a nonempty relation.
    """
    tt = type(t)
    if tt is Theta:
        return theta(eliminate_conflicts(t.p, conflict), conflict)
    if tt is Unless:
        x = eliminate_conflicts(t.p, conflict)
        y = eliminate_conflicts(t.q, conflict)
        return rename_conflicting(x, y, conflict) if conflict else x
    kids = children(t)
    if not kids:
        return t
    return rebuild(t, [eliminate_conflicts(c, conflict) for c in kids])


def theta(t, conflict):
    if not conflict:
        return t
    tt = type(t)
    if tt in (Act, Delta, Epsilon, TauP, Shadow):
        return t
    if tt is RecVar:
        raise ModelError("theta over recursion needs an empty conflict relation")
    if tt is GuardPrefix:
        return GuardPrefix(t.g, theta(t.p, conflict))
    if tt is Alt:
        return Alt(rename_conflicting(theta(t.p, conflict), t.q, conflict),
                   rename_conflicting(theta(t.q, conflict), t.p, conflict))
    if tt is Seq:
        return Seq(theta(t.p, conflict), theta(t.q, conflict))
    if tt in (Par, CommMerge, Between):
        return Alt(tt(rename_conflicting(theta(t.p, conflict), t.q, conflict), t.q),
                   tt(rename_conflicting(theta(t.q, conflict), t.p, conflict), t.p))
    if tt in (Encap, Abstract):
        return rebuild(t, [theta(t.p, conflict)])
    if tt is Theta:
        return theta(t.p, conflict)
    raise ModelError(f"cannot eliminate theta over {tt.__name__}")


# -- printing ------------------------------------------------------------------------

# precedence: 0 '+', 1 parallel family, 2 '.', 3 prefix/atoms
_PAR_OPS = {Par: "||", CommMerge: "|", Between: "<>", Unless: "<|"}


def _level(t):
    tt = type(t)
    if tt is Alt:
        return 0
    if tt in _PAR_OPS:
        return 1
    if tt is Seq:
        return 2
    return 3


def _open_end(t):
    """True if the printed text of t ends in a sum binder that would swallow more input."""
    tt = type(t)
    if tt is SumData:
        return True
    if tt is GuardPrefix:
        return _open_end(t.p)
    if tt in BINARY:
        return _open_end(t.q)
    return False


def _sub(t, prec, rightmost):
    text = show_term(t)
    if _level(t) < prec or (not rightmost and _open_end(t)):
        return "(" + text + ")"
    return text


def _show_set(names):
    return "{" + ", ".join(names) + "}"


def _show_term(t):
    tt = type(t)
    if tt is Act:
        return show_event(t.event)
    if tt is Delta:
        return "delta"
    if tt is Epsilon:
        return "eps"
    if tt is TauP:
        return "tau"
    if tt is Shadow:
        if t.of is None:
            return "shadow"
        idx = f"<{t.index}>" if t.index else ""
        return "@" + idx + show_event(t.of)
    if tt is RecVar:
        if not t.args:
            return t.name
        return t.name + "(" + ", ".join(show(a) for a in t.args) + ")"
    if tt is Theta:
        return f"theta({show_term(t.p)})"
    if tt is Encap:
        return f"encap{_show_set(t.H)}({show_term(t.p)})"
    if tt is Abstract:
        return f"abs{_show_set(t.I)}({show_term(t.p)})"
    if tt is GuardPrefix:
        return f"[{show_guard(t.g)}] {_sub(t.p, 3, True)}"
    if tt is SumData:
        return f"sum {t.var} in {t.domain} . {show_term(t.body)}"
    if tt is Alt:
        return f"{_sub(t.p, 1, False)} + {_sub(t.q, 0, True)}"
    if tt in _PAR_OPS:
        return f"{_sub(t.p, 2, False)} {_PAR_OPS[tt]} {_sub(t.q, 1, True)}"
    if tt is Seq:
        return f"{_sub(t.p, 3, False)} . {_sub(t.q, 2, True)}"
    raise TypeError(f"not a process term: {t!r}")


def show_term(t):
    """Canonical DSL text of a term; parsing it back yields the same tree."""
    return cached(t, "_txt", _show_term)
