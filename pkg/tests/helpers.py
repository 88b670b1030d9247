"""Random generators and brute-force oracles shared by the test modules."""

import itertools
import random

from saptc import messages as M
from saptc.model import ProtocolModel, RecursiveSpec
from saptc.semantics import Lts
from saptc.terms import (
    Abstract, Act, ActionEvent, Alt, And, Atom, Between, CommMerge, DELTA, EPS,
    Encap, Eq, Equation, FALSE, GuardPrefix, Neq, Not, Or, Par, RecVar, Seq, Shadow,
    SumData, TAU, TRUE, Theta, Unless,
)

TAU_LABEL = "tau"
TERM = "√"

# -- messages -----------------------------------------------------------------------

CONSTS = ("A", "B", "D1", "K")
KEYED = (M.EncSym, M.EncPub, M.EncPriv, M.DecSym, M.DecPriv, M.DecPub, M.Sign,
         M.DeSign, M.Mac)


def random_message(rng, depth=3, names=(), nonces=("n1",)):
    """A random message; ``names`` are variables in scope."""
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if names and r < 0.3:
            return M.Var(rng.choice(names))
        if r < 0.75:
            return M.Const(rng.choice(CONSTS))
        if r < 0.85:
            return M.Nonce(rng.choice(nonces))
        return rng.choice((M.BOTTOM, M.TOP, M.ZERO))
    d = depth - 1
    pick = rng.randrange(8)
    if pick == 0:
        return M.Tuple(tuple(random_message(rng, d, names) for _ in range(rng.randint(2, 3))))
    if pick in (1, 2):
        return rng.choice(KEYED)(random_key(rng, d, names), random_message(rng, d, names))
    if pick == 3:
        return rng.choice((M.SymKey, M.PubKey, M.PrivKey))(random_message(rng, d, names))
    if pick == 4:
        return rng.choice((M.Hash, M.Succ))(random_message(rng, d, names))
    if pick == 5:
        return M.Half(random_message(rng, d, names), rng.choice((1, 2)))
    return M.Xor(tuple(random_message(rng, d, names) for _ in range(rng.randint(2, 3))))


def random_key(rng, depth=1, names=()):
    seed = M.Const(rng.choice(("A", "B", "T")))
    r = rng.random()
    if r < 0.3:
        return M.SymKey(seed)
    if r < 0.55:
        return M.PubKey(seed)
    if r < 0.8:
        return M.PrivKey(seed)
    return random_message(rng, depth, names)


# -- models -------------------------------------------------------------------------

SENDS = ("s_CA", "s_CB")
RECVS = ("r_CA", "r_CB")
INTERNAL = ("a", "enc_PB", "c_CA")


class _ModelGen:
    def __init__(self, rng, system_heads, spec_heads):
        self.rng = rng
        self.system_heads = system_heads
        self.spec_heads = spec_heads
        self.counter = 0

    def fresh_var(self):
        self.counter += 1
        return f"x{self.counter}"

    def msg(self, scope, depth=2):
        return random_message(self.rng, depth, tuple(scope))

    def guard(self, scope, depth=2):
        rng = self.rng
        r = rng.random()
        if depth <= 0 or r < 0.45:
            pick = rng.randrange(5)
            if pick == 0:
                return Atom(rng.choice(("fresh", "valid")), (self.msg(scope, 1),))
            if pick == 1:
                return Eq(self.msg(scope, 1), self.msg(scope, 1))
            if pick == 2:
                return Neq(self.msg(scope, 1), self.msg(scope, 1))
            return rng.choice((TRUE, FALSE, Atom("fresh", (M.Const("A"),))))
        if r < 0.6:
            return Not(self.guard(scope, depth - 1))
        op = And if r < 0.8 else Or
        return op(self.guard(scope, depth - 1), self.guard(scope, depth - 1))

    def event(self, scope, kind):
        rng = self.rng
        if kind == "receive":
            x = self.fresh_var()
            pattern = M.Var(x)
            if rng.random() < 0.4:
                pattern = M.EncSym(M.SymKey(M.Const("A")), pattern)
            if rng.random() < 0.3:
                pattern = M.Tuple((self.msg(scope, 1), pattern))
            return ActionEvent(rng.choice(RECVS), (pattern,)), [x]
        name = rng.choice(SENDS if kind == "send" else INTERNAL)
        args = tuple(self.msg(scope) for _ in range(rng.randint(0, 2)))
        return ActionEvent(name, args), []

    def prefix(self, scope):
        """An atomic step and the binders it exports."""
        rng = self.rng
        r = rng.random()
        if r < 0.35:
            e, bound = self.event(scope, "receive")
            return Act(e), bound
        if r < 0.7:
            e, _ = self.event(scope, rng.choice(("send", "internal")))
            return Act(e), []
        if r < 0.75:
            return Act(ActionEvent("rsg", (M.Nonce("n1"),))), []
        if r < 0.82:
            e, _ = self.event(scope, "send")
            return Shadow(e, rng.choice((0, 0, 1))), []
        if r < 0.86:
            return Shadow(), []
        return rng.choice((TAU, EPS, DELTA)), []

    def term(self, scope, depth, heads):
        rng = self.rng
        if depth <= 0:
            if heads and rng.random() < 0.4:
                return RecVar(rng.choice(heads), tuple(self.msg(scope, 1)
                                                       for _ in range(rng.randint(0, 1))))
            return self.prefix(scope)[0]
        d = depth - 1
        r = rng.random()
        if r < 0.3:
            first, bound = self.prefix(scope)
            return Seq(first, self.term(scope + bound, d, heads))
        if r < 0.45:
            return Alt(self.term(scope, d, heads), self.term(scope, d, heads))
        if r < 0.55:
            op = rng.choice((Par, CommMerge, Between, Unless))
            return op(self.term(scope, d, heads), self.term(scope, d, heads))
        if r < 0.65:
            return GuardPrefix(self.guard(scope), self.term(scope, d, heads))
        if r < 0.72:
            v = f"d{self.counter}"
            self.counter += 1
            return SumData(v, "Delta", self.term(scope + [v], d, heads))
        if r < 0.8:
            names = tuple(sorted(rng.sample(("s_CA(*)", "r_CA(*)", "c_CB(*)", "a", "enc_*"), 2)))
            return rng.choice((Encap, Abstract))(names, self.term(scope, d, heads))
        if r < 0.84:
            return Theta(self.term(scope, d, heads))
        return self.term(scope, 0, heads)


def random_model(rng, index=0):
    """A random, syntactically well-formed model (not necessarily guarded)."""
    n_principals = rng.randint(1, 3)
    system_heads = []
    plan = []
    for i in range(n_principals):
        eqs = [(f"P{i}E{j}", rng.randint(0, 1)) for j in range(rng.randint(1, 3))]
        plan.append((f"Pr{i}", eqs))
        system_heads += [h for h, _ in eqs]
    spec_labels = rng.sample(["", "honest", "replayed"], rng.randint(0, 2))
    spec_heads = ["X", "Y"]
    gen = _ModelGen(rng, system_heads, spec_heads)
    globs = (("g1", M.normalize(random_message(rng, 2))),) if rng.random() < 0.3 else ()
    base_scope = [g for g, _ in globs]

    def block(eqs, heads):
        out = []
        for head, arity in eqs:
            params = tuple(f"p{k}" for k in range(arity))
            body = gen.term(base_scope + list(params), rng.randint(1, 4), heads)
            out.append(Equation(head, params, body))
        return tuple(out)

    principals = tuple(RecursiveSpec(name, block(eqs, system_heads)) for name, eqs in plan)
    compose = RecursiveSpec("compose", block([("Sys", 0)], system_heads + ["Sys"]))
    specs = tuple(RecursiveSpec(label, block([("X", 0), ("Y", rng.randint(0, 1))], spec_heads))
                  for label in spec_labels)
    domains = (("Delta", (M.Const("D1"), M.Const("D2"))),)
    if rng.random() < 0.3:
        domains += (("Bits", (M.Const("B0"), M.Const("B1"))),)
    conflict = (("a", "s_CA"),) if rng.random() < 0.2 else ()
    return ProtocolModel(f"random{index}", domains, globs, conflict, principals, compose, specs)


# -- LTSs ---------------------------------------------------------------------------

def all_small_lts(labels=("a", TAU_LABEL)):
    """Every LTS with one or two states (state 1 reachable) over ``labels``."""
    out = []
    for moves in itertools.product((False, True), repeat=len(labels)):
        trans = [(0, lab, 0) for lab, on in zip(labels, moves) if on]
        for term in ((), (0,)):
            out.append(Lts([0], 0, trans, set(term)))
    slots = [(s, lab, t) for s in (0, 1) for lab in labels for t in (0, 1)]
    for mask in itertools.product((False, True), repeat=len(slots)):
        trans = [x for x, on in zip(slots, mask) if on]
        if not any(s == 0 and t == 1 for s, _, t in trans):
            continue
        for term in ((), (0,), (1,), (0, 1)):
            out.append(Lts([0, 1], 0, trans, set(term)))
    return out


def random_lts(rng, n_states=None, labels=("a", TAU_LABEL), density=0.25):
    n = n_states or rng.randint(1, 6)
    trans = set()
    for s in range(n):
        for lab in labels:
            for t in range(n):
                if rng.random() < density:
                    trans.add((s, lab, t))
    term = {s for s in range(n) if rng.random() < 0.3}
    return Lts(list(range(n)), 0, sorted(trans), term)


def variant(rng, lts):
    """A system related to ``lts``: a split state, a stuttering step or a small edit."""
    n = len(lts.states)
    trans = list(lts.trans)
    term = set(lts.term)
    r = rng.random()
    if r < 0.3:
        # duplicate a state: strongly bisimilar
        s = rng.randrange(n)
        new = n
        extra = [(a, l, new) for a, l, b in trans if b == s and rng.random() < 0.5]
        extra += [(new, l, b) for a, l, b in trans if a == s]
        trans += extra
        if s in term:
            term.add(new)
        n += 1
    elif r < 0.55:
        # route an edge through a fresh tau step: branching bisimilar off the root
        if trans:
            i = rng.randrange(len(trans))
            a, l, b = trans[i]
            new = n
            trans[i] = (a, l, new)
            trans.append((new, TAU_LABEL, b))
            n += 1
    elif r < 0.8:
        if trans:
            trans.pop(rng.randrange(len(trans)))
    else:
        trans.append((rng.randrange(n), rng.choice(("a", TAU_LABEL)), rng.randrange(n)))
    return Lts(list(range(n)), 0, sorted(set(trans)), term)


# -- brute-force equivalence oracle ---------------------------------------------------

class _Joined:
    """Disjoint union: states of l2 are shifted by len(l1.states)."""

    def __init__(self, l1, l2):
        off = len(l1.states)
        self.n = off + len(l2.states)
        self.roots = (l1.init, off + l2.init)
        self.succ = [[] for _ in range(self.n)]
        for a, l, b in l1.trans:
            self.succ[a].append((l, b))
        for a, l, b in l2.trans:
            self.succ[off + a].append((l, off + b))
        self.term = set(l1.term) | {off + s for s in l2.term}
        self.tau_star = []
        for s in range(self.n):
            seen = {s}
            stack = [s]
            while stack:
                x = stack.pop()
                for l, y in self.succ[x]:
                    if l == TAU_LABEL and y not in seen:
                        seen.add(y)
                        stack.append(y)
            self.tau_star.append(seen)


def _strong_ok(u, R, p, q):
    if (p in u.term) != (q in u.term):
        return False
    for l, p2 in u.succ[p]:
        if not any(l2 == l and (p2, q2) in R for l2, q2 in u.succ[q]):
            return False
    return True


def _branching_ok(u, R, p, q):
    # p <= q half of the transfer condition, with q allowed to stutter first
    if p in u.term and not any(q2 in u.term and (p, q2) in R for q2 in u.tau_star[q]):
        return False
    for l, p2 in u.succ[p]:
        if l == TAU_LABEL and (p2, q) in R:
            continue
        if not any((p, q2) in R and any(l3 == l and (p2, q3) in R for l3, q3 in u.succ[q2])
                   for q2 in u.tau_star[q]):
            return False
    return True


def _greatest(u, ok):
    R = {(p, q) for p in range(u.n) for q in range(u.n)}
    changed = True
    while changed:
        changed = False
        for p, q in list(R):
            if (p, q) in R and not (ok(u, R, p, q) and ok(u, R, q, p)):
                R.discard((p, q))
                R.discard((q, p))
                changed = True
    return R


def oracle_equivalent(l1, l2, mode):
    """Decide strong / branching / rooted branching step bisimilarity from the definitions.

    The largest relation satisfying the transfer conditions is computed by
    discarding violating pairs until nothing changes.
    """
    u = _Joined(l1, l2)
    r1, r2 = u.roots
    if mode == "strong":
        return (r1, r2) in _greatest(u, _strong_ok)
    B = _greatest(u, _branching_ok)
    if mode == "branching":
        return (r1, r2) in B
    if (r1 in u.term) != (r2 in u.term):
        return False
    for p, q in ((r1, r2), (r2, r1)):
        for l, p2 in u.succ[p]:
            if not any(l2 == l and (p2, q2) in B for l2, q2 in u.succ[q]):
                return False
    return True


def is_bisimulation(u, R, ok):
    return all(ok(u, R, p, q) and ok(u, R, q, p) for p, q in R)


def enumerate_relations(l1, l2, mode):
    """Search every relation on the union for one witnessing equivalence of the roots.

    Only feasible for tiny systems (at most four states in the union).
    """
    u = _Joined(l1, l2)
    r1, r2 = u.roots
    pairs = [(p, q) for p in range(u.n) for q in range(u.n) if p <= q]
    ok = _strong_ok if mode == "strong" else _branching_ok
    for mask in itertools.product((False, True), repeat=len(pairs)):
        R = set()
        for (p, q), on in zip(pairs, mask):
            if on:
                R.add((p, q))
                R.add((q, p))
        if not is_bisimulation(u, R, ok):
            continue
        if mode != "rooted":
            if (r1, r2) in R:
                return True
            continue
        if (r1 in u.term) != (r2 in u.term):
            return False
        if all(any(l2 == l and (p2, q2) in R for l2, q2 in u.succ[q])
               for p, q in ((r1, r2), (r2, r1)) for l, p2 in u.succ[p]):
            return True
    return False


def seeded(seed):
    return random.Random(seed)


# -- terms ----------------------------------------------------------------------------

def terms_equivalent(p, q, mode="strong", conflict=frozenset()):
    """LTS-level equivalence of two closed terms; ``mode`` as in the rewriter."""
    from saptc.equivalence import rooted_branching_bisim, strong_step_bisim
    from saptc.semantics import term_lts
    check = strong_step_bisim if mode == "strong" else rooted_branching_bisim
    return check(term_lts(p, conflict=conflict), term_lts(q, conflict=conflict)).equivalent


# acceptance verdicts, echoed in the terminal summary by conftest.py
ACCEPTANCE = {}
