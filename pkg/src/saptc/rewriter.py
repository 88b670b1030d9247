"""Equational normalization of closed, recursion-free terms to basic terms.

The normalizer computes head normal forms bottom-up: every term becomes a
set of summands, each either termination or a step (a multiset of events,
possibly with pending shadows) followed by a normalized continuation, and
each optionally preceded by a guard.  Guards are kept as full minterms over
the freshness atoms they decide, because a guard commits every atom it
mentions.  The operator cases are the expansion laws of the axiom tables
applied in a fixed order; ``RULES`` lists the same laws as individually
applicable oriented rules at the root of a redex.

prove_equal compares normal forms; identical forms prove equivalence,
anything else is ``unknown``.
"""

import itertools
from dataclasses import dataclass
from typing import Callable

from .messages import Const, Nonce, normalize
from .semantics import _sorted_events, communications, mk_between, mk_wrap
from .terms import (
    Abstract, Act, ActionEvent, Alt, And, Atom, Between, CommMerge, DELTA, Delta,
    EPS, Encap, Epsilon, Eq, FalseG, GuardPrefix, Neq, Not, Or, Par, RecVar, Seq,
    Shadow, SumData, TAU, TauP, Theta, TrueG, Unless, children, eliminate_conflicts,
    alt, events_of, expand_sum, guard_atoms, in_patterns, recvars_of,
    rebuild, show_event, show_guard, show_term, term_vars,
)

STEP_BUDGET = 10 ** 6


class NotClosed(Exception):
    pass


class ContainsRecursion(Exception):
    pass


class RewriteBudgetExceeded(Exception):
    pass


class Unsupported(Exception):
    """The term leaves the fragment the normalizer handles exactly."""


# -- guards -----------------------------------------------------------------------

def _eval(g, known):
    t = type(g)
    if t is TrueG:
        return True
    if t is FalseG:
        return False
    if t is Atom:
        return known[g]
    if t is Eq:
        return normalize(g.lhs) == normalize(g.rhs)
    if t is Neq:
        return normalize(g.lhs) != normalize(g.rhs)
    if t is Not:
        return not _eval(g.arg, known)
    if t is And:
        return _eval(g.lhs, known) and _eval(g.rhs, known)
    return _eval(g.lhs, known) or _eval(g.rhs, known)


def minterms(g, known=frozenset()):
    """Assignments to the undecided atoms of ``g`` under which it holds."""
    decided = dict(known)
    free = sorted({a for a in guard_atoms(g) if a not in decided}, key=show_guard)
    out = []
    for values in itertools.product((True, False), repeat=len(free)):
        value_of = dict(decided)
        value_of.update(zip(free, values))
        if _eval(g, value_of):
            out.append(frozenset(zip(free, values)))
    return out


def minterm_guard(m):
    lits = [a if v else Not(a) for a, v in sorted(m, key=lambda av: show_guard(av[0]))]
    out = lits[-1]
    for lit in reversed(lits[:-1]):
        out = And(lit, out)
    return out


def _merge(a, b):
    if not a:
        return b
    if not b:
        return a
    u = a | b
    return u if len({x for x, _ in u}) == len(u) else None


def _atoms(t):
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if type(x) is GuardPrefix:
            out.update(guard_atoms(x.g))
        stack.extend(children(x))
    return frozenset(out)


# -- summands ---------------------------------------------------------------------

@dataclass(frozen=True)
class Summand:
    """``[guard] events . cont``; ``events is None`` marks termination."""
    guard: frozenset
    events: tuple = None
    shadows: tuple = ()
    cont: object = EPS

    @property
    def is_step(self):
        return self.events is not None


def _step_term(events, shadows):
    names = {show_event(e) for e in events}
    if any(show_event(s) in names for s in shadows):
        raise Unsupported("step performs an event and waits for its own shadow")
    parts = [Act(e) for e in events] + [Shadow(s) for s in shadows]
    if not parts:
        return TAU
    parts.sort(key=show_term)
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Par(p, out)
    return out


def summand_term(s):
    body = EPS
    if s.is_step:
        step = _step_term(s.events, s.shadows)
        body = step if type(s.cont) is Epsilon else Seq(step, s.cont)
    return GuardPrefix(minterm_guard(s.guard), body) if s.guard else body


def sum_term(parts):
    """Canonical Alt-chain: sorted by printed form, duplicates removed."""
    keyed = {}
    for p in parts:
        if type(p) is Delta:
            continue
        keyed.setdefault(show_term(p), p)
    if not keyed:
        return DELTA
    ordered = [keyed[k] for k in sorted(keyed)]
    out = ordered[-1]
    for p in reversed(ordered[:-1]):
        out = Alt(p, out)
    return out


def summands_of(t):
    if type(t) is Alt:
        return summands_of(t.p) + summands_of(t.q)
    if type(t) is Delta:
        return []
    return [t]


def _fuse(shp, evq, shq, evp):
    left = []
    pool_q = list(evq)
    pool_p = list(evp)
    for s in shp:
        if s in pool_q:
            pool_q.remove(s)
        else:
            left.append(s)
    for s in shq:
        if s in pool_p:
            pool_p.remove(s)
        else:
            left.append(s)
    return _sorted_events(left)


class Normalizer:
    """Head-normal-form computation with a shared memo and a step budget."""

    def __init__(self, budget=STEP_BUDGET):
        self.budget = budget
        self.steps = 0
        self._memo = {}
        self._atoms = {}

    def _tick(self, n=1):
        self.steps += n
        if self.steps > self.budget:
            raise RewriteBudgetExceeded(f"more than {self.budget} rewrite steps")

    def _relevant(self, t, known):
        if not known:
            return known
        atoms = self._atoms.get(t)
        if atoms is None:
            atoms = self._atoms[t] = _atoms(t)
        return frozenset(av for av in known if av[0] in atoms)

    def nf(self, t, known=frozenset()):
        return sum_term(summand_term(s) for s in self.hnf(t, known))

    def hnf(self, t, known=frozenset()):
        known = self._relevant(t, known)
        key = (t, known)
        hit = self._memo.get(key)
        if hit is None:
            self._tick()
            hit = tuple(dict.fromkeys(self._hnf(t, known)))
            self._memo[key] = hit
        return hit

    def _cont(self, t, known, guard):
        return self.nf(t, known | guard)

    def _hnf(self, t, known):
        tt = type(t)
        if tt is Epsilon or (tt is Shadow and t.of is None):
            # SC1/SC2: the plain shadow is a silent unit
            return [Summand(frozenset())]
        if tt is Delta:
            return []
        if tt is Act:
            return [Summand(frozenset(), (t.event,))]
        if tt is TauP:
            return [Summand(frozenset(), ())]
        if tt is Shadow:
            return [Summand(frozenset(), (), (t.of,))]
        if tt is Alt:
            # A1-A3, A6 via canonical ordering and deduplication
            return list(self.hnf(t.p, known)) + list(self.hnf(t.q, known))
        if tt is Seq:
            return self._seq(t, known)
        if tt is GuardPrefix:
            return self._guard(t, known)
        if tt is Par:
            return self._par(t, known)
        if tt is Between:
            return self._between(t, known)
        if tt is CommMerge:
            return self._comm_merge(t, known)
        if tt is Encap:
            return self._encap(t, known)
        if tt is Abstract:
            return self._abstract(t, known)
        if tt is RecVar:
            raise ContainsRecursion(f"recursion variable {t.name}")
        if tt in (Theta, Unless, SumData):
            raise Unsupported(f"{tt.__name__} must be eliminated first")
        raise Unsupported(f"no normal form for {tt.__name__}")

    def _seq(self, t, known):
        # A4, A5, A7, A8, A9, G5, G7
        out = []
        for s in self.hnf(t.p, known):
            k = known | s.guard
            if s.is_step:
                cont = self._cont(Seq(s.cont, t.q) if type(s.cont) is not Epsilon else t.q, k,
                                  frozenset())
                out.append(Summand(s.guard, s.events, s.shadows, cont))
            else:
                for r in self.hnf(t.q, k):
                    out.append(Summand(s.guard | r.guard, r.events, r.shadows, r.cont))
        return out

    def _guard(self, t, known):
        # G1, G3, G4, G8, G9 and the wp laws G10/G11: decided atoms are
        # known to every continuation of the guarded summands
        out = []
        for m in minterms(t.g, known):
            for s in self.hnf(t.p, known | m):
                out.append(Summand(m | s.guard, s.events, s.shadows, s.cont))
        return out

    def _joint_steps(self, P, Q, known):
        for sp in P:
            if not sp.is_step:
                continue
            for sq in Q:
                if not sq.is_step:
                    continue
                g = _merge(sp.guard, sq.guard)
                if g is None:
                    continue
                yield sp, sq, g

    def _par(self, t, known):
        # P2-P10, G12, G14, G15, G18, G19, G22, G25
        P = self.hnf(t.p, known)
        Q = self.hnf(t.q, known)
        out = []
        for sp, sq, g in self._joint_steps(P, Q, known):
            sh = _fuse(sp.shadows, sq.events, sq.shadows, sp.events)
            cont = self._cont(mk_between(sp.cont, sq.cont), known, g)
            out.append(Summand(g, _sorted_events(sp.events + sq.events), sh, cont))
        for A, B in ((P, Q), (Q, P)):
            for sa in A:
                if sa.is_step:
                    continue
                for sb in B:
                    g = _merge(sa.guard, sb.guard)
                    if g is None:
                        continue
                    if sb.is_step:
                        out.append(Summand(g, sb.events, sb.shadows,
                                           self._cont(sb.cont, known, g)))
                    elif A is P:
                        out.append(Summand(g))
        return out

    def _between(self, t, known):
        # full expansion: lone moves, joint steps, communications (P1, C1-C4)
        P = self.hnf(t.p, known)
        Q = self.hnf(t.q, known)
        out = []
        blocked_p = {e for s in Q for e in s.shadows}
        blocked_q = {e for s in P for e in s.shadows}
        for A, other, blocked, left in ((P, t.q, blocked_p, True), (Q, t.p, blocked_q, False)):
            for s in A:
                if not s.is_step or any(e in blocked for e in s.events):
                    continue
                res = mk_between(s.cont, other) if left else mk_between(other, s.cont)
                out.append(Summand(s.guard, s.events, s.shadows,
                                   self._cont(res, known, s.guard)))
        for sp, sq, g in self._joint_steps(P, Q, known):
            sh = _fuse(sp.shadows, sq.events, sq.shadows, sp.events)
            cont = self._cont(mk_between(sp.cont, sq.cont), known, g)
            for comms, rest_p, rest_q, bp, bq in communications(sp.events, sq.events):
                if bp or bq:
                    raise NotClosed("communication binds a variable")
                if comms:
                    evs = _sorted_events(list(rest_p) + list(rest_q) + comms)
                else:
                    evs = _sorted_events(sp.events + sq.events)
                out.append(Summand(g, evs, sh, cont))
        for sp in P:
            if sp.is_step:
                continue
            for sq in Q:
                if not sq.is_step:
                    g = _merge(sp.guard, sq.guard)
                    if g is not None:
                        out.append(Summand(g))
        return out

    def _comm_merge(self, t, known):
        # C1-C10, G13, G16, G17, G20, G21
        P = self.hnf(t.p, known)
        Q = self.hnf(t.q, known)
        out = []
        for sp, sq, g in self._joint_steps(P, Q, known):
            if not sp.events or not sq.events:
                continue
            sh = _fuse(sp.shadows, sq.events, sq.shadows, sp.events)
            for comms, rest_p, rest_q, bp, bq in communications(sp.events, sq.events):
                if rest_p or rest_q:
                    continue
                if bp or bq:
                    raise NotClosed("communication binds a variable")
                cont = self._cont(mk_between(sp.cont, sq.cont), known, g)
                out.append(Summand(g, _sorted_events(comms), sh, cont))
        return out

    def _encap(self, t, known):
        # D1-D5, G24
        out = []
        for s in self.hnf(t.p, known):
            if not s.is_step:
                out.append(s)
            elif not any(in_patterns(e.name, t.H) for e in s.events):
                cont = self._cont(mk_wrap(Encap, t.H, s.cont), known, s.guard)
                out.append(Summand(s.guard, s.events, s.shadows, cont))
        return out

    def _abstract(self, t, known):
        # TI1-TI5, G28
        out = []
        for s in self.hnf(t.p, known):
            if not s.is_step:
                out.append(s)
                continue
            kept = tuple(e for e in s.events if not in_patterns(e.name, t.I))
            cont = self._cont(mk_wrap(Abstract, t.I, s.cont), known, s.guard)
            out.append(Summand(s.guard, kept, s.shadows, cont))
        return out


# -- top-level passes --------------------------------------------------------------

def _split(t):
    """A summand term as (guard term or None, step term or None, continuation)."""
    g = None
    if type(t) is GuardPrefix:
        g, t = t.g, t.p
    if type(t) is Epsilon:
        return g, None, EPS
    if type(t) is Seq:
        return g, t.p, t.q
    return g, t, EPS


def _join(g, step, cont):
    if step is None:
        body = EPS
    else:
        body = step if type(cont) is Epsilon else Seq(step, cont)
    return body if g is None else GuardPrefix(g, body)


def _has_shadow(step):
    if type(step) is Shadow:
        return True
    if type(step) is Par:
        return _has_shadow(step.p) or _has_shadow(step.q)
    return False


def drop_pending_shadows(t):
    """Remove steps that still wait for a shadow partner; they never fire at top level."""
    out = []
    for s in summands_of(t):
        g, step, cont = _split(s)
        if step is not None and _has_shadow(step):
            continue
        if type(cont) is not Epsilon:
            cont = drop_pending_shadows(cont)
        out.append(_join(g, step, cont))
    return sum_term(out)


def _guard_minterm(g):
    """Inverse of minterm_guard."""
    out = set()
    stack = [g]
    while stack:
        x = stack.pop()
        if type(x) is And:
            stack += [x.lhs, x.rhs]
        elif type(x) is Not:
            out.add((x.arg, False))
        else:
            out.add((x, True))
    return frozenset(out)


def _prefix_guard(g, t):
    """[g] distributed over the summands of t, merging nested minterms."""
    if g is None:
        return t
    m = _guard_minterm(g)
    out = []
    for s in summands_of(t):
        h, step, cont = _split(s)
        both = _merge(m, _guard_minterm(h)) if h is not None else m
        if both is None:
            continue
        out.append(_join(minterm_guard(both) if both else None, step, cont))
    return sum_term(out)


def _tau_simplify(c):
    """B1/B2/G26/G27 on the continuation of a step prefix."""
    while True:
        parts = summands_of(c)
        if len(parts) == 1:
            g, step, cont = _split(parts[0])
            if type(step) is TauP:
                # e.tau.x = e.x and e.[phi].tau.x = e.[phi].x
                c = _prefix_guard(g, cont)
                continue
        for i, s in enumerate(parts):
            g, step, cont = _split(s)
            if g is not None or type(step) is not TauP:
                continue
            inner = set(summands_of(cont))
            rest = parts[:i] + parts[i + 1:]
            if all(r in inner for r in rest):
                # e.(tau.(x+y)+x) = e.(x+y)
                c = cont
                break
        else:
            return c


def tau_pass(t):
    out = []
    for s in summands_of(t):
        g, step, cont = _split(s)
        if step is not None and type(cont) is not Epsilon:
            cont = _tau_simplify(tau_pass(cont))
        out.append(_join(g, step, cont))
    return sum_term(out)


# -- public operations --------------------------------------------------------------

def _prepare(t, conflict, domains):
    if recvars_of(t):
        raise ContainsRecursion(f"term mentions {', '.join(sorted(recvars_of(t)))}")
    if domains:
        t = expand_sum(t, domains)
    t = eliminate_conflicts(t, conflict)
    stack = [t]
    while stack:
        x = stack.pop()
        if type(x) is SumData:
            raise NotClosed(f"unexpanded sum over {x.domain}")
        stack.extend(children(x))
    if term_vars(t):
        raise NotClosed(f"free variables {sorted(term_vars(t))}")
    return t


def to_basic_term(t, mode="strong", conflict=frozenset(), domains=None, budget=STEP_BUDGET):
    """Basic-term normal form of a closed, recursion-free term.

    ``mode="rooted_branching"`` additionally applies the tau laws below
    step prefixes.
    """
    if mode not in ("strong", "rooted_branching"):
        raise ValueError(f"unknown mode {mode}")
    t = _prepare(t, conflict, domains)
    out = drop_pending_shadows(Normalizer(budget).nf(t))
    if mode == "rooted_branching":
        out = tau_pass(out)
    return out


def prove_equal(p, q, mode="strong", conflict=frozenset(), domains=None):
    """``"proven"`` when both normal forms coincide, else ``"unknown"``."""
    try:
        a = to_basic_term(p, mode, conflict, domains)
        b = to_basic_term(q, mode, conflict, domains)
    except Unsupported:
        return "unknown"
    return "proven" if a == b else "unknown"


# -- individual oriented rules -------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """One oriented axiom applied at the root of a redex.

    ``redex(rng)`` draws a random instance of the left-hand side together
    with the conflict relation it is read under; ``apply`` returns the
    right-hand side, or None when the term is not a redex.
    """
    name: str
    family: str
    mode: str
    redex: Callable
    apply: Callable


EVENTS = ("a", "b", "c")
CHANNEL = ("s_C", "r_C")
GUARD_ATOMS = (Atom("fresh", (Nonce("n1"),)), Atom("fresh", (Nonce("n2"),)))


def ev(name):
    return Act(ActionEvent(name))


def random_event(rng, comm=False):
    names = EVENTS + CHANNEL if comm else EVENTS
    return ev(rng.choice(names))


def random_guard(rng, depth=1):
    r = rng.random()
    if depth <= 0 or r < 0.5:
        pick = rng.randrange(4)
        if pick < 2:
            return GUARD_ATOMS[pick]
        if pick == 2:
            return Eq(Const("A"), Const(rng.choice("AB")))
        return Neq(Const("A"), Const(rng.choice("AB")))
    if r < 0.7:
        return Not(random_guard(rng, depth - 1))
    op = And if r < 0.85 else Or
    return op(random_guard(rng, depth - 1), random_guard(rng, depth - 1))


def random_term(rng, depth=3, comm=True, guards=True, shadows=False, taus=True):
    """A random closed recursion-free term over a three-letter alphabet."""
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.7:
            return random_event(rng, comm)
        if r < 0.8 and taus:
            return TAU
        if r < 0.9:
            return EPS
        if shadows and r < 0.95:
            return Shadow(random_event(rng).event)
        return DELTA
    d = depth - 1
    ops = [Alt, Seq, Seq, Par, Between, CommMerge, "guard", "encap", "abstract"]
    op = rng.choice(ops if guards else [o for o in ops if o != "guard"])
    if op == "guard":
        return GuardPrefix(random_guard(rng), random_term(rng, d, comm, guards, shadows, taus))
    if op == "encap":
        return Encap(tuple(sorted(rng.sample(EVENTS + CHANNEL, 2))),
                     random_term(rng, d, comm, guards, shadows, taus))
    if op == "abstract":
        return Abstract(tuple(sorted(rng.sample(EVENTS + ("c_C",), 2))),
                        random_term(rng, d, comm, guards, shadows, taus))
    return op(random_term(rng, d, comm, guards, shadows, taus),
              random_term(rng, d, comm, guards, shadows, taus))


def _x(rng, **kw):
    kw.setdefault("depth", 2)
    return random_term(rng, **kw)


def _phi(rng):
    return random_guard(rng)


def _gt(g):
    """A guard used as a term."""
    return GuardPrefix(g, EPS)


def _can_terminate(t):
    try:
        return any(not s.is_step for s in Normalizer().hnf(t))
    except Unsupported:
        return True


def _comm_pairs(x, y):
    names_x = {e.channel for e in events_of(x) if e.kind in ("send", "receive")}
    names_y = {e.channel for e in events_of(y) if e.kind in ("send", "receive")}
    return bool(names_x & names_y)


def _gamma(e1, e2):
    hits = [c for c, rp, rq, _, _ in communications((e1.event,), (e2.event,)) if c]
    return Act(hits[0][0]) if hits else DELTA


def _is(t, *types):
    return type(t) in types


def _atomfree(g):
    return not guard_atoms(g)


def _rule(name, family, mode="strong"):
    def wrap(pair):
        redex, apply = pair
        RULES.append(Rule(name, family, mode, redex, apply))
        return pair
    return wrap


RULES = []
_NO_CONFLICT = frozenset()


def _r(build):
    """Redex builder returning no conflict relation."""
    return lambda rng: (build(rng), _NO_CONFLICT)


# A: basic laws
_rule("A1", "A")((_r(lambda r: Alt(_x(r), _x(r))),
                  lambda t: Alt(t.q, t.p) if _is(t, Alt) else None))
_rule("A2", "A")((_r(lambda r: Alt(Alt(_x(r), _x(r)), _x(r))),
                  lambda t: Alt(t.p.p, Alt(t.p.q, t.q)) if _is(t, Alt) and _is(t.p, Alt) else None))
_rule("A3", "A")((_r(lambda r: (lambda x: Alt(x, x))(_x(r))),
                  lambda t: t.p if _is(t, Alt) and t.p == t.q else None))
_rule("A4", "A")((_r(lambda r: Seq(Alt(_x(r), _x(r)), _x(r))),
                  lambda t: Alt(Seq(t.p.p, t.q), Seq(t.p.q, t.q))
                  if _is(t, Seq) and _is(t.p, Alt) else None))
_rule("A5", "A")((_r(lambda r: Seq(Seq(_x(r), _x(r)), _x(r))),
                  lambda t: Seq(t.p.p, Seq(t.p.q, t.q)) if _is(t, Seq) and _is(t.p, Seq) else None))
_rule("A6", "A")((_r(lambda r: Alt(_x(r), DELTA)),
                  lambda t: t.p if _is(t, Alt) and _is(t.q, Delta) else None))
_rule("A7", "A")((_r(lambda r: Seq(DELTA, _x(r))),
                  lambda t: DELTA if _is(t, Seq) and _is(t.p, Delta) else None))
_rule("A8", "A")((_r(lambda r: Seq(EPS, _x(r))),
                  lambda t: t.q if _is(t, Seq) and _is(t.p, Epsilon) else None))
_rule("A9", "A")((_r(lambda r: Seq(_x(r), EPS)),
                  lambda t: t.p if _is(t, Seq) and _is(t.q, Epsilon) else None))


# G1-G11: guards in sequential terms
def _g1(t):
    if _is(t, GuardPrefix) and _is(t.p, GuardPrefix) and t.p.g == Not(t.g):
        return DELTA
    return None


def _g2(t):
    if (_is(t, Alt) and _is(t.p, GuardPrefix) and _is(t.q, GuardPrefix)
            and _is(t.p.p, Epsilon) and _is(t.q.p, Epsilon)
            and t.q.g == Not(t.p.g) and _atomfree(t.p.g)):
        return EPS
    return None


def _g_decided(t):
    if _is(t, GuardPrefix) and _atomfree(t.g):
        return t.p if _eval(t.g, {}) else DELTA
    return None


def _g9(t):
    gs = []
    while _is(t, GuardPrefix):
        gs.append(t.g)
        t = t.p
    if len(gs) < 2:
        return None
    conj = gs[0]
    for g in gs[1:]:
        conj = And(conj, g)
    return DELTA if not minterms(conj) else None


def _g10(t):
    # [phi] e . [phi] x -> [phi] e . x; events carry no data effect, so
    # wp(e, phi) = phi over every reachable data state
    if _is(t, GuardPrefix) and _is(t.p, Seq) and _is(t.p.p, Act):
        inner = t.p.q
        if _is(inner, GuardPrefix) and inner.g == t.g:
            return GuardPrefix(t.g, Seq(t.p.p, inner.p))
    return None


def _g11(t):
    # [not phi] e . [phi] x -> [not phi] e . delta
    if _is(t, GuardPrefix) and _is(t.p, Seq) and _is(t.p.p, Act):
        inner = t.p.q
        if _is(inner, GuardPrefix) and t.g == Not(inner.g):
            return GuardPrefix(t.g, Seq(t.p.p, DELTA))
    return None


def _decided_guard(rng):
    return Eq(Const("A"), Const(rng.choice("AB")))


_rule("G1", "G")((_r(lambda r: (lambda g: GuardPrefix(g, GuardPrefix(Not(g), _x(r))))(_phi(r))),
                  _g1))
_rule("G2", "G")((_r(lambda r: (lambda g: Alt(_gt(g), _gt(Not(g))))(_decided_guard(r))), _g2))
_rule("G3", "G")((_r(lambda r: GuardPrefix(_phi(r), DELTA)),
                  lambda t: DELTA if _is(t, GuardPrefix) and _is(t.p, Delta) else None))
_rule("G4", "G")((_r(lambda r: GuardPrefix(_phi(r), Alt(_x(r), _x(r)))),
                  lambda t: Alt(GuardPrefix(t.g, t.p.p), GuardPrefix(t.g, t.p.q))
                  if _is(t, GuardPrefix) and _is(t.p, Alt) else None))
_rule("G5", "G")((_r(lambda r: GuardPrefix(_phi(r), Seq(_x(r), _x(r)))),
                  lambda t: Seq(GuardPrefix(t.g, t.p.p), t.p.q)
                  if _is(t, GuardPrefix) and _is(t.p, Seq) else None))
_rule("G6", "G")((_r(lambda r: Seq(Alt(_gt(_phi(r)), _gt(_phi(r))), _x(r))),
                  lambda t: Alt(GuardPrefix(t.p.p.g, t.q), GuardPrefix(t.p.q.g, t.q))
                  if _is(t, Seq) and _is(t.p, Alt) and _is(t.p.p, GuardPrefix)
                  and _is(t.p.q, GuardPrefix) and _is(t.p.p.p, Epsilon)
                  and _is(t.p.q.p, Epsilon) else None))
_rule("G7", "G")((_r(lambda r: Seq(GuardPrefix(_phi(r), _gt(_phi(r))), _x(r))),
                  lambda t: GuardPrefix(t.p.g, GuardPrefix(t.p.p.g, t.q))
                  if _is(t, Seq) and _is(t.p, GuardPrefix) and _is(t.p.p, GuardPrefix)
                  and _is(t.p.p.p, Epsilon) else None))
_rule("G8", "G")((_r(lambda r: GuardPrefix(_decided_guard(r), _x(r))), _g_decided))
_rule("G9", "G")((_r(lambda r: (lambda g: GuardPrefix(g, GuardPrefix(
    r.choice([Not(g), And(Not(g), _phi(r))]), _x(r))))(_phi(r))), _g9))
_rule("G10", "G")((_r(lambda r: (lambda g: GuardPrefix(g, Seq(random_event(r),
                                                             GuardPrefix(g, _x(r)))))(_phi(r))),
                   _g10))
_rule("G11", "G")((_r(lambda r: (lambda g: GuardPrefix(Not(g), Seq(random_event(r),
                                                                  GuardPrefix(g, _x(r)))))(_phi(r))),
                   _g11))


# P: parallel
def _prefixed(rng, comm=False):
    return Seq(random_event(rng, comm), _x(rng))


def _p1(t):
    """x <> y as lone moves + x || y + x | y, for sums of event-prefixed summands."""
    if not _is(t, Between):
        return None
    xs, ys = summands_of(t.p), summands_of(t.q)

    def head(s):
        if _is(s, Act):
            return s, EPS
        if _is(s, Seq) and _is(s.p, Act):
            return s.p, s.q
        return None
    hx, hy = [head(s) for s in xs], [head(s) for s in ys]
    if not xs or not ys or None in hx or None in hy:
        return None
    out = []
    for e, rest in hx:
        out.append(Seq(e, Between(rest, t.q)))
    for e, rest in hy:
        out.append(Seq(e, Between(t.p, rest)))
    out.append(Par(t.p, t.q))
    out.append(CommMerge(t.p, t.q))
    return alt(*out)


def _sum_of_prefixed(rng):
    return alt(*[_prefixed(rng, comm=True) if rng.random() < 0.7 else random_event(rng, True)
                 for _ in range(rng.randint(1, 2))])


def _prefix_rule(op, left_cont, right_cont, combine):
    def apply(t):
        if not _is(t, op):
            return None
        lp, rp = t.p, t.q
        if left_cont:
            if not (_is(lp, Seq) and _is(lp.p, Act)):
                return None
            e1, x = lp.p, lp.q
        elif _is(lp, Act):
            e1, x = lp, None
        else:
            return None
        if right_cont:
            if not (_is(rp, Seq) and _is(rp.p, Act)):
                return None
            e2, y = rp.p, rp.q
        elif _is(rp, Act):
            e2, y = rp, None
        else:
            return None
        head = combine(e1, e2)
        if x is not None and y is not None:
            return Seq(head, Between(x, y))
        rest = x if x is not None else y
        return head if rest is None else Seq(head, rest)
    return apply


def _redex_prefix(op, left_cont, right_cont, comm=False):
    def build(rng):
        e1, e2 = random_event(rng, comm), random_event(rng, comm)
        if comm and rng.random() < 0.7:
            e1, e2 = ev("s_C"), ev("r_C")
            if rng.random() < 0.5:
                e1, e2 = e2, e1
        lp = Seq(e1, _x(rng)) if left_cont else e1
        rp = Seq(e2, _x(rng)) if right_cont else e2
        return op(lp, rp)
    return _r(build)


_rule("P1", "P")((_r(lambda r: Between(_sum_of_prefixed(r), _sum_of_prefixed(r))), _p1))
_rule("P2", "P")((_redex_prefix(Par, False, True), _prefix_rule(Par, False, True, Par)))
_rule("P3", "P")((_redex_prefix(Par, True, False), _prefix_rule(Par, True, False, Par)))
_rule("P4", "P")((_redex_prefix(Par, True, True), _prefix_rule(Par, True, True, Par)))
_rule("P5", "P")((_r(lambda r: Par(Alt(_x(r), _x(r)), _x(r))),
                  lambda t: Alt(Par(t.p.p, t.q), Par(t.p.q, t.q))
                  if _is(t, Par) and _is(t.p, Alt) else None))
_rule("P6", "P")((_r(lambda r: Par(_x(r), Alt(_x(r), _x(r)))),
                  lambda t: Alt(Par(t.p, t.q.p), Par(t.p, t.q.q))
                  if _is(t, Par) and _is(t.q, Alt) else None))
_rule("P7", "P")((_r(lambda r: Par(DELTA, _x(r))),
                  lambda t: DELTA if _is(t, Par) and _is(t.p, Delta) else None))
_rule("P8", "P")((_r(lambda r: Par(_x(r), DELTA)),
                  lambda t: DELTA if _is(t, Par) and _is(t.q, Delta) else None))
_rule("P9", "P")((_r(lambda r: Par(EPS, _x(r))),
                  lambda t: t.q if _is(t, Par) and _is(t.p, Epsilon) else None))
_rule("P10", "P")((_r(lambda r: Par(_x(r), EPS)),
                   lambda t: t.p if _is(t, Par) and _is(t.q, Epsilon) else None))
_rule("P-comm", "P")((_r(lambda r: Par(_x(r), _x(r))),
                      lambda t: Par(t.q, t.p) if _is(t, Par) else None))
_rule("P-between-comm", "P")((_r(lambda r: Between(_x(r), _x(r))),
                              lambda t: Between(t.q, t.p) if _is(t, Between) else None))


# C: communication merge
_rule("C1", "C")((_redex_prefix(CommMerge, False, False, True),
                  _prefix_rule(CommMerge, False, False, _gamma)))
_rule("C2", "C")((_redex_prefix(CommMerge, False, True, True),
                  _prefix_rule(CommMerge, False, True, _gamma)))
_rule("C3", "C")((_redex_prefix(CommMerge, True, False, True),
                  _prefix_rule(CommMerge, True, False, _gamma)))
_rule("C4", "C")((_redex_prefix(CommMerge, True, True, True),
                  _prefix_rule(CommMerge, True, True, _gamma)))
_rule("C5", "C")((_r(lambda r: CommMerge(Alt(_x(r), _x(r)), _x(r))),
                  lambda t: Alt(CommMerge(t.p.p, t.q), CommMerge(t.p.q, t.q))
                  if _is(t, CommMerge) and _is(t.p, Alt) else None))
_rule("C6", "C")((_r(lambda r: CommMerge(_x(r), Alt(_x(r), _x(r)))),
                  lambda t: Alt(CommMerge(t.p, t.q.p), CommMerge(t.p, t.q.q))
                  if _is(t, CommMerge) and _is(t.q, Alt) else None))
_rule("C7", "C")((_r(lambda r: CommMerge(DELTA, _x(r))),
                  lambda t: DELTA if _is(t, CommMerge) and _is(t.p, Delta) else None))
_rule("C8", "C")((_r(lambda r: CommMerge(_x(r), DELTA)),
                  lambda t: DELTA if _is(t, CommMerge) and _is(t.q, Delta) else None))
_rule("C9", "C")((_r(lambda r: CommMerge(EPS, _x(r))),
                  lambda t: DELTA if _is(t, CommMerge) and _is(t.p, Epsilon) else None))
_rule("C10", "C")((_r(lambda r: CommMerge(_x(r), EPS)),
                   lambda t: DELTA if _is(t, CommMerge) and _is(t.q, Epsilon) else None))


# CE and U: conflict elimination under a nonempty conflict relation
def _conflict(rng):
    pairs = [frozenset(("a", "b")), frozenset(("b", "c")), frozenset(("a",))]
    return frozenset(rng.sample(pairs, rng.randint(1, 2)))


def _cx(rng):
    return random_term(rng, depth=2, comm=False, guards=False)


def _with_conflict(build):
    return lambda rng: (build(rng), _conflict(rng))


def _ce(pattern, rhs):
    def apply(t, conflict):
        if not _is(t, Theta) or not pattern(t.p):
            return None
        return rhs(t.p, conflict)
    return apply


def _ce_par(op):
    def rhs(p, conflict):
        return Alt(op(Unless(Theta(p.p), p.q), p.q), op(Unless(Theta(p.q), p.p), p.p))
    return rhs


_rule("CE1", "CE")((_with_conflict(lambda r: Theta(random_event(r))),
                    _ce(lambda p: _is(p, Act), lambda p, c: p)))
_rule("CE2", "CE")((_with_conflict(lambda r: Theta(DELTA)),
                    _ce(lambda p: _is(p, Delta), lambda p, c: p)))
_rule("CE3", "CE")((_with_conflict(lambda r: Theta(EPS)),
                    _ce(lambda p: _is(p, Epsilon), lambda p, c: p)))
_rule("CE4", "CE")((_with_conflict(lambda r: Theta(Alt(_cx(r), _cx(r)))),
                    _ce(lambda p: _is(p, Alt),
                        lambda p, c: Alt(Unless(Theta(p.p), p.q), Unless(Theta(p.q), p.p)))))
_rule("CE5", "CE")((_with_conflict(lambda r: Theta(Seq(_cx(r), _cx(r)))),
                    _ce(lambda p: _is(p, Seq), lambda p, c: Seq(Theta(p.p), Theta(p.q)))))
_rule("CE6", "CE")((_with_conflict(lambda r: Theta(Par(_cx(r), _cx(r)))),
                    _ce(lambda p: _is(p, Par), _ce_par(Par))))
_rule("CE7", "CE")((_with_conflict(lambda r: Theta(CommMerge(_cx(r), _cx(r)))),
                    _ce(lambda p: _is(p, CommMerge), _ce_par(CommMerge))))
_rule("G23", "G")((_with_conflict(lambda r: Theta(_gt(_phi(r)))),
                   _ce(lambda p: _is(p, GuardPrefix) and _is(p.p, Epsilon), lambda p, c: p)))


def _u1(t, conflict):
    if _is(t, Unless) and _is(t.p, Act) and _is(t.q, Act):
        a, b = t.p.event.name, t.q.event.name
        if frozenset((a, b)) in conflict or (a == b and frozenset((a,)) in conflict):
            return TAU
    return None


def _u_unit(lhs_type, rhs_type, result):
    def apply(t, conflict):
        if _is(t, Unless) and _is(t.p, lhs_type) and _is(t.q, rhs_type):
            return result(t)
        return None
    return apply


def _u_dist(left, op, build):
    """U8-U15: x <| y distributes over the operator on either side."""
    def apply(t, conflict):
        if not _is(t, Unless):
            return None
        side = t.p if left else t.q
        if not _is(side, op):
            return None
        return build(t)
    return apply


def _conflicting_pair(rng):
    c = _conflict(rng)
    pair = sorted(rng.choice(sorted(c, key=sorted)))
    a, b = pair[0], pair[-1]
    return Unless(ev(a), ev(b)), c


_rule("U1", "U")((_conflicting_pair, _u1))
_rule("U4", "U")((_with_conflict(lambda r: Unless(random_event(r), DELTA)),
                  _u_unit(Act, Delta, lambda t: t.p)))
_rule("U5", "U")((_with_conflict(lambda r: Unless(DELTA, random_event(r))),
                  _u_unit(Delta, Act, lambda t: DELTA)))
_rule("U6", "U")((_with_conflict(lambda r: Unless(random_event(r), EPS)),
                  _u_unit(Act, Epsilon, lambda t: t.p)))
_rule("U8", "U")((_with_conflict(lambda r: Unless(Alt(_cx(r), _cx(r)), _cx(r))),
                  _u_dist(True, Alt, lambda t: Alt(Unless(t.p.p, t.q), Unless(t.p.q, t.q)))))
_rule("U9", "U")((_with_conflict(lambda r: Unless(Seq(_cx(r), _cx(r)), _cx(r))),
                  _u_dist(True, Seq, lambda t: Seq(Unless(t.p.p, t.q), Unless(t.p.q, t.q)))))
_rule("U10", "U")((_with_conflict(lambda r: Unless(Par(_cx(r), _cx(r)), _cx(r))),
                   _u_dist(True, Par, lambda t: Par(Unless(t.p.p, t.q), Unless(t.p.q, t.q)))))
_rule("U11", "U")((_with_conflict(lambda r: Unless(CommMerge(_cx(r), _cx(r)), _cx(r))),
                   _u_dist(True, CommMerge,
                           lambda t: CommMerge(Unless(t.p.p, t.q), Unless(t.p.q, t.q)))))
_rule("U12", "U")((_with_conflict(lambda r: Unless(_cx(r), Alt(_cx(r), _cx(r)))),
                   _u_dist(False, Alt, lambda t: Unless(Unless(t.p, t.q.p), t.q.q))))
_rule("U13", "U")((_with_conflict(lambda r: Unless(_cx(r), Seq(_cx(r), _cx(r)))),
                   _u_dist(False, Seq, lambda t: Unless(Unless(t.p, t.q.p), t.q.q))))
_rule("U14", "U")((_with_conflict(lambda r: Unless(_cx(r), Par(_cx(r), _cx(r)))),
                   _u_dist(False, Par, lambda t: Unless(Unless(t.p, t.q.p), t.q.q))))
_rule("U15", "U")((_with_conflict(lambda r: Unless(_cx(r), CommMerge(_cx(r), _cx(r)))),
                   _u_dist(False, CommMerge, lambda t: Unless(Unless(t.p, t.q.p), t.q.q))))


# D: encapsulation
def _encap(rng, body):
    return Encap(tuple(sorted(rng.sample(EVENTS + CHANNEL, rng.randint(1, 3)))), body)


def _d6(t):
    if _is(t, Encap) and _is(t.p, Par) and not _comm_pairs(t.p.p, t.p.q):
        return Par(Encap(t.H, t.p.p), Encap(t.H, t.p.q))
    return None


_rule("D1", "D")((_r(lambda r: Encap(("s_C",), random_event(r))),
                  lambda t: t.p if _is(t, Encap) and _is(t.p, Act)
                  and not in_patterns(t.p.event.name, t.H) else None))
_rule("D2", "D")((_r(lambda r: (lambda e: Encap((e.event.name,), e))(random_event(r, True))),
                  lambda t: DELTA if _is(t, Encap) and _is(t.p, Act)
                  and in_patterns(t.p.event.name, t.H) else None))
_rule("D3", "D")((_r(lambda r: _encap(r, DELTA)),
                  lambda t: DELTA if _is(t, Encap) and _is(t.p, Delta) else None))
_rule("D4", "D")((_r(lambda r: _encap(r, Alt(_x(r), _x(r)))),
                  lambda t: Alt(Encap(t.H, t.p.p), Encap(t.H, t.p.q))
                  if _is(t, Encap) and _is(t.p, Alt) else None))
_rule("D5", "D")((_r(lambda r: _encap(r, Seq(_x(r), _x(r)))),
                  lambda t: Seq(Encap(t.H, t.p.p), Encap(t.H, t.p.q))
                  if _is(t, Encap) and _is(t.p, Seq) else None))
_rule("D6", "D")((_r(lambda r: _encap(r, Par(_x(r, comm=False), _x(r)))), _d6))
_rule("G24", "G")((_r(lambda r: _encap(r, _gt(_phi(r)))),
                   lambda t: t.p if _is(t, Encap) and _is(t.p, GuardPrefix)
                   and _is(t.p.p, Epsilon) else None))


# G12-G25: guards in parallel terms
_rule("G12", "G")((_r(lambda r: GuardPrefix(_phi(r), Par(_x(r), _x(r)))),
                   lambda t: Par(GuardPrefix(t.g, t.p.p), GuardPrefix(t.g, t.p.q))
                   if _is(t, GuardPrefix) and _is(t.p, Par) else None))
_rule("G13", "G")((_r(lambda r: GuardPrefix(_phi(r), CommMerge(_x(r), _x(r)))),
                   lambda t: CommMerge(GuardPrefix(t.g, t.p.p), GuardPrefix(t.g, t.p.q))
                   if _is(t, GuardPrefix) and _is(t.p, CommMerge) else None))


def _guard_with(op, other, result, left=True):
    def build(rng):
        g = _gt(_phi(rng))
        return op(g, other) if left else op(other, g)

    def apply(t):
        if not _is(t, op):
            return None
        g, o = (t.p, t.q) if left else (t.q, t.p)
        if _is(g, GuardPrefix) and _is(g.p, Epsilon) and o == other:
            return result(g)
        return None
    return _r(build), apply


_rule("G14", "G")(_guard_with(Par, DELTA, lambda g: DELTA))
_rule("G15", "G")(_guard_with(Par, DELTA, lambda g: DELTA, left=False))
_rule("G16", "G")(_guard_with(CommMerge, DELTA, lambda g: DELTA))
_rule("G17", "G")(_guard_with(CommMerge, DELTA, lambda g: DELTA, left=False))
_rule("G18", "G")(_guard_with(Par, EPS, lambda g: g))
_rule("G19", "G")(_guard_with(Par, EPS, lambda g: g, left=False))
_rule("G20", "G")(_guard_with(CommMerge, EPS, lambda g: DELTA))
_rule("G21", "G")(_guard_with(CommMerge, EPS, lambda g: DELTA, left=False))
_rule("G22", "G")((_r(lambda r: (lambda g: Par(_gt(g), _gt(Not(g))))(_phi(r))),
                   lambda t: DELTA if _is(t, Par) and _is(t.p, GuardPrefix)
                   and _is(t.q, GuardPrefix) and t.q.g == Not(t.p.g) else None))


def _par_guards(t):
    gs = []
    stack = [t]
    while stack:
        x = stack.pop()
        if _is(x, Par):
            stack += [x.p, x.q]
        elif _is(x, GuardPrefix) and _is(x.p, Epsilon):
            gs.append(x.g)
        else:
            return None
    return gs


def _g25(t):
    gs = _par_guards(t) if _is(t, Par) else None
    if not gs:
        return None
    conj = gs[0]
    for g in gs[1:]:
        conj = And(conj, g)
    return DELTA if not minterms(conj) else None


def _unsat_par(rng):
    g = _phi(rng)
    parts = [_gt(g), _gt(_phi(rng)), _gt(Not(g))]
    rng.shuffle(parts)
    return Par(parts[0], Par(parts[1], parts[2]))


_rule("G25", "G")((_r(_unsat_par), _g25))


# TI: abstraction
def _abstract(rng, body):
    return Abstract(tuple(sorted(rng.sample(EVENTS + ("c_C",), rng.randint(1, 2)))), body)


def _ti6(t):
    if _is(t, Abstract) and _is(t.p, Par) and not _comm_pairs(t.p.p, t.p.q):
        return Par(Abstract(t.I, t.p.p), Abstract(t.I, t.p.q))
    return None


_rule("TI1", "TI", "rooted_branching")((
    _r(lambda r: Abstract(("c_C",), random_event(r))),
    lambda t: t.p if _is(t, Abstract) and _is(t.p, Act)
    and not in_patterns(t.p.event.name, t.I) else None))
_rule("TI2", "TI", "rooted_branching")((
    _r(lambda r: (lambda e: Abstract((e.event.name,), e))(random_event(r))),
    lambda t: TAU if _is(t, Abstract) and _is(t.p, Act)
    and in_patterns(t.p.event.name, t.I) else None))
_rule("TI3", "TI", "rooted_branching")((
    _r(lambda r: _abstract(r, DELTA)),
    lambda t: DELTA if _is(t, Abstract) and _is(t.p, Delta) else None))
_rule("TI4", "TI", "rooted_branching")((
    _r(lambda r: _abstract(r, Alt(_x(r), _x(r)))),
    lambda t: Alt(Abstract(t.I, t.p.p), Abstract(t.I, t.p.q))
    if _is(t, Abstract) and _is(t.p, Alt) else None))
_rule("TI5", "TI", "rooted_branching")((
    _r(lambda r: _abstract(r, Seq(_x(r), _x(r)))),
    lambda t: Seq(Abstract(t.I, t.p.p), Abstract(t.I, t.p.q))
    if _is(t, Abstract) and _is(t.p, Seq) else None))
_rule("TI6", "TI", "rooted_branching")((
    _r(lambda r: _abstract(r, Par(_x(r, comm=False), _x(r)))), _ti6))
_rule("G28", "TI", "rooted_branching")((
    _r(lambda r: _abstract(r, _gt(_phi(r)))),
    lambda t: t.p if _is(t, Abstract) and _is(t.p, GuardPrefix)
    and _is(t.p.p, Epsilon) else None))


# B: silent steps (rooted branching)
def _b2(t):
    if not (_is(t, Seq) and _is(t.p, Act) and _is(t.q, Alt)):
        return None
    left, x = t.q.p, t.q.q
    if _is(left, Seq) and _is(left.p, TauP) and _is(left.q, Alt) and left.q.q == x:
        return Seq(t.p, left.q)
    return None


def _b3(t):
    if _is(t, Par) and _is(t.q, TauP) and not _can_terminate(t.p):
        return t.p
    return None


def _nonterminating(rng):
    while True:
        x = _x(rng)
        if not _can_terminate(x):
            return x


_rule("B1", "B", "rooted_branching")((
    _r(lambda r: Seq(random_event(r), TAU)),
    lambda t: t.p if _is(t, Seq) and _is(t.p, Act) and _is(t.q, TauP) else None))
_rule("B2", "B", "rooted_branching")((
    _r(lambda r: (lambda x, y: Seq(random_event(r), Alt(Seq(TAU, Alt(y, x)), x)))(_x(r), _x(r))),
    _b2))
_rule("B3", "B", "rooted_branching")((_r(lambda r: Par(_nonterminating(r), TAU)), _b3))


def _g26(t):
    if (_is(t, Seq) and _is(t.p, Act) and _is(t.q, GuardPrefix)
            and _is(t.q.p, TauP)):
        return Seq(t.p, _gt(t.q.g))
    return None


def _g27(t):
    # the tau commits every atom of the guard; only harmless when the guard
    # allows one assignment or the rest never tests those atoms
    if not (_is(t, Seq) and _is(t.p, Act) and _is(t.q, GuardPrefix)):
        return None
    b = _b2(Seq(t.p, t.q.p))
    if b is None:
        return None
    g = t.q.g
    if len(minterms(g)) > 1 and set(guard_atoms(g)) & _atoms(b.q):
        return None
    return Seq(t.p, GuardPrefix(g, b.q))


_rule("G26", "B", "rooted_branching")((
    _r(lambda r: Seq(random_event(r), GuardPrefix(_phi(r), TAU))), _g26))
def _g27_redex(rng):
    while True:
        x, y = _x(rng), _x(rng)
        t = Seq(random_event(rng), GuardPrefix(_phi(rng), Alt(Seq(TAU, Alt(y, x)), x)))
        if _g27(t) is not None:
            return t


_rule("G27", "B", "rooted_branching")((_r(_g27_redex), _g27))


# SC: shadow constants
def _sh(e):
    return Shadow(e.event)


def _sc(build, apply):
    return _r(build), apply


def _sc_apply(left_shadow, left_cont, right_cont):
    def apply(t):
        if not _is(t, Par):
            return None

        def split(x, cont):
            if cont:
                if not _is(x, Seq):
                    return None
                return x.p, x.q
            return x, None
        a, b = split(t.p, left_cont), split(t.q, right_cont)
        if a is None or b is None:
            return None
        (ha, xa), (hb, xb) = a, b
        sh, e = (ha, hb) if left_shadow else (hb, ha)
        if not (_is(sh, Shadow) and _is(e, Act) and sh.of == e.event):
            return None
        if xa is not None and xb is not None:
            return Seq(e, Between(xa, xb))
        rest = xa if xa is not None else xb
        return e if rest is None else Seq(e, rest)
    return apply


def _sc_build(left_shadow, left_cont, right_cont):
    def build(rng):
        e = random_event(rng)
        ha, hb = (_sh(e), e) if left_shadow else (e, _sh(e))
        lp = Seq(ha, _x(rng)) if left_cont else ha
        rp = Seq(hb, _x(rng)) if right_cont else hb
        return Par(lp, rp)
    return build


_rule("SC1", "SC", "rooted_branching")((
    _r(lambda r: Seq(Shadow(), _x(r))),
    lambda t: t.q if _is(t, Seq) and _is(t.p, Shadow) and t.p.of is None else None))
_rule("SC2", "SC", "rooted_branching")((
    _r(lambda r: Seq(_x(r), Shadow())),
    lambda t: t.p if _is(t, Seq) and _is(t.q, Shadow) and t.q.of is None else None))
_rule("SC3", "SC", "rooted_branching")(_sc(_sc_build(True, False, False),
                                           _sc_apply(True, False, False)))
_rule("SC4", "SC", "rooted_branching")(_sc(_sc_build(False, False, True),
                                           _sc_apply(False, False, True)))
_rule("SC5", "SC", "rooted_branching")(_sc(_sc_build(True, False, True),
                                           _sc_apply(True, False, True)))
_rule("SC6", "SC", "rooted_branching")(_sc(_sc_build(False, True, False),
                                           _sc_apply(False, True, False)))
_rule("SC7", "SC", "rooted_branching")(_sc(_sc_build(True, True, False),
                                           _sc_apply(True, True, False)))
_rule("SC8", "SC", "rooted_branching")(_sc(_sc_build(False, True, True),
                                           _sc_apply(False, True, True)))
_rule("SC9", "SC", "rooted_branching")(_sc(_sc_build(True, True, True),
                                           _sc_apply(True, True, True)))

RULES = tuple(RULES)
RULES_BY_NAME = {r.name: r for r in RULES}


def apply_rule(rule, t, conflict=frozenset()):
    """Apply one rule at the root of ``t``; None when ``t`` is not a redex."""
    if rule.family in ("CE", "U") or rule.name == "G23":
        return rule.apply(t, conflict)
    return rule.apply(t)


def redex(rule, rng):
    """A random redex for ``rule`` and its conflict relation."""
    return rule.redex(rng)


def random_pair(rng, depth=3):
    """A term and a variant obtained by rewriting or perturbing a subterm.

    Used by the oracle cross-check: rewritten variants are often provably
    equal, perturbed ones usually not.
    """
    p = random_term(rng, depth)
    r = rng.random()
    if r < 0.4:
        return p, p if rng.random() < 0.2 else _rewrite_somewhere(rng, p)
    if r < 0.7:
        return p, _perturb(rng, p)
    return p, random_term(rng, depth)


_PLAIN_RULES = None


def _rewrite_somewhere(rng, t):
    global _PLAIN_RULES
    if _PLAIN_RULES is None:
        _PLAIN_RULES = [r for r in RULES if r.family not in ("CE", "U") and r.name != "G23"]
    for _ in range(4):
        positions = _positions(t)
        rng.shuffle(positions)
        for path in positions:
            sub = _at(t, path)
            rules = list(_PLAIN_RULES)
            rng.shuffle(rules)
            for rule in rules:
                if rule.mode != "strong":
                    continue
                out = rule.apply(sub)
                if out is not None:
                    t = _replace_at(t, path, out)
                    break
            else:
                continue
            break
    return t


def _perturb(rng, t):
    positions = [p for p in _positions(t) if type(_at(t, p)) is Act]
    if not positions:
        return Alt(t, random_event(rng))
    path = rng.choice(positions)
    return _replace_at(t, path, random_event(rng, comm=True))


def _positions(t, path=()):
    out = [path]
    for i, c in enumerate(children(t)):
        out += _positions(c, path + (i,))
    return out


def _at(t, path):
    for i in path:
        t = children(t)[i]
    return t


def _replace_at(t, path, new):
    if not path:
        return new
    kids = list(children(t))
    kids[path[0]] = _replace_at(kids[path[0]], path[1:], new)
    return rebuild(t, kids)
