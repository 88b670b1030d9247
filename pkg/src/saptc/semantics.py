"""Step semantics of guarded process terms and LTS generation.

A configuration is a process term paired with a DataState.  Moves of a
subterm carry the multiset of events performed in one step, any shadow
constants still waiting for a partner event, the residual term, and the
freshness assumptions taken so far.  A step with no events is tau.

Freshness atoms (``fresh(t)``, ``valid(t)``) are three-valued in the
nondeterministic mode: an undecided atom may go either way, and the choice
is recorded in the state so later tests of the same atom agree with it.
Assumptions about values that no longer occur in the residual term are
dropped.
"""

import enum
import itertools
import json
import os
from dataclasses import dataclass, field

from ._node import node
from .messages import Nonce, normalize, subterms, match
from .model import expanded_equations
from .terms import (
    Abstract, Act, ActionEvent, Alt, And, Atom, Between, CommMerge, DELTA, Delta,
    EPS, Encap, Epsilon, Eq, FalseG, GuardPrefix, ModelError, Neq, Not, Par,
    RecVar, Seq, Shadow, SumData, TauP, Theta, TrueG, Unless, children, event_vars,
    eliminate_conflicts, expand_sum, guard_atoms, guard_vars, in_patterns,
    messages_of, recvars_of, show_event, show_guard, show_term, subst_guard,
    subst_term,
)


class UngroundGuard(Exception):
    pass


class UngroundAction(Exception):
    pass


class StateSpaceExceeded(Exception):
    def __init__(self, max_states):
        self.max_states = max_states
        super().__init__(f"state space exceeds {max_states} states")


class Truth(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    BOTH = "both"


FRESHNESS_MODES = ("nondet", "honest", "replayed")


def default_max_states():
    return int(os.environ.get("SAPTC_MAX_STATES", "100000"))


@dataclass(frozen=True)
class BuildConfig:
    max_states: int = field(default_factory=default_max_states)
    freshness: str = "nondet"
    step_semantics: str = "steps_and_interleavings"

    def __post_init__(self):
        if self.max_states < 1:
            raise ValueError("max_states must be at least 1")
        if self.freshness not in FRESHNESS_MODES:
            raise ValueError(f"unknown freshness mode {self.freshness}")

    def as_dict(self):
        return {"max_states": self.max_states, "freshness": self.freshness,
                "step_semantics": self.step_semantics}


@node
class DataState:
    """Global bindings plus the freshness assumptions taken on this path."""
    bindings: tuple = ()
    assumptions: frozenset = frozenset()

    def key(self):
        return ";".join(sorted(f"{show_guard(a)}={int(v)}" for a, v in self.assumptions))


EMPTY_STATE = DataState()


def _consistent(asm):
    return len({a for a, _ in asm}) == len(asm)


def _merge(a, b):
    if a is b or not b:
        return a
    if not a:
        return b
    u = a | b
    return u if _consistent(u) else None


def _evaluate(g, value_of):
    t = type(g)
    if t is TrueG:
        return True
    if t is FalseG:
        return False
    if t is Atom:
        return value_of[g]
    if t is Eq:
        return normalize(g.lhs) == normalize(g.rhs)
    if t is Neq:
        return normalize(g.lhs) != normalize(g.rhs)
    if t is Not:
        return not _evaluate(g.arg, value_of)
    if t is And:
        return _evaluate(g.lhs, value_of) and _evaluate(g.rhs, value_of)
    return _evaluate(g.lhs, value_of) or _evaluate(g.rhs, value_of)


def _label(events):
    if not events:
        return "tau"
    if len(events) == 1:
        return show_event(events[0])
    return "{" + ",".join(show_event(e) for e in events) + "}"


def _sorted_events(events):
    return tuple(sorted(events, key=show_event))


# -- canonical residual constructors ---------------------------------------------

def mk_seq(p, q):
    tp = type(p)
    if tp is Epsilon:
        return q
    if tp is Delta:
        return DELTA
    if type(q) is Epsilon:
        return p
    return Seq(p, q)


def _operands(t, out):
    if type(t) is Between:
        _operands(t.p, out)
        _operands(t.q, out)
    elif type(t) is not Epsilon:
        out.append(t)


def mk_between(p, q):
    if type(p) is Epsilon:
        return q
    if type(q) is Epsilon:
        return p
    ops = []
    _operands(p, ops)
    _operands(q, ops)
    ops.sort(key=show_term)
    out = ops[-1]
    for t in reversed(ops[:-1]):
        out = Between(t, out)
    return out


def mk_wrap(kind, names, p):
    if type(p) in (Epsilon, Delta):
        return p
    return kind(names, p)


class Semantics:
    """Transition relation of one model (or a bare term) under a config."""

    def __init__(self, equations=None, domains=None, conflict=frozenset(),
                 freshness="nondet", globals_=()):
        domains = domains or {}
        self.freshness = freshness
        self.conflict = conflict
        self.globals = dict(globals_)
        self.domains = domains
        eqs = expanded_equations(equations or {}, domains)
        self.equations = {}
        for name, eq in eqs.items():
            body = eliminate_conflicts(eq.body, conflict)
            if self.globals:
                body = subst_term(body, self.globals)
            self.equations[name] = (eq.params, body)
        self._unfold = {}
        self._moves = {}
        self._terms = {}
        self._sat = {}
        self._static_atoms = {}
        self._shadow_cache = {}

    # -- preparation --
    def prepare(self, t):
        t = expand_sum(t, self.domains)
        t = eliminate_conflicts(t, self.conflict)
        if self.globals:
            t = subst_term(t, self.globals)
        return t

    def unfold(self, r):
        body = self._unfold.get(r)
        if body is None:
            if r.name not in self.equations:
                raise ModelError(f"undefined recursion variable {r.name}")
            params, b = self.equations[r.name]
            if len(params) != len(r.args):
                raise ModelError(f"{r.name} expects {len(params)} arguments")
            body = subst_term(b, dict(zip(params, r.args))) if params else b
            self._unfold[r] = body
        return body

    # -- guards --
    def sat(self, g, asm):
        """Assumption sets extending ``asm`` under which ``g`` holds."""
        key = (g, asm)
        hit = self._sat.get(key)
        if hit is not None:
            return hit
        if guard_vars(g):
            raise UngroundGuard(f"guard {show_guard(g)} has unbound variables "
                                f"{sorted(guard_vars(g))}")
        atoms = sorted(set(guard_atoms(g)), key=show_guard)
        out = []
        if self.freshness != "nondet":
            fixed = {a: self.freshness == "honest" for a in atoms}
            if _evaluate(g, fixed):
                out.append(asm)
        else:
            decided = dict(asm)
            free = [a for a in atoms if a not in decided]
            for values in itertools.product((True, False), repeat=len(free)):
                value_of = dict(decided)
                value_of.update(zip(free, values))
                if _evaluate(g, value_of):
                    out.append(asm | frozenset(zip(free, values)) if free else asm)
        self._sat[key] = out
        return out

    def eval_guard(self, g, state=EMPTY_STATE):
        binding = {**self.globals, **dict(state.bindings)}
        if binding:
            g = subst_guard(g, binding)
        asm = state.assumptions
        atoms = set(guard_atoms(g)) - {a for a, _ in asm}
        n = len(self.sat(g, asm))
        if n == 0:
            return Truth.FALSE
        if self.freshness != "nondet" or n == 2 ** len(atoms):
            return Truth.TRUE
        return Truth.BOTH

    # -- termination --
    def terms(self, t, asm):
        key = (t, asm)
        hit = self._terms.get(key)
        if hit is not None:
            return hit
        tt = type(t)
        if tt is Epsilon or (tt is Shadow and t.of is None):
            out = (asm,)
        elif tt in (Delta, Act, TauP, Shadow, CommMerge):
            out = ()
        elif tt is GuardPrefix:
            out = tuple({b for a in self.sat(t.g, asm) for b in self.terms(t.p, a)})
        elif tt is Seq or tt is Par or tt is Between:
            out = tuple({b for a in self.terms(t.p, asm) for b in self.terms(t.q, a)})
        elif tt is Alt:
            out = tuple(set(self.terms(t.p, asm)) | set(self.terms(t.q, asm)))
        elif tt is Encap or tt is Abstract:
            out = self.terms(t.p, asm)
        elif tt is RecVar:
            out = self.terms(self.unfold(t), asm)
        else:
            raise ModelError(f"no semantics for {tt.__name__} here")
        self._terms[key] = out
        return out

    def terminates(self, t, state=EMPTY_STATE):
        return bool(self.terms(t, state.assumptions))

    # -- moves --
    def moves(self, t, asm):
        key = (t, asm)
        hit = self._moves.get(key)
        if hit is not None:
            return hit
        out = self._compute_moves(t, asm)
        self._moves[key] = out
        return out

    def _compute_moves(self, t, asm):
        tt = type(t)
        if tt is Act:
            return ((((t.event,), (), EPS, asm)),)
        if tt is TauP:
            return (((), (), EPS, asm),)
        if tt is Shadow:
            return (((), (t.of,), EPS, asm),) if t.of is not None else ()
        if tt is Epsilon or tt is Delta:
            return ()
        if tt is RecVar:
            return self.moves(self.unfold(t), asm)
        if tt is GuardPrefix:
            out = []
            for a in self.sat(t.g, asm):
                out.extend(self.moves(t.p, a))
            return tuple(dict.fromkeys(out))
        if tt is Alt:
            return tuple(dict.fromkeys(self.moves(t.p, asm) + self.moves(t.q, asm)))
        if tt is Seq:
            out = [(ev, sh, mk_seq(r, t.q), a) for ev, sh, r, a in self.moves(t.p, asm)]
            for a in self.terms(t.p, asm):
                out.extend(self.moves(t.q, a))
            return tuple(dict.fromkeys(out))
        if tt is Encap:
            H = t.H
            return tuple((ev, sh, mk_wrap(Encap, H, r), a)
                         for ev, sh, r, a in self.moves(t.p, asm)
                         if not any(in_patterns(e.name, H) for e in ev))
        if tt is Abstract:
            I = t.I
            out = []
            for ev, sh, r, a in self.moves(t.p, asm):
                kept = tuple(e for e in ev if not in_patterns(e.name, I))
                out.append((kept, sh, mk_wrap(Abstract, I, r), a))
            return tuple(dict.fromkeys(out))
        if tt is Par:
            return self._parallel(t, asm)
        if tt is Between:
            return self._between(t, asm)
        if tt is CommMerge:
            return self._comm_merge(t, asm)
        if tt in (Theta, Unless, SumData):
            raise ModelError(f"{tt.__name__} must be eliminated before execution")
        raise ModelError(f"no semantics for {tt.__name__}")

    def _joint(self, mp, mq):
        """Combine one move of each side; returns None on inconsistent assumptions."""
        evp, shp, rp, ap = mp
        evq, shq, rq, aq = mq
        a = _merge(ap, aq)
        if a is None:
            return None
        sh = list(shp) + list(shq)
        events = list(evp) + list(evq)
        if sh:
            # a shadow waiting for e fuses with an e performed by the other side
            pool_q = list(evq)
            pool_p = list(evp)
            left = []
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
            sh = left
        return events, _sorted_events(sh), rp, rq, a

    def _parallel(self, t, asm):
        mp_all = self.moves(t.p, asm)
        mq_all = self.moves(t.q, asm)
        out = []
        for mp in mp_all:
            for mq in mq_all:
                j = self._joint(mp, mq)
                if j is None:
                    continue
                events, sh, rp, rq, a = j
                out.append((_sorted_events(events), sh, mk_between(rp, rq), a))
        for a in self.terms(t.p, asm):
            out.extend(self.moves(t.q, a))
        for a in self.terms(t.q, asm):
            out.extend(self.moves(t.p, a))
        return tuple(dict.fromkeys(out))

    def _shadowed(self, moves):
        out = set()
        for _, sh, _, _ in moves:
            out.update(sh)
        return out

    def _between(self, t, asm):
        mp_all = self.moves(t.p, asm)
        mq_all = self.moves(t.q, asm)
        out = []
        blocked_p = self._shadowed(mq_all)
        blocked_q = self._shadowed(mp_all)
        for ev, sh, r, a in mp_all:
            if blocked_p and any(e in blocked_p for e in ev):
                continue
            out.append((ev, sh, mk_between(r, t.q), a))
        for ev, sh, r, a in mq_all:
            if blocked_q and any(e in blocked_q for e in ev):
                continue
            out.append((ev, sh, mk_between(t.p, r), a))
        for mp in mp_all:
            for mq in mq_all:
                j = self._joint(mp, mq)
                if j is None:
                    continue
                events, sh, rp, rq, a = j
                for comms, rest_p, rest_q, bp, bq in communications(mp[0], mq[0]):
                    evs = _sorted_events(list(rest_p) + list(rest_q) + comms)
                    if comms:
                        rp2 = subst_term(rp, bp) if bp else rp
                        rq2 = subst_term(rq, bq) if bq else rq
                        out.append((evs, sh, mk_between(rp2, rq2), a))
                    else:
                        out.append((_sorted_events(events), sh, mk_between(rp, rq), a))
        return tuple(dict.fromkeys(out))

    def _comm_merge(self, t, asm):
        out = []
        for mp in self.moves(t.p, asm):
            for mq in self.moves(t.q, asm):
                if not mp[0] or not mq[0]:
                    continue
                j = self._joint(mp, mq)
                if j is None:
                    continue
                _, sh, rp, rq, a = j
                for comms, rest_p, rest_q, bp, bq in communications(mp[0], mq[0]):
                    if rest_p or rest_q:
                        continue
                    rp2 = subst_term(rp, bp) if bp else rp
                    rq2 = subst_term(rq, bq) if bq else rq
                    out.append((_sorted_events(comms), sh, mk_between(rp2, rq2), a))
        return tuple(dict.fromkeys(out))

    # -- top level --
    def transitions(self, t, state=EMPTY_STATE):
        """Observable steps: list of (label, events, residue, state')."""
        out = {}
        for ev, sh, r, a in self.moves(t, state.assumptions):
            if sh:
                continue
            for e in ev:
                if event_vars(e):
                    raise UngroundAction(f"action {show_event(e)} has unbound variables")
            a = self.collect(r, a)
            s2 = state if a == state.assumptions else DataState(state.bindings, a)
            out[(ev, r, s2)] = None
        return [(_label(ev), ev, r, s2) for ev, r, s2 in out]

    def collect(self, residue, asm):
        """Drop assumptions about values the residual term can no longer mention."""
        if not asm:
            return asm
        values = set()
        for m in messages_of(residue):
            values |= subterms(normalize(m))
        static = self.static_atoms(residue)
        kept = frozenset((atom, v) for atom, v in asm
                         if atom in static or all(normalize(x) in values for x in atom.args))
        return kept

    def static_atoms(self, residue):
        names = recvars_of(residue)
        key = names
        hit = self._static_atoms.get(key)
        if hit is not None:
            return hit
        seen = set()
        stack = list(names)
        atoms = set()
        while stack:
            n = stack.pop()
            if n in seen or n not in self.equations:
                continue
            seen.add(n)
            params, body = self.equations[n]
            atoms |= _ground_atoms(body)
            stack.extend(recvars_of(body))
        self._static_atoms[key] = frozenset(atoms)
        return self._static_atoms[key]


def _ground_atoms(t):
    """Ground atoms tested in t, except those about nonces.

    A nonce is minted anew every time its rsg step runs, so facts about it
    are local to one pass through the definition.
    """
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if type(x) is GuardPrefix:
            out |= {a for a in guard_atoms(x.g)
                    if not guard_vars(a) and not any(_mentions_nonce(m) for m in a.args)}
        stack.extend(children(x))
    return out


def _mentions_nonce(m):
    return any(type(x) is Nonce for x in subterms(normalize(m)))


def _communicate(s, r, binding):
    """Try to pair send s with receive r; returns (comm event, binding) or None."""
    if s.kind != "send" or r.kind != "receive" or s.channel != r.channel:
        return None
    if len(s.args) != len(r.args) or event_vars(s):
        return None
    b = dict(binding)
    for p, v in zip(r.args, s.args):
        b = match(p, v, b)
        if b is None:
            return None
    return ActionEvent("c_" + s.channel, s.args), b


def communications(evp, evq):
    """Ways of pairing sends and receives across the two sides of one joint step.

    Yields (comm events, leftover left events, leftover right events,
    binding for the left residue, binding for the right residue).  The
    empty pairing is included.
    """
    results = []
    evp = list(evp)
    evq = list(evq)

    def rec(i, used, comms, rest_p, bp, bq):
        if i == len(evp):
            rest_q = [f for j, f in enumerate(evq) if j not in used]
            results.append((comms, tuple(rest_p), tuple(rest_q), bp, bq))
            return
        e = evp[i]
        rec(i + 1, used, comms, rest_p + [e], bp, bq)
        for j, f in enumerate(evq):
            if j in used:
                continue
            c = _communicate(e, f, bq)
            if c is not None:
                rec(i + 1, used | {j}, comms + [c[0]], rest_p, bp, c[1])
                continue
            c = _communicate(f, e, bp)
            if c is not None:
                rec(i + 1, used | {j}, comms + [c[0]], rest_p, c[1], bq)

    rec(0, frozenset(), [], [], {}, {})
    return results


# -- LTS ---------------------------------------------------------------------------

@dataclass
class Lts:
    states: list
    init: int
    trans: list
    term: set

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_transitions(self):
        return len(self.trans)

    def successors(self):
        out = [[] for _ in self.states]
        for src, label, dst in self.trans:
            out[src].append((label, dst))
        return out

    def to_json(self):
        data = {
            "schema": "saptc-lts/1",
            "states": [{"id": i, "term": s} for i, s in enumerate(self.states)],
            "init": self.init,
            "trans": [{"from": a, "label": l, "to": b} for a, l, b in self.trans],
            "term": sorted(self.term),
        }
        return json.dumps(data, indent=1, sort_keys=False) + "\n"

    def to_dot(self):
        lines = ["digraph lts {", "  rankdir=LR;", f'  start [shape=point]; start -> {self.init};']
        for i in range(len(self.states)):
            shape = "doublecircle" if i in self.term else "circle"
            lines.append(f"  {i} [shape={shape}];")
        for a, l, b in self.trans:
            lines.append(f"  {a} -> {b} [label={json.dumps(l)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        states = [s["term"] if isinstance(s, dict) else str(s) for s in data["states"]]
        trans = [(t["from"], t["label"], t["to"]) for t in data["trans"]]
        return cls(states, data["init"], trans, set(data.get("term", [])))


def build_lts(sem, t0, cfg=None, state=EMPTY_STATE):
    """Breadth-first closure of ``sem.transitions`` from ``t0``."""
    cfg = cfg or BuildConfig()
    t0 = sem.prepare(t0)
    index = {(t0, state): 0}
    order = [(t0, state)]
    trans = []
    term = set()
    i = 0
    while i < len(order):
        t, s = order[i]
        if sem.terminates(t, s):
            term.add(i)
        outs = sem.transitions(t, s)
        outs.sort(key=lambda x: (x[0], show_term(x[2]), x[3].key()))
        seen = set()
        for label, _, r, s2 in outs:
            k = (r, s2)
            j = index.get(k)
            if j is None:
                j = len(order)
                if j >= cfg.max_states:
                    raise StateSpaceExceeded(cfg.max_states)
                index[k] = j
                order.append(k)
            if (label, j) not in seen:
                seen.add((label, j))
                trans.append((i, label, j))
        i += 1
    states = []
    for t, s in order:
        k = s.key()
        states.append(show_term(t) + (f" @ {{{k}}}" if k else ""))
    return Lts(states, 0, trans, term)


def model_semantics(model, cfg, equations=None):
    eqs = model.system_equations() if equations is None else equations
    return Semantics(eqs, model.domain_map(), model.conflict_set(), cfg.freshness,
                     model.globals)


def generate_lts(model, cfg=None):
    """LTS of the model's composition, starting from the entry equation."""
    cfg = cfg or BuildConfig()
    sem = model_semantics(model, cfg)
    return build_lts(sem, RecVar(model.compose.entry), cfg, DataState(model.globals))


def spec_lts(model, cfg=None):
    cfg = cfg or BuildConfig()
    spec = model.spec(cfg.freshness if cfg.freshness != "nondet" else "")
    sem = model_semantics(model, cfg, spec.as_dict())
    return build_lts(sem, RecVar(spec.entry), cfg, DataState(model.globals))


def term_lts(t, cfg=None, conflict=frozenset(), equations=None, domains=None):
    """LTS of a standalone term (no model)."""
    cfg = cfg or BuildConfig()
    sem = Semantics(equations or {}, domains or {}, conflict, cfg.freshness)
    return build_lts(sem, t, cfg)


def transitions(t, state=EMPTY_STATE, sem=None):
    """Convenience wrapper: observable transitions of a closed term."""
    sem = sem or Semantics()
    return [(label, r, s2) for label, _, r, s2 in sem.transitions(sem.prepare(t), state)]


def eval_guard(g, state=EMPTY_STATE, freshness="nondet"):
    return Semantics(freshness=freshness).eval_guard(g, state)
