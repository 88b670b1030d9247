"""Strong, branching and rooted branching step bisimulation on finite LTSs.

All checkers work on the disjoint union of the two systems and compute the
coarsest stable partition by signature refinement.  For branching
equivalence, tau-strongly-connected components are collapsed first (the
equivalence is divergence-insensitive, so a tau-loop is identified with its
exits) and signatures are propagated along inert tau-steps, i.e. tau-steps
that stay inside the current block.

When two systems differ, an experiment tree is extracted from the history
of refinement rounds: the attacker picks a move that the defender cannot
answer into a block that was still joined one round earlier, and every
defender reply leads to a strictly earlier split.
"""

from collections import deque
from dataclasses import dataclass

from .semantics import Lts

TAU = "tau"
TERM = "√"  # pseudo-label for successful termination
MAX_DEPTH = 32
MAX_NODES = 400


@dataclass
class Partition:
    blocks: list

    def block_of(self):
        out = {}
        for i, b in enumerate(self.blocks):
            for s in b:
                out[s] = i
        return out


@dataclass
class EquivalenceVerdict:
    equivalent: bool
    relation: Partition = None
    counterexample: dict = None
    mode: str = ""

    def as_dict(self):
        out = {"equivalent": self.equivalent, "mode": self.mode}
        if self.relation is not None:
            out["blocks"] = [sorted(b) for b in self.relation.blocks]
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


# -- union and tau structure ------------------------------------------------------

@dataclass
class _Union:
    n: int
    succ: list
    term: list
    offset: int
    inits: tuple

    @classmethod
    def of(cls, l1, l2=None):
        systems = [l1] if l2 is None else [l1, l2]
        succ, term, inits = [], [], []
        offset = 0
        for lts in systems:
            inits.append(lts.init + offset)
            base = len(succ)
            succ.extend([] for _ in lts.states)
            term.extend(False for _ in lts.states)
            for s in lts.term:
                term[base + s] = True
            for a, label, b in lts.trans:
                succ[base + a].append((label, base + b))
            offset += len(lts.states)
        for i in range(len(succ)):
            succ[i] = sorted(set(succ[i]))
        return cls(len(succ), succ, term, len(l1.states), tuple(inits))

    def side(self, s):
        return ("left", s) if s < self.offset else ("right", s - self.offset)


def _tau_sccs(u):
    """Tarjan over tau-edges; returns the component id of every state."""
    index = [None] * u.n
    low = [0] * u.n
    comp = [None] * u.n
    on = [False] * u.n
    stack = []
    counter = 0
    ncomp = 0
    for root in range(u.n):
        if index[root] is not None:
            continue
        work = [(root, iter([t for l, t in u.succ[root] if l == TAU]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on[root] = True
        while work:
            v, it = work[-1]
            w = next(it, None)
            if w is not None:
                if index[w] is None:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, iter([t for l, t in u.succ[w] if l == TAU])))
                elif on[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp, ncomp


def _condense(u):
    """Collapse tau-SCCs; returns a new _Union over components and the state map."""
    comp, nc = _tau_sccs(u)
    succ = [set() for _ in range(nc)]
    term = [False] * nc
    for s in range(u.n):
        c = comp[s]
        term[c] = term[c] or u.term[s]
        for l, t in u.succ[s]:
            if l == TAU and comp[t] == c:
                continue
            succ[c].add((l, comp[t]))
    cu = _Union(nc, [sorted(x) for x in succ], term, None, tuple(comp[i] for i in u.inits))
    return cu, comp


def _topo_tau(u):
    """Order states so that every tau-successor comes before its source."""
    indeg = [0] * u.n
    for s in range(u.n):
        for l, t in u.succ[s]:
            if l == TAU:
                indeg[t] += 1
    order = []
    queue = deque(s for s in range(u.n) if indeg[s] == 0)
    while queue:
        s = queue.popleft()
        order.append(s)
        for l, t in u.succ[s]:
            if l == TAU:
                indeg[t] -= 1
                if indeg[t] == 0:
                    queue.append(t)
    order.reverse()
    return order


# -- refinement ---------------------------------------------------------------------

def _relabel(sigs, prev):
    ids = {}
    out = [0] * len(sigs)
    for s, sig in enumerate(sigs):
        key = (prev[s], sig)
        if key not in ids:
            ids[key] = len(ids)
        out[s] = ids[key]
    return out, len(ids)


def _strong_history(u):
    block = [0] * u.n
    count = 1
    history = [block]
    while True:
        sigs = []
        for s in range(u.n):
            sig = frozenset((l, block[t]) for l, t in u.succ[s])
            if u.term[s]:
                sig = sig | {(TERM, -1)}
            sigs.append(sig)
        new, n = _relabel(sigs, block)
        if n == count:
            return history, sigs
        block, count = new, n
        history.append(block)


def _branching_sigs(u, block, order):
    sigs = [None] * u.n
    for s in order:
        bs = block[s]
        sig = set()
        if u.term[s]:
            sig.add((TERM, -1))
        for l, t in u.succ[s]:
            if l == TAU and block[t] == bs:
                sig |= sigs[t]
            else:
                sig.add((l, block[t]))
        sigs[s] = frozenset(sig)
    return sigs


def _branching_history(u):
    order = _topo_tau(u)
    block = [0] * u.n
    count = 1
    history = [block]
    while True:
        sigs = _branching_sigs(u, block, order)
        new, n = _relabel(sigs, block)
        if n == count:
            return history, sigs
        block, count = new, n
        history.append(block)


def _partition(blocks_of, states):
    groups = {}
    for s in states:
        groups.setdefault(blocks_of(s), []).append(s)
    return Partition([sorted(g) for g in groups.values()])


# -- public checkers ----------------------------------------------------------------

def strong_partition(l1, l2=None):
    u = _Union.of(l1, l2)
    history, _ = _strong_history(u)
    final = history[-1]
    return u, final, history


def branching_partition(l1, l2=None):
    """Final block of every original state, plus the condensed refinement data."""
    u = _Union.of(l1, l2)
    cu, comp = _condense(u)
    history, _ = _branching_history(cu)
    final = history[-1]
    return u, [final[comp[s]] for s in range(u.n)], (cu, comp, history)


def strong_step_bisim(l1, l2):
    u, block, history = strong_partition(l1, l2)
    i1, i2 = u.inits
    if block[i1] == block[i2]:
        return EquivalenceVerdict(True, _partition(lambda s: block[s], range(u.n)), mode="strong")
    tree = _experiment(u, history, i1, i2, branching=False)
    return EquivalenceVerdict(False, counterexample=_wrap(u, tree), mode="strong")


def branching_bisim(l1, l2):
    u, block, (cu, comp, history) = branching_partition(l1, l2)
    i1, i2 = u.inits
    if block[i1] == block[i2]:
        return EquivalenceVerdict(True, _partition(lambda s: block[s], range(u.n)), mode="branching")
    tree = _experiment(cu, history, cu.inits[0], cu.inits[1], branching=True, conc=(u, comp),
                       xs=(i1, i2))
    return EquivalenceVerdict(False, counterexample=_wrap(u, tree), mode="branching")


def rooted_branching_bisim(l1, l2):
    u, block, (cu, comp, history) = branching_partition(l1, l2)
    i1, i2 = u.inits
    problem = _root_problem(u, block, i1, i2)
    if problem is None:
        return EquivalenceVerdict(True, _partition(lambda s: block[s], range(u.n)), mode="rooted")
    attacker, label, target, replies = problem
    node = {"state": attacker, "against": i2 if attacker == i1 else i1, "path": [],
            "label": label, "replies": []}
    if target is not None:
        node["target"] = target
    budget = [MAX_NODES]
    for reply in replies:
        sub = _experiment(cu, history, comp[target], comp[reply], branching=True,
                          conc=(u, comp), xs=(target, reply), budget=budget)
        node["replies"].append({"path": [label], "target": reply, "refuted_by": sub})
    return EquivalenceVerdict(False, counterexample=_wrap(u, node, rooted=True), mode="rooted")


def _root_problem(u, block, i1, i2):
    """First violation of the root condition, or a branching split of the roots."""
    if u.term[i1] != u.term[i2]:
        s = i1 if u.term[i1] else i2
        return s, TERM, None, []
    for a, b in ((i1, i2), (i2, i1)):
        for label, t in u.succ[a]:
            answers = [t2 for l2, t2 in u.succ[b] if l2 == label]
            if not any(block[t2] == block[t] for t2 in answers):
                return a, label, t, answers
    return None


def _wrap(u, tree, rooted=False):
    return {"format": "experiment-tree/1", "rooted": rooted, "tree": _localize(u, tree)}


# -- experiment trees ------------------------------------------------------------------

def _level(history, s, t):
    for k, block in enumerate(history):
        if block[s] != block[t]:
            return k
    return None


def _inert_paths(u, block, s):
    """(path of tau labels, state) reachable from s by tau-steps inside s's block."""
    out = [([], s)]
    seen = {s}
    queue = deque([([], s)])
    while queue:
        path, v = queue.popleft()
        for l, t in u.succ[v]:
            if l == TAU and block[t] == block[s] and t not in seen:
                seen.add(t)
                out.append((path + [TAU], t))
                queue.append((path + [TAU], t))
    return out


def _options(u, block, s, branching):
    """Signature witnesses of s: (path, label, target) with target None for termination."""
    starts = _inert_paths(u, block, s) if branching else [([], s)]
    out = []
    for path, v in starts:
        if u.term[v]:
            out.append((path, TERM, None))
        for l, t in u.succ[v]:
            if branching and l == TAU and block[t] == block[s]:
                continue
            out.append((path, l, t))
    return out


def _realize(conc, prev, x, label, target):
    """A concrete move from ``x`` matching a move of its tau-component.

    The condensed graph merges tau-cycles, so a condensed move may leave the
    component from a different member.  Search the tau-steps that stay in the
    block of ``x`` for a state offering ``label`` into component ``target``.
    Returns (path, concrete target).
    """
    u, comp = conc
    b = prev[comp[x]]
    seen = {x}
    queue = deque([([], x)])
    while queue:
        path, v = queue.popleft()
        if label == TERM and u.term[v]:
            return path, None
        for l, t in u.succ[v]:
            if label != TERM and l == label and comp[t] == target:
                return path + [label], t
        for l, t in u.succ[v]:
            if l == TAU and t not in seen and prev[comp[t]] == b:
                seen.add(t)
                queue.append((path + [TAU], t))
    raise AssertionError("condensed move without a concrete witness")


def _experiment(u, history, s1, s2, branching, conc=None, xs=None, depth=0, budget=None):
    """Experiment separating s1 and s2.

    For branching checks ``u`` is the tau-condensed graph, ``conc`` holds the
    original union and the component map, and ``xs`` the concrete states that
    s1 and s2 stand for.  Paths and state ids in the result are concrete.
    """
    budget = budget if budget is not None else [MAX_NODES]
    k = _level(history, s1, s2)
    if not k:
        return None
    prev = history[k - 1]
    budget[0] -= 1
    x1, x2 = xs if xs else (s1, s2)
    for (attacker, xa), (defender, xd) in (((s1, x1), (s2, x2)), ((s2, x2), (s1, x1))):
        def_opts = _options(u, prev, defender, branching)
        def_sig = {(l, -1 if t is None else prev[t]) for _, l, t in def_opts}
        for path, label, target in _options(u, prev, attacker, branching):
            if (label, -1 if target is None else prev[target]) in def_sig:
                continue
            if conc:
                path, xt = _realize(conc, prev, xa, label, target)
                path = path[:-1] if label != TERM else path
            else:
                xt = target
            node = {"state": xa, "against": xd, "path": path, "label": label, "replies": []}
            if target is None:
                return node
            node["target"] = xt
            seen = set()
            for dpath, dlabel, dtarget in def_opts:
                if dlabel != label or dtarget in seen:
                    continue
                seen.add(dtarget)
                if conc:
                    dpath, xdt = _realize(conc, prev, xd, dlabel, dtarget)
                else:
                    dpath, xdt = dpath + [dlabel], dtarget
                reply = {"path": dpath, "target": xdt}
                if depth + 1 < MAX_DEPTH and budget[0] > 0:
                    reply["refuted_by"] = _experiment(u, history, target, dtarget, branching,
                                                      conc, (xt, xdt), depth + 1, budget)
                else:
                    reply["truncated"] = True
                node["replies"].append(reply)
            return node
    return None


def _localize(u, tree):
    """Attach the attacking side and turn union state ids into per-side ids."""
    if tree is None:
        return None
    out = dict(tree)
    out["attacker"], out["state"] = u.side(tree["state"])
    out["against"] = u.side(tree["against"])[1]
    if "target" in out:
        out["target"] = u.side(tree["target"])[1]
    replies = []
    for r in tree.get("replies", []):
        r = dict(r)
        r["target"] = u.side(r["target"])[1]
        if "refuted_by" in r:
            r["refuted_by"] = _localize(u, r["refuted_by"])
        replies.append(r)
    out["replies"] = replies
    return out


# -- minimization ------------------------------------------------------------------------

def minimize(lts, mode="strong"):
    """Quotient by the coarsest strong or branching partition.

    Inert tau-steps disappear, only the part reachable from the initial
    block is kept, and blocks are numbered in breadth-first order.
    """
    if mode == "strong":
        u, block, _ = strong_partition(lts)
    elif mode == "branching":
        u, block, _ = branching_partition(lts)
    else:
        raise ValueError(f"unknown minimization mode {mode}")
    edges = {}
    term = set()
    first = {}
    for s in range(u.n):
        b = block[s]
        first.setdefault(b, s)
        if u.term[s]:
            term.add(b)
        for l, t in u.succ[s]:
            if mode == "branching" and l == TAU and block[t] == b:
                continue
            edges.setdefault(b, set()).add((l, block[t]))
    start = block[lts.init]
    number = {start: 0}
    queue = deque([start])
    trans = []
    while queue:
        b = queue.popleft()
        for l, c in sorted(edges.get(b, ()), key=lambda e: (e[0], first[e[1]])):
            if c not in number:
                number[c] = len(number)
                queue.append(c)
            trans.append((number[b], l, number[c]))
    states = [None] * len(number)
    for b, i in number.items():
        states[i] = lts.states[first[b]]
    return Lts(states, 0, sorted(set(trans), key=lambda x: (x[0], x[1], x[2])),
               {number[b] for b in term if b in number})


CHECKERS = {
    "strong": strong_step_bisim,
    "branching": branching_bisim,
    "rooted": rooted_branching_bisim,
}


def check(l1, l2, mode):
    if mode not in CHECKERS:
        raise ValueError(f"unknown equivalence mode {mode}")
    return CHECKERS[mode](l1, l2)


# -- replay ------------------------------------------------------------------------------

def _reach(lts, s, labels):
    current = {s}
    for label in labels:
        current = {b for a, l, b in lts.trans if a in current and l == label}
        if not current:
            break
    return current


def replay(verdict, l1, l2):
    """Check a counterexample tree against the two LTSs it was computed from.

    Every attacker move and every listed defender reply must be executable,
    termination claims must hold, and each nested experiment must start from
    the pair of states it claims to separate.
    """
    ce = verdict.counterexample
    if ce is None:
        return False
    systems = {"left": l1, "right": l2}

    def check(node, pair=None):
        if node is None:
            return False
        side = node["attacker"]
        other = "right" if side == "left" else "left"
        lts, dlts = systems[side], systems[other]
        if pair is not None and {(side, node["state"]), (other, node["against"])} != pair:
            return False
        ends = _reach(lts, node["state"], node["path"])
        if not ends:
            return False
        if node["label"] == TERM:
            return any(e in lts.term for e in ends)
        if node["target"] not in _reach(lts, node["state"], node["path"] + [node["label"]]):
            return False
        for r in node["replies"]:
            if r["target"] not in _reach(dlts, node["against"], r["path"]):
                return False
            if "refuted_by" in r:
                sub = {(side, node["target"]), (other, r["target"])}
                if not check(r["refuted_by"], sub):
                    return False
        return True

    return check(ce["tree"])
