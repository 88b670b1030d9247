"""Text syntax for messages, guards, process terms and whole models.

A model file looks like::

    model private-channel
    domain Delta = {D1}
    principal A {
      A = sum d in Delta . r_CA(d) . A2(d)
      A2(d) = af . s_CAB(d)
    }
    principal B { B = r_CAB(x) . bf . s_CB(x) }
    compose { Sys = abs{c_CAB, af, bf}(encap{r_CAB, s_CAB}(A <> B)) . Sys }
    spec { X = sum d in Delta . r_CA(d) . s_CB(d) . X }

Names bound by a sum, an equation parameter, a receive pattern, ``rsg`` or
an ``init`` declaration are variables.  Any other capitalised name is a
constant; an unbound lower-case name is an error except inside a receive
pattern, where it introduces a binder for the rest of the ``.`` chain.
"""

import re
from dataclasses import dataclass

from . import messages as M
from .model import ProtocolModel, RecursiveSpec
from .terms import (
    Act, ActionEvent, Alt, And, Atom, Abstract, Between, CommMerge, DELTA, EPS,
    Encap, Eq, Equation, FALSE, GuardPrefix, Neq, Not, Or, Par, RecVar, Seq,
    Shadow, SumData, TAU, TRUE, Theta, Unless, canonical_action_name, show_guard,
    show_term,
)


class ParseError(Exception):
    def __init__(self, position, expected, text=None):
        self.position = position
        self.expected = sorted(set(expected))
        where = f" near {text!r}" if text else ""
        super().__init__(f"at offset {position}: expected {' or '.join(self.expected)}{where}")


@dataclass(frozen=True)
class SourceModel:
    """Model text plus the UTF-8 byte span of every block and equation.

    ``spans`` holds ``(label, start, end)`` triples, e.g. ``("principal A", 40, 97)``
    or ``("A2", 55, 80)`` for an equation.
    """
    text: str
    spans: tuple = ()

    def span(self, label):
        for name, start, end in self.spans:
            if name == label:
                return start, end
        raise KeyError(label)


_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+(?![A-Za-z_]))
  | (?P<name>[A-Za-z_*?](?:[A-Za-z0-9_*?]|-(?=[A-Za-z]))*)
  | (?P<op>\|\||<>|<\||==|!=|[|+.()\[\]{},=@<>])
  | (?P<uni>[≬∥∣·δεΘ◁Σ∑∈¬⊥⊤∂Ⓢτ])
""", re.VERBOSE)

_UNICODE = {
    "≬": ("op", "<>"), "∥": ("op", "||"), "∣": ("op", "|"), "·": ("op", "."),
    "◁": ("op", "<|"), "δ": ("name", "delta"), "ε": ("name", "eps"),
    "Θ": ("name", "theta"), "Σ": ("name", "sum"), "∑": ("name", "sum"),
    "∈": ("name", "in"), "¬": ("name", "not"), "⊥": ("name", "bottom"),
    "⊤": ("name", "top"), "∂": ("name", "encap"), "Ⓢ": ("op", "@"),
    "τ": ("name", "tau"),
}

MESSAGE_KEYWORDS = {
    "enc_s", "enc_pk", "enc_sk", "dec_s", "dec_sk", "dec_pk", "sign", "design",
    "mac", "hash", "xor", "succ", "half1", "half2", "key", "pk", "sk", "nonce",
    "bottom", "top", "zero",
}
_KEYED = {v: k for k, v in M.KEYED_NAMES.items()}
_SEEDED = {"key": M.SymKey, "pk": M.PubKey, "sk": M.PrivKey}
RESERVED = MESSAGE_KEYWORDS | {
    "model", "domain", "init", "conflict", "principal", "compose", "spec",
    "sum", "in", "delta", "eps", "tau", "shadow", "encap", "abs", "theta",
    "not", "and", "or", "true", "false",
}


def tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(pos, ["a token"], text[pos:pos + 10])
        kind = m.lastgroup
        if kind == "uni":
            kind, value = _UNICODE[m.group()]
            if value == "tau" and text.startswith("_", m.end()):
                value = "abs"
                out.append((kind, value, pos))
                pos = m.end() + 1
                continue
            out.append((kind, value, pos))
        elif kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


def _is_binder_name(name):
    return name[0].islower() or name[0] == "_"


class Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.recvars = set()

    # -- token helpers --
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value, k=0):
        kind, v, _ = self.peek(k)
        return v == value and kind in ("op", "name")

    def fail(self, *expected):
        kind, v, pos = self.peek()
        raise ParseError(pos, expected or ["something else"], v or None)

    def expect(self, value):
        if not self.at(value):
            self.fail(repr(value))
        self.i += 1

    def accept(self, value):
        if self.at(value):
            self.i += 1
            return True
        return False

    def name(self, what="a name"):
        kind, v, _ = self.peek()
        if kind != "name":
            self.fail(what)
        self.i += 1
        return v

    def number(self):
        kind, v, _ = self.peek()
        if kind != "num":
            self.fail("a number")
        self.i += 1
        return int(v)

    # -- messages --
    def message(self, env, binders=None):
        """Parse a message; ``binders`` is a dict collecting new pattern variables."""
        kind, v, pos = self.peek()
        if self.accept("("):
            items = [self.message(env, binders)]
            while self.accept(","):
                items.append(self.message(env, binders))
            self.expect(")")
            return items[0] if len(items) == 1 else M.Tuple(tuple(items))
        if kind != "name":
            self.fail("a message")
        self.i += 1
        if v in ("bottom", "top", "zero"):
            return {"bottom": M.BOTTOM, "top": M.TOP, "zero": M.ZERO}[v]
        if v in MESSAGE_KEYWORDS:
            self.expect("(")
            if v == "nonce":
                tag = self.name("a nonce tag")
                self.expect(")")
                return M.Nonce(tag)
            args = [self.message(env, binders)]
            while self.accept(","):
                args.append(self.message(env, binders))
            self.expect(")")
            return self._construct(v, args, pos)
        if v in RESERVED:
            self.i -= 1
            self.fail("a message")
        if v in env:
            return env[v]
        if binders is not None and _is_binder_name(v):
            var = binders.setdefault(v, M.Var(v))
            return var
        if _is_binder_name(v):
            raise ParseError(pos, ["a bound variable or a capitalised constant"], v)
        return M.Const(v)

    def _construct(self, kw, args, pos):
        def one():
            return args[0] if len(args) == 1 else M.Tuple(tuple(args))
        if kw in _KEYED:
            if len(args) < 2:
                raise ParseError(pos, [f"{kw}(key, body)"], kw)
            body = args[1] if len(args) == 2 else M.Tuple(tuple(args[1:]))
            return _KEYED[kw](args[0], body)
        if kw in _SEEDED:
            return _SEEDED[kw](one())
        if kw == "hash":
            return M.Hash(one())
        if kw == "succ":
            return M.Succ(one())
        if kw == "xor":
            return M.Xor(tuple(args))
        return M.Half(one(), 1 if kw == "half1" else 2)

    def message_list(self, env, binders=None):
        args = []
        if self.accept("("):
            if not self.accept(")"):
                args.append(self.message(env, binders))
                while self.accept(","):
                    args.append(self.message(env, binders))
                self.expect(")")
        return tuple(args)

    # -- guards --
    def guard(self, env):
        left = self.guard_and(env)
        if self.accept("or"):
            return Or(left, self.guard(env))
        return left

    def guard_and(self, env):
        left = self.guard_not(env)
        if self.accept("and"):
            return And(left, self.guard_and(env))
        return left

    def guard_not(self, env):
        if self.accept("not"):
            return Not(self.guard_not(env))
        return self.guard_atom(env)

    def guard_atom(self, env):
        kind, v, _ = self.peek()
        if v in ("true", "eps") and kind == "name":
            self.i += 1
            return TRUE
        if v in ("false", "delta") and kind == "name":
            self.i += 1
            return FALSE
        if self.at("("):
            save = self.i
            try:
                self.i += 1
                g = self.guard(env)
                self.expect(")")
                if not (self.at("==") or self.at("!=")):
                    return g
            except ParseError:
                pass
            self.i = save
        if kind == "name" and v not in RESERVED and self.at("(", 1) and v not in MESSAGE_KEYWORDS:
            self.i += 1
            return Atom(v, self.message_list(env))
        lhs = self.message(env)
        if self.accept("=="):
            return Eq(lhs, self.message(env))
        if self.accept("!="):
            return Neq(lhs, self.message(env))
        self.fail("'=='", "'!='")

    # -- process terms --
    def term(self, env):
        """Returns (term, binders exported to later elements of an enclosing chain)."""
        left, out = self.par(env)
        if self.accept("+"):
            right, more = self.term(env)
            return Alt(left, right), {**out, **more}
        return left, out

    _PAR = {"||": Par, "|": CommMerge, "<>": Between, "<|": Unless}

    def par(self, env):
        left, out = self.seq(env)
        kind, v, _ = self.peek()
        if kind == "op" and v in self._PAR:
            self.i += 1
            right, more = self.par(env)
            return self._PAR[v](left, right), {**out, **more}
        return left, out

    def seq(self, env):
        if self.at("sum"):
            return self.sum(env), {}
        first, out = self.prefix(env)
        if self.accept("."):
            rest, more = self.seq({**env, **out})
            return Seq(first, rest), {**out, **more}
        return first, out

    def sum(self, env):
        self.expect("sum")
        var = self.name("a sum variable")
        self.expect("in")
        dom = self.name("a domain name")
        self.expect(".")
        body, _ = self.term({**env, var: M.Var(var)})
        return SumData(var, dom, body)

    def prefix(self, env):
        if self.accept("["):
            g = self.guard(env)
            self.expect("]")
            if self.at("sum"):
                return GuardPrefix(g, self.sum(env)), {}
            body, out = self.prefix(env)
            return GuardPrefix(g, body), out
        return self.atom(env)

    def atom(self, env):
        kind, v, pos = self.peek()
        if kind == "name":
            if v in ("delta", "eps", "tau", "shadow"):
                self.i += 1
                return {"delta": DELTA, "eps": EPS, "tau": TAU, "shadow": Shadow()}[v], {}
            if v in ("encap", "abs"):
                self.i += 1
                names = self.name_set()
                self.expect("(")
                body, out = self.term(env)
                self.expect(")")
                return (Encap if v == "encap" else Abstract)(names, body), out
            if v == "theta":
                self.i += 1
                self.expect("(")
                body, out = self.term(env)
                self.expect(")")
                return Theta(body), out
            if v in RESERVED:
                self.fail("a process term")
            self.i += 1
            if v in self.recvars:
                return RecVar(v, self.message_list(env)), {}
            return self.action(v, env)
        if self.accept("@"):
            if self.peek()[0] != "name" and self.peek()[1] != "<":
                return Shadow(), {}  # bare Ⓢ
            index = 0
            if self.accept("<"):
                index = self.number()
                self.expect(">")
            name = self.name("an action name")
            event, _ = self.event(name, env, shadow=True)
            return Shadow(event, index), {}
        if self.accept("("):
            body, out = self.term(env)
            self.expect(")")
            return body, out
        self.fail("a process term")

    def event(self, name, env, shadow=False):
        name = canonical_action_name(name)
        binders = {}
        if name == "rsg" and self.at("(") and self.peek(1)[0] == "name" and self.at(")", 2) \
                and self.peek(1)[1] not in MESSAGE_KEYWORDS:
            tag = self.peek(1)[1]
            self.i += 3
            return ActionEvent("rsg", (M.Nonce(tag),)), {tag: M.Nonce(tag)}
        pattern = ActionEvent(name).kind == "receive" and not shadow
        args = self.message_list(env, binders if pattern else None)
        return ActionEvent(name, args), binders

    def action(self, name, env):
        event, binders = self.event(name, env)
        return Act(event), binders

    def name_set(self):
        self.expect("{")
        names = []
        if not self.accept("}"):
            names.append(self.set_item())
            while self.accept(","):
                names.append(self.set_item())
            self.expect("}")
        return tuple(names)

    def set_item(self):
        n = canonical_action_name(self.name("an action pattern"))
        if self.at("(") and self.at("*", 1):
            self.i += 3
            n += "(*)"
        return n

    # -- models --
    def equation(self, env):
        head = self.name("an equation name")
        params = []
        if self.accept("("):
            params.append(self.name("a parameter"))
            while self.accept(","):
                params.append(self.name("a parameter"))
            self.expect(")")
        self.expect("=")
        local = dict(env)
        for p in params:
            local[p] = M.Var(p)
        body, _ = self.term(local)
        return Equation(head, tuple(params), body)

    def block(self, label, env, names):
        self.recvars = names
        self.expect("{")
        eqs = []
        while not self.at("}"):
            if self.peek()[0] == "eof":
                self.fail("'}'")
            eqs.append(self.equation(env))
        self.expect("}")
        if not eqs:
            self.fail("an equation")
        return RecursiveSpec(label, tuple(eqs))

    def model(self):
        if not self.at("model"):
            self.fail("model header")
        self.i += 1
        name = self.name("a model name")
        heads = self._scan_heads()
        domains, globs, conflict = [], [], []
        principals, compose, specs = [], None, []
        env = {}
        while self.peek()[0] != "eof":
            if self.accept("domain"):
                dname = self.name("a domain name")
                self.expect("=")
                self.expect("{")
                values = []
                if not self.accept("}"):
                    values.append(self.message({}))
                    while self.accept(","):
                        values.append(self.message({}))
                    self.expect("}")
                domains.append((dname, tuple(values)))
            elif self.accept("init"):
                gname = self.name("a variable name")
                self.expect("=")
                globs.append((gname, M.normalize(self.message({}))))
                env[gname] = M.Var(gname)
            elif self.accept("conflict"):
                while True:
                    self.expect("(")
                    a = canonical_action_name(self.name("an action name"))
                    self.expect(",")
                    b = canonical_action_name(self.name("an action name"))
                    self.expect(")")
                    conflict.append((a, b))
                    if not self.accept(","):
                        break
            elif self.accept("principal"):
                pname = self.name("a principal name")
                principals.append(RecursiveSpec(pname, self.block(pname, env, heads["system"]).equations))
            elif self.accept("compose"):
                if compose is not None:
                    self.fail("a single compose block")
                compose = self.block("compose", env, heads["system"])
            elif self.accept("spec"):
                label = ""
                if self.peek()[0] == "name":
                    label = self.name()
                specs.append(self.block(label, env, heads.get("spec:" + label, set())))
            else:
                self.fail("domain", "init", "conflict", "principal", "compose", "spec")
        if compose is None:
            self.fail("compose")
        return ProtocolModel(name, tuple(domains), tuple(globs), tuple(conflict),
                             tuple(principals), compose, tuple(specs))

    def _scan_heads(self):
        """Collect equation names per block so bodies can tell RecVars from actions."""
        heads = {"system": set()}
        current = None
        depth = 0
        for k in range(self.i, len(self.toks)):
            kind, v, _ = self.toks[k]
            if depth == 0 and kind == "name" and v in ("principal", "compose", "spec"):
                if v == "spec":
                    nxt = self.toks[k + 1]
                    label = nxt[1] if nxt[0] == "name" else ""
                    current = heads.setdefault("spec:" + label, set())
                else:
                    current = heads["system"]
            if kind == "op" and v in "{([":
                depth += 1
            elif kind == "op" and v in "})]":
                depth -= 1
            elif kind == "op" and v == "=" and depth == 1 and current is not None:
                j = k - 1
                if self.toks[j][1] == ")":
                    while self.toks[j][1] != "(":
                        j -= 1
                    j -= 1
                if self.toks[j][0] == "name":
                    current.add(self.toks[j][1])
        return heads

    def done(self):
        if self.peek()[0] != "eof":
            self.fail("end of input")


def parse(src):
    """Parse model text (or a SourceModel) into a ProtocolModel."""
    text = src.text if isinstance(src, SourceModel) else src
    p = Parser(text)
    return p.model()


def parse_term(text, recvars=(), env=None):
    p = Parser(text)
    p.recvars = set(recvars)
    t, _ = p.term(dict(env or {}))
    p.done()
    return t


def parse_equation(text, recvars=None):
    """Parse ``X(params) = term``; the head is known as a recursion variable."""
    p = Parser(text)
    heads = set(recvars or ())
    if p.peek()[0] == "name":
        heads.add(p.peek()[1])
    p.recvars = heads
    eq = p.equation({})
    p.done()
    return eq


def parse_message(text, env=None):
    p = Parser(text)
    env = dict(env or {})
    binders = {}
    m = p.message(env, binders)
    p.done()
    return m


def parse_guard(text, env=None):
    p = Parser(text)
    g = p.guard(dict(env or {}))
    p.done()
    return g


# -- printing ----------------------------------------------------------------------

def pretty_equation(eq):
    head = eq.name + ("(" + ", ".join(eq.params) + ")" if eq.params else "")
    return f"{head} = {show_term(eq.body)}"


def _block(keyword, spec):
    lines = [f"{keyword} {{"]
    lines += ["  " + pretty_equation(eq) for eq in spec.equations]
    lines.append("}")
    return lines


def pretty(model):
    """Canonical text of a model; ``parse(pretty(m)) == m``."""
    parts = [(None, [f"model {model.name}"])]
    decls = []
    for name, values in model.domains:
        decls.append(f"domain {name} = {{{', '.join(M.show(v) for v in values)}}}")
    for name, value in model.globals:
        decls.append(f"init {name} = {M.show(value)}")
    if model.conflict:
        decls.append("conflict " + ", ".join(f"({a}, {b})" for a, b in model.conflict))
    if decls:
        parts.append((None, decls))
    for p in model.principals:
        parts.append((p, _block(f"principal {p.name}", p)))
    parts.append((model.compose, _block("compose", model.compose)))
    for s in model.specs:
        parts.append((s, _block("spec" + (f" {s.name}" if s.name else ""), s)))

    out = []
    spans = []
    pos = 0

    def emit(line):
        nonlocal pos
        start = pos
        out.append(line + "\n")
        pos += len(line.encode("utf-8")) + 1
        return start, pos - 1

    for i, (block, lines) in enumerate(parts):
        if i:
            emit("")
        begin = pos
        for j, line in enumerate(lines):
            start, end = emit(line)
            if block is not None and 0 < j < len(lines) - 1:
                spans.append((block.equations[j - 1].name, start + 2, end))
        if block is not None:
            spans.append((lines[0][:-2], begin, pos - 1))
    return SourceModel("".join(out), tuple(spans))


__all__ = [
    "ParseError", "SourceModel", "parse", "parse_term", "parse_equation",
    "parse_message", "parse_guard", "pretty", "pretty_equation", "show_term",
    "show_guard", "tokenize",
]
