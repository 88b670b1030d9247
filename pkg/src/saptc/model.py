"""Protocol models: principals, composition and external-behaviour specs."""

from dataclasses import dataclass, field, replace

from .messages import Const
from .terms import (
    Abstract, Encap, Equation, ModelError, RecVar, children, events_of,
    expand_sum, in_patterns, validate_guarded,
)


@dataclass(frozen=True)
class RecursiveSpec:
    """A block of recursive equations; the first equation is the entry."""
    name: str
    equations: tuple

    @property
    def entry(self):
        return self.equations[0].name

    def as_dict(self):
        return {e.name: e for e in self.equations}


@dataclass(frozen=True)
class ProtocolModel:
    name: str
    domains: tuple = ()
    globals: tuple = ()
    conflict: tuple = ()
    principals: tuple = ()
    compose: RecursiveSpec = None
    specs: tuple = ()
    summary: str = field(default="", compare=False)

    def domain_map(self):
        return {name: values for name, values in self.domains}

    def global_map(self):
        return dict(self.globals)

    def conflict_set(self):
        return frozenset(frozenset(p) for p in self.conflict)

    def system_equations(self):
        """Equations of every principal and of the composition block."""
        out = {}
        for block in self.principals + ((self.compose,) if self.compose else ()):
            for eq in block.equations:
                if eq.name in out:
                    raise ModelError(f"equation {eq.name} defined twice")
                out[eq.name] = eq
        return out

    def spec(self, mode=""):
        """The spec block for a freshness mode, falling back to the default one."""
        specs = dict((s.name, s) for s in self.specs)
        if mode in specs:
            return specs[mode]
        if "" in specs:
            return specs[""]
        raise ModelError(f"model {self.name} declares no spec block")

    def with_delta(self, n):
        """Replace the data domain ``Delta`` by n constants D1..Dn."""
        if n < 1:
            raise ValueError("Delta size must be positive")
        values = tuple(Const(f"D{i}") for i in range(1, n + 1))
        doms = tuple((k, values if k == "Delta" else v) for k, v in self.domains)
        if "Delta" not in dict(self.domains):
            doms = (("Delta", values),) + doms
        return replace(self, domains=doms)

    @property
    def H(self):
        return _outer_set(self.compose, Encap)

    @property
    def I(self):
        return _outer_set(self.compose, Abstract)


def _outer_set(block, kind):
    if block is None:
        return ()
    out = []
    stack = [block.equations[0].body]
    while stack:
        t = stack.pop()
        if type(t) is kind:
            out.extend(t.H if kind is Encap else t.I)
        stack.extend(children(t))
    return tuple(out)


def expanded_equations(equations, domains):
    return {name: Equation(eq.name, eq.params, expand_sum(eq.body, domains))
            for name, eq in equations.items()}


def validate(model):
    """Check definedness, guardedness and receive-variable hygiene."""
    doms = model.domain_map()
    system = expanded_equations(model.system_equations(), doms)
    validate_guarded(system)
    if model.compose is None:
        raise ModelError(f"model {model.name} has no compose block")
    for spec in model.specs:
        validate_guarded(expanded_equations(spec.as_dict(), doms))
    owner = {}
    for block in model.principals:
        for eq in block.equations:
            for e in events_of(eq.body):
                if e.kind != "receive":
                    continue
                for v in _binders(e) - set(eq.params):
                    other = owner.setdefault(v, block.name)
                    if other != block.name:
                        raise ModelError(
                            f"receive variable {v} is bound in principals {other} and {block.name}")


def _binders(e):
    from .terms import event_vars
    return set(event_vars(e))


def alphabet(model):
    """Concrete action names syntactically reachable after sum expansion.

    Communication names c_X are included for every channel X that has both
    a send and a receive.
    """
    doms = model.domain_map()
    names = set()
    for eq in model.system_equations().values():
        for e in events_of(expand_sum(eq.body, doms)):
            names.add(e.name)
    sends = {n[2:] for n in names if n.startswith("s_")}
    recvs = {n[2:] for n in names if n.startswith("r_")}
    names |= {"c_" + ch for ch in sends & recvs}
    return names


def resolve(patterns, names):
    return {n for n in names if in_patterns(n, patterns)}


def entry_term(block):
    return RecVar(block.entry)
