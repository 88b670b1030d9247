"""Built-in protocol catalogue and the verify pipeline."""

import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .dsl import parse, pretty
from .equivalence import minimize, rooted_branching_bisim
from .model import ProtocolModel, RecursiveSpec, validate
from .semantics import BuildConfig, generate_lts, spec_lts
from .terms import (
    Alt, Eq, Equation, GuardPrefix, Neq, Not, Seq, alt, children, rebuild, show_guard,
)


class UnknownProtocol(KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"unknown protocol {self.name!r}; see `saptc list`"


CATEGORIES = {
    "private-channel": "symmetric encryption",
    "sym-secure-comm": "symmetric encryption",
    "sym-replay-attack": "symmetric encryption",
    "kesc": "key exchange",
    "kepc-mitm": "key exchange",
    "interlock-mitm": "key exchange",
    "keds-mitm": "key exchange",
    "kmt": "multiple keys",
    "kmb": "multiple keys",
    "mutual-auth-interlock": "mutual authentication",
    "skid": "mutual authentication",
    "wide-mouth-frog": "authentication and key exchange",
    "yahalom": "authentication and key exchange",
    "needham-schroeder": "authentication and key exchange",
    "otway-rees": "authentication and key exchange",
    "kerberos": "authentication and key exchange",
    "neuman-stubblebine": "authentication and key exchange",
    "denning-sacco": "authentication and key exchange",
    "dass": "authentication and key exchange",
    "woo-lam": "authentication and key exchange",
    "secret-splitting": "secret splitting",
    "abp": "reliable transmission",
    "abp-shadow": "reliable transmission",
}

CATALOGUE = tuple(CATEGORIES)


def source(name):
    """Text of a built-in model as shipped with the package."""
    if name not in CATEGORIES:
        raise UnknownProtocol(name)
    return resources.files("saptc").joinpath("catalogue", f"{name}.saptc").read_text("utf-8")


def summary(name):
    """The leading comment of a built-in model, as one line."""
    lines = []
    for line in source(name).splitlines():
        if not line.startswith("#"):
            break
        lines.append(line.lstrip("#").strip())
    return " ".join(lines)


_cache = {}


def builtin(name, delta=1):
    """The built-in model ``name`` with Delta instantiated to ``delta`` constants."""
    base = _cache.get(name)
    if base is None:
        base = replace(parse(source(name)), summary=summary(name))
        validate(base)
        _cache[name] = base
    return base.with_delta(delta)


def specification(name, delta=1, mode=""):
    """The expected-behaviour block of a built-in for a freshness mode."""
    return builtin(name, delta).spec(mode)


def catalogue():
    return [{"name": n, "category": CATEGORIES[n], "summary": summary(n)} for n in CATALOGUE]


@dataclass
class VerificationReport:
    name: str
    verdict: str
    counterexample: dict
    lts_states: int
    lts_transitions: int
    minimized_states: int
    spec_states: int
    wall_time: float
    config: dict
    lts: object = field(default=None, repr=False, compare=False)
    spec: object = field(default=None, repr=False, compare=False)

    @property
    def matches(self):
        return self.verdict == "matches_spec"

    def as_dict(self, timing=False):
        out = {
            "name": self.name,
            "verdict": self.verdict,
            "lts_states": self.lts_states,
            "lts_transitions": self.lts_transitions,
            "minimized_states": self.minimized_states,
            "spec_states": self.spec_states,
            "config": self.config,
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if timing:
            out["wall_time"] = round(self.wall_time, 6)
        return out


def verify_model(model, cfg=None):
    """Compare the composition of ``model`` with its spec block.

    Under ``cfg.freshness`` other than nondet the mode-specific spec block is
    used when the model declares one.
    """
    cfg = cfg or BuildConfig()
    start = time.perf_counter()
    lts = generate_lts(model, cfg)
    spec = spec_lts(model, cfg)
    verdict = rooted_branching_bisim(lts, spec)
    mini = minimize(lts, "branching")
    elapsed = time.perf_counter() - start
    delta = len(model.domain_map().get("Delta", ()))
    return VerificationReport(
        name=model.name,
        verdict="matches_spec" if verdict.equivalent else "deviates",
        counterexample=verdict.counterexample,
        lts_states=lts.n_states,
        lts_transitions=lts.n_transitions,
        minimized_states=mini.n_states,
        spec_states=spec.n_states,
        wall_time=elapsed,
        config={"delta": delta, **cfg.as_dict()},
        lts=lts,
        spec=spec,
    )


def verify(name, delta=1, cfg=None):
    """Verify a built-in by name, or a ProtocolModel resized to ``delta``."""
    model = name if isinstance(name, ProtocolModel) else builtin(name, delta)
    if isinstance(name, ProtocolModel):
        model = model.with_delta(delta)
    return verify_model(model, cfg)


# -- mutations -----------------------------------------------------------------------

def _negates(h, g):
    if h == Not(g) or g == Not(h):
        return True
    if type(g) is Eq and type(h) is Neq or type(g) is Neq and type(h) is Eq:
        return (g.lhs, g.rhs) == (h.lhs, h.rhs)
    return False


def _summands(t):
    if type(t) is Alt:
        return _summands(t.p) + _summands(t.q)
    return [t]


def _leading_guard(t):
    """Split ``[g] P . Q`` into ``(g, P . Q)``; None when t has no leading guard."""
    if type(t) is GuardPrefix:
        return t.g, t.p
    if type(t) is Seq:
        hit = _leading_guard(t.p)
        if hit is not None:
            return hit[0], Seq(hit[1], t.q)
    return None


def _strip(t, matches):
    kids = children(t)
    if kids:
        t = rebuild(t, tuple(_strip(k, matches) for k in kids))
    if type(t) is not Alt:
        return t
    parts = _summands(t)
    heads = [_leading_guard(p) for p in parts]
    for i, hi in enumerate(heads):
        if hi is None or not matches(hi[0]):
            continue
        for j, hj in enumerate(heads):
            if hj is not None and _negates(hj[0], hi[0]):
                kept = [hi[1] if k == i else r for k, r in enumerate(parts) if k != j]
                matches.hits += 1
                return alt(*kept)
    return t


def remove_check(model, guard):
    """Drop a guarded check: ``[g] P + [not g] Q`` becomes ``P``.

    ``guard`` is a Guard or its printed text (``"d1 == B"``).  A ``!=``
    guard counts as the negation of the matching ``==``.
    """
    if isinstance(guard, str):
        wanted = " ".join(guard.split())

        def matches(g):
            return show_guard(g) == wanted
    else:
        def matches(g):
            return g == guard
    matches.hits = 0

    def fix(block):
        eqs = tuple(Equation(e.name, e.params, _strip(e.body, matches)) for e in block.equations)
        return RecursiveSpec(block.name, eqs)

    out = replace(model, principals=tuple(fix(p) for p in model.principals))
    if not matches.hits:
        raise ValueError(f"no check [{guard}] with a negated alternative in model {model.name}")
    return out


# -- corpus --------------------------------------------------------------------------

def corpus_text(name):
    """Canonical corpus file for a built-in: summary comment plus pretty text."""
    head = f"# {summary(name)}\n\n"
    return head + pretty(builtin(name, 1)).text


def write_corpus(directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in CATALOGUE:
        (directory / f"{name}.saptc").write_text(corpus_text(name), encoding="utf-8")
