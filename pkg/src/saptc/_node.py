"""Frozen syntax-tree nodes with cached hashes."""

import dataclasses


def node(cls):
    """Turn ``cls`` into an immutable dataclass whose hash is computed once.

    Terms are shared heavily between LTS states, so equality first checks
    identity and cached hashes before walking fields.
    """
    cls = dataclasses.dataclass(frozen=True, eq=False)(cls)
    names = tuple(f.name for f in dataclasses.fields(cls))
    tag = cls.__name__

    def __hash__(self):
        d = self.__dict__
        h = d.get("_h")
        if h is None:
            h = hash((tag,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_h", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not type(self) or hash(self) != hash(other):
            return False
        return all(getattr(self, n) == getattr(other, n) for n in names)

    cls.__hash__ = __hash__
    cls.__eq__ = __eq__
    cls._fieldnames = names
    return cls


def cached(obj, slot, compute):
    """Memoize ``compute(obj)`` on the instance under ``slot``."""
    d = obj.__dict__
    v = d.get(slot)
    if v is None:
        v = compute(obj)
        object.__setattr__(obj, slot, v)
    return v
