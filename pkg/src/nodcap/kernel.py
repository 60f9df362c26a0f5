"""Core syntax: session types, process terms, duality, free names, substitution.

All values are frozen dataclasses, so they hash, compare structurally and can
be shared freely.  Source positions ride along on terms but never take part in
equality.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_']*\Z")

Pos = Union[tuple[int, int], None]


# --------------------------------------------------------------------------
# Types


class TypeExpr:
    """Base class of session types."""

    __slots__ = ()


@dataclass(frozen=True)
class One(TypeExpr):
    pass


@dataclass(frozen=True)
class Bot(TypeExpr):
    pass


@dataclass(frozen=True)
class Zero(TypeExpr):
    pass


@dataclass(frozen=True)
class Top(TypeExpr):
    pass


@dataclass(frozen=True)
class Tensor(TypeExpr):
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class Parr(TypeExpr):
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class Plus(TypeExpr):
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class With(TypeExpr):
    left: TypeExpr
    right: TypeExpr


def _check_index(n) -> None:
    # the checker uses non-int index variables internally
    if isinstance(n, bool):
        raise TypeError("index must be an integer")
    if isinstance(n, int) and n < 1:
        raise ValueError("index must be positive")


@dataclass(frozen=True)
class Client(TypeExpr):
    """Pool of ``n`` clients, written ``?[n] A``."""

    n: int
    body: TypeExpr

    def __post_init__(self):
        _check_index(self.n)


@dataclass(frozen=True)
class Server(TypeExpr):
    """``n`` sequential server interactions, written ``![n] A``."""

    n: int
    body: TypeExpr

    def __post_init__(self):
        _check_index(self.n)


UNITS = (One, Bot, Zero, Top)
BINARY = (Tensor, Parr, Plus, With)
INDEXED = (Client, Server)

_UNIT_DUAL = {One: Bot, Bot: One, Zero: Top, Top: Zero}
_BIN_DUAL = {Tensor: Parr, Parr: Tensor, Plus: With, With: Plus}


def dual(a: TypeExpr) -> TypeExpr:
    """Involutive duality; client and server swap and keep their index."""
    cls = type(a)
    if cls in _UNIT_DUAL:
        return _UNIT_DUAL[cls]()
    if cls in _BIN_DUAL:
        return _BIN_DUAL[cls](dual(a.left), dual(a.right))
    if cls is Client:
        return Server(a.n, dual(a.body))
    if cls is Server:
        return Client(a.n, dual(a.body))
    dualize = getattr(a, "dual", None)
    if dualize is not None:
        return dualize()
    raise TypeError(f"not a type: {a!r}")


def type_size(a: TypeExpr) -> int:
    """Size of a cut formula; an indexed type counts once per interaction."""
    if isinstance(a, UNITS):
        return 1
    if isinstance(a, BINARY):
        return 1 + type_size(a.left) + type_size(a.right)
    if isinstance(a, INDEXED):
        return a.n * (1 + type_size(a.body))
    raise TypeError(f"not a type: {a!r}")


# --------------------------------------------------------------------------
# Terms


class Term:
    """Base class of process terms."""

    __slots__ = ()


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Link(Term):
    x: str
    y: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Halt(Term):
    pos: Pos = _pos()


@dataclass(frozen=True)
class New(Term):
    """Name restriction ``nu x x'. P`` connecting two endpoints."""

    x: str
    y: str
    body: Term
    pos: Pos = _pos()

    def __post_init__(self):
        if self.x == self.y:
            raise ValueError(f"restriction endpoints must differ: {self.x}")


@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Out(Term):
    """Bound output ``x[y]. P``."""

    x: str
    y: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class In(Term):
    x: str
    y: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Close(Term):
    x: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Wait(Term):
    x: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Inl(Term):
    x: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Inr(Term):
    x: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Case(Term):
    x: str
    left: Term
    right: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class Absurd(Term):
    x: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class ClientReq(Term):
    """Client creation ``x*(y). P``: receives the session endpoint ``y``."""

    x: str
    y: str
    body: Term
    pos: Pos = _pos()


@dataclass(frozen=True)
class ServerAcc(Term):
    """Server interaction ``x*[y]. P``: sends the session endpoint ``y``."""

    x: str
    y: str
    body: Term
    pos: Pos = _pos()


def _cache_hash(cls):
    structural = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = structural(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__


for _cls in (Link, Halt, New, Par, Out, In, Close, Wait, Inl, Inr, Case, Absurd, ClientReq, ServerAcc):
    _cache_hash(_cls)


# prefixes that bind a name in their continuation
BINDING_PREFIXES = (Out, In, ClientReq, ServerAcc)
SIMPLE_PREFIXES = (Close, Wait, Inl, Inr)
ACTIONS = BINDING_PREFIXES + SIMPLE_PREFIXES + (Case, Absurd, Link)


def free_names(p: Term) -> frozenset[str]:
    return _fn(p)


def _fn(p: Term) -> frozenset[str]:
    # terms are immutable, so the free-name set is cached on the node
    fv = p.__dict__.get("_fv")
    if fv is None:
        fv = _compute_fn(p)
        object.__setattr__(p, "_fv", fv)
    return fv


def _compute_fn(p: Term) -> frozenset[str]:
    cls = type(p)
    if cls is Halt:
        return frozenset()
    if cls is Link:
        return frozenset((p.x, p.y))
    if cls is Absurd:
        return frozenset((p.x,))
    if cls is Par:
        return _fn(p.left) | _fn(p.right)
    if cls is New:
        return _fn(p.body) - {p.x, p.y}
    if cls in BINDING_PREFIXES:
        return (_fn(p.body) - {p.y}) | {p.x}
    if cls in SIMPLE_PREFIXES:
        return _fn(p.body) | {p.x}
    if cls is Case:
        return _fn(p.left) | _fn(p.right) | {p.x}
    raise TypeError(f"not a term: {p!r}")


def all_names(p: Term) -> set[str]:
    """Every name occurring in ``p``, free or bound."""
    out: set[str] = set()
    for node in subterms(p):
        for attr in ("x", "y"):
            v = getattr(node, attr, None)
            if isinstance(v, str):
                out.add(v)
    return out


def subterms(p: Term) -> Iterator[Term]:
    yield p
    for child in children(p):
        yield from subterms(child)


def children(p: Term) -> tuple[Term, ...]:
    cls = type(p)
    if cls in (Halt, Link, Absurd):
        return ()
    if cls in (Par,):
        return (p.left, p.right)
    if cls is Case:
        return (p.left, p.right)
    return (p.body,)


def term_size(p: Term) -> int:
    """Number of constructor nodes."""
    n = p.__dict__.get("_size")
    if n is None:
        n = 1 + sum(term_size(c) for c in children(p))
        object.__setattr__(p, "_size", n)
    return n


def fresh(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    stem = base.rstrip("'0123456789") or "v"
    for i in itertools.count():
        cand = f"{stem}{i}"
        if cand not in avoid:
            return cand
    raise AssertionError  # pragma: no cover


def substitute(p: Term, new: str, old: str) -> Term:
    """Capture-avoiding ``p{new/old}``."""
    if new == old or old not in _fn(p):
        return p
    return _subst(p, {old: new})


def rename(p: Term, mapping: Mapping[str, str]) -> Term:
    """Simultaneous capture-avoiding renaming of free names."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return p
    return _subst(p, mapping)


def _subst(p: Term, m: Mapping[str, str]) -> Term:
    fn = _fn(p)
    if not fn.issuperset(m):
        m = {k: v for k, v in m.items() if k in fn}
        if not m:
            return p
    r = lambda n: m.get(n, n)
    cls = type(p)
    if cls is Link:
        return Link(r(p.x), r(p.y), pos=p.pos)
    if cls is Absurd:
        return Absurd(r(p.x), pos=p.pos)
    if cls is Par:
        return Par(_subst(p.left, m), _subst(p.right, m), pos=p.pos)
    if cls is Case:
        return Case(r(p.x), _subst(p.left, m), _subst(p.right, m), pos=p.pos)
    if cls in SIMPLE_PREFIXES:
        return cls(r(p.x), _subst(p.body, m), pos=p.pos)
    if cls in BINDING_PREFIXES:
        y, body = _under_binders(p.body, (p.y,), m)
        return cls(r(p.x), y[0], body, pos=p.pos)
    if cls is New:
        (x, y), body = _under_binders(p.body, (p.x, p.y), m)
        return New(x, y, body, pos=p.pos)
    raise TypeError(f"not a term: {p!r}")


def _under_binders(body: Term, binders: tuple[str, ...], m: Mapping[str, str]):
    inner = {k: v for k, v in m.items() if k not in binders}
    if not inner:
        return binders, body
    targets = set(inner.values())
    clash = [b for b in binders if b in targets]
    if clash:
        avoid = set(all_names(body)) | set(inner) | targets | set(binders)
        fresh_map = {}
        new_binders = []
        for b in binders:
            if b in targets:
                nb = fresh(b, avoid)
                avoid.add(nb)
                fresh_map[b] = nb
                new_binders.append(nb)
            else:
                new_binders.append(b)
        body = _subst(body, fresh_map) if set(fresh_map) & _fn(body) else body
        binders = tuple(new_binders)
    return binders, _subst(body, inner)


def alpha_eq(p: Term, q: Term) -> bool:
    """Equality up to consistent renaming of bound names."""
    return _alpha(p, q, {}, {}, 0)


def _alpha(p, q, env_p, env_q, depth) -> bool:
    if type(p) is not type(q):
        return False

    def same(a, b):
        da, db = env_p.get(a), env_q.get(b)
        if da is None and db is None:
            return a == b
        return da == db

    cls = type(p)
    if cls is Halt:
        return True
    if cls is Link:
        return same(p.x, q.x) and same(p.y, q.y)
    if cls is Absurd:
        return same(p.x, q.x)
    if cls is Par:
        return _alpha(p.left, q.left, env_p, env_q, depth) and _alpha(
            p.right, q.right, env_p, env_q, depth
        )
    if cls is Case:
        return (
            same(p.x, q.x)
            and _alpha(p.left, q.left, env_p, env_q, depth)
            and _alpha(p.right, q.right, env_p, env_q, depth)
        )
    if cls in SIMPLE_PREFIXES:
        return same(p.x, q.x) and _alpha(p.body, q.body, env_p, env_q, depth)
    if cls in BINDING_PREFIXES:
        if not same(p.x, q.x):
            return False
        return _alpha(
            p.body, q.body, {**env_p, p.y: depth}, {**env_q, q.y: depth}, depth + 1
        )
    if cls is New:
        ep = {**env_p, p.x: depth, p.y: depth + 1}
        eq = {**env_q, q.x: depth, q.y: depth + 1}
        return _alpha(p.body, q.body, ep, eq, depth + 2)
    raise TypeError(f"not a term: {p!r}")


def alpha_key(p: Term) -> Term:
    """Representative of the alpha-class: bound names renamed by traversal."""
    counter = itertools.count()
    avoid = _fn(p)

    def nm():
        while True:
            n = f"b{next(counter)}"
            if n not in avoid:
                return n

    def go(t, env):
        r = lambda n: env.get(n, n)
        cls = type(t)
        if cls is Halt:
            return Halt()
        if cls is Link:
            return Link(r(t.x), r(t.y))
        if cls is Absurd:
            return Absurd(r(t.x))
        if cls is Par:
            return Par(go(t.left, env), go(t.right, env))
        if cls is Case:
            return Case(r(t.x), go(t.left, env), go(t.right, env))
        if cls in SIMPLE_PREFIXES:
            return cls(r(t.x), go(t.body, env))
        if cls in BINDING_PREFIXES:
            y = nm()
            return cls(r(t.x), y, go(t.body, {**env, t.y: y}))
        if cls is New:
            a, b = nm(), nm()
            return New(a, b, go(t.body, {**env, t.x: a, t.y: b}))
        raise TypeError(f"not a term: {t!r}")

    return go(p, {})


# --------------------------------------------------------------------------
# Environments


class Env(dict):
    """Ordered map from endpoint names to types."""

    def __repr__(self):
        return f"Env({dict.__repr__(self)})"


@dataclass(frozen=True)
class HyperEnv:
    """Multiset of environments; names are distinct across all components."""

    components: tuple[tuple[tuple[str, TypeExpr], ...], ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for comp in self.components:
            for name, _ in comp:
                if name in seen:
                    raise ValueError(f"duplicate endpoint {name}")
                seen.add(name)

    @classmethod
    def of(cls, *components: Mapping[str, TypeExpr]) -> HyperEnv:
        return cls(tuple(tuple(c.items()) for c in components))

    def envs(self) -> list[Env]:
        return [Env(c) for c in self.components]

    def names(self) -> set[str]:
        return {n for c in self.components for n, _ in c}

    def flat(self) -> dict[str, TypeExpr]:
        return {n: t for c in self.components for n, t in c}

    def canonical(self) -> frozenset:
        """Order-insensitive view used to compare hyper-environments."""
        return _multiset(frozenset(c) for c in self.components)

    def __eq__(self, other):
        if not isinstance(other, HyperEnv):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())


def _multiset(items) -> frozenset:
    counts: dict = {}
    for it in items:
        counts[it] = counts.get(it, 0) + 1
    return frozenset(counts.items())
