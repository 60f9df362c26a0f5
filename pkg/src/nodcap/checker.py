"""Hypersequent type checker with bounded client/server channels.

``check(P, G)`` is syntax directed.  Terms carry no type annotations, so the
type of each cut (and of the index splits made when a client pool is spread
over parallel branches) is inferred by unification over type and index
metavariables.  Metavariables never escape: the derivation is zonked once the
index constraints are solved.

Checking works on a flat environment and reports the partition into
components that the term induces; ``check`` then compares that partition with
the requested hyper-environment.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field

from .kernel import (
    BINARY,
    BINDING_PREFIXES,
    UNITS,
    Absurd,
    Bot,
    Case,
    Client,
    ClientReq,
    Close,
    Halt,
    HyperEnv,
    In,
    Inl,
    Inr,
    Link,
    New,
    One,
    Out,
    Par,
    Parr,
    Plus,
    Server,
    ServerAcc,
    Tensor,
    Term,
    Top,
    TypeExpr,
    Wait,
    With,
    all_names,
    dual,
    free_names,
    fresh,
    substitute,
    subterms,
    type_size,
)

# error kinds
UNBOUND = "unbound name"
DUPLICATE = "duplicate name"
COMPONENT_MISMATCH = "component mismatch"
INDEX_MISMATCH = "arity/index mismatch"
NON_HALT_CLOSE = "non-halt close continuation"
CUT_NOT_DISTINCT = "cut endpoints not in distinct components"
CLIENT_EXHAUSTED = "client index exhausted"
LEFTOVER = "leftover bindings"
TYPE_MISMATCH = "type mismatch"
UNDEFINED_DEF = "undefined definition"


class TypeCheckError(Exception):
    def __init__(self, kind: str, message: str, names: Iterable[str] = (), pos=None):
        self.kind = kind
        self.names = tuple(names)
        self.pos = pos
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{kind}: {message}")
        self.message = message


# --------------------------------------------------------------------------
# Metavariables


@dataclass(frozen=True)
class TVar(TypeExpr):
    id: int
    flipped: bool = False

    def dual(self):
        return TVar(self.id, not self.flipped)

    def __str__(self):
        return f"_{self.id}{'~' if self.flipped else ''}"


@dataclass(frozen=True)
class IVar:
    id: int

    def __str__(self):
        return f"_i{self.id}"


class UnifyError(Exception):
    pass


class Unifier:
    def __init__(self):
        self.types: dict[int, TypeExpr] = {}
        self.idx: dict[int, object] = {}
        self.sums: list[tuple[object, tuple]] = []
        self._ids = itertools.count()

    def tvar(self) -> TVar:
        return TVar(next(self._ids))

    def ivar(self) -> IVar:
        return IVar(next(self._ids))

    def snapshot(self):
        return dict(self.types), dict(self.idx), list(self.sums)

    def restore(self, snap):
        self.types, self.idx, self.sums = dict(snap[0]), dict(snap[1]), list(snap[2])

    def shallow(self, t: TypeExpr) -> TypeExpr:
        while isinstance(t, TVar) and t.id in self.types:
            b = self.types[t.id]
            t = dual(b) if t.flipped else b
        return t

    def index(self, n):
        while isinstance(n, IVar) and n.id in self.idx:
            n = self.idx[n.id]
        return n

    def _occurs(self, v: int, t: TypeExpr) -> bool:
        t = self.shallow(t)
        if isinstance(t, TVar):
            return t.id == v
        if isinstance(t, BINARY):
            return self._occurs(v, t.left) or self._occurs(v, t.right)
        if isinstance(t, (Client, Server)):
            return self._occurs(v, t.body)
        return False

    def unify(self, a: TypeExpr, b: TypeExpr) -> None:
        a, b = self.shallow(a), self.shallow(b)
        if isinstance(a, TVar) and isinstance(b, TVar) and a.id == b.id:
            if a.flipped != b.flipped:
                raise UnifyError("no type is its own dual")
            return
        if isinstance(a, TVar):
            return self._bind(a, b)
        if isinstance(b, TVar):
            return self._bind(b, a)
        if type(a) is not type(b):
            raise UnifyError(f"{show(self.zonk(a, False))} vs {show(self.zonk(b, False))}")
        if isinstance(a, UNITS):
            return
        if isinstance(a, BINARY):
            self.unify(a.left, b.left)
            self.unify(a.right, b.right)
            return
        self.unify_index(a.n, b.n)
        self.unify(a.body, b.body)

    def _bind(self, v: TVar, t: TypeExpr) -> None:
        if self._occurs(v.id, t):
            raise UnifyError("infinite type")
        self.types[v.id] = dual(t) if v.flipped else t

    def unify_index(self, n, m) -> None:
        n, m = self.index(n), self.index(m)
        if n == m:
            return
        if isinstance(n, IVar):
            self.idx[n.id] = m
        elif isinstance(m, IVar):
            self.idx[m.id] = n
        else:
            raise UnifyError(f"index {n} vs {m}")

    def add_sum(self, total, parts) -> None:
        self.sums.append((total, tuple(parts)))

    def solve(self) -> None:
        """Resolve index variables from the recorded sum constraints."""
        while True:
            self._propagate()
            free = self._free_index_vars()
            if not free:
                break
            # under-determined split: fix the first unknown at 1 and retry
            self.idx[free[0].id] = 1
        for total, parts in self.sums:
            t = self.index(total)
            ps = [self.index(q) for q in parts]
            if t != sum(ps) or min(ps) < 1:
                raise UnifyError(f"index {t} cannot be split as {'+'.join(map(str, ps))}")

    def _free_index_vars(self) -> list[IVar]:
        out = []
        for total, parts in self.sums:
            for q in (total, *parts):
                q = self.index(q)
                if isinstance(q, IVar) and q not in out:
                    out.append(q)
        return out

    def _propagate(self) -> None:
        changed = True
        while changed:
            changed = False
            for total, parts in self.sums:
                t = self.index(total)
                ps = [self.index(q) for q in parts]
                unknown = [q for q in ps if isinstance(q, IVar)]
                known = sum(q for q in ps if not isinstance(q, IVar))
                if isinstance(t, IVar):
                    if not unknown:
                        self.idx[t.id] = known
                        changed = True
                elif len(unknown) == 1:
                    val = t - known
                    if val < 1:
                        raise UnifyError(f"index {t} is too small to split")
                    self.idx[unknown[0].id] = val
                    changed = True

    def zonk(self, t: TypeExpr, default: bool = True) -> TypeExpr:
        t = self.shallow(t)
        if isinstance(t, TVar):
            if not default:
                return t
            # unconstrained cut formula: any type works, pick the smallest
            self.types[t.id] = Bot() if t.flipped else One()
            return self.shallow(t)
        if isinstance(t, UNITS):
            return t
        if isinstance(t, BINARY):
            return type(t)(self.zonk(t.left, default), self.zonk(t.right, default))
        n = self.index(t.n)
        if isinstance(n, IVar) and default:
            self.idx[n.id] = 1
            n = 1
        return type(t)(n, self.zonk(t.body, default))


def show(t: TypeExpr) -> str:
    from .parser import pretty_type

    return pretty_type(t)


# --------------------------------------------------------------------------
# Derivations

Comp = list  # list of (name, type) pairs


@dataclass
class Derivation:
    """One rule application; ``conclusion`` is the hyper-environment."""

    rule: str
    term: Term
    conclusion: list[Comp]
    premises: list[Derivation] = field(default_factory=list)
    cut: TypeExpr | None = None
    # Cont! / Cont?: (merged name, absorbed name); Cut: binder names used
    contracted: tuple[str, str] | None = None

    def hyperenv(self) -> HyperEnv:
        return HyperEnv(tuple(tuple(c) for c in self.conclusion))

    def nodes(self):
        yield self
        for p in self.premises:
            yield from p.nodes()

    def to_json(self) -> dict:
        from .parser import pretty_term

        out = {
            "rule": self.rule,
            "term": pretty_term(self.term),
            "conclusion": _pretty_comps(self.conclusion),
        }
        if self.cut is not None:
            out["cut"] = show(self.cut)
        out["premises"] = [p.to_json() for p in self.premises]
        return out

    def pretty(self, indent: int = 0) -> str:
        from .parser import pretty_term

        pad = "  " * indent
        extra = f" [cut {show(self.cut)}]" if self.cut is not None else ""
        line = f"{pad}{self.rule}{extra}: {pretty_term(self.term)} :: {_pretty_comps(self.conclusion)}"
        return "\n".join([line] + [p.pretty(indent + 1) for p in self.premises])


def _pretty_comps(comps) -> str:
    if not comps:
        return "."
    return " ; ".join(", ".join(f"{n}: {show(t)}" for n, t in c) for c in comps)


def cut_measure(d: Derivation) -> int:
    """Sum of the sizes of all cut formulas in the derivation."""
    return sum(type_size(n.cut) for n in d.nodes() if n.cut is not None)


# --------------------------------------------------------------------------
# The checker


def check(p: Term, g: HyperEnv) -> Derivation:
    """Return a derivation of ``p :: g`` or raise :class:`TypeCheckError`."""
    flat: dict[str, TypeExpr] = {}
    for comp in g.components:
        for name, a in comp:
            if name in flat:
                raise TypeCheckError(DUPLICATE, f"duplicate endpoint {name}", [name])
            flat[name] = a
    u = Unifier()
    home = {n: i for i, comp in enumerate(g.components) for n, _ in comp}
    d = _Checker(u, home).check(p, flat)
    try:
        u.solve()
    except UnifyError as e:
        raise TypeCheckError(INDEX_MISMATCH, str(e), pos=p.pos) from None
    _zonk_derivation(d, u)
    got = HyperEnv(tuple(tuple(c) for c in d.conclusion))
    if got != g:
        raise TypeCheckError(
            COMPONENT_MISMATCH,
            f"term has components {_pretty_comps(d.conclusion)}, expected {_pretty_comps(g.components)}",
            pos=p.pos,
        )
    return d


def _zonk_derivation(d: Derivation, u: Unifier) -> None:
    for node in d.nodes():
        node.conclusion = [[(n, u.zonk(t)) for n, t in c] for c in node.conclusion]
        if node.cut is not None:
            node.cut = u.zonk(node.cut)


class _Checker:
    def __init__(self, u: Unifier, home: dict[str, int] | None = None):
        self.u = u
        # target component of each free endpoint, used to place absorbed names
        self.home = home or {}

    # -- helpers
    def need(self, x: str, env: dict, p: Term) -> TypeExpr:
        if x not in env:
            raise TypeCheckError(UNBOUND, f"{x} is not in the environment", [x], p.pos)
        return env[x]

    def unify(self, a, b, x, p):
        try:
            self.u.unify(a, b)
        except UnifyError as e:
            raise TypeCheckError(TYPE_MISMATCH, f"{x}: {e}", [x], p.pos) from None

    def single(self, d: Derivation, p: Term, rule: str) -> Comp:
        if len(d.conclusion) != 1:
            raise TypeCheckError(
                COMPONENT_MISMATCH,
                f"rule {rule} needs its premise typed in exactly one environment, "
                f"got {len(d.conclusion)}",
                pos=p.pos,
            )
        return d.conclusion[0]

    def rebind(self, p: Term, env: dict) -> Term:
        """Rename the binder of a prefix away from the environment."""
        if p.y in env or p.y == p.x:
            avoid = set(env) | all_names(p.body) | {p.x}
            y = fresh(p.y, avoid)
            return type(p)(p.x, y, substitute(p.body, y, p.y), pos=p.pos)
        return p

    @staticmethod
    def rest(env: dict, x: str) -> dict:
        return {n: t for n, t in env.items() if n != x}

    # -- dispatch
    def check(self, p: Term, env: dict) -> Derivation:
        method = getattr(self, "rule_" + type(p).__name__)
        return method(p, env)

    def rule_Halt(self, p, env):
        if env:
            raise TypeCheckError(LEFTOVER, f"unused: {', '.join(env)}", env, p.pos)
        return Derivation("H-Mix0", p, [])

    def rule_Link(self, p, env):
        if p.x == p.y:
            raise TypeCheckError(TYPE_MISMATCH, f"{p.x} linked to itself", [p.x], p.pos)
        a = self.need(p.x, env, p)
        b = self.need(p.y, env, p)
        extra = [n for n in env if n not in (p.x, p.y)]
        if extra:
            raise TypeCheckError(LEFTOVER, f"unused: {', '.join(extra)}", extra, p.pos)
        self.unify(a, dual(b), p.x, p)
        return Derivation("Ax", p, [[(p.x, a), (p.y, b)]])

    def rule_Absurd(self, p, env):
        self.unify(self.need(p.x, env, p), Top(), p.x, p)
        return Derivation("⊤", p, [list(env.items())])

    def rule_Close(self, p, env):
        if type(p.body) is not Halt:
            raise TypeCheckError(
                NON_HALT_CLOSE,
                f"the only well-typed continuation of {p.x}[] is 0",
                [p.x],
                p.pos,
            )
        a = self.need(p.x, env, p)
        extra = [n for n in env if n != p.x]
        if extra:
            raise TypeCheckError(LEFTOVER, f"unused: {', '.join(extra)}", extra, p.pos)
        self.unify(a, One(), p.x, p)
        prem = self.check(p.body, {})
        return Derivation("1", p, [[(p.x, a)]], [prem])

    def rule_Wait(self, p, env):
        a = self.need(p.x, env, p)
        self.unify(a, Bot(), p.x, p)
        prem = self.check(p.body, self.rest(env, p.x))
        comp = self.single(prem, p, "⊥")
        return Derivation("⊥", p, [comp + [(p.x, a)]], [prem])

    def _selection(self, p, env, rule, left):
        a = self.need(p.x, env, p)
        l, r = self.u.tvar(), self.u.tvar()
        self.unify(a, Plus(l, r), p.x, p)
        prem = self.check(p.body, {**self.rest(env, p.x), p.x: l if left else r})
        comp = self.single(prem, p, rule)
        return Derivation(rule, p, [self._replace(comp, p.x, a)], [prem])

    def rule_Inl(self, p, env):
        return self._selection(p, env, "⊕₁", True)

    def rule_Inr(self, p, env):
        return self._selection(p, env, "⊕₂", False)

    def rule_Case(self, p, env):
        a = self.need(p.x, env, p)
        l, r = self.u.tvar(), self.u.tvar()
        self.unify(a, With(l, r), p.x, p)
        rest = self.rest(env, p.x)
        dl = self.check(p.left, {**rest, p.x: l})
        self.single(dl, p, "&")
        dr = self.check(p.right, {**rest, p.x: r})
        self.single(dr, p, "&")
        return Derivation("&", p, [[*rest.items(), (p.x, a)]], [dl, dr])

    @staticmethod
    def _replace(comp, x, a):
        return [(n, a if n == x else t) for n, t in comp]

    def rule_Out(self, p, env):
        a = self.need(p.x, env, p)
        p = self.rebind(p, env)
        l, r = self.u.tvar(), self.u.tvar()
        self.unify(a, Tensor(l, r), p.x, p)
        prem = self.check(p.body, {**self.rest(env, p.x), p.y: l, p.x: r})
        comps = prem.conclusion
        where_y = [i for i, c in enumerate(comps) if any(n == p.y for n, _ in c)]
        where_x = [i for i, c in enumerate(comps) if any(n == p.x for n, _ in c)]
        if len(comps) != 2 or where_y == where_x:
            raise TypeCheckError(
                COMPONENT_MISMATCH,
                f"{p.x}[{p.y}] needs {p.y} and {p.x} in two independent components",
                [p.x, p.y],
                p.pos,
            )
        merged = [(n, t) for c in comps for n, t in c if n not in (p.x, p.y)]
        return Derivation("⊗", p, [merged + [(p.x, a)]], [prem])

    def rule_In(self, p, env):
        a = self.need(p.x, env, p)
        p = self.rebind(p, env)
        l, r = self.u.tvar(), self.u.tvar()
        self.unify(a, Parr(l, r), p.x, p)
        prem = self.check(p.body, {**self.rest(env, p.x), p.y: l, p.x: r})
        comp = self.single(prem, p, "⅋")
        out = [(n, t) for n, t in comp if n not in (p.x, p.y)]
        return Derivation("⅋", p, [out + [(p.x, a)]], [prem])

    def rule_ClientReq(self, p, env):
        a = self.need(p.x, env, p)
        p = self.rebind(p, env)
        if p.x in free_names(p.body):
            raise TypeCheckError(
                CLIENT_EXHAUSTED,
                f"{p.x} is used again after a client request; clients only pool in parallel",
                [p.x],
                p.pos,
            )
        s = self.u.shallow(a)
        if isinstance(s, Client) and self.u.index(s.n) != 1 and not isinstance(self.u.index(s.n), IVar):
            raise TypeCheckError(
                INDEX_MISMATCH,
                f"{p.x} is a pool of {self.u.index(s.n)} clients but only one request is made",
                [p.x],
                p.pos,
            )
        body = self.u.tvar()
        self.unify(a, Client(1, body), p.x, p)
        prem = self.check(p.body, {**self.rest(env, p.x), p.y: body})
        comp = self.single(prem, p, "take₁")
        out = [(n, t) for n, t in comp if n != p.y]
        return Derivation("take₁", p, [out + [(p.x, a)]], [prem])

    def rule_ServerAcc(self, p, env):
        a = self.need(p.x, env, p)
        p = self.rebind(p, env)
        body = self.u.tvar()
        n = self.u.ivar()
        self.unify(a, Server(n, body), p.x, p)
        n = self.u.index(n)
        again = p.x in free_names(p.body)
        if again:
            if n == 1:
                raise TypeCheckError(
                    INDEX_MISMATCH, f"{p.x} offers a single interaction but is used again", [p.x], p.pos
                )
            if isinstance(n, int):
                m = n - 1
            else:
                m = self.u.ivar()
                self.u.add_sum(n, (1, m))
            inner = {**self.rest(env, p.x), p.y: body, p.x: Server(m, body)}
        else:
            try:
                self.u.unify_index(n, 1)
            except UnifyError:
                raise TypeCheckError(
                    INDEX_MISMATCH,
                    f"{p.x} offers {n} interactions but only one is used",
                    [p.x],
                    p.pos,
                ) from None
            inner = {**self.rest(env, p.x), p.y: body}
        prem = self.check(p.body, inner)
        comp = self.single(prem, p, "give₁")
        out = [(nm, t) for nm, t in comp if nm not in (p.y, p.x)]
        if not again:
            return Derivation("give₁", p, [out + [(p.x, a)]], [prem])
        aux = fresh(p.x, set(env) | all_names(p.body) | {p.y})
        one = Server(1, body)
        give = Derivation(
            "give₁",
            ServerAcc(aux, p.y, p.body, pos=p.pos),
            [out + [(aux, one), (p.x, inner[p.x])]],
            [prem],
        )
        return Derivation("Cont?", p, [out + [(p.x, a)]], [give], contracted=(p.x, aux))

    def rule_New(self, p, env):
        x, y, body = p.x, p.y, p.body
        if x in env or y in env:
            avoid = set(env) | all_names(body)
            nx = fresh(x, avoid) if x in env else x
            avoid.add(nx)
            ny = fresh(y, avoid) if y in env else y
            from .kernel import rename

            body = rename(body, {x: nx, y: ny})
            x, y = nx, ny
        a = self.u.tvar()
        prem = self.check(body, {**env, x: a, y: dual(a)})
        comps = prem.conclusion
        ix = [i for i, c in enumerate(comps) if any(n == x for n, _ in c)]
        iy = [i for i, c in enumerate(comps) if any(n == y for n, _ in c)]
        if ix == iy:
            raise TypeCheckError(
                CUT_NOT_DISTINCT,
                f"{x} and {y} are in the same component; a cut must connect two independent processes",
                [x, y],
                p.pos,
            )
        i, j = ix[0], iy[0]
        merged = [(n, t) for n, t in comps[i] + comps[j] if n not in (x, y)]
        others = [c for k, c in enumerate(comps) if k not in (i, j)]
        return Derivation("Cut", p, others + [merged], [prem], cut=a, contracted=(x, y))

    def rule_Par(self, p, env):
        fl, fr = free_names(p.left), free_names(p.right)
        for n in sorted((fl | fr) - set(env)):
            raise TypeCheckError(UNBOUND, f"{n} is not in the environment", [n], p.pos)
        envl = {n: t for n, t in env.items() if n in fl and n not in fr}
        envr = {n: t for n, t in env.items() if n in fr and n not in fl}
        shared = [n for n in env if n in fl and n in fr]
        totals = {}
        for x in shared:
            cls, total, body, nl, nr = self.split(x, env[x], p)
            envl[x] = cls(nl, body)
            envr[x] = cls(nr, body)
            totals[x] = (cls, total, body)
        unclaimed = [n for n in env if n not in fl and n not in fr]
        dl, dr = self.check_branches(p, envl, envr, unclaimed, env)
        mix = Derivation("H-Mix", p, dl.conclusion + dr.conclusion, [dl, dr])
        d = mix
        for x in shared:
            d = self.contract(d, x, totals[x], p)
        return d

    def split(self, x, a, p):
        s = self.u.shallow(a)
        if isinstance(s, TVar):
            kind = _usage(p, x)
            if kind is None:
                raise TypeCheckError(
                    COMPONENT_MISMATCH,
                    f"{x} is used by both sides of a parallel composition but is not a client or server channel",
                    [x],
                    p.pos,
                )
            s = kind(self.u.ivar(), self.u.tvar())
            self.unify(a, s, x, p)
        if not isinstance(s, (Client, Server)):
            raise TypeCheckError(
                COMPONENT_MISMATCH,
                f"{x} is used by both sides of a parallel composition but has type {show(s)}",
                [x],
                p.pos,
            )
        total = self.u.index(s.n)
        if total == 1:
            raise TypeCheckError(
                INDEX_MISMATCH, f"{x} has index 1 and cannot be shared between two processes", [x], p.pos
            )
        nl, nr = self.u.ivar(), self.u.ivar()
        self.u.add_sum(total, (nl, nr))
        return type(s), total, s.body, nl, nr

    def check_branches(self, p, envl, envr, unclaimed, env):
        if not unclaimed:
            return self.check(p.left, envl), self.check(p.right, envr)
        # names free on neither side can only be absorbed by an absurd
        has_l = any(type(t) is Absurd for t in subterms(p.left))
        has_r = any(type(t) is Absurd for t in subterms(p.right))
        if not (has_l or has_r):
            raise TypeCheckError(LEFTOVER, f"unused: {', '.join(unclaimed)}", unclaimed, p.pos)
        options = []
        if has_l and has_r:
            homes_r = {self.home.get(n) for n in free_names(p.right)} - {None}
            homes_l = {self.home.get(n) for n in free_names(p.left)} - {None}
            guess = frozenset(
                n for n in unclaimed if self.home.get(n) in homes_l or self.home.get(n) not in homes_r
            )
            options.append(guess)
        if has_l:
            options.append(frozenset(unclaimed))
        if has_r:
            options.append(frozenset())
        if has_l and has_r and len(unclaimed) <= 10:
            for r in range(1, len(unclaimed)):
                for combo in itertools.combinations(unclaimed, r):
                    options.append(frozenset(combo))
        first_err = None
        for left_part in options:
            snap = self.u.snapshot()
            el = {**envl, **{n: env[n] for n in unclaimed if n in left_part}}
            er = {**envr, **{n: env[n] for n in unclaimed if n not in left_part}}
            try:
                return self.check(p.left, el), self.check(p.right, er)
            except TypeCheckError as e:
                first_err = first_err or e
                self.u.restore(snap)
        raise first_err

    def contract(self, d: Derivation, x: str, info, p: Term) -> Derivation:
        cls, total, body = info
        comps = d.conclusion
        where = [i for i, c in enumerate(comps) if any(n == x for n, _ in c)]
        if len(where) == 2:
            i, j = where
            merged = [(n, t) for n, t in comps[i] + comps[j] if n != x] + [(x, cls(total, body))]
            others = [c for k, c in enumerate(comps) if k not in (i, j)]
            return Derivation("Cont!", p, others + [merged], [d], contracted=(x, x))
        if len(where) == 1 and cls is Server:
            i = where[0]
            merged = [(n, t) for n, t in comps[i] if n != x] + [(x, cls(total, body))]
            others = [c for k, c in enumerate(comps) if k != i]
            return Derivation("Cont?", p, others + [merged], [d], contracted=(x, x))
        raise TypeCheckError(
            COMPONENT_MISMATCH,
            f"the two uses of {x} already share a component; clients can only be pooled "
            "across independent processes",
            [x],
            p.pos,
        )


def _usage(p: Term, x: str):
    """Client or Server, from the first shared-channel action on free ``x``."""
    cls = type(p)
    if cls in (ClientReq, ServerAcc) and p.x == x:
        return Client if cls is ClientReq else Server
    if cls is New and x in (p.x, p.y):
        return None
    if cls in BINDING_PREFIXES and p.y == x:
        return None
    from .kernel import children

    for c in children(p):
        found = _usage(c, x)
        if found is not None:
            return found
    return None


# --------------------------------------------------------------------------
# Independent derivation validation


class InvalidDerivation(Exception):
    pass


def _mset(comps) -> list:
    return sorted(repr(sorted(map(repr, c))) for c in comps)


def _one(comps, node):
    if len(comps) != 1:
        raise InvalidDerivation(f"{node.rule}: expected one component")
    return list(comps[0])


def _take(comp, name, node):
    hits = [t for n, t in comp if n == name]
    if len(hits) != 1:
        raise InvalidDerivation(f"{node.rule}: {name} occurs {len(hits)} times")
    return hits[0], [(n, t) for n, t in comp if n != name]


def validate(d: Derivation) -> None:
    """Re-check every rule instance of ``d``; raise :class:`InvalidDerivation`."""
    for node in d.nodes():
        _validate_node(node)


def _validate_node(node: Derivation) -> None:
    t, rule, prem = node.term, node.rule, node.premises
    concl = node.conclusion

    def need(cond, what):
        if not cond:
            raise InvalidDerivation(f"{rule} at {t!r}: {what}")

    def same(a, b):
        return _mset(a) == _mset(b)

    if rule == "H-Mix0":
        need(type(t) is Halt and concl == [] and not prem, "malformed")
    elif rule == "Ax":
        need(type(t) is Link and len(concl) == 1 and len(concl[0]) == 2, "shape")
        a, _ = _take(concl[0], t.x, node)
        b, _ = _take(concl[0], t.y, node)
        need(a == dual(b), "link types are not dual")
    elif rule == "⊤":
        need(type(t) is Absurd and len(concl) == 1, "shape")
        a, _ = _take(concl[0], t.x, node)
        need(a == Top(), "absurd on a non-top endpoint")
    elif rule == "1":
        need(type(t) is Close and type(t.body) is Halt and concl == [[(t.x, One())]], "shape")
    elif rule == "H-Mix":
        need(type(t) is Par and len(prem) == 2, "shape")
        need(same(concl, prem[0].conclusion + prem[1].conclusion), "conclusion is not the union")
    elif rule in ("Cont!", "Cont?"):
        x, aux = node.contracted
        need(len(prem) == 1, "one premise")
        src = prem[0].conclusion
        where = [(i, a) for i, c in enumerate(src) for n, a in c if n in (x, aux)]
        need(len(where) == 2, "needs two uses")
        (i, a), (j, b) = where
        need(type(a) is type(b) and isinstance(a, (Client, Server)) and a.body == b.body, "types")
        need((i != j) if rule == "Cont!" else (i == j and isinstance(a, Server)), "components")
        merged = [(n, ty) for n, ty in src[i] + (src[j] if i != j else []) if n not in (x, aux)]
        merged.append((x, type(a)(a.n + b.n, a.body)))
        others = [c for k, c in enumerate(src) if k not in (i, j)]
        need(same(concl, others + [merged]), "conclusion")
    elif rule == "Cut":
        x, y = node.contracted
        need(type(t) is New and len(prem) == 1, "shape")
        src = prem[0].conclusion
        ix = [k for k, c in enumerate(src) if any(n == x for n, _ in c)]
        iy = [k for k, c in enumerate(src) if any(n == y for n, _ in c)]
        need(len(ix) == 1 and len(iy) == 1 and ix != iy, "endpoints not in distinct components")
        a, ra = _take(src[ix[0]], x, node)
        b, rb = _take(src[iy[0]], y, node)
        need(a == dual(b) and a == node.cut, "cut formula")
        others = [c for k, c in enumerate(src) if k not in (ix[0], iy[0])]
        need(same(concl, others + [ra + rb]), "conclusion")
    else:
        _validate_logical(node, need, same)


def _validate_logical(node, need, same):
    t, rule, prem, concl = node.term, node.rule, node.premises, node.conclusion
    need(len(concl) == 1, "one component")
    a, gamma = _take(concl[0], t.x, node)
    if rule == "&":
        need(type(t) is Case and len(prem) == 2 and isinstance(a, With), "shape")
        for p, b in zip(prem, (a.left, a.right)):
            need(same(p.conclusion, [gamma + [(t.x, b)]]), "branch")
        return
    need(len(prem) == 1, "one premise")
    src = prem[0].conclusion
    if rule == "⊗":
        need(type(t) is Out and isinstance(a, Tensor) and len(src) == 2, "shape")
        iy = [k for k, c in enumerate(src) if any(n == t.y for n, _ in c)]
        need(len(iy) == 1, "bound endpoint")
        b, rb = _take(src[iy[0]], t.y, node)
        c, rc = _take(src[1 - iy[0]], t.x, node)
        need(b == a.left and c == a.right and same([rb + rc], [gamma]), "premise")
        return
    comp = _one(src, node)
    if rule == "⊥":
        need(type(t) is Wait and a == Bot() and same([comp], [gamma]), "premise")
    elif rule == "⅋":
        need(type(t) is In and isinstance(a, Parr), "shape")
        b, rest = _take(comp, t.y, node)
        c, rest = _take(rest, t.x, node)
        need(b == a.left and c == a.right and same([rest], [gamma]), "premise")
    elif rule in ("⊕₁", "⊕₂"):
        need(type(t) is (Inl if rule == "⊕₁" else Inr) and isinstance(a, Plus), "shape")
        b, rest = _take(comp, t.x, node)
        need(b == (a.left if rule == "⊕₁" else a.right) and same([rest], [gamma]), "premise")
    elif rule in ("take₁", "give₁"):
        cls, ty = (ClientReq, Client) if rule == "take₁" else (ServerAcc, Server)
        need(type(t) is cls and isinstance(a, ty) and a.n == 1, "shape")
        b, rest = _take(comp, t.y, node)
        need(b == a.body and same([rest], [gamma]), "premise")
    else:
        raise InvalidDerivation(f"unknown rule {rule}")


# --------------------------------------------------------------------------
# Files


@dataclass
class CheckResult:
    name: str
    env: HyperEnv
    derivation: Derivation | None = None
    error: TypeCheckError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def check_file(src) -> list[CheckResult]:
    """Run every ``check`` declaration of a parsed source file, in order."""
    defs = {}
    results = []
    from .parser import Check, Def

    for decl in src.decls:
        if isinstance(decl, Def):
            defs[decl.name] = decl.term
        elif isinstance(decl, Check):
            if decl.name not in defs:
                err = TypeCheckError(UNDEFINED_DEF, f"no def named {decl.name}", [decl.name])
                results.append(CheckResult(decl.name, decl.env, error=err))
                continue
            try:
                d = check(defs[decl.name], decl.env)
                results.append(CheckResult(decl.name, decl.env, derivation=d))
            except TypeCheckError as e:
                results.append(CheckResult(decl.name, decl.env, error=e))
    return results
