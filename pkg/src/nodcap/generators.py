"""Random generation of well-typed processes, types, and raw terms.

Well-typed terms are built top-down from a goal: a list of endpoints with
the types the term must consume.  Each step applies one typing rule to the
goal (decompose an endpoint, cut, split a client pool) and recurses on the
premises.  When the budget runs out the goal is closed off with links to a
fresh free endpoint.  The checker derives the final typing, so the
generator never has to assemble derivations itself.

Two restrictions keep the output inside the fragment where the metatheory
holds without side conditions:

* ``absurd`` only absorbs endpoints that are free in the whole term;
* pieces of a client pool spread over parallel branches are never linked.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .checker import Derivation, TypeCheckError, check
from .kernel import (
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
    Zero,
    children,
    dual,
    free_names,
    term_size,
)

DEFAULT_WEIGHTS = {
    "focus": 5.0,  # apply the rule of some endpoint's connective
    "cut": 2.0,
    "finish": 0.3,  # close the goal early with links
    "star": 1.0,  # client/server types in random types
    "mix": 1.0,  # a second top-level component
}


@dataclass
class GenConfig:
    budget: int = 30
    max_index: int = 3
    seed: int = 0
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    max_retries: int = 20

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.max_index < 1:
            raise ValueError("max_index must be at least 1")
        self.weights = {**DEFAULT_WEIGHTS, **self.weights}


class GeneratorError(Exception):
    pass


# --------------------------------------------------------------------------
# Types


def random_type(rng: random.Random, depth: int = 2, max_index: int = 3, star: float = 1.0) -> TypeExpr:
    units = [One, Bot, Zero, Top]
    if depth <= 0:
        return rng.choice(units)()
    kinds = ["unit", "binary"] + (["indexed"] if star > 0 else [])
    probs = [1.0, 2.0] + ([star] if star > 0 else [])
    kind = rng.choices(kinds, probs)[0]
    if kind == "unit":
        return rng.choice(units)()
    if kind == "indexed":
        cls = rng.choice([Client, Server])
        return cls(rng.randint(1, max_index), random_type(rng, depth - 1, max_index, star))
    cls = rng.choice([Tensor, Parr, Plus, With])
    left = random_type(rng, depth - 1, max_index, star)
    r = rng.random()
    if cls in (Plus, With) and r < 0.5:
        # equal branches (or a ⊤ branch) let the & rule apply in generation
        right = left
    elif cls is With and r < 0.7:
        right = Top()
    elif cls is Plus and r < 0.7:
        right = Zero()
    else:
        right = random_type(rng, depth - 1, max_index, star)
    return cls(left, right)


# --------------------------------------------------------------------------
# Well-typed terms


@dataclass(frozen=True)
class _B:
    name: str
    type: TypeExpr
    ext: bool = False  # free in the final term
    no_link: bool = False  # piece of a pool shared across parallel branches


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.counter = 0
        self.extras: list[_B] = []

    def name(self, stem: str) -> str:
        self.counter += 1
        return f"{stem}{self.counter}"

    def rtype(self, depth: int = 2) -> TypeExpr:
        return random_type(self.rng, depth, self.cfg.max_index, self.cfg.weights["star"])

    def extra(self, a: TypeExpr) -> _B:
        b = _B(self.name("e"), a, ext=True)
        self.extras.append(b)
        return b

    def split(self, goal, budget):
        left, right = [], []
        for g in goal:
            (left if self.rng.random() < 0.5 else right).append(g)
        b1 = self.rng.randint(0, max(0, budget))
        return left, right, b1, max(0, budget - b1)

    # -- main recursion
    def gen(self, goal: list[_B], budget: int) -> Term:
        if budget <= 1:
            return self.finish(goal)
        w = self.cfg.weights
        focusable = [g for g in goal if self.applicable(g, goal)]
        options, probs = [], []
        if focusable and w["focus"] > 0:
            options.append("focus")
            probs.append(w["focus"])
        if w["cut"] > 0:
            options.append("cut")
            probs.append(w["cut"])
        options.append("finish")
        probs.append(max(w["finish"], 1e-9))
        kind = self.rng.choices(options, probs)[0]
        if kind == "finish":
            return self.finish(goal)
        if kind == "cut":
            return self.cut(goal, budget - 1)
        return self.focus(self.rng.choice(focusable), goal, budget - 1)

    def applicable(self, g: _B, goal) -> bool:
        a = g.type
        if isinstance(a, One):
            return len(goal) == 1
        if isinstance(a, Top):
            return all(o.ext for o in goal if o is not g)
        if isinstance(a, Zero):
            return False
        if isinstance(a, With):
            rest_ext = all(o.ext for o in goal if o is not g)
            return a.left == a.right or (isinstance(a.right, Top) and rest_ext)
        return True

    def cut(self, goal, budget) -> Term:
        left, right, b1, b2 = self.split(goal, budget)
        c = self.rtype()
        u, ud = self.name("u"), self.name("u") + "'"
        p = self.gen(left + [_B(u, c)], b1)
        q = self.gen(right + [_B(ud, dual(c))], b2)
        return New(u, ud, Par(p, q))

    def focus(self, g: _B, goal, budget) -> Term:
        a, x = g.type, g.name
        rest = [o for o in goal if o is not g]
        if isinstance(a, One):
            return Close(x, Halt())
        if isinstance(a, Top):
            return Absurd(x)
        if isinstance(a, Bot):
            if not rest:
                rest = [self.extra(self.rtype(1))]
            return Wait(x, self.gen(rest, budget))
        if isinstance(a, Tensor):
            y = self.name("y")
            left, right, b1, b2 = self.split(rest, budget)
            p = self.gen(left + [_B(y, a.left)], b1)
            q = self.gen(right + [replace(g, type=a.right)], b2)
            return Out(x, y, Par(p, q))
        if isinstance(a, Parr):
            y = self.name("y")
            return In(x, y, self.gen(rest + [_B(y, a.left), replace(g, type=a.right)], budget))
        if isinstance(a, Plus):
            if self.rng.random() < 0.5:
                return Inl(x, self.gen(rest + [replace(g, type=a.left)], budget))
            return Inr(x, self.gen(rest + [replace(g, type=a.right)], budget))
        if isinstance(a, With):
            p = self.gen(rest + [replace(g, type=a.left)], budget)
            absorb = isinstance(a.right, Top) and all(o.ext for o in rest)
            if a.left == a.right and not (absorb and self.rng.random() < 0.5):
                return Case(x, p, p)
            return Case(x, p, Absurd(x))
        if isinstance(a, Client):
            return self.client(g, rest, budget)
        if isinstance(a, Server):
            y = self.name("y")
            inner = rest + [_B(y, a.body)]
            if a.n > 1:
                inner.append(replace(g, type=Server(a.n - 1, a.body)))
            return ServerAcc(x, y, self.gen(inner, budget))
        raise AssertionError(a)

    def client(self, g: _B, rest, budget) -> Term:
        a = g.type
        if a.n == 1:
            y = self.name("y")
            return ClientReq(g.name, y, self.gen(rest + [_B(y, a.body)], budget))
        n1 = self.rng.randint(1, a.n - 1)
        left, right, b1, b2 = self.split(rest, budget)
        gl = _B(g.name, Client(n1, a.body), no_link=True)
        gr = _B(g.name, Client(a.n - n1, a.body), no_link=True)
        return Par(self.gen(left + [gl], b1), self.gen(right + [gr], b2))

    def finish(self, goal) -> Term:
        """Close off ``goal`` without spending budget."""
        for g in goal:
            if isinstance(g.type, Top) and all(o.ext for o in goal if o is not g):
                return Absurd(g.name)
        for g in goal:
            if g.no_link:
                return self.client(g, [o for o in goal if o is not g], 0)
        if len(goal) == 1 and isinstance(goal[0].type, One):
            return Close(goal[0].name, Halt())
        if len(goal) == 2 and goal[0].type == dual(goal[1].type):
            return Link(goal[0].name, goal[1].name)
        return self.chain(goal)

    def chain(self, goal) -> Term:
        """``e[y1].(x1<->y1 | e[y2].(... | e<->xk))`` for a fresh free ``e``."""
        t = dual(goal[-1].type)
        for g in reversed(goal[:-1]):
            t = Tensor(dual(g.type), t)
        e = self.extra(t).name

        def build(gs):
            if len(gs) == 1:
                return Link(e, gs[0].name)
            y = self.name("y")
            return Out(e, y, Par(Link(gs[0].name, y), build(gs[1:])))

        return build(goal)


def _leaf(g: _Gen) -> tuple[Term, HyperEnv]:
    """A single leaf rule: H-Mix0, Ax or ⊤."""
    kind = g.rng.randrange(3)
    if kind == 0:
        return Halt(), HyperEnv()
    if kind == 1:
        a = g.rtype()
        x, y = g.name("r"), g.name("r")
        return Link(x, y), HyperEnv.of({x: a, y: dual(a)})
    x = g.name("r")
    return Absurd(x), HyperEnv.of({x: Top()})


def _generate(cfg: GenConfig, rng: random.Random) -> tuple[Term, HyperEnv]:
    g = _Gen(cfg, rng)
    if cfg.budget == 1:
        return _leaf(g)
    roots = 0 if rng.random() < 0.05 else 1
    if roots and cfg.budget > 2 and rng.random() < 0.3 * cfg.weights["mix"]:
        roots = 2
    terms, comps = [], []
    budgets = [cfg.budget // max(roots, 1)] * roots
    for b in budgets:
        g.extras = []
        root = _B(g.name("r"), g.rtype(), ext=True)
        terms.append(g.gen([root], b))
        comps.append({x.name: x.type for x in [root, *g.extras]})
    if not terms:
        return Halt(), HyperEnv()
    term = terms[0] if len(terms) == 1 else Par(terms[0], terms[1])
    return term, HyperEnv.of(*comps)


def gen_well_typed(cfg: GenConfig, rng: random.Random | None = None) -> tuple[Term, HyperEnv, Derivation]:
    """One random well-typed ``(P, G, derivation)``; deterministic given the seed."""
    rng = rng or random.Random(cfg.seed)
    last = None
    for _ in range(cfg.max_retries):
        term, env = _generate(cfg, rng)
        try:
            return term, env, check(term, env)
        except TypeCheckError as e:  # pragma: no cover - generator bug guard
            last = e
    raise GeneratorError(f"no well-typed term after {cfg.max_retries} attempts: {last}")


def gen_population(n: int, cfg: GenConfig) -> list[tuple[Term, HyperEnv, Derivation]]:
    rng = random.Random(cfg.seed)
    return [gen_well_typed(cfg, rng) for _ in range(n)]


# --------------------------------------------------------------------------
# Shrinking


def _positions(p: Term, path=()):
    yield path, p
    for i, c in enumerate(children(p)):
        yield from _positions(c, path + (i,))


def _replace_at(p: Term, path, new: Term) -> Term:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = list(children(p))
    kids[i] = _replace_at(kids[i], rest, new)
    cls = type(p)
    if cls is Par:
        return Par(*kids)
    if cls is Case:
        return Case(p.x, *kids)
    if cls is New:
        return New(p.x, p.y, kids[0])
    if hasattr(p, "y"):
        return cls(p.x, p.y, kids[0])
    return cls(p.x, kids[0])


def shrink(case: tuple[Term, HyperEnv]):
    """Smaller well-typed variants of ``case``, each re-checked."""
    p, g = case
    seen = set()

    def offer(q, h):
        if (q, h) in seen or term_size(q) >= term_size(p):
            return None
        seen.add((q, h))
        try:
            check(q, h)
        except TypeCheckError:
            return None
        return q, h

    out = []
    if type(p) is Par:
        for side in (p.left, p.right):
            fn = free_names(side)
            comps = [dict(c) for c in g.components if fn & {n for n, _ in c}]
            cand = offer(side, HyperEnv.of(*comps))
            if cand:
                out.append(cand)
    for path, sub in _positions(p):
        if not path:
            continue
        fn = sorted(free_names(sub))
        leaf = Halt() if not fn else Link(*fn) if len(fn) == 2 else None
        if leaf is None or leaf == sub:
            continue
        cand = offer(_replace_at(p, path, leaf), g)
        if cand:
            out.append(cand)
    return out


# --------------------------------------------------------------------------
# Local choice pairs


def gen_choice_pair(cfg: GenConfig, rng: random.Random) -> tuple[Term, Term, HyperEnv]:
    """Two terms checking against the same single-component environment."""
    for _ in range(cfg.max_retries):
        p, g, _ = gen_well_typed(replace(cfg, weights={**cfg.weights, "mix": 0.0}), rng)
        if len(g.components) == 1:
            break
    else:  # pragma: no cover
        raise GeneratorError("no single-component term generated")
    env = g.flat()
    names = sorted(env)
    mode = rng.randrange(3)
    c, cd = "c0", "c0'"
    while c in free_names(p) or cd in free_names(p):
        c, cd = c + "c", cd.rstrip("'") + "c'"
    if mode == 0 and names:
        from .kernel import substitute

        a = rng.choice(names)
        q = New(c, cd, Par(substitute(p, c, a), Link(cd, a)))
    elif mode == 1:
        q = New(c, cd, Par(Close(c, Halt()), Wait(cd, p)))
    else:
        q = p
    return p, q, g


# --------------------------------------------------------------------------
# Raw terms (no typing guarantee)


def random_raw_term(rng: random.Random, size: int = 7, names=("a", "b", "c")) -> Term:
    """Untyped term with at most ``size`` constructor nodes."""
    names = list(names)

    def go(budget: int, scope: list[str]) -> Term:
        pool = names + scope
        if budget <= 1:
            k = rng.randrange(3)
            if k == 0:
                return Halt()
            if k == 1:
                return Absurd(rng.choice(pool))
            return Link(rng.choice(pool), rng.choice(pool))
        kinds = ["new", "new", "pre", "bind", "leaf"]
        if budget >= 3:
            kinds += ["par", "par", "case"]
        k = rng.choice(kinds)
        if k == "leaf":
            return go(1, scope)
        if k == "par":
            b1 = rng.randint(1, budget - 2)
            return Par(go(b1, scope), go(budget - 1 - b1, scope))
        if k == "new":
            i = len(scope)
            x, y = f"x{i}", f"x{i}'"
            return New(x, y, go(budget - 1, scope + [x, y]))
        if k == "case":
            b1 = rng.randint(1, budget - 2)
            return Case(rng.choice(pool), go(b1, scope), go(budget - 1 - b1, scope))
        if k == "bind":
            cls = rng.choice([Out, In, ClientReq, ServerAcc])
            y = f"y{len(scope)}"
            return cls(rng.choice(pool), y, go(budget - 1, scope + [y]))
        cls = rng.choice([Close, Wait, Inl, Inr])
        return cls(rng.choice(pool), go(budget - 1, scope))

    return go(size, [])
