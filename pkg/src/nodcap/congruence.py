"""Structural congruence: canonical forms, equivalence, and a rewrite oracle.

A canonical form is a parallel composition of blocks.  A block is either a
single action-prefixed process or a restriction group: a chain of binders
over the parallel components connected by those binders.  Bound names get
labels derived from their nesting depth, so the result is independent of
the original bound names.  Components are sorted by their printed form;
where the sort leaves ties that matter (symmetric components, binders with
the same connection pattern), every tie-breaking labelling is tried and the
one with the least printed form wins.
"""

from __future__ import annotations

import functools
import itertools
import re
from collections import deque

from .kernel import (
    BINDING_PREFIXES,
    SIMPLE_PREFIXES,
    Absurd,
    Case,
    Halt,
    Link,
    New,
    Par,
    Term,
    all_names,
    alpha_key,
    free_names,
    fresh,
    rename,
    substitute,
    term_size,
)

# bound on tie-breaking candidates per restriction group
MAX_CANDIDATES = 2000


class OracleBudgetExceeded(Exception):
    def __init__(self, message: str, partial: set):
        super().__init__(message)
        self.partial = partial


def _printed(p: Term) -> str:
    from .parser import pretty_term

    return pretty_term(p)


def label_prefix(names) -> str:
    """Shortest ``v``-run that no free name uses as a label stem."""
    p = "v"
    while any(re.match(re.escape(p) + r"\d", n) for n in names):
        p += "v"
    return p


def canonicalize(p: Term) -> Term:
    """Deterministic representative of the congruence class of ``p``."""
    if p.__dict__.get("_canonical"):
        return p
    c = _canon(p, 0, label_prefix(free_names(p)))
    object.__setattr__(c, "_canonical", True)
    return c


def congruent(p: Term, q: Term) -> bool:
    return canonicalize(p) == canonicalize(q)


def par_all(items) -> Term:
    items = list(items)
    if not items:
        return Halt()
    out = items[-1]
    for it in reversed(items[:-1]):
        out = Par(it, out)
    return out


def components(p: Term) -> list[Term]:
    """Top-level parallel components (Halt dropped)."""
    if type(p) is Par:
        return components(p.left) + components(p.right)
    if type(p) is Halt:
        return []
    return [p]


# --------------------------------------------------------------------------
# Flattening


def _soup(p: Term, binders: list, comps: list, env: dict) -> None:
    """Collect binders and components, renaming binders apart.

    Internal names start with ``#`` and so never clash with source names.
    """
    cls = type(p)
    if cls is Halt:
        return
    if cls is Par:
        _soup(p.left, binders, comps, env)
        _soup(p.right, binders, comps, env)
        return
    if cls is New:
        k = len(binders)
        u, v = f"#{k}", f"#{k}'"
        binders.append((u, v))
        _soup(p.body, binders, comps, {**env, p.x: u, p.y: v})
        return
    comps.append(rename(p, env))


@functools.lru_cache(maxsize=200_000)
def _canon(p: Term, depth: int, pre: str) -> Term:
    cls = type(p)
    if cls not in (Par, New, Halt):
        return _canon_action(p, depth, pre)
    binders: list = []
    comps: list = []
    _soup(p, binders, comps, {})
    fns = [free_names(c) for c in comps]
    live = [(u, v) for u, v in binders if any(u in f or v in f for f in fns)]
    # group components connected through binders
    parent = list(range(len(comps)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for u, v in live:
        users = [i for i, f in enumerate(fns) if u in f or v in f]
        for i in users[1:]:
            parent[find(i)] = find(users[0])
        owner[(u, v)] = find(users[0])
    groups: dict[int, tuple[list, list]] = {}
    for i, c in enumerate(comps):
        groups.setdefault(find(i), ([], []))[1].append(c)
    for b in live:
        groups[find(owner[b])][0].append(b)
    blocks = [_canon_group(tuple(bs), tuple(cs), depth, pre) for bs, cs in groups.values()]
    blocks.sort(key=_printed)
    return par_all(blocks)


def _canon_action(p: Term, depth: int, pre: str) -> Term:
    cls = type(p)
    if cls is Link:
        x, y = sorted((p.x, p.y))
        return Link(x, y)
    if cls is Absurd:
        return Absurd(p.x)
    if cls is Case:
        return Case(p.x, _canon(p.left, depth + 1, pre), _canon(p.right, depth + 1, pre))
    if cls in SIMPLE_PREFIXES:
        return cls(p.x, _canon(p.body, depth + 1, pre))
    if cls in BINDING_PREFIXES:
        label = f"{pre}{depth}"
        body = substitute(p.body, label, p.y)
        return cls(p.x, label, _canon(body, depth + 1, pre))
    raise TypeError(f"not an action: {p!r}")


def _canon_group(binders: tuple, comps: tuple, depth: int, pre: str) -> Term:
    if not binders:
        (c,) = comps
        return _canon(c, depth, pre)
    hide = {}
    for u, v in binders:
        hide[u], hide[v] = "#", "#'"
    keys = [_printed(_canon(rename(c, hide), depth + 1, pre)) for c in comps]
    order = sorted(range(len(comps)), key=lambda i: keys[i])
    classes = [list(g) for _, g in itertools.groupby(order, key=lambda i: keys[i])]
    fns = [free_names(c) for c in comps]

    def signature(b, pos):
        # where the binder's two ends occur, in the chosen component order
        u, v = b
        return (
            sorted(pos[i] for i in range(len(comps)) if u in fns[i]),
            sorted(pos[i] for i in range(len(comps)) if v in fns[i]),
        )

    best, best_s = None, None
    count = 0
    for comp_perm in itertools.product(*(itertools.permutations(c) for c in classes)):
        seq = [i for cl in comp_perm for i in cl]
        key = functools.partial(signature, pos={i: k for k, i in enumerate(seq)})
        border = sorted(binders, key=key)
        bclasses = [list(g) for _, g in itertools.groupby(border, key=key)]
        for bperm in itertools.product(*(itertools.permutations(c) for c in bclasses)):
            blist = [b for cl in bperm for b in cl]
            mapping = {}
            for i, (u, v) in enumerate(blist):
                mapping[u] = f"{pre}{depth}_{i}"
                mapping[v] = f"{pre}{depth}_{i}'"
            cs = sorted(
                (_canon(rename(comps[i], mapping), depth + 1, pre) for i in seq),
                key=_printed,
            )
            term = par_all(cs)
            for i in reversed(range(len(blist))):
                term = New(f"{pre}{depth}_{i}", f"{pre}{depth}_{i}'", term)
            s = _printed(term)
            if best_s is None or s < best_s:
                best, best_s = term, s
            count += 1
            if count >= MAX_CANDIDATES:
                return best
    return best


# --------------------------------------------------------------------------
# Rewrite oracle


def _axiom_steps(p: Term):
    """Terms reachable from ``p`` by one congruence axiom at the root."""
    cls = type(p)
    if cls is Link:
        yield Link(p.y, p.x)
    if cls is Par:
        yield Par(p.right, p.left)
        if type(p.right) is Par:
            yield Par(Par(p.left, p.right.left), p.right.right)
        if type(p.left) is Par:
            yield Par(p.left.left, Par(p.left.right, p.right))
        if type(p.right) is Halt:
            yield p.left
        if type(p.right) is New:
            n = p.right
            x, y, body = n.x, n.y, n.body
            fl = free_names(p.left)
            if x in fl or y in fl:
                avoid = fl | all_names(body)
                x2 = fresh(x, avoid)
                y2 = fresh(y, avoid | {x2})
                body = rename(body, {x: x2, y: y2})
                x, y = x2, y2
            yield New(x, y, Par(p.left, body))
    if cls is New:
        b = p.body
        if type(b) is Halt:
            yield Halt()
        if type(b) is New:
            inner = b
            # the outer binder must not be captured by the swapped order
            if inner.x not in (p.x, p.y) and inner.y not in (p.x, p.y):
                yield New(inner.x, inner.y, New(p.x, p.y, inner.body))
        if type(b) is Par and not ({p.x, p.y} & free_names(b.left)):
            yield Par(b.left, New(p.x, p.y, b.right))
        # derived: νxx'.P ≡ νxx'.(P|0) ≡ P | νxx'.0 ≡ P | 0 ≡ P
        if not ({p.x, p.y} & free_names(b)):
            yield b
    # expansions
    yield Par(p, Halt())
    n = fresh("n", all_names(p))
    yield New(n, n + "'", p)


def _one_step(p: Term):
    yield from _axiom_steps(p)
    cls = type(p)
    if cls is Par:
        for l2 in _one_step(p.left):
            yield Par(l2, p.right)
        for r2 in _one_step(p.right):
            yield Par(p.left, r2)
    elif cls is New:
        for b2 in _one_step(p.body):
            yield New(p.x, p.y, b2)
    elif cls is Case:
        for l2 in _one_step(p.left):
            yield Case(p.x, l2, p.right)
        for r2 in _one_step(p.right):
            yield Case(p.x, p.left, r2)
    elif cls in SIMPLE_PREFIXES:
        for b2 in _one_step(p.body):
            yield cls(p.x, b2)
    elif cls in BINDING_PREFIXES:
        for b2 in _one_step(p.body):
            yield cls(p.x, p.y, b2)


def rewrite_closure(p: Term, max_size: int = 200_000, slack: int = 0, size_limit: int | None = None) -> set[Term]:
    """All terms reachable by congruence axioms in any context, up to alpha.

    Besides the axioms, dead-binder elimination and introduction are single
    steps; each is a fixed four-step chain of axioms that would otherwise
    need two extra nodes of headroom.  Terms are kept only while their size
    stays within ``size_limit`` (default: size of ``p`` plus ``slack``).  Raises
    :class:`OracleBudgetExceeded` once more than ``max_size`` classes are found.
    """
    limit = size_limit if size_limit is not None else term_size(p) + slack
    start = alpha_key(p)
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in _one_step(cur):
            if term_size(nxt) > limit:
                continue
            k = alpha_key(nxt)
            if k in seen:
                continue
            seen.add(k)
            if len(seen) > max_size:
                raise OracleBudgetExceeded(f"oracle budget exceeded ({max_size} terms)", seen)
            queue.append(k)
    return seen


def in_closure(q: Term, closure: set[Term]) -> bool:
    return alpha_key(q) in closure
