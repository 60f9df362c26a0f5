"""Reduction over canonical forms and exhaustive outcome enumeration.

Redexes only occur inside restriction groups at the top of a canonical form:
reduction never goes under a prefix, and congruence (the γ-≡ rule) is
realized by canonicalizing before and after each step.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .congruence import canonicalize, components, par_all
from .kernel import (
    Absurd,
    Case,
    ClientReq,
    Close,
    In,
    Inl,
    Inr,
    Link,
    New,
    Out,
    ServerAcc,
    Term,
    Wait,
    free_names,
    fresh,
    substitute,
)
from .parser import pretty_term

KAPPA = "κ-link"
BETA_TENSOR = "β⊗⅋"
BETA_UNIT = "β1⊥"
BETA_INL = "β⊕&₁"
BETA_INR = "β⊕&₂"
BETA_STAR = "β⋆"


@dataclass(frozen=True, order=True)
class StepLabel:
    rule: str
    endpoints: tuple[str, str]

    def __str__(self):
        return f"{self.rule} {self.endpoints[0]} {self.endpoints[1]}"


def _blocks(c: Term):
    """Split a canonical form into (binders, components) blocks."""
    out = []
    for blk in components(c):
        binders = []
        while type(blk) is New:
            binders.append((blk.x, blk.y))
            blk = blk.body
        out.append((binders, components(blk)))
    return out


def _assemble(blocks) -> Term:
    parts = []
    for binders, comps in blocks:
        t = par_all(comps)
        for x, y in reversed(binders):
            t = New(x, y, t)
        parts.append(t)
    return par_all(parts)


def _subject(p: Term) -> tuple[str, ...]:
    if type(p) is Link:
        return (p.x, p.y)
    return (p.x,)


def _interact(a: Term, b: Term, x: str, xd: str, avoid: set[str]):
    """Contract ``a`` acting on ``x`` against ``b`` acting on ``xd``.

    Returns (rule, new binders to add, replacement components, keep binder)
    or None when the two actions do not match.
    """
    ta, tb = type(a), type(b)
    if ta is Close and tb is Wait:
        return BETA_UNIT, [], [a.body, b.body], False
    if ta is Inl and tb is Case:
        return BETA_INL, [], [a.body, b.left], True
    if ta is Inr and tb is Case:
        return BETA_INR, [], [a.body, b.right], True
    pair = {(Out, In): BETA_TENSOR, (ClientReq, ServerAcc): BETA_STAR}.get((ta, tb))
    if pair is None:
        return None
    y = fresh(a.y, avoid)
    yd = fresh(b.y + "'", avoid | {y})
    pa = substitute(a.body, y, a.y)
    pb = substitute(b.body, yd, b.y)
    return pair, [(y, yd)], [pa, pb], True


def find_redexes(p: Term) -> list[tuple[StepLabel, Term]]:
    """All one-step reducts of ``p`` with their labels, canonicalized."""
    c = canonicalize(p)
    blocks = _blocks(c)
    out = set()
    for bi, (binders, comps) in enumerate(blocks):
        # fresh binders go innermost, so they only need to avoid names in scope
        avoid = set(free_names(c)).union(*binders)
        for b_index, (x, xd) in enumerate(binders):
            others_b = binders[:b_index] + binders[b_index + 1 :]
            for i, ci in enumerate(comps):
                # κ-link: a link on a bound endpoint forwards the other side
                if type(ci) is Link:
                    for end, other in ((x, xd), (xd, x)):
                        if end not in (ci.x, ci.y):
                            continue
                        w = ci.y if ci.x == end else ci.x
                        rest = comps[:i] + comps[i + 1 :]
                        if w == other or any(end in free_names(r) for r in rest):
                            continue
                        rest = [substitute(r, w, other) for r in rest]
                        new = blocks[:bi] + [(others_b, rest)] + blocks[bi + 1 :]
                        out.add((StepLabel(KAPPA, (x, xd)), canonicalize(_assemble(new))))
                    continue
                if type(ci) is Absurd or x not in _subject(ci):
                    continue
                for j, cj in enumerate(comps):
                    if j == i or type(cj) is Link or xd not in _subject(cj):
                        continue
                    for a, b, ea, eb in ((ci, cj, x, xd), (cj, ci, xd, x)):
                        if a.x != ea or b.x != eb:
                            continue
                        res = _interact(a, b, ea, eb, avoid)
                        if res is None:
                            continue
                        rule, extra, repl, keep = res
                        rest = [r for k, r in enumerate(comps) if k not in (i, j)] + repl
                        nb = (binders if keep else others_b) + extra
                        new = blocks[:bi] + [(nb, rest)] + blocks[bi + 1 :]
                        out.add((StepLabel(rule, (x, xd)), canonicalize(_assemble(new))))
    return sorted(out, key=lambda lt: (pretty_term(lt[1]), lt[0]))


def step(p: Term) -> list[Term]:
    seen, out = set(), []
    for _, t in find_redexes(p):
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def is_canonical(p: Term) -> bool:
    """No top-level cut can fire: no bound link, no two components meeting on a binder."""
    for binders, comps in _blocks(canonicalize(p)):
        for x, xd in binders:
            acting = [set(_subject(c)) for c in comps if type(c) is not Absurd]
            for i, c in enumerate(comps):
                if type(c) is Link and ({c.x, c.y} & {x, xd}):
                    return False
            on_x = [k for k, s in enumerate(acting) if x in s]
            on_xd = [k for k, s in enumerate(acting) if xd in s]
            if any(k != m for k in on_x for m in on_xd):
                return False
    return True


_TAGS = {
    Link: "link",
    Absurd: "absurd",
    Close: "close",
    Wait: "wait",
    Out: "out",
    In: "in",
    Inl: "inl",
    Inr: "inr",
    Case: "case",
    ClientReq: "req",
    ServerAcc: "acc",
}


def _tag(c: Term) -> str:
    tag = _TAGS[type(c)]
    if type(c) in (Inl, Inr):
        # a run of selections on one endpoint reads as one observable choice
        nxt = c.body
        while type(nxt) in (Inl, Inr) and nxt.x == c.x:
            tag += "." + _TAGS[type(nxt)]
            nxt = nxt.body
    return tag


def fingerprint(p: Term) -> dict[str, str]:
    """Free endpoint of each top-level component mapped to its top action."""
    free = free_names(p)
    out: dict[str, str] = {}
    for _, comps in _blocks(p):
        for c in comps:
            for x in _subject(c):
                if x in free:
                    tag = _tag(c)
                    out[x] = tag if x not in out else "|".join(sorted((out[x], tag)))
    return dict(sorted(out.items()))


# --------------------------------------------------------------------------
# Enumeration


@dataclass
class Outcome:
    term: Term
    trace: list[StepLabel]
    fingerprint: dict[str, str]

    @property
    def printed(self) -> str:
        return pretty_term(self.term)


@dataclass
class OutcomeSet:
    outcomes: list[Outcome] = field(default_factory=list)
    states_explored: int = 0
    max_frontier: int = 0
    complete: bool = True

    def __len__(self):
        return len(self.outcomes)

    def terms(self) -> set[Term]:
        return {o.term for o in self.outcomes}

    def to_text(self) -> str:
        lines = [f"{len(self.outcomes)} outcomes"]
        lines.append(f"states explored: {self.states_explored}, max frontier: {self.max_frontier}")
        for k, o in enumerate(self.outcomes, 1):
            fp = ", ".join(f"{n} -> {t}" for n, t in o.fingerprint.items()) or "(none)"
            trace = " ; ".join(map(str, o.trace)) or "(no steps)"
            lines += ["", f"outcome {k}: {o.printed}", f"  fingerprint: {fp}", f"  trace: {trace}"]
        return "\n".join(lines) + "\n"


class BudgetExceeded(Exception):
    def __init__(self, message: str, partial: OutcomeSet):
        super().__init__(message)
        self.partial = partial


def enumerate_outcomes(p: Term, max_states: int = 100_000) -> OutcomeSet:
    """Breadth-first search of the reduction graph; terminal states are outcomes."""
    if max_states < 1:
        raise ValueError("max_states must be positive")
    start = canonicalize(p)
    parent: dict[Term, tuple[Term, StepLabel] | None] = {start: None}
    queue = deque([start])
    terminal = []
    max_frontier = 1
    while queue:
        max_frontier = max(max_frontier, len(queue))
        cur = queue.popleft()
        succ = find_redexes(cur)
        if not succ:
            terminal.append(cur)
        for label, nxt in succ:
            if nxt in parent:
                continue
            parent[nxt] = (cur, label)
            if len(parent) > max_states:
                partial = _collect(terminal, parent, len(parent), max_frontier, complete=False)
                raise BudgetExceeded(f"state budget of {max_states} exceeded", partial)
            queue.append(nxt)
    return _collect(terminal, parent, len(parent), max_frontier)


def _collect(terminal, parent, explored, max_frontier, complete=True) -> OutcomeSet:
    outs = []
    for t in terminal:
        trace = []
        cur = t
        while parent[cur] is not None:
            cur, label = parent[cur]
            trace.append(label)
        trace.reverse()
        outs.append(Outcome(t, trace, fingerprint(t)))
    outs.sort(key=lambda o: o.printed)
    return OutcomeSet(outs, explored, max_frontier, complete)
