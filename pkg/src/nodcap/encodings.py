"""Derived forms and the shipped example corpus."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .kernel import (
    Case,
    Client,
    ClientReq,
    Close,
    Halt,
    HyperEnv,
    Inl,
    Inr,
    Link,
    New,
    Out,
    Par,
    Server,
    ServerAcc,
    Term,
    TypeExpr,
    Wait,
    all_names,
    dual,
    fresh,
)


class EncodingError(Exception):
    pass


def desugar_unbound_output(x: str, y: str, p: Term, pos=None) -> Term:
    """``x<y>.P`` as ``x[z].(y<->z | P)`` with ``z`` fresh."""
    z = fresh("z", {x, y} | all_names(p))
    return Out(x, z, Par(Link(y, z), p), pos=pos)


def _supply(avoid: set[str]):
    def take(base: str) -> str:
        name = fresh(base, avoid)
        avoid.add(name)
        return name

    return take


def encode_local_choice(p: Term, q: Term, avoid=()) -> Term:
    """Non-deterministic choice between ``p`` and ``q`` via a client race.

    Two clients select ``inl`` and ``inr``; the server reads the first
    request to pick a branch and discards the second through a unit cut.
    """
    take = _supply(set(avoid) | all_names(p) | all_names(q))
    x, xd, y, z, yd, zd, w, wd = (take(b) for b in ("x", "x'", "y", "z", "y'", "z'", "w", "w'"))

    def branch(body: Term) -> Term:
        discard = Case(zd, Wait(zd, Close(w, Halt())), Wait(zd, Close(w, Halt())))
        return Wait(yd, New(w, wd, Par(discard, Wait(wd, body))))

    clients = Par(
        ClientReq(x, y, Inl(y, Close(y, Halt()))),
        ClientReq(x, z, Inr(z, Close(z, Halt()))),
    )
    server = ServerAcc(xd, yd, ServerAcc(xd, zd, Case(yd, branch(p), branch(q))))
    return New(x, xd, Par(clients, server))


def _check_against(term: Term, env: dict[str, TypeExpr], what: str) -> None:
    from .checker import TypeCheckError, check

    try:
        check(term, HyperEnv.of(env))
    except TypeCheckError as e:
        raise EncodingError(f"index mismatch: {what} does not check: {e}") from None


def leftover_cut(
    p: Term,
    q: Term,
    x: str,
    x_dual: str,
    w: str,
    n: int,
    m: int,
    payload: TypeExpr,
    gamma: dict[str, TypeExpr] | None = None,
    delta: dict[str, TypeExpr] | None = None,
) -> tuple[Term, HyperEnv]:
    """Cut ``n + m`` clients against ``n`` servers, forwarding the rest to ``w``.

    ``p`` must check with ``x: ?[n+m] payload`` and ``q`` with
    ``x_dual: ![n] ~payload``.  The result checks against
    ``gamma, delta, w: ?[m] payload``.
    """
    gamma, delta = dict(gamma or {}), dict(delta or {})
    _check_against(p, {**gamma, x: Client(n + m, payload)}, "client side")
    _check_against(q, {**delta, x_dual: Server(n, dual(payload))}, "server side")
    term = New(x, x_dual, Par(p, Par(q, Link(x_dual, w))))
    return term, HyperEnv.of({**gamma, **delta, w: Client(m, payload)})


def leftover_cut_servers(
    p: Term,
    q: Term,
    x: str,
    x_dual: str,
    w: str,
    n: int,
    m: int,
    payload: TypeExpr,
    gamma: dict[str, TypeExpr] | None = None,
    delta: dict[str, TypeExpr] | None = None,
) -> tuple[Term, HyperEnv]:
    """Mirror of :func:`leftover_cut`: ``n`` clients, ``n + m`` servers."""
    gamma, delta = dict(gamma or {}), dict(delta or {})
    _check_against(p, {**gamma, x: Client(n, payload)}, "client side")
    _check_against(q, {**delta, x_dual: Server(n + m, dual(payload))}, "server side")
    term = New(x, x_dual, Par(Par(p, Link(x, w)), q))
    return term, HyperEnv.of({**gamma, **delta, w: Server(m, dual(payload))})


# --------------------------------------------------------------------------
# Corpus


@dataclass
class CorpusEntry:
    name: str
    file: str
    source: str
    term: Term
    env: HyperEnv
    expect: str  # "well-typed" or "ill-typed"
    error_kind: str | None = None
    outcome_count: int | None = None
    fingerprints: list[dict[str, str]] = field(default_factory=list)


def corpus_dir():
    return resources.files("nodcap") / "corpus"


def build_corpus() -> dict[str, CorpusEntry]:
    """Load every manifest entry with its parsed term and environment."""
    from .parser import parse_file

    root = corpus_dir()
    manifest = json.loads((root / "manifest.json").read_text())
    out = {}
    for item in manifest["entries"]:
        text = (root / item["file"]).read_text()
        src = parse_file(text)
        checks = {c.name: c for c in src.checks}
        out[item["name"]] = CorpusEntry(
            name=item["name"],
            file=item["file"],
            source=text,
            term=src.defs[item["name"]],
            env=checks[item["name"]].env,
            expect=item["expect"],
            error_kind=item.get("error_kind"),
            outcome_count=item.get("outcome_count"),
            fingerprints=item.get("fingerprints", []),
        )
    return out


def verify_entry(entry: CorpusEntry, max_states: int = 100_000) -> tuple[bool, str]:
    """Check one corpus entry against its stored expectation."""
    from .checker import TypeCheckError, check
    from .dynamics import enumerate_outcomes

    try:
        check(entry.term, entry.env)
    except TypeCheckError as e:
        if entry.expect == "ill-typed" and e.kind == entry.error_kind:
            return True, f"rejected: {e.kind}"
        return False, f"unexpected type error: {e}"
    if entry.expect == "ill-typed":
        return False, f"expected {entry.error_kind!r} but the term checks"
    outs = enumerate_outcomes(entry.term, max_states)
    fps = sorted(map(_fp_key, (o.fingerprint for o in outs.outcomes)))
    want = sorted(map(_fp_key, entry.fingerprints))
    if entry.outcome_count is not None and len(outs) != entry.outcome_count:
        return False, f"{len(outs)} outcomes, expected {entry.outcome_count}"
    if entry.fingerprints and fps != want:
        return False, f"fingerprints {fps} differ from {want}"
    return True, f"{len(outs)} outcomes, {outs.states_explored} states"


def _fp_key(fp: dict) -> tuple:
    return tuple(sorted(fp.items()))
