"""Concrete ASCII syntax for types, terms, hyper-environments and ``.ncp`` files.

Types::

    1  bot  0  top          units
    ?[n] A   ![n] A   ~A    client pool, server, dual (prefix, tightest)
    A * B    A % B          tensor, par
    A + B    A & B          plus, with (loosest)

Binary operators associate to the right.

Terms::

    0   x<->y   nu x x'. P   P | Q   x[y]. P   x(y). P   x[]. P   x(). P
    x[inl]. P   x[inr]. P   case x { P ; Q }   absurd x
    x*(y). P    x*[y]. P    x<y>. P

Prefixes bind tighter than ``|``, which is right-associative.  ``x<y>. P`` is
unbound output and is desugared on the spot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import kernel as k
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
)

KEYWORDS = {"nu", "case", "absurd", "inl", "inr", "bot", "top", "def", "check"}


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<name>[a-zA-Z][a-zA-Z0-9_']*)
  | (?P<sym><->|::|[()\[\]{}.|;*,:=?!~%+&<>])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind in ("num", "name", "sym"):
            if kind == "name" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, off=1) -> Token:
        return self.toks[min(self.i + off, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        found = t.text or "end of input"
        raise ParseError(f"{msg} (found {found!r})", t.line, t.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "kw") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        if self.tok.kind != "name":
            self.error("expected a name")
        t = self.tok
        self.i += 1
        return t.text

    def done(self):
        if self.tok.kind != "eof":
            self.error("unexpected input")

    # -- types
    def type_(self) -> TypeExpr:
        left = self.type_mult()
        if self.at("+") or self.at("&"):
            op = self.tok.text
            self.i += 1
            right = self.type_()
            return Plus(left, right) if op == "+" else With(left, right)
        return left

    def type_mult(self) -> TypeExpr:
        left = self.type_prefix()
        if self.at("*") or self.at("%"):
            op = self.tok.text
            self.i += 1
            right = self.type_mult()
            return Tensor(left, right) if op == "*" else Parr(left, right)
        return left

    def type_prefix(self) -> TypeExpr:
        t = self.tok
        if self.at("?") or self.at("!"):
            self.i += 1
            self.expect("[")
            if self.tok.kind != "num":
                self.error("expected an index")
            n = int(self.tok.text)
            if n < 1:
                self.error("index must be positive")
            self.i += 1
            self.expect("]")
            body = self.type_prefix()
            return Client(n, body) if t.text == "?" else Server(n, body)
        if self.at("~"):
            self.i += 1
            return k.dual(self.type_prefix())
        return self.type_atom()

    def type_atom(self) -> TypeExpr:
        t = self.tok
        if t.kind == "num" and t.text in ("0", "1"):
            self.i += 1
            return One() if t.text == "1" else Zero()
        if t.kind == "kw" and t.text in ("bot", "top"):
            self.i += 1
            return Bot() if t.text == "bot" else Top()
        if self.at("("):
            self.i += 1
            a = self.type_()
            self.expect(")")
            return a
        self.error("expected a type")

    # -- terms
    def term(self) -> Term:
        t = self.tok
        left = self.term_prefix()
        if self.at("|"):
            self.i += 1
            right = self.term()
            return Par(left, right, pos=(t.line, t.col))
        return left

    def term_prefix(self) -> Term:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            if t.text != "0":
                self.error("expected a term")
            self.i += 1
            return Halt(pos=pos)
        if self.at("("):
            self.i += 1
            p = self.term()
            self.expect(")")
            return p
        if self.at("nu"):
            self.i += 1
            x = self.name()
            y = self.name()
            if x == y:
                self.error("restriction endpoints must differ", t)
            self.expect(".")
            return New(x, y, self.term_prefix(), pos=pos)
        if self.at("case"):
            self.i += 1
            x = self.name()
            self.expect("{")
            left = self.term()
            self.expect(";")
            right = self.term()
            self.expect("}")
            return Case(x, left, right, pos=pos)
        if self.at("absurd"):
            self.i += 1
            return Absurd(self.name(), pos=pos)
        if t.kind != "name":
            self.error("expected a term")
        x = self.name()
        if self.at("<->"):
            self.i += 1
            return Link(x, self.name(), pos=pos)
        if self.at("<"):
            self.i += 1
            y = self.name()
            self.expect(">")
            self.expect(".")
            from .encodings import desugar_unbound_output

            return desugar_unbound_output(x, y, self.term_prefix(), pos=pos)
        if self.at("*"):
            self.i += 1
            if self.at("("):
                self.i += 1
                y = self.name()
                self.expect(")")
                self.expect(".")
                return ClientReq(x, y, self.term_prefix(), pos=pos)
            self.expect("[")
            y = self.name()
            self.expect("]")
            self.expect(".")
            return ServerAcc(x, y, self.term_prefix(), pos=pos)
        if self.at("["):
            self.i += 1
            if self.at("]"):
                self.i += 1
                self.expect(".")
                return Close(x, self.term_prefix(), pos=pos)
            if self.at("inl") or self.at("inr"):
                which = self.tok.text
                self.i += 1
                self.expect("]")
                self.expect(".")
                cls = Inl if which == "inl" else Inr
                return cls(x, self.term_prefix(), pos=pos)
            y = self.name()
            self.expect("]")
            self.expect(".")
            return Out(x, y, self.term_prefix(), pos=pos)
        if self.at("("):
            self.i += 1
            if self.at(")"):
                self.i += 1
                self.expect(".")
                return Wait(x, self.term_prefix(), pos=pos)
            y = self.name()
            self.expect(")")
            self.expect(".")
            return In(x, y, self.term_prefix(), pos=pos)
        self.error(f"expected an action on {x}")

    # -- hyper-environments
    def hyperenv(self) -> HyperEnv:
        if self.at("."):
            self.i += 1
            return HyperEnv()
        comps = [self.env()]
        while self.at(";"):
            self.i += 1
            comps.append(self.env())
        seen: dict[str, None] = {}
        for comp in comps:
            for name, _ in comp:
                if name in seen:
                    raise ParseError(f"duplicate endpoint {name}", *self._pos_of(name))
                seen[name] = None
        return HyperEnv(tuple(comps))

    def env(self):
        bindings = [self.binding()]
        while self.at(","):
            self.i += 1
            bindings.append(self.binding())
        return tuple(bindings)

    def binding(self):
        t = self.tok
        x = self.name()
        self._positions.setdefault(x, []).append((t.line, t.col))
        self.expect(":")
        return (x, self.type_())

    _positions: dict

    def _pos_of(self, name):
        return self._positions[name][-1]


def _parser(text: str) -> _Parser:
    p = _Parser(text)
    p._positions = {}
    return p


def parse_type(text: str) -> TypeExpr:
    p = _parser(text)
    a = p.type_()
    p.done()
    return a


def parse_term(text: str) -> Term:
    p = _parser(text)
    t = p.term()
    p.done()
    return t


def parse_hyperenv(text: str) -> HyperEnv:
    p = _parser(text)
    g = p.hyperenv()
    p.done()
    return g


# --------------------------------------------------------------------------
# Source files


@dataclass
class Def:
    name: str
    term: Term
    line: int


@dataclass
class Check:
    name: str
    env: HyperEnv
    line: int


@dataclass
class SourceFile:
    decls: list = field(default_factory=list)

    @property
    def defs(self) -> dict[str, Term]:
        return {d.name: d.term for d in self.decls if isinstance(d, Def)}

    @property
    def checks(self) -> list[Check]:
        return [d for d in self.decls if isinstance(d, Check)]


def parse_file(text: str) -> SourceFile:
    """Parse a ``.ncp`` source file of ``def`` and ``check`` declarations."""
    p = _parser(text)
    out = SourceFile()
    names: set[str] = set()
    while p.tok.kind != "eof":
        t = p.tok
        if p.at("def"):
            p.i += 1
            nt = p.tok
            name = p.name()
            if name in names:
                p.error(f"duplicate definition {name}", nt)
            p.expect("=")
            out.decls.append(Def(name, p.term(), t.line))
            names.add(name)
        elif p.at("check"):
            p.i += 1
            nt = p.tok
            name = p.name()
            if name not in names:
                p.error(f"check refers to undefined def {name}", nt)
            p.expect("::")
            out.decls.append(Check(name, p.hyperenv(), t.line))
        else:
            p.error("expected 'def' or 'check'")
    return out


# --------------------------------------------------------------------------
# Pretty printing

_PREC_ADD, _PREC_MUL, _PREC_PRE = 1, 2, 3
_OPS = {Tensor: ("*", _PREC_MUL), Parr: ("%", _PREC_MUL), Plus: ("+", _PREC_ADD), With: ("&", _PREC_ADD)}
_ATOMS = {One: "1", Bot: "bot", Zero: "0", Top: "top"}


def _type_prec(a: TypeExpr) -> int:
    op = _OPS.get(type(a))
    return op[1] if op else _PREC_PRE


def pretty_type(a: TypeExpr) -> str:
    cls = type(a)
    if cls in _ATOMS:
        return _ATOMS[cls]
    if cls in _OPS:
        sym, prec = _OPS[cls]
        left = pretty_type(a.left)
        if _type_prec(a.left) <= prec:
            left = f"({left})"
        right = pretty_type(a.right)
        if _type_prec(a.right) < prec:
            right = f"({right})"
        return f"{left} {sym} {right}"
    if cls in (Client, Server):
        body = pretty_type(a.body)
        if _type_prec(a.body) < _PREC_PRE:
            body = f"({body})"
        mark = "?" if cls is Client else "!"
        return f"{mark}[{a.n}] {body}"
    return str(a)  # checker metavariables


def pretty_term(p: Term) -> str:
    # terms are immutable; cache the rendering on the node
    s = p.__dict__.get("_pp")
    if s is None:
        s = _pretty(p)
        object.__setattr__(p, "_pp", s)
    return s


def _pretty(p: Term) -> str:
    cls = type(p)
    if cls is Par:
        left = pretty_term(p.left)
        if type(p.left) is Par:
            left = f"({left})"
        return f"{left} | {pretty_term(p.right)}"
    return _pretty_prefix(p)


def _body(p: Term) -> str:
    s = pretty_term(p)
    return f"({s})" if type(p) is Par else s


def _pretty_prefix(p: Term) -> str:
    cls = type(p)
    if cls is Halt:
        return "0"
    if cls is Link:
        return f"{p.x}<->{p.y}"
    if cls is Absurd:
        return f"absurd {p.x}"
    if cls is New:
        return f"nu {p.x} {p.y}. {_body(p.body)}"
    if cls is Case:
        return f"case {p.x} {{ {pretty_term(p.left)} ; {pretty_term(p.right)} }}"
    head = _HEADS[cls].format(x=p.x, y=getattr(p, "y", ""))
    return f"{head}. {_body(p.body)}"


_HEADS = {
    Out: "{x}[{y}]",
    In: "{x}({y})",
    Close: "{x}[]",
    Wait: "{x}()",
    Inl: "{x}[inl]",
    Inr: "{x}[inr]",
    ClientReq: "{x}*({y})",
    ServerAcc: "{x}*[{y}]",
}


def pretty_env(comp) -> str:
    items = comp.items() if isinstance(comp, dict) else comp
    return ", ".join(f"{n}: {pretty_type(a)}" for n, a in items)


def pretty_hyperenv(g: HyperEnv) -> str:
    if not g.components:
        return "."
    return " ; ".join(pretty_env(c) for c in g.components)
