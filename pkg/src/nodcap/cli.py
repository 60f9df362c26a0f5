"""Command-line entry point: ``nodcap {check,outcomes,step,canon,dual,corpus}``."""

from __future__ import annotations

import argparse
import json
import sys

from .checker import check_file
from .congruence import canonicalize
from .dynamics import BudgetExceeded, enumerate_outcomes, find_redexes
from .encodings import build_corpus, verify_entry
from .kernel import dual
from .parser import ParseError, parse_file, parse_type, pretty_term, pretty_type

OK, FAILED, PARSE_ERROR, BUDGET = 0, 1, 2, 3


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_file(fh.read())


def _definition(args):
    src = _load(args.file)
    if args.defn not in src.defs:
        print(f"error: {args.file} has no def named {args.defn}", file=sys.stderr)
        return None
    return src.defs[args.defn]


def cmd_check(args) -> int:
    src = _load(args.file)
    code = OK
    for res in check_file(src):
        if res.ok:
            print(f"PASS {res.name}")
            if args.emit_derivation:
                d = res.derivation
                print(json.dumps(d.to_json(), ensure_ascii=False, indent=2) if args.json else d.pretty(1))
        else:
            code = FAILED
            print(f"FAIL {res.name}: {res.error}")
    return code


def cmd_outcomes(args) -> int:
    term = _definition(args)
    if term is None:
        return FAILED
    try:
        outs = enumerate_outcomes(term, args.max_states)
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        sys.stdout.write(e.partial.to_text())
        return BUDGET
    sys.stdout.write(outs.to_text())
    return OK


def cmd_step(args) -> int:
    term = _definition(args)
    if term is None:
        return FAILED
    redexes = find_redexes(term)
    print(f"{len(redexes)} reducts")
    for label, q in redexes:
        print(f"{label}: {pretty_term(q)}")
    return OK


def cmd_canon(args) -> int:
    term = _definition(args)
    if term is None:
        return FAILED
    print(pretty_term(canonicalize(term)))
    return OK


def cmd_dual(args) -> int:
    print(pretty_type(dual(parse_type(args.type))))
    return OK


def cmd_corpus(args) -> int:
    code = OK
    rows = []
    for name, entry in build_corpus().items():
        try:
            ok, detail = verify_entry(entry, args.max_states)
        except BudgetExceeded as e:
            ok, detail = False, str(e)
        code = code if ok else FAILED
        rows.append((name, entry.expect, "ok" if ok else "MISMATCH", detail))
    widths = [max(len(r[i]) for r in rows + [("entry", "expect", "result", "")]) for i in range(3)]
    print(f"{'entry':<{widths[0]}}  {'expect':<{widths[1]}}  {'result':<{widths[2]}}  detail")
    for r in rows:
        print(f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nodcap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="type check every 'check' declaration of a file")
    p.add_argument("file")
    p.add_argument("--emit-derivation", action="store_true")
    p.add_argument("--json", action="store_true", help="derivations as JSON")
    p.set_defaults(func=cmd_check)

    for name, func, helptext in (
        ("outcomes", cmd_outcomes, "enumerate all outcomes of a definition"),
        ("step", cmd_step, "list the one-step reducts of a definition"),
        ("canon", cmd_canon, "print the canonical form of a definition"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        p.add_argument("--def", dest="defn", required=True, metavar="NAME")
        if name == "outcomes":
            p.add_argument("--max-states", type=int, default=100_000, metavar="N")
        p.set_defaults(func=func)

    p = sub.add_parser("dual", help="print the dual of a type")
    p.add_argument("type")
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("corpus", help="run the shipped examples against their manifest")
    p.add_argument("--max-states", type=int, default=100_000, metavar="N")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return PARSE_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
