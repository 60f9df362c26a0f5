"""Enumerate the outcomes of the shipped race examples and the local choice encoding.

Run with ``python3 demos/race_outcomes.py``.
"""

from nodcap.checker import check
from nodcap.dynamics import enumerate_outcomes
from nodcap.encodings import build_corpus

corpus = build_corpus()
for name in ("Race2", "Race3", "LocalChoice"):
    entry = corpus[name]
    check(entry.term, entry.env)
    outs = enumerate_outcomes(entry.term)
    print(f"== {name}: {len(outs)} outcomes, {outs.states_explored} states")
    for o in outs.outcomes:
        fp = ", ".join(f"{k}->{v}" for k, v in o.fingerprint.items())
        print(f"  {fp:<40} after {len(o.trace)} steps")
