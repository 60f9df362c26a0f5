"""Check preservation, progress and termination on random well-typed terms.

Usage: python3 demos/metatheory_sweep.py [N] [SEED]
"""

import sys
import time

from nodcap.checker import TypeCheckError, check, cut_measure
from nodcap.congruence import canonicalize
from nodcap.dynamics import enumerate_outcomes, is_canonical, step
from nodcap.generators import GenConfig, gen_population
from nodcap.parser import pretty_term

n = int(sys.argv[1]) if len(sys.argv) > 1 else 500
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

t0 = time.perf_counter()
pop = gen_population(n, GenConfig(seed=seed))
stuck, broken, too_long = [], [], []
for p, g, d in pop:
    if not (is_canonical(p) or step(p)):
        stuck.append(p)
    for q in step(p):
        try:
            check(canonicalize(q), g)
        except TypeCheckError:
            broken.append((p, q))
    m = cut_measure(d)
    if any(len(o.trace) > m for o in enumerate_outcomes(p).outcomes):
        too_long.append(p)

print(f"{n} terms (seed {seed}) in {time.perf_counter() - t0:.1f}s")
print(f"preservation failures: {len(broken)}")
print(f"progress failures:     {len(stuck)}")
print(f"termination failures:  {len(too_long)}")
for p, q in broken[:3]:
    print("  ", pretty_term(p), "->", pretty_term(q))
