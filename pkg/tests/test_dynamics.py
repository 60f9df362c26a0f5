import random

import pytest
from hypothesis import given, settings
from strategies import terms

from nodcap.checker import check, cut_measure
from nodcap.congruence import canonicalize, congruent, rewrite_closure
from nodcap.dynamics import (
    BETA_INL,
    BETA_STAR,
    BETA_TENSOR,
    BETA_UNIT,
    KAPPA,
    BudgetExceeded,
    enumerate_outcomes,
    find_redexes,
    fingerprint,
    is_canonical,
    step,
)
from nodcap.encodings import build_corpus
from nodcap.generators import GenConfig, gen_population, random_raw_term
from nodcap.kernel import Halt
from nodcap.parser import parse_term, pretty_term


@pytest.fixture(scope="module")
def corpus():
    return build_corpus()


@pytest.fixture(scope="module")
def population():
    return gen_population(200, GenConfig(seed=21))


def labels(p):
    return [lab.rule for lab, _ in find_redexes(parse_term(p) if isinstance(p, str) else p)]


def test_link_redex():
    ((lab, q),) = find_redexes(parse_term("nu x x'. (w<->x | x'<->b)"))
    assert lab.rule == KAPPA
    assert q == canonicalize(parse_term("w<->b"))


def test_link_substitutes_into_continuation():
    ((lab, q),) = find_redexes(parse_term("nu x x'. (x<->w | x'(). a[]. 0)"))
    assert lab.rule == KAPPA
    assert congruent(q, parse_term("w(). a[]. 0"))


def test_unit_redex_drops_halt():
    ((lab, q),) = find_redexes(parse_term("nu x x'. (x[]. 0 | x'(). a<->b)"))
    assert lab.rule == BETA_UNIT
    assert q == parse_term("a<->b")


def test_tensor_redex():
    p = parse_term("nu x x'. (x[y]. (y[]. 0 | x[]. 0) | x'(z). x'(). z(). a[]. 0)")
    ((lab, q),) = find_redexes(p)
    assert lab.rule == BETA_TENSOR
    assert congruent(q, parse_term("nu y y'. nu x x'. (y[]. 0 | x[]. 0 | x'(). y'(). a[]. 0)"))


def test_selection_redex():
    p = parse_term("nu x x'. (x[inl]. x[]. 0 | case x' { x'(). a[]. 0 ; x'(). b[]. 0 })")
    ((lab, q),) = find_redexes(p)
    assert lab.rule == BETA_INL
    assert congruent(q, parse_term("nu x x'. (x[]. 0 | x'(). a[]. 0)"))


def test_race2_has_one_redex_per_client(corpus):
    found = find_redexes(corpus["Race2"].term)
    assert [lab.rule for lab, _ in found] == [BETA_STAR, BETA_STAR]
    assert found[0][1] != found[1][1]


def test_blocked_client_not_pairable():
    # the second client sits under a prefix on a free endpoint
    p = parse_term("nu x x'. (x*(y). y[]. 0 | a(). x*(z). z[]. 0 | x'*[u]. x'*[v]. u(). v(). 0)")
    assert labels(p) == [BETA_STAR]


def test_only_outermost_server_action():
    p = parse_term("nu x x'. (x*(y). y[]. 0 | x*(z). a(). z[]. 0 | x'*[u]. x'*[v]. u(). v(). 0)")
    assert labels(p) == [BETA_STAR, BETA_STAR]
    for q in step(p):
        assert labels(q) == [BETA_STAR]


def test_results_are_canonical(corpus):
    for _, q in find_redexes(corpus["Race3"].term):
        assert canonicalize(q) == q


def test_is_canonical_examples(corpus):
    assert is_canonical(parse_term("a[inl]. a(). 0"))
    assert not is_canonical(parse_term("nu x x'. (x[]. 0 | x'(). 0)"))
    assert is_canonical(corpus["Deadlock"].term)
    assert step(corpus["Deadlock"].term) == []


def test_canonical_is_fixed_point():
    p = parse_term("a[inl]. a(). 0 | b<->c")
    out = enumerate_outcomes(p)
    assert len(out) == 1
    assert out.outcomes[0].term == canonicalize(p)
    assert out.outcomes[0].trace == []


def test_race_counts(corpus):
    assert len(enumerate_outcomes(corpus["Race2"].term)) == 2
    assert len(enumerate_outcomes(corpus["Race3"].term)) == 6


def test_race2_fingerprints(corpus):
    fps = sorted(tuple(o.fingerprint.items()) for o in enumerate_outcomes(corpus["Race2"].term).outcomes)
    assert fps == [(("a", "inl"), ("b", "inr")), (("a", "inr"), ("b", "inl"))]


def test_outcomes_pairwise_distinct_and_canonical(corpus):
    out = enumerate_outcomes(corpus["Race3"].term)
    assert len(out.terms()) == len(out)
    assert all(is_canonical(o.term) for o in out.outcomes)


def test_fingerprint_of_halt():
    assert fingerprint(Halt()) == {}


def test_fingerprint_chains_selections():
    assert fingerprint(parse_term("a[inr]. a[inl]. a(). 0")) == {"a": "inr.inl"}


def test_outcome_text_is_deterministic(corpus):
    a = enumerate_outcomes(corpus["Race2"].term).to_text()
    b = enumerate_outcomes(parse_term(pretty_term(corpus["Race2"].term))).to_text()
    assert a == b
    assert a.startswith("2 outcomes\n")
    assert "fingerprint: a -> inl, b -> inr" in a


def test_budget_exceeded_keeps_partial(corpus):
    with pytest.raises(BudgetExceeded) as e:
        enumerate_outcomes(corpus["Race3"].term, max_states=5)
    assert not e.value.partial.complete
    assert e.value.partial.states_explored > 5


def test_max_states_positive():
    with pytest.raises(ValueError):
        enumerate_outcomes(Halt(), max_states=0)


@settings(max_examples=80)
@given(terms(max_leaves=6))
def test_step_commutes_with_alpha_and_canonicalization(p):
    assert step(p) == step(canonicalize(p))


def test_step_commutes_with_congruence():
    rng = random.Random(9)
    for _ in range(80):
        p = random_raw_term(rng, 6)
        q = rng.choice(sorted(rewrite_closure(p), key=repr))
        assert step(p) == step(q)


def test_step_commutes_on_typed_terms(population):
    for p, _, _ in population[:50]:
        assert step(p) == step(canonicalize(p))


def test_preservation(population):
    for p, g, _ in population:
        for q in step(p):
            check(canonicalize(q), g)


def test_progress(population):
    for p, _, _ in population:
        assert is_canonical(p) or step(p)


def test_measure_decreases(population):
    for p, g, d in population[:100]:
        m = cut_measure(d)
        for q in step(p):
            assert cut_measure(check(q, g)) < m


def test_trace_length_bounded_by_measure(population):
    for p, _, d in population[:100]:
        m = cut_measure(d)
        for o in enumerate_outcomes(p).outcomes:
            assert len(o.trace) <= m
