import json

import pytest

from nodcap.checker import (
    CLIENT_EXHAUSTED,
    COMPONENT_MISMATCH,
    CUT_NOT_DISTINCT,
    INDEX_MISMATCH,
    LEFTOVER,
    NON_HALT_CLOSE,
    TYPE_MISMATCH,
    UNBOUND,
    UNDEFINED_DEF,
    Derivation,
    InvalidDerivation,
    TypeCheckError,
    check,
    check_file,
    cut_measure,
    validate,
)
from nodcap.encodings import build_corpus
from nodcap.generators import GenConfig, gen_population
from nodcap.kernel import (
    Absurd,
    Case,
    Client,
    ClientReq,
    HyperEnv,
    Link,
    New,
    One,
    Plus,
    Term,
    children,
    subterms,
    type_size,
)
from nodcap.parser import Check, SourceFile, parse_file, parse_hyperenv, parse_term


def ok(term, env):
    d = check(parse_term(term), parse_hyperenv(env))
    validate(d)
    return d


def fails(term, env):
    with pytest.raises(TypeCheckError) as e:
        check(parse_term(term), parse_hyperenv(env))
    return e.value


@pytest.fixture(scope="module")
def corpus():
    return build_corpus()


@pytest.fixture(scope="module")
def population():
    return gen_population(200, GenConfig(seed=5))


def test_axiom():
    d = ok("a<->b", "a: bot, b: 1")
    assert d.rule == "Ax" and d.premises == []


def test_client_pool_contracts():
    d = ok("x*(z). z[]. 0 | x*(w). w[]. 0", "x: ?[2] 1")
    assert d.rule == "Cont!"
    assert d.premises[0].rule == "H-Mix"


def test_client_pool_with_side_contexts():
    d = ok("x*(z). z(). a[]. 0 | x*(w). w(). b[]. 0", "a: 1, b: 1, x: ?[2] bot")
    assert {n.rule for n in d.nodes()} >= {"Cont!", "take₁"}


def test_server_peels_indices():
    d = ok("x*[y]. x*[z]. y(). z(). a[]. 0", "x: ![2] bot, a: 1")
    assert d.rule == "Cont?"


def test_cut():
    d = ok("nu x y. (x[]. 0 | y(). a[]. 0)", "a: 1")
    assert d.rule == "Cut" and d.cut == One()


def test_mix():
    d = ok("a[]. 0 | b[]. 0", "a: 1 ; b: 1")
    assert d.rule == "H-Mix"


def test_halt_has_empty_hyperenv():
    assert ok("0", ".").rule == "H-Mix0"


def test_top_absorbs_context():
    assert ok("absurd a", "a: top, b: 1").rule == "⊤"


def test_deadlock_rejected(corpus):
    e = corpus["Deadlock"]
    with pytest.raises(TypeCheckError) as err:
        check(e.term, e.env)
    assert err.value.kind == CUT_NOT_DISTINCT


def test_erratum_rejected_at_unit_rule(corpus):
    e = corpus["Erratum"]
    with pytest.raises(TypeCheckError) as err:
        check(e.term, e.env)
    assert err.value.kind == NON_HALT_CLOSE
    assert err.value.names == ("x",)


@pytest.mark.parametrize(
    "term, env, kind",
    [
        ("a<->c", "a: bot, b: 1", UNBOUND),
        ("a<->b", "a: 1, b: 1", TYPE_MISMATCH),
        ("a<->b", "a: bot, b: 1, c: 1", LEFTOVER),
        ("a[]. b[]. 0", "a: 1, b: 1", NON_HALT_CLOSE),
        ("x*(z). x*(w). z[]. w[]. 0", "x: ?[2] 1", CLIENT_EXHAUSTED),
        ("x*(z). z[]. 0 | x*(w). w[]. 0", "x: ?[3] 1", INDEX_MISMATCH),
        ("x*(z). z[]. 0", "x: ?[2] 1", INDEX_MISMATCH),
        ("a[]. 0 | b[]. 0", "a: 1, b: 1", COMPONENT_MISMATCH),
        ("nu x y. x(). y[]. 0", ".", CUT_NOT_DISTINCT),
    ],
)
def test_error_kinds(term, env, kind):
    assert fails(term, env).kind == kind


def test_errors_carry_positions():
    e = fails("a(y). (y[]. 0 | a[]. 0)", "a: bot % 1")
    assert e.pos == (1, 8)
    assert str(e).startswith("1:8:")


def test_duplicate_env_name():
    with pytest.raises(ValueError, match="duplicate endpoint a"):
        HyperEnv(((("a", One()),), (("a", One()),)))


def test_cut_measure_examples():
    assert cut_measure(ok("a<->b", "a: bot, b: 1")) == 0
    assert cut_measure(ok("nu x y. (x[]. 0 | y(). a[]. 0)", "a: 1")) == 1
    assert type_size(Client(2, Plus(One(), One()))) == 8


def test_race2_derivation(corpus):
    e = corpus["Race2"]
    d = check(e.term, e.env)
    validate(d)
    assert d.rule == "Cut"
    assert {"Cont!", "Cont?", "take₁", "give₁"} <= {n.rule for n in d.nodes()}


def test_json_tree(corpus):
    e = corpus["Race2"]
    tree = check(e.term, e.env).to_json()
    assert json.loads(json.dumps(tree)) == tree
    assert tree["rule"] == "Cut" and "cut" in tree
    assert tree["conclusion"] == "a: bot + bot, b: bot + bot, t: 1"


def test_validate_rejects_tampered_derivation():
    d = ok("nu x y. (x[]. 0 | y(). a[]. 0)", "a: 1")
    d.premises[0].conclusion = [[("a", One())]]
    with pytest.raises(InvalidDerivation):
        validate(d)


def test_validate_rejects_unknown_rule():
    d = ok("a<->b", "a: bot, b: 1")
    with pytest.raises(InvalidDerivation):
        validate(Derivation("Weaken", d.term, d.conclusion, [d]))


def test_check_file_order_and_results():
    src = parse_file(
        "def A = a<->b\n"
        "def B = a[]. b[]. 0\n"
        "check B :: a: 1, b: 1\n"
        "check A :: a: bot, b: 1\n"
    )
    results = check_file(src)
    assert [r.name for r in results] == ["B", "A"]
    assert not results[0].ok and results[0].error.kind == NON_HALT_CLOSE
    assert results[1].ok and results[1].derivation.rule == "Ax"


def test_check_file_empty():
    assert check_file(parse_file("")) == []


def test_check_file_undefined_def():
    # the parser already rejects this, so build the file by hand
    src = SourceFile([Check("Missing", parse_hyperenv("a: 1"), 1)])
    (r,) = check_file(src)
    assert r.error.kind == UNDEFINED_DEF


def test_generated_derivations_validate(population):
    for p, g, d in population:
        validate(d)
        assert d.hyperenv() == g


def test_weakening_impossible(population):
    tried = 0
    for p, g, _ in population[:80]:
        if any(type(t) is Absurd for t in subterms(p)):
            continue  # ⊤ absorbs any context
        tried += 1
        extra = HyperEnv(g.components[:-1] + (g.components[-1] + (("unused_q", One()),),)) if g.components else None
        if extra is None:
            continue
        with pytest.raises(TypeCheckError) as e:
            check(p, extra)
        assert e.value.kind == LEFTOVER
    assert tried > 10


def _client_prefixes(p: Term, x: str) -> int:
    if getattr(p, "y", None) == x or (type(p) is New and p.x == x):
        return 0  # shadowed
    here = 1 if type(p) is ClientReq and p.x == x else 0
    if type(p) is Case:
        left, right = _client_prefixes(p.left, x), _client_prefixes(p.right, x)
        assert left == right
        return here + left
    return here + sum(_client_prefixes(c, x) for c in children(p))


def _linked(p: Term, x: str) -> bool:
    if type(p) is Link:
        return x in (p.x, p.y)
    if getattr(p, "y", None) == x:
        return False
    return any(_linked(c, x) for c in children(p))


def test_client_count_matches_index(population):
    seen = 0
    for p, g, _ in population:
        for comp in g.components:
            for x, a in comp:
                if isinstance(a, Client) and not _linked(p, x):
                    seen += 1
                    assert _client_prefixes(p, x) == a.n
    assert seen > 0
