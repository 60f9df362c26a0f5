import pytest
from hypothesis import given
from strategies import terms, types

from nodcap.kernel import (
    Bot,
    Case,
    ClientReq,
    Halt,
    HyperEnv,
    Inl,
    Link,
    New,
    One,
    Out,
    Par,
    Plus,
    Server,
    Tensor,
    Top,
    Wait,
    With,
    alpha_eq,
)
from nodcap.parser import (
    ParseError,
    parse_file,
    parse_hyperenv,
    parse_term,
    parse_type,
    pretty_hyperenv,
    pretty_term,
    pretty_type,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1 + 1", Plus(One(), One())),
        ("~(?[2] (1 + 1))", Server(2, With(Bot(), Bot()))),
        ("1 * bot + top", Plus(Tensor(One(), Bot()), Top())),
        ("1 + bot + top", Plus(One(), Plus(Bot(), Top()))),
        ("(1 + bot) + top", Plus(Plus(One(), Bot()), Top())),
    ],
)
def test_parse_type(text, expected):
    assert parse_type(text) == expected


def test_zero_index_rejected():
    with pytest.raises(ParseError, match="index must be positive"):
        parse_type("?[0] 1")


@pytest.mark.parametrize(
    "text, expected",
    [
        ("nu x x'. (x<->a | x'<->b)", New("x", "x'", Par(Link("x", "a"), Link("x'", "b")))),
        ("x*(y). y(). 0", ClientReq("x", "y", Wait("y", Halt()))),
        ("a[inl]. a(). 0", Inl("a", Wait("a", Halt()))),
        ("case x { 0 ; absurd x }", Case("x", Halt(), __import__("nodcap").kernel.Absurd("x"))),
        ("a<->b | b<->c | c<->d", Par(Link("a", "b"), Par(Link("b", "c"), Link("c", "d")))),
    ],
)
def test_parse_term(text, expected):
    assert parse_term(text) == expected


def test_prefix_binds_tighter_than_par():
    assert parse_term("x(). 0 | y(). 0") == Par(Wait("x", Halt()), Wait("y", Halt()))


def test_unbound_output_desugars():
    p = parse_term("x<y>. 0")
    assert isinstance(p, Out) and p.x == "x"
    assert p.body == Par(Link("y", p.y), Halt())
    assert p.y not in ("x", "y")


def test_parse_hyperenv():
    g = parse_hyperenv("a: 1 + 1, b: 1 + 1")
    assert len(g.components) == 1 and len(g.components[0]) == 2
    assert len(parse_hyperenv("x: 1 ; y: bot").components) == 2
    assert parse_hyperenv(".") == HyperEnv()


def test_duplicate_endpoint():
    with pytest.raises(ParseError, match="duplicate endpoint x"):
        parse_hyperenv("x: 1, x: bot")
    with pytest.raises(ParseError, match="duplicate endpoint x"):
        parse_hyperenv("x: 1 ; x: bot")


@pytest.mark.parametrize("text", ["x[", "nu x. 0", "case x { 0 }", "a <-> ", "x(). | 0", "x[inl 0"])
def test_errors_carry_positions(text):
    with pytest.raises(ParseError) as info:
        parse_term(text)
    assert info.value.line >= 1 and info.value.col >= 1


def test_error_position_is_accurate():
    with pytest.raises(ParseError) as info:
        parse_term("x(). \n  y[]. ]")
    assert (info.value.line, info.value.col) == (2, 8)


def test_pretty_examples():
    assert pretty_type(Plus(One(), One())) == "1 + 1"
    assert pretty_term(New("x", "x'", Par(Link("x", "a"), Link("x'", "b")))) == "nu x x'. (x<->a | x'<->b)"
    assert pretty_type(parse_type("?[2] (1 + 1)")) == "?[2] (1 + 1)"


@given(types())
def test_type_round_trip(a):
    assert parse_type(pretty_type(a)) == a


@given(terms())
def test_term_round_trip(p):
    assert alpha_eq(parse_term(pretty_term(p)), p)


def test_hyperenv_round_trip():
    g = parse_hyperenv("a: 1 * bot, b: ?[3] (1 + top) ; c: ![1] 0")
    assert parse_hyperenv(pretty_hyperenv(g)) == g


def test_parse_file():
    src = parse_file(
        """
        -- a comment
        def P = a<->b   -- trailing comment
        check P :: a: 1, b: bot
        def Q = 0
        check Q :: .
        """
    )
    assert list(src.defs) == ["P", "Q"]
    assert [c.name for c in src.checks] == ["P", "Q"]


def test_parse_file_empty():
    assert parse_file("").decls == []


def test_check_before_def_is_an_error():
    with pytest.raises(ParseError, match="undefined"):
        parse_file("check P :: .")


def test_duplicate_def_is_an_error():
    with pytest.raises(ParseError, match="duplicate definition"):
        parse_file("def P = 0\ndef P = 0")


def test_keywords_are_not_names():
    with pytest.raises(ParseError):
        parse_term("case<->a")
