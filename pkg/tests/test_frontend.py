"""Concrete syntax: parse/render round trips and error positions."""
import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from hyperq.formula import (
    And,
    Atom,
    HyperFormula,
    NegAtom,
    Not,
    Or,
    QuantitativeHyperproperty,
    TraceEq,
    TrueConst,
)
from hyperq.frontend import (
    ParseError,
    parse_kripke,
    parse_ltl,
    parse_property,
    render_kripke,
    render_ltl,
    render_property,
)
from hyperq.kripke import make_kripke

from test_formula import formulas as ast_formulas


# -- properties -------------------------------------------------------------


def test_parse_full_property():
    p = parse_property(
        "forall pi. (count sigma : {o} . G (pi ={i} sigma)) <= 2^2"
    )
    assert p.universals == ("pi",)
    assert p.guard == HyperFormula((), TrueConst())
    assert p.count_var == "sigma"
    assert p.projection == frozenset({"o"})
    assert p.cmp == "<="
    assert p.bound == 4


def test_parse_property_with_guard():
    p = parse_property(
        "forall pi, tau. G (a_pi -> a_tau) -> (count s : {a} . F a_s) > 0"
    )
    assert p.universals == ("pi", "tau")
    assert p.guard.prefix == ()
    assert p.cmp == ">" and p.bound == 0


def test_parse_property_inner_exists():
    p = parse_property(
        "forall pi. exists t. F b_t -> "
        "(count s : {a} . exists u. G (s ={a} u)) >= 1"
    )
    assert p.guard.prefix == (("exists", "t"),)
    assert p.body.prefix == (("exists", "u"),)


def test_parse_property_minimal():
    p = parse_property("(count s : {a} . true) = 1")
    assert p.universals == ()
    assert p.cmp == "=" and p.bound == 1


def test_bound_power_evaluated():
    assert parse_property("(count s : {a} . true) <= 2^0").bound == 1
    assert parse_property("(count s : {a} . true) <= 10^3").bound == 1000


def test_atom_splits_at_last_underscore():
    assert parse_ltl("req_0_pi") == Atom("req_0", "pi")
    assert parse_ltl("!a_pi") == NegAtom("a", "pi")


def test_precedence():
    assert parse_ltl("a_p | b_p & c_p") == Or(
        Atom("a", "p"), And(Atom("b", "p"), Atom("c", "p"))
    )
    f = parse_ltl("a_p -> b_p -> c_p")
    assert f == parse_ltl("a_p -> (b_p -> c_p)")
    # binary temporal binds tighter than boolean connectives
    assert render_ltl(parse_ltl("a_p & b_p U c_p")) == "a_p & b_p U c_p"
    assert parse_ltl("a_p U b_p U c_p") == parse_ltl("a_p U (b_p U c_p)")


def test_trace_eq_sugar():
    f = parse_ltl("pi ={i,o} sigma")
    assert f == TraceEq("pi", "sigma", frozenset({"i", "o"}))
    assert parse_ltl("pi ={} sigma") == TraceEq("pi", "sigma", frozenset())


def test_property_parse_errors_carry_spans():
    with pytest.raises(ParseError) as e:
        parse_property("forall pi. (count s : {a} . true)")
    assert e.value.span.line == 1

    with pytest.raises(ParseError) as e:
        parse_property("forall pi. G a_pi <= 2")
    assert "count" in e.value.message

    with pytest.raises(ParseError) as e:
        parse_ltl("a & b_pi")
    assert e.value.span.col == 1
    assert "prop_var" in e.value.message


def test_parse_error_position_is_exact():
    with pytest.raises(ParseError) as e:
        parse_kripke("state s0 {a};\nstate s0 {};\ninit s0;\ns0 -> s0;")
    assert "duplicate state" in e.value.message
    assert (e.value.span.line, e.value.span.col) == (2, 7)


@settings(max_examples=150)
@given(ast_formulas)
def test_formula_render_parse_identity(f):
    assert parse_ltl(render_ltl(f)) == f


cmp_st = st.sampled_from(["<=", "<", "=", ">=", ">"])


@st.composite
def properties(draw):
    n_univ = draw(st.integers(0, 2))
    universals = tuple(f"p{i}" for i in range(n_univ))
    guard = HyperFormula(
        tuple(("exists", f"g{i}") for i in range(draw(st.integers(0, 1)))),
        draw(ast_formulas),
    )
    body = HyperFormula(
        tuple(("exists", f"u{i}") for i in range(draw(st.integers(0, 1)))),
        draw(ast_formulas),
    )
    return QuantitativeHyperproperty(
        universals=universals,
        guard=guard,
        count_var="s",
        projection=draw(st.frozensets(st.sampled_from(["a", "b"]), max_size=2)),
        body=body,
        cmp=draw(cmp_st),
        bound=draw(st.integers(0, 9)),
    )


@settings(max_examples=150)
@given(properties())
def test_property_render_parse_identity(p):
    assert parse_property(render_property(p)) == p


# -- models -----------------------------------------------------------------

K2_TEXT = """\
ap a;
state s0 {};
state s1 {a};
init s0;
s0 -> s0, s1;
s1 -> s1;
"""


def test_parse_kripke_roundtrip():
    k = parse_kripke(K2_TEXT)
    assert k.states == ("s0", "s1")
    assert k.init == "s0"
    assert k.successors("s0") == ("s0", "s1")
    assert k.label("s1") == frozenset({"a"})
    assert render_kripke(k) == K2_TEXT
    assert parse_kripke(render_kripke(k)) == k


def test_parse_kripke_infers_ap():
    k = parse_kripke("state x {b, a};\ninit x;\nx -> x;")
    assert k.ap == ("a", "b")


def test_parse_kripke_comments_and_layout():
    k = parse_kripke(
        "# model\nstate x {a};  # labels\ninit x;\nx -> x;\n"
    )
    assert k.states == ("x",)


def test_kripke_errors():
    with pytest.raises(ParseError) as e:
        parse_kripke("state s0 {};\ninit s0;\ns0 -> s1;")
    assert "unknown state 's1' in transition" in e.value.message
    assert (e.value.span.line, e.value.span.col) == (3, 7)

    with pytest.raises(ParseError) as e:
        parse_kripke("state s0 {};\ninit s0;")
    assert "'s0' has no successor" in e.value.message

    with pytest.raises(ParseError) as e:
        parse_kripke("state s0 {};\ns0 -> s0;")
    assert "no init" in e.value.message

    with pytest.raises(ParseError) as e:
        parse_kripke("ap a;\nstate s0 {b};\ninit s0;\ns0 -> s0;")
    assert "unknown proposition 'b'" in e.value.message
    assert (e.value.span.line, e.value.span.col) == (2, 11)


def test_render_kripke_from_structure():
    k = make_kripke(
        ["s0", "s1"],
        "s0",
        {"s0": ["s1"], "s1": ["s0"]},
        ["x"],
        {"s0": {"x"}, "s1": set()},
    )
    assert parse_kripke(render_kripke(k)) == k
