"""Counting engine: infinity witnesses, extremal counts, verdict routing."""
import pytest

from hyperq.automata import BuchiAutomaton, nba_accepts_lasso
from hyperq.counting import (
    CountValue,
    CountingLimits,
    ProjectionSplit,
    check,
    distinct_words,
    dpl_check,
    max_count,
    min_count,
    split_for_property,
)
from hyperq.errors import ValidationError
from hyperq.frontend import parse_property
from hyperq.kripke import lasso_trace, make_kripke, validate_lasso
from hyperq.oracle import Trace, oracle_count

fs = frozenset
at = ("a", "t")
bt = ("b", "t")
xt = ("x", "t")
yt = ("y", "t")


def nba(states, inits, edges, acc, alphabet):
    return BuchiAutomaton(
        states=set(states),
        initials=set(inits),
        edges=edges,
        accepting=set(acc),
        alphabet=fs(alphabet),
    )


def g(*pairs):
    return fs(pairs)


def k1():
    return make_kripke(["s0"], "s0", {"s0": ["s0"]}, ["a"], {"s0": {"a"}})


def k2():
    return make_kripke(
        ["s0", "s1"],
        "s0",
        {"s0": ["s0", "s1"], "s1": ["s1"]},
        ["a"],
        {"s0": set(), "s1": {"a"}},
    )


# one accepting a-loop; the only accepted word is a^omega
def loner():
    return nba(
        [0, 1],
        [0],
        {0: [(g((at, True)), 0), (g((at, False)), 1)], 1: [(g(), 1)]},
        [0],
        [at],
    )


# ~a-loop then exit on a into a free accepting loop: infinitely many words
def burst():
    return nba(
        [0, 1],
        [0],
        {0: [(g((at, False)), 0), (g((at, True)), 1)], 1: [(g(), 1)]},
        [1],
        [at],
    )


# (~a&b)-loop, exit on a, accepting b-loop; two x-patterns per y-word
def twofold():
    return nba(
        [0, 1],
        [0],
        {
            0: [(g((at, False), (bt, True)), 0), (g((at, True)), 1)],
            1: [(g((bt, True)), 1)],
        },
        [1],
        [at, bt],
    )


SP_A = ProjectionSplit(x=fs([at]), y=fs(), z=fs())
SP_BA = ProjectionSplit(x=fs([bt]), y=fs([at]), z=fs())


# -- value and split types ----------------------------------------------------


def test_count_value_basics():
    assert CountValue.finite(3).value == 3
    assert not CountValue.finite(3).is_infinite
    assert CountValue.infinite().is_infinite
    assert str(CountValue.finite(3)) == "3"
    assert str(CountValue.infinite()) == "infinite"
    assert CountValue.finite(1) != CountValue.infinite()


def test_projection_split_rejects_overlap():
    with pytest.raises(ValidationError):
        ProjectionSplit(x=fs([at]), y=fs([at]), z=fs())


def test_split_for_property_assigns_every_proposition():
    k = make_kripke(
        ["s0"], "s0", {"s0": ["s0"]}, ["i", "o"], {"s0": {"i", "o"}}
    )
    p = parse_property(
        "forall pi. (count sigma : {o} . G (pi ={i} sigma)) <= 2^1"
    )
    sp = split_for_property(k, p)
    assert sp.x == fs({("o", "sigma")})
    assert sp.y == fs({("i", "pi")})
    assert sp.z == fs({("i", "sigma"), ("o", "pi")})
    assert sp.x | sp.y | sp.z == fs(
        (prop, v) for prop in ["i", "o"] for v in ["pi", "sigma"]
    )


# -- infinity test ------------------------------------------------------------


def test_dpl_negative_on_single_word_language():
    assert dpl_check(loner(), SP_A) is None


def test_dpl_positive_on_unbounded_language():
    w = dpl_check(burst(), SP_A)
    assert w is not None
    p = len(w.cycle_letters)
    assert p >= 1
    assert 0 <= w.run_cycle_start < len(w.run_letters)
    # the run letters agree with the pumped cycle on Y everywhere and
    # differ on X at the marked position
    for i, letter in enumerate(w.run_letters):
        assert letter & SP_A.y == w.cycle_letters[i % p] & SP_A.y
    d = w.diff_index
    assert (w.run_letters[d] & SP_A.x) != (w.cycle_letters[d % p] & SP_A.x)


def test_dpl_model_word_is_accepted():
    b = burst()
    w = dpl_check(b, SP_A)
    stem, loop = w.model_word()
    assert loop
    assert nba_accepts_lasso(b, stem, loop)


def test_dpl_negative_when_y_pins_the_variation():
    assert dpl_check(twofold(), SP_BA) is None


def test_dpl_positive_when_difference_precedes_the_loop():
    # words ~x^n x ~x^omega: the x sits strictly before the final loop
    toy = nba(
        [0, 1],
        [0],
        {0: [(g((xt, False)), 0), (g((xt, True)), 1)], 1: [(g((xt, False)), 1)]},
        [1],
        [xt],
    )
    sp = ProjectionSplit(x=fs([xt]), y=fs(), z=fs())
    assert dpl_check(toy, sp) is not None


def test_dpl_negative_on_forced_exit_letter():
    # y-carrying loops, the exit letter is pinned {x,y}, then an empty sink;
    # each y-word admits only finitely many exit positions
    sent = nba(
        [0, 1],
        [0],
        {
            0: [
                (g((xt, False), (yt, True)), 0),
                (g((xt, False), (yt, False)), 0),
                (g((xt, True), (yt, True)), 1),
            ],
            1: [(g((xt, False), (yt, False)), 1)],
        },
        [1],
        [xt, yt],
    )
    sp = ProjectionSplit(x=fs([xt]), y=fs([yt]), z=fs())
    assert dpl_check(sent, sp) is None


def test_dpl_respects_node_budget():
    stats = {}
    lim = CountingLimits(dpl_node_budget=2)
    assert dpl_check(burst(), SP_A, limits=lim, stats=stats) is None
    assert stats["dpl_capped"]


# -- maximum count ------------------------------------------------------------


def test_max_count_single_word():
    r = max_count(loner(), SP_A, limit=10)
    assert r.value == CountValue.finite(1)
    assert not r.exceeded


def test_max_count_two_patterns_per_y():
    r = max_count(twofold(), SP_BA, limit=10)
    assert r.value == CountValue.finite(2)
    assert not r.exceeded
    # the reported argmax group is realizable: its witness word is accepted
    assert r.model_stem is not None
    assert nba_accepts_lasso(twofold(), tuple(r.model_stem), tuple(r.model_loop))


def test_max_count_reports_exceedance():
    r = max_count(twofold(), SP_BA, limit=1)
    assert r.exceeded
    assert r.value.value > 1


def test_max_count_empty_automaton():
    empty = nba([0], [0], {0: []}, [0], [at])
    r = max_count(empty, SP_A, limit=5)
    assert r.value == CountValue.finite(0)


# -- minimum count ------------------------------------------------------------


def all_words_guard():
    return nba([0], [0], {0: [(g(), 0)]}, [0], [at])


def has_a_guard():
    return nba(
        [0, 1],
        [0],
        {0: [(g(), 0), (g((at, True)), 1)], 1: [(g(), 1)]},
        [1],
        [at],
    )


def test_min_count_eligible_word_missing_counts_zero():
    # the guard admits a-free words, which the counted automaton never
    # produces, so the minimum drops to zero
    r = min_count(twofold(), all_words_guard(), SP_BA, limit=10)
    assert r.value == CountValue.finite(0)
    assert not r.vacuous


def test_min_count_over_matching_guard():
    r = min_count(twofold(), has_a_guard(), SP_BA, limit=10)
    assert r.value == CountValue.finite(2)


def test_min_count_vacuous_guard():
    dead = nba([0], [0], {0: []}, [0], [at])
    r = min_count(twofold(), dead, SP_BA, limit=10)
    assert r.vacuous


def test_min_count_empty_main_automaton():
    dead = nba([0], [0], {0: []}, [0], [at, bt])
    r = min_count(dead, all_words_guard(), SP_BA, limit=10)
    assert r.value == CountValue.finite(0)
    assert not r.vacuous


# -- distinct word enumeration ------------------------------------------------


def test_distinct_words_exact_small():
    words, capped = distinct_words(loner(), fs([at]), 2, 2, cap=10)
    assert not capped
    assert words == {Trace((), (fs([at]),))}


def test_distinct_words_growth_detects_infinity():
    a, _ = distinct_words(burst(), fs([at]), 2, 2, cap=1000)
    b, _ = distinct_words(burst(), fs([at]), 4, 4, cap=1000)
    assert len(b) > len(a) >= 1


# -- verdicts -----------------------------------------------------------------


def test_check_upper_bound_holds_on_single_trace():
    v = check(k1(), parse_property("(count s : {a} . true) <= 1"))
    assert v.holds
    assert v.witness is None
    assert v.statistics["route"] == "maximum-count"


def test_check_upper_bound_violated_by_infinity():
    v = check(k2(), parse_property("(count s : {a} . true) <= 3"))
    assert not v.holds
    assert v.statistics["route"] == "infinity"
    assert v.witness.count.is_infinite
    # the reported model word is a genuine trace set member
    assert v.witness.y_stem is not None or v.witness.y_loop is not None


def test_check_lower_bound_violated():
    v = check(k1(), parse_property("(count s : {a} . true) >= 2"))
    assert not v.holds
    assert v.witness.count == CountValue.finite(1)
    assert v.statistics["route"] == "minimum-count"


def test_check_lower_bound_holds_on_branching_model():
    v = check(k2(), parse_property("(count s : {a} . true) >= 2"))
    assert v.holds


def test_check_equality_both_directions():
    assert check(k1(), parse_property("(count s : {a} . true) = 1")).holds
    v = check(k1(), parse_property("(count s : {a} . true) = 2"))
    assert not v.holds
    v = check(k2(), parse_property("(count s : {a} . true) = 5"))
    assert not v.holds


def test_check_strict_comparisons():
    assert check(k1(), parse_property("(count s : {a} . true) < 2")).holds
    assert not check(k1(), parse_property("(count s : {a} . true) < 1")).holds
    assert check(k1(), parse_property("(count s : {a} . true) > 0")).holds
    assert not check(k1(), parse_property("(count s : {a} . true) > 1")).holds


def test_check_trivial_lower_bound():
    # count >= 0 holds for every model, even with an unsatisfiable body
    v = check(k1(), parse_property("(count s : {a} . false) >= 0"))
    assert v.holds
    assert v.statistics["route"] == "trivial"


def test_check_zero_threshold_satisfiability():
    # violated as soon as some guard assignment exists: count 0 > -... the
    # negation of '< 1' asks for at least one sigma
    v = check(k1(), parse_property("(count s : {a} . false) >= 1"))
    assert not v.holds
    assert v.witness.count == CountValue.finite(0)


def test_check_guarded_universal_witness_is_a_model_trace():
    p = parse_property(
        "forall pi. (count sigma : {a} . G !a_sigma) >= 2"
    )
    v = check(k2(), p)
    assert not v.holds
    assert v.witness.variables == ("pi",)
    (lasso,) = v.witness.lassos
    assert validate_lasso(k2(), lasso) == []
    assert v.witness.count == CountValue.finite(1)


def test_check_guard_restricts_universals():
    # guard picks the a-free trace; its count class holds the bound
    p = parse_property(
        "forall pi. G !a_pi -> (count sigma : {a} . G (pi ={a} sigma)) <= 1"
    )
    assert check(k2(), p).holds
    p = parse_property(
        "forall pi. G !a_pi -> (count sigma : {a} . true) <= 3"
    )
    v = check(k2(), p)
    assert not v.holds  # body true still counts every trace


def test_check_vacuous_guard_holds():
    p = parse_property(
        "forall pi. false -> (count sigma : {a} . true) >= 5"
    )
    v = check(k2(), p)
    assert v.holds
    assert v.statistics["route"] in ("vacuous-guard", "minimum-count")


def test_check_qni_on_deterministic_model():
    p = parse_property(
        "forall pi. (count sigma : {a} . G (pi ={a} sigma)) <= 2^0"
    )
    assert check(k1(), p).holds


def test_check_agrees_with_reference_on_fixed_cases():
    cases = [
        (k1(), "(count s : {a} . true) <= 1"),
        (k1(), "(count s : {a} . true) >= 2"),
        (k1(), "(count s : {a} . G a_s) = 1"),
        (k2(), "(count s : {a} . G !a_s) = 1"),
        (k2(), "(count s : {a} . F a_s) >= 3"),
        (k2(), "forall pi. (count sigma : {a} . G (pi ={a} sigma)) <= 1"),
        (k2(), "forall pi. (count sigma : {a} . F a_sigma) >= 1"),
    ]
    for k, text in cases:
        p = parse_property(text)
        got = check(k, p).holds
        want = oracle_count(k, p, max_len=6).holds
        assert got == want, text


def test_check_unreachable_state_changes_nothing():
    base = k2()
    padded = make_kripke(
        ["s0", "s1", "zz"],
        "s0",
        {"s0": ["s0", "s1"], "s1": ["s1"], "zz": ["zz"]},
        ["a"],
        {"s0": set(), "s1": {"a"}, "zz": {"a"}},
    )
    for text in [
        "(count s : {a} . true) <= 3",
        "(count s : {a} . true) >= 2",
        "(count s : {a} . G !a_s) = 1",
        "forall pi. (count sigma : {a} . G (pi ={a} sigma)) <= 1",
    ]:
        p = parse_property(text)
        assert check(base, p).holds == check(padded, p).holds, text


def test_check_witness_trace_satisfies_the_body_count():
    # violated lower bound: the witness pins pi to a concrete model trace;
    # re-evaluating the count for that trace reproduces the reported value
    p = parse_property(
        "forall pi. (count sigma : {a} . G (a_pi -> a_sigma)) >= 4"
    )
    v = check(k2(), p)
    if not v.holds and v.witness.lassos:
        lasso = v.witness.lassos[0]
        assert validate_lasso(k2(), lasso) == []
        assert lasso_trace(k2(), lasso) is not None
