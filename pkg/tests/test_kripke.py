"""Model structure, lasso validation, lasso enumeration."""
import pytest

from hyperq.errors import ValidationError
from hyperq.kripke import (
    Lasso,
    enumerate_lassos,
    lasso_trace,
    make_kripke,
    validate_kripke,
    validate_lasso,
)


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


def test_validate_ok():
    assert validate_kripke(k1()) == []
    assert validate_kripke(k2()) == []


def test_validate_missing_successor():
    k = make_kripke(["s0", "s1"], "s0", {"s0": ["s1"]}, [], {})
    errs = validate_kripke(k)
    assert any("'s1' has no successor" in e for e in errs)


def test_validate_unknown_init():
    k = make_kripke(["s0"], "zz", {"s0": ["s0"]}, [], {})
    assert any("initial state" in e for e in validate_kripke(k))


def test_validate_unknown_transition_target():
    k = make_kripke(["s0"], "s0", {"s0": ["s0", "zz"]}, [], {})
    assert any("unknown state 'zz'" in e for e in validate_kripke(k))


def test_validate_unknown_label():
    k = make_kripke(["s0"], "s0", {"s0": ["s0"]}, ["a"], {"s0": {"b"}})
    assert any("unknown proposition 'b'" in e for e in validate_kripke(k))


def test_lasso_convention():
    k = k2()
    assert validate_lasso(k, Lasso((), ("s0",))) == []
    assert validate_lasso(k, Lasso(("s0",), ("s1",))) == []
    # loop must be nonempty
    assert validate_lasso(k, Lasso(("s0",), ())) == ["empty loop"]
    # nonempty stem must start at the initial state
    errs = validate_lasso(k, Lasso(("s1",), ("s1",)))
    assert any("initial state" in e for e in errs)
    # every consecutive pair and the closing edge must be transitions
    errs = validate_lasso(k, Lasso((), ("s0", "s1")))
    assert any("missing transition 's1' -> 's0'" in e for e in errs)


def test_lasso_trace_letters():
    k = k2()
    stem, loop = lasso_trace(k, Lasso(("s0",), ("s1",)))
    assert stem == (frozenset(),)
    assert loop == (frozenset({"a"}),)
    with pytest.raises(ValidationError):
        lasso_trace(k, Lasso((), ("s1",)))


def test_enumerate_lassos_k2_by_hand():
    # paths of length <= 3 from s0 with a closing edge:
    #   [s0] gives 1 split, [s0 s0] 2, [s0 s0 s0] 3, [s0 s1] 1,
    #   [s0 s0 s1] 1, [s0 s1 s1] 2 -- ten lassos in total
    out = list(enumerate_lassos(k2(), 3))
    assert len(out) == 10
    for l in out:
        assert validate_lasso(k2(), l) == []
        assert 1 <= len(l.stem) + len(l.loop) <= 3
    assert len(set(out)) == len(out)


def test_enumerate_lassos_deterministic():
    a = list(enumerate_lassos(k2(), 4))
    b = list(enumerate_lassos(k2(), 4))
    assert a == b


def test_enumerate_lassos_zero():
    assert list(enumerate_lassos(k1(), 0)) == []


def test_enumerate_lassos_k1():
    # only the self-loop, with ever longer unrollings
    out = list(enumerate_lassos(k1(), 2))
    assert Lasso((), ("s0",)) in out
    assert Lasso(("s0",), ("s0",)) in out
    assert Lasso((), ("s0", "s0")) in out
    assert len(out) == 3
