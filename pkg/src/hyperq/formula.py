"""Temporal formula AST and syntactic transformations.

Atoms are indexed by trace variables: ``Atom("a", "pi")`` holds when
proposition ``a`` is in the current letter of the trace bound to ``pi``.
All node classes are frozen dataclasses, so formulas hash and compare
structurally and can be used as dictionary keys.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

TraceVar = str

COMPARISONS = ("<=", "<", "=", ">=", ">")


class LtlFormula:
    """Base class for temporal formula nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class TrueConst(LtlFormula):
    pass


@dataclass(frozen=True)
class FalseConst(LtlFormula):
    pass


@dataclass(frozen=True)
class Atom(LtlFormula):
    prop: str
    var: TraceVar


@dataclass(frozen=True)
class NegAtom(LtlFormula):
    prop: str
    var: TraceVar


@dataclass(frozen=True)
class Not(LtlFormula):
    child: LtlFormula


@dataclass(frozen=True)
class And(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Or(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Implies(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Next(LtlFormula):
    child: LtlFormula


@dataclass(frozen=True)
class Until(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Release(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class WeakUntil(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Eventually(LtlFormula):
    child: LtlFormula


@dataclass(frozen=True)
class Globally(LtlFormula):
    child: LtlFormula


@dataclass(frozen=True)
class TraceEq(LtlFormula):
    """Stepwise agreement of two traces on a proposition set."""

    left_var: TraceVar
    right_var: TraceVar
    props: frozenset[str]


# Node kinds that survive desugaring.
CORE_KINDS = (
    TrueConst,
    FalseConst,
    Atom,
    NegAtom,
    Not,
    And,
    Or,
    Next,
    Until,
    Release,
)


def subformulas(f: LtlFormula) -> Iterator[LtlFormula]:
    """Yield every node of f, including f itself (preorder)."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        match node:
            case Not(c) | Next(c) | Eventually(c) | Globally(c):
                stack.append(c)
            case (
                And(l, r)
                | Or(l, r)
                | Implies(l, r)
                | Until(l, r)
                | Release(l, r)
                | WeakUntil(l, r)
            ):
                stack.append(l)
                stack.append(r)
            case _:
                pass


def formula_size(f: LtlFormula) -> int:
    """Number of AST nodes."""
    return sum(1 for _ in subformulas(f))


def free_trace_vars(f: LtlFormula) -> frozenset[TraceVar]:
    out: set[TraceVar] = set()
    for node in subformulas(f):
        match node:
            case Atom(_, v) | NegAtom(_, v):
                out.add(v)
            case TraceEq(lv, rv, _):
                out.add(lv)
                out.add(rv)
            case _:
                pass
    return frozenset(out)


def props_of(f: LtlFormula) -> frozenset[str]:
    out: set[str] = set()
    for node in subformulas(f):
        match node:
            case Atom(p, _) | NegAtom(p, _):
                out.add(p)
            case TraceEq(_, _, ps):
                out |= ps
            case _:
                pass
    return frozenset(out)


def indexed_atoms(f: LtlFormula) -> frozenset[tuple[str, TraceVar]]:
    """All (proposition, trace variable) pairs read by f."""
    out: set[tuple[str, TraceVar]] = set()
    for node in subformulas(f):
        match node:
            case Atom(p, v) | NegAtom(p, v):
                out.add((p, v))
            case TraceEq(lv, rv, ps):
                for p in ps:
                    out.add((p, lv))
                    out.add((p, rv))
            case _:
                pass
    return frozenset(out)


def rename_var(f: LtlFormula, old: TraceVar, new: TraceVar) -> LtlFormula:
    """Substitute trace variable old by new in every atom."""

    def go(n: LtlFormula) -> LtlFormula:
        match n:
            case Atom(p, v):
                return Atom(p, new) if v == old else n
            case NegAtom(p, v):
                return NegAtom(p, new) if v == old else n
            case TraceEq(lv, rv, ps):
                lv2 = new if lv == old else lv
                rv2 = new if rv == old else rv
                return TraceEq(lv2, rv2, ps)
            case Not(c):
                return Not(go(c))
            case Next(c):
                return Next(go(c))
            case Eventually(c):
                return Eventually(go(c))
            case Globally(c):
                return Globally(go(c))
            case And(l, r):
                return And(go(l), go(r))
            case Or(l, r):
                return Or(go(l), go(r))
            case Implies(l, r):
                return Implies(go(l), go(r))
            case Until(l, r):
                return Until(go(l), go(r))
            case Release(l, r):
                return Release(go(l), go(r))
            case WeakUntil(l, r):
                return WeakUntil(go(l), go(r))
            case _:
                return n

    return go(f)


def desugar(f: LtlFormula) -> LtlFormula:
    """Rewrite to the core fragment.

    Removes Implies, Eventually, Globally, WeakUntil and TraceEq; the
    result only contains the kinds in CORE_KINDS.  Negations are kept
    as-is (push them with nnf afterwards).
    """
    match f:
        case TrueConst() | FalseConst() | Atom(_, _) | NegAtom(_, _):
            return f
        case Not(c):
            return Not(desugar(c))
        case And(l, r):
            return And(desugar(l), desugar(r))
        case Or(l, r):
            return Or(desugar(l), desugar(r))
        case Implies(l, r):
            return Or(Not(desugar(l)), desugar(r))
        case Next(c):
            return Next(desugar(c))
        case Until(l, r):
            return Until(desugar(l), desugar(r))
        case Release(l, r):
            return Release(desugar(l), desugar(r))
        case Eventually(c):
            return Until(TrueConst(), desugar(c))
        case Globally(c):
            return Release(FalseConst(), desugar(c))
        case WeakUntil(l, r):
            # l W r == r R (r | l)
            dl, dr = desugar(l), desugar(r)
            return Release(dr, Or(dr, dl))
        case TraceEq(lv, rv, ps):
            if not ps:
                return TrueConst()
            conj: LtlFormula | None = None
            for p in sorted(ps):
                both = Or(
                    And(Atom(p, lv), Atom(p, rv)),
                    And(NegAtom(p, lv), NegAtom(p, rv)),
                )
                conj = both if conj is None else And(conj, both)
            assert conj is not None
            return conj
        case _:
            raise TypeError(f"unknown formula node {f!r}")


def nnf(f: LtlFormula) -> LtlFormula:
    """Negation normal form of a desugared formula.

    Result contains no Not nodes and is at most twice the input size.
    """

    def pos(n: LtlFormula) -> LtlFormula:
        match n:
            case TrueConst() | FalseConst() | Atom(_, _) | NegAtom(_, _):
                return n
            case Not(c):
                return neg(c)
            case And(l, r):
                return And(pos(l), pos(r))
            case Or(l, r):
                return Or(pos(l), pos(r))
            case Next(c):
                return Next(pos(c))
            case Until(l, r):
                return Until(pos(l), pos(r))
            case Release(l, r):
                return Release(pos(l), pos(r))
            case _:
                raise TypeError(f"nnf requires a desugared formula, got {n!r}")

    def neg(n: LtlFormula) -> LtlFormula:
        match n:
            case TrueConst():
                return FalseConst()
            case FalseConst():
                return TrueConst()
            case Atom(p, v):
                return NegAtom(p, v)
            case NegAtom(p, v):
                return Atom(p, v)
            case Not(c):
                return pos(c)
            case And(l, r):
                return Or(neg(l), neg(r))
            case Or(l, r):
                return And(neg(l), neg(r))
            case Next(c):
                return Next(neg(c))
            case Until(l, r):
                return Release(neg(l), neg(r))
            case Release(l, r):
                return Until(neg(l), neg(r))
            case _:
                raise TypeError(f"nnf requires a desugared formula, got {n!r}")

    return pos(f)


@dataclass(frozen=True)
class HyperFormula:
    """A quantifier prefix over trace variables plus a temporal body.

    prefix entries are ("forall" | "exists", variable).  Variables in the
    prefix must be pairwise distinct.
    """

    prefix: tuple[tuple[str, TraceVar], ...]
    body: LtlFormula

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for kind, var in self.prefix:
            if kind not in ("forall", "exists"):
                raise ValueError(f"bad quantifier kind {kind!r}")
            if var in seen:
                raise ValueError(f"duplicate quantified variable {var!r}")
            seen.add(var)

    @property
    def bound_vars(self) -> frozenset[TraceVar]:
        return frozenset(v for _, v in self.prefix)

    @property
    def free_vars(self) -> frozenset[TraceVar]:
        return free_trace_vars(self.body) - self.bound_vars


@dataclass(frozen=True)
class QuantitativeHyperproperty:
    """forall u1..uk . guard -> (count cv : projection . body) cmp bound.

    guard and body may carry their own existential prefixes.  The counted
    objects are distinct projections (onto `projection`) of traces bound
    to count_var that satisfy body.
    """

    universals: tuple[TraceVar, ...]
    guard: HyperFormula
    count_var: TraceVar
    projection: frozenset[str]
    body: HyperFormula
    cmp: str
    bound: int


def negate_cmp(cmp: str) -> str:
    """Comparison characterizing a violation of `count cmp bound`."""
    table = {"<=": ">", "<": ">=", "=": "!=", ">=": "<", ">": "<="}
    return table[cmp]


def compare(value: int | None, cmp: str, bound: int) -> bool:
    """Evaluate `value cmp bound`; value None means infinite."""
    if value is None:
        return cmp in (">=", ">") or (cmp == "!=")
    match cmp:
        case "<=":
            return value <= bound
        case "<":
            return value < bound
        case "=":
            return value == bound
        case "!=":
            return value != bound
        case ">=":
            return value >= bound
        case ">":
            return value > bound
    raise ValueError(f"bad comparison {cmp!r}")


def validate_property(
    p: QuantitativeHyperproperty, model_ap: frozenset[str]
) -> list[str]:
    """Structural checks; returns a list of human-readable problems."""
    errs: list[str] = []
    if p.cmp not in COMPARISONS:
        errs.append(f"unknown comparison {p.cmp!r}")
    if p.bound < 0:
        errs.append(f"negative bound {p.bound}")
    if len(set(p.universals)) != len(p.universals):
        errs.append("duplicate universal trace variable")
    if p.count_var in p.universals:
        errs.append(f"counted variable {p.count_var!r} is also universal")

    outer = set(p.universals)
    guard_inner = {v for _, v in p.guard.prefix}
    body_inner = {v for _, v in p.body.prefix}
    for v in guard_inner | body_inner:
        if v in outer or v == p.count_var:
            errs.append(f"inner variable {v!r} shadows an outer variable")
    if guard_inner & body_inner:
        clash = sorted(guard_inner & body_inner)[0]
        errs.append(f"inner variable {clash!r} used in both guard and body")

    for v in sorted(p.guard.free_vars):
        if v not in outer:
            errs.append(f"unbound trace variable {v!r} in guard")
    for v in sorted(p.body.free_vars):
        if v not in outer and v != p.count_var:
            errs.append(f"unbound trace variable {v!r} in body")

    for a in sorted(p.projection):
        if a not in model_ap:
            errs.append(f"unknown proposition {a!r} in projection set")
    for a in sorted(props_of(p.guard.body) | props_of(p.body.body)):
        if a not in model_ap:
            errs.append(f"unknown proposition {a!r}")
    return errs
