"""Brute-force reference semantics over enumerated lasso traces.

Everything here is deliberately simple and independent of the automata
pipeline; it exists to cross-validate the main algorithms on small inputs.
Counts produced from a finite trace universe are lower bounds on the true
counts: they become exact once the universe is large enough to separate
all counted projections.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import ResourceGuardError, ValidationError
from .formula import (
    And,
    Atom,
    Eventually,
    FalseConst,
    HyperFormula,
    Implies,
    LtlFormula,
    NegAtom,
    Next,
    Not,
    Or,
    QuantitativeHyperproperty,
    Release,
    TraceEq,
    TrueConst,
    Until,
    compare,
    desugar,
    free_trace_vars,
    rename_var,
    validate_property,
)
from .kripke import KripkeStructure, enumerate_lassos, lasso_trace

Letter = frozenset[str]


@dataclass(frozen=True)
class Trace:
    """Ultimately periodic trace: stem letters then loop letters forever."""

    stem: tuple[Letter, ...]
    loop: tuple[Letter, ...]

    def letter(self, i: int) -> Letter:
        if i < len(self.stem):
            return self.stem[i]
        return self.loop[(i - len(self.stem)) % len(self.loop)]


def canonical_trace(t: Trace) -> Trace:
    """Unique representation: primitive loop, shortest stem."""
    loop = t.loop
    n = len(loop)
    for d in range(1, n + 1):
        if n % d == 0 and loop == loop[:d] * (n // d):
            loop = loop[:d]
            break
    stem = t.stem
    while stem and stem[-1] == loop[-1]:
        stem = stem[:-1]
        loop = (loop[-1],) + loop[:-1]
    return Trace(stem, loop)


def project_trace(t: Trace, props: frozenset[str]) -> Trace:
    return canonical_trace(
        Trace(
            tuple(x & props for x in t.stem),
            tuple(x & props for x in t.loop),
        )
    )


def trace_key(t: Trace):
    return (
        len(t.stem),
        len(t.loop),
        tuple(tuple(sorted(x)) for x in t.stem + t.loop),
    )


def all_traces(k: KripkeStructure, max_len: int) -> list[Trace]:
    """Distinct canonical traces of lassos with total length <= max_len."""
    seen: set[Trace] = set()
    for l in enumerate_lassos(k, max_len):
        stem, loop = lasso_trace(k, l)
        seen.add(canonical_trace(Trace(stem, loop)))
    return sorted(seen, key=trace_key)


# ---------------------------------------------------------------------------
# exact evaluation on joint lassos


def _joint_positions(env: dict[str, Trace]) -> tuple[int, int]:
    """Stem length and period of the joint unrolling of all traces."""
    s = max((len(t.stem) for t in env.values()), default=0)
    p = 1
    for t in env.values():
        p = math.lcm(p, len(t.loop))
    return s, p


def eval_ltl(f: LtlFormula, env: dict[str, Trace]) -> bool:
    """Exact satisfaction at position 0 under the given trace binding."""
    missing = free_trace_vars(f) - env.keys()
    if missing:
        raise ValidationError(f"unbound trace variable {sorted(missing)[0]!r}")
    g = desugar(f)
    s, p = _joint_positions(env)
    n = s + p

    def succ(i: int) -> int:
        return i + 1 if i + 1 < n else s

    memo: dict[LtlFormula, list[bool]] = {}

    def arr(node: LtlFormula) -> list[bool]:
        if node in memo:
            return memo[node]
        match node:
            case TrueConst():
                out = [True] * n
            case FalseConst():
                out = [False] * n
            case Atom(prop, var):
                tr = env[var]
                out = [prop in tr.letter(i) for i in range(n)]
            case NegAtom(prop, var):
                tr = env[var]
                out = [prop not in tr.letter(i) for i in range(n)]
            case Not(c):
                out = [not v for v in arr(c)]
            case And(l, r):
                la, ra = arr(l), arr(r)
                out = [a and b for a, b in zip(la, ra)]
            case Or(l, r):
                la, ra = arr(l), arr(r)
                out = [a or b for a, b in zip(la, ra)]
            case Next(c):
                ca = arr(c)
                out = [ca[succ(i)] for i in range(n)]
            case Until(l, r):
                la, ra = arr(l), arr(r)
                out = [False] * n  # least fixpoint
                changed = True
                while changed:
                    changed = False
                    for i in reversed(range(n)):
                        v = ra[i] or (la[i] and out[succ(i)])
                        if v != out[i]:
                            out[i] = v
                            changed = True
            case Release(l, r):
                la, ra = arr(l), arr(r)
                out = [True] * n  # greatest fixpoint
                changed = True
                while changed:
                    changed = False
                    for i in reversed(range(n)):
                        v = ra[i] and (la[i] or out[succ(i)])
                        if v != out[i]:
                            out[i] = v
                            changed = True
            case _:
                raise TypeError(f"unexpected node {node!r}")
        memo[node] = out
        return out

    return arr(g)[0]


def eval_ltl_bounded(
    f: LtlFormula, env: dict[str, Trace], horizon: int | None = None
) -> bool:
    """Step-bounded reference evaluation.

    Unfolds the recursive expansions of until/release up to the horizon and
    then defaults them (until false, release true).  Agrees with eval_ltl
    whenever the horizon covers three joint stem+period rounds, which the
    default guarantees.
    """
    g = desugar(f)
    s, p = _joint_positions(env)
    h = horizon if horizon is not None else 3 * (s + p)

    memo: dict[tuple[LtlFormula, int], bool] = {}

    def letter(var: str, i: int) -> Letter:
        return env[var].letter(i)

    def ev(node: LtlFormula, i: int) -> bool:
        key = (node, i)
        if key in memo:
            return memo[key]
        match node:
            case TrueConst():
                v = True
            case FalseConst():
                v = False
            case Atom(prop, var):
                v = prop in letter(var, i)
            case NegAtom(prop, var):
                v = prop not in letter(var, i)
            case Not(c):
                v = not ev(c, i)
            case And(l, r):
                v = ev(l, i) and ev(r, i)
            case Or(l, r):
                v = ev(l, i) or ev(r, i)
            case Next(c):
                v = ev(c, i + 1)
            case Until(l, r):
                if i >= h:
                    v = False
                else:
                    v = ev(r, i) or (ev(l, i) and ev(node, i + 1))
            case Release(l, r):
                if i >= h:
                    v = True
                else:
                    v = ev(r, i) and (ev(l, i) or ev(node, i + 1))
            case _:
                raise TypeError(f"unexpected node {node!r}")
        memo[key] = v
        return v

    return ev(g, 0)


def eval_hyper(
    h: HyperFormula,
    traces: list[Trace],
    env: dict[str, Trace] | None = None,
) -> bool:
    """Evaluate a quantified formula over a finite trace universe."""
    env = dict(env) if env else {}

    def go(i: int) -> bool:
        if i == len(h.prefix):
            return eval_ltl(h.body, env)
        kind, var = h.prefix[i]
        for t in traces:
            env[var] = t
            v = go(i + 1)
            if kind == "exists" and v:
                del env[var]
                return True
            if kind == "forall" and not v:
                del env[var]
                return False
        if var in env:
            del env[var]
        return kind == "forall"

    return go(0)


# ---------------------------------------------------------------------------
# counting oracle


@dataclass
class OracleReport:
    holds: bool
    counts: dict[tuple[Trace, ...], int]
    trace_count: int
    max_len: int
    bounded: bool = True  # counts are lower bounds within the universe


def _guarded_tuples(
    p: QuantitativeHyperproperty,
    traces: list[Trace],
    tuple_ceiling: int,
):
    k = len(p.universals)
    if len(traces) ** k > tuple_ceiling:
        raise ResourceGuardError(
            f"{len(traces)}^{k} trace tuples exceed ceiling {tuple_ceiling}"
        )
    for tup in itertools.product(traces, repeat=k):
        env = dict(zip(p.universals, tup))
        if eval_hyper(p.guard, traces, env):
            yield tup, env


def oracle_count(
    k: KripkeStructure,
    p: QuantitativeHyperproperty,
    max_len: int,
    tuple_ceiling: int = 10**6,
) -> OracleReport:
    """Count counted-variable projections per guarded tuple by enumeration."""
    errs = validate_property(p, frozenset(k.ap))
    if errs:
        raise ValidationError("; ".join(errs))
    traces = all_traces(k, max_len)
    counts: dict[tuple[Trace, ...], int] = {}
    holds = True
    for tup, env in _guarded_tuples(p, traces, tuple_ceiling):
        projs: set[Trace] = set()
        for t in traces:
            env2 = dict(env)
            env2[p.count_var] = t
            if eval_hyper(p.body, traces, env2):
                projs.add(project_trace(t, p.projection))
        counts[tup] = len(projs)
        if not compare(len(projs), p.cmp, p.bound):
            holds = False
    return OracleReport(
        holds=holds,
        counts=counts,
        trace_count=len(traces),
        max_len=max_len,
    )


# ---------------------------------------------------------------------------
# reduction to a plain quantified formula


def _fresh_names(base: str, count: int, used: set[str]) -> list[str]:
    out: list[str] = []
    i = 1
    while len(out) < count:
        cand = f"{base}{i}"
        if cand not in used:
            used.add(cand)
            out.append(cand)
        i += 1
    return out


def _pairwise_diffs(vars_: list[str], props: frozenset[str]) -> LtlFormula:
    conj: LtlFormula | None = None
    for a, b in itertools.combinations(vars_, 2):
        d = Eventually(Not(TraceEq(a, b, props)))
        conj = d if conj is None else And(conj, d)
    return conj if conj is not None else TrueConst()


def _conj(parts: list[LtlFormula]) -> LtlFormula:
    out: LtlFormula | None = None
    for f in parts:
        out = f if out is None else And(out, f)
    return out if out is not None else TrueConst()


def _disj(parts: list[LtlFormula]) -> LtlFormula:
    out: LtlFormula | None = None
    for f in parts:
        out = f if out is None else Or(out, f)
    return out if out is not None else FalseConst()


def _instantiate_body(
    p: QuantitativeHyperproperty, witness: str, used: set[str]
) -> tuple[list[tuple[str, str]], LtlFormula]:
    """Body copy for one witness variable, inner prefix renamed fresh."""
    matrix = rename_var(p.body.body, p.count_var, witness)
    prefix: list[tuple[str, str]] = []
    for kind, v in p.body.prefix:
        (nv,) = _fresh_names(v, 1, used)
        matrix = rename_var(matrix, v, nv)
        prefix.append((kind, nv))
    return prefix, matrix


def expansion_formula(p: QuantitativeHyperproperty) -> HyperFormula:
    """Equivalent plain quantified formula, fully prenexed.

    The count comparison is unfolded into explicitly quantified witness
    variables that are pairwise different on the projection set.  Inner
    prefixes of guard and body are hoisted into the outer prefix (with
    fresh names); hoisting flips guard quantifiers that sit in premise
    positions and body quantifiers under negation.
    """
    used = set(p.universals) | {p.count_var}
    used |= {v for _, v in p.guard.prefix} | {v for _, v in p.body.prefix}
    n = p.bound

    def upper_part(m: int) -> tuple[list[tuple[str, str]], LtlFormula]:
        # violated by m pairwise-different witnesses; premise position
        ws = _fresh_names(p.count_var, m, used)
        prefix: list[tuple[str, str]] = [("forall", w) for w in ws]
        # guard's existential prefix sits in the premise: hoists universally
        gmatrix = p.guard.body
        for kind, v in p.guard.prefix:
            (nv,) = _fresh_names(v, 1, used)
            gmatrix = rename_var(gmatrix, v, nv)
            prefix.append(("forall" if kind == "exists" else "exists", nv))
        negs: list[LtlFormula] = []
        for w in ws:
            bprefix, bmatrix = _instantiate_body(p, w, used)
            for kind, v in bprefix:
                # under negation: exists becomes forall
                prefix.append(("forall" if kind == "exists" else "exists", v))
            negs.append(Not(bmatrix))
        matrix = Implies(
            And(gmatrix, _pairwise_diffs(ws, p.projection)), _disj(negs)
        )
        return prefix, matrix

    def lower_part(m: int) -> tuple[list[tuple[str, str]], LtlFormula]:
        # requires m pairwise-different witnesses; conclusion position
        ws = _fresh_names(p.count_var, m, used)
        prefix: list[tuple[str, str]] = [("exists", w) for w in ws]
        gmatrix = p.guard.body
        for kind, v in p.guard.prefix:
            (nv,) = _fresh_names(v, 1, used)
            gmatrix = rename_var(gmatrix, v, nv)
            prefix.append(("forall" if kind == "exists" else "exists", nv))
        bodies: list[LtlFormula] = []
        for w in ws:
            bprefix, bmatrix = _instantiate_body(p, w, used)
            prefix.extend(bprefix)
            bodies.append(bmatrix)
        matrix = Implies(
            gmatrix, And(_pairwise_diffs(ws, p.projection), _conj(bodies))
        )
        return prefix, matrix

    outer: list[tuple[str, str]] = [("forall", u) for u in p.universals]
    match p.cmp:
        case "<=":
            pre, mat = upper_part(n + 1)
        case "<":
            pre, mat = upper_part(n)
        case ">=":
            pre, mat = lower_part(n)
        case ">":
            pre, mat = lower_part(n + 1)
        case "=":
            pre1, mat1 = upper_part(n + 1)
            pre2, mat2 = lower_part(n)
            pre, mat = pre1 + pre2, And(mat1, mat2)
        case _:
            raise ValidationError(f"unknown comparison {p.cmp!r}")
    return HyperFormula(tuple(outer + pre), mat)


def oracle_check_expansion(
    k: KripkeStructure,
    p: QuantitativeHyperproperty,
    max_len: int,
    tuple_ceiling: int = 10**6,
) -> bool:
    """Decide the property over the trace universe via witness assembly.

    Mirrors the expanded quantified formula: for each guarded tuple it
    greedily assembles pairwise-different witness traces, spending one
    temporal evaluation per candidate body check and per pairwise
    difference check.  Class-ordered assembly is complete here because
    projection difference is an equivalence on candidate traces.
    """
    errs = validate_property(p, frozenset(k.ap))
    if errs:
        raise ValidationError("; ".join(errs))
    traces = all_traces(k, max_len)

    # candidates grouped by projection class, classes in canonical order
    classes: dict[Trace, list[Trace]] = {}
    for t in traces:
        classes.setdefault(project_trace(t, p.projection), []).append(t)
    ordered = [classes[key] for key in sorted(classes, key=trace_key)]

    diff = Eventually(Not(TraceEq("l", "r", p.projection)))

    def assemble(env: dict[str, Trace], m: int) -> bool:
        """Can m pairwise-different body witnesses be found?"""
        chosen: list[Trace] = []
        for members in ordered:
            if len(chosen) >= m:
                break
            for t in members:
                env2 = dict(env)
                env2[p.count_var] = t
                if not eval_hyper(p.body, traces, env2):
                    continue
                if all(
                    eval_ltl(diff, {"l": c, "r": t}) for c in chosen
                ):
                    chosen.append(t)
                    break
        return len(chosen) >= m

    n = p.bound
    holds = True
    for _tup, env in _guarded_tuples(p, traces, tuple_ceiling):
        match p.cmp:
            case "<=":
                ok = not assemble(env, n + 1)
            case "<":
                ok = not assemble(env, n)
            case ">=":
                ok = assemble(env, n)
            case ">":
                ok = assemble(env, n + 1)
            case "=":
                ok = assemble(env, n) and not assemble(env, n + 1)
            case _:
                raise ValidationError(f"unknown comparison {p.cmp!r}")
        if not ok:
            holds = False
            break
    return holds
