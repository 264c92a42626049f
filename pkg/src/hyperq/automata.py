"""Automata pipeline: formulas to alternating automata to Buchi products.

The pipeline builds one word automaton whose language is exactly the set
of joint letter sequences (letters valued over proposition/trace-variable
pairs) that satisfy the guard and body matrix while every composed trace
variable follows a run of the model.  Guards on edges are conjunctions of
literals; propositions absent from a guard are unconstrained.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ValidationError
from .formula import (
    And,
    Atom,
    FalseConst,
    LtlFormula,
    NegAtom,
    Next,
    Or,
    Release,
    TrueConst,
    Until,
    indexed_atoms,
)
from .kripke import KripkeStructure

IProp = tuple[str, str]  # (proposition, trace variable)
Guard = frozenset[tuple[IProp, bool]]
Letter = frozenset[IProp]


# ---------------------------------------------------------------------------
# guards


def guard_consistent(g: Guard) -> bool:
    pos = {ip for ip, v in g if v}
    neg = {ip for ip, v in g if not v}
    return not (pos & neg)


def guard_merge(a: Guard, b: Guard) -> Guard | None:
    m = a | b
    return m if guard_consistent(m) else None


def guard_matches(g: Guard, letter: Letter) -> bool:
    """letter is a full assignment: present means true."""
    return all((ip in letter) == want for ip, want in g)


def guard_project(g: Guard, props: frozenset[IProp]) -> Guard:
    return frozenset((ip, v) for ip, v in g if ip in props)


def guard_expand(g: Guard, props: frozenset[IProp]) -> list[Letter]:
    """All full letters over props compatible with the guard."""
    fixed = {ip: v for ip, v in g if ip in props}
    free = sorted(props - fixed.keys())
    base = frozenset(ip for ip, v in fixed.items() if v)
    out = []
    for bits in itertools.product((False, True), repeat=len(free)):
        extra = frozenset(ip for ip, b in zip(free, bits) if b)
        out.append(base | extra)
    return out


def guard_text(g: Guard) -> str:
    if not g:
        return "true"
    parts = []
    for (prop, var), v in sorted(g):
        lit = f"{prop}@{var}"
        parts.append(lit if v else "!" + lit)
    return " & ".join(parts)


# ---------------------------------------------------------------------------
# transition trees for alternating automata


class TransNode:
    __slots__ = ()


@dataclass(frozen=True)
class TTrue(TransNode):
    pass


@dataclass(frozen=True)
class TFalse(TransNode):
    pass


@dataclass(frozen=True)
class TLit(TransNode):
    ip: IProp
    positive: bool


@dataclass(frozen=True)
class TState(TransNode):
    q: object


@dataclass(frozen=True)
class TAnd(TransNode):
    children: tuple[TransNode, ...]


@dataclass(frozen=True)
class TOr(TransNode):
    children: tuple[TransNode, ...]


def dnf(tree: TransNode) -> list[tuple[Guard, frozenset]]:
    """Disjuncts (guard, successor set); empty list means false."""
    match tree:
        case TTrue():
            return [(frozenset(), frozenset())]
        case TFalse():
            return []
        case TLit(ip, positive):
            return [(frozenset({(ip, positive)}), frozenset())]
        case TState(q):
            return [(frozenset(), frozenset({q}))]
        case TOr(children):
            out = []
            seen = set()
            for c in children:
                for d in dnf(c):
                    if d not in seen:
                        seen.add(d)
                        out.append(d)
            return out
        case TAnd(children):
            acc: list[tuple[Guard, frozenset]] = [(frozenset(), frozenset())]
            for c in children:
                nxt = []
                for g1, s1 in acc:
                    for g2, s2 in dnf(c):
                        m = guard_merge(g1, g2)
                        if m is not None:
                            nxt.append((m, s1 | s2))
                acc = nxt
            out = []
            seen = set()
            for d in acc:
                if d not in seen:
                    seen.add(d)
                    out.append(d)
            return out
        case _:
            raise TypeError(f"unknown tree node {tree!r}")


@dataclass
class AlternatingBuchiAutomaton:
    states: set
    initial: object
    delta: dict
    accepting: set
    alphabet: frozenset[IProp]
    composed_vars: frozenset[str] = frozenset()


@dataclass
class BuchiAutomaton:
    states: set
    initials: set
    edges: dict  # state -> list[(Guard, state)]
    accepting: set
    alphabet: frozenset[IProp]
    composed_vars: frozenset[str] = frozenset()

    def sorted_states(self) -> list:
        return sorted(self.states, key=repr)


# ---------------------------------------------------------------------------
# formula -> alternating automaton


def ltl_to_aba(
    f: LtlFormula, alphabet: frozenset[IProp] | None = None
) -> AlternatingBuchiAutomaton:
    """Build an alternating automaton for a desugared formula in negation
    normal form.  One state per temporal subformula; boolean structure is
    inlined into the transition trees."""
    if alphabet is None:
        alphabet = indexed_atoms(f)
    counter = itertools.count()
    delta: dict = {}
    accepting: set = set()

    def build(node: LtlFormula) -> int:
        q = next(counter)
        match node:
            case TrueConst():
                delta[q] = TTrue()
            case FalseConst():
                delta[q] = TFalse()
            case Atom(p, v):
                delta[q] = TLit((p, v), True)
            case NegAtom(p, v):
                delta[q] = TLit((p, v), False)
            case And(l, r):
                delta[q] = TAnd((delta[build(l)], delta[build(r)]))
            case Or(l, r):
                delta[q] = TOr((delta[build(l)], delta[build(r)]))
            case Next(c):
                delta[q] = TState(build(c))
            case Until(l, r):
                tl, tr = delta[build(l)], delta[build(r)]
                delta[q] = TOr((tr, TAnd((tl, TState(q)))))
            case Release(l, r):
                tl, tr = delta[build(l)], delta[build(r)]
                delta[q] = TAnd((tr, TOr((tl, TState(q)))))
                accepting.add(q)
            case _:
                raise ValidationError(
                    f"automaton construction needs a normalized formula, "
                    f"got {node!r}"
                )
        return q

    q0 = build(f)
    return AlternatingBuchiAutomaton(
        states=set(delta),
        initial=q0,
        delta=delta,
        accepting=accepting,
        alphabet=alphabet,
    )


# ---------------------------------------------------------------------------
# alternation removal (breakpoint construction)


def aba_to_nba(a: AlternatingBuchiAutomaton) -> BuchiAutomaton:
    """Remove alternation; tracks the set of pending states plus the subset
    still owing a visit to an accepting state."""
    dnf_map = {q: dnf(a.delta[q]) for q in a.states}
    acc = frozenset(a.accepting)

    def start() -> tuple[frozenset, frozenset]:
        s = frozenset({a.initial})
        return (s, s - acc)

    init = start()
    edges: dict = {}
    todo = [init]
    seen = {init}
    while todo:
        node = todo.pop()
        s, o = node
        outs = []
        produced = set()
        qs = sorted(s)
        for combo in itertools.product(*(dnf_map[q] for q in qs)):
            guard: Guard = frozenset()
            ok = True
            for g, _ in combo:
                merged = guard_merge(guard, g)
                if merged is None:
                    ok = False
                    break
                guard = merged
            if not ok:
                continue
            succ = frozenset().union(*(t for _, t in combo)) if combo else frozenset()
            if o:
                carried = frozenset().union(
                    *(combo[qs.index(q)][1] for q in o)
                ) if o else frozenset()
                o2 = carried - acc
            else:
                o2 = succ - acc
            dst = (succ, o2)
            key = (guard, dst)
            if key in produced:
                continue
            produced.add(key)
            outs.append(key)
            if dst not in seen:
                seen.add(dst)
                todo.append(dst)
        edges[node] = outs
    return BuchiAutomaton(
        states=set(seen),
        initials={init},
        edges=edges,
        accepting={n for n in seen if not n[1]},
        alphabet=a.alphabet,
        composed_vars=a.composed_vars,
    )


# ---------------------------------------------------------------------------
# products with the model


def _var_props(alphabet: frozenset[IProp], var: str) -> frozenset[IProp]:
    return frozenset(ip for ip in alphabet if ip[1] == var)


def _split_guard_on_var(g: Guard, var: str) -> tuple[Guard, Guard]:
    mine = frozenset((ip, v) for ip, v in g if ip[1] == var)
    rest = frozenset((ip, v) for ip, v in g if ip[1] != var)
    return mine, rest


def _label_ok(lits: Guard, label: frozenset[str]) -> bool:
    return all((prop in label) == want for (prop, _), want in lits)


def _product_nba(
    n: BuchiAutomaton,
    k: KripkeStructure,
    var: str,
    keep_labels: bool,
) -> BuchiAutomaton:
    """Pair automaton states with model states tracked for one variable.

    With keep_labels the letters must repeat the tracked state's label on
    var's propositions (the variable stays part of the alphabet); without,
    those propositions are consumed and removed from the alphabet.
    """
    label_guard: dict[str, Guard] = {}
    if keep_labels:
        for s in k.states:
            lab = k.label(s)
            label_guard[s] = frozenset(
                ((p, var), p in lab) for p in k.ap
            )

    init_nodes = {(q, k.init) for q in n.initials}
    edges: dict = {}
    todo = sorted(init_nodes, key=repr)
    seen = set(init_nodes)
    while todo:
        node = todo.pop()
        q, s = node
        outs = []
        produced = set()
        for g, q2 in n.edges.get(q, ()):
            mine, rest = _split_guard_on_var(g, var)
            if not _label_ok(mine, k.label(s)):
                continue
            if keep_labels:
                g2 = guard_merge(rest, label_guard[s])
                if g2 is None:
                    continue
            else:
                g2 = rest
            for s2 in k.successors(s):
                dst = (q2, s2)
                key = (g2, dst)
                if key in produced:
                    continue
                produced.add(key)
                outs.append(key)
                if dst not in seen:
                    seen.add(dst)
                    todo.append(dst)
        edges[node] = outs

    if keep_labels:
        alphabet = n.alphabet | frozenset((p, var) for p in k.ap)
    else:
        alphabet = n.alphabet - _var_props(n.alphabet, var)
    return BuchiAutomaton(
        states=set(seen),
        initials=set(init_nodes),
        edges=edges,
        accepting={(q, s) for (q, s) in seen if q in n.accepting},
        alphabet=alphabet,
        composed_vars=n.composed_vars | ({var} if keep_labels else frozenset()),
    )


def _wrap_nba_as_aba(n: BuchiAutomaton) -> AlternatingBuchiAutomaton:
    """View a nondeterministic automaton as a (purely disjunctive) ABA."""
    delta: dict = {}
    for q in n.states:
        parts = []
        for g, q2 in n.edges.get(q, ()):
            lits = tuple(TLit(ip, v) for ip, v in sorted(g))
            parts.append(TAnd(lits + (TState(q2),)))
        delta[q] = TOr(tuple(parts)) if parts else TFalse()
    inits = sorted(n.initials, key=repr)
    if len(inits) == 1:
        initial = inits[0]
        states = set(n.states)
        accepting = set(n.accepting)
    else:
        initial = ("<init>",)
        states = set(n.states) | {initial}
        delta[initial] = TOr(tuple(delta[i] for i in inits))
        accepting = set(n.accepting)
    return AlternatingBuchiAutomaton(
        states=states,
        initial=initial,
        delta=delta,
        accepting=accepting,
        alphabet=n.alphabet,
        composed_vars=n.composed_vars,
    )


def close_exists(
    a: AlternatingBuchiAutomaton, k: KripkeStructure, var: str
) -> AlternatingBuchiAutomaton:
    """Existentially close one trace variable against the model.

    The variable's propositions are consumed: a word is accepted iff some
    model trace can be substituted for the variable so that the original
    automaton accepts the combined word.
    """
    if not _var_props(a.alphabet, var):
        raise ValidationError(f"trace variable {var!r} not in alphabet")
    n = aba_to_nba(a)
    return _wrap_nba_as_aba(_product_nba(n, k, var, keep_labels=False))


def self_composition_product(
    a: AlternatingBuchiAutomaton, k: KripkeStructure, var: str
) -> AlternatingBuchiAutomaton:
    """Constrain one trace variable to follow the model, keeping its
    propositions observable in the alphabet."""
    if var in a.composed_vars:
        raise ValidationError(f"duplicate variable {var!r}")
    n = aba_to_nba(a)
    return _wrap_nba_as_aba(_product_nba(n, k, var, keep_labels=True))


# ---------------------------------------------------------------------------
# graph utilities


def strongly_connected_components(n: BuchiAutomaton) -> list[frozenset]:
    """Tarjan, iterative; deterministic component order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[frozenset] = []
    counter = itertools.count()

    for root in n.sorted_states():
        if root in index:
            continue
        work = [(root, iter([q2 for _, q2 in n.edges.get(root, ())]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append(
                        (w, iter([q2 for _, q2 in n.edges.get(w, ())]))
                    )
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                out.append(frozenset(comp))
    return out


def _has_internal_edge(n: BuchiAutomaton, comp: frozenset) -> bool:
    for q in comp:
        for _, q2 in n.edges.get(q, ()):
            if q2 in comp:
                return True
    return False


def accepting_sccs(n: BuchiAutomaton) -> list[frozenset]:
    """Components that contain an accepting state and can cycle."""
    return [
        c
        for c in strongly_connected_components(n)
        if _has_internal_edge(n, c) and any(q in n.accepting for q in c)
    ]


def prune(n: BuchiAutomaton) -> BuchiAutomaton:
    """Keep states reachable from an initial state and able to reach an
    accepting cycle; the language is unchanged."""
    reach = set()
    todo = list(n.initials)
    while todo:
        q = todo.pop()
        if q in reach:
            continue
        reach.add(q)
        for _, q2 in n.edges.get(q, ()):
            todo.append(q2)

    good = set().union(*accepting_sccs(n)) if accepting_sccs(n) else set()
    rev: dict = {}
    for q in n.states:
        for _, q2 in n.edges.get(q, ()):
            rev.setdefault(q2, []).append(q)
    co = set()
    todo = list(good)
    while todo:
        q = todo.pop()
        if q in co:
            continue
        co.add(q)
        for q2 in rev.get(q, ()):
            todo.append(q2)

    keep = reach & co
    return BuchiAutomaton(
        states=keep,
        initials=n.initials & keep,
        edges={
            q: [(g, q2) for g, q2 in n.edges.get(q, ()) if q2 in keep]
            for q in keep
        },
        accepting=n.accepting & keep,
        alphabet=n.alphabet,
        composed_vars=n.composed_vars,
    )


def renumber(n: BuchiAutomaton) -> tuple[BuchiAutomaton, dict]:
    """Stable integer state names (breadth-first from the initial states);
    returns the renamed automaton and the old-to-new map."""
    order: dict = {}
    todo = sorted(n.initials, key=repr)
    for q in todo:
        order[q] = len(order)
    i = 0
    queue = list(todo)
    while i < len(queue):
        q = queue[i]
        i += 1
        for _, q2 in n.edges.get(q, ()):
            if q2 not in order:
                order[q2] = len(order)
                queue.append(q2)
    for q in n.sorted_states():  # unreachable leftovers, if any
        if q not in order:
            order[q] = len(order)
    m = BuchiAutomaton(
        states={order[q] for q in n.states},
        initials={order[q] for q in n.initials},
        edges={
            order[q]: sorted(
                ((g, order[q2]) for g, q2 in n.edges.get(q, ())),
                key=lambda e: (e[1], sorted(e[0])),
            )
            for q in n.states
        },
        accepting={order[q] for q in n.accepting},
        alphabet=n.alphabet,
        composed_vars=n.composed_vars,
    )
    return m, order


def nba_is_empty(n: BuchiAutomaton) -> bool:
    return not prune(n).states


def nba_accepts_lasso(
    n: BuchiAutomaton,
    stem: tuple[Letter, ...],
    loop: tuple[Letter, ...],
) -> bool:
    """Membership of an ultimately periodic word (full letters)."""
    assert loop, "empty loop"
    total = len(stem) + len(loop)

    def letter(i: int) -> Letter:
        return stem[i] if i < len(stem) else loop[i - len(stem)]

    def nxt(i: int) -> int:
        return i + 1 if i + 1 < total else len(stem)

    nodes = set()
    todo = [(0, q) for q in n.initials]
    while todo:
        node = todo.pop()
        if node in nodes:
            continue
        nodes.add(node)
        i, q = node
        for g, q2 in n.edges.get(q, ()):
            if guard_matches(g, letter(i)):
                todo.append((nxt(i), q2))

    # accepting cycle inside the reachable product
    g = BuchiAutomaton(
        states=nodes,
        initials={(0, q) for q in n.initials if (0, q) in nodes},
        edges={
            (i, q): [
                (frozenset(), (nxt(i), q2))
                for gg, q2 in n.edges.get(q, ())
                if guard_matches(gg, letter(i)) and (nxt(i), q2) in nodes
            ]
            for (i, q) in nodes
        },
        accepting={(i, q) for (i, q) in nodes if q in n.accepting},
        alphabet=frozenset(),
    )
    return bool(accepting_sccs(g))


# ---------------------------------------------------------------------------
# projection and quotient


def project_nba(n: BuchiAutomaton, props: frozenset[IProp]) -> BuchiAutomaton:
    """Restrict guards to the given propositions (projected language)."""
    edges: dict = {}
    for q in n.states:
        outs = []
        produced = set()
        for g, q2 in n.edges.get(q, ()):
            key = (guard_project(g, props), q2)
            if key not in produced:
                produced.add(key)
                outs.append(key)
        edges[q] = outs
    return BuchiAutomaton(
        states=set(n.states),
        initials=set(n.initials),
        edges=edges,
        accepting=set(n.accepting),
        alphabet=n.alphabet & props,
        composed_vars=n.composed_vars,
    )


def quotient_nba(n: BuchiAutomaton) -> BuchiAutomaton:
    """Quotient by stable bisimulation over concrete letters.

    Edges are expanded to full letters over the (small) alphabet first, so
    syntactically different but equivalent guards do not block merging.
    The guarded form is rebuilt with one guard per concrete letter.
    """
    props = n.alphabet
    concrete: dict = {}
    for q in n.states:
        out = set()
        for g, q2 in n.edges.get(q, ()):
            for letter in guard_expand(g, props):
                out.add((letter, q2))
        concrete[q] = out

    # partition refinement
    block: dict = {q: (q in n.accepting) for q in n.states}
    while True:
        sig = {
            q: (
                block[q],
                frozenset((l, block[q2]) for l, q2 in concrete[q]),
            )
            for q in n.states
        }
        names: dict = {}
        newblock: dict = {}
        for q in n.sorted_states():
            key = sig[q]
            if key not in names:
                names[key] = len(names)
            newblock[q] = names[key]
        if len(set(newblock.values())) == len(set(block.values())):
            block = newblock
            break
        block = newblock

    reps: dict = {}
    for q in n.sorted_states():
        reps.setdefault(block[q], q)
    edges: dict = {}
    for b, rep in reps.items():
        outs = []
        produced = set()
        for letter, q2 in sorted(concrete[rep], key=repr):
            g = frozenset((ip, ip in letter) for ip in props)
            key = (g, block[q2])
            if key not in produced:
                produced.add(key)
                outs.append(key)
        edges[b] = outs
    return BuchiAutomaton(
        states=set(reps),
        initials={block[q] for q in n.initials},
        edges=edges,
        accepting={b for b, rep in reps.items() if rep in n.accepting},
        alphabet=props,
        composed_vars=n.composed_vars,
    )


# ---------------------------------------------------------------------------
# top-level construction


def qhltl2ba(k: KripkeStructure, p) -> tuple[BuchiAutomaton, BuchiAutomaton, dict]:
    """Build the violation-search automaton and the guard automaton.

    Returns (full automaton for guard & body over all composed variables,
    automaton for the guard alone over the universal variables, statistics).
    Both are pruned; states renumbered to stable integers.
    """
    from .formula import desugar, nnf, validate_property

    errs = validate_property(p, frozenset(k.ap))
    if errs:
        raise ValidationError("; ".join(errs))
    for kind, v in p.guard.prefix + p.body.prefix:
        if kind != "exists":
            raise ValidationError(
                f"unsupported inner quantifier {kind!r} for {v!r}"
            )

    stats: dict = {}

    def compose(matrix: LtlFormula, inner: list[str], outer: list[str]):
        f = nnf(desugar(matrix))
        atoms = indexed_atoms(f)
        # outer variables must contribute their model propositions even if
        # the matrix never mentions them
        alphabet = atoms | frozenset(
            (prop, v) for v in outer for prop in k.ap
        )
        a = ltl_to_aba(f, alphabet)
        for v in inner:
            if _var_props(a.alphabet, v):
                a = close_exists(a, k, v)
            # a variable the matrix ignores constrains nothing: the model
            # always has some trace to bind it to
        for v in outer:
            a = self_composition_product(a, k, v)
        return prune(aba_to_nba(a))

    guard_inner = [v for _, v in p.guard.prefix]
    body_inner = [v for _, v in p.body.prefix]
    full_matrix = And(p.guard.body, p.body.body)
    full = compose(
        full_matrix,
        guard_inner + body_inner,
        list(p.universals) + [p.count_var],
    )
    guard_only = compose(p.guard.body, guard_inner, list(p.universals))

    full, _ = renumber(full)
    guard_only, _ = renumber(guard_only)
    stats["automaton_states"] = len(full.states)
    stats["guard_automaton_states"] = len(guard_only.states)
    return full, guard_only, stats


# ---------------------------------------------------------------------------
# exports


def export_text(n: BuchiAutomaton) -> str:
    """Debug listing: states, guarded edges, accepting set."""
    m, _ = renumber(n)
    lines = [
        f"alphabet: {', '.join(f'{p}@{v}' for p, v in sorted(m.alphabet)) or '(empty)'}",
        f"initial: {', '.join(map(str, sorted(m.initials)))}",
        f"accepting: {', '.join(map(str, sorted(m.accepting)))}",
    ]
    for q in sorted(m.states):
        for g, q2 in m.edges.get(q, ()):
            lines.append(f"  {q} --[{guard_text(g)}]--> {q2}")
    return "\n".join(lines) + "\n"


def export_dot(n: BuchiAutomaton) -> str:
    m, _ = renumber(n)
    lines = ["digraph automaton {", "  rankdir=LR;"]
    for q in sorted(m.states):
        shape = "doublecircle" if q in m.accepting else "circle"
        lines.append(f'  q{q} [label="{q}", shape={shape}];')
    for q in sorted(m.initials):
        lines.append(f"  start{q} [shape=point];")
        lines.append(f"  start{q} -> q{q};")
    for q in sorted(m.states):
        for g, q2 in m.edges.get(q, ()):
            lines.append(f'  q{q} -> q{q2} [label="{guard_text(g)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
