"""Decision engine for counted-trace properties on the automaton level.

Given the violation-search automaton for a property
``forall p1..pk . guard -> (count s : A . body) cmp n`` this module answers
three questions:

* does some choice of the universal traces admit infinitely many counted
  projections (the doubly-pumped-lasso test, ``dpl_check``),
* what is the largest projection count over any such choice (``max_count``),
* what is the smallest count over choices that satisfy the guard
  (``min_count``).

``check`` ties them together into a verdict with a concrete witness.

Propositions are split three ways: X holds the counted propositions of the
counting variable, Y the body propositions of the universal variables
(counts are grouped by the Y-word), and Z everything else.  Z is projected
away before any counting happens, so "model" below always means an
X-union-Y-projected word.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .automata import (
    BuchiAutomaton,
    IProp,
    Letter,
    accepting_sccs,
    guard_expand,
    guard_merge,
    project_nba,
    prune,
    qhltl2ba,
    quotient_nba,
    renumber,
)
from .errors import ResourceGuardError, ValidationError
from .formula import (
    QuantitativeHyperproperty,
    desugar,
    indexed_atoms,
    negate_cmp,
)
from .kripke import KripkeStructure, Lasso
from .oracle import Trace, canonical_trace


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ProjectionSplit:
    """Disjoint proposition sets: X counted, Y grouping, Z ignored."""

    x: frozenset[IProp]
    y: frozenset[IProp]
    z: frozenset[IProp]

    def __post_init__(self) -> None:
        if self.x & self.y or self.x & self.z or self.y & self.z:
            raise ValidationError("projection split sets overlap")


def split_for_property(
    k: KripkeStructure, p: QuantitativeHyperproperty
) -> ProjectionSplit:
    """Split for checking p on k.

    X is the projection set indexed by the counting variable.  Y is every
    body proposition indexed by a universal variable; counts are compared
    per Y-word.  Everything else the automaton can mention (guard-only
    propositions, unprojected counting-variable propositions) lands in Z.
    """
    outer = list(p.universals) + [p.count_var]
    alphabet = frozenset((prop, v) for prop in k.ap for v in outer)
    x = frozenset((prop, p.count_var) for prop in p.projection)
    y = frozenset(
        ip
        for ip in indexed_atoms(desugar(p.body.body))
        if ip[1] in p.universals
    )
    return ProjectionSplit(x=x, y=y, z=alphabet - x - y)


@dataclass(frozen=True)
class CountValue:
    """A projected model count: a natural number or infinite (value None)."""

    value: int | None

    @classmethod
    def finite(cls, v: int) -> "CountValue":
        return cls(value=v)

    @classmethod
    def infinite(cls) -> "CountValue":
        return cls(value=None)

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return "infinite" if self.value is None else str(self.value)


@dataclass(frozen=True)
class DplWitness:
    """A pumpable pair of runs proving some Y-word has infinitely many models.

    ``prefix_*`` reaches the pump head; ``cycle_*`` is a cycle of concrete
    letters at the head (the pumped part); ``run_*`` is an accepting
    continuation from the same head whose letters agree with the repeated
    cycle on Y at every position but differ on X at ``diff_index`` (an
    offset from the head).  Pumping the cycle m times before switching to
    the run yields, for every m, a distinct model with the same Y-word.
    """

    prefix_states: tuple
    prefix_letters: tuple[Letter, ...]
    cycle_states: tuple
    cycle_letters: tuple[Letter, ...]
    run_states: tuple
    run_letters: tuple[Letter, ...]
    run_cycle_start: int
    diff_index: int

    def y_word(self, split: ProjectionSplit) -> tuple[tuple, tuple]:
        stem = tuple(l & split.y for l in self.prefix_letters)
        loop = tuple(l & split.y for l in self.cycle_letters)
        return stem, loop

    def model_word(self) -> tuple[tuple, tuple]:
        """One concrete model from the witness family (pump count zero)."""
        stem = self.prefix_letters + self.run_letters[: self.run_cycle_start]
        loop = self.run_letters[self.run_cycle_start :]
        return stem, loop


@dataclass(frozen=True)
class CountResult:
    """Outcome of max_count / min_count.

    ``exceeded`` means the search stopped at the cap: the reported finite
    value is a lower bound ("at least this many"), not the exact count.
    ``vacuous`` (min side only) means no Y-word satisfies the guard at all.
    """

    value: CountValue
    y_stem: tuple[Letter, ...] | None
    y_loop: tuple[Letter, ...] | None
    exceeded: bool = False
    vacuous: bool = False
    model_stem: tuple[Letter, ...] | None = None
    model_loop: tuple[Letter, ...] | None = None
    stats: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CheckWitness:
    """Violating assignment: one lasso per universal variable plus the count
    observed for that assignment's Y-word."""

    variables: tuple[str, ...]
    lassos: tuple[Lasso, ...]
    count: CountValue
    y_stem: tuple[Letter, ...]
    y_loop: tuple[Letter, ...]


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: CheckWitness | None
    statistics: dict


@dataclass
class CountingLimits:
    """Resource guards.  Hard budgets raise ResourceGuardError; soft caps
    set a flag in the statistics and degrade to a recorded partial answer."""

    dpl_node_budget: int = 200_000
    dpl_cycle_cap: int | None = None  # None: number of arena states + 1
    table_word_budget: int = 200_000
    prefix_budget: int = 50_000
    enum_node_budget: int = 200_000
    confirm_tries: int = 8
    candidate_budget: int = 4096


_DEFAULT_LIMITS = CountingLimits()


# ---------------------------------------------------------------------------
# concrete-letter arenas

# Counting works over fully concrete letters, not symbolic guards: the
# automaton is projected to X∪Y, quotiented (language-preserving, keeps the
# word sets small), and every guard is expanded into the letters it matches.


def _letter_key(letter: Letter):
    return tuple(sorted(letter))


def _word_key(word: tuple[Letter, ...]):
    return tuple(_letter_key(l) for l in word)


def _arena(b: BuchiAutomaton, props: frozenset[IProp]) -> BuchiAutomaton:
    a = prune(project_nba(prune(b), props))
    if not a.states:
        return a
    a = prune(quotient_nba(a))
    a, _ = renumber(a)
    return a


def _concrete(a: BuchiAutomaton) -> dict:
    """state -> sorted list of (letter, successor) with letters fully
    expanded over the arena alphabet."""
    out: dict = {}
    for q in a.states:
        seen = set()
        for g, q2 in a.edges.get(q, ()):
            for letter in guard_expand(g, a.alphabet):
                seen.add((letter, q2))
        out[q] = sorted(seen, key=lambda e: (_letter_key(e[0]), repr(e[1])))
    return out


def _tarjan(nodes, succ) -> list[frozenset]:
    """Strongly connected components of an explicit graph, deterministic."""
    index: dict = {}
    low: dict = {}
    on: set = set()
    stack: list = []
    comps: list[frozenset] = []
    counter = itertools.count()

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
    return comps


def _bfs_path(conc: dict, sources, target_test):
    """Shortest path (states, letters) from any source to a node passing
    target_test; returns (state_path, letter_path) or None."""
    parent: dict = {}
    order = sorted(sources, key=repr)
    for q in order:
        parent[q] = None
        if target_test(q):
            return (q,), ()
    queue = list(order)
    while queue:
        q = queue.pop(0)
        for letter, q2 in conc.get(q, ()):
            if q2 in parent:
                continue
            parent[q2] = (q, letter)
            if target_test(q2):
                states = [q2]
                letters = []
                cur = q2
                while parent[cur] is not None:
                    prev, l = parent[cur]
                    states.append(prev)
                    letters.append(l)
                    cur = prev
                return tuple(reversed(states)), tuple(reversed(letters))
            queue.append(q2)
    return None


def _accepting_extension(a: BuchiAutomaton, conc: dict, q) -> tuple:
    """Letters extending a word that ends at q (a state inside an accepting
    component) into an accepted continuation: (bridge letters, cycle
    letters), the cycle passing through an accepting state."""
    comp = next(c for c in accepting_sccs(a) if q in c)
    inner = {
        s: [(l, s2) for l, s2 in conc.get(s, ()) if s2 in comp] for s in comp
    }
    f = sorted((s for s in comp if s in a.accepting), key=repr)[0]
    bridge = _bfs_path(inner, [q], lambda s: s == f)
    assert bridge is not None, "accepting component not internally connected"
    # cycle back to f in at least one step
    first = [(l, s2) for l, s2 in inner[f]]
    assert first, "accepting component without an internal edge"
    best = None
    for l, s2 in first:
        if s2 == f:
            best = ((f, f), (l,))
            break
        back = _bfs_path(inner, [s2], lambda s: s == f)
        if back is not None and (best is None or len(back[1]) + 1 < len(best[1])):
            best = ((f,) + back[0], (l,) + back[1])
    assert best is not None
    return bridge[1], best[1]


# ---------------------------------------------------------------------------
# the infinity test


def dpl_check(
    b: BuchiAutomaton,
    split: ProjectionSplit,
    limits: CountingLimits | None = None,
    stats: dict | None = None,
) -> DplWitness | None:
    """Search for a doubly pumped lasso: a reachable head state g with a
    concrete letter cycle u and an accepting run from g that matches the
    repeated cycle on Y pointwise but differs on X somewhere.  Pumping u
    before the run yields infinitely many distinct models sharing one
    Y-word, so a witness proves the count infinite; exhausting the search
    space without one proves every Y-word's count finite (up to the
    recorded caps).
    """
    limits = limits or _DEFAULT_LIMITS
    stats = stats if stats is not None else {}
    a = _arena(b, split.x | split.y)
    stats["dpl_arena_states"] = len(a.states)
    stats["dpl_nodes"] = 0
    stats["dpl_capped"] = False
    if not a.states or not (split.x & a.alphabet):
        # no counted propositions left: at most one X-projection per Y-word
        return None
    conc = _concrete(a)
    cap = limits.dpl_cycle_cap or len(a.states) + 1
    xset = split.x
    yset = split.y

    for p in range(1, cap + 1):
        for g in a.sorted_states():
            w = _dpl_at(a, conc, g, p, xset, yset, limits, stats)
            if w is not None:
                return w
            if stats["dpl_capped"]:
                return None
    return None


def _dpl_at(a, conc, g, p, xset, yset, limits, stats):
    """One head state and cycle length; joint search over the cycle letters
    (pinned concrete) and the continuation run's first p steps."""
    start = (g, 0, g, (), False)
    parent: dict = {start: None}
    frozen_memo: dict = {}
    todo = [start]
    while todo:
        node = todo.pop()
        w, i, c, cbuf, flag = node
        if i == p:
            if c != g:
                continue
            reach = frozen_memo.get(cbuf)
            if reach is None:
                reach = _frozen_coreach(a, conc, cbuf, xset, yset)
                frozen_memo[cbuf] = reach
            if (w, 0, flag) in reach:
                return _extract_witness(
                    a, conc, g, p, node, parent, xset, yset
                )
            continue
        for cl, c2 in conc[c]:
            ybits = cl & yset
            for ml, w2 in conc[w]:
                if ml & yset != ybits:
                    continue
                flag2 = flag or (ml & xset != cl & xset)
                nxt = (w2, i + 1, c2, cbuf + (cl,), flag2)
                if nxt in parent:
                    continue
                stats["dpl_nodes"] += 1
                if stats["dpl_nodes"] > limits.dpl_node_budget:
                    stats["dpl_capped"] = True
                    return None
                parent[nxt] = (node, cl, ml)
                todo.append(nxt)
    return None


def _frozen_nodes_edges(a, conc, cbuf, xset, yset):
    p = len(cbuf)
    nodes = [
        (w, i, fl)
        for w in a.sorted_states()
        for i in range(p)
        for fl in (False, True)
    ]
    succ: dict = {n: [] for n in nodes}
    for w, i, fl in nodes:
        want_y = cbuf[i] & yset
        for ml, w2 in conc[w]:
            if ml & yset != want_y:
                continue
            fl2 = fl or (ml & xset != cbuf[i] & xset)
            succ[(w, i, fl)].append((ml, (w2, (i + 1) % p, fl2)))
    return nodes, succ


def _frozen_coreach(a, conc, cbuf, xset, yset):
    """Nodes of the fixed-cycle phase graph from which an accepting cycle
    with the X-difference flag set is reachable."""
    nodes, succ = _frozen_nodes_edges(a, conc, cbuf, xset, yset)
    comps = _tarjan(nodes, lambda n: [t for _, t in succ[n]])
    good = set()
    for comp in comps:
        internal = any(t in comp for n in comp for _, t in succ[n])
        if internal and any(fl and w in a.accepting for w, _, fl in comp):
            good |= comp
    # backward closure
    rev: dict = {}
    for n in nodes:
        for _, t in succ[n]:
            rev.setdefault(t, []).append(n)
    reach = set(good)
    todo = list(good)
    while todo:
        n = todo.pop()
        for pn in rev.get(n, ()):
            if pn not in reach:
                reach.add(pn)
                todo.append(pn)
    return reach


def _extract_witness(a, conc, g, p, node, parent, xset, yset):
    # part 1: unwind the joint search to recover the pumped cycle and the
    # opening of the continuation run
    w_end, _, _, cbuf, flag = node
    run_states = [w_end]
    run_letters: list = []
    cyc_states = [node[2]]
    cur = node
    while parent[cur] is not None:
        prev, cl, ml = parent[cur]
        run_letters.append(ml)
        run_states.append(prev[0])
        cyc_states.append(prev[2])
        cur = prev
    run_letters.reverse()
    run_states.reverse()
    cyc_states.reverse()

    # part 2: continue through the fixed-cycle phase graph to a flagged
    # accepting cycle
    nodes, succ = _frozen_nodes_edges(a, conc, cbuf, xset, yset)
    comps = _tarjan(nodes, lambda n: [t for _, t in succ[n]])
    good_comps = []
    for comp in comps:
        internal = any(t in comp for n in comp for _, t in succ[n])
        if internal and any(fl and w in a.accepting for w, _, fl in comp):
            good_comps.append(comp)
    target = set().union(*good_comps)
    path = _bfs_path(succ, [(w_end, 0, flag)], lambda n: n in target)
    assert path is not None
    entry = path[0][-1]
    comp = next(c for c in good_comps if entry in c)
    inner = {n: [(l, t) for l, t in succ[n] if t in comp] for n in comp}
    # a cycle through an accepting flagged node of the component
    acc_node = sorted(
        (n for n in comp if n[2] and n[0] in a.accepting), key=repr
    )[0]
    to_acc = _bfs_path(inner, [entry], lambda n: n == acc_node)
    assert to_acc is not None
    back = None
    for l, t in inner[acc_node]:
        if t == acc_node:
            back = ((t,), (l,))
            break
        bp = _bfs_path(inner, [t], lambda n: n == acc_node)
        if bp is not None:
            back = (bp[0], (l,) + bp[1])
            break
    assert back is not None
    # back[0] runs from acc_node's successor around to acc_node

    full_run_states = (
        tuple(run_states)
        + tuple(n[0] for n in path[0][1:])
        + tuple(n[0] for n in to_acc[0][1:])
        + tuple(n[0] for n in back[0])
    )
    full_run_letters = tuple(run_letters) + path[1] + to_acc[1] + back[1]
    run_cycle_start = len(run_letters) + len(path[1]) + len(to_acc[1])
    # the run's loop closes on the same phase node, so its length is a
    # multiple of p and the Y-agreement stays aligned under repetition

    prefix = _bfs_path(conc, a.initials, lambda s: s == g)
    assert prefix is not None, "pump head not reachable"

    diff_index = next(
        idx
        for idx, ml in enumerate(full_run_letters)
        if ml & xset != cbuf[idx % p] & xset
    )
    return DplWitness(
        prefix_states=prefix[0],
        prefix_letters=prefix[1],
        cycle_states=tuple(cyc_states),
        cycle_letters=cbuf,
        run_states=tuple(full_run_states),
        run_letters=tuple(full_run_letters),
        run_cycle_start=run_cycle_start,
        diff_index=diff_index,
    )


# ---------------------------------------------------------------------------
# word enumeration (shared by the exact per-Y confirmation and by tests)


def _enum_words(inits, succ, acc_test, max_stem, max_loop, cap, budget):
    """Distinct accepted ultimately periodic words of a concrete-letter
    graph, canonicalized; returns (set of Trace, capped_flag)."""
    words: set = set()
    capped = False
    depth_cap = max_stem + max_loop
    visited_budget = budget

    stack = [((q,), ()) for q in sorted(inits, key=repr)]
    while stack:
        states, letters = stack.pop()
        visited_budget -= 1
        if visited_budget < 0:
            capped = True
            break
        last = states[-1]
        k = len(states) - 1
        for j in range(k):
            if states[j] != last:
                continue
            if k - j > max_loop:
                continue
            loop_states = states[j:k]
            if not any(acc_test(s) for s in loop_states):
                continue
            t = canonical_trace(Trace(letters[:j], letters[j:k]))
            if t not in words:
                words.add(t)
                if len(words) >= cap:
                    return words, True
        if k < depth_cap:
            for letter, q2 in succ(last):
                stack.append((states + (q2,), letters + (letter,)))
    return words, capped


def distinct_words(
    n: BuchiAutomaton,
    props: frozenset[IProp],
    max_stem: int,
    max_loop: int,
    cap: int,
    budget: int = 200_000,
) -> tuple[set, bool]:
    """Distinct accepted words of n projected to props, enumerated over
    lassos with the given stem/loop bounds.  Exact for finite projected
    languages whose members fit the bounds; a capped flag reports when the
    enumeration stopped early."""
    a = _arena(n, props)
    if not a.states:
        return set(), False
    conc = _concrete(a)
    return _enum_words(
        a.initials,
        lambda q: conc[q],
        lambda q: q in a.accepting,
        max_stem,
        max_loop,
        cap,
        budget,
    )


# ---------------------------------------------------------------------------
# exact counting for one Y-word


def _y_graph(a, conc, yset, y_stem, y_loop):
    """Product of the arena with the Y-word's position automaton, kept to
    productive nodes.  Nodes are (state, position)."""
    word = tuple(y_stem) + tuple(y_loop)
    n_pos = len(word)
    first_loop = len(y_stem)

    def nxt(i):
        return i + 1 if i + 1 < n_pos else first_loop

    succ: dict = {}
    reach = set()
    todo = [(q, 0) for q in sorted(a.initials, key=repr)]
    while todo:
        node = todo.pop()
        if node in reach:
            continue
        reach.add(node)
        q, i = node
        outs = []
        for letter, q2 in conc[q]:
            if letter & yset != word[i]:
                continue
            outs.append((letter, (q2, nxt(i))))
            todo.append((q2, nxt(i)))
        succ[node] = outs
    if not reach:
        return set(), [], {}, set()
    acc = {(q, i) for q, i in reach if q in a.accepting}
    comps = _tarjan(sorted(reach, key=repr), lambda n: [t for _, t in succ[n]])
    good = set()
    for comp in comps:
        internal = any(t in comp for n in comp for _, t in succ[n])
        if internal and comp & acc:
            good |= comp
    rev: dict = {}
    for n in reach:
        for _, t in succ[n]:
            rev.setdefault(t, []).append(n)
    keep = set(good)
    todo = list(good)
    while todo:
        n = todo.pop()
        for pn in rev.get(n, ()):
            if pn not in keep:
                keep.add(pn)
                todo.append(pn)
    inits = {(q, 0) for q in a.initials if (q, 0) in keep}
    succ = {
        n: [(l, t) for l, t in succ[n] if t in keep]
        for n in keep
    }
    return keep, sorted(inits, key=repr), succ, acc & keep


def _reify_graph(a, keep, inits, succ, acc) -> BuchiAutomaton:
    """Wrap a concrete-letter graph back into an automaton (each letter
    becomes a fully pinned guard) so the infinity test can run on it."""
    edges = {
        n: [
            (frozenset((ip, ip in l) for ip in a.alphabet), t)
            for l, t in succ[n]
        ]
        for n in keep
    }
    return BuchiAutomaton(
        states=set(keep),
        initials=set(inits),
        edges=edges,
        accepting=set(acc),
        alphabet=a.alphabet,
        composed_vars=a.composed_vars,
    )


def _count_for_y(a, conc, split, y_stem, y_loop, cap, limits, stats):
    """Exact count of distinct X-projections among models whose Y-word is
    exactly the given lasso.  Returns (CountValue, exceeded, model word)."""
    yset = split.y
    keep, inits, succ, acc = _y_graph(a, conc, yset, y_stem, y_loop)
    if not keep:
        return CountValue.finite(0), False, None
    reified = _reify_graph(a, keep, inits, succ, acc)
    sub = {}
    w = dpl_check(
        reified,
        ProjectionSplit(
            x=split.x & a.alphabet,
            y=frozenset(),
            z=a.alphabet - split.x,
        ),
        limits,
        sub,
    )
    stats.setdefault("per_y_dpl_nodes", 0)
    stats["per_y_dpl_nodes"] += sub.get("dpl_nodes", 0)
    if sub.get("dpl_capped"):
        stats["per_y_dpl_capped"] = True
    if w is not None:
        # the inner test ran with Y pinned away, so its model word carries
        # X only; put the Y letters back per position
        ms, ml = _zip_words(w.model_word(), (tuple(y_stem), tuple(y_loop)))
        return CountValue.infinite(), False, (ms, ml)
    bound = len(keep)
    words, capped = _enum_words(
        inits,
        lambda n: succ[n],
        lambda n: n in acc,
        bound,
        bound,
        cap,
        limits.enum_node_budget,
    )
    if capped:
        stats["per_y_enum_capped"] = True
    model = None
    if words:
        model = sorted(words, key=lambda t: (_word_key(t.stem), _word_key(t.loop)))[0]
        model = (model.stem, model.loop)
    return CountValue.finite(len(words)), len(words) >= cap, model


# ---------------------------------------------------------------------------
# backward word-set propagation


def _seeds(a: BuchiAutomaton) -> set:
    comps = accepting_sccs(a)
    return set().union(*comps) if comps else set()


def _propagate(a, conc, steps, budget):
    """Word sets per state: after i rounds, state q maps to the length-i
    letter sequences that q can consume ending inside an accepting
    component.  Yields (round, words at the initial states) each round."""
    cur = {q: {()} for q in _seeds(a)}
    for i in range(1, steps + 1):
        nxt: dict = {}
        total = 0
        for q, outs in conc.items():
            bucket = None
            for letter, q2 in outs:
                tails = cur.get(q2)
                if not tails:
                    continue
                if bucket is None:
                    bucket = nxt.setdefault(q, set())
                for t in tails:
                    bucket.add((letter,) + t)
            if bucket:
                total += len(bucket)
        if total > budget:
            raise ResourceGuardError(
                f"word table exceeded {budget} entries at round {i}"
            )
        cur = nxt
        at_init = set()
        for q in a.initials:
            at_init |= cur.get(q, set())
        yield i, at_init


def _group(words, split):
    groups: dict = {}
    for w in words:
        ykey = tuple(l & split.y for l in w)
        groups.setdefault(ykey, set()).add(tuple(l & split.x for l in w))
    return groups


def _walk_ends(a, conc, word) -> set:
    cur = set(a.initials)
    for letter in word:
        cur = {q2 for q in cur for l, q2 in conc[q] if l == letter}
    return cur


def _extend_group_y(a, conc, split, groups, ykey):
    """Turn a grouped Y-prefix into a concrete ultimately periodic Y-word by
    extending one of its words through an accepting component."""
    words = groups[ykey]
    # recover a full X∪Y word of the group deterministically
    xkey = sorted(words, key=_word_key)[0]
    word = tuple(
        x | y for x, y in zip(xkey, ykey)
    )
    ends = sorted(_walk_ends(a, conc, word) & _seeds(a), key=repr)
    assert ends, "table word does not end in an accepting component"
    bridge, cycle = _accepting_extension(a, conc, ends[0])
    y_stem = ykey + tuple(l & split.y for l in bridge)
    y_loop = tuple(l & split.y for l in cycle)
    return y_stem, y_loop


def max_count(
    b: BuchiAutomaton,
    split: ProjectionSplit,
    limit: int,
    limits: CountingLimits | None = None,
    stats: dict | None = None,
) -> CountResult:
    """Largest number of distinct X-projections over any single Y-word.

    Propagates explicit word sets backward from the accepting components
    for as many rounds as the (pruned, quotiented) arena has states, groups
    the words reaching an initial state by their Y-projection, and takes
    the largest group.  Stops early once a group passes ``limit``.  Every
    candidate group is confirmed by an exact per-Y-word recount before it
    is reported; the confirmed count is what is returned.
    """
    limits = limits or _DEFAULT_LIMITS
    stats = stats if stats is not None else {}
    pre = prune(project_nba(prune(b), split.x | split.y))
    stats["projected_states"] = len(pre.states)
    a = _arena(b, split.x | split.y)
    stats["arena_states"] = len(a.states)
    if not a.states:
        return CountResult(
            value=CountValue.finite(0),
            y_stem=None,
            y_loop=None,
            stats=stats,
        )
    conc = _concrete(a)
    steps = len(a.states)
    stats["table_rounds"] = steps

    def confirm(groups, ykey, cap):
        y_stem, y_loop = _extend_group_y(a, conc, split, groups, ykey)
        value, exceeded, model = _count_for_y(
            a, conc, split, y_stem, y_loop, cap, limits, stats
        )
        return y_stem, y_loop, value, exceeded, model

    early_checks = True
    final_groups: dict = {}
    for rnd, at_init in _propagate(a, conc, steps, limits.table_word_budget):
        groups = _group(at_init, split)
        if rnd == steps:
            final_groups = groups
            break
        if not early_checks:
            continue
        over = [k for k, v in groups.items() if len(v) > limit]
        if not over:
            continue
        over.sort(key=lambda k: (-len(groups[k]), _word_key(k)))
        for ykey in over[: limits.confirm_tries]:
            y_stem, y_loop, value, exceeded, model = confirm(
                groups, ykey, limit + 1
            )
            if value.is_infinite or value.value > limit:
                stats["early_exit_round"] = rnd
                return CountResult(
                    value=value,
                    y_stem=y_stem,
                    y_loop=y_loop,
                    exceeded=not value.is_infinite,
                    model_stem=model[0] if model else None,
                    model_loop=model[1] if model else None,
                    stats=stats,
                )
        stats["early_exceed_unconfirmed"] = True
        early_checks = False

    # full-length table: confirm the largest groups
    stats["table_groups"] = len(final_groups)
    if not final_groups:
        return CountResult(
            value=CountValue.finite(0), y_stem=None, y_loop=None, stats=stats
        )
    ranked = sorted(
        final_groups, key=lambda k: (-len(final_groups[k]), _word_key(k))
    )
    best = None
    table_max = len(final_groups[ranked[0]])
    for ykey in ranked[: limits.confirm_tries]:
        y_stem, y_loop, value, exceeded, model = confirm(
            final_groups, ykey, limit + 1
        )
        if value.is_infinite or value.value > limit:
            return CountResult(
                value=value,
                y_stem=y_stem,
                y_loop=y_loop,
                exceeded=not value.is_infinite,
                model_stem=model[0] if model else None,
                model_loop=model[1] if model else None,
                stats=stats,
            )
        if best is None or value.value > best[2].value:
            best = (y_stem, y_loop, value, model)
    y_stem, y_loop, value, model = best
    if value.value != table_max:
        stats["table_disagreement"] = {
            "table": table_max,
            "confirmed": value.value,
        }
    # Bound is relative to the pruned automaton before quotienting; the
    # quotient can have fewer states than the language bound refers to.
    assert value.value <= (1 << max(steps, len(pre.states))), (
        "finite count exceeds the structural bound"
    )
    return CountResult(
        value=value,
        y_stem=y_stem,
        y_loop=y_loop,
        model_stem=model[0] if model else None,
        model_loop=model[1] if model else None,
        stats=stats,
    )


def _forward_prefixes(g: BuchiAutomaton, conc, steps, budget):
    """All length-``steps`` letter sequences along paths from the initial
    states of a pruned automaton; every one of them extends to an accepted
    word, so these are exactly the accepted prefixes of that length."""
    cur = {(): frozenset(g.initials)}
    for _ in range(steps):
        nxt: dict = {}
        for word, states in cur.items():
            for q in states:
                for letter, q2 in conc[q]:
                    key = word + (letter,)
                    nxt[key] = nxt.get(key, frozenset()) | {q2}
        if len(nxt) > budget:
            raise ResourceGuardError(
                f"eligible-prefix enumeration exceeded {budget} words"
            )
        cur = nxt
    return cur


def min_count(
    b: BuchiAutomaton,
    bguard: BuchiAutomaton,
    split: ProjectionSplit,
    limit: int,
    limits: CountingLimits | None = None,
    stats: dict | None = None,
) -> CountResult:
    """Smallest number of distinct X-projections over the eligible Y-words.

    Eligible Y-words are projections of words the guard automaton accepts;
    eligible words with no completion in b at all count 0.  Candidates are
    enumerated as the accepted Y-prefixes of the guard arena (extended into
    concrete lassos through an accepting component) and every candidate is
    recounted exactly; the smallest confirmed count is returned.
    """
    limits = limits or _DEFAULT_LIMITS
    stats = stats if stats is not None else {}
    a = _arena(b, split.x | split.y)
    g = _arena(bguard, split.y)
    stats["arena_states"] = len(a.states)
    stats["guard_arena_states"] = len(g.states)
    if not g.states:
        return CountResult(
            value=CountValue.finite(0),
            y_stem=None,
            y_loop=None,
            vacuous=True,
            stats=stats,
        )
    conc = _concrete(a) if a.states else {}
    gconc = _concrete(g)
    steps = max(len(a.states), len(g.states))
    stats["table_rounds"] = steps

    prefixes = _forward_prefixes(g, gconc, steps, limits.candidate_budget)
    stats["eligible_prefixes"] = len(prefixes)

    groups: dict = {}
    if a.states:
        for rnd, at_init in _propagate(
            a, conc, steps, limits.table_word_budget
        ):
            if rnd == steps:
                groups = _group(at_init, split)

    # candidate order: provisional table count, then the word itself
    def prelim(ykey):
        return len(groups.get(ykey, ()))

    candidates = sorted(prefixes, key=lambda k: (prelim(k), _word_key(k)))
    best = None
    confirmed = 0
    for ykey in candidates:
        ends = sorted(prefixes[ykey], key=repr)
        ext, cycle = _extend_to_accepting(g, gconc, ends)
        y_stem = ykey + tuple(l & split.y for l in ext)
        y_loop = tuple(l & split.y for l in cycle)
        if a.states:
            value, exceeded, model = _count_for_y(
                a, conc, split, y_stem, y_loop, limit + 1, limits, stats
            )
        else:
            value, exceeded, model = CountValue.finite(0), False, None
        confirmed += 1
        if not value.is_infinite and (
            best is None
            or best[2].is_infinite
            or value.value < best[2].value
        ):
            best = (y_stem, y_loop, value, exceeded, model)
            if value.value == 0:
                break
        elif best is None:
            best = (y_stem, y_loop, value, exceeded, model)
    stats["candidates_confirmed"] = confirmed
    y_stem, y_loop, value, exceeded, model = best
    return CountResult(
        value=value,
        y_stem=y_stem,
        y_loop=y_loop,
        exceeded=exceeded,
        model_stem=model[0] if model else None,
        model_loop=model[1] if model else None,
        stats=stats,
    )


def _extend_to_accepting(g, gconc, ends):
    """Letters continuing a finite path (ending in one of ``ends``) into an
    accepted word: (approach + bridge letters, cycle letters).  The pruned
    automaton co-reaches acceptance from every state, so this never fails."""
    seeds = _seeds(g)
    path = _bfs_path(gconc, ends, lambda q: q in seeds)
    assert path is not None, "pruned automaton lost co-reachability"
    bridge, cycle = _accepting_extension(g, gconc, path[0][-1])
    return path[1] + bridge, cycle


# ---------------------------------------------------------------------------
# witness concretization


def _zip_words(wa, wb):
    """Positionwise union of two ultimately periodic letter words, returned
    with a common stem length and loop length."""
    sa, la = wa
    sb, lb = wb
    stem_len = max(len(sa), len(sb))
    loop_len = math.lcm(len(la) or 1, len(lb) or 1)

    def at(stem, loop, i):
        if i < len(stem):
            return stem[i]
        if not loop:
            return frozenset()
        return loop[(i - len(stem)) % len(loop)]

    stem = tuple(
        at(sa, la, i) | at(sb, lb, i) for i in range(stem_len)
    )
    loop = tuple(
        at(sa, la, stem_len + i) | at(sb, lb, stem_len + i)
        for i in range(loop_len)
    )
    return stem, loop


def _match_full(n: BuchiAutomaton, stem, loop, restrict):
    """An accepted lasso of n whose letters agree with the given word on the
    ``restrict`` propositions, as fully concrete letters over n's whole
    alphabet; None when no accepted word projects to it."""
    word = tuple(stem) + tuple(loop)
    n_pos = len(word)
    first_loop = len(stem)
    pins = [
        frozenset((ip, ip in word[i]) for ip in restrict & n.alphabet)
        for i in range(n_pos)
    ]

    def nxt(i):
        return i + 1 if i + 1 < n_pos else first_loop

    succ: dict = {}
    reach: set = set()
    todo = [(q, 0) for q in sorted(n.initials, key=repr)]
    while todo:
        nd = todo.pop()
        if nd in reach:
            continue
        reach.add(nd)
        q, i = nd
        outs = []
        for gd, q2 in n.edges.get(q, ()):
            merged = guard_merge(gd, pins[i])
            if merged is None:
                continue
            letter = guard_expand(merged, n.alphabet)[0]
            outs.append((letter, (q2, nxt(i))))
            todo.append((q2, nxt(i)))
        succ[nd] = sorted(outs, key=lambda e: (_letter_key(e[0]), repr(e[1])))
    if not reach:
        return None
    acc = {(q, i) for q, i in reach if q in n.accepting}
    comps = _tarjan(sorted(reach, key=repr), lambda d: [t for _, t in succ[d]])
    good = []
    for comp in comps:
        internal = any(t in comp for d in comp for _, t in succ[d])
        if internal and comp & acc:
            good.append(comp)
    if not good:
        return None
    target = set().union(*good)
    path = _bfs_path(succ, [(q, 0) for q in n.initials if (q, 0) in reach],
                     lambda d: d in target)
    if path is None:
        return None
    entry = path[0][-1]
    comp = next(c for c in good if entry in c)
    inner = {d: [(l, t) for l, t in succ[d] if t in comp] for d in comp}
    f = sorted(comp & acc, key=repr)[0]
    to_f = _bfs_path(inner, [entry], lambda d: d == f)
    assert to_f is not None
    back = None
    for l, t in inner[f]:
        if t == f:
            back = (l,)
            break
        bp = _bfs_path(inner, [t], lambda d: d == f)
        if bp is not None:
            back = (l,) + bp[1]
            break
    assert back is not None
    full_stem = path[1] + to_f[1]
    full_loop = back
    return full_stem, full_loop


def _kripke_lasso(k: KripkeStructure, full_stem, full_loop, var) -> Lasso:
    """A lasso of k whose label trace matches the variable's propositions in
    the given fully concrete letter word."""
    word = tuple(full_stem) + tuple(full_loop)
    n_pos = len(word)
    first_loop = len(full_stem)

    def labels(i):
        return frozenset(prop for prop, v in word[i] if v == var)

    def nxt(i):
        return i + 1 if i + 1 < n_pos else first_loop

    succ: dict = {}
    reach: set = set()
    start = [(k.init, 0)] if k.label(k.init) == labels(0) else []
    todo = list(start)
    while todo:
        nd = todo.pop()
        if nd in reach:
            continue
        reach.add(nd)
        s, i = nd
        outs = []
        for s2 in k.successors(s):
            if k.label(s2) == labels(nxt(i)):
                outs.append((None, (s2, nxt(i))))
                todo.append((s2, nxt(i)))
        succ[nd] = sorted(outs, key=lambda e: repr(e[1]))
    assert reach, "witness word does not start at the initial label"
    comps = _tarjan(sorted(reach, key=repr), lambda d: [t for _, t in succ[d]])
    cyclic = [
        c for c in comps if any(t in c for d in c for _, t in succ[d])
    ]
    assert cyclic, "witness word admits no lasso in the structure"
    target = set().union(*cyclic)
    path = _bfs_path(succ, start, lambda d: d in target)
    assert path is not None
    entry = path[0][-1]
    comp = next(c for c in cyclic if entry in c)
    inner = {d: [(l, t) for l, t in succ[d] if t in comp] for d in comp}
    back = None
    for _, t in inner[entry]:
        if t == entry:
            back = (entry,)
            break
        bp = _bfs_path(inner, [t], lambda d: d == entry)
        if bp is not None:
            back = bp[0]
            break
    assert back is not None
    stem_states = tuple(s for s, _ in path[0][:-1])
    loop_states = (entry[0],) + tuple(s for s, _ in back[:-1])
    return Lasso(stem=stem_states, loop=loop_states)


def _witness_lassos(k, p, nba, stem, loop, restrict):
    """One lasso of k per universal variable, realizing the given projected
    word through the automaton nba."""
    if not p.universals:
        return ()
    full = _match_full(nba, stem, loop, restrict)
    assert full is not None, "witness word lost during concretization"
    return tuple(
        _kripke_lasso(k, full[0], full[1], v) for v in p.universals
    )


# ---------------------------------------------------------------------------
# the top-level decision


def check(
    k: KripkeStructure,
    p: QuantitativeHyperproperty,
    limits: CountingLimits | None = None,
) -> Verdict:
    """Decide whether k satisfies p.

    The property is violated exactly when some assignment of the universal
    variables satisfies the guard while its count of distinct projections
    satisfies the negated comparison.  Comparisons negated to at-least run
    the infinity test first and then the maximum count; comparisons negated
    to at-most run the minimum count over guard-eligible Y-words; equality
    runs both directions.
    """
    limits = limits or _DEFAULT_LIMITS
    b_full, b_guard, statistics = qhltl2ba(k, p)
    split = split_for_property(k, p)
    cb = negate_cmp(p.cmp)
    statistics["negated_comparison"] = cb
    n = p.bound

    def verdict_violated(y_stem, y_loop, count, model):
        if model is not None:
            lassos = _witness_lassos(
                k, p, b_full, model[0], model[1], split.x | split.y
            )
        else:
            lassos = _witness_lassos(k, p, b_guard, y_stem, y_loop, split.y)
        w = CheckWitness(
            variables=p.universals,
            lassos=lassos,
            count=count,
            y_stem=tuple(y_stem),
            y_loop=tuple(y_loop),
        )
        return Verdict(holds=False, witness=w, statistics=statistics)

    def at_least_side(t):
        """Violation search for 'some eligible count >= t'; returns a
        Verdict when violated, else None."""
        if t == 0:
            # every count passes; violated as soon as the guard is
            # satisfiable at all
            g = _arena(b_guard, split.y)
            statistics["route"] = "guard-satisfiability"
            if not g.states:
                return None
            gconc = _concrete(g)
            ext, cycle = _extend_to_accepting(g, gconc, g.initials)
            y_stem = tuple(l & split.y for l in ext)
            y_loop = tuple(l & split.y for l in cycle)
            a = _arena(b_full, split.x | split.y)
            if a.states:
                value, _, model = _count_for_y(
                    a, _concrete(a), split, y_stem, y_loop, 2, limits,
                    statistics,
                )
            else:
                value, model = CountValue.finite(0), None
            return verdict_violated(y_stem, y_loop, value, model)
        dstats: dict = {}
        w = dpl_check(b_full, split, limits, dstats)
        statistics["dpl"] = dstats
        if w is not None:
            statistics["route"] = "infinity"
            y_stem, y_loop = w.y_word(split)
            model = w.model_word()
            return verdict_violated(
                y_stem, y_loop, CountValue.infinite(), model
            )
        mstats: dict = {}
        res = max_count(b_full, split, t - 1, limits, mstats)
        statistics["maximum"] = mstats
        statistics["route"] = "maximum-count"
        violated = res.value.is_infinite or res.exceeded or (
            res.value.value is not None and res.value.value >= t
        )
        if violated:
            model = (
                (res.model_stem, res.model_loop)
                if res.model_stem is not None
                else None
            )
            return verdict_violated(res.y_stem, res.y_loop, res.value, model)
        return None

    def at_most_side(lim):
        """Violation search for 'some eligible count <= lim'."""
        if lim < 0:
            statistics["route"] = "trivial"
            return None
        mstats: dict = {}
        res = min_count(b_full, b_guard, split, lim, limits, mstats)
        statistics["minimum"] = mstats
        statistics["route"] = "minimum-count"
        if res.vacuous:
            statistics["route"] = "vacuous-guard"
            return None
        if (
            not res.value.is_infinite
            and not res.exceeded
            and res.value.value <= lim
        ):
            model = (
                (res.model_stem, res.model_loop)
                if res.model_stem is not None
                else None
            )
            return verdict_violated(res.y_stem, res.y_loop, res.value, model)
        return None

    if cb == ">=":
        v = at_least_side(n)
    elif cb == ">":
        v = at_least_side(n + 1)
    elif cb == "<=":
        v = at_most_side(n)
    elif cb == "<":
        v = at_most_side(n - 1)
    else:  # '!=': either strictly above or strictly below the bound
        v = at_least_side(n + 1)
        if v is None:
            v = at_most_side(n - 1)
        statistics["route"] = "both-directions"
    if v is not None:
        return v
    return Verdict(holds=True, witness=None, statistics=statistics)
