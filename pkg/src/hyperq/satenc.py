"""Bounded propositional encoding of lasso tuples.

Turns a model and a counted-trace property into a propositional formula
whose satisfying assignments encode tuples of looping paths of a fixed
unrolling length: one path per composed trace variable, label variables
mirroring each path's observations, and a one-hot selector choosing the
position the final state loops back to.  The variable set splits into X
(counted observations of the counted variable), Y (observations the
universally quantified variables are grouped by), and Z (everything
else, existentially projected away).  A small systematic solver computes
the maximum over Y-assignments of the number of X-assignments that
extend to a model, which is the bounded analogue of the maximum count
on the automaton side.
"""
from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field

from .counting import CountValue, ProjectionSplit, split_for_property
from .errors import ResourceGuardError, ValidationError
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
    desugar,
    formula_size,
    nnf,
    validate_property,
)
from .kripke import KripkeStructure


# ---------------------------------------------------------------------------
# propositional variables and circuits


@dataclass(frozen=True, order=True)
class PropVar:
    """One propositional variable of the encoding.

    role: 'stateBit' (path state vector bit), 'label' (observation of a
    proposition at a timestep), 'loopSelector' (one-hot loop-back
    position), or 'auxiliary' (clause-form helper).  The tuple
    (role, timestep, owner, index) is the variable's identity.
    """

    role: str
    timestep: int
    owner: str | None
    index: str | int


@dataclass(frozen=True)
class BTrue:
    pass


@dataclass(frozen=True)
class BFalse:
    pass


@dataclass(frozen=True)
class BVar:
    v: PropVar


# Composite nodes compare by identity and are interned by their
# constructors, so structurally equal circuits are the same object and
# shared subcircuits stay shared.  That keeps hashing and equality O(1)
# on heavily shared graphs (a naive structural compare walks the
# expanded tree, which blows up exponentially).


@dataclass(frozen=True, eq=False)
class BNot:
    f: object


@dataclass(frozen=True, eq=False)
class BAnd:
    args: tuple


@dataclass(frozen=True, eq=False)
class BOr:
    args: tuple


_INTERN: dict = {}


def _interned(key, make):
    node = _INTERN.get(key)
    if node is None:
        node = make()
        _INTERN[key] = node
    return node


def bnot(f):
    match f:
        case BTrue():
            return BFalse()
        case BFalse():
            return BTrue()
        case BNot(g):
            return g
    return _interned(("n", f), lambda: BNot(f))


def band(*fs):
    flat = []
    for f in fs:
        match f:
            case BTrue():
                continue
            case BFalse():
                return BFalse()
            case BAnd(args):
                flat.extend(a for a in args if a not in flat)
            case _:
                if f not in flat:
                    flat.append(f)
    if not flat:
        return BTrue()
    if len(flat) == 1:
        return flat[0]
    return _interned(("a", tuple(flat)), lambda: BAnd(tuple(flat)))


def bor(*fs):
    flat = []
    for f in fs:
        match f:
            case BFalse():
                continue
            case BTrue():
                return BTrue()
            case BOr(args):
                flat.extend(a for a in args if a not in flat)
            case _:
                if f not in flat:
                    flat.append(f)
    if not flat:
        return BFalse()
    if len(flat) == 1:
        return flat[0]
    return _interned(("o", tuple(flat)), lambda: BOr(tuple(flat)))


def biff(a, b):
    return bor(band(a, b), band(bnot(a), bnot(b)))


def eval_circuit(f, assign: dict) -> bool:
    """Evaluate under a total assignment of the circuit's variables."""
    memo: dict = {}

    def go(n) -> bool:
        key = id(n)
        if key in memo:
            return memo[key]
        match n:
            case BTrue():
                out = True
            case BFalse():
                out = False
            case BVar(v):
                out = assign[v]
            case BNot(g):
                out = not go(g)
            case BAnd(args):
                out = all(go(a) for a in args)
            case BOr(args):
                out = any(go(a) for a in args)
            case _:
                raise TypeError(f"unknown circuit node {n!r}")
        memo[key] = out
        return out

    return go(f)


def circuit_vars(f) -> set:
    out: set = set()
    seen: set = set()
    todo = [f]
    while todo:
        n = todo.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        match n:
            case BVar(v):
                out.add(v)
            case BNot(g):
                todo.append(g)
            case BAnd(args) | BOr(args):
                todo.extend(args)
    return out


# ---------------------------------------------------------------------------
# unrolling length


def mu_formula(size: int, n_states: int, k: int, k1: int, k2: int) -> int:
    """Sufficient unrolling length: one plus the number of distinct
    configurations of the product construction."""
    return (2**size) * n_states ** (k + k1 + k2 + 1) + 1


def _matrix_size(f: LtlFormula) -> int:
    d = desugar(f)
    if isinstance(d, TrueConst):
        return 0
    return formula_size(d)


def default_mu(k: KripkeStructure, p) -> int:
    size = _matrix_size(p.guard.body) + _matrix_size(p.body.body)
    value = mu_formula(
        size,
        len(k.states),
        len(p.universals),
        len(p.guard.prefix),
        len(p.body.prefix),
    )
    if value > sys.maxsize:
        raise ResourceGuardError(
            f"default unrolling length {value} exceeds the platform's"
            f" integer range; pass an explicit cap"
        )
    return value


# ---------------------------------------------------------------------------
# path unrolling


def _state_bits(n: int) -> int:
    return (n - 1).bit_length()


def _sbit(var: str, i: int, b: int):
    return BVar(PropVar("stateBit", i, var, b))


def _label(var: str, i: int, prop: str):
    return BVar(PropVar("label", i, var, prop))


def _sel(j: int):
    return BVar(PropVar("loopSelector", j, None, 0))


def _state_eq(var: str, i: int, idx: int, bits: int):
    return band(
        *(
            _sbit(var, i, b) if (idx >> b) & 1 else bnot(_sbit(var, i, b))
            for b in range(bits)
        )
    )


def encode_kripke_unrolling(k: KripkeStructure, var: str, mu: int):
    """Paths of the model: an initial-state constraint, mu transition
    steps, and label variables pinned to the visited states' labels.
    State vectors exist for timesteps 0..mu."""
    if mu < 1:
        raise ValidationError(f"unrolling length must be positive, got {mu}")
    states = sorted(k.states)
    idx = {s: i for i, s in enumerate(states)}
    bits = _state_bits(len(states))

    def eq(i, s):
        return _state_eq(var, i, idx[s], bits)

    parts = [eq(0, k.init)]
    for i in range(mu):
        parts.append(
            bor(
                *(
                    band(eq(i, s), eq(i + 1, t))
                    for s in states
                    for t in k.successors(s)
                )
            )
        )
    for i in range(mu + 1):
        for prop in sorted(k.ap):
            holds = bor(*(eq(i, s) for s in states if prop in k.label(s)))
            parts.append(biff(_label(var, i, prop), holds))
    return band(*parts)


def _loop_closure(k: KripkeStructure, var: str, mu: int):
    """The selected loop-back position must be a real transition target
    of the path's final state."""
    states = sorted(k.states)
    idx = {s: i for i, s in enumerate(states)}
    bits = _state_bits(len(states))

    def eq(i, s):
        return _state_eq(var, i, idx[s], bits)

    parts = []
    for j in range(mu + 1):
        back = bor(
            *(
                band(eq(mu, s), eq(j, t))
                for s in states
                for t in k.successors(s)
            )
        )
        parts.append(bor(bnot(_sel(j)), back))
    return band(*parts)


def _exactly_one_selector(mu: int):
    sels = [_sel(j) for j in range(mu + 1)]
    parts = [bor(*sels)]
    for a, b in itertools.combinations(sels, 2):
        parts.append(bor(bnot(a), bnot(b)))
    return band(*parts)


# ---------------------------------------------------------------------------
# formula unrolling (two-pass rule table)


def encode_ltl_bmc(f: LtlFormula, mu: int):
    """Lasso satisfaction of a desugared normal-form formula.

    Positions 0..mu carry concrete labels; the position after mu wraps
    to the loop-selector target.  Fixpoint operators are translated in
    two passes: the full pass may wrap once into the approximation pass,
    which bottoms out at the wrap (false for until, true for release).
    Includes the one-hot constraint over the selectors."""
    if mu < 1:
        raise ValidationError(f"unrolling length must be positive, got {mu}")
    wrap = mu + 1
    memo: dict = {}

    def full(node, i):
        key = (node, i, "full")
        if key in memo:
            return memo[key]
        if i == wrap:
            match node:
                case Until() | Release():
                    out = bor(
                        *(band(_sel(j), approx(node, j)) for j in range(mu + 1))
                    )
                case _:
                    out = bor(
                        *(band(_sel(j), full(node, j)) for j in range(mu + 1))
                    )
            memo[key] = out
            return out
        match node:
            case TrueConst():
                out = BTrue()
            case FalseConst():
                out = BFalse()
            case Atom(p, v):
                out = _label(v, i, p)
            case NegAtom(p, v):
                out = bnot(_label(v, i, p))
            case And(l, r):
                out = band(full(l, i), full(r, i))
            case Or(l, r):
                out = bor(full(l, i), full(r, i))
            case Next(c):
                out = full(c, i + 1)
            case Until(l, r):
                out = bor(full(r, i), band(full(l, i), full(node, i + 1)))
            case Release(l, r):
                out = band(full(r, i), bor(full(l, i), full(node, i + 1)))
            case _:
                raise ValidationError(
                    f"encoding needs a normalized formula, got {node!r}"
                )
        memo[key] = out
        return out

    def approx(node, i):
        # second traversal after the wrap; never wraps again
        key = (node, i, "approx")
        if key in memo:
            return memo[key]
        match node:
            case Until(l, r):
                if i == wrap:
                    out = BFalse()
                else:
                    out = bor(
                        full(r, i), band(full(l, i), approx(node, i + 1))
                    )
            case Release(l, r):
                if i == wrap:
                    out = BTrue()
                else:
                    out = band(
                        full(r, i), bor(full(l, i), approx(node, i + 1))
                    )
            case _:
                raise TypeError(f"approximation pass on {node!r}")
        memo[key] = out
        return out

    return band(_exactly_one_selector(mu), full(f, 0))


# ---------------------------------------------------------------------------
# clause form


def _tseitin(root, var_id: dict):
    """Clause form with fresh auxiliaries; returns (clauses, n_vars).

    var_id maps every structural variable to its final index before the
    call; auxiliaries are appended deterministically after them."""
    clauses: list[tuple[int, ...]] = []
    counter = itertools.count(len(var_id) + 1)
    memo: dict = {}

    def lit(node) -> int:
        if node in memo:
            return memo[node]
        match node:
            case BVar(v):
                out = var_id[v]
            case BNot(g):
                out = -lit(g)
            case BAnd(args):
                t = next(counter)
                kids = [lit(a) for a in args]
                for c in kids:
                    clauses.append((-t, c))
                clauses.append(tuple([t] + [-c for c in kids]))
                out = t
            case BOr(args):
                t = next(counter)
                kids = [lit(a) for a in args]
                for c in kids:
                    clauses.append((t, -c))
                clauses.append(tuple([-t] + kids))
                out = t
            case _:
                raise TypeError(f"constant below the root: {node!r}")
        memo[node] = out
        return out

    match root:
        case BTrue():
            return [], len(var_id)
        case BFalse():
            return [()], len(var_id)
    clauses.append((lit(root),))
    n_aux = next(counter) - 1
    return clauses, n_aux


# ---------------------------------------------------------------------------
# the full encoding


_ROLE_RANK = {"label": 0, "stateBit": 1, "loopSelector": 2, "auxiliary": 3}


def _var_key(v: PropVar):
    return (_ROLE_RANK[v.role], str(v.owner or ""), v.timestep, str(v.index))


@dataclass
class Encoding:
    formula: object  # circuit root
    split: ProjectionSplit  # over PropVars
    mu: int
    capped: bool
    clauses: list
    var_id: dict  # PropVar -> 1-based index
    n_vars: int
    stats: dict = field(default_factory=dict)

    def ids(self, vs) -> frozenset[int]:
        return frozenset(self.var_id[v] for v in vs)


def build_full_encoding(k: KripkeStructure, p, mu_override: int | None = None) -> Encoding:
    """Conjoin one path unrolling per composed trace variable (with loop
    closure), the guard matrix, and the body matrix, all at one shared
    unrolling length with shared loop selectors."""
    errs = validate_property(p, frozenset(k.ap))
    if errs:
        raise ValidationError("; ".join(errs))
    for kind, v in p.guard.prefix + p.body.prefix:
        if kind != "exists":
            raise ValidationError(
                f"unsupported inner quantifier {kind!r} for {v!r}"
            )

    if mu_override is not None and mu_override < 1:
        raise ValidationError(
            f"unrolling length must be positive, got {mu_override}"
        )
    try:
        full_mu = default_mu(k, p)
    except ResourceGuardError:
        if mu_override is None:
            raise
        full_mu = None
    if mu_override is None:
        mu = full_mu
        capped = False
    else:
        mu = mu_override
        capped = full_mu is None or mu_override < full_mu

    inner = [v for _, v in p.guard.prefix] + [v for _, v in p.body.prefix]
    composed = list(p.universals) + [p.count_var] + inner

    parts = []
    for var in composed:
        parts.append(encode_kripke_unrolling(k, var, mu))
        parts.append(_loop_closure(k, var, mu))
    parts.append(encode_ltl_bmc(nnf(desugar(p.guard.body)), mu))
    parts.append(encode_ltl_bmc(nnf(desugar(p.body.body)), mu))
    root = band(*parts)

    base = split_for_property(k, p)
    xs = frozenset(
        PropVar("label", i, var, prop)
        for (prop, var) in base.x
        for i in range(mu + 1)
    )
    ys = frozenset(
        PropVar("label", i, var, prop)
        for (prop, var) in base.y
        for i in range(mu + 1)
    )

    structural = sorted(circuit_vars(root) | xs | ys, key=_var_key)
    var_id = {v: i + 1 for i, v in enumerate(structural)}
    clauses, n_vars = _tseitin(root, var_id)
    zs = frozenset(v for v in structural if v not in xs and v not in ys)

    enc = Encoding(
        formula=root,
        split=ProjectionSplit(x=xs, y=ys, z=zs),
        mu=mu,
        capped=capped,
        clauses=clauses,
        var_id=var_id,
        n_vars=n_vars,
        stats={
            "mu": mu,
            "capped": capped,
            "variables": n_vars,
            "clauses": len(clauses),
            "count_vars": len(xs),
            "max_vars": len(ys),
        },
    )
    return enc


# ---------------------------------------------------------------------------
# solver file


def emit_solver_file(e: Encoding) -> str:
    """Clause-list text with header comments declaring the maximization
    (Y), counting (X), and projection (Z) variable sets.

    Format, line by line: 'p cnf <vars> <clauses>'; 'c max <ids> 0';
    'c ind <ids> 0'; 'c exist <ids> 0'; then one clause per line, each a
    space-separated list of signed indices terminated by 0.  Auxiliary
    clause-form variables beyond the declared sets belong to Z
    implicitly."""
    xs = sorted(e.ids(e.split.x))
    ys = sorted(e.ids(e.split.y))
    zs = sorted(e.ids(e.split.z))
    lines = [
        f"p cnf {e.n_vars} {len(e.clauses)}",
        "c max " + " ".join(map(str, ys + [0])),
        "c ind " + " ".join(map(str, xs + [0])),
        "c exist " + " ".join(map(str, zs + [0])),
    ]
    for c in e.clauses:
        lines.append(" ".join(map(str, list(c) + [0])))
    return "\n".join(lines) + "\n"


def read_solver_file(text: str) -> dict:
    """Parse the emitted format back; inverse of emit_solver_file on the
    clause set and the declared variable sets."""
    n_vars = None
    n_clauses = None
    sets: dict[str, frozenset[int]] = {}
    clauses: list[tuple[int, ...]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("p cnf "):
            _, _, a, b = line.split()
            n_vars, n_clauses = int(a), int(b)
            continue
        if line.startswith("c "):
            fields = line.split()
            if len(fields) >= 3 and fields[1] in ("max", "ind", "exist"):
                nums = [int(t) for t in fields[2:]]
                if nums[-1] != 0:
                    raise ValidationError(
                        f"unterminated declaration line {line!r}"
                    )
                sets[fields[1]] = frozenset(nums[:-1])
            continue
        nums = [int(t) for t in line.split()]
        if not nums or nums[-1] != 0:
            raise ValidationError(f"unterminated clause line {line!r}")
        clauses.append(tuple(nums[:-1]))
    if n_vars is None:
        raise ValidationError("missing problem line")
    if n_clauses != len(clauses):
        raise ValidationError(
            f"problem line declares {n_clauses} clauses, found {len(clauses)}"
        )
    return {
        "n_vars": n_vars,
        "clauses": clauses,
        "max": sets.get("max", frozenset()),
        "ind": sets.get("ind", frozenset()),
        "exist": sets.get("exist", frozenset()),
    }


# ---------------------------------------------------------------------------
# enumerative maximum counting


_TRUE = 1
_FALSE = 2


class _ClauseSearch:
    """Clause-indexed unit propagation and depth-first satisfiability.

    Assignments live in a flat array (0 unknown, 1 true, 2 false) with a
    trail for undoing.  Branching follows the given variable order;
    everything else is expected to follow by propagation (true for
    clause forms produced by _tseitin once the structural variables are
    set), with a full clause scan as a fallback for hand-built clause
    sets."""

    def __init__(self, clauses, order, n_vars: int):
        # clause literal (var, want) with want 1 for positive, 2 negated
        self.clauses = [
            tuple((l, _TRUE) if l > 0 else (-l, _FALSE) for l in c)
            for c in clauses
        ]
        self.order = order
        self.assign = bytearray(n_vars + 1)
        occ: dict[int, list[int]] = {}
        for ci, c in enumerate(self.clauses):
            for var, want in set(c):
                occ.setdefault((var << 1) | want, []).append(ci)
        self.occ = {k: tuple(v) for k, v in occ.items()}

    def propagate(self, pending: list[int], trail: list[int]) -> bool:
        """Close the assignment under unit propagation; False on
        conflict.  pending holds variables just assigned; every derived
        assignment lands on the trail."""
        assign = self.assign
        clauses = self.clauses
        occ = self.occ
        while pending:
            v = pending.pop()
            # clauses holding the literal this assignment falsified
            for ci in occ.get((v << 1) | (3 - assign[v]), ()):
                unit_var = 0
                unit_want = 0
                n_free = 0
                satisfied = False
                for var, want in clauses[ci]:
                    a = assign[var]
                    if a == 0:
                        n_free += 1
                        unit_var, unit_want = var, want
                    elif a == want:
                        satisfied = True
                        break
                if satisfied:
                    continue
                if n_free == 0:
                    return False
                if n_free == 1:
                    assign[unit_var] = unit_want
                    trail.append(unit_var)
                    pending.append(unit_var)
        return True

    def seed(self, trail: list[int]) -> bool:
        """Assert the unit clauses and propagate; False if contradictory."""
        assign = self.assign
        pending: list[int] = []
        for c in self.clauses:
            if len(c) == 0:
                return False
            if len(c) == 1:
                var, want = c[0]
                if assign[var] == 0:
                    assign[var] = want
                    trail.append(var)
                    pending.append(var)
                elif assign[var] != want:
                    return False
        return self.propagate(pending, trail)

    def undo_to(self, trail: list[int], mark: int) -> None:
        assign = self.assign
        while len(trail) > mark:
            assign[trail.pop()] = 0

    def _pick(self) -> int | None:
        assign = self.assign
        for v in self.order:
            if assign[v] == 0:
                return v
        # hand-built clause sets may constrain variables outside the order
        for c in self.clauses:
            free = 0
            satisfied = False
            for var, want in c:
                a = assign[var]
                if a == 0:
                    free = var
                elif a == want:
                    satisfied = True
                    break
            if not satisfied and free:
                return free
        return None

    def sat(self, trail: list[int]) -> bool:
        """Extendability of the current propagated conflict-free
        assignment.  Leaves the assignment exactly as found."""
        mark = len(trail)
        out = self._dfs(trail)
        self.undo_to(trail, mark)
        return out

    def _dfs(self, trail: list[int]) -> bool:
        pick = self._pick()
        if pick is None:
            return True
        mark = len(trail)
        for val in (_TRUE, _FALSE):
            self.assign[pick] = val
            trail.append(pick)
            if self.propagate([pick], trail) and self._dfs(trail):
                return True
            self.undo_to(trail, mark)
        return False


def _branch_order(e: Encoding) -> list[int]:
    """Decision order for the inner search: state bits timestep by
    timestep (so transition and label pinning constraints propagate at
    once), then loop selectors, then whatever remains."""

    def key(item):
        v, _ = item
        if v.role == "stateBit":
            group = 0
        elif v.role == "loopSelector":
            group = 1
        else:
            group = 2
        return (group, v.timestep, str(v.owner or ""), str(v.index))

    return [i for _, i in sorted(e.var_id.items(), key=key)]


@dataclass(frozen=True)
class SatCountResult:
    value: CountValue
    exceeded: bool
    y_assignment: dict | None
    stats: dict


class _LimitHit(Exception):
    def __init__(self, count, y):
        self.count = count
        self.y = y


def solve_enumerative(
    e: Encoding, limit: int, branch_cap: int = 30
) -> SatCountResult:
    """Maximum over Y-assignments of the number of X-assignments that
    some Z-assignment completes to a model.  Exact within the encoding;
    exits early once some Y-group exceeds the limit."""
    xs = sorted(e.ids(e.split.x))
    ys = sorted(e.ids(e.split.y))
    if len(xs) + len(ys) > branch_cap:
        raise ResourceGuardError(
            f"{len(xs) + len(ys)} branching variables exceed the"
            f" systematic-search guard of {branch_cap}"
        )
    id_var = {i: v for v, i in e.var_id.items()}
    stats = {"y_assignments": 0, "sat_checks": 0}
    search = _ClauseSearch(e.clauses, _branch_order(e), e.n_vars)
    assign = search.assign
    trail: list[int] = []

    def checked() -> bool:
        stats["sat_checks"] += 1
        return search.sat(trail)

    def count_x(rest: list[int], y_snapshot: dict) -> int:
        # precondition: assignment is propagated and extendable to a model
        free = [v for v in rest if assign[v] == 0]
        if not free:
            return 1
        v = free[0]
        total = 0
        mark = len(trail)
        for val in (_TRUE, _FALSE):
            assign[v] = val
            trail.append(v)
            if search.propagate([v], trail) and checked():
                total += count_x(free[1:], y_snapshot)
                if total > limit:
                    raise _LimitHit(total, y_snapshot)
            search.undo_to(trail, mark)
        return total

    best = -1
    best_y: dict | None = None

    def walk_y(rest: list[int]):
        nonlocal best, best_y
        free = [v for v in rest if assign[v] == 0]
        if not free:
            stats["y_assignments"] += 1
            snapshot = {id_var[v]: assign[v] == _TRUE for v in ys}
            n = count_x(xs, snapshot)
            if n > best:
                best = n
                best_y = snapshot
            return
        v = free[0]
        mark = len(trail)
        for val in (_TRUE, _FALSE):
            assign[v] = val
            trail.append(v)
            if search.propagate([v], trail) and checked():
                walk_y(free[1:])
            search.undo_to(trail, mark)

    try:
        if search.seed(trail) and checked():
            walk_y(ys)
    except _LimitHit as hit:
        return SatCountResult(
            value=CountValue.finite(hit.count),
            exceeded=True,
            y_assignment=hit.y,
            stats=stats,
        )
    if best <= 0:
        # unsatisfiable under every Y-assignment (or none feasible)
        return SatCountResult(
            value=CountValue.finite(0),
            exceeded=False,
            y_assignment=best_y if best == 0 else None,
            stats=stats,
        )
    return SatCountResult(
        value=CountValue.finite(best),
        exceeded=False,
        y_assignment=best_y,
        stats=stats,
    )
