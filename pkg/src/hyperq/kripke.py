"""Finite state-transition models and ultimately periodic traces.

A model is a set of named states with a total successor relation, one
initial state, and a labeling with atomic propositions.  Traces are
represented as lassos: a finite stem followed by a forever-repeated loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .errors import ValidationError

Letter = frozenset[str]


@dataclass(frozen=True)
class KripkeStructure:
    states: tuple[str, ...]
    init: str
    transitions: tuple[tuple[str, tuple[str, ...]], ...]
    ap: tuple[str, ...]
    labels: tuple[tuple[str, frozenset[str]], ...]

    # Derived lookup tables; dataclass equality/hash ignore them via field
    # order is irrelevant because they are deterministic functions of the rest.
    def __post_init__(self) -> None:
        object.__setattr__(self, "_succ", dict(self.transitions))
        object.__setattr__(self, "_lab", dict(self.labels))

    def successors(self, s: str) -> tuple[str, ...]:
        return self._succ.get(s, ())  # type: ignore[attr-defined]

    def label(self, s: str) -> frozenset[str]:
        return self._lab[s]  # type: ignore[attr-defined]


def make_kripke(
    states: list[str],
    init: str,
    transitions: dict[str, list[str]],
    ap: list[str],
    labels: dict[str, set[str] | frozenset[str]],
) -> KripkeStructure:
    """Convenience constructor from plain containers."""
    return KripkeStructure(
        states=tuple(states),
        init=init,
        transitions=tuple((s, tuple(transitions.get(s, ()))) for s in states),
        ap=tuple(ap),
        labels=tuple((s, frozenset(labels.get(s, frozenset()))) for s in states),
    )


def validate_kripke(k: KripkeStructure) -> list[str]:
    """Structural checks; returns a list of human-readable problems."""
    errs: list[str] = []
    seen: set[str] = set()
    for s in k.states:
        if s in seen:
            errs.append(f"duplicate state {s!r}")
        seen.add(s)
    if k.init not in seen:
        errs.append(f"initial state {k.init!r} is not declared")
    declared_t = {s for s, _ in k.transitions}
    for s, dsts in k.transitions:
        if s not in seen:
            errs.append(f"unknown state {s!r} in transition")
        if not dsts:
            errs.append(f"state {s!r} has no successor")
        for d in dsts:
            if d not in seen:
                errs.append(f"unknown state {d!r} in transition from {s!r}")
    for s in k.states:
        if s not in declared_t:
            errs.append(f"state {s!r} has no successor")
    apset = set(k.ap)
    for s, lab in k.labels:
        if s not in seen:
            errs.append(f"label on unknown state {s!r}")
        for a in lab:
            if a not in apset:
                errs.append(f"unknown proposition {a!r} on state {s!r}")
    labeled = {s for s, _ in k.labels}
    for s in k.states:
        if s not in labeled:
            errs.append(f"state {s!r} has no label entry")
    return errs


@dataclass(frozen=True)
class Lasso:
    """A state lasso: stem then loop, loop repeated forever.

    The loop must be nonempty.  If the stem is nonempty its first state is
    the initial state, otherwise the loop starts at the initial state.
    """

    stem: tuple[str, ...]
    loop: tuple[str, ...]


def _check_edge(k: KripkeStructure, a: str, b: str, pos: int, errs: list[str]) -> None:
    if b not in k.successors(a):
        errs.append(f"missing transition {a!r} -> {b!r} at position {pos}")


def validate_lasso(k: KripkeStructure, l: Lasso) -> list[str]:
    errs: list[str] = []
    if not l.loop:
        errs.append("empty loop")
        return errs
    first = l.stem[0] if l.stem else l.loop[0]
    if first != k.init:
        errs.append(f"lasso starts at {first!r}, not the initial state")
    seq = l.stem + l.loop
    for i in range(len(seq) - 1):
        _check_edge(k, seq[i], seq[i + 1], i, errs)
    _check_edge(k, l.loop[-1], l.loop[0], len(seq) - 1, errs)
    return errs


def lasso_trace(k: KripkeStructure, l: Lasso) -> tuple[tuple[Letter, ...], tuple[Letter, ...]]:
    """Label trace of a lasso as (stem letters, loop letters)."""
    errs = validate_lasso(k, l)
    if errs:
        raise ValidationError("; ".join(errs))
    return (
        tuple(k.label(s) for s in l.stem),
        tuple(k.label(s) for s in l.loop),
    )


def enumerate_lassos(k: KripkeStructure, max_len: int) -> Iterator[Lasso]:
    """All lassos with |stem| + |loop| <= max_len, deterministic order.

    Paths are explored depth-first following the declared successor order;
    for each path every closing split point is emitted in ascending order.
    """
    if max_len <= 0:
        return

    path: list[str] = [k.init]

    def emit() -> Iterator[Lasso]:
        last = path[-1]
        for j in range(len(path)):
            # loop = path[j:]; needs the closing edge back to path[j]
            if path[j] in k.successors(last):
                yield Lasso(stem=tuple(path[:j]), loop=tuple(path[j:]))

    def walk() -> Iterator[Lasso]:
        yield from emit()
        if len(path) < max_len:
            for d in k.successors(path[-1]):
                path.append(d)
                yield from walk()
                path.pop()

    yield from walk()
