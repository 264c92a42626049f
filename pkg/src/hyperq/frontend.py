"""Concrete syntax: parsing and rendering of properties and models.

Property files::

    forall pi1, pi2. <guard> -> (count sigma : {a, b} . <body>) <= 3

The ``forall`` clause and the guard are optional.  Guard and body may start
with an ``exists v1, v2.`` prefix.  Bounds are natural numbers, optionally
written as a power ``B^E`` which is evaluated while parsing.  Atoms name a
proposition on a trace variable, joined by an underscore and split at the
last one (``a_pi``, ``req_0_pi``).  ``pi ={a,b} sigma`` abbreviates stepwise
agreement on the listed propositions.  Temporal operators are written
``X U R W F G``; boolean ones ``! & | ->``.

Model files::

    ap a, b;
    state s0 {a};
    state s1 {};
    init s0;
    s0 -> s0, s1;
    s1 -> s1;

The ``ap`` line is optional when parsing (inferred from the labels) and
always emitted when rendering.  ``#`` starts a line comment in both formats.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import HyperqError
from .formula import (
    And,
    Atom,
    Eventually,
    FalseConst,
    Globally,
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
    WeakUntil,
)
from .kripke import KripkeStructure


@dataclass(frozen=True)
class SourceSpan:
    """1-based position of a token in the source text."""

    line: int
    col: int
    length: int


class ParseError(HyperqError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span.line}:{span.col}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "nat" | "punct" | "kw" | "eof"
    text: str
    span: SourceSpan


_PROP_KEYWORDS = frozenset(
    ["forall", "exists", "count", "true", "false", "X", "U", "R", "W", "F", "G"]
)
_MODEL_KEYWORDS = frozenset(["ap", "state", "init"])

_TWO_CHAR = ("->", "<=", ">=")
_ONE_CHAR = "(){}.,;:=<>^&|!"


def tokenize(source: str, keywords: frozenset[str]) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start = SourceSpan(line, col, 1)
        two = source[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(Token("punct", two, SourceSpan(line, col, 2)))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR:
            toks.append(Token("punct", c, start))
            i += 1
            col += 1
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            toks.append(Token("nat", text, SourceSpan(line, col, len(text))))
            col += j - i
            i = j
            continue
        if c.isalpha():
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "kw" if text in keywords else "ident"
            toks.append(Token(kind, text, SourceSpan(line, col, len(text))))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", start)
    toks.append(Token("eof", "", SourceSpan(line, col, 0)))
    return toks


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text if text is not None else kind
            got = t.text if t.text else "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", t.span)
        return self.next()

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind != "ident":
            got = t.text if t.text else "end of input"
            raise ParseError(f"expected {what}, found {got!r}", t.span)
        return self.next()


# ---------------------------------------------------------------------------
# temporal formulas


def _split_atom(tok: Token) -> tuple[str, str]:
    text = tok.text
    if "_" not in text:
        raise ParseError(
            f"atom {text!r} must name a proposition on a trace variable "
            "(write prop_var)",
            tok.span,
        )
    prop, _, var = text.rpartition("_")
    if not prop or not var:
        raise ParseError(f"malformed atom {text!r}", tok.span)
    return prop, var


class _FormulaParser(_Parser):
    def formula(self) -> LtlFormula:
        return self.implies()

    def implies(self) -> LtlFormula:
        left = self.disj()
        if self.at("punct", "->"):
            self.next()
            return Implies(left, self.implies())
        return left

    def disj(self) -> LtlFormula:
        f = self.conj()
        while self.at("punct", "|"):
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> LtlFormula:
        f = self.temporal()
        while self.at("punct", "&"):
            self.next()
            f = And(f, self.temporal())
        return f

    def temporal(self) -> LtlFormula:
        left = self.unary()
        t = self.peek()
        if t.kind == "kw" and t.text in ("U", "R", "W"):
            self.next()
            right = self.temporal()
            match t.text:
                case "U":
                    return Until(left, right)
                case "R":
                    return Release(left, right)
                case _:
                    return WeakUntil(left, right)
        return left

    def unary(self) -> LtlFormula:
        t = self.peek()
        if self.at("punct", "!"):
            self.next()
            child = self.unary()
            match child:
                case Atom(p, v):
                    return NegAtom(p, v)
                case _:
                    return Not(child)
        if t.kind == "kw" and t.text in ("X", "F", "G"):
            self.next()
            child = self.unary()
            match t.text:
                case "X":
                    return Next(child)
                case "F":
                    return Eventually(child)
                case _:
                    return Globally(child)
        return self.primary()

    def primary(self) -> LtlFormula:
        t = self.peek()
        if self.at("kw", "true"):
            self.next()
            return TrueConst()
        if self.at("kw", "false"):
            self.next()
            return FalseConst()
        if self.at("punct", "("):
            self.next()
            f = self.formula()
            self.expect("punct", ")")
            return f
        if t.kind == "ident":
            # trace equality sugar: var ={a,b} var
            if self.peek(1).kind == "punct" and self.peek(1).text == "=":
                left = self.next()
                self.expect("punct", "=")
                self.expect("punct", "{")
                props = self.prop_list("}")
                self.expect("punct", "}")
                right = self.ident("trace variable")
                return TraceEq(left.text, right.text, frozenset(props))
            tok = self.next()
            prop, var = _split_atom(tok)
            return Atom(prop, var)
        got = t.text if t.text else "end of input"
        raise ParseError(f"expected a formula, found {got!r}", t.span)

    def prop_list(self, closer: str) -> list[str]:
        props: list[str] = []
        if self.at("punct", closer):
            return props
        props.append(self.ident("proposition").text)
        while self.at("punct", ","):
            self.next()
            props.append(self.ident("proposition").text)
        return props

    def var_list(self) -> list[str]:
        out = [self.ident("trace variable").text]
        while self.at("punct", ","):
            self.next()
            out.append(self.ident("trace variable").text)
        return out


def parse_ltl(source: str) -> LtlFormula:
    """Parse a bare temporal formula (mainly for tests and tools)."""
    p = _FormulaParser(tokenize(source, _PROP_KEYWORDS))
    f = p.formula()
    p.expect("eof")
    return f


# ---------------------------------------------------------------------------
# properties


def _parse_quantified(p: _FormulaParser) -> HyperFormula:
    prefix: list[tuple[str, str]] = []
    while p.at("kw", "exists"):
        p.next()
        for v in p.var_list():
            prefix.append(("exists", v))
        p.expect("punct", ".")
    body = p.formula()
    return HyperFormula(tuple(prefix), body)


def parse_property(source: str) -> QuantitativeHyperproperty:
    toks = tokenize(source, _PROP_KEYWORDS)
    p = _FormulaParser(toks)

    universals: list[str] = []
    if p.at("kw", "forall"):
        p.next()
        universals = p.var_list()
        p.expect("punct", ".")

    # Locate the count expression to delimit the optional guard.
    count_at = None
    for i in range(p.pos, len(toks)):
        if toks[i].kind == "kw" and toks[i].text == "count":
            count_at = i
            break
    if count_at is None or count_at == p.pos or toks[count_at - 1].text != "(":
        raise ParseError("expected a count expression", p.peek().span)
    open_paren = count_at - 1

    guard = HyperFormula((), TrueConst())
    if p.pos != open_paren:
        arrow = open_paren - 1
        if toks[arrow].text != "->" or arrow < p.pos:
            raise ParseError(
                "expected '->' between guard and count expression",
                toks[open_paren].span,
            )
        gp = _FormulaParser(toks[p.pos : arrow] + [toks[-1]])
        guard = _parse_quantified(gp)
        gp.expect("eof")
        p.pos = open_paren

    p.expect("punct", "(")
    p.expect("kw", "count")
    count_var = p.ident("trace variable").text
    p.expect("punct", ":")
    p.expect("punct", "{")
    projection = frozenset(p.prop_list("}"))
    p.expect("punct", "}")
    p.expect("punct", ".")
    body = _parse_quantified(p)
    p.expect("punct", ")")

    cmp_tok = p.peek()
    if cmp_tok.text in ("<=", ">=", "<", ">", "="):
        p.next()
    else:
        got = cmp_tok.text if cmp_tok.text else "end of input"
        raise ParseError(f"expected a comparison, found {got!r}", cmp_tok.span)

    base_tok = p.expect("nat")
    bound = int(base_tok.text)
    if p.at("punct", "^"):
        p.next()
        exp_tok = p.expect("nat")
        bound = bound ** int(exp_tok.text)
    p.expect("eof")

    return QuantitativeHyperproperty(
        universals=tuple(universals),
        guard=guard,
        count_var=count_var,
        projection=projection,
        body=body,
        cmp=cmp_tok.text,
        bound=bound,
    )


# ---------------------------------------------------------------------------
# rendering

_LV_IMPLIES, _LV_OR, _LV_AND, _LV_TEMP, _LV_UNARY, _LV_PRIM = range(6)


def _render(f: LtlFormula, level: int) -> str:
    def wrap(s: str, own: int) -> str:
        return f"({s})" if own < level else s

    match f:
        case TrueConst():
            return "true"
        case FalseConst():
            return "false"
        case Atom(p, v):
            return f"{p}_{v}"
        case NegAtom(p, v):
            return f"!{p}_{v}"
        case TraceEq(lv, rv, ps):
            inner = ",".join(sorted(ps))
            return f"{lv} ={{{inner}}} {rv}"
        case Not(c):
            return wrap(f"!{_render(c, _LV_UNARY)}", _LV_UNARY)
        case Next(c):
            return wrap(f"X {_render(c, _LV_UNARY)}", _LV_UNARY)
        case Eventually(c):
            return wrap(f"F {_render(c, _LV_UNARY)}", _LV_UNARY)
        case Globally(c):
            return wrap(f"G {_render(c, _LV_UNARY)}", _LV_UNARY)
        case Until(l, r):
            s = f"{_render(l, _LV_UNARY)} U {_render(r, _LV_TEMP)}"
            return wrap(s, _LV_TEMP)
        case Release(l, r):
            s = f"{_render(l, _LV_UNARY)} R {_render(r, _LV_TEMP)}"
            return wrap(s, _LV_TEMP)
        case WeakUntil(l, r):
            s = f"{_render(l, _LV_UNARY)} W {_render(r, _LV_TEMP)}"
            return wrap(s, _LV_TEMP)
        case And(l, r):
            s = f"{_render(l, _LV_AND)} & {_render(r, _LV_TEMP)}"
            return wrap(s, _LV_AND)
        case Or(l, r):
            s = f"{_render(l, _LV_OR)} | {_render(r, _LV_AND)}"
            return wrap(s, _LV_OR)
        case Implies(l, r):
            s = f"{_render(l, _LV_OR)} -> {_render(r, _LV_IMPLIES)}"
            return wrap(s, _LV_IMPLIES)
        case _:
            raise TypeError(f"cannot render {f!r}")


def render_ltl(f: LtlFormula) -> str:
    return _render(f, _LV_IMPLIES)


def _render_quantified(h: HyperFormula) -> str:
    parts = []
    if h.prefix:
        vs = ", ".join(v for _, v in h.prefix)
        parts.append(f"exists {vs}. ")
    parts.append(render_ltl(h.body))
    return "".join(parts)


def render_property(p: QuantitativeHyperproperty) -> str:
    out = []
    if p.universals:
        out.append("forall " + ", ".join(p.universals) + ". ")
    trivial_guard = not p.guard.prefix and p.guard.body == TrueConst()
    if not trivial_guard:
        out.append(_render_quantified(p.guard))
        out.append(" -> ")
    proj = ", ".join(sorted(p.projection))
    out.append(f"(count {p.count_var} : {{{proj}}} . ")
    out.append(_render_quantified(p.body))
    out.append(f") {p.cmp} {p.bound}")
    return "".join(out)


# ---------------------------------------------------------------------------
# models


def parse_kripke(source: str) -> KripkeStructure:
    toks = tokenize(source, _MODEL_KEYWORDS)
    p = _Parser(toks)

    ap_order: list[str] | None = None
    states: list[str] = []
    decl_spans: dict[str, SourceSpan] = {}
    labels: dict[str, frozenset[str]] = {}
    label_spans: dict[str, list[tuple[str, SourceSpan]]] = {}
    init: str | None = None
    init_span: SourceSpan | None = None
    transitions: dict[str, list[str]] = {}
    trans_spans: list[tuple[str, SourceSpan]] = []

    def name_list() -> list[Token]:
        out = [p.ident("name")]
        while p.at("punct", ","):
            p.next()
            out.append(p.ident("name"))
        return out

    while not p.at("eof"):
        t = p.peek()
        if p.at("kw", "ap"):
            p.next()
            if ap_order is not None:
                raise ParseError("duplicate ap declaration", t.span)
            ap_order = [tok.text for tok in name_list()]
            p.expect("punct", ";")
        elif p.at("kw", "state"):
            p.next()
            name = p.ident("state name")
            if name.text in decl_spans:
                raise ParseError(
                    f"duplicate state declaration {name.text!r}", name.span
                )
            p.expect("punct", "{")
            props: list[tuple[str, SourceSpan]] = []
            if not p.at("punct", "}"):
                tok = p.ident("proposition")
                props.append((tok.text, tok.span))
                while p.at("punct", ","):
                    p.next()
                    tok = p.ident("proposition")
                    props.append((tok.text, tok.span))
            p.expect("punct", "}")
            p.expect("punct", ";")
            states.append(name.text)
            decl_spans[name.text] = name.span
            labels[name.text] = frozenset(pr for pr, _ in props)
            label_spans[name.text] = props
        elif p.at("kw", "init"):
            p.next()
            name = p.ident("state name")
            if init is not None:
                raise ParseError("duplicate init declaration", name.span)
            init, init_span = name.text, name.span
            p.expect("punct", ";")
        elif t.kind == "ident":
            src = p.next()
            p.expect("punct", "->")
            dsts = name_list()
            p.expect("punct", ";")
            trans_spans.append((src.text, src.span))
            for d in dsts:
                trans_spans.append((d.text, d.span))
            transitions.setdefault(src.text, []).extend(d.text for d in dsts)
        else:
            got = t.text if t.text else "end of input"
            raise ParseError(f"unexpected {got!r}", t.span)

    eof_span = toks[-1].span
    if not states:
        raise ParseError("no states declared", eof_span)
    for name, span in trans_spans:
        if name not in decl_spans:
            raise ParseError(f"unknown state {name!r} in transition", span)
    if init is None:
        raise ParseError("no init declaration", eof_span)
    if init not in decl_spans:
        assert init_span is not None
        raise ParseError(f"unknown state {init!r} in init declaration", init_span)
    for s in states:
        if not transitions.get(s):
            raise ParseError(f"state {s!r} has no successor", decl_spans[s])

    if ap_order is None:
        ap_order = sorted({a for lab in labels.values() for a in lab})
    else:
        known = set(ap_order)
        for s in states:
            for prop, span in label_spans[s]:
                if prop not in known:
                    raise ParseError(
                        f"unknown proposition {prop!r} on state {s!r}", span
                    )

    return KripkeStructure(
        states=tuple(states),
        init=init,
        transitions=tuple((s, tuple(transitions[s])) for s in states),
        ap=tuple(ap_order),
        labels=tuple((s, labels[s]) for s in states),
    )


def render_kripke(k: KripkeStructure) -> str:
    lines = ["ap " + ", ".join(k.ap) + ";"]
    lab = dict(k.labels)
    for s in k.states:
        inner = ", ".join(sorted(lab[s]))
        lines.append(f"state {s} {{{inner}}};")
    lines.append(f"init {k.init};")
    for s, dsts in k.transitions:
        lines.append(f"{s} -> " + ", ".join(dsts) + ";")
    return "\n".join(lines) + "\n"
