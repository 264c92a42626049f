"""Command line interface.

Subcommands cover the whole pipeline: `check` decides a counted-trace
property on a model, `count` reports the underlying maximum/minimum
projected counts, `dpl` runs the infinity test on its own, `encode`
emits (and optionally solves) the bounded clause-level encoding,
`oracle` and `expansion` run the two reference procedures, and `bench`
times the routes on the password-checker family, writing a CSV and a
plot.

Models are files in the structure syntax of the frontend; the special
spec `pwd:N` generates the N-cell password checker in memory.  A
property argument naming an existing file is read from it, anything
else is parsed as inline text.

Exit codes: 0 the property holds (or the command finished), 1 the
property is violated (or a doubly pumped lasso exists), 2 bad usage or
unparsable input, 3 a resource guard tripped.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from .automata import qhltl2ba
from .counting import check, dpl_check, max_count, min_count, split_for_property
from .errors import ResourceGuardError, ValidationError
from .frontend import ParseError, parse_kripke, parse_property, render_property
from .kripke import KripkeStructure, make_kripke
from .oracle import oracle_check_expansion, oracle_count, project_trace
from .satenc import build_full_encoding, emit_solver_file, solve_enumerative


def generate_pwd_model(bits: int) -> KripkeStructure:
    """Password checker over `bits` secret cells.

    A trace guesses one bit per step (proposition i marks a 1 guess) and
    nondeterministically tracks whether the guess still matches the
    secret; full matches reach an accepting sink labeled o, anything
    else a silent reject sink.  4*bits + 3 states.
    """
    if not 1 <= bits <= 8:
        raise ValidationError(f"password model size must be in 1..8, got {bits}")
    states = ["start", "acc", "rej"]
    labels: dict[str, set[str]] = {"start": set(), "acc": {"o"}, "rej": set()}
    trans: dict[str, list[str]] = {"acc": ["acc"], "rej": ["rej"]}
    for t in range(bits):
        for b in (0, 1):
            for m in ("m", "d"):
                s = f"t{t}b{b}{m}"
                states.append(s)
                labels[s] = {"i"} if b else set()
    trans["start"] = [f"t0b{b}{m}" for b in (0, 1) for m in ("m", "d")]
    for t in range(bits):
        for b in (0, 1):
            if t + 1 < bits:
                trans[f"t{t}b{b}d"] = [f"t{t + 1}b{nb}d" for nb in (0, 1)]
                trans[f"t{t}b{b}m"] = [
                    f"t{t + 1}b{nb}{nm}" for nb in (0, 1) for nm in ("m", "d")
                ]
            else:
                trans[f"t{t}b{b}d"] = ["rej"]
                trans[f"t{t}b{b}m"] = ["acc"]
    return make_kripke(states, "start", trans, ["i", "o"], labels)


def _load_model(spec: str) -> KripkeStructure:
    if spec.startswith("pwd:"):
        try:
            return generate_pwd_model(int(spec[4:]))
        except ValueError:
            raise ValidationError(f"bad model spec {spec!r}") from None
    with open(spec, encoding="utf-8") as fh:
        return parse_kripke(fh.read())


def _load_property(spec: str):
    if os.path.isfile(spec):
        with open(spec, encoding="utf-8") as fh:
            return parse_property(fh.read())
    return parse_property(spec)


def _letters(word) -> str:
    out = []
    for letter in word:
        inner = ",".join(sorted(f"{p}_{v}" for (p, v) in letter))
        out.append("{" + inner + "}")
    return " ".join(out) if out else "(empty)"


def _count_str(cv) -> str:
    return "infinite" if cv.is_infinite else str(cv.value)


def _json_count(cv):
    return "infinite" if cv.is_infinite else cv.value


def _emit(args, payload: dict, human_lines: list[str], elapsed: float) -> None:
    if args.format == "json":
        if args.timings:
            payload["seconds"] = round(elapsed, 6)
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)
        if args.timings:
            print(f"elapsed: {elapsed:.3f}s")


# --- subcommands ------------------------------------------------------------


def _cmd_check(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    verdict = check(k, p)
    elapsed = time.perf_counter() - t0
    stats = verdict.statistics
    payload = {
        "command": "check",
        "property": render_property(p),
        "holds": verdict.holds,
        "route": stats.get("route"),
        "statistics": stats,
        "witness": None,
    }
    lines = [
        f"property: {render_property(p)}",
        f"model: {len(k.states)} states",
        f"verdict: {'holds' if verdict.holds else 'violated'}",
        f"route: {stats.get('route')}",
    ]
    w = verdict.witness
    if w is not None:
        payload["witness"] = {
            "count": _json_count(w.count),
            "grouping_stem": [_letters([l]) for l in w.y_stem],
            "grouping_loop": [_letters([l]) for l in w.y_loop],
            "traces": {
                var: {"stem": list(l.stem), "loop": list(l.loop)}
                for var, l in zip(w.variables, w.lassos)
            },
        }
        lines.append(f"witness count: {_count_str(w.count)}")
        lines.append(
            f"witness grouping word: {_letters(w.y_stem)} | {_letters(w.y_loop)}"
        )
        for var, l in zip(w.variables, w.lassos):
            lines.append(
                f"witness trace {var}: {' '.join(l.stem)} | {' '.join(l.loop)}"
            )
    _emit(args, payload, lines, elapsed)
    return 0 if verdict.holds else 1


def _cmd_count(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    full, guard, stats = qhltl2ba(k, p)
    split = split_for_property(k, p)
    witness = dpl_check(full, split)
    limit = args.limit if args.limit is not None else 1 << len(full.states)
    maximum = None
    if witness is None:
        maximum = max_count(full, split, limit=limit)
    minimum = min_count(full, guard, split, limit=limit)
    elapsed = time.perf_counter() - t0

    payload = {
        "command": "count",
        "property": render_property(p),
        "automaton_states": len(full.states),
        "guard_automaton_states": len(guard.states),
        "maximum": "infinite" if witness is not None else _json_count(maximum.value),
        "maximum_exceeded_limit": bool(maximum and maximum.exceeded),
        "minimum": _json_count(minimum.value),
        "minimum_exceeded_limit": minimum.exceeded,
        "no_eligible_grouping": minimum.vacuous,
    }
    lines = [
        f"automaton states: {len(full.states)} (guard side: {len(guard.states)})",
    ]
    if witness is not None:
        lines.append("maximum distinct projections over groupings: infinite")
    else:
        suffix = " (hit limit; at least this many)" if maximum.exceeded else ""
        lines.append(
            "maximum distinct projections over groupings: "
            f"{_count_str(maximum.value)}{suffix}"
        )
    if minimum.vacuous:
        lines.append("minimum distinct projections: no eligible grouping")
    else:
        suffix = " (hit limit; at least this many)" if minimum.exceeded else ""
        lines.append(
            "minimum distinct projections over eligible groupings: "
            f"{_count_str(minimum.value)}{suffix}"
        )
    _emit(args, payload, lines, elapsed)
    return 0


def _cmd_dpl(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    full, _, _ = qhltl2ba(k, p)
    split = split_for_property(k, p)
    w = dpl_check(full, split)
    elapsed = time.perf_counter() - t0
    payload = {
        "command": "dpl",
        "property": render_property(p),
        "witness_found": w is not None,
        "witness": None,
    }
    if w is None:
        lines = ["doubly pumped lasso: none (projected count is finite)"]
    else:
        payload["witness"] = {
            "prefix": _letters(w.prefix_letters),
            "cycle": _letters(w.cycle_letters),
            "run": _letters(w.run_letters),
            "run_cycle_start": w.run_cycle_start,
            "difference_index": w.diff_index,
        }
        lines = [
            "doubly pumped lasso: found (projected count is infinite)",
            f"  pumped prefix:  {_letters(w.prefix_letters)}",
            f"  pumped cycle:   {_letters(w.cycle_letters)}",
            f"  witness run:    {_letters(w.run_letters)} (loops at "
            f"{w.run_cycle_start}, differs at {w.diff_index})",
        ]
    _emit(args, payload, lines, elapsed)
    return 1 if w is not None else 0


def _cmd_encode(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    enc = build_full_encoding(k, p, mu_override=args.mu)
    text = emit_solver_file(enc)
    result = None
    if args.solve:
        result = solve_enumerative(enc, limit=args.limit)
    elapsed = time.perf_counter() - t0

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    completeness = "bounded (incomplete)" if enc.capped else "complete at this depth"
    payload = {
        "command": "encode",
        "property": render_property(p),
        "mu": enc.mu,
        "capped": enc.capped,
        "completeness": completeness,
        "variables": enc.n_vars,
        "clauses": len(enc.clauses),
        "count_vars": enc.stats["count_vars"],
        "max_vars": enc.stats["max_vars"],
        "file": args.out,
    }
    lines = [
        f"unrolling length: {enc.mu} ({completeness})",
        f"variables: {enc.n_vars}, clauses: {len(enc.clauses)}",
        f"counting set: {enc.stats['count_vars']} vars, "
        f"grouping set: {enc.stats['max_vars']} vars",
    ]
    if args.out:
        lines.append(f"wrote {args.out}")
    if result is not None:
        payload["solve"] = {
            "maximum": _json_count(result.value),
            "exceeded_limit": result.exceeded,
        }
        suffix = " (hit limit; at least this many)" if result.exceeded else ""
        lines.append(
            f"bounded maximum at this depth: {_count_str(result.value)}{suffix}"
        )
    if args.out or args.format == "json" or args.solve:
        _emit(args, payload, lines, elapsed)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_oracle(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    report = oracle_count(k, p, max_len=args.max_len, tuple_ceiling=args.tuple_ceiling)
    elapsed = time.perf_counter() - t0
    worst = max(report.counts.values(), default=0)
    payload = {
        "command": "oracle",
        "property": render_property(p),
        "holds": report.holds,
        "bounded": report.bounded,
        "max_len": report.max_len,
        "traces": report.trace_count,
        "guarded_tuples": len(report.counts),
        "largest_count": worst,
    }
    lines = [
        f"verdict (all lassos up to length {report.max_len}): "
        f"{'holds' if report.holds else 'violated'}",
        f"traces: {report.trace_count}, guarded tuples: {len(report.counts)}, "
        f"largest projected count: {worst}",
    ]
    _emit(args, payload, lines, elapsed)
    return 0 if report.holds else 1


def _cmd_expansion(args) -> int:
    k = _load_model(args.model)
    p = _load_property(args.property)
    t0 = time.perf_counter()
    holds = oracle_check_expansion(
        k, p, max_len=args.max_len, tuple_ceiling=args.tuple_ceiling
    )
    elapsed = time.perf_counter() - t0
    payload = {
        "command": "expansion",
        "property": render_property(p),
        "holds": holds,
        "max_len": args.max_len,
    }
    lines = [
        f"verdict by quantifier expansion (lassos up to length {args.max_len}): "
        f"{'holds' if holds else 'violated'}"
    ]
    _emit(args, payload, lines, elapsed)
    return 0 if holds else 1


QNI_TEMPLATE = "forall pi. (count sigma : {{o}} . G (pi ={{i}} sigma)) <= 2^{c}"


def _cmd_bench(args) -> int:
    sizes = [int(tok) for tok in args.bits.split(",") if tok]
    prop = parse_property(QNI_TEMPLATE.format(c=args.secrecy))
    rows = []
    for bits in sizes:
        k = generate_pwd_model(bits)
        t0 = time.perf_counter()
        verdict = check(k, prop)
        auto_s = time.perf_counter() - t0
        rows.append(
            {
                "bits": bits,
                "states": len(k.states),
                "route": "automata",
                "mu": "",
                "seconds": round(auto_s, 6),
                "holds": verdict.holds,
            }
        )
        if bits <= args.bounded_max_bits:
            t0 = time.perf_counter()
            enc = build_full_encoding(k, prop, mu_override=args.mu)
            r = solve_enumerative(enc, limit=1 << args.secrecy + 2)
            sat_s = time.perf_counter() - t0
            rows.append(
                {
                    "bits": bits,
                    "states": len(k.states),
                    "route": "bounded",
                    "mu": enc.mu,
                    "seconds": round(sat_s, 6),
                    "holds": not r.exceeded
                    and not r.value.is_infinite
                    and r.value.value <= 2**args.secrecy,
                }
            )

    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "bench.csv")
    png_path = os.path.join(args.out_dir, "bench.png")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["bits", "states", "route", "mu", "seconds", "holds"]
        )
        writer.writeheader()
        writer.writerows(rows)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for route, marker in (("automata", "o"), ("bounded", "s")):
        xs = [r["bits"] for r in rows if r["route"] == route]
        ys = [r["seconds"] for r in rows if r["route"] == route]
        if xs:
            ax.plot(xs, ys, marker=marker, label=route)
    ax.set_xlabel("password cells")
    ax.set_ylabel("seconds")
    ax.set_yscale("log")
    ax.set_title("secrecy bound check on the password family")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)

    payload = {
        "command": "bench",
        "rows": rows,
        "csv": csv_path,
        "figure": png_path,
    }
    lines = [f"{len(rows)} measurements -> {csv_path}, {png_path}"]
    for r in rows:
        lines.append(
            f"  pwd:{r['bits']} ({r['states']} states) {r['route']:9s} "
            f"{r['seconds']:9.3f}s holds={r['holds']}"
        )
    _emit(args, payload, lines, 0.0)
    return 0


# --- wiring -----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="hyperq",
        description="Exact checking of counted-trace properties on finite models.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(sp, with_property=True):
        sp.add_argument("model", help="model file, or pwd:N for the password family")
        if with_property:
            sp.add_argument("property", help="property text or file")
        sp.add_argument(
            "--format", choices=("human", "json"), default="human"
        )
        sp.add_argument(
            "--timings",
            action="store_true",
            help="include wall-clock time in the output",
        )

    sp = sub.add_parser("check", help="decide the property; exit 0 holds, 1 violated")
    common(sp)
    sp.set_defaults(fn=_cmd_check)

    sp = sub.add_parser("count", help="report maximum/minimum projected counts")
    common(sp)
    sp.add_argument("--limit", type=int, default=None, help="early-exit count cap")
    sp.set_defaults(fn=_cmd_count)

    sp = sub.add_parser("dpl", help="doubly-pumped-lasso infinity test; exit 1 if found")
    common(sp)
    sp.set_defaults(fn=_cmd_dpl)

    sp = sub.add_parser("encode", help="emit the bounded clause-level encoding")
    common(sp)
    sp.add_argument("--mu", type=int, default=None, help="unrolling length override")
    sp.add_argument("--out", default=None, help="write the clause file here")
    sp.add_argument(
        "--solve",
        action="store_true",
        help="run the enumerative projected counter on the encoding",
    )
    sp.add_argument("--limit", type=int, default=64, help="count cap for --solve")
    sp.set_defaults(fn=_cmd_encode)

    sp = sub.add_parser("oracle", help="brute-force bounded reference check")
    common(sp)
    sp.add_argument("--max-len", type=int, default=4, help="lasso length bound")
    sp.add_argument("--tuple-ceiling", type=int, default=10**6)
    sp.set_defaults(fn=_cmd_oracle)

    sp = sub.add_parser(
        "expansion", help="quantifier-expansion reference check (bounded)"
    )
    common(sp)
    sp.add_argument("--max-len", type=int, default=4, help="lasso length bound")
    sp.add_argument("--tuple-ceiling", type=int, default=10**6)
    sp.set_defaults(fn=_cmd_expansion)

    sp = sub.add_parser("bench", help="time the routes on the password family")
    sp.add_argument("--bits", default="1,2,3", help="comma list of family sizes")
    sp.add_argument("--secrecy", type=int, default=1, help="exponent c in the bound 2^c")
    sp.add_argument("--mu", type=int, default=8, help="unrolling length for the bounded route")
    sp.add_argument(
        "--bounded-max-bits",
        type=int,
        default=2,
        help="largest family size to also run through the bounded route",
    )
    sp.add_argument("--out-dir", default=".", help="directory for bench.csv/bench.png")
    sp.add_argument("--format", choices=("human", "json"), default="human")
    sp.add_argument("--timings", action="store_true")
    sp.set_defaults(fn=_cmd_bench)

    return top


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
