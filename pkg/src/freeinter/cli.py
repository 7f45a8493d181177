"""Command line front end.

Subcommands: ``bounds``, ``example``, ``intersect``, ``sweep``, ``kemperman``.

Exit codes: 0 success, 1 a computed value contradicts an expectation,
2 input could not be parsed, 3 input parsed but failed validation.

Subgroup files::

    action degree 4
    factor V 1 = (1 2)        # image of the first generator of factor V
    factor V 2 = (3 4)
    free x1 = (1 3)
    basepoint 1               # optional, default 1
    mode kernel               # or stabilizer; default kernel

``--dump-graph`` prints core graphs as one line per vertex,
``vertex-id : kind : neighbor-ids``. Point vertices are ``p<k>`` (pairs as
``p<k>_<l>``) of kind ``v0``; orbit vertices are ``<factor>#<n>`` of kind
``v:<factor>``. A neighbor appears once per edge end, so loops repeat.

With ``--json PATH`` a machine-readable report is written; rationals are
``{"num": p, "den": q}`` and an infinite height is the string ``"inf"``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import coregraph
from .fpspec import INFINITE, SpecParseError, compute_bounds, parse_spec, validate_nondegenerate
from .intersector import (
    ActionValidationError,
    RawAction,
    check_upper_bounds,
    handle_from_raw,
    intersect_all,
)
from .permcore import CycleSyntaxError, GroupTooLarge, named_group, parse_cycles
from .sumsetlab import CHECKS, SweepTooLarge, TableAmbient, kemperman_transform, pair_state, sweep_all_pairs
from .witnesses import WitnessError, evaluate, example_222, example_2p, example_2V, example_pp, psl2_facts

EXIT_OK, EXIT_VIOLATION, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3


class InputError(ValueError):
    """Unparseable input (exit 2)."""


class ValidationFailure(ValueError):
    """Parsed but invalid input (exit 3)."""


# ---------------------------------------------------------------------------
# Rendering helpers


def fmt(q) -> str:
    if q == INFINITE:
        return "inf"
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def jnum(q):
    if q == INFINITE:
        return "inf"
    if isinstance(q, int) and not isinstance(q, bool):
        return q
    q = Fraction(q)
    return {"num": q.numerator, "den": q.denominator}


def from_jnum(v):
    """Inverse of ``jnum``."""
    if v == "inf":
        return INFINITE
    if isinstance(v, dict):
        return Fraction(v["num"], v["den"])
    return v


def bounds_json(b) -> dict:
    return {"chi": jnum(b.chi), "height": jnum(b.height), "fheight": jnum(b.fheight), "depth": b.depth,
            "sigma_lower": jnum(b.sigma_lower), "sigma_upper": jnum(b.sigma_upper)}


def spec_json(spec) -> dict:
    return {"description": spec.describe(), "free_rank": spec.free_rank,
            "factors": [{"name": f.name, "kind": f.kind, "order": f.order} for f in spec.factors]}


def intersection_json(rep) -> dict:
    return {
        "rbar_h": rep.rbar_h,
        "rbar_k": rep.rbar_k,
        "orbits": [{"rep_word": o.rep_text, "size": o.size, "rbar": o.rbar} for o in rep.orbits],
        "total": rep.total,
        "principal": rep.principal,
        "double_coset_count": rep.double_coset_count,
        "bound_rhs": jnum(rep.bound_rhs),
        "tight": rep.tight,
        "hk_equals_g": rep.hk_equals_g,
    }


def print_bounds(b, out) -> None:
    print(f"chi      = {fmt(b.chi)}", file=out)
    print(f"height   = {fmt(b.height)}", file=out)
    print(f"fheight  = {fmt(b.fheight)}", file=out)
    print(f"depth    = {b.depth}", file=out)
    print(f"sigma in [{fmt(b.sigma_lower)}, {fmt(b.sigma_upper)}]", file=out)


def print_intersection(rep, out, dump_graph: bool = False, factor_names=()) -> None:
    print(f"rbar(H) = {rep.rbar_h}, rbar(K) = {rep.rbar_k}", file=out)
    print(f"{'rep s':<20} {'size':>8} {'rbar':>8}", file=out)
    for o in rep.orbits:
        print(f"{o.rep_text:<20} {o.size:>8} {o.rbar:>8}", file=out)
    print(f"double cosets = {rep.double_coset_count}, HK = G: {rep.hk_equals_g}", file=out)
    print(f"principal rbar(H n K) = {rep.principal}", file=out)
    verdict = check_upper_bounds(rep, rep.bounds)
    print(f"total = {rep.total}", file=out)
    for c in verdict.checks:
        status = "tight" if c.tight else ("ok" if c.holds else "VIOLATED")
        print(f"  <= {c.name} * rbar(H) * rbar(K) = {fmt(c.rhs)}  [{status}]", file=out)
    if rep.proposition_holds is not None:
        print(f"rbar(H n K) = (-1/chi) rbar(H) rbar(K): {rep.proposition_holds}", file=out)
    if dump_graph:
        for k, o in enumerate(rep.orbits):
            print(f"# core graph of orbit {k} (s = {o.rep_text})", file=out)
            out.write(coregraph.dump_graph(o.core, factor_names))


def write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Input parsing


def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def load_spec(path: str):
    try:
        return parse_spec(read_text(path))
    except SpecParseError as exc:
        raise InputError(f"{path}: {exc}") from exc


_ASSIGN_RE = re.compile(r"^(free|factor)\s+(.+?)\s*=\s*(.+)$")


def parse_subgroup_file(text: str, spec) -> RawAction:
    degree = None
    basepoint, mode = 1, "kernel"
    free: dict[int, str] = {}
    factors: dict[str, dict[int, str]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        where = f"line {lineno}"
        if toks[:2] == ["action", "degree"] and len(toks) == 3 and toks[2].isdigit():
            degree = int(toks[2])
        elif toks[0] == "basepoint" and len(toks) == 2 and toks[1].isdigit():
            basepoint = int(toks[1])
        elif toks[0] == "mode" and len(toks) == 2 and toks[1] in ("kernel", "stabilizer"):
            mode = toks[1]
        elif m := _ASSIGN_RE.match(line):
            kind, lhs, perm = m.groups()
            if kind == "free":
                fm = re.fullmatch(r"x(\d+)", lhs)
                if not fm:
                    raise InputError(f"{where}: expected 'free x<j> = <perm>'")
                free[int(fm.group(1))] = perm
            else:
                parts = lhs.split()
                if len(parts) != 2 or not parts[1].isdigit():
                    raise InputError(f"{where}: expected 'factor <name> <gen-index> = <perm>'")
                factors.setdefault(parts[0], {})[int(parts[1])] = perm
        else:
            raise InputError(f"{where}: unrecognized line {line!r}")
    if degree is None:
        raise InputError("missing 'action degree <n>' line")
    try:
        free_perms = {j: parse_cycles(t, degree) for j, t in free.items()}
        factor_perms = {}
        for name, gens in factors.items():
            if sorted(gens) != list(range(1, len(gens) + 1)):
                raise InputError(f"factor {name}: generator indices must be 1..{len(gens)}")
            factor_perms[name] = [parse_cycles(gens[k], degree) for k in sorted(gens)]
    except CycleSyntaxError as exc:
        raise InputError(str(exc)) from exc
    return RawAction(degree, free_perms, factor_perms, basepoint, mode)


def load_handle(path: str, spec, cap: int):
    raw = parse_subgroup_file(read_text(path), spec)
    return handle_from_raw(spec, raw, cap)


def parse_elements(text: str, table, name: str) -> list[int]:
    """Comma separated table indices, or permutations in cycle notation separated by ';'."""
    text = text.strip()
    if not text:
        return []
    try:
        if "(" in text:
            out = []
            for chunk in text.split(";"):
                perm = parse_cycles(chunk, table.degree)
                if perm not in table.index:
                    raise ValidationFailure(f"{perm} is not an element of {name}")
                out.append(table.index[perm])
            return out
        vals = [int(t) for t in re.split(r"[,\s]+", text) if t]
    except (CycleSyntaxError, ValueError) as exc:
        if isinstance(exc, ValidationFailure):
            raise
        raise InputError(f"cannot parse element list {text!r}: {exc}") from exc
    bad = [v for v in vals if not 0 <= v < table.order]
    if bad:
        raise ValidationFailure(f"element {bad[0]} not in {name} (order {table.order})")
    return vals


# ---------------------------------------------------------------------------
# Subcommands


def cmd_bounds(args, out) -> int:
    spec = load_spec(args.spec)
    ok, why = validate_nondegenerate(spec)
    if not ok:
        raise ValidationFailure(f"degenerate spec: {why}")
    b = compute_bounds(spec)
    print(f"G = {spec.describe()}", file=out)
    print_bounds(b, out)
    write_json(args.json, {"command": "bounds", "spec": spec_json(spec), "bounds": bounds_json(b), "violations": []})
    return EXIT_OK


def _build_example(args):
    name = args.name
    if name == "222":
        return example_222()
    if name == "2V":
        return example_2V()
    if name == "2p":
        p = args.p if args.p is not None else 3
        variant = args.variant or ("psl2" if p == 3 else "main")
        return example_2p(p, variant, cap=args.cap)
    if name == "pp":
        return example_pp(args.p if args.p is not None else 3)
    raise InputError(f"unknown example {name!r}")


def cmd_example(args, out) -> int:
    if args.name == "psl2":
        facts = psl2_facts()
        ok = (facts.orders == (6, 12, 72) and facts.rbars == (1, 2, 12) and facts.kernel_equality
              and all(facts.relations.values()))
        print(f"image orders  = {facts.orders}", file=out)
        print(f"rbar          = {facts.rbars}", file=out)
        print(f"ranks         = {facts.ranks}", file=out)
        for k, v in facts.relations.items():
            print(f"{k}: {v}", file=out)
        print(f"level 6 kernel = level 2 n level 3: {facts.kernel_equality}", file=out)
        write_json(args.json, {"command": "example", "example": {
            "name": "psl2", "orders": list(facts.orders), "rbar": list(facts.rbars), "ranks": list(facts.ranks),
            "kernel_equality": facts.kernel_equality}, "violations": [] if ok else ["psl2 facts mismatch"]})
        return EXIT_OK if ok else EXIT_VIOLATION
    try:
        case = _build_example(args)
    except WitnessError as exc:
        raise ValidationFailure(str(exc)) from exc
    res = evaluate(case)
    print(f"{case.source}: G = {case.spec.describe()}", file=out)
    print_bounds(res.report.bounds, out)
    print_intersection(res.report, out, args.dump_graph, [f.name for f in case.spec.factors])
    print(f"triple   = {res.triple}  expected {case.expected_triple}", file=out)
    failed = [k for k, v in res.checks.items() if not v]
    for k in failed:
        print(f"FAILED: {k}", file=out)
    write_json(args.json, {"command": "example", "spec": spec_json(case.spec),
                           "bounds": bounds_json(res.report.bounds), "intersection": intersection_json(res.report),
                           "example": {"name": case.name, "triple": list(res.triple),
                                       "expected": list(case.expected_triple), "checks": res.checks},
                           "violations": failed})
    return EXIT_OK if not failed else EXIT_VIOLATION


def cmd_intersect(args, out) -> int:
    spec = load_spec(args.spec)
    h = load_handle(args.h, spec, args.cap)
    k = load_handle(args.k, spec, args.cap)
    rep = intersect_all(h, k)
    print(f"G = {spec.describe()}", file=out)
    print_intersection(rep, out, args.dump_graph, [f.name for f in spec.factors])
    verdict = check_upper_bounds(rep, rep.bounds)
    violations = [f"{c.name}: {c.lhs} > {fmt(c.rhs)}" for c in verdict.checks if not c.holds]
    violations += [f"fiber {f.factor}: slack {fmt(f.slack)}" for f in rep.fiber_checks if f.slack < 0]
    if rep.proposition_holds is False:
        violations.append("HK = G but rbar(H n K) != (-1/chi) rbar(H) rbar(K)")
    write_json(args.json, {"command": "intersect", "spec": spec_json(spec), "bounds": bounds_json(rep.bounds),
                           "intersection": intersection_json(rep), "violations": violations})
    return EXIT_OK if not violations else EXIT_VIOLATION


def cmd_sweep(args, out) -> int:
    names = [g.strip() for g in args.groups.split(",") if g.strip()]
    if not names:
        raise InputError("no groups given")
    rows, violations = [], []
    for name in names:
        try:
            table = named_group(name, cap=args.cap)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        start = time.perf_counter()
        res = sweep_all_pairs(table, args.check, args.min_size, name=name, samples=args.samples,
                              seed=args.seed, workers=args.workers)
        elapsed = time.perf_counter() - start
        print(f"{name:<8} order {table.order:>3}  {args.check:<10} pairs {res.pairs_checked:>9}  "
              f"violations {len(res.violations)}  discoveries {len(res.discoveries)}  {elapsed:.2f}s", file=out)
        for v in res.violations[:10]:
            print(f"  violation: {v}", file=out)
        for d in res.discoveries[:10]:
            print(f"  discovery: {d}", file=out)
        rows.append({"group": name, "order": table.order, "check": args.check, "pairs": res.pairs_checked,
                     "violations": len(res.violations), "discoveries": len(res.discoveries),
                     "elapsed": round(elapsed, 3)})
        violations += [f"{name}: {v!r}" for v in res.violations]
    write_json(args.json, {"command": "sweep", "sweep": rows, "violations": violations})
    return EXIT_OK if not violations else EXIT_VIOLATION


def cmd_kemperman(args, out) -> int:
    try:
        table = named_group(args.group, cap=args.cap)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    amb = TableAmbient(table, args.group)
    A = amb.set(parse_elements(args.A, table, args.group))
    B = amb.set(parse_elements(args.B, table, args.group))
    xs = parse_elements(args.x, table, args.group)
    if len(xs) != 1:
        raise InputError("x must be a single element")
    if not len(A) or not len(B):
        raise ValidationFailure("A and B must be nonempty")
    rep = kemperman_transform(A, B, xs[0])
    show = lambda S: "{" + ", ".join(map(str, sorted(S))) + "}"
    st = pair_state(A, B)
    print(f"A = {show(A)}, B = {show(B)}, x = {xs[0]}", file=out)
    print(f"|AB| = {len(st.product)}, |A.2B| = {len(st.doubly)}, omega = {st.omega}", file=out)
    print(f"A+ = {show(rep.A_plus)}, B- = {show(rep.B_minus)}", file=out)
    print(f"A- = {show(rep.A_minus)}, B+ = {show(rep.B_plus)}", file=out)
    for sign, d in (("+", rep.delta_plus), ("-", rep.delta_minus)):
        print(f"delta{sign}: " + ", ".join(f"{k}={v}" for k, v in d.items()), file=out)
    print(f"case {rep.case_taken}, chosen {rep.chosen}: A' = {show(rep.result.A)}, B' = {show(rep.result.B)}",
          file=out)
    ok = rep.delta_plus["A"] + rep.delta_minus["A"] == 0 and rep.delta_plus["omega"] + rep.delta_minus["omega"] <= 0
    write_json(args.json, {"command": "kemperman", "kemperman": {
        "x": xs[0], "A_plus": sorted(rep.A_plus), "B_minus": sorted(rep.B_minus), "A_minus": sorted(rep.A_minus),
        "B_plus": sorted(rep.B_plus), "delta_plus": rep.delta_plus, "delta_minus": rep.delta_minus,
        "case": rep.case_taken, "chosen": rep.chosen, "omega": st.omega},
        "violations": [] if ok else ["delta identities"]})
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeinter", description="Ranks of intersections of free subgroups "
                                     "in free products of finite groups.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cap=True):
        p.add_argument("--json", metavar="PATH", help="write a JSON report")
        if cap:
            p.add_argument("--cap", type=positive_int, default=200_000, help="group order cap")

    p = sub.add_parser("bounds", help="invariants and the sigma interval of a spec")
    p.add_argument("spec")
    common(p, cap=False)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("example", help="run a built-in example")
    p.add_argument("name", choices=["222", "2V", "2p", "pp", "psl2"])
    p.add_argument("--p", type=int)
    p.add_argument("--variant", choices=["main", "alt", "psl2"])
    p.add_argument("--dump-graph", action="store_true")
    common(p)
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("intersect", help="intersect two subgroups given by action files")
    p.add_argument("spec")
    p.add_argument("h")
    p.add_argument("k")
    p.add_argument("--dump-graph", action="store_true")
    common(p)
    p.set_defaults(func=cmd_intersect)

    p = sub.add_parser("sweep", help="exhaustive or sampled checks over pairs of subsets")
    p.add_argument("--groups", required=True, help="comma separated: c<n>, klein, s<n>, a<n>, d<n>")
    p.add_argument("--check", choices=CHECKS, default="key")
    p.add_argument("--min-size", type=int, default=2)
    p.add_argument("--samples", type=positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kemperman", help="one Kemperman transform step")
    p.add_argument("group")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--x", required=True)
    common(p)
    p.set_defaults(func=cmd_kemperman)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationFailure, ActionValidationError, SweepTooLarge, GroupTooLarge) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
