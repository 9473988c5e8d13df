"""Command line front end.

Exit codes: 0 positive verdict (enforced, feasible, true, non-empty),
2 negative verdict (infeasible, false, empty), 3 indeterminate, 1 error.
The last line of standard output is a JSON run record.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__

TOLERANCE_ENV = "MOTORWAY_ENFORCE_TOLERANCE"
EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE, EXIT_UNKNOWN = 0, 1, 2, 3

log = logging.getLogger("motorway_enforce")


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _record(command: str, digest: str, verdict: str, outputs: dict, started: float, args) -> dict:
    return {"command": command, "version": __version__, "inputs": digest, "seed": args.seed,
            "tolerance": args.tolerance, "verdict": verdict, "outputs": outputs,
            "timing": {"seconds": round(time.perf_counter() - started, 3)}}


def _key(k) -> str:
    return ",".join(map(str, k)) if isinstance(k, tuple) else str(k)


def _emit(rec: dict) -> None:
    print(json.dumps(rec, sort_keys=True, default=str))


def cmd_enforce(args) -> int:
    from .enforcement import run_episode
    from .formats import parse_scenario
    from .traffic import gap

    t0 = time.perf_counter()
    raw = Path(args.scenario).read_bytes()
    sc = parse_scenario(raw.decode("utf-8"))
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    else:
        args.seed = sc.seed
    if args.max_sequences is not None:
        sc = replace(sc, max_sequences=args.max_sequences)
    res = run_episode(sc)
    for line in res.trace:
        print(line)
        log.info(line)
    gaps = {}
    cars = sorted(res.final.cars, key=lambda c: res.final.pos[c])
    for rear, front in zip(cars, cars[1:]):
        gaps[f"{rear},{front}"] = round(gap(res.final, rear, front, sc.geometry), 9)
    print(f"verdict {res.verdict}")
    for k, v in gaps.items():
        print(f"gap({k}) at t={sc.horizon:g}: {v:g}")
    out = {**res.summary(), "final_gaps": gaps}
    _emit(_record("enforce", _digest(raw, sc.seed, sc.max_sequences), res.verdict, out, t0, args))
    return {"Enforced": EXIT_OK, "Infeasible": EXIT_NEGATIVE}.get(res.verdict, EXIT_ERROR)


def cmd_solve_dyn(args) -> int:
    from .dyn import check_plan, decide_acceleration
    from .dyn.oracle import grid_oracle
    from .formats import parse_dyn

    t0 = time.perf_counter()
    raw = Path(args.dyn).read_bytes()
    spec = parse_dyn(raw.decode("utf-8"))
    out: dict = {}
    if args.oracle:
        r = grid_oracle(spec, max_splits=args.n if args.n is not None else 1, tol=args.tolerance)
        verdict = "feasible" if r.feasible else "infeasible"
        plan = r.plan
        out["tried"] = r.tried
        print(f"oracle: {verdict} after {r.tried} candidate plans")
    else:
        d = decide_acceleration(spec, n=args.n, tol=args.tolerance)
        verdict, plan = d.status, d.plan
        out.update(n=d.n, proven=d.proven, reason=d.reason)
        print(f"{verdict} n={d.n}" + (f" ({d.reason})" if d.reason else ""))
    if plan is not None:
        rep = check_plan(plan, spec, tol=args.tolerance)
        word = plan.to_word(spec.controlled)
        out.update(n=plan.n, splits=list(plan.splits), acc={c: list(v) for c, v in sorted(plan.acc.items())},
                   word=str(word), margins={_key(k): float(v) for k, v in rep.margins.items()}, verified=rep.ok)
        print(f"schedule {word}")
        for c in spec.controlled:
            segs = ", ".join(f"{a:g} for {d:g}" for a, d in plan.segments(c) if d > 0)
            print(f"  {c}: {segs}")
    code = {"feasible": EXIT_OK, "infeasible": EXIT_NEGATIVE}.get(verdict, EXIT_UNKNOWN)
    _emit(_record("solve-dyn", _digest(raw, args.n, args.oracle, args.tolerance), verdict, out, t0, args))
    return code


def cmd_check(args) -> int:
    from .scl import eval_finite, parse_scl
    from .sequence import TimedStateSequence

    t0 = time.perf_counter()
    raw = Path(args.trace).read_bytes()
    m = TimedStateSequence.from_text(raw.decode("utf-8"))
    psi = parse_scl(args.formula)
    ok = eval_finite(m, psi, args.t)
    verdict = "true" if ok else "false"
    print(verdict)
    _emit(_record("check", _digest(raw, args.formula, args.t), verdict, {"t": args.t}, t0, args))
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_regions(args) -> int:
    from .scl import compile, mark_bad, parse_automaton, parse_scl, regionize

    t0 = time.perf_counter()
    if args.automaton:
        src = Path(args.automaton).read_text()
        a = parse_automaton(src)
    else:
        src = args.formula
        a = compile(parse_scl(args.formula))
    r = mark_bad(regionize(a))
    n_edges = sum(len(s) for s in r.succ)
    empty = r.is_empty()
    clocks = []
    for c in r.clocks:
        per = 2 * c.cmax + 2
        clocks.append({"name": c.name, "kind": c.kind, "cmax": c.cmax, "regions": per})
        extra = " (+undefined)" if c.kind != "tick" else ""
        print(f"clock {c.name} {c.kind} cmax={c.cmax} regions={per}{extra}")
    print(f"locations {len(a.locations)} states {len(r.states)} edges {n_edges} bad {len(r.bad)}")
    print("empty" if empty else "non-empty")
    if args.dump:
        Path(args.dump).write_text(r.dump())
    out = {"locations": len(a.locations), "states": len(r.states), "edges": n_edges, "bad": len(r.bad),
           "clocks": clocks}
    _emit(_record("regions", _digest(src), "empty" if empty else "non-empty", out, t0, args))
    return EXIT_NEGATIVE if empty else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    default_tol = float(os.environ.get(TOLERANCE_ENV, "1e-9"))
    p = argparse.ArgumentParser(prog="motorway-enforce", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=default_tol,
                   help=f"numeric tolerance (default from ${TOLERANCE_ENV} or 1e-9)")
    p.add_argument("--max-sequences", type=int, default=None)
    p.add_argument("--log", metavar="PATH", help="also write diagnostics to this file")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enforce", help="run one enforcement episode")
    e.add_argument("scenario")
    e.set_defaults(func=cmd_enforce)

    d = sub.add_parser("solve-dyn", help="decide acceleration for a DYN file")
    d.add_argument("dyn")
    d.add_argument("--n", type=int, default=None, help="fixed number of splitting points")
    d.add_argument("--oracle", action="store_true", help="use the 0.25-grid brute force instead")
    d.set_defaults(func=cmd_solve_dyn)

    c = sub.add_parser("check", help="finite-prefix satisfaction of a state sequence")
    c.add_argument("trace")
    c.add_argument("formula")
    c.add_argument("--t", type=float, default=None)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("regions", help="region automaton statistics")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("formula", nargs="?")
    g.add_argument("--automaton", metavar="FILE")
    r.add_argument("--dump", metavar="PATH")
    r.set_defaults(func=cmd_regions)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.log:
        h = logging.FileHandler(args.log, mode="w")
        h.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(h)
        log.setLevel(logging.INFO)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("error: %s", exc)
        return EXIT_ERROR
    finally:
        for h in list(log.handlers):
            log.removeHandler(h)
            h.close()


if __name__ == "__main__":
    sys.exit(main())
