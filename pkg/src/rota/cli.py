"""Command line front end: generation, solving, verification and batches.

Exit codes: 0 success, 1 usage or contract error, 2 verification failure,
3 parse error, 4 budget exhausted with a partial answer.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext

from . import __version__
from .config import audit_mode
from .core import DEFAULT_MAX_N, ColouredInstance, format_instance, instance_digest, load_instance
from .cover import CoverConfig, cover
from .errors import ParseError, RotaError, SizeCapError
from .generate import generate
from .oracle import (
    BruteForceBudget,
    bf_deadlock,
    bf_max_disjoint_transversal_bases,
    bf_min_cover,
    bf_rainbow_decomposition,
)
from .pack import PackConfig, ReservoirConfig, pack, target_members
from .partition import deadlock

EXIT_OK, EXIT_ERROR, EXIT_VERIFY, EXIT_PARSE, EXIT_BUDGET = 0, 1, 2, 3, 4


def _default_seed() -> int:
    raw = os.environ.get("ROTA_SEED")
    try:
        return int(raw) if raw else 0
    except ValueError:
        return 0


def _ids(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(t) for t in text.replace(",", " ").split()]


class _Trace:
    """JSON lines sink; a no-op without a path."""

    def __init__(self, path: str | None):
        self.fh = open(path, "w", encoding="utf-8") if path else None

    def __call__(self, event: dict) -> None:
        if self.fh is not None:
            self.fh.write(json.dumps(event, sort_keys=True) + "\n")

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _emit(report: dict, target: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if target == "-":
        print(text)
    elif target:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _report(mode: str, inst: ColouredInstance, config: dict, results: dict, started: float) -> dict:
    out = {"mode": mode, "n": inst.n}
    out.update(results)
    out["digest"] = instance_digest(inst)
    out["config"] = config
    out["timing_ms"] = round((time.monotonic() - started) * 1000, 3)
    out["version"] = __version__
    return out


def _load(args) -> ColouredInstance:
    return load_instance(args.instance, max_n=args.max_n)


def _summary(report: dict, args) -> None:
    if args.json != "-" and not args.quiet:
        keys = [k for k in ("count", "bases_found", "deadlock", "possible") if k in report]
        bits = ", ".join(f"{k}={report[k] if k != 'deadlock' else len(report[k])}" for k in keys)
        print(f"{report['mode']}: n={report['n']} {bits}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    inst = generate(args.kind, args.n, seed, p=args.p, vertices=args.v, max_n=args.max_n)
    text = format_instance(inst)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_cover(args) -> int:
    started = time.monotonic()
    inst = _load(args)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = CoverConfig(epsilon=args.epsilon, lam=args.lam, iteration_budget=args.budget, seed=seed)
    trace = _Trace(args.trace)
    try:
        sol = cover(inst, cfg)
        trace({"event": "cover", "audit": sol.audit})
    finally:
        trace.close()
    results = {
        "count": sol.count,
        "bases": [sorted(B) for B in sol.bases],
        "phase_stats": sol.audit,
        "bounds": sol.audit["bounds"],
        "status": sol.status,
    }
    config = {"epsilon": cfg.epsilon, "lambda": cfg.lam, "budget": cfg.iteration_budget, "seed": seed}
    report = _report("cover", inst, config, results, started)
    _emit(report, args.json)
    _summary(report, args)
    return EXIT_OK


def cmd_pack(args) -> int:
    started = time.monotonic()
    inst = _load(args)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = PackConfig(
        epsilon=args.epsilon, sigma=args.sigma, L=args.L, r_max=args.rmax,
        budget_ms=args.budget_ms, exact_fallback=args.exact_fallback,
    )
    rcfg = ReservoirConfig(eta=args.eta, gamma=args.gamma, seed=seed)
    trace = _Trace(args.trace)
    try:
        res = pack(inst, cfg, rcfg, on_event=trace)
    finally:
        trace.close()
    st = res.stats
    results = {
        "bases_found": res.count,
        "bases": [sorted(B) for B in res.bases],
        "reservoir": {"eta": rcfg.eta, "size": len(res.reservoir)},
        "cascade_stats": {
            "improvements": st["improvements"],
            "max_chain": st["max_chain"],
            "growth_factors": st["growth_factors"],
        },
        "floors": {"half_n": -(-inst.n // 2), "target": target_members(inst.n, cfg.epsilon)},
        "status": res.status,
        "exact": st.get("exact", False),
    }
    config = {"epsilon": cfg.epsilon, "eta": rcfg.eta, "gamma": rcfg.gamma, "seed": seed,
              "sigma": cfg.sigma, "L": cfg.L, "rmax": cfg.r_max, "exact_fallback": cfg.exact_fallback}
    report = _report("pack", inst, config, results, started)
    _emit(report, args.json)
    _summary(report, args)
    return EXIT_BUDGET if res.status != "ok" else EXIT_OK


def cmd_deadlock(args) -> int:
    started = time.monotonic()
    inst = _load(args)
    U = _ids(args.subset)
    U = inst.sorted_ground if U is None else U
    rep = deadlock(inst, U, args.k)
    results = rep.to_json()
    results["subset"] = sorted(U)
    report = _report("deadlock", inst, {"k": args.k}, results, started)
    _emit(report, args.json)
    _summary(report, args)
    return EXIT_OK


def _budget(args) -> BruteForceBudget:
    return BruteForceBudget(time_cap_ms=args.time_cap_ms, force=args.force)


def cmd_bf(args) -> int:
    started = time.monotonic()
    inst = _load(args)
    budget = _budget(args)
    what = args.what
    if what == "deadlock":
        U = _ids(args.subset)
        U = inst.sorted_ground if U is None else U
        D = bf_deadlock(inst, U, args.k, budget)
        rk = inst.matroid.rank(D)
        results = {"k": args.k, "deadlock": sorted(D), "rank": rk, "surplus": len(D) - args.k * rk,
                   "subset": sorted(U)}
        config = {"k": args.k}
    elif what == "pack":
        count, bases = bf_max_disjoint_transversal_bases(inst, budget)
        results = {"bases_found": count, "bases": [sorted(B) for B in bases],
                   "floors": {"half_n": -(-inst.n // 2), "target": inst.n}}
        config = {}
    elif what == "cover":
        count, bases = bf_min_cover(inst, budget)
        results = {"count": count, "bases": [sorted(B) for B in bases],
                   "bounds": {"two_n_minus_two": 2 * inst.n - 2}}
        config = {}
    else:
        U = _ids(args.subset)
        U = inst.sorted_ground if U is None else U
        parts = bf_rainbow_decomposition(inst, U, args.parts, budget)
        results = {"possible": parts is not None, "parts": None if parts is None else [sorted(P) for P in parts],
                   "subset": sorted(U)}
        config = {"parts": args.parts}
    report = _report(f"bf-{what}", inst, config, results, started)
    _emit(report, args.json)
    _summary(report, args)
    return EXIT_OK


def verify_solution(inst: ColouredInstance, sol: dict) -> list[str]:
    """Problems found in a solution report; empty means it checks out."""
    problems: list[str] = []
    mode = sol.get("mode", "")
    digest = sol.get("digest")
    if digest is not None and digest != instance_digest(inst):
        problems.append("instance digest does not match the solution")
    if mode in ("pack", "bf-pack", "cover", "bf-cover"):
        bases = sol.get("bases")
        if not isinstance(bases, list):
            return problems + ["solution has no bases list"]
        owner: dict[int, int] = {}
        for i, B in enumerate(bases):
            unknown = [x for x in B if x not in inst.colour]
            if unknown:
                problems.append(f"basis {i} has unknown elements {unknown}")
                continue
            if len(set(B)) != len(B):
                problems.append(f"basis {i} repeats an element")
            if len(B) != inst.n:
                problems.append(f"basis {i} has {len(B)} elements, expected {inst.n}")
            if not inst.is_rainbow(B):
                problems.append(f"basis {i} repeats a colour")
            if not inst.matroid.is_independent(B):
                problems.append(f"basis {i} violates independence")
            if mode.endswith("pack"):
                for x in B:
                    if x in owner and owner[x] != i:
                        problems.append(f"element {x} appears in bases {owner[x]} and {i}")
                    owner.setdefault(x, i)
        key = "bases_found" if mode.endswith("pack") else "count"
        if sol.get(key) != len(bases):
            problems.append(f"{key}={sol.get(key)} but {len(bases)} bases listed")
        if mode.endswith("cover"):
            missing = inst.ground - {x for B in bases for x in B}
            if missing:
                problems.append(f"elements {sorted(missing)} are not covered")
    elif mode in ("deadlock", "bf-deadlock"):
        U = sol.get("subset", inst.sorted_ground)
        k = sol.get("k")
        if not isinstance(k, int) or k <= 0:
            return problems + ["deadlock report lacks a positive k"]
        D = set(deadlock(inst, U, k).deadlock)
        if set(sol.get("deadlock", [])) != D:
            problems.append("deadlock set does not match a recomputation")
        rk = inst.matroid.rank(D)
        if sol.get("rank") != rk or sol.get("surplus") != len(D) - k * rk:
            problems.append("rank or surplus fields are inconsistent")
    else:
        problems.append(f"cannot verify mode {mode!r}")
    return problems


def cmd_verify(args) -> int:
    inst = load_instance(args.instance, max_n=args.max_n)
    try:
        with open(args.solution, encoding="utf-8") as fh:
            sol = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"solution is not JSON: {exc.msg}", exc.lineno) from exc
    problems = verify_solution(inst, sol)
    report = {"mode": "verify", "pass": not problems, "problems": problems, "checked": sol.get("mode")}
    _emit(report, args.json)
    if not args.quiet:
        print("PASS" if not problems else "FAIL")
        for p in problems:
            print(f"  {p}")
    return EXIT_OK if not problems else EXIT_VERIFY


def _run_line(line: str) -> tuple[str, int]:
    argv = shlex.split(line)
    if argv and argv[0] == "rota":
        argv = argv[1:]
    return line, main(argv)


def cmd_batch(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_line, lines))
    else:
        results = [_run_line(ln) for ln in lines]
    worst = EXIT_OK
    for line, code in results:
        print(json.dumps({"command": line, "exit": code}))
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rota", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rota {__version__}")
    p.add_argument("--audit", action="store_true", help="re-check every intermediate result")
    p.add_argument("--max-n", type=int, default=DEFAULT_MAX_N, help="largest accepted rank")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def io(sp, solve=True):
        sp.add_argument("-i", "--instance", required=True)
        sp.add_argument("--json", help="write the report here ('-' for stdout)")
        if solve:
            sp.add_argument("--trace", help="JSON lines event log")

    g = sub.add_parser("generate", help="write a seeded random instance")
    g.add_argument("--kind", choices=("linear", "graphic"), default="linear")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-p", type=int, help="field size (linear)")
    g.add_argument("-v", type=int, help="vertex count (graphic, must be n+1)")
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cover", help="cover the ground set with transversal bases")
    io(c)
    c.add_argument("--epsilon", type=float, default=0.3)
    c.add_argument("--lambda", dest="lam", type=float)
    c.add_argument("--budget", type=int, default=2000)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_cover)

    k = sub.add_parser("pack", help="find disjoint transversal bases")
    io(k)
    k.add_argument("--epsilon", type=float, default=0.25)
    k.add_argument("--eta", type=float, default=0.3)
    k.add_argument("--gamma", type=float, default=0.05)
    k.add_argument("--seed", type=int)
    k.add_argument("--sigma", type=float)
    k.add_argument("--L", type=float)
    k.add_argument("--rmax", type=int)
    k.add_argument("--budget-ms", type=float)
    k.add_argument("--exact-fallback", action="store_true", help="use exhaustive search when n <= 4")
    k.set_defaults(func=cmd_pack)

    d = sub.add_parser("deadlock", help="largest k-overcrowded subset")
    io(d, solve=False)
    d.add_argument("-k", type=int, required=True)
    d.add_argument("--subset", help="element ids (default: whole ground set)")
    d.set_defaults(func=cmd_deadlock)

    v = sub.add_parser("verify", help="check a solution report against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.add_argument("--json")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bf", help="brute-force reference answers")
    b.add_argument("what", choices=("deadlock", "pack", "cover", "rainbow"))
    io(b, solve=False)
    b.add_argument("-k", type=int, default=1)
    b.add_argument("--parts", type=int, default=2)
    b.add_argument("--subset")
    b.add_argument("--time-cap-ms", type=float)
    b.add_argument("--force", action="store_true", help="run above the size caps")
    b.set_defaults(func=cmd_bf)

    bt = sub.add_parser("batch", help="run a manifest of commands, one per line")
    bt.add_argument("manifest")
    bt.add_argument("--jobs", type=int, default=1)
    bt.set_defaults(func=cmd_batch)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = audit_mode(True) if args.audit else nullcontext()
    try:
        with ctx:
            return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SizeCapError as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (RotaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
