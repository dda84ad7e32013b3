"""Command-line interface: ``qgratio {spectrum,verify,optimize,appendix}``.

Exit codes: 0 success, 1 inequality or check failure, 2 input error,
3 solver non-convergence.  Set ``QG_LOG`` to error, info or debug.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import bounds, closed_form
from .families import parse_family, star_with_tail
from .graph import GraphError, MetricGraph, VertexCondition, read_graph
from .perturb import NonConvergenceError, optimize_ratio, parse_objective
from .spectral import SpectrumError, compute_spectrum, eigenfunctions

log = logging.getLogger("qgratio")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: str | None  # input path or family spec
    k_max: int | None
    seed: int | None
    output: str | None
    fmt: str = "json"


# ---------------------------------------------------------------------------
# helpers

def _setup_logging() -> None:
    level = os.environ.get("QG_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_graph(args) -> MetricGraph:
    if getattr(args, "input", None):
        try:
            return read_graph(args.input)
        except FileNotFoundError:
            raise InputError(f"file not found: {args.input}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"cannot parse graph file {args.input}: {exc}") from None
    if getattr(args, "family", None):
        return parse_family(args.family, ends=args.ends, seed=args.seed, leaf=args.leaf, center=args.center)
    raise InputError("give a graph with --in PATH or --family SPEC")


def _dumps(obj) -> str:
    # repr-based floats round-trip exactly (at most 17 significant digits)
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


@contextmanager
def _mapper(jobs: int):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield ex.map
    else:
        yield map


def _positive(name: str, x: float) -> None:
    if not (x > 0 and math.isfinite(x)):
        raise InputError(f"{name} must be positive, got {x!r}")


# ---------------------------------------------------------------------------
# commands

def cmd_spectrum(args) -> int:
    G = _load_graph(args)
    if args.count < 1:
        raise InputError("--count must be >= 1")
    spec = compute_spectrum(G, args.count, verify=not args.no_verify)
    out = spec.to_dict()
    out["graph"] = {"fingerprint": G.fingerprint(), "total_length": G.total_length}
    _emit(_dumps(out), args.out)
    if args.eigenfunctions:
        with open(args.eigenfunctions, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "lambda", "edge", "x", "psi"])
            index = 1
            for lam, mult in zip(spec.values, spec.multiplicities):
                for ef in eigenfunctions(G, lam):
                    for eid, x, y in ef.sample(args.resolution):
                        w.writerow([index, f"{lam:.12g}", eid, f"{x:.12g}", f"{y:.12g}"])
                    index += 1
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.kmax < 2:
        raise InputError("--kmax must be >= 2")
    if args.ensemble:
        builder = bounds.general_ensemble if args.general else bounds.tree_ensemble
        seed0 = 0 if args.seed is None else args.seed
        seeds = range(seed0, seed0 + args.ensemble)
        with _mapper(args.jobs) as mapper:
            rows = bounds.ensemble_rows(seeds, args.kmax, builder=builder, mapper=mapper)
        failed = [r for r in rows if not r["pass"]]
        if args.csv:
            bounds.write_ensemble_csv(rows, args.csv)
        summary = {
            "ensemble": "general" if args.general else "dirichlet-tree",
            "seeds": [seeds.start, seeds.stop - 1],
            "k_max": args.kmax,
            "checked": len(rows),
            "failed": len(failed),
            "pass": not failed,
            "failures": failed[:20],
        }
        _emit(_dumps(summary), args.out)
        for r in failed[:20]:
            print(f"FAIL seed={r['seed']} ({r['inequality']})[{r['indices']}] "
                  f"lhs={r['lhs']:.12g} rhs={r['rhs']:.12g}", file=sys.stderr)
        return EXIT_OK if not failed else EXIT_FAIL
    G = _load_graph(args)
    rep = bounds.bound_report(G, args.kmax)
    _emit(_dumps(rep.to_dict()), args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["inequality", "indices", "applicable", "lhs", "rhs", "margin", "pass", "reason"])
            for e in rep.entries:
                num = (lambda x: "" if math.isnan(x) else f"{x:.12g}")
                w.writerow([e.name, ":".join(map(str, e.indices)), int(e.applicable),
                            num(e.lhs), num(e.rhs), num(e.margin), int(e.passed), e.reason])
    for e in rep.failures():
        print(f"FAIL {e.describe()}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _initial_graph(args) -> MetricGraph:
    if args.topology:
        G = parse_family(args.topology, ends=args.ends, seed=args.seed, leaf=args.leaf, center=args.center)
    else:
        G = _load_graph(args)
    if args.lengths:
        try:
            ls = [float(x) for x in args.lengths.split(",")]
        except ValueError:
            raise InputError(f"--lengths must be comma-separated numbers, got {args.lengths!r}") from None
        if len(ls) != len(G.edges):
            raise InputError(f"--lengths has {len(ls)} entries, graph has {len(G.edges)} edges")
        return G.with_lengths(ls)
    if args.topology:
        # the family fixes the shape only; starting lengths come from the seed
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        return G.with_lengths(rng.uniform(0.2, 1.0, len(G.edges)))
    return G


def cmd_optimize(args) -> int:
    try:
        objective = parse_objective(args.objective)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _positive("--eps-floor", args.eps_floor)
    G0 = _initial_graph(args)
    seed = 0 if args.seed is None else args.seed
    try:
        trace = optimize_ratio(G0, objective, mode=args.mode, eps_floor=args.eps_floor,
                               max_iter=args.max_iter, max_restarts=args.max_restarts, seed=seed)
        code = EXIT_OK
    except NonConvergenceError as exc:
        trace = exc.trace
        print(f"non-convergence: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    if args.out:
        trace.write_jsonl(args.out)
    last = trace.iterates[-1] if trace.iterates else None
    if last is not None:
        print(f"status={trace.status} ratio={last.ratio:.12g} edges={','.join(map(str, last.edges))}")
        print("lengths=" + ",".join(f"{x:.12g}" for x in last.lengths))
    return code


def _appendix_checks(ns, grid: int, draws: int, seed: int) -> list[dict]:
    checks = []

    def record(name, ok, detail):
        checks.append({"check": name, "pass": bool(ok), **detail})

    # comparison lemma over the admissible strengths
    for n in ns:
        for ell, r in ((1.0, 0.3), (1.0, 0.7)):
            sweep = closed_form.lemma_sweep(n, ell, r, num=100)
            gaps = [c.gap for c in sweep]
            record("lemma_gap", min(gaps) > 0, {"n": n, "ell": ell, "r": r, "points": len(gaps),
                                                "min_gap": min(gaps)})
    # positivity of the auxiliary function, with vanishing limits at both ends
    for n in ns:
        ell = 1.0
        lo, hi = math.pi / (2 * ell), math.pi / ell
        x = np.linspace(lo, hi, grid + 2)[1:-1]
        f = closed_form.appendix_f(x, ell, n)
        ends = closed_form.appendix_f(np.array([lo + 1e-9, hi - 1e-9]), ell, n)
        ok = bool(np.all(f > 0)) and float(np.max(np.abs(ends))) < 1e-6
        record("appendix_f", ok, {"n": n, "points": grid, "min": float(f.min()),
                                  "end_values": [float(v) for v in ends]})
    # round trips through the Robin solvers
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        L = rng.uniform(0.2, 3.0)
        alpha = rng.uniform(-0.9 / L, 20.0)
        k = closed_form.robin_interval_k(L, alpha)
        worst = max(worst, abs(closed_form.matched_interval_length(alpha, k) - L) / L)
    record("robin_interval_round_trip", worst <= 1e-10, {"draws": draws, "max_rel_error": worst})
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 8))
        ell, r = rng.uniform(0.3, 2.0), rng.uniform(0.05, 1.0)
        alpha = rng.uniform(0.0, 10.0)
        k = closed_form.robin_star_k(n, ell, r, alpha)
        back = closed_form.robin_star_alpha(n, ell, r, k)
        worst = max(worst, abs(back - alpha) / max(1.0, abs(alpha)))
    record("robin_star_round_trip", worst <= 1e-10, {"draws": draws, "max_rel_error": worst})
    # closed form against the general secular solver
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 8))
        ell, r = rng.uniform(0.3, 2.0), rng.uniform(0.05, 1.0)
        alpha = rng.uniform(0.0, 10.0)
        k = closed_form.robin_star_k(n, ell, r, alpha)
        G = star_with_tail(n, ell, r, tip=VertexCondition.delta(alpha))
        lam = compute_spectrum(G, 1).lam(1)
        worst = max(worst, abs(math.sqrt(lam) - k) / k)
    record("robin_star_vs_secular", worst <= 1e-9, {"draws": draws, "max_rel_error": worst})
    return checks


def cmd_appendix(args) -> int:
    ns = args.n if args.n else list(range(2, 11))
    if any(n < 2 for n in ns):
        raise InputError("the comparison lemma needs n >= 2 legs")
    if args.grid < 10:
        raise InputError("--grid must be >= 10")
    checks = _appendix_checks(ns, args.grid, args.draws, 0 if args.seed is None else args.seed)
    ok = all(c["pass"] for c in checks)
    _emit(_dumps({"pass": ok, "checks": checks}), args.out)
    for c in checks:
        if not c["pass"]:
            print(f"FAIL {c['check']}: {c}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser

FAMILY_HELP = (
    "family spec: interval:L, star:m:ell, startail:n:ell:r, bigstar:tail:m:eps, "
    "balloons:beta:loop:tail, cycle:L, randtree:maxE, randgraph:maxE:beta:N"
)


def _graph_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=False)
    g.add_argument("--in", dest="input", metavar="PATH", help="graph JSON file")
    g.add_argument("--family", metavar="SPEC", help=FAMILY_HELP)
    p.add_argument("--ends", help="interval end conditions, e.g. D,D or N,D")
    p.add_argument("--leaf", help="leaf condition for families (D or N)")
    p.add_argument("--center", help="center condition for stars (K or D)")
    p.add_argument("--seed", type=int, help="seed for random families and runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgratio",
        description="Eigenvalue ratios of Laplacians on metric graphs.",
        epilog="Exit codes: 0 ok, 1 check failed, 2 input error, 3 non-convergence. "
               "Logging via QG_LOG=error|info|debug.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="compute eigenvalues (JSON) and optional eigenfunction samples",
                       epilog="Eigenfunction CSV columns: index, lambda, edge, x, psi.")
    _graph_args(p)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--out", help="JSON output path (default stdout)")
    p.add_argument("--eigenfunctions", metavar="CSV", help="write sampled eigenfunctions here")
    p.add_argument("--resolution", type=int, default=64, help="samples per edge")
    p.add_argument("--no-verify", action="store_true", help="skip the finite-element count check")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="check every applicable eigenvalue inequality",
                       epilog="Ensemble CSV columns: seed, inequality, indices, lhs, rhs, margin, pass. "
                              "Single-graph CSV columns: inequality, indices, applicable, lhs, rhs, "
                              "margin, pass, reason.")
    _graph_args(p)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--ensemble", type=int, metavar="N", help="run N seeded random graphs instead")
    p.add_argument("--general", action="store_true", help="ensemble of graphs with cycles and Neumann leaves")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="CSV table path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", help="optimize an eigenvalue ratio over edge lengths",
                       epilog="Trace is JSON lines: restart, iteration, edges, lengths, ratio, "
                              "gradient, step, events.")
    _graph_args(p)
    p.add_argument("--topology", metavar="SPEC", help="family spec giving the shape; lengths drawn from --seed")
    p.add_argument("--lengths", help="comma-separated starting lengths")
    p.add_argument("--objective", required=True, help="ratio:k:j or vc:<leaf id>")
    p.add_argument("--mode", choices=("max", "min"), default="max")
    p.add_argument("--eps-floor", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=400)
    p.add_argument("--max-restarts", type=int, default=20)
    p.add_argument("--out", help="trace path (JSON lines)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("appendix", help="closed-form checks: comparison lemma, positivity, Robin round trips")
    p.add_argument("--n", type=int, action="append", help="number of legs (repeatable; default 2..10)")
    p.add_argument("--grid", type=int, default=10_000, help="positivity grid size")
    p.add_argument("--draws", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_appendix)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GraphError, closed_form.InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (SpectrumError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
