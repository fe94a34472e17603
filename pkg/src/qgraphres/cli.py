"""Command-line front end.

Exit codes: 0 success, 1 domain failure (invalid graph, unmatched roots,
unresolved search boxes), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import oracles
from .graph import Delta, GeneralizedLead, GraphParseError, QuantumGraph, Vertex, load_graph, validate_graph
from .randgraph import random_graph
from .search import Region, SearchError, SearchOptions, compare_sets, find_resonances
from .secular import Route, SingularScatteringError, smatrix, unitarity_defect

EXAMPLES = ("appendix", "loop", "lasso", "random")

RESONANCE_COLUMNS = ("route", "re_k", "im_k", "multiplicity", "residual", "class")


class UsageError(Exception):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _params(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: not a number: {value!r}") from None
    return out


def build_example(name: str, params: dict[str, float], seed: int = 0) -> QuantumGraph:
    def take(allowed: dict[str, float]) -> dict[str, float]:
        unknown = sorted(set(params) - set(allowed))
        if unknown:
            raise UsageError(f"unknown parameter(s) for {name}: {', '.join(unknown)}")
        return {**allowed, **params}

    if name == "appendix":
        p = take({"l": 1.0, "delta": 0.0})
        return oracles.build_appendix_graph(p["l"], p["delta"])
    if name == "loop":
        p = take({"l1": 1.0, "l2": 1.0, "alpha": 0.0, "beta": 0.0})
        return oracles.build_loop_graph(oracles.LoopParams(**p))
    if name == "lasso":
        p = take({"l": 1.0, "inv_alpha": 0.5, "inv_alpha_tilde": 0.0, "gamma_re": 0.5, "gamma_im": 0.0, "A": 0.0})
        gamma = complex(p.pop("gamma_re"), p.pop("gamma_im"))
        return oracles.build_lasso_graph(oracles.LassoParams(gamma=gamma, **p))
    if name == "random":
        take({})
        return random_graph(seed)
    raise UsageError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")


def _graph(args) -> QuantumGraph:
    if args.graph and args.example:
        raise UsageError("give either --graph or --example, not both")
    if args.graph:
        return load_graph(args.graph)
    if args.example:
        return build_example(args.example, _params(args.param), args.seed)
    raise UsageError("one of --graph or --example is required")


def _routes(text: str) -> list[Route]:
    if text == "both":
        return [Route.SCATTERING, Route.SCALED]
    return [Route(text)]


def _opts(args) -> SearchOptions:
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    opts = SearchOptions(workers=args.workers)
    if args.tol is not None:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        opts = replace(opts, residual_tol=args.tol)
    return opts


def _region(text: str) -> Region:
    try:
        return Region.parse(text)
    except ValueError as exc:
        raise UsageError(f"--region: {exc}") from None


def _emit(args, columns, rows, stdout):
    if args.format == "json":
        # json floats use repr, which round-trips; non-finite values become null
        clean = [[None if isinstance(x, float) and not np.isfinite(x) else x for x in r] for r in rows]
        text = json.dumps([dict(zip(columns, r)) for r in clean], indent=1, allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_num(x) if isinstance(x, float) else x for x in r])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def cmd_validate(args, stdout) -> int:
    g = _graph(args)
    report = validate_graph(g)
    stdout.write(report.render() + "\n")
    return 0 if report.ok else 1


def _search(g, region, route, opts):
    rs = find_resonances(g, region, route, opts)
    rows = [
        (route.value, float(r.k.real), float(r.k.imag), r.multiplicity, float(r.residual), r.kind.value)
        for r in rs.roots
    ]
    rows += [
        (route.value, float(b.center.real), float(b.center.imag), 0, float("nan"), "Unresolved")
        for b in rs.unresolved
    ]
    return rs, rows


def cmd_resonances(args, stdout) -> int:
    g = _graph(args)
    report = validate_graph(g, require_leads=True)
    if not report.ok:
        sys.stderr.write(report.render() + "\n")
        return 1
    region, opts = _region(args.region), _opts(args)
    rows, status = [], 0
    for route in _routes(args.route):
        rs, r = _search(g, region, route, opts)
        rows += r
        if rs.unresolved:
            status = 1
    _emit(args, RESONANCE_COLUMNS, rows, stdout)
    return status


def _scan_point(g: QuantumGraph, k: float):
    try:
        s = smatrix(g, k)
    except SingularScatteringError:
        return None
    return s


def cmd_scan(args, stdout) -> int:
    g = _graph(args)
    report = validate_graph(g, require_leads=True)
    if not report.ok:
        sys.stderr.write(report.render() + "\n")
        return 1
    try:
        k0, k1 = (float(x) for x in args.k_range.split(","))
    except ValueError:
        raise UsageError("--k-range expects k0,k1") from None
    if args.step is not None and args.points is not None:
        raise UsageError("give either --step or --points")
    if args.points is not None:
        if args.points < 1:
            raise UsageError("--points must be >= 1")
        ks = np.linspace(k0, k1, args.points)
    else:
        step = 0.05 if args.step is None else args.step
        if not step > 0:
            raise UsageError("--step must be positive")
        ks = k0 + step * np.arange(int(np.floor((k1 - k0) / step + 1e-9)) + 1)
    if not (k1 >= k0 and np.all(ks != 0)):
        raise UsageError("--k-range must be increasing and avoid k = 0")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    fn = functools.partial(_scan_point, g)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            mats = list(pool.map(fn, ks, chunksize=16))
    else:
        mats = [fn(k) for k in ks]

    leads = sorted(lead.id for lead in g.leads)
    columns = ["k", "singular"]
    for i in leads:
        for j in leads:
            columns += [f"re_S[{i},{j}]", f"im_S[{i},{j}]"]
    columns.append("unitarity_defect")
    nan = float("nan")
    rows = []
    for k, s in zip(ks, mats):
        if s is None:
            rows.append([float(k), 1] + [nan] * (2 * len(leads) ** 2 + 1))
            continue
        row = [float(k), 0]
        for i in range(len(leads)):
            for j in range(len(leads)):
                row += [float(s[i, j].real), float(s[i, j].imag)]
        row.append(unitarity_defect(s))
        rows.append(row)
    _emit(args, columns, rows, stdout)
    return 0


def _perturbed(g: QuantumGraph, eps: float) -> QuantumGraph:
    vertices = []
    for v in g.vertices:
        c = v.coupling
        if isinstance(c, Delta):
            c = Delta(c.alpha + eps)
        elif isinstance(c, GeneralizedLead):
            c = replace(c, inv_alpha=c.inv_alpha + eps)
        vertices.append(Vertex(v.id, c))
    return QuantumGraph(tuple(vertices), g.edges, g.leads)


def cmd_compare_routes(args, stdout) -> int:
    g = _graph(args)
    report = validate_graph(g, require_leads=True)
    if not report.ok:
        sys.stderr.write(report.render() + "\n")
        return 1
    region, opts = _region(args.region), _opts(args)
    g_scat = _perturbed(g, args.perturb_alpha) if args.perturb_alpha else g
    a = find_resonances(g_scat, region, Route.SCATTERING, opts)
    b = find_resonances(g, region, Route.SCALED, opts)
    match = compare_sets(a, b, args.cap)
    stdout.write(f"winding scattering {a.winding}  scaled {b.winding}\n")
    stdout.write(match.render() + "\n")
    ok = match.all_matched and not a.unresolved and not b.unresolved
    stdout.write("PASS\n" if ok else "FAIL\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgraphres", description="Resonances of quantum graphs with leads")
    sub = parser.add_subparsers(dest="command", required=True)

    def graph_flags(p):
        p.add_argument("--graph", metavar="FILE", help="graph description (JSON)")
        p.add_argument("--example", choices=EXAMPLES, help="built-in example graph")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="example parameter")
        p.add_argument("--seed", type=int, default=0, help="seed for --example random")

    def output_flags(p):
        p.add_argument("--out", metavar="FILE")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def search_flags(p):
        p.add_argument("--region", default="0.5,10,-2,0.5", metavar="RE0,RE1,IM0,IM1")
        p.add_argument("--tol", type=float, default=None, help="relative residual tolerance")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", help="check a graph description")
    graph_flags(p)

    p = sub.add_parser("resonances", help="locate zeros of the secular determinant")
    graph_flags(p)
    search_flags(p)
    p.add_argument("--route", choices=("scattering", "scaled", "both"), default="scaled")
    output_flags(p)

    p = sub.add_parser("scan", help="S-matrix on a grid of real momenta")
    graph_flags(p)
    p.add_argument("--k-range", default="0.5,10", metavar="K0,K1")
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    output_flags(p)

    p = sub.add_parser("compare", help="check that both routes give the same resonances")
    graph_flags(p)
    search_flags(p)
    p.add_argument("--cap", type=float, default=1e-6, help="matching distance cap")
    p.add_argument("--perturb-alpha", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "resonances": cmd_resonances,
    "scan": cmd_scan,
    "compare": cmd_compare_routes,
}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, stdout)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, GraphParseError):
            sys.stderr.write(f"parse error: {exc}\n")
        else:
            sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except SearchError as exc:
        sys.stderr.write(f"search failed: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
