"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py``; the criterion lines are
repeated in the terminal summary.
"""

import csv
import io
import math

import numpy as np

from conftest import LN3, STANDARD_REGION, WIDE_REGION, record_criterion
from qgraphres.cli import main
from qgraphres.edges import numeric_transfer, transfer_matrix
from qgraphres.graph import (
    Delta,
    Dirichlet,
    GeneralizedLead,
    InternalEdge,
    PiecewiseConstant,
    Segment,
    gauge_transform,
    subdivide_edge,
)
from qgraphres.oracles import (
    LassoParams,
    LoopParams,
    build_appendix_graph,
    build_lasso_graph,
    build_loop_graph,
    lasso_condition,
    loop_condition,
)
from qgraphres.randgraph import random_graph
from qgraphres.search import RootClass, compare_sets, find_resonances, find_zeros, rank_deficient
from qgraphres.secular import Route


def _expand(rs):
    return sorted((r.k for r in rs.roots for _ in range(r.multiplicity)), key=lambda k: (k.real, k.imag))


def _max_gap(found, expected):
    """Largest distance in a sorted pairing, inf when counts differ."""
    if len(found) != len(expected):
        return math.inf
    found = sorted(found, key=lambda k: (k.real, k.imag))
    expected = sorted(expected, key=lambda k: (k.real, k.imag))
    return max((abs(a - b) for a, b in zip(found, expected)), default=0.0)


def _same_set(a, b, tol):
    m = compare_sets(a, b, cap=tol)
    return m.all_matched and not a.unresolved and not b.unresolved, m.max_distance


def _cli(*argv):
    out = io.StringIO()
    return main([str(a) for a in argv], stdout=out), out.getvalue()


def test_criterion_1_appendix_closed_form():
    rs = find_resonances(build_appendix_graph(1.0, 0.0), STANDARD_REGION)
    expected = [n * math.pi - 0.5j * LN3 for n in (1, 2, 3)]
    gap = _max_gap(_expand(rs), expected)
    ok = gap <= 1e-8 and len(rs.roots) == 3 and not rs.unresolved
    assert record_criterion(1, "appendix resonances n*pi - i ln3/2", ok, f"{len(rs.roots)} roots, max error {gap:.1e}")


def test_criterion_2_loop_closed_form():
    p = LoopParams(1.0, 1.0, 0.0, 0.0)
    g = build_loop_graph(p)
    oracle = find_zeros(lambda k: loop_condition(k, p), STANDARD_REGION)
    ok, worst = True, 0.0
    for route in Route:
        rs = find_resonances(g, STANDARD_REGION, route)
        res = [r.k for r in rs.roots if r.kind is RootClass.RESONANCE]
        real = [r.k for r in rs.roots if r.kind is RootClass.REAL_POINT]
        gap_res = _max_gap(res, [n * math.pi - 1j * LN3 for n in (1, 2, 3)])
        gap_real = _max_gap(real, [n * math.pi for n in (1, 2, 3)])
        genuine = all(rank_deficient(g, route, k) for k in real)
        same, d = _same_set(rs, oracle, 1e-8)
        worst = max(worst, gap_res, gap_real, d)
        ok &= len(rs.roots) == 6 and gap_res <= 1e-8 and gap_real <= 1e-8 and genuine and same
    assert record_criterion(2, "loop resonances n*pi - i ln3 plus genuine real points", ok, f"max error {worst:.1e}")


def _lasso_draw(rng, gamma=True):
    g = complex(*rng.uniform(-0.7, 0.7, 2)) if gamma else 0j
    return LassoParams(
        float(rng.uniform(0.4, 2.0)),
        float(rng.uniform(-1.5, 1.5)),
        float(rng.uniform(-1.5, 1.5)),
        g,
        float(rng.uniform(-3, 3)),
    )


def test_criterion_3_lasso_family():
    rng = np.random.default_rng(31)
    worst_oracle = worst_flux = worst_im = 0.0
    ok = True
    for _ in range(20):
        p = _lasso_draw(rng)
        machine = find_resonances(build_lasso_graph(p), WIDE_REGION)
        oracle = find_zeros(lambda k: lasso_condition(k, p), WIDE_REGION)
        gap = _max_gap(_expand(machine), _expand(oracle))
        worst_oracle = max(worst_oracle, gap)
        ok &= gap <= 1e-8 and not machine.unresolved

        q = LassoParams(p.l, p.inv_alpha, p.inv_alpha_tilde, p.gamma, p.A + 2 * math.pi / p.l)
        shifted = find_resonances(build_lasso_graph(q), WIDE_REGION)
        same, d = _same_set(machine, shifted, 1e-8)
        worst_flux = max(worst_flux, d)
        ok &= same

        z = _lasso_draw(rng, gamma=False)
        decoupled = find_resonances(build_lasso_graph(z), WIDE_REGION)
        worst_im = max([worst_im] + [abs(r.k.imag) for r in decoupled.roots])
        ok &= bool(decoupled.roots) and all(abs(r.k.imag) <= 1e-8 for r in decoupled.roots)
    detail = f"oracle {worst_oracle:.1e}, flux shift {worst_flux:.1e}, gamma=0 |Im k| {worst_im:.1e}"
    assert record_criterion(3, "lasso oracle agreement, gamma=0 reality, flux period", ok, detail)


def test_criterion_4_route_equivalence():
    failures, worst = [], 0.0
    features = {"parallel": 0, "self_loop": 0, "delta": 0, "generalized": 0, "dirichlet": 0}
    for seed in range(50):
        g = random_graph(seed)
        a = find_resonances(g, WIDE_REGION, Route.SCATTERING)
        b = find_resonances(g, WIDE_REGION, Route.SCALED)
        m = compare_sets(a, b, cap=1e-6)
        counts = a.total_multiplicity == a.winding and b.total_multiplicity == b.winding
        code, _ = _cli("compare", "--example", "random", "--seed", seed, "--region", "0.3,12,-3,0.5")
        worst = max(worst, m.max_distance)
        if not (m.all_matched and m.max_distance <= 1e-6 and counts and code == 0):
            failures.append(seed)

        ends = [tuple(sorted((e.from_, e.to))) for e in g.edges]
        features["parallel"] += len(set(ends)) < len(ends)
        features["self_loop"] += any(e.is_loop for e in g.edges)
        kinds = {type(v.coupling) for v in g.vertices}
        features["delta"] += Delta in kinds
        features["generalized"] += GeneralizedLead in kinds
        features["dirichlet"] += Dirichlet in kinds
        assert len(g.vertices) <= 5 and len(g.edges) <= 7 and 1 <= len(g.leads) <= 3
    covered = all(v > 0 for v in features.values())
    ok = not failures and covered
    detail = f"failed seeds {failures}, max distance {worst:.1e}, coverage {features}"
    assert record_criterion(4, "scattering and scaled routes agree on 50 random graphs", ok, detail)


def test_criterion_5_unitarity():
    examples = [
        ["--example", "appendix"],
        ["--example", "loop"],
        ["--example", "lasso"],
        ["--example", "loop", "--param", "l2=1.7", "--param", "alpha=0.8", "--param", "beta=-1.2"],
        ["--example", "lasso", "--param", "A=1.3", "--param", "gamma_im=0.4", "--param", "inv_alpha_tilde=0.6"],
    ]
    worst, ok, points = 0.0, True, 0
    for args in examples:
        code, text = _cli("scan", *args, "--k-range", "0.1,20", "--points", 200)
        ok &= code == 0
        table = list(csv.DictReader(io.StringIO(text)))
        ok &= len(table) == 200
        for row in table:
            if row["singular"] == "0":
                points += 1
                worst = max(worst, float(row["unitarity_defect"]))
    ok &= worst <= 1e-10 and points >= 990
    assert record_criterion(5, "S-matrix unitarity on example scans", ok, f"{points} regular points, max defect {worst:.1e}")


def _invariance_cases():
    rng = np.random.default_rng(66)
    loop = build_loop_graph(LoopParams(1.0, 1.3, 0.5, -0.4))
    lasso = build_lasso_graph(LassoParams(1.1, 0.6, 0.3, 0.4 + 0.3j, 0.9))
    graphs = [("loop", loop), ("lasso", lasso)] + [(f"random {s}", random_graph(s)) for s in range(10)]
    for name, g in graphs:
        e = g.edges[int(rng.integers(len(g.edges)))]
        sub = subdivide_edge(g, e.id, float(rng.uniform(0.2, 0.8)) * e.length)
        yield name, "subdivision", g, sub
        # the subdivided graph has at least two vertices, so a gauge change is never trivial
        phases = {v.id: float(rng.uniform(-math.pi, math.pi)) for v in sub.vertices}
        yield name, "gauge", sub, gauge_transform(sub, phases)


def test_criterion_6_structural_invariance():
    failures, worst = [], 0.0
    region = STANDARD_REGION
    for name, kind, g, h in _invariance_cases():
        a, b = find_resonances(g, region), find_resonances(h, region)
        same, d = _same_set(a, b, 1e-8)
        worst = max(worst, d)
        if not same:
            failures.append(f"{name}/{kind}")
    ok = not failures
    assert record_criterion(6, "subdivision and gauge invariance", ok, f"failures {failures}, max shift {worst:.1e}")


def _random_edge(rng):
    length = float(rng.uniform(0.3, 2.0))
    if rng.random() < 0.4:
        return InternalEdge("e", "a", "b", length)
    cuts = np.sort(rng.uniform(0, length, int(rng.integers(0, 3))))
    pts = np.concatenate([[0.0], cuts, [length]])
    segs = tuple(Segment(float(b - a), float(rng.uniform(-5, 5))) for a, b in zip(pts[:-1], pts[1:]) if b > a)
    return InternalEdge("e", "a", "b", float(sum(s.len for s in segs)), PiecewiseConstant(segs))


def test_criterion_7_numerics():
    rng = np.random.default_rng(77)
    worst_det = 0.0
    for _ in range(1000):
        e = _random_edge(rng)
        k = complex(rng.uniform(-100, 100), rng.uniform(-3, 3))
        worst_det = max(worst_det, abs(transfer_matrix(e, k).det - 1))
    worst_rk = 0.0
    for _ in range(100):
        e = _random_edge(rng)
        k = complex(rng.uniform(-5, 5), rng.uniform(-1, 1))
        exact = transfer_matrix(e, k).matrix
        approx = numeric_transfer(e, k, 1024).matrix
        worst_rk = max(worst_rk, np.max(np.abs(exact - approx)) / np.max(np.abs(exact)))
    ok = worst_det <= 1e-9 and worst_rk <= 1e-8
    assert record_criterion(7, "unit determinant and agreement with RK4", ok, f"det {worst_det:.1e}, rk4 {worst_rk:.1e}")
