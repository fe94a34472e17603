"""Seeded random graphs covering every supported coupling and edge shape."""

from __future__ import annotations

import numpy as np

from .graph import (
    Delta,
    Dirichlet,
    GeneralizedLead,
    InternalEdge,
    Lead,
    PiecewiseConstant,
    QuantumGraph,
    Segment,
    Vertex,
    ZeroPotential,
    validate_graph,
)

__all__ = ["random_graph"]


def _coupling_value(rng, lo=-3.0, hi=3.0) -> float:
    return float(np.round(rng.uniform(lo, hi), 6))


def random_graph(
    seed: int,
    max_vertices: int = 5,
    max_edges: int = 7,
    max_leads: int = 3,
    length_range: tuple[float, float] = (0.3, 2.0),
    magnetic: bool = True,
    potentials: bool = True,
    real_couplings: bool = False,
) -> QuantumGraph:
    """Draw a connected, valid graph with at least one lead.

    Parallel edges and self-loops occur; a vertex of degree one may be
    Dirichlet.  With ``real_couplings`` every gamma is real and all
    ``mag`` values vanish.
    """
    rng = np.random.default_rng(seed)
    while True:
        g = _draw(rng, max_vertices, max_edges, max_leads, length_range, magnetic and not real_couplings, potentials, real_couplings)
        if validate_graph(g, require_leads=True).ok:
            return g


def _draw(rng, max_vertices, max_edges, max_leads, length_range, magnetic, potentials, real_couplings):
    nv = int(rng.integers(1, max_vertices + 1))
    ids = [f"v{i}" for i in range(nv)]
    ends: list[tuple[str, str]] = []
    # spanning tree first so the graph is connected
    for i in range(1, nv):
        ends.append((ids[int(rng.integers(0, i))], ids[i]))
    n_extra = int(rng.integers(0 if nv > 1 else 1, max_edges - len(ends) + 1))
    for _ in range(n_extra):
        a, b = rng.choice(nv, size=2)
        ends.append((ids[int(a)], ids[int(b)]))
    degree = {v: 0 for v in ids}
    for a, b in ends:
        degree[a] += 1
        degree[b] += 1

    edges = []
    lo, hi = length_range
    for i, (a, b) in enumerate(ends):
        length = float(np.round(rng.uniform(lo, hi), 6))
        pot = ZeroPotential()
        if potentials and rng.random() < 0.3:
            cut = float(np.round(length * rng.uniform(0.2, 0.8), 6))
            pot = PiecewiseConstant(
                (Segment(cut, _coupling_value(rng, -4, 4)), Segment(length - cut, _coupling_value(rng, -4, 4)))
            )
            length = cut + (length - cut)
        mag = _coupling_value(rng, -2, 2) if magnetic and rng.random() < 0.5 else 0.0
        if a > b and rng.random() < 0.5:
            a, b = b, a
        edges.append(InternalEdge(f"e{i}", a, b, length, pot, mag))

    n_leads = int(rng.integers(1, max_leads + 1))
    lead_vertices = [ids[int(i)] for i in rng.choice(nv, size=n_leads)]
    count = {v: lead_vertices.count(v) for v in ids}

    vertices = []
    for v in ids:
        r = rng.random()
        if count[v] == 0 and degree[v] == 1 and r < 0.4:
            c = Dirichlet()
        elif count[v] == 1 and r < 0.6:
            gamma = complex(_coupling_value(rng, -1, 1), 0.0 if real_couplings else _coupling_value(rng, -1, 1))
            if abs(gamma) > 1:
                gamma /= abs(gamma)
            c = GeneralizedLead(_coupling_value(rng), _coupling_value(rng), gamma)
        else:
            c = Delta(_coupling_value(rng))
        vertices.append(Vertex(v, c))
    leads = [Lead(f"l{i}", v) for i, v in enumerate(lead_vertices)]
    return QuantumGraph(tuple(vertices), tuple(edges), tuple(leads))
