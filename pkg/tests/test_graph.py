import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgraphres.graph import (
    Delta,
    Dirichlet,
    GeneralizedLead,
    GraphParseError,
    InternalEdge,
    Lead,
    PiecewiseConstant,
    QuantumGraph,
    Segment,
    Vertex,
    ZeroPotential,
    gauge_transform,
    load_graph,
    parse_graph_text,
    serialize_graph,
    subdivide_edge,
    validate_graph,
)
from qgraphres.oracles import LassoParams, LoopParams, build_lasso_graph, build_loop_graph
from qgraphres.randgraph import random_graph

MINIMAL = """{
  "vertices": [{"id": "a", "coupling": {"type": "delta", "alpha": 0}}],
  "edges": [{"id": "e", "from": "a", "to": "a", "length": 1}],
  "leads": [{"id": "l", "vertex": "a"}]
}"""

LOOP_DOC = """{
  "vertices": [
    {"id": "v1", "coupling": {"type": "delta", "alpha": 0}},
    {"id": "v2", "coupling": {"type": "delta", "alpha": 0.5}}
  ],
  "edges": [
    {"id": "e1", "from": "v1", "to": "v2", "length": 1},
    {"id": "e2", "from": "v1", "to": "v2", "length": 1.5, "mag": 0.25}
  ],
  "leads": [{"id": "in", "vertex": "v1"}, {"id": "out", "vertex": "v2"}]
}"""


def messages(report):
    return [i.message for i in report.errors]


# -- validation ---------------------------------------------------------------


def test_minimal_lasso_shape_is_valid():
    g = QuantumGraph((Vertex("a", Delta(0.0)),), (InternalEdge("e", "a", "a", 1.0),), (Lead("l", "a"),))
    assert validate_graph(g).ok


def test_dirichlet_vertex_with_lead_is_rejected():
    g = QuantumGraph(
        (Vertex("a", Delta(0.0)), Vertex("b", Dirichlet())),
        (InternalEdge("e", "a", "b", 1.0),),
        (Lead("l", "b"),),
    )
    report = validate_graph(g)
    assert not report.ok
    assert "Dirichlet vertex carries lead" in messages(report)


def test_generalized_lead_needs_exactly_one_lead():
    g = QuantumGraph(
        (Vertex("a", GeneralizedLead(1.0, 0.0, 0.5)),),
        (InternalEdge("e", "a", "a", 1.0),),
        (Lead("l1", "a"), Lead("l2", "a")),
    )
    report = validate_graph(g)
    assert any(m.startswith("GeneralizedLead requires exactly one lead") for m in messages(report))


@pytest.mark.parametrize(
    "edge, fragment",
    [
        (InternalEdge("e", "a", "zz", 1.0), "zz"),
        (InternalEdge("e", "a", "a", 0.0), "length"),
        (InternalEdge("e", "a", "a", math.nan), "finite"),
        (InternalEdge("e", "a", "a", 1.0, PiecewiseConstant((Segment(0.5, 1.0),))), "sum"),
    ],
)
def test_structural_errors_are_reported(edge, fragment):
    g = QuantumGraph((Vertex("a", Delta(0.0)),), (edge,), (Lead("l", "a"),))
    report = validate_graph(g)
    assert not report.ok
    assert any(fragment in m for m in messages(report)), messages(report)


def test_validation_is_deterministic():
    g = QuantumGraph(
        (Vertex("a", Dirichlet()), Vertex("b", GeneralizedLead(1, 1, 1))),
        (InternalEdge("e", "a", "q", -1.0),),
        (Lead("l", "a"), Lead("m", "b"), Lead("m", "b")),
    )
    first = validate_graph(g)
    assert first == validate_graph(g)
    assert first.render() == validate_graph(g).render()
    assert len(first.errors) >= 3


def test_builders_are_valid():
    for g in (build_loop_graph(LoopParams(1, 2, 0.3, -1)), build_lasso_graph(LassoParams(1, 0.5, 0.2, 0.3j, 1.0))):
        assert validate_graph(g, require_leads=True).ok


# -- parsing ------------------------------------------------------------------


def test_parse_minimal_document():
    g = parse_graph_text(MINIMAL)
    assert (len(g.vertices), len(g.edges), len(g.leads)) == (1, 1, 1)
    assert g.edges[0].is_loop


def test_parse_loop_document():
    g = parse_graph_text(LOOP_DOC)
    assert (len(g.vertices), len(g.edges), len(g.leads)) == (2, 2, 2)
    assert g.edges[1].mag == 0.25
    assert validate_graph(g).ok


def test_negative_length_names_the_edge():
    doc = json.loads(MINIMAL)
    doc["edges"][0]["length"] = -1
    with pytest.raises(GraphParseError) as exc:
        parse_graph_text(json.dumps(doc))
    assert "'e'" in str(exc.value)
    assert "edges[0].length" in str(exc.value)


def test_syntax_error_reports_line():
    broken = MINIMAL.replace('"length": 1}', '"length": 1,,}')
    with pytest.raises(GraphParseError) as exc:
        parse_graph_text(broken)
    assert "line 3" in str(exc.value)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["vertices"][0]["coupling"].update(type="robin"), "unknown coupling"),
        (lambda d: d["edges"][0].update(to="nowhere"), "dangling"),
        (lambda d: d["edges"][0].update(colour="red"), "unknown field"),
        (lambda d: d.update(extra=1), "unknown field"),
        (lambda d: d["leads"][0].update(vertex="b"), "dangling"),
        (lambda d: d["edges"][0].update(length="1"), "expected a number"),
    ],
)
def test_parse_errors(mutate, fragment):
    doc = json.loads(MINIMAL)
    mutate(doc)
    with pytest.raises(GraphParseError, match=fragment):
        parse_graph_text(json.dumps(doc))


@pytest.mark.parametrize("token", ["NaN", "Infinity", "-Infinity", "1e400"])
def test_non_finite_numbers_rejected(token):
    with pytest.raises(GraphParseError):
        parse_graph_text(MINIMAL.replace('"alpha": 0', f'"alpha": {token}'))


def test_load_graph(tmp_path):
    p = tmp_path / "g.json"
    p.write_text(LOOP_DOC, encoding="utf-8")
    assert load_graph(p) == parse_graph_text(LOOP_DOC)


# -- round trip ---------------------------------------------------------------


def test_round_trip_builders():
    for g in (build_loop_graph(LoopParams(1, 1, 0, 0)), build_lasso_graph(LassoParams(1, 0.5, 0.25, 0.3 - 0.1j, 2.0))):
        assert parse_graph_text(serialize_graph(g)) == g


def test_round_trip_keeps_segments_bit_for_bit():
    segs = (Segment(0.1, 1 / 3), Segment(0.2, -math.pi), Segment(0.7000000000000001, 1e-300))
    e = InternalEdge("e", "a", "a", sum(s.len for s in segs), PiecewiseConstant(segs))
    g = QuantumGraph((Vertex("a", Delta(0.0)),), (e,), (Lead("l", "a"),))
    back = parse_graph_text(serialize_graph(g))
    assert back.edges[0].potential.segments == segs


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 5))
    ids = [f"v{i}" for i in range(n)]
    couplings = st.one_of(
        st.builds(Delta, finite),
        st.builds(GeneralizedLead, finite, finite, st.builds(complex, finite, finite)),
        st.just(Dirichlet()),
    )
    vertices = tuple(Vertex(v, draw(couplings)) for v in ids)
    edges = []
    for i in range(draw(st.integers(0, 6))):
        a, b = draw(st.sampled_from(ids)), draw(st.sampled_from(ids))
        if draw(st.booleans()):
            segs = tuple(Segment(draw(positive), draw(finite)) for _ in range(draw(st.integers(1, 3))))
            length, pot = sum(s.len for s in segs), PiecewiseConstant(segs)
        else:
            length, pot = draw(positive), ZeroPotential()
        edges.append(InternalEdge(f"e{i}", a, b, length, pot, draw(finite)))
    leads = tuple(Lead(f"l{i}", draw(st.sampled_from(ids))) for i in range(draw(st.integers(0, 3))))
    return QuantumGraph(vertices, tuple(edges), leads)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_round_trip_property(g):
    text = serialize_graph(g)
    assert parse_graph_text(text) == g
    assert serialize_graph(parse_graph_text(text)) == text


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_graphs_round_trip(seed):
    g = random_graph(seed)
    assert validate_graph(g, require_leads=True).ok
    assert parse_graph_text(serialize_graph(g)) == g


# -- transforms ---------------------------------------------------------------


def test_subdivide_splits_potential():
    segs = (Segment(0.4, 1.0), Segment(0.6, -2.0))
    g = QuantumGraph(
        (Vertex("a", Delta(1.0)), Vertex("b", Delta(0.0))),
        (InternalEdge("e", "a", "b", 1.0, PiecewiseConstant(segs), mag=0.5),),
        (Lead("l", "a"),),
    )
    h = subdivide_edge(g, "e", 0.25)
    assert validate_graph(h).ok
    first, second = h.edges
    assert first.potential.segments == (Segment(0.25, 1.0),)
    assert [s.v0 for s in second.potential.segments] == [1.0, -2.0]
    assert first.mag == second.mag == 0.5
    with pytest.raises(ValueError):
        subdivide_edge(g, "e", 1.0)


def test_gauge_transform_preserves_cycle_flux():
    g = build_loop_graph(LoopParams(1.0, 2.0))
    h = gauge_transform(g, {"v1": 0.3, "v2": -0.4})
    flux = [e.mag * e.length for e in h.edges]
    assert flux[0] == pytest.approx(-0.7)
    assert flux[0] - flux[1] == pytest.approx(0.0)
