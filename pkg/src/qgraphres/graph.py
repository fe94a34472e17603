"""Metric graph data model, validation and the JSON graph file format.

A graph consists of vertices carrying a coupling, finite internal edges
(parametrised by ``x in [0, length]`` running from ``from_`` to ``to``) and
semi-infinite leads attached to vertices.  Instances are immutable; build
them directly, through :mod:`qgraphres.oracles`, or with
:func:`parse_graph_text`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

__all__ = [
    "Delta",
    "GeneralizedLead",
    "Dirichlet",
    "VertexCoupling",
    "Vertex",
    "Segment",
    "ZeroPotential",
    "PiecewiseConstant",
    "Potential",
    "InternalEdge",
    "Lead",
    "QuantumGraph",
    "Issue",
    "ValidationReport",
    "GraphParseError",
    "InvalidGraphError",
    "validate_graph",
    "parse_graph_text",
    "serialize_graph",
    "load_graph",
    "subdivide_edge",
    "gauge_transform",
]


# -- couplings ---------------------------------------------------------------


@dataclass(frozen=True)
class Delta:
    """Continuity plus ``sum of outgoing derivatives = alpha * value``.

    Any number of leads may be attached.
    """

    alpha: float = 0.0


@dataclass(frozen=True)
class GeneralizedLead:
    """Coupling of the internal edges at a vertex to exactly one lead.

    With ``F`` the sum of outgoing internal derivatives, ``f`` the common
    internal value and ``g`` the lead function::

        f(0) = inv_alpha * F + gamma * g'(0)
        g(0) = conj(gamma) * F + inv_alpha_tilde * g'(0)

    Inverse parameters are stored so that an infinite coupling strength is
    representable as ``0.0``.
    """

    inv_alpha: float = 0.0
    inv_alpha_tilde: float = 0.0
    gamma: complex = 0j


@dataclass(frozen=True)
class Dirichlet:
    """Wave function vanishes at the vertex.  No leads allowed."""


VertexCoupling = Union[Delta, GeneralizedLead, Dirichlet]


@dataclass(frozen=True)
class Vertex:
    id: str
    coupling: VertexCoupling = field(default_factory=Delta)


# -- potentials --------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    len: float
    v0: float


@dataclass(frozen=True)
class ZeroPotential:
    pass


@dataclass(frozen=True)
class PiecewiseConstant:
    """Ordered segments from the ``from_`` end of the edge to its ``to`` end."""

    segments: tuple[Segment, ...]

    def reversed(self) -> "PiecewiseConstant":
        return PiecewiseConstant(tuple(reversed(self.segments)))


Potential = Union[ZeroPotential, PiecewiseConstant]


@dataclass(frozen=True)
class InternalEdge:
    """Finite edge.  ``mag`` is a constant tangential vector potential."""

    id: str
    from_: str
    to: str
    length: float
    potential: Potential = field(default_factory=ZeroPotential)
    mag: float = 0.0

    @property
    def is_loop(self) -> bool:
        return self.from_ == self.to


@dataclass(frozen=True)
class Lead:
    id: str
    vertex: str


@dataclass(frozen=True)
class QuantumGraph:
    vertices: tuple[Vertex, ...] = ()
    edges: tuple[InternalEdge, ...] = ()
    leads: tuple[Lead, ...] = ()

    def __post_init__(self):
        # accept lists from callers, store tuples so the graph stays hashable
        for name in ("vertices", "edges", "leads"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    def vertex(self, vid: str) -> Vertex:
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def leads_at(self, vid: str) -> list[Lead]:
        return [lead for lead in self.leads if lead.vertex == vid]

    def edges_at(self, vid: str) -> list[InternalEdge]:
        return [e for e in self.edges if vid in (e.from_, e.to)]


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    location: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    def render(self) -> str:
        lines = ["ok" if self.ok else "invalid"]
        lines += [f"{i.severity}: {i.location}: {i.message}" for i in self.issues]
        return "\n".join(lines)


class GraphParseError(ValueError):
    """Malformed graph document.  ``location`` is a line number or field path."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class InvalidGraphError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(report.render())


def _finite(x) -> bool:
    try:
        return math.isfinite(complex(x).real) and math.isfinite(complex(x).imag)
    except (TypeError, ValueError):
        return False


def validate_graph(g: QuantumGraph, require_leads: bool = False) -> ValidationReport:
    """Collect every violated structural rule of ``g``; never raises."""
    issues: list[Issue] = []

    def err(loc, msg):
        issues.append(Issue("error", loc, msg))

    def warn(loc, msg):
        issues.append(Issue("warning", loc, msg))

    ids: dict[str, Vertex] = {}
    for v in g.vertices:
        loc = f"vertex {v.id!r}"
        if v.id in ids:
            err(loc, "duplicate vertex id")
        ids[v.id] = v
        c = v.coupling
        if isinstance(c, Delta):
            if not _finite(c.alpha):
                err(loc, "Delta alpha must be finite")
        elif isinstance(c, GeneralizedLead):
            if not all(_finite(x) for x in (c.inv_alpha, c.inv_alpha_tilde, c.gamma)):
                err(loc, "GeneralizedLead parameters must be finite")
        elif not isinstance(c, Dirichlet):
            err(loc, f"unknown coupling {type(c).__name__}")

    seen_edges = set()
    for e in g.edges:
        loc = f"edge {e.id!r}"
        if e.id in seen_edges:
            err(loc, "duplicate edge id")
        seen_edges.add(e.id)
        for end in (e.from_, e.to):
            if end not in ids:
                err(loc, f"references unknown vertex {end!r}")
        if not (_finite(e.length) and e.length > 0):
            err(loc, "length must be positive and finite")
        if not _finite(e.mag):
            err(loc, "mag must be finite")
        pot = e.potential
        if isinstance(pot, PiecewiseConstant):
            if not pot.segments:
                err(loc, "piecewise potential needs at least one segment")
            for i, s in enumerate(pot.segments):
                if not (_finite(s.len) and s.len > 0):
                    err(f"{loc} segment {i}", "segment len must be positive")
                if not _finite(s.v0):
                    err(f"{loc} segment {i}", "segment v0 must be finite")
            total = sum(s.len for s in pot.segments)
            if _finite(total) and _finite(e.length) and e.length > 0:
                if abs(total - e.length) > 1e-12 * e.length:
                    err(loc, f"segment lengths sum to {total!r}, edge length is {e.length!r}")
        elif not isinstance(pot, ZeroPotential):
            err(loc, f"unknown potential {type(pot).__name__}")

    seen_leads = set()
    for lead in g.leads:
        loc = f"lead {lead.id!r}"
        if lead.id in seen_leads:
            err(loc, "duplicate lead id")
        seen_leads.add(lead.id)
        if lead.vertex not in ids:
            err(loc, f"references unknown vertex {lead.vertex!r}")

    for v in g.vertices:
        loc = f"vertex {v.id!r}"
        n_leads = len(g.leads_at(v.id))
        n_edges = len(g.edges_at(v.id))
        c = v.coupling
        if isinstance(c, Dirichlet) and n_leads:
            err(loc, "Dirichlet vertex carries lead")
        if isinstance(c, GeneralizedLead):
            if n_leads != 1:
                err(loc, f"GeneralizedLead requires exactly one lead (found {n_leads})")
            if n_edges == 0:
                err(loc, "GeneralizedLead requires at least one incident internal edge")
        if n_leads == 0 and n_edges == 0:
            err(loc, "isolated vertex (no edges, no leads)")

    for e in g.edges:
        ends = [ids.get(e.from_), ids.get(e.to)]
        if all(v is not None and isinstance(v.coupling, Dirichlet) for v in ends):
            warn(
                f"edge {e.id!r}",
                "both endpoints Dirichlet: edge is a decoupled component",
            )

    if require_leads and not g.leads:
        err("graph", "at least one lead is required")
    return ValidationReport(tuple(issues))


# -- graph file format -------------------------------------------------------

_COUPLING_FIELDS = {
    "delta": {"type", "alpha"},
    "generalized_lead": {"type", "inv_alpha", "inv_alpha_tilde", "gamma_re", "gamma_im"},
    "dirichlet": {"type"},
}
_POTENTIAL_FIELDS = {"zero": {"type"}, "piecewise": {"type", "segments"}}


def _reject_constant(name):
    raise GraphParseError(f"non-finite number {name} not allowed")


def _obj(x, path) -> dict:
    if not isinstance(x, dict):
        raise GraphParseError("expected an object", path)
    return x


def _check_fields(d: dict, allowed: set, required: set, path: str):
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise GraphParseError(f"unknown field(s) {', '.join(unknown)}", path)
    missing = sorted(required - set(d))
    if missing:
        raise GraphParseError(f"missing field(s) {', '.join(missing)}", path)


def _num(d: dict, key: str, path: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise GraphParseError("missing number", f"{path}.{key}")
        return default
    x = d[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise GraphParseError("expected a number", f"{path}.{key}")
    x = float(x)
    if not math.isfinite(x):
        raise GraphParseError("number must be finite", f"{path}.{key}")
    return x


def _str(d: dict, key: str, path: str) -> str:
    x = d.get(key)
    if not isinstance(x, str):
        raise GraphParseError("expected a string", f"{path}.{key}")
    return x


def _parse_coupling(d, path) -> VertexCoupling:
    d = _obj(d, path)
    tag = d.get("type")
    if tag not in _COUPLING_FIELDS:
        raise GraphParseError(f"unknown coupling type {tag!r}", f"{path}.type")
    fields = _COUPLING_FIELDS[tag]
    _check_fields(d, fields, {"type"}, path)
    if tag == "delta":
        return Delta(_num(d, "alpha", path))
    if tag == "dirichlet":
        return Dirichlet()
    return GeneralizedLead(
        inv_alpha=_num(d, "inv_alpha", path),
        inv_alpha_tilde=_num(d, "inv_alpha_tilde", path),
        gamma=complex(_num(d, "gamma_re", path, 0.0), _num(d, "gamma_im", path, 0.0)),
    )


def _parse_potential(d, path) -> Potential:
    d = _obj(d, path)
    tag = d.get("type")
    if tag not in _POTENTIAL_FIELDS:
        raise GraphParseError(f"unknown potential type {tag!r}", f"{path}.type")
    _check_fields(d, _POTENTIAL_FIELDS[tag], _POTENTIAL_FIELDS[tag], path)
    if tag == "zero":
        return ZeroPotential()
    segs = d["segments"]
    if not isinstance(segs, list) or not segs:
        raise GraphParseError("expected a non-empty list", f"{path}.segments")
    out = []
    for i, s in enumerate(segs):
        sp = f"{path}.segments[{i}]"
        s = _obj(s, sp)
        _check_fields(s, {"len", "v0"}, {"len", "v0"}, sp)
        length = _num(s, "len", sp)
        if length <= 0:
            raise GraphParseError("segment len must be positive", f"{sp}.len")
        out.append(Segment(length, _num(s, "v0", sp)))
    return PiecewiseConstant(tuple(out))


def parse_graph_text(text: str) -> QuantumGraph:
    """Parse a graph document; raise :class:`GraphParseError` on any defect."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise GraphParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    doc = _obj(doc, "$")
    _check_fields(doc, {"vertices", "edges", "leads"}, {"vertices"}, "$")

    def _list(key):
        x = doc.get(key, [])
        if not isinstance(x, list):
            raise GraphParseError("expected a list", f"$.{key}")
        return x

    vertices = []
    for i, v in enumerate(_list("vertices")):
        path = f"vertices[{i}]"
        v = _obj(v, path)
        _check_fields(v, {"id", "coupling"}, {"id", "coupling"}, path)
        vertices.append(Vertex(_str(v, "id", path), _parse_coupling(v["coupling"], f"{path}.coupling")))
    known = {v.id for v in vertices}
    if len(known) != len(vertices):
        raise GraphParseError("duplicate vertex id", "vertices")

    def _ref(d, key, path):
        vid = _str(d, key, path)
        if vid not in known:
            raise GraphParseError(f"dangling vertex reference {vid!r}", f"{path}.{key}")
        return vid

    edges = []
    for i, e in enumerate(_list("edges")):
        path = f"edges[{i}]"
        e = _obj(e, path)
        _check_fields(e, {"id", "from", "to", "length", "mag", "potential"}, {"id", "from", "to", "length"}, path)
        eid = _str(e, "id", path)
        length = _num(e, "length", path)
        if length <= 0:
            raise GraphParseError(f"edge {eid!r}: non-positive length {length!r}", f"{path}.length")
        pot = _parse_potential(e.get("potential", {"type": "zero"}), f"{path}.potential")
        if isinstance(pot, PiecewiseConstant):
            total = sum(s.len for s in pot.segments)
            if abs(total - length) > 1e-12 * length:
                raise GraphParseError(f"edge {eid!r}: segment lengths do not sum to edge length", f"{path}.potential")
        edges.append(
            InternalEdge(eid, _ref(e, "from", path), _ref(e, "to", path), length, pot, _num(e, "mag", path, 0.0))
        )

    leads = []
    for i, lead in enumerate(_list("leads")):
        path = f"leads[{i}]"
        lead = _obj(lead, path)
        _check_fields(lead, {"id", "vertex"}, {"id", "vertex"}, path)
        leads.append(Lead(_str(lead, "id", path), _ref(lead, "vertex", path)))
    return QuantumGraph(tuple(vertices), tuple(edges), tuple(leads))


def _coupling_doc(c: VertexCoupling) -> dict[str, Any]:
    if isinstance(c, Delta):
        return {"type": "delta", "alpha": float(c.alpha)}
    if isinstance(c, GeneralizedLead):
        gamma = complex(c.gamma)
        return {
            "type": "generalized_lead",
            "inv_alpha": float(c.inv_alpha),
            "inv_alpha_tilde": float(c.inv_alpha_tilde),
            "gamma_re": gamma.real,
            "gamma_im": gamma.imag,
        }
    return {"type": "dirichlet"}


def _potential_doc(p: Potential) -> dict[str, Any]:
    if isinstance(p, PiecewiseConstant):
        return {"type": "piecewise", "segments": [{"len": float(s.len), "v0": float(s.v0)} for s in p.segments]}
    return {"type": "zero"}


def serialize_graph(g: QuantumGraph) -> str:
    # json writes floats with repr(), the shortest string that round-trips
    doc = {
        "vertices": [{"id": v.id, "coupling": _coupling_doc(v.coupling)} for v in g.vertices],
        "edges": [
            {
                "id": e.id,
                "from": e.from_,
                "to": e.to,
                "length": float(e.length),
                "mag": float(e.mag),
                "potential": _potential_doc(e.potential),
            }
            for e in g.edges
        ],
        "leads": [{"id": lead.id, "vertex": lead.vertex} for lead in g.leads],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_graph(path) -> QuantumGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph_text(fh.read())


# -- transforms --------------------------------------------------------------


def _split_potential(pot: Potential, at: float) -> tuple[Potential, Potential]:
    if not isinstance(pot, PiecewiseConstant):
        return pot, pot
    left, right, pos = [], [], 0.0
    for s in pot.segments:
        if pos + s.len <= at:
            left.append(s)
        elif pos >= at:
            right.append(s)
        else:
            left.append(Segment(at - pos, s.v0))
            right.append(Segment(pos + s.len - at, s.v0))
        pos += s.len
    return PiecewiseConstant(tuple(left)), PiecewiseConstant(tuple(right))


def subdivide_edge(g: QuantumGraph, edge_id: str, at: float, vertex_id: str | None = None) -> QuantumGraph:
    """Insert a Delta(0) vertex at distance ``at`` from the ``from_`` end of an edge."""
    e = next(x for x in g.edges if x.id == edge_id)
    if not 0 < at < e.length:
        raise ValueError("split point must be interior")
    vid = vertex_id or f"{edge_id}~mid"
    p1, p2 = _split_potential(e.potential, at)
    first = InternalEdge(f"{edge_id}~a", e.from_, vid, at, p1, e.mag)
    second = InternalEdge(f"{edge_id}~b", vid, e.to, e.length - at, p2, e.mag)
    edges = []
    for x in g.edges:
        edges += [first, second] if x.id == edge_id else [x]
    return QuantumGraph(g.vertices + (Vertex(vid, Delta(0.0)),), tuple(edges), g.leads)


def gauge_transform(g: QuantumGraph, phases: dict[str, float]) -> QuantumGraph:
    """Shift each edge flux ``mag * length`` by ``phases[to] - phases[from]``.

    Fluxes through cycles are unchanged, so the spectrum is too.
    """
    edges = []
    for e in g.edges:
        shift = phases.get(e.to, 0.0) - phases.get(e.from_, 0.0)
        edges.append(InternalEdge(e.id, e.from_, e.to, e.length, e.potential, e.mag + shift / e.length))
    return QuantumGraph(g.vertices, tuple(edges), g.leads)
