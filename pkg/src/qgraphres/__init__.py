"""Resonances of Schrödinger operators on metric graphs with leads."""

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
    parse_graph_text,
    serialize_graph,
    validate_graph,
)
from .search import Region, SearchOptions, compare_sets, find_resonances
from .secular import Route, resonance_function, smatrix

__version__ = "0.1.0"
