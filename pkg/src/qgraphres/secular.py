"""Secular systems for resonances of a quantum graph.

Two routes lead to a finite linear system in the vertex values ``psi_j``:

``Route.SCALED``
    Exterior complex scaling of the leads.  An outgoing lead solution turns
    each lead vertex into an effective, energy-dependent coupling ``beta(k)``
    acting on the internal edges only.

``Route.SCATTERING``
    Lead solutions ``a exp(-ikx) + b exp(ikx)``; unknowns are the vertex
    values and the outgoing amplitudes ``b``.  The homogeneous system
    (``a = 0``) is singular exactly at the poles of the S-matrix.

Both are assembled in *bordered* form: each internal edge contributes an
extra unknown ``eta_e`` (the outgoing derivative at its ``from`` end) and a
row ``W_e eta_e - t11 psi_from + exp(iAl) psi_to = 0``.  Every entry is then
entire in ``k``.  Eliminating the ``eta`` unknowns yields the vertex-only
duality matrix with ``1/W_e`` entries (see :func:`duality_matrix`), and::

    det(bordered) = prod_e W_e * prod_j den_j(k) * det(duality)

where ``den_j`` is the denominator of ``beta_j`` at generalized-lead
vertices (scaled route only).  The product is what
:func:`resonance_function` returns.

Vertex conditions use outgoing covariant derivatives ``f' + iAf``; with a
constant vector potential the edge solution is ``exp(-iAx) h(x)`` where
``h`` is propagated by :func:`qgraphres.edges.transfer_arrays`.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .edges import transfer_arrays
from .graph import (
    Delta,
    Dirichlet,
    GeneralizedLead,
    InvalidGraphError,
    QuantumGraph,
    VertexCoupling,
    validate_graph,
)

__all__ = [
    "Route",
    "EffectiveCoupling",
    "SecularSystem",
    "BetaPoleError",
    "SingularScatteringError",
    "beta_effective",
    "assemble_scaled",
    "assemble_scattering",
    "duality_matrix",
    "resonance_function",
    "resonance_function_batch",
    "smatrix",
    "unitarity_defect",
    "wronskians",
]


class Route(str, enum.Enum):
    SCATTERING = "scattering"
    SCALED = "scaled"


class BetaPoleError(ZeroDivisionError):
    """The effective coupling has a pole at the requested momentum."""

    def __init__(self, k):
        self.k = k
        super().__init__(f"beta(k) has a pole at k={k!r}; use the reciprocal row form")


class SingularScatteringError(ArithmeticError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"scattering system is singular at k={k!r}")


@dataclass(frozen=True)
class EffectiveCoupling:
    beta: complex


@dataclass(frozen=True)
class SecularSystem:
    """Bordered secular system at a single momentum.

    ``regularization`` lists ``(kind, id, exponent)`` factors by which
    ``det(matrix)`` exceeds the determinant of the vertex-only system:
    ``("wronskian", edge_id, 1)`` and ``("beta_denominator", vertex_id, 1)``.
    """

    k: complex
    route: Route
    matrix: np.ndarray
    row_labels: tuple
    col_labels: tuple
    regularization: tuple
    rhs: Optional[np.ndarray] = None

    @property
    def determinant(self) -> complex:
        return complex(np.linalg.det(self.matrix))


def _beta_parts(c: VertexCoupling, k, n_leads: int):
    """Numerator and denominator of beta(k); both entire in k."""
    k = np.asarray(k, dtype=complex)
    if isinstance(c, Delta):
        return c.alpha - 1j * n_leads * k, np.ones_like(k)
    if isinstance(c, GeneralizedLead):
        g2 = abs(complex(c.gamma)) ** 2
        a, at = c.inv_alpha, c.inv_alpha_tilde
        return 1 - 1j * k * at, a + 1j * k * (g2 - a * at)
    raise TypeError(f"no effective coupling for {type(c).__name__}")


def beta_effective(c: VertexCoupling, k: complex, lead_count: int) -> EffectiveCoupling:
    """Effective coupling of a lead vertex after scaling the leads.

    Delta: ``alpha - i M k``.  GeneralizedLead (M = 1)::

        (1 - i k inv_alpha_tilde) / (inv_alpha + i k (|gamma|^2 - inv_alpha inv_alpha_tilde))
    """
    if lead_count < 1:
        raise ValueError("lead_count must be >= 1")
    if isinstance(c, GeneralizedLead) and lead_count != 1:
        raise ValueError("GeneralizedLead couples exactly one lead")
    num, den = _beta_parts(c, k, lead_count)
    num, den = complex(num), complex(den)
    if den == 0:
        raise BetaPoleError(k)
    return EffectiveCoupling(num / den)


# -- layout ------------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    psi: dict  # vertex id -> column
    b: dict  # lead id -> column
    eta: dict  # edge id -> column
    rows: tuple  # row labels
    cols: tuple
    lead_order: tuple
    edges: tuple
    couplings: dict
    lead_count: dict


@functools.lru_cache(maxsize=64)
def _layout(g: QuantumGraph, route: Route) -> _Layout:
    vertices = sorted(g.vertices, key=lambda v: v.id)
    leads = sorted(g.leads, key=lambda lead: lead.id)
    edges = tuple(sorted(g.edges, key=lambda e: e.id))
    lead_count = {v.id: 0 for v in vertices}
    for lead in leads:
        lead_count[lead.vertex] += 1
    live = [v for v in vertices if not isinstance(v.coupling, Dirichlet)]

    cols = [("psi", v.id) for v in live]
    if route is Route.SCATTERING:
        cols += [("b", lead.id) for lead in leads]
    cols += [("eta", e.id) for e in edges]
    index = {c: i for i, c in enumerate(cols)}

    rows = []
    for v in live:
        rows.append(("vertex", v.id))
        if route is Route.SCATTERING:
            if isinstance(v.coupling, GeneralizedLead):
                rows.append(("lead", g.leads_at(v.id)[0].id))
            else:
                rows += [("continuity", lead.id) for lead in sorted(g.leads_at(v.id), key=lambda x: x.id)]
    rows += [("edge", e.id) for e in edges]
    return _Layout(
        psi={v.id: index[("psi", v.id)] for v in live},
        b={lead.id: index[("b", lead.id)] for lead in leads} if route is Route.SCATTERING else {},
        eta={e.id: index[("eta", e.id)] for e in edges},
        rows=tuple(rows),
        cols=tuple(cols),
        lead_order=tuple(lead.id for lead in leads),
        edges=edges,
        couplings={v.id: v.coupling for v in vertices},
        lead_count=lead_count,
    )


def _check(g: QuantumGraph):
    report = validate_graph(g, require_leads=True)
    if not report.ok:
        raise InvalidGraphError(report)


@functools.lru_cache(maxsize=64)
def _checked(g: QuantumGraph) -> bool:
    _check(g)
    return True


def _assemble(g: QuantumGraph, ks: np.ndarray, route: Route):
    """Bordered matrices (n, N, N) and the map from incoming amplitudes to rhs (n, N, L)."""
    _checked(g)
    route = Route(route)
    lay = _layout(g, route)
    ks = np.asarray(ks, dtype=complex).ravel()
    if np.any(ks == 0):
        raise ValueError("k = 0 is excluded")
    n, size = ks.size, len(lay.cols)
    mat = np.zeros((n, size, size), dtype=complex)
    rmap = np.zeros((n, size, len(lay.lead_order)), dtype=complex)
    row_of = {r: i for i, r in enumerate(lay.rows)}
    lead_idx = {lid: i for i, lid in enumerate(lay.lead_order)}

    # coefficient multiplying the outgoing-derivative sum F_j in each row
    fcoef: dict[int, list[tuple[int, np.ndarray]]] = {}
    for vid, col in lay.psi.items():
        c = lay.couplings[vid]
        m_leads = lay.lead_count[vid]
        r = row_of[("vertex", vid)]
        leads_here = sorted(lead.id for lead in g.leads_at(vid))
        if route is Route.SCALED or m_leads == 0:
            if m_leads == 0:
                num, den = np.full(n, c.alpha, dtype=complex), np.ones(n, dtype=complex)
            else:
                num, den = _beta_parts(c, ks, m_leads)
            # num psi - den F = 0
            mat[:, r, col] += num
            fcoef[r] = [(vid, -den)]
        elif isinstance(c, Delta):
            # alpha psi - F - ik sum b = -ik sum a ;  psi - b_m = a_m
            mat[:, r, col] += c.alpha
            fcoef[r] = [(vid, -np.ones(n, dtype=complex))]
            for lid in leads_here:
                mat[:, r, lay.b[lid]] += -1j * ks
                rmap[:, r, lead_idx[lid]] += -1j * ks
                rc = row_of[("continuity", lid)]
                mat[:, rc, col] += 1.0
                mat[:, rc, lay.b[lid]] += -1.0
                rmap[:, rc, lead_idx[lid]] += 1.0
        else:
            # psi - a F - ik gamma b = -ik gamma a
            # (1 - ik at) b - conj(gamma) F = -(1 + ik at) a
            (lid,) = leads_here
            gamma = complex(c.gamma)
            a, at = c.inv_alpha, c.inv_alpha_tilde
            bc, li = lay.b[lid], lead_idx[lid]
            mat[:, r, col] += 1.0
            mat[:, r, bc] += -1j * ks * gamma
            rmap[:, r, li] += -1j * ks * gamma
            fcoef[r] = [(vid, np.full(n, -a, dtype=complex))]
            r2 = row_of[("lead", lid)]
            mat[:, r2, bc] += 1 - 1j * ks * at
            rmap[:, r2, li] += -(1 + 1j * ks * at)
            fcoef[r2] = [(vid, np.full(n, -gamma.conjugate(), dtype=complex))]

    # rows of vertex vid whose F coefficient is registered
    rows_for: dict[str, list[tuple[int, np.ndarray]]] = {}
    for r, items in fcoef.items():
        for vid, coef in items:
            rows_for.setdefault(vid, []).append((r, coef))

    for e in lay.edges:
        t11, t12, t21, t22 = transfer_arrays(e.potential, e.length, ks)
        ph = np.exp(1j * e.mag * e.length)
        re = row_of[("edge", e.id)]
        ce = lay.eta[e.id]
        mat[:, re, ce] += -t12  # W
        cf, ct = lay.psi.get(e.from_), lay.psi.get(e.to)
        if cf is not None:
            mat[:, re, cf] += -t11
        if ct is not None:
            mat[:, re, ct] += ph
        # outgoing derivative at from: eta
        for r, coef in rows_for.get(e.from_, ()):
            mat[:, r, ce] += coef
        # outgoing derivative at to: -exp(-iAl) (t21 psi_from + t22 eta)
        for r, coef in rows_for.get(e.to, ()):
            mat[:, r, ce] += -coef * t22 / ph
            if cf is not None:
                mat[:, r, cf] += -coef * t21 / ph
    return mat, rmap, lay


def _regularization(lay: _Layout, route: Route) -> tuple:
    reg = [("wronskian", e.id, 1) for e in lay.edges]
    if route is Route.SCALED:
        reg += [
            ("beta_denominator", vid, 1)
            for vid in sorted(lay.psi)
            if isinstance(lay.couplings[vid], GeneralizedLead) and lay.lead_count[vid]
        ]
    return tuple(reg)


def _system(g, k, route, a=None) -> SecularSystem:
    route = Route(route)
    mat, rmap, lay = _assemble(g, np.array([k]), route)
    rhs = None
    if a is not None:
        a = np.asarray(a, dtype=complex)
        if a.shape != (len(lay.lead_order),):
            raise ValueError(f"expected {len(lay.lead_order)} incoming amplitudes")
        rhs = rmap[0] @ a
    return SecularSystem(complex(k), route, mat[0], lay.rows, lay.cols, _regularization(lay, route), rhs)


def assemble_scaled(g: QuantumGraph, k: complex) -> SecularSystem:
    """Complex-scaled eigenvalue system (vertex rows with beta_j(k), edge rows)."""
    return _system(g, k, Route.SCALED)


def assemble_scattering(g: QuantumGraph, k: complex, a=None) -> SecularSystem:
    """Scattering system; ``a`` (indexed by lead id order) gives the rhs."""
    if a is None:
        a = np.zeros(len(g.leads))
    return _system(g, k, Route.SCATTERING, a)


def duality_matrix(g: QuantumGraph, k: complex, route: Route = Route.SCALED) -> tuple[np.ndarray, tuple]:
    """Vertex-level system with ``1/W`` entries (edge unknowns eliminated).

    Unregularised: singular where some ``W_e`` vanishes.  Returns the matrix
    and its column labels.
    """
    route = Route(route)
    mat, _, lay = _assemble(g, np.array([k]), route)
    m = mat[0]
    nv = len(lay.cols) - len(lay.eta)
    a, b, c, d = m[:nv, :nv], m[:nv, nv:], m[nv:, :nv], m[nv:, nv:]
    return a - b @ np.linalg.solve(d, c), lay.cols[:nv]


def resonance_function_batch(g: QuantumGraph, route: Route, ks) -> np.ndarray:
    ks = np.asarray(ks, dtype=complex)
    mat, _, _ = _assemble(g, ks, route)
    return np.linalg.det(mat).reshape(ks.shape)


def resonance_function(g: QuantumGraph, k, route: Route = Route.SCALED):
    """Regularised secular determinant; entire in k, scalar or array input."""
    out = resonance_function_batch(g, Route(route), k)
    return complex(out) if np.ndim(k) == 0 else out


def wronskians(g: QuantumGraph, k) -> dict[str, complex]:
    return {e.id: complex(-transfer_arrays(e.potential, e.length, k)[1]) for e in g.edges}


def smatrix(g: QuantumGraph, k: complex) -> np.ndarray:
    """On-shell scattering matrix; column j holds outgoing amplitudes for a = e_j."""
    mat, rmap, lay = _assemble(g, np.array([k]), Route.SCATTERING)
    m, rhs = mat[0], rmap[0]
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= 1e3 * np.finfo(float).eps * s[0]:
        raise SingularScatteringError(k)
    x = np.linalg.solve(m, rhs)
    return x[[lay.b[lid] for lid in lay.lead_order], :]


def unitarity_defect(s: np.ndarray) -> float:
    return float(np.max(np.abs(s.conj().T @ s - np.eye(s.shape[0]))))
