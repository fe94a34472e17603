"""Per-edge propagation data at complex momentum ``k``.

The transfer matrix ``T`` maps ``(h(0), h'(0))`` to ``(h(l), h'(l))`` for
solutions of ``-h'' + V h = k**2 h``.  Magnetic phases are not included here:
on an edge with constant vector potential ``A`` the physical solution is
``f(x) = exp(-i A x) h(x)`` and the phase is applied by the secular
assembler.

All entries are even in the local momentum ``sqrt(k**2 - v0)``, hence
entire functions of ``k``; no branch choice is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import InternalEdge, PiecewiseConstant, Potential, ZeroPotential

__all__ = [
    "TransferData",
    "DirichletData",
    "transfer_arrays",
    "transfer_matrix",
    "dirichlet_data",
    "numeric_transfer",
]


@dataclass(frozen=True)
class TransferData:
    k: complex
    t11: complex
    t12: complex
    t21: complex
    t22: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.t11, self.t12], [self.t21, self.t22]])

    @property
    def det(self) -> complex:
        return self.t11 * self.t22 - self.t12 * self.t21


@dataclass(frozen=True)
class DirichletData:
    """Boundary values of the normalised Dirichlet solutions of one edge.

    ``v`` solves ``v(0) = 0, v'(0) = 1``; ``u`` solves ``u(l) = 0, u'(l) = 1``.
    Their Wronskian is ``W = -v(l) = u(0)``.  The ``_rev`` fields are the same
    quantities for the edge traversed from ``to`` to ``from``.
    """

    W: complex
    v_l: complex
    vp_l: complex
    u_0: complex
    up_0: complex
    W_rev: complex
    v_l_rev: complex
    vp_l_rev: complex
    u_0_rev: complex
    up_0_rev: complex


def _sinc(z):
    """sin(z)/z, entire; series near the origin."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    z2 = z * z
    return np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0, np.sin(safe) / safe)


def _segment(k2, v0: float, length: float):
    """Entries of the constant-potential transfer matrix, vectorised over k**2."""
    q2 = k2 - v0
    q = np.sqrt(q2)
    c = np.cos(q * length)
    s = length * _sinc(q * length)  # sin(q l) / q
    return c, s, -q2 * s, c


def transfer_arrays(potential: Potential, length: float, k):
    """Return ``(t11, t12, t21, t22)`` as arrays broadcast against ``k``."""
    k2 = np.asarray(k, dtype=complex) ** 2
    if isinstance(potential, ZeroPotential):
        return _segment(k2, 0.0, length)
    if not isinstance(potential, PiecewiseConstant):
        raise TypeError(f"unsupported potential {potential!r}")
    a11 = np.ones_like(k2)
    a12 = np.zeros_like(k2)
    a21 = np.zeros_like(k2)
    a22 = np.ones_like(k2)
    for seg in potential.segments:
        b11, b12, b21, b22 = _segment(k2, seg.v0, seg.len)
        # later segments multiply from the left
        a11, a12, a21, a22 = (
            b11 * a11 + b12 * a21,
            b11 * a12 + b12 * a22,
            b21 * a11 + b22 * a21,
            b21 * a12 + b22 * a22,
        )
    return a11, a12, a21, a22


def transfer_matrix(edge: InternalEdge, k: complex) -> TransferData:
    k = complex(k)
    t = transfer_arrays(edge.potential, edge.length, k)
    return TransferData(k, *(complex(x) for x in t))


def dirichlet_data(edge: InternalEdge, k: complex) -> DirichletData:
    t = transfer_matrix(edge, k)
    # reversing the edge maps T to [[t22, t12], [t21, t11]]
    return DirichletData(
        W=-t.t12,
        v_l=t.t12,
        vp_l=t.t22,
        u_0=-t.t12,
        up_0=t.t11,
        W_rev=-t.t12,
        v_l_rev=t.t12,
        vp_l_rev=t.t11,
        u_0_rev=-t.t12,
        up_0_rev=t.t22,
    )


def _rk4(y, v0, k2, h, n):
    def rhs(y):
        return np.array([y[1], (v0 - k2) * y[0]])

    for _ in range(n):
        s1 = rhs(y)
        s2 = rhs(y + 0.5 * h * s1)
        s3 = rhs(y + 0.5 * h * s2)
        s4 = rhs(y + h * s3)
        y = y + (h / 6.0) * (s1 + 2 * s2 + 2 * s3 + s4)
    return y


def numeric_transfer(edge: InternalEdge, k: complex, steps: int) -> TransferData:
    """Transfer matrix by classical RK4 integration.

    Steps are distributed over potential segments in proportion to their
    length so that no step straddles a discontinuity.
    """
    if steps < 16:
        raise ValueError("steps must be >= 16")
    k = complex(k)
    k2 = k * k
    pot = edge.potential
    segs = pot.segments if isinstance(pot, PiecewiseConstant) else ((edge.length, 0.0),)
    segs = [(s.len, s.v0) if not isinstance(s, tuple) else s for s in segs]
    # columns: solutions starting at (1, 0) and (0, 1)
    y = np.eye(2, dtype=complex)
    for length, v0 in segs:
        n = max(1, round(steps * length / edge.length))
        y = _rk4(y, v0, k2, length / n, n)
    return TransferData(k, y[0, 0], y[0, 1], y[1, 0], y[1, 1])
