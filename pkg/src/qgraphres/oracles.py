"""Closed-form resonance conditions for three small graphs, and their builders.

Each ``*_condition`` is written without poles on the searched region so that
it can be handed straight to :func:`qgraphres.search.find_zeros`.  The
clearing factors are listed per function; zeros they may add are noted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (
    Delta,
    Dirichlet,
    GeneralizedLead,
    InternalEdge,
    Lead,
    QuantumGraph,
    Vertex,
)

__all__ = [
    "AppendixParams",
    "LoopParams",
    "LassoParams",
    "appendix_condition",
    "appendix_amplitudes",
    "loop_condition",
    "loop_gamma",
    "loop_amplitudes",
    "lasso_condition",
    "build_appendix_graph",
    "build_loop_graph",
    "build_lasso_graph",
]


@dataclass(frozen=True)
class AppendixParams:
    """Line with a Dirichlet-terminated appendix of length ``l``.

    At the junction: ``f(0) = beta g(0) + gamma f'(0)`` and
    ``g'(0+) - g'(0-) = delta g(0) - beta f'(0)``.
    """

    l: float
    beta: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError("l must be positive")


@dataclass(frozen=True)
class LoopParams:
    """Two parallel edges between two delta vertices, one lead at each."""

    l1: float
    l2: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError("lengths must be positive")


@dataclass(frozen=True)
class LassoParams:
    """Loop of circumference ``l`` threaded by flux ``A * l``, one lead."""

    l: float
    inv_alpha: float = 0.0
    inv_alpha_tilde: float = 0.0
    gamma: complex = 0j
    A: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError("l must be positive")


def appendix_condition(k, p: AppendixParams):
    """``tan(kl) = beta^2 k / (2ik - delta) - gamma k`` times ``cos(kl) (2ik - delta)``.

    The clearing factor adds no zeros.  Where ``cos(kl)`` vanishes the
    product is ``sin(kl) (2ik - delta)``, and ``2ik = delta`` only on the
    imaginary axis, where the product is ``-beta^2 k cos(kl)``.
    """
    k = np.asarray(k, dtype=complex)
    d = 2j * k - p.delta
    s, c = np.sin(k * p.l), np.cos(k * p.l)
    return s * d + k * c * (p.gamma * d - p.beta**2)


def appendix_amplitudes(k: complex, p: AppendixParams) -> tuple[complex, complex]:
    """Reflection and transmission for free motion on the appendix."""
    f0 = np.sin(k * p.l)
    fp0 = -k * np.cos(k * p.l)
    x = f0 - p.gamma * fp0
    den = (2j * k - p.delta) * x + p.beta**2 * fp0
    return complex((p.delta * x - p.beta**2 * fp0) / den), complex(2j * k * x / den)


def loop_gamma(k, p: LoopParams):
    """The scalar ``gamma(k)`` whose zeros of ``gamma + i`` are the resonances."""
    k = np.asarray(k, dtype=complex)
    s1, s2 = np.sin(k * p.l1), np.sin(k * p.l2)
    cot = 1 / np.tan(k * p.l1) + 1 / np.tan(k * p.l2)
    csc = 1 / s1 + 1 / s2
    return csc**2 / (cot + p.beta / k - 1j) - cot - p.alpha / k


def loop_condition(k, p: LoopParams):
    """``(gamma(k) + i) sin(kl1) sin(kl2) D(k)``, D the first term's denominator.

    Evaluated in the expanded form::

        2 - 2 cos(kL) - (x + y) sin(kL) - x y sin(kl1) sin(kl2)

    with ``L = l1 + l2``, ``x = alpha/k - i``, ``y = beta/k - i``.  Entire
    away from ``k = 0``.  With ``l1 = l2`` it carries the factor ``sin(kl)``,
    whose zeros are the antisymmetric loop eigenstates.
    """
    k = np.asarray(k, dtype=complex)
    big = k * (p.l1 + p.l2)
    x = p.alpha / k - 1j
    y = p.beta / k - 1j
    return 2 - 2 * np.cos(big) - (x + y) * np.sin(big) - x * y * np.sin(k * p.l1) * np.sin(k * p.l2)


def loop_amplitudes(k: complex, p: LoopParams) -> tuple[complex, complex]:
    g = complex(loop_gamma(k, p))
    return (1j - g) / (1j + g), 2j / (g + 1j)


def lasso_condition(k, p: LassoParams):
    """Lasso condition multiplied by ``1 - ik inv_alpha_tilde``::

        (1 - ik at) sin(kl) - 2 (k a (1 - ik at) + i k^2 |gamma|^2) (cos(Al) - cos(kl))

    The factor contributes the zero ``k = -i / inv_alpha_tilde`` when
    ``gamma = 0`` (the decoupled lead's own Robin pole).
    """
    k = np.asarray(k, dtype=complex)
    at = 1 - 1j * k * p.inv_alpha_tilde
    g2 = abs(complex(p.gamma)) ** 2
    return at * np.sin(k * p.l) - 2 * (k * p.inv_alpha * at + 1j * k**2 * g2) * (
        np.cos(p.A * p.l) - np.cos(k * p.l)
    )


def build_appendix_graph(l: float, delta: float = 0.0) -> QuantumGraph:
    """The line folded into two leads at a delta vertex, plus the appendix."""
    if not l > 0:
        raise ValueError("l must be positive")
    return QuantumGraph(
        vertices=(Vertex("junction", Delta(delta)), Vertex("tip", Dirichlet())),
        edges=(InternalEdge("appendix", "junction", "tip", l),),
        leads=(Lead("left", "junction"), Lead("right", "junction")),
    )


def build_loop_graph(p: LoopParams) -> QuantumGraph:
    return QuantumGraph(
        vertices=(Vertex("v1", Delta(p.alpha)), Vertex("v2", Delta(p.beta))),
        edges=(InternalEdge("e1", "v1", "v2", p.l1), InternalEdge("e2", "v1", "v2", p.l2)),
        leads=(Lead("in", "v1"), Lead("out", "v2")),
    )


def build_lasso_graph(p: LassoParams) -> QuantumGraph:
    return QuantumGraph(
        vertices=(Vertex("knot", GeneralizedLead(p.inv_alpha, p.inv_alpha_tilde, complex(p.gamma))),),
        edges=(InternalEdge("loop", "knot", "knot", p.l, mag=p.A),),
        leads=(Lead("tail", "knot"),),
    )
