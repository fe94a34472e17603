import math

import numpy as np
import pytest

from qgraphres.oracles import LassoParams, LoopParams, build_appendix_graph, build_lasso_graph, build_loop_graph
from qgraphres.search import Region

LN3 = math.log(3.0)
STANDARD_REGION = Region(0.5, 10.0, -2.0, 0.5)
WIDE_REGION = Region(0.3, 12.0, -3.0, 0.5)


@pytest.fixture
def appendix_graph():
    return build_appendix_graph(1.0, 0.0)


@pytest.fixture
def loop_graph():
    return build_loop_graph(LoopParams(1.0, 1.0, 0.0, 0.0))


@pytest.fixture
def lasso_graph():
    return build_lasso_graph(LassoParams(1.0, 0.5, 0.0, 0.5 + 0j, 0.0))


def sorted_ks(rs):
    return sorted((r.k for r in rs.roots), key=lambda k: (round(k.real, 6), k.imag))


def assert_same_points(found, expected, tol):
    found = sorted(found, key=lambda k: (k.real, k.imag))
    expected = sorted(expected, key=lambda k: (k.real, k.imag))
    assert len(found) == len(expected), (found, expected)
    for a, b in zip(found, expected):
        assert abs(a - b) <= tol, (a, b)


def cr_defect(f, k, h=1e-6):
    """|dF/dk-bar| and |dF/dk| by central differences."""
    fx = (f(k + h) - f(k - h)) / (2 * h)
    fy = (f(k + 1j * h) - f(k - 1j * h)) / (2 * h)
    return abs(0.5 * (fx + 1j * fy)), abs(0.5 * (fx - 1j * fy))


def random_ks(rng, n, re=(-5, 5), im=(-2, 2)):
    return rng.uniform(*re, n) + 1j * rng.uniform(*im, n)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
