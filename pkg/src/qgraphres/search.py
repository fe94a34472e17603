"""Zeros of analytic functions in rectangles of the complex k-plane.

Zeros are counted with the argument principle along adaptively sampled box
boundaries, isolated by bisection and polished by a damped secant
iteration.  Functions passed in must accept numpy arrays of complex numbers
and return arrays of the same shape.
"""

from __future__ import annotations

import enum
import functools
import math
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import secular
from .graph import InvalidGraphError, QuantumGraph, validate_graph
from .secular import Route

__all__ = [
    "Region",
    "RootClass",
    "Root",
    "ResonanceSet",
    "MatchReport",
    "SearchOptions",
    "SearchError",
    "BoundaryZeroError",
    "RefinementError",
    "winding_number",
    "find_zeros",
    "find_resonances",
    "refine_root",
    "local_scale",
    "classify_root",
    "rank_deficient",
    "compare_sets",
]

TWO_PI = 2 * math.pi


class SearchError(RuntimeError):
    pass


class BoundaryZeroError(SearchError):
    """A zero of F lies on (or numerically at) the contour."""


class RefinementError(SearchError):
    pass


@dataclass(frozen=True)
class Region:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    exclusion: float = 1e-3

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("region must satisfy re_min < re_max and im_min < im_max")
        dx = max(self.re_min, 0.0, -self.re_max)
        dy = max(self.im_min, 0.0, -self.im_max)
        if math.hypot(dx, dy) <= self.exclusion:
            raise ValueError("region must exclude a neighbourhood of k = 0")

    @classmethod
    def parse(cls, text: str) -> "Region":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 4:
            raise ValueError("region needs re0,re1,im0,im1")
        return cls(*parts)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def diameter(self) -> float:
        return math.hypot(self.re_max - self.re_min, self.im_max - self.im_min)

    def contains(self, k: complex, margin: float = 0.0) -> bool:
        return (
            self.re_min - margin <= k.real <= self.re_max + margin
            and self.im_min - margin <= k.imag <= self.im_max + margin
        )

    def dilated(self, factor: float) -> "Region":
        c = self.center
        hw = 0.5 * factor * (self.re_max - self.re_min)
        hh = 0.5 * factor * (self.im_max - self.im_min)
        return Region(c.real - hw, c.real + hw, c.imag - hh, c.imag + hh, self.exclusion)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.re_min, self.re_max, self.im_min, self.im_max)


class RootClass(str, enum.Enum):
    BOUND_STATE = "BoundState"
    REAL_POINT = "RealPoint"
    RESONANCE = "Resonance"
    SPURIOUS = "Spurious"


@dataclass(frozen=True)
class Root:
    k: complex
    multiplicity: int = 1
    residual: float = 0.0
    kind: Optional[RootClass] = None


@dataclass(frozen=True)
class ResonanceSet:
    roots: tuple[Root, ...]
    region: Region
    route: Optional[str]
    winding: int
    unresolved: tuple[Region, ...] = ()

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.roots)


@dataclass(frozen=True)
class MatchReport:
    pairs: tuple[tuple[complex, complex, float], ...]
    unmatched_a: tuple[complex, ...]
    unmatched_b: tuple[complex, ...]

    @property
    def max_distance(self) -> float:
        return max((d for _, _, d in self.pairs), default=0.0)

    @property
    def all_matched(self) -> bool:
        return not self.unmatched_a and not self.unmatched_b

    def render(self) -> str:
        lines = [
            f"matched {len(self.pairs)}  unmatched_a {len(self.unmatched_a)}  "
            f"unmatched_b {len(self.unmatched_b)}  max_distance {self.max_distance:.3e}"
        ]
        for a, b, d in self.pairs:
            lines.append(f"  {_fmt(a)}  {_fmt(b)}  {d:.3e}")
        for k in self.unmatched_a:
            lines.append(f"  unmatched in A: {_fmt(k)}")
        for k in self.unmatched_b:
            lines.append(f"  unmatched in B: {_fmt(k)}")
        return "\n".join(lines)


def _fmt(k: complex) -> str:
    return f"{k.real:+.12f}{k.imag:+.12f}i"


@dataclass(frozen=True)
class SearchOptions:
    box_tol: float = 1e-4
    residual_tol: float = 1e-10
    merge_tol: float = 1e-9
    real_tol: float = 1e-8
    max_phase_step: float = math.pi / 2
    samples_per_unit: float = 24.0
    max_points: int = 200_000
    max_retries: int = 5
    workers: int = 1


# -- contour bookkeeping -----------------------------------------------------


@dataclass
class _Path:
    """Straight segment z0 -> z1 sampled at parameters t (t[0]=0, t[-1]=1)."""

    z0: complex
    z1: complex
    t: np.ndarray
    f: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.z0 + self.t * (self.z1 - self.z0)

    def steps(self) -> np.ndarray:
        return np.angle(self.f[1:] / self.f[:-1])

    def phase(self) -> float:
        return float(np.sum(self.steps()))

    def log_moment(self) -> complex:
        z = self.z
        zm = 0.5 * (z[1:] + z[:-1])
        return complex(np.sum(zm * np.log(self.f[1:] / self.f[:-1])))

    def reversed(self) -> "_Path":
        return _Path(self.z1, self.z0, (1.0 - self.t)[::-1].copy(), self.f[::-1].copy())

    def split(self, tc: float, fc: complex) -> tuple["_Path", "_Path"]:
        i = int(np.searchsorted(self.t, tc))
        zc = self.z0 + tc * (self.z1 - self.z0)
        left_t = np.concatenate([self.t[:i], [tc]]) / tc
        left_f = np.concatenate([self.f[:i], [fc]])
        j = i + 1 if i < len(self.t) and self.t[i] == tc else i
        right_t = (np.concatenate([[tc], self.t[j:]]) - tc) / (1.0 - tc)
        right_f = np.concatenate([[fc], self.f[j:]])
        return _Path(self.z0, zc, left_t, left_f), _Path(zc, self.z1, right_t, right_f)


def _evaluate(F, z: np.ndarray) -> np.ndarray:
    out = np.asarray(F(z), dtype=complex)
    if out.shape != z.shape:
        out = np.broadcast_to(out, z.shape).astype(complex)
    return out


def _resolve(F, z0: complex, z1: complex, opts: SearchOptions, scale_len: float) -> _Path:
    length = abs(z1 - z0)
    n = max(8, int(math.ceil(opts.samples_per_unit * length)))
    t = np.linspace(0.0, 1.0, n + 1)
    f = _evaluate(F, z0 + t * (z1 - z0))
    min_dt = 1e-13 * max(scale_len, 1.0) / max(length, 1e-300)
    while True:
        if not np.all(np.isfinite(f)):
            raise SearchError(f"non-finite function value on segment {z0}..{z1}")
        if np.any(f == 0):
            raise BoundaryZeroError(f"exact zero on segment {z0}..{z1}")
        bad = np.abs(np.angle(f[1:] / f[:-1])) >= opts.max_phase_step
        if not bad.any():
            return _Path(z0, z1, t, f)
        idx = np.nonzero(bad)[0]
        if np.min(t[idx + 1] - t[idx]) < min_dt:
            raise BoundaryZeroError(f"zero on or too close to segment {z0}..{z1}")
        if len(t) + len(idx) > opts.max_points:
            raise SearchError("contour refinement exceeded the sample cap")
        tm = 0.5 * (t[idx] + t[idx + 1])
        fm = _evaluate(F, z0 + tm * (z1 - z0))
        t = np.insert(t, idx + 1, tm)
        f = np.insert(f, idx + 1, fm)


@dataclass
class _Box:
    region: Region
    # counter-clockwise: bottom (L->R), right (B->T), top (R->L), left (T->B)
    sides: tuple
    winding: int

    def log_moment(self) -> complex:
        return sum(p.log_moment() for p in self.sides) / (2j * math.pi)

    def estimate(self) -> complex:
        est = self.log_moment() / self.winding
        return est if self.region.contains(est) else self.region.center


def _winding(sides) -> int:
    total = sum(p.phase() for p in sides) / TWO_PI
    w = round(total)
    if abs(total - w) > 1e-6:
        raise SearchError(f"non-integer winding {total}")
    return int(w)


def _make_box(F, region: Region, opts: SearchOptions) -> _Box:
    a = complex(region.re_min, region.im_min)
    b = complex(region.re_max, region.im_min)
    c = complex(region.re_max, region.im_max)
    d = complex(region.re_min, region.im_max)
    scale = region.diameter
    sides = tuple(_resolve(F, p, q, opts, scale) for p, q in ((a, b), (b, c), (c, d), (d, a)))
    return _Box(region, sides, _winding(sides))


_CUT_FRACTIONS = (0.5, 0.4617, 0.5383, 0.4231, 0.5769, 0.3853, 0.6147, 0.3469, 0.6531)


def _split(F, box: _Box, opts: SearchOptions) -> tuple[_Box, _Box]:
    r = box.region
    bottom, right, top, left = box.sides
    vertical = (r.re_max - r.re_min) >= (r.im_max - r.im_min)
    last: Exception | None = None
    for frac in _CUT_FRACTIONS:
        try:
            if vertical:
                x = r.re_min + frac * (r.re_max - r.re_min)
                zb, zt = complex(x, r.im_min), complex(x, r.im_max)
                cut = _resolve(F, zb, zt, opts, r.diameter)
                b1, b2 = bottom.split(frac, cut.f[0])
                t2, t1 = top.split(1.0 - frac, cut.f[-1])
                s1 = (b1, cut, t1, left)
                s2 = (b2, right, t2, cut.reversed())
                r1 = replace(r, re_max=x)
                r2 = replace(r, re_min=x)
            else:
                y = r.im_min + frac * (r.im_max - r.im_min)
                zr, zl = complex(r.re_max, y), complex(r.re_min, y)
                cut = _resolve(F, zr, zl, opts, r.diameter)
                rb, rt = right.split(frac, cut.f[0])
                lt, lb = left.split(1.0 - frac, cut.f[-1])
                s1 = (bottom, rb, cut, lb)
                s2 = (cut.reversed(), rt, top, lt)
                r1 = replace(r, im_max=y)
                r2 = replace(r, im_min=y)
            w1, w2 = _winding(s1), _winding(s2)
            if w1 + w2 != box.winding or w1 < 0 or w2 < 0:
                raise SearchError("winding not conserved across cut")
            return _Box(r1, s1, w1), _Box(r2, s2, w2)
        except SearchError as exc:
            last = exc
    raise SearchError(f"could not split box {r.as_tuple()}: {last}")


# -- refinement ---------------------------------------------------------------


def local_scale(F, k: complex, radius: float = 0.1, n: int = 16) -> float:
    """Max |F| on a circle around k; the reference for relative residuals."""
    z = k + radius * np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.max(np.abs(_evaluate(F, z))))


def _f1(F, k: complex) -> complex:
    return complex(_evaluate(F, np.array([k]))[0])


def refine_root(
    F,
    k0: complex,
    tol: float = 1e-10,
    h: Optional[float] = None,
    max_step: Optional[float] = None,
    max_iter: int = 100,
) -> tuple[complex, float]:
    """Damped secant iteration from ``k0``; returns ``(k, relative residual)``.

    Raises :class:`RefinementError` if the residual ``|F(k)| / local_scale``
    does not reach ``tol``.
    """
    k0 = complex(k0)
    if h is None:
        h = 1e-4 * max(1.0, abs(k0))
    if max_step is None:
        max_step = 0.5
    x0, x1 = k0, k0 + h
    f0, f1 = _f1(F, x0), _f1(F, x1)
    if abs(f0) < abs(f1):
        x0, x1, f0, f1 = x1, x0, f1, f0
    best, fbest = x1, abs(f1)
    small = 0
    for _ in range(max_iter):
        if f1 == 0:
            best, fbest = x1, 0.0
            break
        denom = f1 - f0
        if denom == 0:
            break
        step = -f1 * (x1 - x0) / denom
        if abs(step) > max_step:
            step *= max_step / abs(step)
        x0, f0 = x1, f1
        x1 = x1 + step
        f1 = _f1(F, x1)
        if not np.isfinite(f1):
            raise RefinementError(f"non-finite value at {x1}")
        if abs(f1) <= fbest:
            best, fbest = x1, abs(f1)
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(x1)):
            small += 1
            if small >= 2:
                break
    scale = local_scale(F, best)
    residual = fbest / scale if scale > 0 else math.inf
    if not residual <= tol:
        raise RefinementError(f"secant from {k0} stalled at {best} with residual {residual:.2e}")
    return best, residual


# -- classification ---------------------------------------------------------


def _rank_ratio(m: np.ndarray) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def rank_deficient(g: QuantumGraph, route: Route, k: complex, probe: Optional[float] = None) -> bool:
    """True when the bordered system at k loses rank relative to nearby points."""
    if probe is None:
        probe = 1e-4 * max(1.0, abs(k))
    ks = np.concatenate([[k], k + probe * np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)])
    mats, _, _ = secular._assemble(g, ks, Route(route))
    here = _rank_ratio(mats[0])
    around = min(_rank_ratio(m) for m in mats[1:])
    return here <= 1e-3 * around


def _near_wronskian_zero(g: QuantumGraph, k: complex, tol: float) -> bool:
    h = 1e-6 * max(1.0, abs(k))
    w = secular.wronskians(g, k)
    wp = {eid: (a - b) / (2 * h) for (eid, a), b in zip(secular.wronskians(g, k + h).items(), secular.wronskians(g, k - h).values())}
    for eid, val in w.items():
        d = abs(val) / abs(wp[eid]) if wp[eid] != 0 else (0.0 if val == 0 else math.inf)
        if d <= tol:
            return True
    return False


def _im_class(k: complex, tol: float) -> RootClass:
    if k.imag > tol:
        return RootClass.BOUND_STATE
    if k.imag < -tol:
        return RootClass.RESONANCE
    return RootClass.REAL_POINT


def classify_root(g: QuantumGraph, route: Route, root: Root, tol: float = 1e-8, w_tol: float = 1e-7) -> Root:
    """Assign the class of a located zero.

    A zero sitting on a Dirichlet momentum of some edge is ``Spurious`` when
    the full system keeps its rank there.
    """
    if _near_wronskian_zero(g, root.k, w_tol) and not rank_deficient(g, route, root.k):
        return replace(root, kind=RootClass.SPURIOUS)
    return replace(root, kind=_im_class(root.k, tol))


# -- driver ----------------------------------------------------------------


def _seed(region: Region) -> int:
    return zlib.crc32(struct.pack("<4d", *region.as_tuple()))


def _outer_box(F, region: Region, opts: SearchOptions) -> _Box:
    rng = np.random.default_rng(_seed(region))
    current = region
    for attempt in range(opts.max_retries + 1):
        try:
            return _make_box(F, current, opts)
        except BoundaryZeroError:
            if attempt == opts.max_retries:
                raise
            current = region.dilated(float(rng.uniform(1.01, 1.05)))
    raise AssertionError("unreachable")


def winding_number(F: Callable, region: Region, n_samples: Optional[int] = None, opts: Optional[SearchOptions] = None) -> int:
    """Number of zeros of F inside ``region``, counted with multiplicity."""
    opts = opts or SearchOptions()
    if n_samples is not None:
        perimeter = 2 * ((region.re_max - region.re_min) + (region.im_max - region.im_min))
        opts = replace(opts, samples_per_unit=max(1.0, n_samples / perimeter))
    return _outer_box(F, region, opts).winding


def _process(F, opts: SearchOptions, box: _Box):
    """One work item: returns ('root', k, mult, res) | ('split', b1, b2) | ('unresolved', region, msg)."""
    r = box.region
    small = r.diameter < opts.box_tol
    if box.winding == 1 or small:
        try:
            k, res = refine_root(
                F,
                box.estimate(),
                tol=opts.residual_tol,
                h=min(1e-4 * max(1.0, abs(r.center)), 0.1 * r.diameter),
                max_step=max(r.diameter, 10 * opts.box_tol),
            )
            if r.contains(k, margin=1e-9 * max(1.0, abs(k))) or (small and r.contains(k, margin=r.diameter)):
                return ("root", k, box.winding, res)
        except RefinementError as exc:
            if small:
                return ("unresolved", r, str(exc))
    try:
        b1, b2 = _split(F, box, opts)
    except SearchError as exc:
        return ("unresolved", r, str(exc))
    return ("split", b1, b2)


class _Mapper:
    def __init__(self, workers: int):
        self.pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def __call__(self, fn, items):
        if self.pool is None:
            return [fn(x) for x in items]
        return list(self.pool.map(fn, items))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _merge(raw: list[tuple[complex, int, float]], tol: float) -> list[tuple[complex, int, float]]:
    raw = sorted(raw, key=lambda x: (x[0].real, x[0].imag))
    out: list[list] = []
    for k, m, res in raw:
        for item in out:
            if abs(item[0] - k) <= tol:
                item[1] += m
                item[2] = max(item[2], res)
                break
        else:
            out.append([k, m, res])
    return [tuple(x) for x in out]


def find_zeros(F: Callable, region: Region, opts: Optional[SearchOptions] = None) -> ResonanceSet:
    """Locate all zeros of F in ``region``.

    Boxes are processed breadth-first in rounds; each round maps a pure
    function over the pending boxes, so results do not depend on
    ``opts.workers``.
    """
    opts = opts or SearchOptions()
    top = _outer_box(F, region, opts)
    roots: list[tuple[complex, int, float]] = []
    unresolved: list[Region] = []
    mapper = _Mapper(opts.workers)
    try:
        pending = [top] if top.winding > 0 else []
        fn = functools.partial(_process, F, opts)
        while pending:
            nxt = []
            for out in mapper(fn, pending):
                if out[0] == "root":
                    roots.append(out[1:])
                elif out[0] == "split":
                    nxt += [b for b in out[1:] if b.winding > 0]
                else:
                    unresolved.append(out[1])
            pending = nxt
    finally:
        mapper.close()
    merged = _merge(roots, opts.merge_tol)
    result = ResonanceSet(
        roots=tuple(Root(k, m, res) for k, m, res in merged),
        region=top.region,
        route=None,
        winding=top.winding,
        unresolved=tuple(sorted(unresolved, key=lambda r: r.as_tuple())),
    )
    if not result.unresolved and result.total_multiplicity != top.winding:
        raise SearchError(f"located multiplicity {result.total_multiplicity} != winding {top.winding}")
    return result


def find_resonances(
    g: QuantumGraph,
    region: Region,
    route: Route = Route.SCALED,
    opts: Optional[SearchOptions] = None,
) -> ResonanceSet:
    """Zeros of the secular determinant of ``g`` inside ``region``, classified."""
    opts = opts or SearchOptions()
    report = validate_graph(g, require_leads=True)
    if not report.ok:
        raise InvalidGraphError(report)
    route = Route(route)
    F = functools.partial(secular.resonance_function_batch, g, route)
    found = find_zeros(F, region, opts)
    roots = tuple(classify_root(g, route, r, tol=opts.real_tol) for r in found.roots)
    return replace(found, roots=roots, route=route.value)


def compare_sets(a: ResonanceSet, b: ResonanceSet, cap: float = 1e-6) -> MatchReport:
    """Optimal one-to-one matching of two root sets (expanded by multiplicity)."""
    ka = [r.k for r in a.roots for _ in range(r.multiplicity)]
    kb = [r.k for r in b.roots for _ in range(r.multiplicity)]
    pairs, used_a, used_b = [], set(), set()
    if ka and kb:
        dist = np.abs(np.subtract.outer(np.array(ka), np.array(kb)))
        penalty = 1e6 * (cap + float(dist.max()) + 1.0)
        cost = np.where(dist <= cap, dist, penalty)
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if dist[i, j] <= cap:
                pairs.append((ka[i], kb[j], float(dist[i, j])))
                used_a.add(i)
                used_b.add(j)
    pairs.sort(key=lambda p: (p[0].real, p[0].imag))
    return MatchReport(
        pairs=tuple(pairs),
        unmatched_a=tuple(k for i, k in enumerate(ka) if i not in used_a),
        unmatched_b=tuple(k for j, k in enumerate(kb) if j not in used_b),
    )
