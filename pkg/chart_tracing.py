#!/usr/bin/env python3
"""Glued chart polygons and the exact edge-crossing tracer.

A surface is a polygon in the projective chart whose sides are lightlike
(coordinate) segments or timelike geodesic arcs, together with edge pairings
g: source side -> target side. A curve leaving the polygon through the target
side of g re-enters through the source side, so its chart representative is
replaced by g^-1 . curve and the developing holonomy becomes H . g. Each
pairing also carries a homology weight; the running sum of weights is the
abelian-cover position of the current polygon copy.

Intersections with sides are roots of quadratics in the curve parameter,
so tracing is exact up to floating point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Protocol, Sequence

import numpy as np

from ds2_geometry import (
    ChartCurve,
    ChartSegment,
    Mobius,
    curve_form_roots,
    rp1,
    rp1_value,
    segment_between,
)

logger = logging.getLogger("chart_tracing")

EPS_VERTEX = 1e-9
EPS_EXIT = 1e-10
EPS_HOL = 1e-9
MAX_CROSSINGS = 20_000

Weight = tuple[int, int]
ZERO_WEIGHT: Weight = (0, 0)


class TracingError(RuntimeError):
    """Inconsistent crossing: no exit found, or the curve left the polygon."""


class VertexHit(TracingError):
    def __init__(self, vertex: int, s: float) -> None:
        super().__init__(f"curve passes through polygon vertex {vertex} at s = {s:.17g}")
        self.vertex = vertex
        self.s = s


class ConePointHit(RuntimeError):
    def __init__(self, vertex: int, s: float) -> None:
        super().__init__(f"curve meets the cone point (vertex {vertex}) at s = {s:.17g}")
        self.vertex = vertex
        self.s = s


def add_weight(a: Weight, b: Weight, sign: int = 1) -> Weight:
    return (a[0] + sign * b[0], a[1] + sign * b[1])


# ----------------------------------------------------------------------------
# Polygons
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Side:
    index: int
    start: int
    end: int
    segment: ChartSegment
    form: np.ndarray = field(repr=False, compare=False)

    @property
    def kind(self) -> str:
        return self.segment.curve.kind


@dataclass
class ChartPolygon:
    """Counterclockwise polygon; side k runs from vertex k to vertex k + 1."""

    vertices: list[tuple[float, float]]
    sides: list[Side] = field(default_factory=list)

    @classmethod
    def from_vertices(cls, vertices: Sequence[tuple[float, float]]) -> "ChartPolygon":
        verts = [(float(u), float(v)) for u, v in vertices]
        n = len(verts)
        sides = []
        for k in range(n):
            seg = segment_between(verts[k], verts[(k + 1) % n])
            sides.append(Side(k, k, (k + 1) % n, seg, seg.curve.form()))
        return cls(verts, sides)

    def __len__(self) -> int:
        return len(self.vertices)

    def bounding_box(self) -> tuple[float, float, float, float]:
        us = [p[0] for p in self.vertices]
        vs = [p[1] for p in self.vertices]
        return min(us), max(us), min(vs), max(vs)

    @property
    def scale(self) -> float:
        return max(1.0, max(abs(c) for p in self.vertices for c in p))

    def signed_area(self) -> float:
        return float(sum(side.segment.green_integral() for side in self.sides))

    def contains(self, u: float, v: float) -> bool:
        """Even-odd rule along the ray {(u', v) : u' > u}."""
        if not (math.isfinite(u) and math.isfinite(v)):
            return False
        inside = False
        for side in self.sides:
            if side.kind == "beta":
                continue
            (ua, va), (ub, vb) = side.segment.start, side.segment.end
            lo, hi = min(va, vb), max(va, vb)
            if not lo <= v < hi:
                continue
            if side.kind == "alpha":
                uc = ua
            else:
                curve = side.segment.curve
                s = rp1_value(np.linalg.solve(curve.nu, rp1(v)))
                uc = curve.uv(s)[0]
            if uc > u:
                inside = not inside
        return inside

    def nearest_vertex(self, u: float, v: float) -> tuple[int, float]:
        d = [math.hypot(u - p[0], v - p[1]) for p in self.vertices]
        k = int(np.argmin(d))
        return k, d[k]


@dataclass(frozen=True)
class EdgePairing:
    """Gluing g mapping the source side onto the target side."""

    name: str
    source: int
    target: int
    gluing: Mobius
    weight: Weight

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "source": self.source,
            "target": self.target,
            "mobius": self.gluing.to_list(),
            "weight": list(self.weight),
        }


class GluedSurface(Protocol):
    polygon: ChartPolygon
    pairings: list[EdgePairing]

    @property
    def cone_vertices(self) -> set[int]: ...


def side_roles(pairings: Sequence[EdgePairing]) -> dict[int, tuple[EdgePairing, str]]:
    roles: dict[int, tuple[EdgePairing, str]] = {}
    for p in pairings:
        roles[p.source] = (p, "source")
        roles[p.target] = (p, "target")
    return roles


# ----------------------------------------------------------------------------
# Vertex cycles
# ----------------------------------------------------------------------------


@dataclass
class VertexCycle:
    vertices: list[int]
    holonomy: Mobius
    boundary: bool = False

    def is_regular(self, tol: float = EPS_HOL) -> bool:
        return self.holonomy.equals(Mobius.identity(), tol)


def vertex_cycles(polygon: ChartPolygon, pairings: Sequence[EdgePairing]) -> list[VertexCycle]:
    """Vertex classes with the holonomy of a small loop around each (fixing its first vertex)."""
    n = len(polygon)
    roles = side_roles(pairings)
    seen: set[int] = set()
    cycles = []
    for v0 in range(n):
        if v0 in seen:
            continue
        state0 = (v0, v0)
        v, s = state0
        verts: list[int] = []
        hol = Mobius.identity()
        boundary = False
        for _ in range(4 * n + 4):
            verts.append(v)
            if s not in roles:
                boundary = True
                break
            pairing, role = roles[s]
            if role == "source":
                other, g = pairing.target, pairing.gluing
            else:
                other, g = pairing.source, pairing.gluing.inverse()
            here, there = polygon.sides[s], polygon.sides[other]
            # gluings reverse the boundary orientation
            q = there.end if v == here.start else there.start
            hol = g @ hol
            s = (q - 1) % n if there.index == q else q
            v = q
            if (v, s) == state0:
                break
        else:
            raise TracingError(f"vertex cycle through {v0} does not close")
        seen.update(verts)
        cycles.append(VertexCycle(sorted(set(verts)), hol, boundary))
    return cycles


# ----------------------------------------------------------------------------
# Tracing
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceArc:
    """Piece of a traced curve inside one polygon copy."""

    curve: ChartCurve
    s0: float
    s1: float
    weight: Weight
    holonomy: Mobius
    exit_side: Optional[int]
    exit_sign: int

    def point(self, s: float) -> tuple[float, float]:
        return self.curve.uv(s)

    @property
    def end(self) -> tuple[float, float]:
        return self.curve.uv(self.s1)

    def length(self) -> float:
        return self.curve.arc_length(self.s0, self.s1)


def _exit_tolerance(s: float) -> float:
    return EPS_EXIT * max(1.0, abs(s))


def next_exit(polygon: ChartPolygon, curve: ChartCurve, s_from: float) -> Optional[tuple[float, int]]:
    """Smallest parameter beyond s_from where the curve meets a side, with the side."""
    best: Optional[tuple[float, int]] = None
    tol = _exit_tolerance(s_from)
    seg_tol = 1e-10 * polygon.scale
    for side in polygon.sides:
        for r in curve_form_roots(curve, side.form):
            if r <= s_from + tol or (curve.kind == "geodesic" and r <= 0):
                continue
            if best is not None and r >= best[0]:
                continue
            u, v = curve.uv(r)
            if not (math.isfinite(u) and math.isfinite(v)):
                continue
            if side.segment.contains(u, v, seg_tol):
                best = (r, side.index)
    return best


def chart_segments_inside(curve: ChartCurve, polygon: ChartPolygon) -> list[tuple[float, float]]:
    """Parameter intervals of the curve lying inside the polygon."""
    roots = sorted(
        {
            r
            for side in polygon.sides
            for r in curve_form_roots(curve, side.form)
            if not (curve.kind == "geodesic" and r <= 0)
        }
    )
    if not roots:
        return []
    out = []
    for a, b in zip(roots, roots[1:]):
        mid = 0.5 * (a + b) if curve.kind != "geodesic" else math.sqrt(a * b)
        if polygon.contains(*curve.uv(mid)):
            out.append((a, b))
    return out


def entry_parameter(polygon: ChartPolygon, curve: ChartCurve) -> Optional[float]:
    """A parameter at which the curve is inside the polygon (middle of the longest piece)."""
    pieces = chart_segments_inside(curve, polygon)
    if not pieces:
        return None
    if curve.kind == "geodesic":
        a, b = max(pieces, key=lambda ab: math.log(ab[1] / ab[0]))
        return math.sqrt(a * b)
    a, b = max(pieces, key=lambda ab: ab[1] - ab[0])
    return 0.5 * (a + b)


def _check_vertex(surface: GluedSurface, u: float, v: float, s: float) -> None:
    k, d = surface.polygon.nearest_vertex(u, v)
    if d < EPS_VERTEX * surface.polygon.scale:
        if k in surface.cone_vertices:
            raise ConePointHit(k, s)
        raise VertexHit(k, s)


def _stop_parameter(curve: ChartCurve, hol: Mobius, stop_at: tuple[float, float], s: float) -> Optional[float]:
    """Parameter of the developing-chart point stop_at on the current copy, if it lies ahead of s."""
    inv = hol.inverse()
    u, v = inv(stop_at[0]), inv(stop_at[1])
    if not (math.isfinite(u) and math.isfinite(v)):
        return None
    try:
        s_stop = curve.parameter_at(u, v)
    except np.linalg.LinAlgError:
        return None
    if not math.isfinite(s_stop) or s_stop < s - _exit_tolerance(s):
        return None
    return max(s_stop, s)


def iter_trace(
    surface: GluedSurface,
    curve: ChartCurve,
    s_start: Optional[float] = None,
    *,
    max_crossings: int = MAX_CROSSINGS,
    holonomy: Optional[Mobius] = None,
    weight: Weight = ZERO_WEIGHT,
    stop_at: Optional[tuple[float, float]] = None,
    track_holonomy: bool = True,
) -> Iterator[TraceArc]:
    """Yield the arcs of a curve through successive polygon copies.

    The curve must be inside the polygon at s_start. Each yielded arc ends on
    a side; the generator then crosses it. Iteration stops at an unpaired side
    or raises TracingError after max_crossings. With ``stop_at`` (a point of
    the developing chart, on the developed curve) the last arc ends there and
    has no exit side. Without ``track_holonomy`` every arc carries the
    starting holonomy, which keeps very long leaf traces from overflowing.
    """
    polygon = surface.polygon
    roles = side_roles(surface.pairings)
    hol = holonomy if holonomy is not None else Mobius.identity()
    w = weight
    s = curve.start if s_start is None else float(s_start)
    for _ in range(max_crossings):
        found = next_exit(polygon, curve, s)
        if stop_at is not None:
            s_stop = _stop_parameter(curve, hol, stop_at, s)
            if s_stop is not None and (found is None or s_stop <= found[0] + _exit_tolerance(found[0])):
                yield TraceArc(curve, s, s_stop, w, hol, None, 0)
                return
        if found is None:
            raise TracingError(f"no exit from the polygon after s = {s:.17g}")
        s_exit, side = found
        mid = 0.5 * (s + s_exit) if curve.kind != "geodesic" else math.sqrt(s * s_exit)
        if not polygon.contains(*curve.uv(mid)):
            raise TracingError(f"curve left the polygon between s = {s:.17g} and {s_exit:.17g}")
        u, v = curve.uv(s_exit)
        _check_vertex(surface, u, v, s_exit)
        if side not in roles:
            yield TraceArc(curve, s, s_exit, w, hol, side, 0)
            return
        pairing, role = roles[side]
        sign = 1 if role == "target" else -1
        yield TraceArc(curve, s, s_exit, w, hol, side, sign)
        g = pairing.gluing if sign > 0 else pairing.gluing.inverse()
        curve = curve.transformed(g.inverse())
        if track_holonomy:
            hol = hol @ g
        w = add_weight(w, pairing.weight, sign)
        curve = curve.rebased(s_exit)
        s = curve.start
    raise TracingError(f"no closure after {max_crossings} crossings")


def ledger_product(surface: GluedSurface, ledger: Sequence[tuple[int, int]]) -> tuple[Mobius, Weight]:
    """Holonomy and weight of a crossing ledger [(side, +-1), ...]."""
    roles = side_roles(surface.pairings)
    hol = Mobius.identity()
    w = ZERO_WEIGHT
    for side, sign in ledger:
        pairing, _ = roles[side]
        hol = hol @ (pairing.gluing if sign > 0 else pairing.gluing.inverse())
        w = add_weight(w, pairing.weight, sign)
    return hol, w
