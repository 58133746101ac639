#!/usr/bin/env python3
"""Singular de-Sitter surfaces built from lightlike-edged chart polygons.

Three constructions live here:

* the standard cone of angle theta, with transport across its seam;
* the L-shaped hexagon tori T(theta, x, y) with a single cone point, obtained
  by solving the two gluing constraints that make every other vertex regular;
* the rectangle R(theta, k, l) bounded by two timelike geodesics and two
  alpha lightlike edges, the annulus glued from its lightlike edges, and the
  tori obtained by also gluing its timelike edges with an offset.

L-polygon layout (original chart, u horizontal, v vertical):

    [1, inf] x [0, v1]  union  [1, x] x [v1, v2],    0 < v1 < v2 < 1 < x

The bottom edge is split at u = s (x') and the left edge at v = t (y'); the
gluings are

    B1: (1, 0, s) -> (x, v1, inf)      B2: (0, s, inf) -> (v2, 1, x)
    A1: (1, 0, t) -> (x, v1, v2)       A2: (1, t, v2) -> (inf, 0, v1)

and everything is moved to the bounded chart h(t) = 2t / (t + 1) before use.
The input y in (0, 1) fixes v1 = v2 - y * g(v2) where g(v2) is the largest
height of the step below v2 for which the gluing equations stay solvable;
v2 is then the solution of area = theta.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, root

from chart_tracing import (
    ConePointHit,
    EdgePairing,
    ChartPolygon,
    TraceArc,
    TracingError,
    VertexCycle,
    VertexHit,
    Weight,
    ZERO_WEIGHT,
    iter_trace,
    vertex_cycles,
)
from ds2_geometry import (
    METRIC_LAMBDA,
    ChartCurve,
    DsPoint,
    Mobius,
    ProjPoint,
    chart_inner,
    from_projective,
    mobius_of,
    rp1,
    three_point_map,
    timelike_distance,
    to_projective,
)
from lorentz_kernel import (
    E3,
    GeometryError,
    Isometry,
    VectorLike,
    as_vector,
    inner,
    q_form,
    stabilizer_boost,
)

logger = logging.getLogger("surface_builder")

EPS_HOL = 1e-9
EPS_SOLVE = 1e-12
EPS_AREA = 1e-6
EPS_PERTURB = 1e-7
LENGTH_FACTOR = math.sqrt(METRIC_LAMBDA) / 2.0
H_CHART = Mobius(np.array([[2.0, 0.0], [1.0, 1.0]]))


class SolverError(RuntimeError):
    """A constraint solve did not converge."""

    def __init__(self, message: str, residual: float = float("nan"), last_iterate: Sequence[float] = ()) -> None:
        super().__init__(f"{message} (residual {residual:.3e}, last iterate {list(last_iterate)})")
        self.residual = residual
        self.last_iterate = list(last_iterate)


# ----------------------------------------------------------------------------
# Developed paths and the standard cone
# ----------------------------------------------------------------------------


@dataclass
class DevelopedPath:
    polyline: list[ProjPoint]
    ledger: list[tuple[int, int]] = field(default_factory=list)
    holonomy: Mobius = field(default_factory=Mobius.identity)
    homology: Weight = ZERO_WEIGHT


@dataclass(frozen=True)
class ConeModel:
    """dS^2 cut along the future half-geodesic from ``base`` and reglued by a^theta."""

    theta: float
    base: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise GeometryError(f"cone angle must be positive, got {self.theta}")
        DsPoint.of(self.base)

    @property
    def seam_direction(self) -> np.ndarray:
        o = np.array(self.base)
        w = E3 - inner(E3, o) * o
        return w / math.sqrt(-q_form(w))

    def boost(self, k: int = 1) -> Isometry:
        return stabilizer_boost(self.base, k * self.theta)


def cone_transport(cone: ConeModel, path: Sequence[VectorLike]) -> DevelopedPath:
    """Continue a polyline of dS^2 points across the seam; each crossing applies a^(+-theta)."""
    o = np.array(cone.base)
    w0 = cone.seam_direction
    pts = [as_vector(p) for p in path]
    for p in pts:
        if np.linalg.norm(p - o) < 1e-9:
            raise ConePointHit(-1, 0.0)
    k = 0
    ledger: list[tuple[int, int]] = []
    developed = [pts[0]]
    for p, q in zip(pts, pts[1:]):
        fp, fq = np.linalg.det(np.array([o, w0, p])), np.linalg.det(np.array([o, w0, q]))
        if fp != fq and (fp <= 0 < fq or fq <= 0 < fp):
            lam = fp / (fp - fq)
            x = p + lam * (q - p)
            a, b = inner(x, o), -inner(x, w0)
            if a > 0 and abs(b) < 1e-12 * max(1.0, abs(a)):
                raise ConePointHit(-1, lam)
            if a > 0 and b > 0:
                sign = 1 if np.linalg.det(np.array([o, w0, q - p])) > 0 else -1
                k += sign
                ledger.append((-1, sign))
        developed.append(cone.boost(k).apply(q) if k else q)
    hol = mobius_of(cone.boost(k)) if k else Mobius.identity()
    return DevelopedPath([to_projective(p) for p in developed], ledger, hol, (k, 0))


# ----------------------------------------------------------------------------
# Singular tori
# ----------------------------------------------------------------------------


@dataclass
class SingularTorus:
    theta: float
    kind: str
    params: dict
    polygon: ChartPolygon
    pairings: list[EdgePairing]
    cone_vertex: int
    gen_a: Mobius
    gen_b: Mobius
    twist_count: int = 0
    axis: Optional[ChartCurve] = None
    axis_length: Optional[float] = None
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def cycles(self) -> list[VertexCycle]:
        if "cycles" not in self.cache:
            self.cache["cycles"] = vertex_cycles(self.polygon, self.pairings)
        return self.cache["cycles"]

    @property
    def cone_cycle(self) -> VertexCycle:
        for cyc in self.cycles:
            if self.cone_vertex in cyc.vertices:
                return cyc
        raise TracingError("cone vertex has no cycle")

    @property
    def cone_vertices(self) -> set[int]:
        return set(self.cone_cycle.vertices)

    def pairing(self, name: str) -> EdgePairing:
        for p in self.pairings:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def weights(self) -> dict[str, Weight]:
        return {p.name: p.weight for p in self.pairings}

    def to_descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "theta": self.theta,
            **{k: v for k, v in self.params.items()},
            "twist_count": self.twist_count,
            "vertices": [list(p) for p in self.polygon.vertices],
            "pairings": [p.to_dict() for p in self.pairings],
            "gen_a": self.gen_a.to_list(),
            "gen_b": self.gen_b.to_list(),
            "cone_vertex": self.cone_vertex,
        }


def torus_from_descriptor(desc: dict) -> SingularTorus:
    """Rebuild a torus from its defining parameters in a descriptor."""
    kind = desc.get("kind")
    if kind == "L":
        torus = build_torus(float(desc["theta"]), float(desc["x"]), float(desc["y"]))
    elif kind == "rectangle":
        torus = rectangle_torus(float(desc["theta"]), float(desc["l"]), float(desc["offset"]))
    else:
        raise ValueError(f"unknown torus kind {kind!r}")
    n = int(desc.get("twist_count", 0))
    if n:
        from deformation_coords import dehn_twist_action

        torus = dehn_twist_action(torus, n)
    return torus


@dataclass
class InvariantReport:
    vertex_residual: float
    cone_trace_residual: float
    cone_fix_residual: float
    area_residual: float
    commutator_residual: float

    def passed(self, hol_tol: float = 1e-10, cone_tol: float = 1e-8, area_tol: float = EPS_AREA) -> bool:
        return (
            self.vertex_residual < hol_tol
            and self.cone_trace_residual < cone_tol
            and self.cone_fix_residual < cone_tol
            and self.area_residual < area_tol
            and self.commutator_residual < cone_tol
        )

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def cone_trace(theta: float) -> float:
    """|tr| of a^theta in PSL(2, R)."""
    return 2.0 * math.cosh(theta / 2.0)


def check_invariants(torus: SingularTorus) -> InvariantReport:
    regular = [c for c in torus.cycles if torus.cone_vertex not in c.vertices and not c.boundary]
    vres = max((c.holonomy.distance(Mobius.identity()) for c in regular), default=0.0)
    cone = torus.cone_cycle
    tres = abs(abs(cone.holonomy.trace) - cone_trace(torus.theta))
    u, v = torus.polygon.vertices[cone.vertices[0]]
    fres = max(abs(cone.holonomy(u) - u), abs(cone.holonomy(v) - v))
    ares = abs(torus.polygon.signed_area() - torus.theta)
    comm = torus.gen_a @ torus.gen_b @ torus.gen_a.inverse() @ torus.gen_b.inverse()
    cres = abs(abs(comm.trace) - cone_trace(torus.theta))
    return InvariantReport(vres, tres, fres, ares, cres)


# ----------------------------------------------------------------------------
# L-shaped polygon
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LPolygon:
    theta: float
    x: float
    y: float
    v1: float
    v2: float

    @property
    def y_plus(self) -> float:
        """Upper end of the admissible interval for y'."""
        return self.v2

    @property
    def corners(self) -> list[tuple[float, float]]:
        """The six corners in the original chart, counterclockwise from (1, 0)."""
        x, v1, v2 = self.x, self.v1, self.v2
        return [(1.0, 0.0), (math.inf, 0.0), (math.inf, v1), (x, v1), (x, v2), (1.0, v2)]

    def chart_corners(self) -> list[tuple[float, float]]:
        return [(H_CHART(u), H_CHART(v)) for u, v in self.corners]


def lpolygon_area(x: float, v1: float, v2: float) -> float:
    """Area of [1, inf] x [0, v1] u [1, x] x [v1, v2] from the log antiderivative."""
    return (METRIC_LAMBDA / 2.0) * math.log((x - v2) / ((1.0 - v2) * (x - v1)))


def step_gap(x: float, v2: float) -> float:
    """Largest v2 - v1 for which the gluing constraints have a solution."""
    lo, hi = min(v2, 1.0 - v2), max(v2, 1.0 - v2)
    return min((x - v2) * lo / hi, v2)


def _v1_of(x: float, y: float, v2: float) -> float:
    return v2 - y * step_gap(x, v2)


def build_L_polygon(theta: float, x: float, y: float) -> LPolygon:
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not x > 1:
        raise ValueError(f"x must lie in (1, inf), got {x}")
    if not 0 < y < 1:
        raise ValueError(f"y must lie in the admissible interval (0, 1), got {y}")

    def excess(v2: float) -> float:
        return lpolygon_area(x, _v1_of(x, y, v2), v2) - theta

    lo = None
    prev = 0.5 ** 30
    # 1 - 2**-k rounds to 1.0 past the float mantissa
    for k in range(1, 53):
        cand = 1.0 - 0.5 ** k
        if excess(cand) > 0:
            lo = prev
            hi = cand
            break
        prev = cand
    if lo is None:
        raise ValueError(f"area equation unsolvable for theta = {theta}, x = {x}, y = {y}")
    v2 = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    v1 = _v1_of(x, y, v2)
    logger.debug("L polygon theta=%g x=%g y=%g: v1=%.17g v2=%.17g", theta, x, y, v1, v2)
    return LPolygon(theta, x, y, v1, v2)


def gluing_parameters_closed_form(poly: LPolygon) -> tuple[float, float]:
    """(x', y') solving the two regularity constraints, by elimination."""
    x, v1, v2 = poly.x, poly.v1, poly.v2
    c = v1 * (1.0 - v2)
    k = (x - v1) / (v2 - v1)
    d = (1.0 - v2) * (x - v1)
    den = k * d * v2 - (x - v2)
    if den <= 0:
        raise SolverError("gluing constraints have no admissible solution", den, (x, v1, v2))
    a = (x * (x - 1.0) + c * (1.0 + k * d)) / den
    t = v2 - c / a
    delta = k * (a * v2 - c)
    s = delta * (1.0 - v2) / (x - 1.0)
    return s, t


def _original_gluings(poly: LPolygon, s: float, t: float) -> dict[str, Mobius]:
    x, v1, v2 = poly.x, poly.v1, poly.v2
    inf = math.inf
    h = [rp1(z) for z in (1.0, 0.0, s, x, v1, inf, v2, t)]
    one, zero, hs, hx, hv1, hinf, hv2, ht = h
    return {
        "B1": three_point_map([one, zero, hs], [hx, hv1, hinf]),
        "B2": three_point_map([zero, hs, hinf], [hv2, one, hx]),
        "A1": three_point_map([one, zero, ht], [hx, hv1, hv2]),
        "A2": three_point_map([one, ht, hv2], [hinf, zero, hv1]),
    }


def _gluing_residual(poly: LPolygon, s: float, t: float) -> np.ndarray:
    g = _original_gluings(poly, s, t)
    r1 = g["A2"](g["B2"](1.0)) - poly.x
    r2 = g["B2"](g["A2"](0.0)) - poly.v1
    return np.array([r1, r2])


L_WEIGHTS: dict[str, Weight] = {"A1": (1, -1), "B1": (1, -1), "A2": (1, 0), "B2": (0, -1)}
# side k runs from vertex k to k + 1: P0 S P1 P2 P3 P4 P5 T
L_SIDES = {"B1": (0, 3), "B2": (1, 5), "A2": (6, 2), "A1": (7, 4)}


def edge_pairings_from(x_prime: float, y_prime: float, poly: LPolygon) -> list[EdgePairing]:
    """The four gluings of the L polygon, in the bounded working chart."""
    if not x_prime > 1:
        raise ValueError(f"x' must lie in (1, inf), got {x_prime}")
    if not 0 < y_prime < poly.y_plus:
        raise ValueError(f"y' must lie in (0, {poly.y_plus:.17g}), got {y_prime}")
    hinv = H_CHART.inverse()
    out = []
    for name, g in _original_gluings(poly, x_prime, y_prime).items():
        src, dst = L_SIDES[name]
        out.append(EdgePairing(name, src, dst, H_CHART @ g @ hinv, L_WEIGHTS[name]))
    return sorted(out, key=lambda p: p.name)


def _l_chart_polygon(poly: LPolygon, s: float, t: float) -> ChartPolygon:
    c = poly.chart_corners()
    h = H_CHART
    verts = [c[0], (h(s), 0.0), c[1], c[2], c[3], c[4], c[5], (1.0, h(t))]
    return ChartPolygon.from_vertices(verts)


def _to_unknowns(s: float, t: float, v2: float) -> np.ndarray:
    return np.array([math.log(s - 1.0), math.log(t / (v2 - t))])


def _from_unknowns(p: Sequence[float], v2: float) -> tuple[float, float]:
    s = 1.0 + math.exp(p[0])
    t = v2 / (1.0 + math.exp(-p[1]))
    return s, t


def solve_unique_singularity(
    theta: float, x: float, y: float, *, seed: Optional[int] = None, n_seeds: int = 12
) -> tuple[float, float]:
    """(x', y') making every vertex except the one through (1, 0) regular."""
    poly = build_L_polygon(theta, x, y)
    v2 = poly.v2
    rng = np.random.default_rng(seed)
    seeds = [(math.log(x), 0.0), (0.0, 0.0), (math.log(1.0 + x * x), 1.0)]
    seeds += [tuple(rng.uniform(-3.0, 3.0, size=2)) for _ in range(n_seeds)]
    if seed is not None:
        rng.shuffle(seeds)

    def fun(p: np.ndarray) -> np.ndarray:
        s, t = _from_unknowns(p, v2)
        return _gluing_residual(poly, s, t)

    best: tuple[float, Sequence[float]] = (math.inf, ())
    for p0 in seeds:
        try:
            sol = root(fun, np.array(p0, dtype=float), method="hybr", options={"xtol": 1e-15})
        except (GeometryError, OverflowError, ValueError) as exc:
            logger.debug("seed %s rejected: %s", p0, exc)
            continue
        if not np.all(np.isfinite(sol.x)):
            continue
        res = float(np.max(np.abs(sol.fun)))
        s, t = _from_unknowns(sol.x, v2)
        if res < best[0]:
            best = (res, (s, t))
        if res < EPS_SOLVE:
            logger.debug("gluing parameters x'=%.17g y'=%.17g (residual %.2e)", s, t, res)
            return s, t
    raise SolverError("gluing constraints did not converge", best[0], best[1])


def build_torus(theta: float, x: float, y: float, *, seed: Optional[int] = None) -> SingularTorus:
    poly = build_L_polygon(theta, x, y)
    s, t = solve_unique_singularity(theta, x, y, seed=seed)
    pairings = edge_pairings_from(s, t, poly)
    polygon = _l_chart_polygon(poly, s, t)
    by_name = {p.name: p.gluing for p in pairings}
    torus = SingularTorus(
        theta=theta,
        kind="L",
        params={"x": x, "y": y, "x_prime": s, "y_prime": t, "v1": poly.v1, "v2": poly.v2},
        polygon=polygon,
        pairings=pairings,
        cone_vertex=0,
        gen_a=by_name["A2"],
        gen_b=by_name["B2"].inverse(),
    )
    return torus


# ----------------------------------------------------------------------------
# Rectangles, annuli and rectangle tori
# ----------------------------------------------------------------------------

STANDARD_GEODESIC = ChartCurve(np.eye(2), np.diag([-1.0, 1.0]), "geodesic")


@dataclass
class Rectangle:
    """R(theta, k, l): b0 -> b1 future alpha edge, b1 -> b2 the edge I of length l,
    b2 -> b3 past alpha edge, b3 -> b0 back along J of length k."""

    theta: float
    k: float
    l: float
    vb: float
    v3: float

    @property
    def big_l(self) -> float:
        return math.exp(self.l / LENGTH_FACTOR)

    @property
    def vertices(self) -> list[tuple[float, float]]:
        L = self.big_l
        return [(1.0, self.vb), (1.0, -1.0), (L, -L), (L, self.v3)]

    def polygon(self) -> ChartPolygon:
        return ChartPolygon.from_vertices(self.vertices)

    def j_curve(self) -> tuple[ChartCurve, float]:
        b0, b3 = self.vertices[0], self.vertices[3]
        return ChartCurve.through_points(b0, b3)


def _rectangle_v3(vb: float, k: float, L: float) -> float:
    c = math.cosh(k / LENGTH_FACTOR)
    den = c * (1.0 - vb) - (2.0 * L - 1.0 - vb)
    return (c * L * (1.0 - vb) + (2.0 - L) * vb - L) / den


def _rectangle_area(vb: float, k: float, l: float) -> Optional[float]:
    L = math.exp(l / LENGTH_FACTOR)
    try:
        v3 = _rectangle_v3(vb, k, L)
    except ZeroDivisionError:
        return None
    if not (-L < v3 < L) or not math.isfinite(v3):
        return None
    try:
        return Rectangle(0.0, k, l, vb, v3).polygon().signed_area()
    except (GeometryError, ValueError):
        return None


def build_rectangle(theta: float, k: float, l: float) -> Rectangle:
    """The rectangle with timelike edges of lengths l (bottom) and k (top) and area theta."""
    for name, value in (("theta", theta), ("k", k), ("l", l)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    grid = sorted({-1.0 + 2.0 * 0.5 ** j for j in range(1, 50)} | {1.0 - 2.0 * 0.5 ** j for j in range(1, 50)})
    prev: Optional[tuple[float, float]] = None
    for vb in grid:
        area = _rectangle_area(vb, k, l)
        if area is None:
            prev = None
            continue
        if prev is not None and (prev[1] - theta) * (area - theta) <= 0:
            vb_star = brentq(
                lambda z: _rectangle_area(z, k, l) - theta, prev[0], vb, xtol=1e-15, rtol=4 * np.finfo(float).eps
            )
            L = math.exp(l / LENGTH_FACTOR)
            return Rectangle(theta, k, l, vb_star, _rectangle_v3(vb_star, k, L))
        prev = (vb, area)
    raise SolverError(f"no rectangle with theta={theta}, k={k}, l={l}", math.nan, (theta, k, l))


@dataclass
class DsAnnulus:
    """Lightlike edges of a rectangle glued by A1 (upper pieces) and A2 (lower pieces)."""

    theta: float
    k: float
    l: float
    offset: float
    rectangle: Rectangle
    polygon: ChartPolygon
    pairings: list[EdgePairing]
    cone_vertex: int

    @property
    def boundary_lengths(self) -> tuple[float, float]:
        b0, b1, b2, b3 = (from_projective(ProjPoint(*p)) for p in self.rectangle.vertices)
        return timelike_distance(b0, b3), timelike_distance(b1, b2)

    @property
    def cone_vertices(self) -> set[int]:
        return {self.cone_vertex, self.cone_vertex + 3}


def _annulus_gluings(rect: Rectangle) -> tuple[Mobius, Mobius, float, float]:
    """A1 translates J by k, A2 translates I by l; the cone point is where they agree."""
    j, s3 = rect.j_curve()
    A1 = Mobius(j.mu @ np.diag([s3, 1.0]) @ np.linalg.inv(j.mu))
    A2 = Mobius(np.diag([rect.big_l, 1.0]))
    cyc = A2.inverse() @ A1
    if not cyc.is_hyperbolic():
        raise SolverError("lightlike gluings do not produce a cone point", abs(cyc.trace) - 2.0, (rect.vb,))
    fixed = [v for v in (float(h[0] / h[1]) if abs(h[1]) > 1e-300 else math.inf for h in cyc.fixed_points())]
    o_v = max(fixed, key=lambda z: abs(z - 1.0))
    if not -1.0 < o_v < rect.vb:
        raise SolverError("cone point falls outside the left edge", o_v, (rect.vb, o_v))
    o2_v = A1(o_v)
    return A1, A2, o_v, o2_v


def annulus_from_rectangle(theta: float, k: float, l: float, offset: float = 0.0) -> DsAnnulus:
    rect = build_rectangle(theta, k, l)
    A1, A2, o_v, o2_v = _annulus_gluings(rect)
    b0, b1, b2, b3 = rect.vertices
    verts = [b0, (1.0, o_v), b1, b2, (b2[0], o2_v), b3]
    polygon = ChartPolygon.from_vertices(verts)
    pairings = [EdgePairing("A1", 0, 4, A1, (1, 0)), EdgePairing("A2", 1, 3, A2, (1, 0))]
    return DsAnnulus(theta, k, l, offset, rect, polygon, pairings, 1)


RECT_WEIGHTS: dict[str, Weight] = {"A1": (1, 0), "A2": (1, 0), "B2": (0, 1), "B1": (1, 1)}
# (start label, end label, pairing, role)
RECT_SIDES = [
    ("x", "o", "A1", "source"),
    ("o", "x'", "A2", "source"),
    ("x'", "x''", "B2", "target"),
    ("x''", "y'", "B1", "target"),
    ("y'", "o'", "A2", "target"),
    ("o'", "y", "A1", "target"),
    ("y", "y''", "B2", "source"),
    ("y''", "x", "B1", "source"),
]


def rectangle_torus(theta: float, l: float, offset: float) -> SingularTorus:
    """Identification space of R(theta, l, l) with y'' at distance ``offset`` from x along J."""
    if not 0 <= offset < l:
        raise ValueError(f"offset must lie in [0, l) = [0, {l}), got {offset}")
    ann = annulus_from_rectangle(theta, l, l, offset)
    rect = ann.rectangle
    A1, A2 = ann.pairings[0].gluing, ann.pairings[1].gluing
    j, _ = rect.j_curve()
    f = LENGTH_FACTOR
    z_x2 = math.exp((l - offset) / f)
    s_y2 = math.exp(offset / f)
    j_inv = np.linalg.inv(j.mu)
    B1 = Mobius(np.diag([z_x2, 1.0]) @ j_inv)
    B2 = Mobius(np.diag([1.0 / s_y2, 1.0]) @ j_inv)
    gluings = {"A1": A1, "A2": A2, "B1": B1, "B2": B2}

    o_v = ann.polygon.vertices[1][1]
    o2_v = ann.polygon.vertices[4][1]
    L = rect.big_l
    points = {
        "x": (1.0, rect.vb),
        "o": (1.0, o_v),
        "x'": (1.0, -1.0),
        "x''": (z_x2, -z_x2),
        "y'": (L, -L),
        "o'": (L, o2_v),
        "y": (L, rect.v3),
        "y''": j.uv(s_y2),
    }
    degenerate = offset == 0.0 or offset < 1e-12 * l
    if degenerate:
        sides = [row for row in RECT_SIDES if row[2] != "B1"]
        sides = [(a if a != "y''" else "x", b if b != "x''" else "y'", g, r) for a, b, g, r in sides]
    else:
        sides = RECT_SIDES
    labels = [row[0] for row in sides]
    polygon = ChartPolygon.from_vertices([points[name] for name in labels])
    by_name: dict[str, dict[str, int]] = {}
    for k, (_, _, name, role) in enumerate(sides):
        by_name.setdefault(name, {})[role] = k
    pairings = [
        EdgePairing(name, idx["source"], idx["target"], gluings[name], RECT_WEIGHTS[name])
        for name, idx in sorted(by_name.items())
    ]
    return SingularTorus(
        theta=theta,
        kind="rectangle",
        params={"l": l, "offset": offset, "vb": rect.vb, "v3": rect.v3, "o_v": o_v},
        polygon=polygon,
        pairings=pairings,
        cone_vertex=labels.index("o"),
        gen_a=A2,
        gen_b=B2,
        axis=STANDARD_GEODESIC,
        axis_length=l,
    )


# ----------------------------------------------------------------------------
# Developing
# ----------------------------------------------------------------------------

_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def chart_piece(p: tuple[float, float], q: tuple[float, float]) -> tuple[ChartCurve, float, float]:
    """Straight piece from p to q with an increasing parameter."""
    if chart_inner(p[0], p[1], q[0], q[1]) > 1.0 + 1e-12 and (q[0] - p[0]) * (q[1] - p[1]) < 0:
        curve, s_q = ChartCurve.through_points(p, q)
        if s_q >= 1.0:
            return curve, 1.0, s_q
        rev = ChartCurve(curve.mu @ _SWAP, curve.nu @ _SWAP, "geodesic")
        return rev, 1.0, 1.0 / s_q
    if p[0] == q[0]:
        if q[1] <= p[1]:
            return ChartCurve.alpha_leaf(p[0], p[1]), 0.0, p[1] - q[1]
        c = rp1(p[0])
        up = ChartCurve(np.array([[0.0, c[0]], [0.0, c[1]]]), np.array([[1.0, p[1]], [0.0, 1.0]]), "alpha")
        return up, 0.0, q[1] - p[1]
    if p[1] == q[1]:
        if q[0] >= p[0]:
            return ChartCurve.beta_leaf(p[0], p[1]), 0.0, q[0] - p[0]
        c = rp1(p[1])
        left = ChartCurve(np.array([[-1.0, p[0]], [0.0, 1.0]]), np.array([[0.0, c[0]], [0.0, c[1]]]), "beta")
        return left, 0.0, p[0] - q[0]
    return ChartCurve.line(p[0], p[1], q[0] - p[0], q[1] - p[1]), 0.0, 1.0


def _develop_once(torus: SingularTorus, points: Sequence[tuple[float, float]]) -> DevelopedPath:
    if not torus.polygon.contains(*points[0]):
        raise ValueError("developed path must start inside the polygon")
    hol = Mobius.identity()
    w = ZERO_WEIGHT
    ledger: list[tuple[int, int]] = []
    for p, q in zip(points, points[1:]):
        curve, s0, _ = chart_piece(p, q)
        local = curve.transformed(hol.inverse())
        for arc in iter_trace(torus, local, s0, holonomy=hol, weight=w, stop_at=q):
            hol, w = arc.holonomy, arc.weight
            if arc.exit_side is None:
                break
            if arc.exit_sign == 0:
                raise TracingError(f"path leaves through the unglued side {arc.exit_side}")
            ledger.append((arc.exit_side, arc.exit_sign))
        else:
            raise TracingError("developed piece did not terminate")
    return DevelopedPath([ProjPoint(u, v) for u, v in points], ledger, hol, w)


def develop(torus: SingularTorus, path: Sequence[ProjPoint | tuple[float, float]]) -> DevelopedPath:
    """Develop a polyline given in the developing chart, starting inside the polygon."""
    pts = [(p.u, p.v) if isinstance(p, ProjPoint) else (float(p[0]), float(p[1])) for p in path]
    if len(pts) < 2:
        return DevelopedPath([ProjPoint(u, v) for u, v in pts])
    try:
        return _develop_once(torus, pts)
    except VertexHit as hit:
        logger.debug("vertex hit (%s); retrying with perturbed paths", hit)
    results = []
    for sign in (1.0, -1.0):
        shifted = [(u + sign * EPS_PERTURB, v + sign * 0.618 * EPS_PERTURB) for u, v in pts]
        results.append(_develop_once(torus, shifted))
    if results[0].ledger != results[1].ledger:
        raise TracingError("perturbations on either side of a vertex disagree")
    dev = results[0]
    dev.polyline = [ProjPoint(u, v) for u, v in pts]
    return dev


def develop_arcs(torus: SingularTorus, arcs: Sequence[TraceArc]) -> list[tuple[float, float]]:
    """Developed positions of arc endpoints (H applied to each chart point)."""
    out = []
    for arc in arcs:
        for s in (arc.s0, arc.s1):
            u, v = arc.curve.uv(s)
            out.append((arc.holonomy(u), arc.holonomy(v)))
    return out
