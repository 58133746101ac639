#!/usr/bin/env python3
"""De-Sitter plane dS^2 in its hyperboloid and projective models.

Hyperboloid: {p : q(p) = 1} in R^{1,2}. Projective model: pairs (u, v) of
distinct points of RP^1, the point being

    p(u, v) = (uv - 1, u + v, uv + 1) / (v - u).

u is the alpha coordinate (its fibers u = const are the alpha lightlike
leaves) and v the beta coordinate. The future of a chart point points along
du > 0 > dv. The chart basis (d/du, d/dv) is positively oriented for the
orientation induced by the outward normal of the hyperboloid.

RP^1 points are carried as homogeneous pairs (a, b) ~ a / b so that the point
at infinity needs no special casing; ``rp1`` and ``rp1_value`` convert.

This module also holds the chart curves shared by the surface modules: every
curve is a pair of homographies s -> (U(s), V(s)). Timelike geodesics are
images of the standard geodesic z -> (z, -z), z > 0, whose arc length
between z1 and z2 is log(z2 / z1).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.spatial.distance import cdist

from lorentz_kernel import (
    E3,
    EPS_ALG,
    GeometryError,
    Isometry,
    MinkPlane,
    VectorLike,
    as_vector,
    classify,
    classify_plane,
    inner,
    q_form,
)

logger = logging.getLogger("ds2_geometry")

INF = float("inf")
EPS_TANGENT = 1e-9
EPS_DET = 1e-12
# above this entry size det(m) is dominated by cancellation
DET_RESCALE_LIMIT = 1e6
EPS_SAME_POINT = 1e-9
CLOSURE_SAMPLES = 2001
# closures closer than this on the sphere of directions count as touching
CLOSURE_GAP = 1e-2
AREA_QUAD_TOL = 1e-12

# ----------------------------------------------------------------------------
# RP^1 helpers
# ----------------------------------------------------------------------------


def rp1(t: float) -> np.ndarray:
    """Homogeneous representative of t in R u {inf}."""
    if math.isinf(t):
        return np.array([1.0, 0.0])
    return np.array([float(t), 1.0])


def rp1_value(h: Sequence[float]) -> float:
    a, b = float(h[0]), float(h[1])
    if b == 0.0 or abs(b) < 1e-300 or abs(a) > 1e300 * abs(b):
        return INF
    return a / b


def bracket(p: Sequence[float], q: Sequence[float]) -> float:
    return float(p[0] * q[1] - p[1] * q[0])


def null_vector(h: Sequence[float]) -> np.ndarray:
    """Future lightlike vector l(a, b) = ((a^2 - b^2)/2, ab, (a^2 + b^2)/2)."""
    a, b = float(h[0]), float(h[1])
    return np.array([(a * a - b * b) / 2.0, a * b, (a * a + b * b) / 2.0])


def boundary_to_rp1(n: VectorLike) -> np.ndarray:
    """RP^1 point of a nonzero lightlike vector (future or past)."""
    x, y, z = as_vector(n)
    if z < 0:
        x, y, z = -x, -y, -z
    # l(a, b): z + x = a^2, z - x = b^2, y = ab
    if z + x >= z - x:
        a = math.sqrt(max(z + x, 0.0))
        return np.array([a, y / a]) if a > 0 else np.array([0.0, 1.0])
    b = math.sqrt(max(z - x, 0.0))
    return np.array([y / b, b])


def proj_point_vector(u: float, v: float) -> np.ndarray:
    return proj_point_homogeneous(rp1(u), rp1(v))


def proj_point_homogeneous(hu: Sequence[float], hv: Sequence[float]) -> np.ndarray:
    a1, b1 = float(hu[0]), float(hu[1])
    a2, b2 = float(hv[0]), float(hv[1])
    den = a2 * b1 - a1 * b2
    if abs(den) < 1e-14 * max(1.0, abs(a1 * a2), abs(b1 * b2)):
        raise GeometryError("diagonal pair: u = v is not a point of dS^2")
    return np.array([a1 * a2 - b1 * b2, a1 * b2 + a2 * b1, a1 * a2 + b1 * b2]) / den


def chart_inner(u: float, v: float, u0: float, v0: float) -> float:
    """<p(u, v), p(u0, v0)> for finite chart points."""
    return -((u - u0) * (v - v0) + (u - v0) * (v - u0)) / ((v - u) * (v0 - u0))


def chart_tangent(u: float, v: float, du: float, dv: float) -> np.ndarray:
    """Minkowski image of the chart vector (du, dv) at the finite point (u, v)."""
    k = 2.0 / (u - v) ** 2
    return k * (du * null_vector(rp1(v)) - dv * null_vector(rp1(u)))


# ----------------------------------------------------------------------------
# Point types
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DsPoint:
    v: tuple

    @classmethod
    def of(cls, v: VectorLike, tol: float = 1e-8) -> "DsPoint":
        arr = as_vector(v)
        if abs(q_form(arr) - 1.0) > tol:
            raise GeometryError(f"not a point of dS^2: q = {q_form(arr):.12g}")
        return cls(tuple(float(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.v)


@dataclass(frozen=True)
class BoundaryPoint:
    """Lightlike vector normalized to z = +1 (future) or z = -1 (past)."""

    v: tuple

    @classmethod
    def of(cls, n: VectorLike) -> "BoundaryPoint":
        arr = as_vector(n)
        if abs(arr[2]) < EPS_ALG:
            raise GeometryError("boundary vector with z = 0")
        arr = arr / abs(arr[2])
        if abs(q_form(arr)) > 1e-8:
            raise GeometryError("boundary vector is not lightlike")
        return cls(tuple(float(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.v)

    @property
    def is_future(self) -> bool:
        return self.v[2] > 0

    def rp1(self) -> np.ndarray:
        return boundary_to_rp1(self.array)


@dataclass(frozen=True)
class ProjPoint:
    u: float
    v: float

    def __post_init__(self) -> None:
        if not math.isinf(self.u) and not math.isinf(self.v) and self.u == self.v:
            raise GeometryError("diagonal pair: u = v")
        if math.isinf(self.u) and math.isinf(self.v):
            raise GeometryError("diagonal pair: u = v = inf")

    @property
    def finite(self) -> bool:
        return not (math.isinf(self.u) or math.isinf(self.v))


# ----------------------------------------------------------------------------
# PSL(2, R)
# ----------------------------------------------------------------------------


def _sign_normalized(mat: np.ndarray) -> np.ndarray:
    # sign representative: largest entry positive
    k = int(np.argmax(np.abs(mat)))
    return -mat if mat.flat[k] < 0 else mat


@dataclass(frozen=True)
class Mobius:
    """Element of PSL(2, R); stored with det = 1, compared up to sign."""

    m: np.ndarray

    def __post_init__(self) -> None:
        mat = np.array(self.m, dtype=float).reshape(2, 2)
        scale = float(np.max(np.abs(mat))) ** 2
        det = float(np.linalg.det(mat))
        if not (np.isfinite(det) and np.isfinite(scale)) or det <= EPS_DET * scale:
            raise GeometryError(f"not in PSL(2,R): det = {det:.6g} at entry scale {scale:.3g}")
        object.__setattr__(self, "m", _sign_normalized(mat / math.sqrt(det)))

    @classmethod
    def _unimodular(cls, mat: np.ndarray) -> "Mobius":
        """Wrap a product of det-1 matrices without recomputing its determinant from scratch."""
        if not np.all(np.isfinite(mat)):
            raise GeometryError("Mobius product overflowed")
        if float(np.max(np.abs(mat))) ** 2 < DET_RESCALE_LIMIT:
            det = float(np.linalg.det(mat))
            if det > 0:
                mat = mat / math.sqrt(det)
        out = object.__new__(cls)
        object.__setattr__(out, "m", _sign_normalized(mat))
        return out

    @classmethod
    def identity(cls) -> "Mobius":
        return cls(np.eye(2))

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return Mobius._unimodular(self.m @ other.m)

    def inverse(self) -> "Mobius":
        a, b, c, d = self.m.flat
        return Mobius._unimodular(np.array([[d, -b], [-c, a]]))

    def power(self, n: int) -> "Mobius":
        out = Mobius.identity()
        base = self if n >= 0 else self.inverse()
        for _ in range(abs(n)):
            out = out @ base
        return out

    @property
    def trace(self) -> float:
        return float(self.m[0, 0] + self.m[1, 1])

    def apply_h(self, h: Sequence[float]) -> np.ndarray:
        out = self.m @ np.asarray(h, dtype=float)
        return out / max(abs(out[0]), abs(out[1]))

    def __call__(self, t: float) -> float:
        return rp1_value(self.apply_h(rp1(t)))

    def derivative(self, t: float) -> float:
        c, d = self.m[1, 0], self.m[1, 1]
        return 1.0 / (c * t + d) ** 2

    def distance(self, other: "Mobius") -> float:
        return float(min(np.max(np.abs(self.m - other.m)), np.max(np.abs(self.m + other.m))))

    def equals(self, other: "Mobius", tol: float = 1e-9) -> bool:
        return self.distance(other) <= tol

    def is_hyperbolic(self, tol: float = 1e-12) -> bool:
        return abs(self.trace) > 2.0 + tol

    def fixed_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(repelling, attracting) homogeneous fixed points of a hyperbolic element."""
        if not self.is_hyperbolic():
            raise GeometryError(f"element is not hyperbolic (trace {self.trace:.12g})")
        vals, vecs = np.linalg.eig(self.m)
        order = np.argsort(np.abs(vals.real))
        rep, att = vecs[:, order[0]].real, vecs[:, order[1]].real
        return rep / np.linalg.norm(rep), att / np.linalg.norm(att)

    def translation_length(self) -> float:
        return 2.0 * math.acosh(max(abs(self.trace) / 2.0, 1.0))

    def to_list(self) -> list[list[float]]:
        return [[float(x) for x in row] for row in self.m]


def three_point_map(src: Sequence[Sequence[float]], dst: Sequence[Sequence[float]]) -> Mobius:
    """The orientation preserving homography sending src[i] to dst[i] (homogeneous)."""

    def normalizer(z: Sequence[Sequence[float]]) -> np.ndarray:
        z1, z2, z3 = (np.asarray(p, dtype=float) for p in z)
        k1, k2 = bracket(z3, z2), bracket(z3, z1)
        return np.array([[k1 * z1[1], -k1 * z1[0]], [k2 * z2[1], -k2 * z2[0]]])

    fz, fw = normalizer(src), normalizer(dst)
    mat = np.linalg.solve(fw, fz)
    det = float(np.linalg.det(mat))
    if not det > 0:
        raise GeometryError("no orientation preserving homography for these triples")
    return Mobius(mat)


def isometry_of(m: Mobius) -> Isometry:
    """SO0(1,2) image of m through S -> m S m^T on S = [[z+x, y], [y, z-x]]."""
    mat = m.m
    cols = []
    for e in np.eye(3):
        x, y, z = e
        s = np.array([[z + x, y], [y, z - x]])
        t = mat @ s @ mat.T
        cols.append([(t[0, 0] - t[1, 1]) / 2.0, t[0, 1], (t[0, 0] + t[1, 1]) / 2.0])
    return Isometry(np.array(cols).T)


def mobius_of(g: Isometry) -> Mobius:
    """Inverse of ``isometry_of``: read the columns from g l(1,0) and g l(0,1)."""
    col_a = boundary_to_rp1(g.apply(null_vector((1.0, 0.0))))
    col_b = boundary_to_rp1(g.apply(null_vector((0.0, 1.0))))
    mat = np.column_stack([col_a, col_b])
    if np.linalg.det(mat) < 0:
        mat[:, 1] = -mat[:, 1]
    return Mobius(mat)


# ----------------------------------------------------------------------------
# Projective model
# ----------------------------------------------------------------------------


def _tangent_roots(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # <p, l(t)> = ((px - pz) t^2 + 2 py t - (px + pz)) / 2
    A, B, C = p[0] - p[2], 2.0 * p[1], -(p[0] + p[2])
    disc = B * B - 4.0 * A * C
    root = math.sqrt(max(disc, 0.0))
    qq = -0.5 * (B + math.copysign(root, B if B != 0 else 1.0))
    return np.array([qq, A]), np.array([C, qq])


def to_projective(p: DsPoint | VectorLike) -> ProjPoint:
    arr = p.array if isinstance(p, DsPoint) else as_vector(p)
    r1, r2 = _tangent_roots(arr)
    cand = proj_point_homogeneous(r1, r2)
    if inner(cand, arr) < 0:
        r1, r2 = r2, r1
    return ProjPoint(rp1_value(r1), rp1_value(r2))


def from_projective(pp: ProjPoint) -> DsPoint:
    return DsPoint(tuple(proj_point_vector(pp.u, pp.v)))


def _calibrate_metric_constant() -> float:
    """Normalization of ds^2 = lam du dv / (u - v)^2 matching the hyperboloid.

    Along the antidiagonal v = -u the projective length between u = 1 and
    u = e is (sqrt(lam) / 2) * log(e); compare with the hyperboloid distance.
    """
    p1 = proj_point_vector(1.0, -1.0)
    p2 = proj_point_vector(math.e, -math.e)
    d = math.acosh(inner(p1, p2))
    return (2.0 * d / math.log(math.e)) ** 2


METRIC_LAMBDA = _calibrate_metric_constant()


def invariant_metric(pp: ProjPoint) -> np.ndarray:
    """Components of lam du dv / (u - v)^2 as a symmetric 2x2 matrix."""
    if not pp.finite:
        raise GeometryError("metric components need a finite chart point")
    k = METRIC_LAMBDA / (2.0 * (pp.u - pp.v) ** 2)
    return np.array([[0.0, k], [k, 0.0]])


def metric_constant_at(pp: ProjPoint, h: float = 1e-5) -> float:
    """Pullback oracle: lam recovered from the hyperboloid at a chart point."""
    du = (proj_point_vector(pp.u + h, pp.v + h) - proj_point_vector(pp.u - h, pp.v - h)) / (2 * h)
    # direction (1, 1): ds^2 = lam / (u - v)^2
    return q_form(du) * (pp.u - pp.v) ** 2


def area_element(u: float, v: float) -> float:
    return METRIC_LAMBDA / (2.0 * (u - v) ** 2)


def lightlike_rectangle_area(a: float, b: float, c: float, d: float) -> float:
    """Area of [a, b] x [c, d] in the chart (u in [a, b], v in [c, d], off-diagonal)."""
    return (METRIC_LAMBDA / 2.0) * abs(
        math.log(abs((b - d) * (a - c) / ((a - d) * (b - c))))
    )


# ----------------------------------------------------------------------------
# Geodesics in the hyperboloid
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Geodesic:
    plane: MinkPlane
    causal_type: str  # timelike | lightlike-alpha | lightlike-beta | spacelike
    component: int
    orientation: int
    point: tuple
    direction: tuple

    def at(self, t: float) -> np.ndarray:
        p, w = np.array(self.point), np.array(self.direction)
        if self.causal_type == "timelike":
            return math.cosh(t) * p + math.sinh(t) * w
        if self.causal_type == "spacelike":
            return math.cos(t) * p + math.sin(t) * w
        return p + t * w


def _timelike_plane_frame(plane: MinkPlane) -> tuple[np.ndarray, np.ndarray]:
    """(p, w): unit spacelike p and future unit timelike w spanning the plane."""
    n = plane.normal()
    qn = q_form(n)
    w = E3 + (n[2] / qn) * n  # projection of e3 along n
    w = w / math.sqrt(-q_form(w))
    a, b = plane.basis
    p = a + inner(a, w) * w
    if q_form(p) < 1e-12:
        p = b + inner(b, w) * w
    return p / math.sqrt(q_form(p)), w


def _plane_reference(plane: MinkPlane, kind: str) -> np.ndarray:
    if kind == "timelike":
        return _timelike_plane_frame(plane)[0]
    a, b = plane.basis
    return a if abs(q_form(a)) > abs(q_form(b)) else b


def geodesic_through(p: DsPoint | VectorLike, direction: VectorLike) -> Geodesic:
    pt = p.array if isinstance(p, DsPoint) else as_vector(p)
    w = as_vector(direction)
    if np.linalg.norm(w) < EPS_ALG:
        raise GeometryError("zero direction")
    if abs(inner(pt, w)) > EPS_TANGENT * max(1.0, float(np.linalg.norm(w))):
        raise GeometryError("direction is not tangent to dS^2 at the point")
    plane = MinkPlane.span(pt, w)
    cls = classify(w)
    if cls.is_timelike:
        w = w / math.sqrt(-q_form(w))
        ref = _plane_reference(plane, "timelike")
        comp = 1 if inner(pt, ref) > 0 else -1
        return Geodesic(plane, "timelike", comp, 1 if cls.is_future else -1, tuple(pt), tuple(w))
    if cls.is_lightlike:
        proj = to_projective(pt)
        h = boundary_to_rp1(w)
        hu = rp1(proj.u)
        kind = "lightlike-alpha" if abs(bracket(h, hu)) < 1e-8 * np.linalg.norm(h) * np.linalg.norm(hu) else "lightlike-beta"
        ref = _plane_reference(plane, "lightlike")
        comp = 1 if inner(pt, ref) > 0 else -1
        return Geodesic(plane, kind, comp, 1 if cls.is_future else -1, tuple(pt), tuple(w))
    w = w / math.sqrt(q_form(w))
    normal = np.cross(pt, w)
    orient = 1 if float(normal @ plane.normal()) * 1.0 >= 0 else -1
    return Geodesic(plane, "spacelike", 1, orient, tuple(pt), tuple(w))


def timelike_distance(p: DsPoint | VectorLike, q: DsPoint | VectorLike) -> float:
    a = p.array if isinstance(p, DsPoint) else as_vector(p)
    b = q.array if isinstance(q, DsPoint) else as_vector(q)
    if np.allclose(a, b, atol=EPS_SAME_POINT):
        return 0.0
    c = inner(a, b)
    # <p, q> = 1 for distinct points means a lightlike relation
    if not c > 1.0 + EPS_SAME_POINT:
        raise GeometryError(f"points are not timelike related (<p, q> = {c:.12g})")
    return math.acosh(c)


def limit_points(g: Geodesic) -> tuple[BoundaryPoint, BoundaryPoint]:
    """(future limit, past limit) of a timelike geodesic."""
    if g.causal_type != "timelike":
        raise GeometryError(f"limit points need a timelike geodesic, got {g.causal_type}")
    p, w = np.array(g.point), np.array(g.direction)
    if w[2] < 0:
        w = -w
    return BoundaryPoint.of(p + w), BoundaryPoint.of(p - w)


@dataclass
class PlanePairConfiguration:
    intersection: str
    line: np.ndarray
    # (component of L1, component of L2) -> future-asymptotic | past-asymptotic | meet | none
    pairs: dict = field(default_factory=dict)
    # sampled distance between component closures, keyed by names like ("L1+", "L2-")
    gaps: dict = field(default_factory=dict)

    @property
    def closures_disjoint(self) -> bool:
        return bool(self.gaps) and min(self.gaps.values()) > CLOSURE_GAP


def _timelike_components(plane: MinkPlane) -> dict[int, Geodesic]:
    p, w = _timelike_plane_frame(plane)
    return {
        1: Geodesic(plane, "timelike", 1, 1, tuple(p), tuple(w)),
        -1: Geodesic(plane, "timelike", -1, 1, tuple(-p), tuple(w)),
    }


def closure_samples(g: Geodesic, n: int = CLOSURE_SAMPLES) -> np.ndarray:
    """Points of the closure of a timelike geodesic on the sphere of directions, limit points included."""
    p, w = np.array(g.point), np.array(g.direction)
    tau = np.linspace(-1.0, 1.0, n)
    # g(t) / cosh t = p + tanh(t) w
    pts = p[None, :] + tau[:, None] * w[None, :]
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def closure_gap(g1: Geodesic, g2: Geodesic, n: int = CLOSURE_SAMPLES) -> float:
    return float(cdist(closure_samples(g1, n), closure_samples(g2, n)).min())


def _closure_gaps(comps1: dict[int, Geodesic], comps2: dict[int, Geodesic]) -> dict[tuple[str, str], float]:
    named = {f"L1{'+' if i > 0 else '-'}": g for i, g in comps1.items()}
    named.update({f"L2{'+' if j > 0 else '-'}": g for j, g in comps2.items()})
    keys = sorted(named)
    return {(a, b): closure_gap(named[a], named[b]) for k, a in enumerate(keys) for b in keys[k + 1 :]}


def plane_pair_configuration(L1: MinkPlane, L2: MinkPlane) -> PlanePairConfiguration:
    for plane in (L1, L2):
        if classify_plane(plane) != "timelike":
            raise GeometryError("plane_pair_configuration expects timelike planes")
    a1, b1 = L1.basis
    a2, b2 = L2.basis
    n1, n2 = np.cross(a1, b1), np.cross(a2, b2)
    d = np.cross(n1 / np.linalg.norm(n1), n2 / np.linalg.norm(n2))
    if np.linalg.norm(d) < 1e-9:
        raise GeometryError("planes are equal")
    d = d / np.linalg.norm(d)
    kind = classify(d, tol=1e-9)
    comps1, comps2 = _timelike_components(L1), _timelike_components(L2)
    config = PlanePairConfiguration("", d, gaps=_closure_gaps(comps1, comps2))
    if kind == kind.SPACELIKE:
        config.intersection = "spacelike"
        dh = d / math.sqrt(q_form(d))
        ref1, ref2 = _plane_reference(L1, "timelike"), _plane_reference(L2, "timelike")
        meets = set()
        for x in (dh, -dh):
            meets.add((1 if inner(x, ref1) > 0 else -1, 1 if inner(x, ref2) > 0 else -1))
        for i in comps1:
            for j in comps2:
                config.pairs[(i, j)] = "meet" if (i, j) in meets else "none"
        return config
    if kind.is_timelike:
        config.intersection = "timelike"
        for i in comps1:
            for j in comps2:
                gap = config.gaps[(f"L1{'+' if i > 0 else '-'}", f"L2{'+' if j > 0 else '-'}")]
                config.pairs[(i, j)] = "none" if gap > CLOSURE_GAP else "meet"
        if not config.closures_disjoint:
            logger.warning("sampled closures touch for planes meeting in a timelike line: %s", config.gaps)
        return config
    config.intersection = "lightlike"
    for i, g1 in comps1.items():
        f1, p1 = limit_points(g1)
        for j, g2 in comps2.items():
            f2, p2 = limit_points(g2)
            if np.allclose(f1.array, f2.array, atol=1e-8):
                config.pairs[(i, j)] = "future-asymptotic"
            elif np.allclose(p1.array, p2.array, atol=1e-8):
                config.pairs[(i, j)] = "past-asymptotic"
            else:
                config.pairs[(i, j)] = "none"
    return config


# ----------------------------------------------------------------------------
# Angles
# ----------------------------------------------------------------------------


def lorentz_angle(X: VectorLike, Y: VectorLike, at: DsPoint | VectorLike) -> float:
    """Signed Lorentzian angle from X to Y, unit timelike tangents at ``at``."""
    p = at.array if isinstance(at, DsPoint) else as_vector(at)
    x, y = as_vector(X), as_vector(Y)
    for vec in (x, y):
        if abs(q_form(vec) + 1.0) > 1e-7:
            raise GeometryError("angle arguments must be unit timelike vectors")
        if abs(inner(vec, p)) > 1e-7:
            raise GeometryError("angle arguments must be tangent at the base point")
    c = inner(x, y)
    if c > 0:
        y = -y
        c = -c
    sign = np.sign(np.linalg.det(np.array([p, x, y])))
    return float(sign) * math.acosh(max(-c, 1.0))


# ----------------------------------------------------------------------------
# Chart curves
# ----------------------------------------------------------------------------

DIAG_FLIP = np.diag([-1.0, 1.0])


@dataclass(frozen=True)
class ChartCurve:
    """s -> (mu(s, 1), nu(s, 1)) in homogeneous coordinates.

    kind "geodesic": timelike geodesic, s = z > 0 is exp(arc length) and
    increasing s is the future. kind "alpha": u constant, v = v0 - s.
    kind "beta": v constant, u = u0 + s. kind "line": affine chart segment.
    """

    mu: np.ndarray
    nu: np.ndarray
    kind: str

    def homogeneous(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        h = np.array([s, 1.0])
        return self.mu @ h, self.nu @ h

    def uv(self, s: float) -> tuple[float, float]:
        hu, hv = self.homogeneous(s)
        return rp1_value(hu), rp1_value(hv)

    def velocity(self, s: float) -> tuple[float, float]:
        out = []
        for mat in (self.mu, self.nu):
            c, d = mat[1, 0], mat[1, 1]
            out.append(float(np.linalg.det(mat)) / (c * s + d) ** 2)
        return out[0], out[1]

    def transformed(self, g: "Mobius") -> "ChartCurve":
        return ChartCurve(g.m @ self.mu, g.m @ self.nu, self.kind)

    def rebased(self, s: float) -> "ChartCurve":
        """Same curve reparametrized so that the current point is s = 1 (geodesics) or 0.

        A leaf carried through a gluing has a projective parameter whose pole
        may come before its next crossing, so leaves restart as affine leaves
        through the current point, running the same way.
        """
        if self.kind == "geodesic":
            shift = np.diag([s, 1.0])
            return ChartCurve(self.mu @ shift, self.nu @ shift, self.kind)
        if self.kind in ("alpha", "beta"):
            u, v = self.uv(s)
            if math.isfinite(u) and math.isfinite(v):
                return self._affine_leaf(u, v)
        shift = np.array([[1.0, s], [0.0, 1.0]])
        return ChartCurve(self.mu @ shift, self.nu @ shift, self.kind)

    def _affine_leaf(self, u: float, v: float) -> "ChartCurve":
        if self.kind == "alpha":
            sigma = math.copysign(1.0, float(np.linalg.det(self.nu)))
            c = rp1(u)
            return ChartCurve(np.array([[0.0, c[0]], [0.0, c[1]]]), np.array([[sigma, v], [0.0, 1.0]]), "alpha")
        sigma = math.copysign(1.0, float(np.linalg.det(self.mu)))
        c = rp1(v)
        return ChartCurve(np.array([[sigma, u], [0.0, 1.0]]), np.array([[0.0, c[0]], [0.0, c[1]]]), "beta")

    @property
    def start(self) -> float:
        return 1.0 if self.kind == "geodesic" else 0.0

    def form(self) -> np.ndarray:
        """Q with F(u, v) = (u, 1) Q (v, 1)^T vanishing on the curve."""
        if self.kind == "alpha":
            c = self.mu @ np.array([0.0, 1.0])
            return np.array([[0.0, c[1]], [0.0, -c[0]]])
        if self.kind == "beta":
            c = self.nu @ np.array([0.0, 1.0])
            return np.array([[0.0, 0.0], [c[1], -c[0]]])
        if self.kind == "geodesic":
            rep = self.mu @ np.array([0.0, 1.0])
            att = self.mu @ np.array([1.0, 0.0])
            return symmetric_form(rep, att)
        # v = N(u) with N = nu mu^-1
        n = self.nu @ np.linalg.inv(self.mu)
        return np.array([[n[1, 0], -n[0, 0]], [n[1, 1], -n[0, 1]]])

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """(past, future) boundary points of a geodesic, homogeneous."""
        return self.mu @ np.array([0.0, 1.0]), self.mu @ np.array([1.0, 0.0])

    # constructors -------------------------------------------------------

    @classmethod
    def geodesic(cls, e_minus: Sequence[float], e_plus: Sequence[float], u_point: float) -> "ChartCurve":
        """Timelike geodesic with past/future endpoints through the point with u = u_point.

        The endpoints are swapped when needed so that the parametrization is
        orientation preserving, which puts u_point on the future-running component.
        """
        em, ep = np.asarray(e_minus, float), np.asarray(e_plus, float)
        try:
            a = three_point_map([(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)], [em, ep, rp1(u_point)])
        except GeometryError:
            a = three_point_map([(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)], [ep, em, rp1(u_point)])
        return cls(a.m.copy(), a.m @ DIAG_FLIP, "geodesic")

    @classmethod
    def axis(cls, e_minus: Sequence[float], e_plus: Sequence[float]) -> "ChartCurve":
        """Component of the geodesic on which u runs positively from e_minus to e_plus."""
        mat = np.column_stack([np.asarray(e_plus, float), np.asarray(e_minus, float)])
        if np.linalg.det(mat) < 0:
            mat[:, 1] = -mat[:, 1]
        mat = mat / math.sqrt(np.linalg.det(mat))
        return cls(mat, mat @ DIAG_FLIP, "geodesic")

    @classmethod
    def geodesic_from_tangent(cls, u0: float, v0: float, du: float, dv: float) -> "ChartCurve":
        if not (du * dv < 0):
            raise GeometryError("tangent is not timelike")
        if du < 0:
            du, dv = -du, -dv
        r1 = np.array([u0 * v0, -(u0 + v0), -1.0])
        r2 = np.array([v0 * du + u0 * dv, -(du + dv), 0.0])
        c, a, b = np.cross(r1, r2)
        q = np.array([[c, -a], [-a, -b]])
        e1, e2 = form_fixed_points(q)
        curve = cls.geodesic(e1, e2, u0)
        # make the future component pass through (u0, v0)
        uu, vv = curve.uv(1.0)
        if abs(vv - v0) > 1e-8 * max(1.0, abs(v0)):
            raise GeometryError("failed to place the point on its geodesic")
        return curve

    @classmethod
    def through_points(cls, p: tuple[float, float], q: tuple[float, float]) -> tuple["ChartCurve", float]:
        """Geodesic through two timelike related finite chart points; returns (curve, s_q) with s_p = 1."""
        r1 = np.array([p[0] * p[1], -(p[0] + p[1]), -1.0])
        r2 = np.array([q[0] * q[1], -(q[0] + q[1]), -1.0])
        c, a, b = np.cross(r1, r2)
        form = np.array([[c, -a], [-a, -b]])
        e1, e2 = form_fixed_points(form)
        curve = cls.geodesic(e1, e2, p[0])
        s_q = curve.parameter_of_u(q[0])
        if not s_q > 0:
            raise GeometryError("points lie on different components; no timelike segment")
        return curve, s_q

    @classmethod
    def alpha_leaf(cls, u: float, v0: float) -> "ChartCurve":
        c = rp1(u)
        return cls(np.array([[0.0, c[0]], [0.0, c[1]]]), np.array([[-1.0, v0], [0.0, 1.0]]), "alpha")

    @classmethod
    def beta_leaf(cls, u0: float, v: float) -> "ChartCurve":
        c = rp1(v)
        return cls(np.array([[1.0, u0], [0.0, 1.0]]), np.array([[0.0, c[0]], [0.0, c[1]]]), "beta")

    @classmethod
    def line(cls, u0: float, v0: float, du: float, dv: float) -> "ChartCurve":
        return cls(np.array([[du, u0], [0.0, 1.0]]), np.array([[dv, v0], [0.0, 1.0]]), "line")

    def parameter_of_u(self, u: float) -> float:
        """Parameter s with U(s) = u (geodesics and beta leaves)."""
        h = np.linalg.solve(self.mu, rp1(u))
        return rp1_value(h)

    def parameter_at(self, u: float, v: float) -> float:
        """Parameter of a point lying on the curve (alpha leaves are solved through v)."""
        if self.kind == "alpha":
            return rp1_value(np.linalg.solve(self.nu, rp1(v)))
        return self.parameter_of_u(u)

    def arc_length(self, s0: float, s1: float) -> float:
        if self.kind != "geodesic":
            return 0.0
        return math.log(s1 / s0) * math.sqrt(METRIC_LAMBDA) / 2.0


def symmetric_form(e1: Sequence[float], e2: Sequence[float]) -> np.ndarray:
    """Q of the geodesic with boundary points e1, e2: F(u, u) = 2 (b1 u - a1)(b2 u - a2)."""
    a1, b1 = float(e1[0]), float(e1[1])
    a2, b2 = float(e2[0]), float(e2[1])
    off = -(a1 * b2 + a2 * b1)
    return np.array([[2.0 * b1 * b2, off], [off, 2.0 * a1 * a2]])


def form_fixed_points(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Roots of F(t, t) = 0 for a symmetric Q, homogeneous."""
    A, B, C = q[0, 0], q[0, 1] + q[1, 0], q[1, 1]
    disc = B * B - 4.0 * A * C
    if disc <= 0:
        raise GeometryError("form has no real boundary points (not timelike)")
    root = math.sqrt(disc)
    qq = -0.5 * (B + math.copysign(root, B if B != 0 else 1.0))
    return np.array([qq, A]), np.array([C, qq])


def form_value(q: np.ndarray, u: float, v: float) -> float:
    return float(np.array([u, 1.0]) @ q @ np.array([v, 1.0]))


def curve_form_roots(curve: ChartCurve, q: np.ndarray) -> list[float]:
    """Parameters where the curve meets F_q = 0 (empty if the curve lies on it)."""
    k = curve.mu.T @ q @ curve.nu
    a, b, c = k[0, 0], k[0, 1] + k[1, 0], k[1, 1]
    scale = max(abs(a), abs(b), abs(c))
    if scale < 1e-300:
        return []
    a, b, c = a / scale, b / scale, c / scale
    if abs(a) < 1e-14:
        if abs(b) < 1e-14:
            return []
        return [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc > -1e-13:
            return [-b / (2 * a)]
        return []
    root = math.sqrt(disc)
    qq = -0.5 * (b + math.copysign(root, b if b != 0 else 1.0))
    out = [qq / a]
    if qq != 0:
        out.append(c / qq)
    return sorted(out)


def forms_intersections(q1: np.ndarray, q2: np.ndarray) -> list[tuple[float, float]]:
    """Finite chart points where F_q1 = F_q2 = 0."""
    # F(u, v) = v (Q11 u + Q21) + (Q12 u + Q22)
    a = q1[0, 1] * q2[0, 0] - q2[0, 1] * q1[0, 0]
    b = q1[0, 1] * q2[1, 0] + q1[1, 1] * q2[0, 0] - q2[0, 1] * q1[1, 0] - q2[1, 1] * q1[0, 0]
    c = q1[1, 1] * q2[1, 0] - q2[1, 1] * q1[1, 0]
    us: list[float] = []
    if abs(a) > 1e-14:
        disc = b * b - 4 * a * c
        if disc >= 0:
            r = math.sqrt(disc)
            us = [(-b - r) / (2 * a), (-b + r) / (2 * a)]
    elif abs(b) > 1e-14:
        us = [-c / b]
    out = []
    for u in us:
        s1, s2 = q1[0, 0] * u + q1[1, 0], q2[0, 0] * u + q2[1, 0]
        r1, r2 = q1[0, 1] * u + q1[1, 1], q2[0, 1] * u + q2[1, 1]
        if abs(s1) >= abs(s2) and abs(s1) > 1e-14:
            out.append((u, -r1 / s1))
        elif abs(s2) > 1e-14:
            out.append((u, -r2 / s2))
    return out


# ----------------------------------------------------------------------------
# Polygons
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ChartSegment:
    """Piece of a chart curve between parameters s0 and s1 (either order)."""

    curve: ChartCurve
    s0: float
    s1: float

    @property
    def start(self) -> tuple[float, float]:
        return self.curve.uv(self.s0)

    @property
    def end(self) -> tuple[float, float]:
        return self.curve.uv(self.s1)

    @property
    def is_vertical(self) -> bool:
        return self.curve.kind == "alpha"

    def contains(self, u: float, v: float, tol: float = 1e-10) -> bool:
        (ua, va), (ub, vb) = self.start, self.end
        if self.is_vertical:
            lo, hi = min(va, vb), max(va, vb)
            return lo - tol <= v <= hi + tol
        lo, hi = min(ua, ub), max(ua, ub)
        return lo - tol <= u <= hi + tol

    def tangent(self, at_end: bool) -> np.ndarray:
        """Unit Minkowski tangent in the traversal direction s0 -> s1."""
        s = self.s1 if at_end else self.s0
        du, dv = self.curve.velocity(s)
        sign = 1.0 if self.s1 >= self.s0 else -1.0
        u, v = self.curve.uv(s)
        t = sign * chart_tangent(u, v, du, dv)
        qt = q_form(t)
        if qt >= -1e-14:
            raise GeometryError("edge is not timelike; angle undefined")
        return t / math.sqrt(-qt)

    def green_integral(self) -> float:
        """Integral of (lam / 2) du / (v - u) along the segment."""
        k = METRIC_LAMBDA / 2.0
        kind = self.curve.kind
        if kind == "alpha":
            return 0.0
        if kind == "beta":
            (ua, c), (ub, _) = self.start, self.end
            return k * math.log(abs((c - ua) / (c - ub)))

        def integrand(s: float) -> float:
            u, v = self.curve.uv(s)
            du, _ = self.curve.velocity(s)
            return k * du / (v - u)

        value, _ = quad(integrand, self.s0, self.s1, epsabs=AREA_QUAD_TOL, epsrel=AREA_QUAD_TOL, limit=200)
        return float(value)


def segment_between(p: tuple[float, float], q: tuple[float, float]) -> ChartSegment:
    """Lightlike or timelike chart segment from p to q."""
    if abs(p[0] - q[0]) < 1e-15:
        return ChartSegment(ChartCurve.alpha_leaf(p[0], p[1]), 0.0, p[1] - q[1])
    if abs(p[1] - q[1]) < 1e-15:
        return ChartSegment(ChartCurve.beta_leaf(p[0], p[1]), 0.0, q[0] - p[0])
    curve, s_q = ChartCurve.through_points(p, q)
    return ChartSegment(curve, 1.0, s_q)


@dataclass
class TimelikePolygon:
    """Closed chart polygon; edge i runs from vertices[i] to vertices[i + 1]."""

    vertices: list[ProjPoint]
    edges: list[ChartSegment] = field(default_factory=list)

    @classmethod
    def from_vertices(cls, vertices: Iterable[ProjPoint]) -> "TimelikePolygon":
        verts = list(vertices)
        if len(verts) < 2:
            return cls(verts, [])
        edges = [
            segment_between((a.u, a.v), (b.u, b.v))
            for a, b in zip(verts, verts[1:] + verts[:1])
        ]
        return cls(verts, edges)

    def transformed(self, g: Mobius) -> "TimelikePolygon":
        return TimelikePolygon.from_vertices(ProjPoint(g(p.u), g(p.v)) for p in self.vertices)

    @property
    def edge_kinds(self) -> list[str]:
        return [e.curve.kind for e in self.edges]


def _self_intersecting(poly: TimelikePolygon) -> bool:
    n = len(poly.edges)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            e1, e2 = poly.edges[i], poly.edges[j]
            for u, v in forms_intersections(e1.curve.form(), e2.curve.form()):
                if e1.contains(u, v, -1e-12) and e2.contains(u, v, -1e-12):
                    return True
    return False


def signed_area(poly: TimelikePolygon) -> float:
    """Green form: counterclockwise boundaries give positive area."""
    return float(sum(e.green_integral() for e in poly.edges))


def polygon_area(poly: TimelikePolygon) -> float:
    if len(poly.edges) < 3:
        return 0.0
    if _self_intersecting(poly):
        raise GeometryError("self-intersecting polygon boundary")
    return abs(signed_area(poly))


def exterior_angles(poly: TimelikePolygon) -> list[float]:
    n = len(poly.edges)
    out = []
    for i in range(n):
        t_in = poly.edges[i - 1].tangent(at_end=True)
        t_out = poly.edges[i].tangent(at_end=False)
        at = proj_point_vector(poly.vertices[i].u, poly.vertices[i].v)
        out.append(lorentz_angle(t_in, t_out, at))
    return out


def gauss_bonnet_residual(poly: TimelikePolygon, angles: Optional[Sequence[float]] = None) -> float:
    """|area - sum of exterior angles| for a timelike-edged polygon."""
    if len(poly.edges) < 3:
        raise GeometryError("Gauss-Bonnet needs at least three edges")
    if any(k != "geodesic" for k in poly.edge_kinds):
        raise GeometryError("Gauss-Bonnet needs timelike geodesic edges")
    nus = exterior_angles(poly) if angles is None else list(angles)
    return abs(signed_area(poly) - float(sum(nus)))


def random_timelike_triangle(rng: np.random.Generator, scale: float = 0.3, attempts: int = 100) -> TimelikePolygon:
    """Counterclockwise triangle with timelike geodesic edges near the chart point (1.5, -1.5)."""
    for _ in range(attempts):
        u0, v0 = 1.0 + rng.random(), -1.0 - rng.random()
        a, b, c, d = scale * (0.1 + rng.random(4))
        pts = [(u0, v0), (u0 + a, v0 - b), (u0 + a + c, v0 - b - d)]
        if b * c - a * d < 0:
            pts = [pts[0], pts[2], pts[1]]
        try:
            poly = TimelikePolygon.from_vertices(ProjPoint(u, v) for u, v in pts)
            if all(k == "geodesic" for k in poly.edge_kinds):
                exterior_angles(poly)
                return poly
        except GeometryError:
            continue
    raise GeometryError("no timelike triangle found")
