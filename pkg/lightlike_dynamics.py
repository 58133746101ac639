#!/usr/bin/env python3
"""First-return maps of the lightlike foliations and their asymptotic cycles.

Leaves are traced toward the future: alpha leaves (u constant) with v
decreasing, beta leaves (v constant) with u increasing. The foliations
themselves are oriented by d/dv (alpha) and d/du (beta), the positive chart
basis, so the reported alpha cycle is minus the traced direction and the
future timelike cone is spanned by A(beta) and -A(alpha). A leaf started
on a closed timelike geodesic is traced through the polygon copies until it
meets the geodesic again. In the coordinate zeta = exp(position / f) along
the geodesic every branch of the return map is a single homography

    zeta' = N_j^-1 . H^-1 . N_i (zeta)

where N_i is the chart matrix of the start arc (mu for alpha, nu for beta),
N_j that of the arc hit and H the holonomy of the copy where the hit
happened. Lift indices Z = W_leaf - W_j + W_i split as a.e + m.c, c being
the class of the geodesic; m counts periods along it and a must be the same
on every branch.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Protocol, Sequence

import numpy as np

from chart_tracing import (
    ConePointHit,
    TracingError,
    VertexHit,
    Weight,
    iter_trace,
)
from closed_geodesics import ClosedGeodesic, GeodesicArc, default_transversal
from ds2_geometry import ChartCurve, Mobius, curve_form_roots, rp1
from lorentz_kernel import GeometryError
from surface_builder import LENGTH_FACTOR, SingularTorus

logger = logging.getLogger("lightlike_dynamics")

Foliation = Literal["alpha", "beta"]
FOLIATIONS: tuple[Foliation, Foliation] = ("alpha", "beta")

GRID_POINTS = 400
EPS_BOUNDARY = 1e-12
EPS_CYCLE_ANGLE = 1e-6
DEFAULT_ITERS = 100_000
DEFAULT_TOL = 1e-8
MAX_PERIOD = 64
LEAF_CROSSINGS = 5_000


def _leaf(fol: Foliation, u: float, v: float) -> ChartCurve:
    if fol == "alpha":
        return ChartCurve.alpha_leaf(u, v)
    if fol == "beta":
        return ChartCurve.beta_leaf(u, v)
    raise ValueError(f"unknown foliation {fol!r}")


def complement(c: Weight) -> Weight:
    """Integer e with det(c, e) = 1."""
    a, b = c
    g, x, y = _egcd(a, b)
    if abs(g) != 1:
        raise ValueError(f"class {c} is not primitive")
    # a x + b y = g, det((a, b), (-y, x)) = a x + b y
    return (-y * g, x * g)


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return a, 1, 0
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def _det(p: Sequence[float], q: Sequence[float]) -> float:
    return p[0] * q[1] - p[1] * q[0]


# ----------------------------------------------------------------------------
# Leaf returns
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LeafReturn:
    position: float
    z: Weight
    start_arc: int
    hit_arc: int
    holonomy: Mobius
    ledger: tuple[tuple[int, int], ...]

    @property
    def key(self) -> tuple:
        return (self.start_arc, self.hit_arc, self.ledger, self.z)


def _start_on(torus: SingularTorus, fol: Foliation, transversal: ClosedGeodesic, p: float) -> tuple[int, ChartCurve]:
    f = LENGTH_FACTOR
    L = transversal.primitive_length
    p = p % L
    step = 1e-9 * torus.polygon.scale
    for k, arc in enumerate(transversal.chart_arcs):
        if not arc.position - 1e-12 * L <= p <= arc.position + arc.length + 1e-12 * L:
            continue
        sigma = arc.s0 * math.exp((p - arc.position) / f)
        u, v = arc.curve.uv(sigma)
        leaf = _leaf(fol, u, v)
        if torus.polygon.contains(*leaf.uv(step)):
            return k, leaf
    raise TracingError(f"no representative of position {p:.17g} lets the {fol} leaf into the polygon")


@dataclass(frozen=True)
class TransversalHit:
    position: float
    copy_weight: Weight
    arc: int
    arc_weight: Weight
    holonomy: Mobius
    ledger: tuple[tuple[int, int], ...]

    @property
    def lift(self) -> Weight:
        """Index W - W_arc of the lift of the transversal that was hit."""
        return (self.copy_weight[0] - self.arc_weight[0], self.copy_weight[1] - self.arc_weight[1])


def past_alpha_leaf(u: float, v0: float) -> ChartCurve:
    """Alpha leaf with v = v0 + s."""
    c = rp1(u)
    return ChartCurve(np.array([[0.0, c[0]], [0.0, c[1]]]), np.array([[1.0, v0], [0.0, 1.0]]), "alpha")


def first_transversal_hit(
    torus: SingularTorus, leaf: ChartCurve, transversal: ClosedGeodesic, s_start: Optional[float] = None
) -> TransversalHit:
    """First meeting of a traced leaf with the transversal; the start point itself never counts."""
    arcs = transversal.chart_arcs
    L = transversal.primitive_length
    tol = 1e-12 * torus.polygon.scale
    ledger: list[tuple[int, int]] = []
    start = leaf.start if s_start is None else s_start
    for piece in iter_trace(torus, leaf, start, max_crossings=LEAF_CROSSINGS):
        best: Optional[tuple[float, int, float]] = None
        for j, arc in enumerate(arcs):
            lo, hi = sorted((arc.s0, arc.s1))
            for r in curve_form_roots(piece.curve, arc.curve.form()):
                if not piece.s0 + tol < r <= piece.s1 + tol:
                    continue
                if best is not None and r >= best[0]:
                    continue
                u, _ = piece.curve.uv(r)
                sa = arc.curve.parameter_of_u(u)
                if lo * (1 - 1e-12) <= sa <= hi * (1 + 1e-12):
                    best = (r, j, sa)
        if best is not None:
            _, j, sa = best
            hit = arcs[j]
            return TransversalHit(hit.position_at(sa) % L, piece.weight, j, hit.weight, piece.holonomy, tuple(ledger))
        if piece.exit_sign == 0:
            break
        ledger.append((piece.exit_side, piece.exit_sign))
    raise TracingError("leaf never met the transversal")


def trace_leaf_return(
    torus: SingularTorus, fol: Foliation, transversal: ClosedGeodesic, p: float
) -> LeafReturn:
    """Follow the future leaf from position p until it meets the transversal again."""
    start_k, leaf = _start_on(torus, fol, transversal, p)
    w_start = transversal.chart_arcs[start_k].weight
    try:
        hit = first_transversal_hit(torus, leaf, transversal)
    except TracingError as exc:
        if isinstance(exc, VertexHit):
            raise
        raise TracingError(f"{fol} leaf from position {p:.17g} never returned") from exc
    z = (hit.lift[0] + w_start[0], hit.lift[1] + w_start[1])
    return LeafReturn(hit.position, z, start_k, hit.arc, hit.holonomy, hit.ledger)


# ----------------------------------------------------------------------------
# Return maps
# ----------------------------------------------------------------------------


def _arc_normalizer(arc: GeodesicArc, fol: Foliation) -> np.ndarray:
    mat = arc.curve.mu if fol == "alpha" else arc.curve.nu
    return mat @ np.diag([arc.s0 * math.exp(-arc.position / LENGTH_FACTOR), 1.0])


@dataclass(frozen=True)
class ReturnBranch:
    lo: float
    hi: float
    matrix: np.ndarray
    shift: int
    transverse: int
    key: tuple = field(compare=False, repr=False)

    @property
    def mobius(self) -> Mobius:
        return Mobius(self.matrix)

    def position(self, p: float) -> float:
        f = LENGTH_FACTOR
        a, b, c, d = self.matrix.flat
        zeta = math.exp(p / f)
        return f * math.log((a * zeta + b) / (c * zeta + d))

    def apply(self, p: float, length: float) -> float:
        return self.position(p) + self.shift * length


class CircleLift(Protocol):
    length: float

    def lift(self, p: float) -> float: ...


@dataclass
class FirstReturnMap:
    transversal: Optional[ClosedGeodesic]
    foliation: Foliation
    length: float
    branches: list[ReturnBranch]
    lift_offset: int = 0
    transverse: int = 1
    section_class: Weight = (1, 0)
    cone_boundaries: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.branches.sort(key=lambda b: b.lo)
        self._los = [b.lo for b in self.branches]

    def branch_at(self, p: float) -> ReturnBranch:
        r = p % self.length
        k = max(bisect.bisect_right(self._los, r) - 1, 0)
        return self.branches[k]

    def raw_lift(self, p: float) -> float:
        k = math.floor(p / self.length)
        r = p - k * self.length
        return self.branch_at(r).apply(r, self.length) + k * self.length

    def lift(self, p: float) -> float:
        """Lift normalized so that lift(0) lies in [0, L)."""
        return self.raw_lift(p) - self.lift_offset * self.length

    def __call__(self, p: float) -> float:
        return self.lift(p) % self.length

    def continuity_defect(self) -> float:
        worst = 0.0
        n = len(self.branches)
        for k, br in enumerate(self.branches):
            nxt = self.branches[(k + 1) % n]
            left = br.apply(br.hi, self.length)
            right = nxt.apply(nxt.lo, self.length) + (self.length if k == n - 1 else 0.0)
            worst = max(worst, abs(left - right))
        return worst

    def traced_lift(self, torus: SingularTorus, p: float) -> float:
        """Lift computed by tracing a leaf instead of through the branches."""
        if self.transversal is None:
            raise ValueError("synthetic return map has no transversal to trace")
        ret = trace_leaf_return(torus, self.foliation, self.transversal, p)
        e = complement(self.section_class)
        m = round(_det(ret.z, e))
        r = p % self.length
        return ret.position + m * self.length + (p - r) - self.lift_offset * self.length

    def to_report(self) -> dict:
        return {
            "foliation": self.foliation,
            "length": self.length,
            "branches": [
                {"dom_lo": b.lo, "dom_hi": b.hi, "mobius": b.mobius.to_list(), "shift": b.shift}
                for b in self.branches
            ],
            "flags": list(self.flags),
        }


def _safe_key(torus, fol, transversal, p) -> Optional[LeafReturn]:
    try:
        return trace_leaf_return(torus, fol, transversal, p)
    except ConePointHit:
        return None
    except (TracingError, GeometryError) as exc:
        logger.debug("leaf at %.17g: %s", p, exc)
        return None


def _bisect_boundary(torus, fol, transversal, a: float, ka: tuple, b: float, kb: tuple, tol: float) -> list[float]:
    out: list[float] = []
    stack = [(a, ka, b, kb)]
    while stack:
        a, ka, b, kb = stack.pop()
        if b - a <= tol:
            out.append(0.5 * (a + b))
            continue
        m = 0.5 * (a + b)
        ret = _safe_key(torus, fol, transversal, m)
        km = ret.key if ret is not None else None
        if km == ka:
            stack.append((m, km, b, kb))
        elif km == kb:
            stack.append((a, ka, m, km))
        elif km is None:
            # leaf through the cone point
            out.append(m)
        else:
            stack.append((a, ka, m, km))
            stack.append((m, km, b, kb))
    return out


def first_return_map(
    torus: SingularTorus,
    fol: Foliation,
    transversal: Optional[ClosedGeodesic] = None,
    *,
    grid: int = GRID_POINTS,
) -> FirstReturnMap:
    """Return map of the future ``fol`` leaves on a closed timelike geodesic."""
    if transversal is None:
        transversal = default_transversal(torus)
    L = transversal.primitive_length
    c_t = transversal.primitive_class
    e = complement(c_t)
    tol = EPS_BOUNDARY * L
    samples = [(k + 0.5) * L / grid for k in range(grid)]
    keys = [_safe_key(torus, fol, transversal, p) for p in samples]
    good = [(p, r.key) for p, r in zip(samples, keys) if r is not None]
    if not good:
        raise TracingError(f"no {fol} leaf returned to the transversal")
    bounds: set[float] = {0.0}
    cone_bounds: list[float] = []
    wrapped = good + [(good[0][0] + L, good[0][1])]
    for (pa, ka), (pb, kb) in zip(wrapped, wrapped[1:]):
        if ka == kb:
            continue
        for b in _bisect_boundary(torus, fol, transversal, pa, ka, pb, kb, tol):
            bounds.add(b % L)
    # leaves through the cone point sit where tracing fails outright
    for p, r in zip(samples, keys):
        if r is None:
            cone_bounds.append(p)
    ordered = sorted(bounds)
    merged = [ordered[0]]
    for b in ordered[1:]:
        if b - merged[-1] > 10 * tol and L - b > 10 * tol:
            merged.append(b)
    edges = merged + [L]
    branches = []
    transverse_values = set()
    for lo, hi in zip(edges, edges[1:]):
        mid = 0.5 * (lo + hi)
        ret = _safe_key(torus, fol, transversal, mid)
        if ret is None:
            raise TracingError(f"{fol} leaf at branch middle {mid:.17g} did not return")
        arcs = transversal.chart_arcs
        n_i = _arc_normalizer(arcs[ret.start_arc], fol)
        n_j = _arc_normalizer(arcs[ret.hit_arc], fol)
        mat = np.linalg.inv(n_j) @ np.linalg.inv(ret.holonomy.m) @ n_i
        mat = mat / math.sqrt(abs(np.linalg.det(mat)))
        a = round(_det(c_t, ret.z))
        m = round(_det(ret.z, e))
        transverse_values.add(a)
        branches.append(ReturnBranch(lo, hi, mat, m, a, ret.key))
    if len(transverse_values) != 1:
        logger.warning("%s returns cross %s lifts of the transversal", fol, sorted(transverse_values))
    fm = FirstReturnMap(
        transversal,
        fol,
        L,
        branches,
        transverse=transverse_values.pop() if transverse_values else 1,
        section_class=c_t,
        cone_boundaries=cone_bounds,
    )
    fm.lift_offset = math.floor(fm.raw_lift(0.0) / L)
    defect = fm.continuity_defect()
    if defect > 1e-9 * max(1.0, L):
        logger.warning("%s return map jumps by %.3e at a branch boundary", fol, defect)
        fm.flags.append("discontinuous")
    if len(cone_bounds) > 1:
        fm.flags.append("closed-singular-leaf")
    logger.debug("%s return map: %d branches, offset %d", fol, len(branches), fm.lift_offset)
    return fm


def rotation_map(length: float, angle: float) -> FirstReturnMap:
    """Rigid rotation by ``angle`` as a one-branch return map."""
    shift = math.floor(angle / length)
    frac = angle - shift * length
    mat = np.diag([math.exp(frac / LENGTH_FACTOR), 1.0])
    mat = mat / math.sqrt(np.linalg.det(mat))
    fm = FirstReturnMap(None, "alpha", length, [ReturnBranch(0.0, length, mat, shift, 1, ())])
    fm.lift_offset = math.floor(fm.raw_lift(0.0) / length)
    return fm


# ----------------------------------------------------------------------------
# Rotation numbers and asymptotic cycles
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationNumber:
    rho: float
    error: float
    lift_rho: float
    periodic: Optional[tuple[int, int]] = None
    converged: bool = True

    @property
    def interval(self) -> tuple[float, float]:
        return self.rho - self.error, self.rho + self.error


def _weighted_average(steps: np.ndarray) -> float:
    n = len(steps)
    t = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return float(np.sum(w * steps) / np.sum(w))


def _periodic_orbit(orbit: np.ndarray, length: float, tol: float) -> Optional[tuple[int, int]]:
    last = orbit[-1]
    for q in range(1, min(MAX_PERIOD, len(orbit) - 1) + 1):
        d = last - orbit[-1 - q]
        p = round(d / length)
        if abs(d - p * length) < tol * length:
            g = math.gcd(p, q) or 1
            return p // g, q // g
    return None


def rotation_number(
    f: CircleLift, iters: int = DEFAULT_ITERS, tol: float = DEFAULT_TOL, start: float = 0.0
) -> RotationNumber:
    """Rotation number in [0, 1) from weighted Birkhoff averages over N and 2N steps."""
    n = max(iters // 2, 8)
    L = f.length
    orbit = np.empty(2 * n + 1)
    orbit[0] = start
    for k in range(2 * n):
        orbit[k + 1] = f.lift(orbit[k])
    steps = np.diff(orbit) / L
    periodic = _periodic_orbit(orbit, L, tol)
    if periodic is not None:
        p, q = periodic
        lift_rho = p / q
        return RotationNumber(lift_rho % 1.0, 0.0, lift_rho, (p % q, q), True)
    rho_n = _weighted_average(steps[:n])
    rho_2n = _weighted_average(steps)
    err = abs(rho_2n - rho_n)
    if err > tol:
        logger.info("rotation number not converged: |rho(2N) - rho(N)| = %.3e", err)
    return RotationNumber(rho_2n % 1.0, err, rho_2n, None, err <= tol)


@dataclass(frozen=True)
class AsymptoticCycle:
    direction: tuple[float, float]
    foliation: str
    error: float = 0.0
    method: str = "return-map"

    @classmethod
    def of(cls, vec: Sequence[float], foliation: str, error: float = 0.0, method: str = "return-map") -> "AsymptoticCycle":
        arr = np.asarray(vec, dtype=float)
        scale = float(np.max(np.abs(arr)))
        if scale == 0.0 or not math.isfinite(scale):
            raise ValueError(f"asymptotic cycle direction must be nonzero, got {list(arr)}")
        return cls((float(arr[0] / scale), float(arr[1] / scale)), foliation, error, method)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.direction)

    def angle_to(self, other: "AsymptoticCycle") -> float:
        """Angle between the unoriented lines, in [0, pi/2]."""
        a, b = self.vector, other.vector
        s = abs(_det(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        return math.asin(min(1.0, s))


def cycle_from_return_map(fm: FirstReturnMap, rn: RotationNumber) -> AsymptoticCycle:
    c = np.array(fm.section_class, dtype=float)
    e = np.array(complement(fm.section_class), dtype=float)
    rho = rn.lift_rho + fm.lift_offset
    vec = fm.transverse * e + rho * c
    if fm.foliation == "alpha":
        vec = -vec
    err = rn.error / max(1.0, float(np.max(np.abs(vec))))
    return AsymptoticCycle.of(vec, fm.foliation, err)


def asymptotic_cycle(
    torus: SingularTorus,
    fol: Foliation,
    *,
    transversal: Optional[ClosedGeodesic] = None,
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
) -> AsymptoticCycle:
    fm = first_return_map(torus, fol, transversal)
    rn = rotation_number(fm, iters, tol)
    cyc = cycle_from_return_map(fm, rn)
    if not rn.converged:
        logger.warning("%s asymptotic cycle did not converge (error %.3e); class B suspect", fol, rn.error)
    return cyc


def _interior_start(torus: SingularTorus) -> tuple[float, float]:
    verts = np.array(torus.polygon.vertices)
    c = verts.mean(axis=0) + np.array([1e-4 * math.sqrt(2), -1e-4 * math.sqrt(3)])
    if torus.polygon.contains(*c):
        return float(c[0]), float(c[1])
    umin, umax, vmin, vmax = torus.polygon.bounding_box()
    for k in range(1, 200):
        u = umin + ((k * 0.6180339887) % 1.0) * (umax - umin)
        v = vmin + ((k * 0.7548776662) % 1.0) * (vmax - vmin)
        if torus.polygon.contains(u, v):
            return u, v
    raise TracingError("no interior start point found")


def cesaro_cycle(torus: SingularTorus, fol: Foliation, crossings: int = 20_000) -> AsymptoticCycle:
    """Direction of the ledger class of a long leaf segment, compared at N and 2N crossings."""
    u, v = _interior_start(torus)
    leaf = _leaf(fol, u, v)
    weights = []
    for piece in iter_trace(torus, leaf, leaf.start, max_crossings=2 * crossings + 1, track_holonomy=False):
        weights.append(piece.weight)
        if len(weights) > 2 * crossings:
            break
    half = np.array(weights[crossings], dtype=float)
    full = np.array(weights[-1], dtype=float)
    d_half = half / max(np.max(np.abs(half)), 1.0)
    d_full = full / max(np.max(np.abs(full)), 1.0)
    sign = -1.0 if fol == "alpha" else 1.0
    return AsymptoticCycle.of(sign * full, fol, float(np.max(np.abs(d_full - d_half))), "cesaro")


def cycles_distinct(a: AsymptoticCycle, b: AsymptoticCycle, tol: float = EPS_CYCLE_ANGLE) -> bool:
    """True when the unoriented lines of the two cycles differ by more than ``tol``."""
    return a.angle_to(b) > tol


def class_A_test(
    torus: SingularTorus,
    *,
    transversal: Optional[ClosedGeodesic] = None,
    iters: int = DEFAULT_ITERS,
    tol: float = EPS_CYCLE_ANGLE,
) -> bool:
    ca = asymptotic_cycle(torus, "alpha", transversal=transversal, iters=iters)
    cb = asymptotic_cycle(torus, "beta", transversal=transversal, iters=iters)
    torus.cache["asymptotic_cycles"] = (ca, cb)
    return cycles_distinct(ca, cb, tol)
