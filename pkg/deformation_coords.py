#!/usr/bin/env python3
"""Length-twist coordinates on singular de-Sitter tori.

The chart sends a marked torus t to (L_a(t), Theta_ab(t)): the length of the
closed timelike geodesic gamma_a in class a, and the twist coordinate read off
where the alpha leaf of the cone point first meets gamma_a in the future and
in the past. The inverse builds the rectangle torus with offset frac(Theta) l
and composes it with floor(Theta) Dehn twists along a.

Marking convention: dehn_twist_action(t, n) relabels classes so that the
geodesic formerly in class (p, q) is in class (p + n q, q). On holonomies this
is gen_b -> gen_b . gen_a^-n, and the twist coordinate moves by +n.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist, squareform

from chart_tracing import ConePointHit, EdgePairing, TracingError, VertexHit, Weight
from closed_geodesics import ClosedGeodesic, ShootingError
from ds2_geometry import ChartCurve
from geodesic_spectrum import HomotopyClass, NotTimelikeClass, find_closed_timelike_geodesic
from lightlike_dynamics import first_transversal_hit, past_alpha_leaf
from lorentz_kernel import GeometryError
from surface_builder import SingularTorus, SolverError, rectangle_torus

logger = logging.getLogger("deformation_coords")

STANDARD_BASIS: tuple[Weight, Weight] = ((1, 0), (0, 1))
EPS_TWIST = 1e-6
EPS_ROUND_TRIP = 1e-8
EPS_COLLISION = 1e-6
EPS_JACOBIAN = 1e-8
JAC_STEP = 1e-4
REFINE_LEVELS = 2

# Grid evaluation failures that exclude a point instead of aborting a scan.
POINT_ERRORS = (SolverError, ShootingError, NotTimelikeClass, TracingError, GeometryError, ConePointHit)


class CoordinateError(RuntimeError):
    """The twist coordinate could not be read off the traced leaves."""


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LengthTwist:
    l: float
    theta_twist: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.l) and self.l > 0):
            raise ValueError(f"length must be positive, got {self.l}")
        if not math.isfinite(self.theta_twist):
            raise ValueError(f"twist must be finite, got {self.theta_twist}")

    @property
    def twists(self) -> int:
        return math.floor(self.theta_twist)

    @property
    def fraction(self) -> float:
        return self.theta_twist - math.floor(self.theta_twist)

    def distance(self, other: "LengthTwist") -> float:
        return max(abs(self.l - other.l), abs(self.theta_twist - other.theta_twist))

    def as_dict(self) -> dict:
        return {"l": self.l, "theta_twist": self.theta_twist}


@dataclass
class TwistFamilyPoint:
    base: SingularTorus
    u: float
    torus: SingularTorus
    coordinates: LengthTwist


def check_basis(basis: Sequence[Sequence[int]]) -> tuple[Weight, Weight]:
    """Integer basis (a, b) of intersection number one."""
    (m1, n1), (m2, n2) = basis
    a, b = (int(m1), int(n1)), (int(m2), int(n2))
    if abs(a[0] * b[1] - a[1] * b[0]) != 1:
        raise ValueError(f"basis {a}, {b} does not have intersection number one")
    return a, b


def _coefficients(basis: tuple[Weight, Weight], c: Weight) -> tuple[int, int]:
    """Integer (x, y) with c = x a + y b."""
    (m1, n1), (m2, n2) = basis
    det = m1 * n2 - n1 * m2
    x = (c[0] * n2 - c[1] * m2) * det
    y = (m1 * c[1] - n1 * c[0]) * det
    return x, y


# ----------------------------------------------------------------------------
# Forward coordinates
# ----------------------------------------------------------------------------


def length_coordinate(
    torus: SingularTorus, c: HomotopyClass | Sequence[int] = (1, 0), *, check_cone: bool = True
) -> float:
    """Length of the closed timelike geodesic in the primitive class c."""
    hc = HomotopyClass.of(c)
    if not hc.is_primitive:
        raise ValueError(f"class {hc} is not primitive")
    return find_closed_timelike_geodesic(torus, hc, force=not check_cone).length


def _future_geodesic(torus: SingularTorus, a: Weight, check_cone: bool) -> ClosedGeodesic:
    g = find_closed_timelike_geodesic(torus, a, force=not check_cone)
    if g.orientation != "future":
        raise CoordinateError(f"class {a} is past-directed; use {(-a[0], -a[1])}")
    return g


def _cone_starts(torus: SingularTorus, eps: float) -> Iterator[tuple[float, float]]:
    """Interior points at offset eps from cone-class vertices."""
    for k in sorted(torus.cone_vertices):
        u, v = torus.polygon.vertices[k]
        for du in (1.0, -1.0):
            for dv in (1.0, -1.0):
                p = (u + du * eps, v + dv * eps)
                if torus.polygon.contains(*p):
                    yield p


def _twist_at(
    torus: SingularTorus, gamma: ClosedGeodesic, basis: tuple[Weight, Weight], start: tuple[float, float]
) -> float:
    u, v = start
    future = first_transversal_hit(torus, ChartCurve.alpha_leaf(u, v), gamma)
    past = first_transversal_hit(torus, past_alpha_leaf(u, v), gamma)
    length = gamma.primitive_length
    c = gamma.primitive_class
    wrap = 1 if future.position < past.position else 0
    loop = (
        future.lift[0] - past.lift[0] - wrap * c[0],
        future.lift[1] - past.lift[1] - wrap * c[1],
    )
    n, k = _coefficients(basis, loop)
    if k != 1:
        raise CoordinateError(f"leaf loop {loop} has b-coefficient {k}, expected 1")
    return n + ((future.position - past.position) % length) / length


def twist_coordinate(
    torus: SingularTorus,
    basis: Sequence[Sequence[int]] = STANDARD_BASIS,
    *,
    eps: float = EPS_TWIST,
    check_cone: bool = True,
) -> float:
    """Theta_ab: Dehn-twist count plus the fraction of gamma_a between x- and x+.

    The cone point's alpha leaf is approximated by the leaves through points at
    distance eps and 2 eps from a cone vertex; the O(eps) error is removed by
    Richardson extrapolation.
    """
    a, b = check_basis(basis)
    gamma = _future_geodesic(torus, a, check_cone)
    last: Optional[Exception] = None
    for start in _cone_starts(torus, eps):
        try:
            t1 = _twist_at(torus, gamma, (a, b), start)
            k = torus.polygon.nearest_vertex(*start)[0]
            u0, v0 = torus.polygon.vertices[k]
            t2 = _twist_at(torus, gamma, (a, b), (u0 + 2 * (start[0] - u0), v0 + 2 * (start[1] - v0)))
        except (VertexHit, TracingError) as exc:
            logger.debug("twist start %s failed: %s", start, exc)
            last = exc
            continue
        return 2.0 * t1 - t2
    raise CoordinateError(f"no cone-point leaf could be traced to gamma_{a}") from last


def coordinates(
    torus: SingularTorus, basis: Sequence[Sequence[int]] = STANDARD_BASIS, *, check_cone: bool = True
) -> LengthTwist:
    a, b = check_basis(basis)
    return LengthTwist(length_coordinate(torus, a, check_cone=check_cone), twist_coordinate(torus, (a, b), check_cone=check_cone))


# ----------------------------------------------------------------------------
# Marking changes and the inverse chart
# ----------------------------------------------------------------------------


def dehn_twist_action(torus: SingularTorus, n: int) -> SingularTorus:
    """Same surface, marking composed with the n-th power of the Dehn twist along a."""
    n = int(n)
    pairings = [
        EdgePairing(p.name, p.source, p.target, p.gluing, (p.weight[0] + n * p.weight[1], p.weight[1]))
        for p in torus.pairings
    ]
    return dataclasses.replace(
        torus,
        params=dict(torus.params),
        pairings=pairings,
        gen_b=torus.gen_b @ torus.gen_a.power(-n),
        twist_count=torus.twist_count + n,
        cache={},
    )


def from_length_twist(
    theta: float, lt: LengthTwist | Sequence[float], basis: Sequence[Sequence[int]] = STANDARD_BASIS
) -> SingularTorus:
    """Rectangle torus with offset frac(Theta) l, twisted floor(Theta) times along a."""
    if not isinstance(lt, LengthTwist):
        lt = LengthTwist(float(lt[0]), float(lt[1]))
    a, b = check_basis(basis)
    if a != (1, 0) or b[1] != 1:
        raise ValueError(f"the inverse chart is realized for bases ((1, 0), (k, 1)), got {a}, {b}")
    # Theta against (k, 1) is the standard twist minus k
    total = lt.theta_twist + b[0]
    n = math.floor(total)
    offset = (total - n) * lt.l
    if offset >= lt.l:
        n, offset = n + 1, 0.0
    torus = rectangle_torus(theta, lt.l, offset)
    return dehn_twist_action(torus, n) if n else torus


def twist_family(torus: SingularTorus, u: float, *, check_cone: bool = False) -> TwistFamilyPoint:
    """Cut along gamma_a and re-glue after rotating one side by u."""
    if torus.kind == "rectangle":
        l = float(torus.params["l"])
        if not 0 <= u < l:
            raise ValueError(f"u must lie in [0, {l}), got {u}")
        shifted = torus.params["offset"] + u
        carry = math.floor(shifted / l)
        base = rectangle_torus(torus.theta, l, shifted - carry * l)
        out = dehn_twist_action(base, torus.twist_count + carry)
        lt = LengthTwist(l, torus.twist_count + torus.params["offset"] / l + u / l)
        return TwistFamilyPoint(torus, u, out, lt)
    lt0 = coordinates(torus, check_cone=check_cone)
    if not 0 <= u < lt0.l:
        raise ValueError(f"u must lie in [0, {lt0.l}), got {u}")
    lt = LengthTwist(lt0.l, lt0.theta_twist + u / lt0.l)
    return TwistFamilyPoint(torus, u, from_length_twist(torus.theta, lt), lt)


def round_trip_residual(theta: float, lt: LengthTwist) -> float:
    return coordinates(from_length_twist(theta, lt), check_cone=False).distance(lt)


# ----------------------------------------------------------------------------
# Two-length rigidity
# ----------------------------------------------------------------------------


def length_pair(theta: float, l: float, theta_twist: float, basis: tuple[Weight, Weight] = STANDARD_BASIS) -> tuple[float, float]:
    """(L_a, L_b) of the torus with coordinates (l, theta_twist)."""
    torus = from_length_twist(theta, LengthTwist(l, theta_twist))
    a, b = basis
    return (
        length_coordinate(torus, a, check_cone=False),
        find_closed_timelike_geodesic(torus, b, force=True).primitive_length,
    )


def _jacobian_det(theta: float, l: float, tw: float, basis: tuple[Weight, Weight], h: float) -> float:
    la_tp, lb_tp = length_pair(theta, l, tw + h, basis)
    la_tm, lb_tm = length_pair(theta, l, tw - h, basis)
    la_lp, _ = length_pair(theta, l + h, tw, basis)
    la_lm, _ = length_pair(theta, l - h, tw, basis)
    dla_dl = (la_lp - la_lm) / (2 * h)
    dla_dt = (la_tp - la_tm) / (2 * h)
    dlb_dt = (lb_tp - lb_tm) / (2 * h)
    det = dla_dl * dlb_dt
    if abs(dla_dt) > 1e-12:
        _, lb_lp = length_pair(theta, l + h, tw, basis)
        _, lb_lm = length_pair(theta, l - h, tw, basis)
        det -= dla_dt * (lb_lp - lb_lm) / (2 * h)
    return det


def _rigidity_point(args: tuple) -> dict:
    theta, l, tw, basis, h = args
    row = {"l": l, "theta_twist": tw, "L_a": math.nan, "L_b": math.nan, "jac_det": math.nan, "flags": ""}
    try:
        row["L_a"], row["L_b"] = length_pair(theta, l, tw, basis)
    except POINT_ERRORS as exc:
        row["flags"] = f"excluded:{type(exc).__name__}"
        return row
    try:
        row["jac_det"] = _jacobian_det(theta, l, tw, basis, h)
    except POINT_ERRORS as exc:
        row["flags"] = f"no-jacobian:{type(exc).__name__}"
        return row
    if abs(row["jac_det"]) <= EPS_JACOBIAN:
        row["flags"] = "singular-jacobian"
    return row


@dataclass
class RigidityReport:
    theta: float
    frame: pd.DataFrame
    collisions: list[dict] = field(default_factory=list)
    min_pair_distance: float = math.nan
    grid: dict = field(default_factory=dict)
    smoothness: Optional[dict] = None

    @property
    def excluded(self) -> int:
        return int(self.frame["flags"].str.startswith("excluded").sum())

    @property
    def passed(self) -> bool:
        return not self.collisions

    def summary(self) -> dict:
        out = {
            "collisions": self.collisions,
            "min_pair_distance": self.min_pair_distance,
            "grid": self.grid,
        }
        if self.smoothness is not None:
            out["smoothness"] = self.smoothness
        return out


def _patch(theta: float, l: float, tw: float, hl: float, ht: float, basis: tuple[Weight, Weight]) -> np.ndarray:
    pts = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            try:
                pts.append(length_pair(theta, l + i * hl, tw + j * ht, basis))
            except POINT_ERRORS:
                continue
    return np.array(pts).reshape(-1, 2)


def _refine_collision(theta: float, p: dict, q: dict, hl: float, ht: float, basis: tuple[Weight, Weight]) -> float:
    """Smallest length-pair distance between the subdivided cells of p and q."""
    d = math.inf
    for level in range(1, REFINE_LEVELS + 1):
        step_l, step_t = hl / 2 ** (level + 1), ht / 2 ** (level + 1)
        a = _patch(theta, p["l"], p["theta_twist"], step_l, step_t, basis)
        b = _patch(theta, q["l"], q["theta_twist"], step_l, step_t, basis)
        if len(a) == 0 or len(b) == 0:
            return math.inf
        d = float(cdist(a, b).min())
        if d >= EPS_COLLISION:
            return d
    return d


def smoothness_check(theta: float, l: float, tw: float, h: float = 1e-2, basis: tuple[Weight, Weight] = STANDARD_BASIS) -> dict:
    """Second differences of L_b along the twist line at steps h and h/2."""

    def second(step: float) -> float:
        lo = length_pair(theta, l, tw - step, basis)[1]
        mid = length_pair(theta, l, tw, basis)[1]
        hi = length_pair(theta, l, tw + step, basis)[1]
        return (hi - 2 * mid + lo) / step**2

    d_h, d_half = second(h), second(h / 2)
    return {"l": l, "theta_twist": tw, "d2_h": d_h, "d2_half": d_half, "gap": abs(d_h - d_half)}


def rigidity_scan(
    theta: float,
    l_values: Sequence[float],
    twist_values: Sequence[float],
    basis: Sequence[Sequence[int]] = STANDARD_BASIS,
    *,
    workers: Optional[int] = None,
    jac_step: float = JAC_STEP,
    smoke: bool = False,
) -> RigidityReport:
    """Evaluate (L_a, L_b) on a grid and look for distinct points with equal length pairs."""
    a, b = check_basis(basis)
    if a != (1, 0):
        raise ValueError("rigidity scans run in the chart of class (1, 0)")
    jobs = [(theta, float(l), float(tw), (a, b), jac_step) for l in l_values for tw in twist_values]
    logger.info("rigidity scan: theta=%.6g, %d grid points", theta, len(jobs))
    if workers == 1:
        rows = [_rigidity_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_rigidity_point, jobs))
    frame = pd.DataFrame(rows, columns=["l", "theta_twist", "L_a", "L_b", "jac_det", "flags"])

    hl = float(np.ptp(l_values)) / max(1, len(l_values) - 1) if len(l_values) > 1 else jac_step
    ht = float(np.ptp(twist_values)) / max(1, len(twist_values) - 1) if len(twist_values) > 1 else jac_step
    valid = frame[~frame["flags"].str.startswith("excluded")].reset_index(drop=True)
    collisions = []
    min_d = math.nan
    if len(valid) >= 2:
        dist = squareform(pdist(valid[["L_a", "L_b"]].to_numpy()))
        np.fill_diagonal(dist, np.inf)
        min_d = float(dist.min())
        for i, j in zip(*np.nonzero(np.triu(dist < EPS_COLLISION, k=1))):
            p, q = valid.iloc[i].to_dict(), valid.iloc[j].to_dict()
            refined = _refine_collision(theta, p, q, hl, ht, (a, b))
            if refined >= EPS_COLLISION:
                logger.info("near-collision (%.4g, %.4g) ~ (%.4g, %.4g) resolved", p["l"], p["theta_twist"], q["l"], q["theta_twist"])
                continue
            logger.warning("collision persists after refinement: %s ~ %s", p, q)
            collisions.append(
                {
                    "a": from_length_twist(theta, LengthTwist(p["l"], p["theta_twist"])).to_descriptor(),
                    "b": from_length_twist(theta, LengthTwist(q["l"], q["theta_twist"])).to_descriptor(),
                    "distance": refined,
                }
            )
    grid = {
        "theta": theta,
        "l": [float(min(l_values)), float(max(l_values)), len(l_values)],
        "theta_twist": [float(min(twist_values)), float(max(twist_values)), len(twist_values)],
        "basis": [list(a), list(b)],
        "excluded": int(len(frame) - len(valid)),
    }
    report = RigidityReport(theta, frame, collisions, min_d, grid)
    if smoke and len(valid):
        mid = valid.iloc[len(valid) // 2]
        try:
            report.smoothness = smoothness_check(theta, float(mid["l"]), float(mid["theta_twist"]), basis=(a, b))
        except POINT_ERRORS as exc:
            logger.warning("smoothness check failed: %s", exc)
    return report
