#!/usr/bin/env python3
"""Closed timelike geodesics of a singular torus as chains of chart arcs.

A closed geodesic in the free homotopy class c develops to the axis of its
holonomy H, and tracing that axis from the base polygon reaches the copy of
weight c with holonomy H again. Shooting looks for such an H: trace a
seed geodesic until it reaches a copy of weight c, replace it by the axis of
the holonomy found there, and repeat until the axis closes up on itself.

Arcs keep the weight of the polygon copy they were traced in; a leaf in copy
W meeting an arc of weight W_i meets the lift W - W_i of the geodesic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from chart_tracing import (
    ConePointHit,
    TraceArc,
    TracingError,
    Weight,
    ZERO_WEIGHT,
    chart_segments_inside,
    iter_trace,
)
from ds2_geometry import ChartCurve, Mobius, curve_form_roots
from lorentz_kernel import GeometryError
from surface_builder import LENGTH_FACTOR, SingularTorus

logger = logging.getLogger("closed_geodesics")

EPS_CLOSE = 1e-9
EPS_LENGTH = 1e-8
MAX_SHOOT_ITER = 12
SOBOL_LOG2 = 6


class ShootingError(RuntimeError):
    """No closed geodesic found in the requested class."""

    def __init__(self, target: Weight, message: str = "shooting did not converge") -> None:
        super().__init__(f"{message} for class {target}")
        self.target = target


@dataclass(frozen=True)
class GeodesicArc:
    curve: ChartCurve
    s0: float
    s1: float
    weight: Weight
    position: float
    holonomy: Mobius = field(default_factory=Mobius.identity)

    def position_at(self, s: float) -> float:
        return self.position + self.curve.arc_length(self.s0, s)

    @property
    def length(self) -> float:
        return self.curve.arc_length(self.s0, self.s1)

    def point(self, s: float) -> tuple[float, float]:
        return self.curve.uv(s)


@dataclass
class ClosedGeodesic:
    """A primitive closed timelike geodesic, possibly traversed ``multiplicity`` times."""

    homology: Weight
    arcs: list[GeodesicArc]
    holonomy: Mobius
    multiplicity: int = 1
    orientation: str = "future"
    representatives: list[GeodesicArc] = field(default_factory=list)
    # chart point of the seed the shooting started from
    seed_point: Optional[tuple[float, float]] = None

    @property
    def primitive_length(self) -> float:
        return float(sum(a.length for a in self.arcs))

    @property
    def length(self) -> float:
        return self.multiplicity * self.primitive_length

    @property
    def primitive_class(self) -> Weight:
        k = self.multiplicity
        return (self.homology[0] // k, self.homology[1] // k)

    @property
    def total_holonomy(self) -> Mobius:
        return self.holonomy.power(self.multiplicity)

    @property
    def chart_arcs(self) -> list[GeodesicArc]:
        """Every chart representative, including identified copies along glued sides."""
        return self.arcs + self.representatives

    @property
    def simple(self) -> bool:
        return self.multiplicity == 1 and not _self_crossings(self.arcs)

    def exit_points(self) -> np.ndarray:
        return np.array([a.point(a.s1) for a in self.arcs])

    def oracle_residual(self) -> float:
        return abs(self.primitive_length - geodesic_length_oracle(self.holonomy))


def geodesic_length_oracle(h: Mobius) -> float:
    """Translation length of a hyperbolic holonomy: 2 arccosh(|tr| / 2)."""
    if not h.is_hyperbolic():
        raise GeometryError(f"holonomy is not hyperbolic (trace {h.trace:.12g})")
    return LENGTH_FACTOR * h.translation_length()


def _arc_crossings(a: GeodesicArc, b: GeodesicArc, tol: float = 1e-9) -> bool:
    lo_a, hi_a = sorted((a.s0, a.s1))
    lo_b, hi_b = sorted((b.s0, b.s1))
    for r in curve_form_roots(a.curve, b.curve.form()):
        if not lo_a * (1 + tol) < r < hi_a * (1 - tol):
            continue
        u, _ = a.curve.uv(r)
        try:
            sb = b.curve.parameter_of_u(u)
        except np.linalg.LinAlgError:
            continue
        if lo_b * (1 + tol) < sb < hi_b * (1 - tol):
            return True
    return False


def _self_crossings(arcs: Sequence[GeodesicArc]) -> list[tuple[int, int]]:
    return [(i, j) for i in range(len(arcs)) for j in range(i + 1, len(arcs)) if _arc_crossings(arcs[i], arcs[j])]


def _to_geodesic_arcs(trace: Sequence[TraceArc]) -> list[GeodesicArc]:
    out = []
    pos = 0.0
    for arc in trace:
        out.append(GeodesicArc(arc.curve, arc.s0, arc.s1, arc.weight, pos, arc.holonomy))
        pos += arc.length()
    return out


# ----------------------------------------------------------------------------
# Shooting
# ----------------------------------------------------------------------------


def _rp1_gap(a: np.ndarray, b: np.ndarray) -> float:
    return abs(a[0] * b[1] - a[1] * b[0]) / (np.linalg.norm(a) * np.linalg.norm(b))


def _axis_gap(h: Mobius, curve: ChartCurve) -> float:
    rep, att = h.fixed_points()
    past, future = curve.endpoints()
    return _rp1_gap(rep, past) + _rp1_gap(att, future)


def _budget(target: Weight) -> int:
    return 80 * (abs(target[0]) + abs(target[1])) + 80


def _copies_with_weight(
    torus: SingularTorus, curve: ChartCurve, s_start: float, target: Weight, limit: int = 6
) -> list[Mobius]:
    found: list[Mobius] = []
    try:
        for arc in iter_trace(torus, curve, s_start, max_crossings=_budget(target)):
            if arc.weight == target:
                found.append(arc.holonomy)
                if len(found) >= limit:
                    break
            if arc.exit_sign == 0:
                break
    except (TracingError, ConePointHit) as exc:
        logger.debug("trace stopped: %s", exc)
    return found


def trace_period(
    torus: SingularTorus, curve: ChartCurve, s_start: float, target: Weight
) -> Optional[tuple[list[TraceArc], Mobius]]:
    """Arcs from s_start up to the first copy of weight target, and that copy's holonomy."""
    arcs: list[TraceArc] = []
    try:
        for arc in iter_trace(torus, curve, s_start, max_crossings=_budget(target)):
            if arc.weight == target and arcs:
                return arcs, arc.holonomy
            if arc.exit_sign == 0:
                return None
            arcs.append(arc)
    except (TracingError, ConePointHit) as exc:
        logger.debug("period trace stopped: %s", exc)
    return None


def _axis_entry(torus: SingularTorus, h: Mobius) -> Optional[tuple[ChartCurve, float]]:
    if not h.is_hyperbolic():
        return None
    rep, att = h.fixed_points()
    axis = ChartCurve.axis(rep, att)
    pieces = chart_segments_inside(axis, torus.polygon)
    if not pieces:
        return None
    return axis, pieces[0][0]


def _is_boundary_axis(torus: SingularTorus, h: Mobius) -> bool:
    if torus.axis is None or not h.is_hyperbolic():
        return False
    rep, att = h.fixed_points()
    for arc in boundary_geodesic(torus).chart_arcs:
        past, future = arc.curve.endpoints()
        if _rp1_gap(rep, past) + _rp1_gap(att, future) < 1e-8:
            return True
    return False


def _shoot_from(
    torus: SingularTorus, curve: ChartCurve, s_start: float, target: Weight
) -> Optional[ClosedGeodesic]:
    for it in range(MAX_SHOOT_ITER):
        cands = sorted(
            (c for c in _copies_with_weight(torus, curve, s_start, target) if c.is_hyperbolic()),
            key=lambda c: _axis_gap(c, curve),
        )
        step = None
        for h in cands:
            if _is_boundary_axis(torus, h):
                # the glued timelike edge; its axis runs along sides of the polygon
                return boundary_geodesic(torus) if target == (1, 0) else None
            entry = _axis_entry(torus, h)
            if entry is not None:
                step = h, entry
                break
        if step is None:
            return None
        h, (axis, s_entry) = step
        period = trace_period(torus, axis, s_entry, target)
        if period is not None and period[1].equals(h, EPS_CLOSE * max(1.0, abs(h.trace))):
            arcs = _to_geodesic_arcs(period[0])
            logger.debug("class %s closed after %d iterations (%d arcs)", target, it + 1, len(arcs))
            return ClosedGeodesic(target, arcs, h)
        a, b = chart_segments_inside(axis, torus.polygon)[0]
        curve, s_start = axis, math.sqrt(a * b)
    return None


def _sobol_seeds(torus: SingularTorus, seed: Optional[int]) -> Iterable[tuple[ChartCurve, float]]:
    umin, umax, vmin, vmax = torus.polygon.bounding_box()
    sampler = qmc.Sobol(d=3, scramble=True, seed=seed)
    for u01, v01, a01 in sampler.random_base2(SOBOL_LOG2):
        u = umin + u01 * (umax - umin)
        v = vmin + v01 * (vmax - vmin)
        if not torus.polygon.contains(u, v):
            continue
        phi = 0.05 + a01 * (math.pi / 2 - 0.1)
        try:
            yield ChartCurve.geodesic_from_tangent(u, v, math.cos(phi), -math.sin(phi)), 1.0
        except GeometryError:
            continue


def _word_seeds(torus: SingularTorus, target: Weight) -> Iterable[tuple[ChartCurve, float]]:
    m, n = target
    a, b = torus.gen_a, torus.gen_b
    for word in (a.power(m) @ b.power(n), b.power(n) @ a.power(m)):
        entry = _axis_entry(torus, word)
        if entry is not None:
            axis, _ = entry
            a0, b0 = chart_segments_inside(axis, torus.polygon)[0]
            yield axis, math.sqrt(a0 * b0)


def shoot(
    torus: SingularTorus,
    target: Weight,
    *,
    seed: Optional[int] = None,
    use_cache: bool = True,
    word_seeds: bool = True,
) -> ClosedGeodesic:
    """Future-directed closed geodesic in the primitive class ``target``.

    Axes of the words a^m b^n are tried before the Sobol seeds unless
    ``word_seeds`` is off; ``seed`` scrambles the Sobol sequence.
    """
    if target == ZERO_WEIGHT:
        raise ValueError("the trivial class has no closed geodesic")
    if math.gcd(*target) != 1:
        raise ValueError(f"class {target} is not primitive")
    key = ("shoot", target)
    if use_cache and key in torus.cache:
        return torus.cache[key]
    use_words = word_seeds and not (torus.axis is not None and target == (1, 0))
    words = list(_word_seeds(torus, target)) if use_words else []
    tried = 0
    for curve, s in (*words, *_sobol_seeds(torus, seed)):
        tried += 1
        found = _shoot_from(torus, curve, s, target)
        if found is None:
            continue
        found.seed_point = curve.uv(s)
        res = found.oracle_residual()
        if res > EPS_LENGTH * max(1.0, found.primitive_length):
            logger.warning("class %s: developed length misses the trace oracle by %.3e", target, res)
            continue
        if use_cache:
            torus.cache[key] = found
        return found
    raise ShootingError(target, f"no seed of {tried} closed up")


# ----------------------------------------------------------------------------
# Boundary geodesic and transversals
# ----------------------------------------------------------------------------


def boundary_geodesic(torus: SingularTorus) -> ClosedGeodesic:
    """The glued timelike edge of a rectangle torus, class a, length l."""
    if torus.axis is None or torus.axis_length is None:
        raise ValueError(f"{torus.kind} torus has no boundary geodesic")
    axis = torus.axis
    f = LENGTH_FACTOR
    arcs = []
    reps = []
    for pairing in sorted(torus.pairings, key=lambda p: p.target):
        if not pairing.name.startswith("B"):
            continue
        side = torus.polygon.sides[pairing.target]
        (u0, _), (u1, _) = side.segment.start, side.segment.end
        arcs.append(GeodesicArc(axis, u0, u1, ZERO_WEIGHT, f * math.log(u0)))
        reps.append(
            GeodesicArc(axis.transformed(pairing.gluing.inverse()), u0, u1, pairing.weight, f * math.log(u0))
        )
    hol = torus.gen_a
    return ClosedGeodesic((1, 0), arcs, hol, representatives=reps)


TRANSVERSAL_CLASSES: list[Weight] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]


def default_transversal(torus: SingularTorus, *, seed: Optional[int] = None) -> ClosedGeodesic:
    """Closed timelike geodesic used as the section for the alpha return map."""
    if "transversal" in torus.cache:
        return torus.cache["transversal"]
    if torus.axis is not None:
        out = boundary_geodesic(torus)
    else:
        out = None
        for cls in TRANSVERSAL_CLASSES:
            try:
                out = shoot(torus, cls, seed=seed)
                break
            except ShootingError:
                continue
        if out is None:
            raise ShootingError((0, 0), "no short class carries a closed geodesic")
    torus.cache["transversal"] = out
    return out
