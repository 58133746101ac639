#!/usr/bin/env python3
"""Timelike cone, closed timelike geodesics and the marked length spectrum.

Classes are integer pairs (m, n) in the marking (a, b) of the torus. A class
carries a closed timelike geodesic exactly when it lies in the open cone
spanned by the oriented asymptotic cycles A(beta) and -A(alpha) (future half)
or in its negative (past half). Non-primitive classes are resolved through
their primitive root; past classes through the reversed future geodesic.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import directed_hausdorff

from chart_tracing import TracingError, Weight
from closed_geodesics import (
    ClosedGeodesic,
    ShootingError,
    boundary_geodesic,
    geodesic_length_oracle as _holonomy_length,
    shoot,
)
from ds2_geometry import ChartCurve, Mobius, chart_inner
from lightlike_dynamics import AsymptoticCycle, DEFAULT_ITERS, asymptotic_cycle, cycles_distinct
from surface_builder import LENGTH_FACTOR, SingularTorus, develop

logger = logging.getLogger("geodesic_spectrum")

EPS_CONE = 1e-9
EPS_MAXIMALITY = 1e-9
EPS_HAUSDORFF = 1e-7
# Smallest cone coefficient still counted as well inside the cone
NEAR_LIGHTLIKE = 0.05

__all__ = [
    "HomotopyClass",
    "NotTimelikeClass",
    "ShootingError",
    "SpectrumTable",
    "TimelikeCone",
    "causal_maximality_test",
    "find_closed_timelike_geodesic",
    "geodesic_length_oracle",
    "spectrum",
    "timelike_cone",
    "uniqueness_probe",
]


@dataclass(frozen=True)
class HomotopyClass:
    m: int
    n: int

    @classmethod
    def of(cls, c: "HomotopyClass | Sequence[int]") -> "HomotopyClass":
        if isinstance(c, HomotopyClass):
            return c
        m, n = c
        return cls(int(m), int(n))

    @property
    def pair(self) -> Weight:
        return (self.m, self.n)

    @property
    def is_zero(self) -> bool:
        return self.m == 0 and self.n == 0

    @property
    def multiplicity(self) -> int:
        return math.gcd(abs(self.m), abs(self.n))

    @property
    def is_primitive(self) -> bool:
        return self.multiplicity == 1

    def primitive(self) -> "HomotopyClass":
        k = self.multiplicity
        return HomotopyClass(self.m // k, self.n // k)

    def __neg__(self) -> "HomotopyClass":
        return HomotopyClass(-self.m, -self.n)

    def __str__(self) -> str:
        return f"({self.m},{self.n})"


class NotTimelikeClass(ValueError):
    """The class lies outside the open timelike cone."""

    def __init__(self, c: HomotopyClass, report: dict) -> None:
        super().__init__(f"class {c} is not timelike: {report}")
        self.homotopy_class = c
        self.report = report


# ----------------------------------------------------------------------------
# Timelike cone
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TimelikeCone:
    """Open cone spanned by A(beta) and -A(alpha), together with its negative."""

    alpha_cycle: AsymptoticCycle
    beta_cycle: AsymptoticCycle

    @property
    def boundary(self) -> tuple[np.ndarray, np.ndarray]:
        return self.beta_cycle.vector, -self.alpha_cycle.vector

    def coefficients(self, c: HomotopyClass | Sequence[int]) -> tuple[float, float]:
        hc = HomotopyClass.of(c)
        d1, d2 = self.boundary
        a, b = np.linalg.solve(np.column_stack([d1, d2]), np.array(hc.pair, dtype=float))
        return float(a), float(b)

    def side(self, c: HomotopyClass | Sequence[int], tol: float = EPS_CONE) -> str:
        a, b = self.coefficients(c)
        if a > tol and b > tol:
            return "future"
        if a < -tol and b < -tol:
            return "past"
        if abs(a) <= tol or abs(b) <= tol:
            return "boundary"
        return "spacelike"

    def contains(self, c: HomotopyClass | Sequence[int], tol: float = EPS_CONE) -> bool:
        hc = HomotopyClass.of(c)
        return not hc.is_zero and self.side(hc, tol) in ("future", "past")

    def report(self, c: HomotopyClass | Sequence[int]) -> dict:
        a, b = self.coefficients(c)
        d1, d2 = self.boundary
        return {
            "class": list(HomotopyClass.of(c).pair),
            "side": self.side(c),
            "coefficients": [a, b],
            "boundary": [d1.tolist(), d2.tolist()],
        }


def timelike_cone(torus: SingularTorus, *, iters: int = DEFAULT_ITERS) -> TimelikeCone:
    if "cone" in torus.cache:
        return torus.cache["cone"]
    if "asymptotic_cycles" in torus.cache:
        ca, cb = torus.cache["asymptotic_cycles"]
    else:
        ca = asymptotic_cycle(torus, "alpha", iters=iters)
        cb = asymptotic_cycle(torus, "beta", iters=iters)
    if not cycles_distinct(ca, cb):
        raise ValueError(f"asymptotic cycles {ca.direction} and {cb.direction} are parallel (class B structure)")
    cone = TimelikeCone(ca, cb)
    torus.cache["cone"] = cone
    torus.cache["asymptotic_cycles"] = (ca, cb)
    return cone


# ----------------------------------------------------------------------------
# Geodesics
# ----------------------------------------------------------------------------


def geodesic_length_oracle(g: ClosedGeodesic | Mobius) -> float:
    """2 arccosh(|tr| / 2) of the holonomy of a closed geodesic."""
    if isinstance(g, ClosedGeodesic):
        return _holonomy_length(g.total_holonomy)
    return _holonomy_length(g)


def _primitive_future(torus: SingularTorus, c0: Weight, seed: Optional[int]) -> ClosedGeodesic:
    if torus.axis is not None and c0 == (1, 0):
        return boundary_geodesic(torus)
    return shoot(torus, c0, seed=seed)


def find_closed_timelike_geodesic(
    torus: SingularTorus,
    c: HomotopyClass | Sequence[int],
    *,
    seed: Optional[int] = None,
    force: bool = False,
    cone: Optional[TimelikeCone] = None,
) -> ClosedGeodesic:
    """The closed timelike geodesic in class c (multiples and past classes via the primitive root)."""
    hc = HomotopyClass.of(c)
    if hc.is_zero:
        raise ValueError("the trivial class has no closed timelike geodesic")
    prim = hc.primitive()
    if force:
        sides = ["future", "past"]
    else:
        cone = cone or timelike_cone(torus)
        side = cone.side(hc)
        if side not in ("future", "past"):
            raise NotTimelikeClass(hc, cone.report(hc))
        sides = [side]
    last: Optional[Exception] = None
    for side in sides:
        c0 = prim.pair if side == "future" else (-prim).pair
        try:
            g = _primitive_future(torus, c0, seed)
        except ShootingError as exc:
            last = exc
            continue
        hol = g.holonomy if side == "future" else g.holonomy.inverse()
        return ClosedGeodesic(
            hc.pair,
            g.arcs,
            hol,
            multiplicity=hc.multiplicity,
            orientation=side,
            representatives=g.representatives,
        )
    raise last if last is not None else ShootingError(hc.pair)


# ----------------------------------------------------------------------------
# Spectrum
# ----------------------------------------------------------------------------


@dataclass
class SpectrumEntry:
    m: int
    n: int
    timelike: bool
    length: float = math.nan
    residual: float = math.nan
    seeds_agreeing: int = 0
    status: str = "ok"


@dataclass
class SpectrumTable:
    window: int
    entries: dict[Weight, SpectrumEntry] = field(default_factory=dict)

    @property
    def lengths(self) -> dict[Weight, float]:
        return {k: e.length for k, e in self.entries.items() if e.timelike and e.status == "ok"}

    @property
    def failures(self) -> list[Weight]:
        return [k for k, e in self.entries.items() if e.timelike and e.status != "ok"]

    def homogeneity_residual(self) -> float:
        lengths = self.lengths
        worst = 0.0
        for (m, n), length in lengths.items():
            k = math.gcd(abs(m), abs(n))
            root = (m // k, n // k)
            if k > 1 and root in lengths:
                worst = max(worst, abs(length - k * lengths[root]))
        return worst

    def symmetry_residual(self) -> float:
        lengths = self.lengths
        return max((abs(v - lengths[(-m, -n)]) for (m, n), v in lengths.items() if (-m, -n) in lengths), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "m": e.m,
                "n": e.n,
                "timelike": int(e.timelike),
                "length": e.length,
                "residual": e.residual,
                "seeds_agreeing": e.seeds_agreeing,
                "status": e.status,
            }
            for _, e in sorted(self.entries.items())
        ]
        return pd.DataFrame(rows, columns=["m", "n", "timelike", "length", "residual", "seeds_agreeing", "status"])


def _spectrum_entry(args: tuple) -> SpectrumEntry:
    torus, cone, c, seed, probe_seeds = args
    m, n = c
    if not cone.contains(c):
        return SpectrumEntry(m, n, False, status="not-timelike")
    try:
        g = find_closed_timelike_geodesic(torus, c, seed=seed, cone=cone)
        agreeing = 1
        if probe_seeds:
            agreeing = uniqueness_probe(torus, HomotopyClass(m, n).primitive(), probe_seeds).converged
        return SpectrumEntry(m, n, True, g.length, g.oracle_residual() * g.multiplicity, agreeing)
    except (ShootingError, TracingError) as exc:
        logger.warning("class (%d,%d) unresolved: %s", m, n, exc)
        status = "near-lightlike" if min(abs(x) for x in cone.coefficients(c)) < NEAR_LIGHTLIKE else "failed"
        return SpectrumEntry(m, n, True, status=status)


def spectrum(
    torus: SingularTorus,
    window: int = 3,
    *,
    seed: Optional[int] = None,
    workers: int = 1,
    probe_seeds: int = 0,
) -> SpectrumTable:
    """Lengths of every timelike class with |m|, |n| <= window."""
    cone = timelike_cone(torus)
    classes = [(m, n) for m in range(-window, window + 1) for n in range(-window, window + 1) if (m, n) != (0, 0)]
    jobs = [(torus, cone, c, seed, probe_seeds) for c in classes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_spectrum_entry, jobs))
    else:
        entries = [_spectrum_entry(job) for job in jobs]
    table = SpectrumTable(window, {(e.m, e.n): e for e in entries})
    logger.info(
        "spectrum window %d: %d timelike classes, %d failures",
        window,
        sum(e.timelike for e in entries),
        len(table.failures),
    )
    return table


# ----------------------------------------------------------------------------
# Property checks
# ----------------------------------------------------------------------------


def is_causal_loop(points: Sequence[tuple[float, float]]) -> bool:
    """Consecutive developed points future timelike or lightlike related."""
    for (u0, v0), (u1, v1) in zip(points, points[1:]):
        if not (u1 >= u0 and v1 <= v0 and (u1, v1) != (u0, v0)):
            return False
        if chart_inner(u0, v0, u1, v1) < 1.0 - 1e-12:
            return False
    return True


def loop_length(points: Sequence[tuple[float, float]]) -> float:
    return LENGTH_FACTOR * sum(
        math.acosh(max(chart_inner(u0, v0, u1, v1), 1.0)) for (u0, v0), (u1, v1) in zip(points, points[1:])
    )


@dataclass
class MaximalityReport:
    homotopy_class: Weight
    geodesic_length: float
    trials: int
    accepted: int
    max_length: float
    best_loop: list[tuple[float, float]] = field(default_factory=list)

    @property
    def acceptance_fraction(self) -> float:
        return self.accepted / self.trials if self.trials else 0.0

    @property
    def passed(self) -> bool:
        return self.max_length <= self.geodesic_length + EPS_MAXIMALITY

    def as_dict(self) -> dict:
        return {
            "class": list(self.homotopy_class),
            "geodesic_length": self.geodesic_length,
            "trials": self.trials,
            "accepted": self.accepted,
            "acceptance_fraction": self.acceptance_fraction,
            "max_length": self.max_length,
            "passed": self.passed,
        }


def _developed_axis_points(torus: SingularTorus, g: ClosedGeodesic, count: int) -> list[tuple[float, float]]:
    """Points along the developed geodesic from a start inside the polygon to its holonomy image."""
    arc = g.arcs[0]
    h = g.holonomy if g.orientation == "future" else g.holonomy.inverse()
    h = h.power(g.multiplicity)
    rep, att = h.fixed_points()
    axis = ChartCurve.axis(rep, att)
    p0 = arc.point(math.sqrt(arc.s0 * arc.s1))
    z0 = axis.parameter_of_u(p0[0])
    z1 = z0 * math.exp(g.length / LENGTH_FACTOR)
    pts = [axis.uv(z0 * (z1 / z0) ** (k / count)) for k in range(count + 1)]
    if not torus.polygon.contains(*pts[0]):
        # geodesics along glued sides start just inside the polygon
        d = 1e-6 * torus.polygon.scale
        for du, dv in ((d, d), (-d, -d), (d, -d), (-d, d), (0.0, d), (0.0, -d)):
            start = (pts[0][0] + du, pts[0][1] + dv)
            if torus.polygon.contains(*start):
                pts[0] = start
                pts[-1] = (h(start[0]), h(start[1]))
                break
    return pts


def causal_maximality_test(
    torus: SingularTorus,
    c: HomotopyClass | Sequence[int],
    trials: int = 500,
    *,
    seed: Optional[int] = None,
    pieces: int = 6,
    scale: float = 0.05,
) -> MaximalityReport:
    """Random causal loops in class c, developed and checked against the geodesic length."""
    hc = HomotopyClass.of(c)
    g = find_closed_timelike_geodesic(torus, hc, seed=seed)
    future_class = hc.pair if g.orientation == "future" else (-hc).pair
    base = _developed_axis_points(torus, g, pieces)
    rng = np.random.default_rng(seed)
    report = MaximalityReport(hc.pair, g.length, trials, 0, -math.inf)
    for _ in range(trials):
        pts = [base[0]]
        for u, v in base[1:-1]:
            du, dv = rng.uniform(-scale, scale, size=2) * (1.0 + abs(u) + abs(v))
            pts.append((u + du, v + dv))
        pts.append(base[-1])
        if not is_causal_loop(pts):
            continue
        try:
            dev = develop(torus, pts)
        except (TracingError, ValueError) as exc:
            logger.debug("sample rejected: %s", exc)
            continue
        if dev.homology != future_class:
            continue
        report.accepted += 1
        length = loop_length(pts)
        if length > report.max_length:
            report.max_length = length
            report.best_loop = pts
    if report.accepted == 0:
        logger.warning("causal sampler produced no loop in class %s", hc)
    elif not report.passed:
        logger.warning("causal loop longer than the geodesic: %.12g > %.12g", report.max_length, report.geodesic_length)
    return report


@dataclass
class UniquenessReport:
    homotopy_class: Weight
    seeds: int
    converged: int
    max_hausdorff: float
    simple: bool
    lengths: list[float] = field(default_factory=list)
    starts: list[Optional[tuple[float, float]]] = field(default_factory=list)

    @property
    def unique(self) -> bool:
        return self.converged > 0 and self.max_hausdorff <= EPS_HAUSDORFF

    def as_dict(self) -> dict:
        return {
            "class": list(self.homotopy_class),
            "seeds": self.seeds,
            "converged": self.converged,
            "failed": self.seeds - self.converged,
            "max_hausdorff": self.max_hausdorff,
            "simple": self.simple,
            "unique": self.unique,
            "starts": [list(p) if p is not None else None for p in self.starts],
        }


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def uniqueness_probe(torus: SingularTorus, c: HomotopyClass | Sequence[int], seeds: int = 10) -> UniquenessReport:
    """Shoot from independent seeds and compare the resulting point sets.

    Run k scrambles the Sobol sequence with seed k; only run 0 may start
    from the word axes, so every run starts from its own point.
    """
    hc = HomotopyClass.of(c)
    if not hc.is_primitive:
        raise ValueError(f"uniqueness check needs a primitive class, got {hc}")
    cone = timelike_cone(torus)
    side = cone.side(hc)
    if side not in ("future", "past"):
        raise NotTimelikeClass(hc, cone.report(hc))
    c0 = hc.pair if side == "future" else (-hc).pair
    found: list[ClosedGeodesic] = []
    for s in range(seeds):
        try:
            found.append(shoot(torus, c0, seed=s, use_cache=False, word_seeds=s == 0))
        except ShootingError as exc:
            logger.debug("seed %d: %s", s, exc)
    if not found:
        return UniquenessReport(hc.pair, seeds, 0, math.inf, False)
    ref = np.array([p for a in found[0].chart_arcs for p in (a.point(a.s0), a.point(a.s1))])
    worst = 0.0
    for g in found[1:]:
        pts = np.array([p for a in g.chart_arcs for p in (a.point(a.s0), a.point(a.s1))])
        worst = max(worst, _hausdorff(ref, pts))
    return UniquenessReport(
        hc.pair,
        seeds,
        len(found),
        worst,
        all(g.simple for g in found),
        [g.length for g in found],
        [g.seed_point for g in found],
    )
