#!/usr/bin/env python3
"""SVG figures of a fundamental polygon with leaf and geodesic overlays."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import drawsvg as draw
import numpy as np

from chart_tracing import ChartPolygon, chart_segments_inside
from closed_geodesics import ClosedGeodesic
from ds2_geometry import ChartCurve
from surface_builder import SingularTorus

logger = logging.getLogger("svg_render")

CANVAS = 1000
PADDING = 40
SAMPLES = 48
GEODESIC_SAMPLES = 200
STYLE = {
    "background": "#ffffff",
    "polygon": "#1f2933",
    "fill": "#f5f7fa",
    "alpha": "#3e7cb1",
    "beta": "#c05746",
    "geodesic": "#2a9d8f",
    "cone": "#e9c46a",
    "label": "#52606d",
}


class ChartFrame:
    """Affine map from chart (u, v) to canvas pixels, v pointing up."""

    def __init__(self, polygon: ChartPolygon, size: int = CANVAS, padding: int = PADDING) -> None:
        umin, umax, vmin, vmax = polygon.bounding_box()
        span = max(umax - umin, vmax - vmin, 1e-9)
        self.scale = (size - 2 * padding) / span
        self.umin, self.vmax = umin, vmax
        self.padding = padding
        self.size = size

    def __call__(self, u: float, v: float) -> tuple[float, float]:
        return self.padding + (u - self.umin) * self.scale, self.padding + (self.vmax - v) * self.scale


def _samples(curve: ChartCurve, s0: float, s1: float, n: int = SAMPLES) -> list[tuple[float, float]]:
    if curve.kind == "geodesic" and s0 > 0 and s1 > 0:
        params = np.geomspace(s0, s1, n)
    else:
        params = np.linspace(s0, s1, n)
    return [curve.uv(float(s)) for s in params]


def _polyline(frame: ChartFrame, points: Sequence[tuple[float, float]], **style) -> draw.Lines:
    flat: list[float] = []
    for u, v in points:
        flat.extend(frame(u, v))
    return draw.Lines(*flat, close=False, fill="none", **style)


def _outline(frame: ChartFrame, polygon: ChartPolygon) -> draw.Lines:
    points: list[tuple[float, float]] = []
    for side in polygon.sides:
        seg = side.segment
        points.extend(_samples(seg.curve, seg.s0, seg.s1)[:-1])
    flat: list[float] = []
    for u, v in points:
        flat.extend(frame(u, v))
    return draw.Lines(*flat, close=True, fill=STYLE["fill"], stroke=STYLE["polygon"], stroke_width=1.5)


def _labels(frame: ChartFrame, torus: SingularTorus) -> list[draw.Text]:
    out = []
    for p in torus.pairings:
        for side_index, mark in ((p.source, ""), (p.target, "'")):
            seg = torus.polygon.sides[side_index].segment
            mid = 0.5 * (seg.s0 + seg.s1) if seg.curve.kind != "geodesic" else math.sqrt(seg.s0 * seg.s1)
            x, y = frame(*seg.curve.uv(mid))
            out.append(draw.Text(f"{p.name}{mark}", 12, x + 4, y - 4, fill=STYLE["label"], font_family="sans-serif"))
    return out


def _leaves(frame: ChartFrame, polygon: ChartPolygon, foliation: str, count: int) -> list[draw.Lines]:
    umin, umax, vmin, vmax = polygon.bounding_box()
    out = []
    if foliation == "alpha":
        for u in umin + (umax - umin) * (np.arange(count) + 0.5) / count:
            curve = ChartCurve.alpha_leaf(float(u), 0.0)
            for a, b in chart_segments_inside(curve, polygon):
                out.append(_polyline(frame, [curve.uv(a), curve.uv(b)], stroke=STYLE["alpha"], stroke_width=0.8))
    elif foliation == "beta":
        for v in vmin + (vmax - vmin) * (np.arange(count) + 0.5) / count:
            curve = ChartCurve.beta_leaf(0.0, float(v))
            for a, b in chart_segments_inside(curve, polygon):
                out.append(_polyline(frame, [curve.uv(a), curve.uv(b)], stroke=STYLE["beta"], stroke_width=0.8))
    else:
        raise ValueError(f"unknown foliation {foliation!r}")
    return out


def render_torus(
    torus: SingularTorus,
    *,
    leaves: Optional[str] = None,
    leaf_count: int = 16,
    geodesic: Optional[ClosedGeodesic] = None,
    size: int = CANVAS,
) -> draw.Drawing:
    """Fundamental polygon with gluing labels, cone point and optional overlays."""
    frame = ChartFrame(torus.polygon, size)
    d = draw.Drawing(size, size)
    d.append(draw.Rectangle(0, 0, size, size, fill=STYLE["background"]))
    d.append(_outline(frame, torus.polygon))
    if leaves in ("alpha", "both"):
        for line in _leaves(frame, torus.polygon, "alpha", leaf_count):
            d.append(line)
    if leaves in ("beta", "both"):
        for line in _leaves(frame, torus.polygon, "beta", leaf_count):
            d.append(line)
    if geodesic is not None:
        for arc in geodesic.arcs:
            d.append(_polyline(frame, _samples(arc.curve, arc.s0, arc.s1, GEODESIC_SAMPLES), stroke=STYLE["geodesic"], stroke_width=2))
    for label in _labels(frame, torus):
        d.append(label)
    for k in sorted(torus.cone_vertices):
        x, y = frame(*torus.polygon.vertices[k])
        d.append(draw.Circle(x, y, 4, fill=STYLE["cone"], stroke=STYLE["polygon"], stroke_width=1))
    d.append(
        draw.Text(
            f"{torus.kind} torus, theta = {torus.theta:.6g}",
            13,
            PADDING,
            PADDING / 2,
            fill=STYLE["label"],
            font_family="sans-serif",
        )
    )
    return d


def write_svg(drawing: draw.Drawing, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    drawing.save_svg(str(path))
    logger.info("wrote %s", path)
    return path
