import itertools
from dataclasses import dataclass, field

import numpy as np
import pytest

from chart_tracing import (
    ZERO_WEIGHT,
    ChartPolygon,
    ConePointHit,
    EdgePairing,
    TracingError,
    VertexHit,
    add_weight,
    chart_segments_inside,
    entry_parameter,
    iter_trace,
    ledger_product,
    next_exit,
)
from ds2_geometry import ChartCurve, Mobius, lightlike_rectangle_area

SQUARE = [(1.0, -2.0), (2.0, -2.0), (2.0, -1.0), (1.0, -1.0)]


@dataclass
class OpenSurface:
    """Polygon without gluings; tracing stops at the first side."""

    polygon: ChartPolygon
    pairings: list = field(default_factory=list)
    cones: set = field(default_factory=set)

    @property
    def cone_vertices(self):
        return self.cones


@pytest.fixture
def square():
    return ChartPolygon.from_vertices(SQUARE)


def test_square_sides_are_lightlike(square):
    assert [s.kind for s in square.sides] == ["beta", "alpha", "beta", "alpha"]
    assert square.bounding_box() == (1.0, 2.0, -2.0, -1.0)


def test_contains(square):
    assert square.contains(1.5, -1.5)
    assert not square.contains(0.5, -1.5)
    assert not square.contains(2.5, -1.5)
    assert not square.contains(1.5, 0.0)
    assert not square.contains(float("nan"), -1.5)


def test_signed_area_matches_rectangle(square):
    assert abs(square.signed_area()) == pytest.approx(lightlike_rectangle_area(1.0, 2.0, -2.0, -1.0), rel=1e-10)


def test_nearest_vertex(square):
    k, d = square.nearest_vertex(2.1, -1.0)
    assert k == 2
    assert d == pytest.approx(0.1)


def test_alpha_leaf_pieces(square):
    leaf = ChartCurve.alpha_leaf(1.5, 0.0)
    pieces = chart_segments_inside(leaf, square)
    assert len(pieces) == 1
    assert pieces[0] == pytest.approx((1.0, 2.0))
    assert entry_parameter(square, leaf) == pytest.approx(1.5)
    assert entry_parameter(square, ChartCurve.alpha_leaf(3.0, 0.0)) is None


def test_next_exit_finds_bottom_side(square):
    s, side = next_exit(square, ChartCurve.alpha_leaf(1.5, 0.0), 1.5)
    assert s == pytest.approx(2.0)
    assert side == 0


def test_trace_stops_at_unpaired_side(square):
    arcs = list(iter_trace(OpenSurface(square), ChartCurve.alpha_leaf(1.5, 0.0), 1.5))
    assert len(arcs) == 1
    arc = arcs[0]
    assert arc.exit_side == 0
    assert arc.exit_sign == 0
    assert arc.weight == ZERO_WEIGHT
    assert arc.end == pytest.approx((1.5, -2.0))


def test_trace_through_a_corner(square):
    diagonal = ChartCurve.line(1.5, -1.5, 1.0, -1.0)
    with pytest.raises(VertexHit) as info:
        list(iter_trace(OpenSurface(square), diagonal, 0.0))
    assert info.value.vertex == 1
    assert isinstance(info.value, TracingError)
    with pytest.raises(ConePointHit):
        list(iter_trace(OpenSurface(square, cones={1}), diagonal, 0.0))


def test_trace_from_outside_fails(square):
    with pytest.raises(TracingError):
        list(iter_trace(OpenSurface(square), ChartCurve.alpha_leaf(3.0, 0.0), 0.0))


def test_weights_and_ledger(square):
    assert add_weight((1, 2), (3, -1)) == (4, 1)
    assert add_weight((1, 2), (3, -1), -1) == (-2, 3)
    g = Mobius(np.array([[2.0, 1.0], [1.0, 1.0]]))
    surface = OpenSurface(square, [EdgePairing("a", 0, 2, g, (1, 0))])
    hol, w = ledger_product(surface, [(2, 1), (0, -1)])
    assert hol.equals(Mobius.identity())
    assert w == (0, 0)
    hol, w = ledger_product(surface, [(2, 1), (2, 1)])
    assert hol.equals(g @ g)
    assert w == (2, 0)


def test_pairing_dict():
    g = Mobius(np.array([[2.0, 1.0], [1.0, 1.0]]))
    d = EdgePairing("a", 0, 2, g, (1, 0)).to_dict()
    assert d["name"] == "a"
    assert d["weight"] == [1, 0]
    assert len(d["mobius"]) == 2


def test_rebased_leaf_is_affine_through_the_current_point():
    g = Mobius(np.array([[2.0, 1.0], [1.0, 1.0]]))
    alpha = ChartCurve.alpha_leaf(0.5, 0.0).transformed(g).rebased(0.0)
    assert alpha.uv(0.25) == pytest.approx((4.0 / 3.0, 0.75))
    assert alpha.parameter_at(4.0 / 3.0, 0.75) == pytest.approx(0.25)
    beta = ChartCurve.beta_leaf(0.0, 0.5).transformed(g).rebased(0.0)
    assert beta.uv(0.25) == pytest.approx((1.25, 4.0 / 3.0))
    assert beta.parameter_at(1.25, 4.0 / 3.0) == pytest.approx(0.25)


def _inside(polygon):
    umin, umax, vmin, vmax = polygon.bounding_box()
    for k in range(1, 500):
        u = umin + ((k * 0.6180339887) % 1.0) * (umax - umin)
        v = vmin + ((k * 0.7548776662) % 1.0) * (vmax - vmin)
        if polygon.contains(u, v):
            return u, v
    raise AssertionError("no interior point")


@pytest.mark.parametrize("surface", ["rect_torus", "l_torus"])
@pytest.mark.parametrize("fol", ["alpha", "beta"])
def test_leaf_keeps_crossing_through_gluings(request, surface, fol):
    torus = request.getfixturevalue(surface)
    u, v = _inside(torus.polygon)
    leaf = ChartCurve.alpha_leaf(u, v) if fol == "alpha" else ChartCurve.beta_leaf(u, v)
    arcs = list(itertools.islice(iter_trace(torus, leaf), 12))
    assert len(arcs) == 12
    for arc in arcs:
        assert arc.exit_sign != 0
        assert arc.s1 > arc.s0
        assert torus.polygon.contains(*arc.point(0.5 * (arc.s0 + arc.s1)))
    # each copy is entered where the previous one was left
    for prev, arc in zip(arcs, arcs[1:]):
        pu, pv = prev.end
        hu, hv = prev.holonomy(pu), prev.holonomy(pv)
        cu, cv = arc.point(arc.s0)
        assert (arc.holonomy(cu), arc.holonomy(cv)) == pytest.approx((hu, hv), rel=1e-7, abs=1e-9)
    hol, w = ledger_product(torus, [(a.exit_side, a.exit_sign) for a in arcs[:-1]])
    assert hol.equals(arcs[-1].holonomy, 1e-6 * max(1.0, np.max(np.abs(hol.m))))
    assert w == arcs[-1].weight


def test_untracked_holonomy_keeps_the_start(rect_torus):
    u, v = _inside(rect_torus.polygon)
    arcs = list(itertools.islice(iter_trace(rect_torus, ChartCurve.beta_leaf(u, v), track_holonomy=False), 5))
    assert all(a.holonomy.equals(Mobius.identity()) for a in arcs)
    _, w = ledger_product(rect_torus, [(a.exit_side, a.exit_sign) for a in arcs[:-1]])
    assert arcs[-1].weight == w


def test_trace_stops_at_a_developed_point(square):
    arcs = list(iter_trace(OpenSurface(square), ChartCurve.alpha_leaf(1.5, -1.2), stop_at=(1.5, -1.6)))
    assert len(arcs) == 1
    assert arcs[0].exit_side is None
    assert arcs[0].s1 == pytest.approx(0.4)
    assert arcs[0].end == pytest.approx((1.5, -1.6))
    # a stop point beyond the unpaired side is never reached
    arcs = list(iter_trace(OpenSurface(square), ChartCurve.alpha_leaf(1.5, -1.2), stop_at=(1.5, -3.0)))
    assert arcs[-1].exit_side == 0
