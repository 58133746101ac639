import math

import numpy as np
import pytest

from chart_tracing import ConePointHit, chart_segments_inside
from ds2_geometry import ChartCurve, Mobius
from surface_builder import (
    ConeModel,
    annulus_from_rectangle,
    build_L_polygon,
    build_rectangle,
    build_torus,
    check_invariants,
    cone_trace,
    cone_transport,
    develop,
    edge_pairings_from,
    lpolygon_area,
    rectangle_torus,
    solve_unique_singularity,
    step_gap,
    torus_from_descriptor,
)
from lorentz_kernel import GeometryError


def test_cone_trace():
    assert cone_trace(0.0) == pytest.approx(2.0)
    assert cone_trace(1.0) == pytest.approx(2.0 * math.cosh(0.5))


def test_cone_model_rejects_bad_angle():
    with pytest.raises(GeometryError):
        ConeModel(0.0)
    with pytest.raises(GeometryError):
        ConeModel(-1.0)


def test_loop_around_cone_point_picks_up_the_cone_holonomy():
    cone = ConeModel(0.8)
    r = 0.1
    loop = []
    for phi in np.linspace(0.0, 2.0 * math.pi, 65):
        b, c = r * math.cos(phi), r * math.sin(phi)
        loop.append((math.sqrt(1.0 + c * c - b * b), b, c))
    dev = cone_transport(cone, loop)
    assert len(dev.ledger) == 1
    assert abs(dev.holonomy.trace) == pytest.approx(cone_trace(0.8), rel=1e-10)


def test_cone_transport_through_the_cone_point():
    with pytest.raises(ConePointHit):
        cone_transport(ConeModel(0.8), [(1.0, 0.0, 0.0), (1.0, 0.1, 0.1)])


def test_l_polygon_area():
    poly = build_L_polygon(1.0, 1.5, 0.5)
    assert 0.0 < poly.v1 < poly.v2 < 1.0
    assert lpolygon_area(poly.x, poly.v1, poly.v2) == pytest.approx(1.0, abs=1e-12)


def test_l_polygon_solves_for_the_step_height():
    poly = build_L_polygon(2.5, 3.0, 0.25)
    assert lpolygon_area(poly.x, poly.v1, poly.v2) == pytest.approx(2.5, abs=1e-12)
    assert poly.v2 - poly.v1 == pytest.approx(0.25 * step_gap(poly.x, poly.v2), rel=1e-12)


def test_l_polygon_area_out_of_reach():
    # the area grows like log 1/(1 - v2): no double below 1 reaches it
    with pytest.raises(ValueError, match="unsolvable"):
        build_L_polygon(200.0, 1.5, 0.5)


@pytest.mark.parametrize(
    "theta, x, y",
    [(0.0, 1.5, 0.5), (1.0, 0.9, 0.5), (1.0, 1.5, 0.0), (1.0, 1.5, 1.0)],
)
def test_l_polygon_rejects_bad_parameters(theta, x, y):
    with pytest.raises(ValueError):
        build_L_polygon(theta, x, y)


def test_l_torus_invariants(l_torus):
    report = check_invariants(l_torus)
    assert report.passed(), report.as_dict()
    assert len(l_torus.polygon) == 8
    assert l_torus.polygon.signed_area() == pytest.approx(1.0, abs=1e-6)
    assert sorted(l_torus.weights) == ["A1", "A2", "B1", "B2"]


def test_l_torus_regular_vertices(l_torus):
    cone = l_torus.cone_cycle
    assert not cone.is_regular()
    for cycle in l_torus.cycles:
        if cycle is not cone:
            assert cycle.is_regular()


def test_edge_pairings_from_solved_parameters(l_torus):
    poly = build_L_polygon(1.0, 1.5, 0.5)
    pairings = edge_pairings_from(l_torus.params["x_prime"], l_torus.params["y_prime"], poly)
    assert [p.name for p in pairings] == ["A1", "A2", "B1", "B2"]
    for p, q in zip(pairings, l_torus.pairings):
        assert (p.source, p.target, p.weight) == (q.source, q.target, q.weight)
        assert p.gluing.equals(q.gluing, 1e-12)
    with pytest.raises(ValueError):
        edge_pairings_from(0.9, l_torus.params["y_prime"], poly)
    with pytest.raises(ValueError):
        edge_pairings_from(l_torus.params["x_prime"], 0.0, poly)


@pytest.mark.slow
def test_gluing_solution_does_not_depend_on_the_seed():
    first = solve_unique_singularity(1.0, 1.5, 0.5, seed=0)
    for seed in (1, 2, 3):
        assert solve_unique_singularity(1.0, 1.5, 0.5, seed=seed) == pytest.approx(first, abs=1e-8)


@pytest.mark.parametrize("theta, x, y", [(0.5, 1.5, 0.5), (1.0, 2.0, 0.3)])
def test_l_torus_family(theta, x, y):
    assert check_invariants(build_torus(theta, x, y, seed=0)).passed()


def test_descriptor_rebuilds_the_same_torus(l_torus):
    again = torus_from_descriptor(l_torus.to_descriptor())
    for p, q in zip(l_torus.pairings, again.pairings):
        assert p.name == q.name
        assert p.gluing.equals(q.gluing, 1e-9)
    assert again.gen_a.equals(l_torus.gen_a, 1e-9)


def test_descriptor_kind_is_checked():
    with pytest.raises(ValueError):
        torus_from_descriptor({"kind": "hexagon", "theta": 1.0})


def test_rectangle_area_and_edge_lengths():
    rect = build_rectangle(1.0, 1.2, 1.2)
    assert rect.polygon().signed_area() == pytest.approx(1.0, abs=1e-8)
    ann = annulus_from_rectangle(1.0, 1.2, 1.2)
    top, bottom = ann.boundary_lengths
    assert top == pytest.approx(1.2, rel=1e-8)
    assert bottom == pytest.approx(1.2, rel=1e-8)


def test_rectangle_rejects_non_positive_lengths():
    with pytest.raises(ValueError):
        build_rectangle(1.0, 0.0, 1.2)


def test_rectangle_torus_invariants(rect_torus, rect_torus_untwisted):
    assert check_invariants(rect_torus).passed()
    assert check_invariants(rect_torus_untwisted).passed()
    assert len(rect_torus.polygon) == 8
    assert len(rect_torus_untwisted.polygon) == 6
    assert rect_torus.axis_length == pytest.approx(1.2)


def test_rectangle_torus_offset_range():
    with pytest.raises(ValueError):
        rectangle_torus(1.0, 1.2, 1.2)
    with pytest.raises(ValueError):
        rectangle_torus(1.0, 1.2, -0.1)


def _vertical_piece(torus):
    umin, umax, _, _ = torus.polygon.bounding_box()
    leaf = ChartCurve.alpha_leaf(0.5 * (umin + umax), 0.0)
    return leaf, max(chart_segments_inside(leaf, torus.polygon), key=lambda ab: ab[1] - ab[0])


def test_develop_inside_one_copy(rect_torus):
    leaf, (a, b) = _vertical_piece(rect_torus)
    path = [leaf.uv(a + 0.3 * (b - a)), leaf.uv(a + 0.7 * (b - a))]
    dev = develop(rect_torus, path)
    assert dev.ledger == []
    assert dev.homology == (0, 0)
    assert dev.holonomy.equals(Mobius.identity())


def test_develop_across_one_side(rect_torus):
    leaf, (a, b) = _vertical_piece(rect_torus)
    path = [leaf.uv(a + 0.5 * (b - a)), leaf.uv(b + 0.01 * (b - a))]
    dev = develop(rect_torus, path)
    assert len(dev.ledger) == 1
    side, sign = dev.ledger[0]
    assert sign == 1
    (pairing,) = [p for p in rect_torus.pairings if p.target == side]
    assert dev.holonomy.equals(pairing.gluing)
    assert dev.homology == pairing.weight


def test_develop_must_start_inside(rect_torus):
    with pytest.raises(ValueError):
        develop(rect_torus, [(1e6, 1e6 + 1.0), (1e6, 1e6 + 2.0)])
