import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from ds2_geometry import (
    METRIC_LAMBDA,
    ChartCurve,
    Mobius,
    ProjPoint,
    TimelikePolygon,
    area_element,
    chart_inner,
    curve_form_roots,
    from_projective,
    gauss_bonnet_residual,
    geodesic_through,
    invariant_metric,
    isometry_of,
    lightlike_rectangle_area,
    limit_points,
    lorentz_angle,
    metric_constant_at,
    mobius_of,
    plane_pair_configuration,
    polygon_area,
    proj_point_vector,
    random_timelike_triangle,
    three_point_map,
    timelike_distance,
    to_projective,
)
from lorentz_kernel import GeometryError, MinkPlane, inner, q_form


def test_metric_constant():
    assert METRIC_LAMBDA == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize("u, v", [(0.5, -2.0), (3.0, 1.0), (-1.0, 4.0)])
def test_projective_round_trip(u, v):
    p = proj_point_vector(u, v)
    assert q_form(p) == pytest.approx(1.0, abs=1e-12)
    back = to_projective(p)
    assert back.u == pytest.approx(u, abs=1e-10)
    assert back.v == pytest.approx(v, abs=1e-10)
    assert np.allclose(from_projective(ProjPoint(u, v)).array, p)


def test_invariant_metric_components():
    g = invariant_metric(ProjPoint(2.0, -1.0))
    assert g[0, 0] == 0.0 and g[1, 1] == 0.0
    assert g[0, 1] == pytest.approx(METRIC_LAMBDA / 18.0)
    assert metric_constant_at(ProjPoint(2.0, -1.0)) == pytest.approx(METRIC_LAMBDA, rel=1e-6)
    with pytest.raises(GeometryError):
        invariant_metric(ProjPoint(math.inf, 0.0))


def test_chart_inner_matches_hyperboloid():
    a, b = (0.5, -2.0), (1.5, -0.5)
    expected = inner(proj_point_vector(*a), proj_point_vector(*b))
    assert chart_inner(*a, *b) == pytest.approx(expected, rel=1e-12)


def test_diagonal_pair_rejected():
    with pytest.raises(GeometryError):
        ProjPoint(1.0, 1.0)


def test_mobius_normalization_and_invariants():
    m = Mobius(np.diag([math.e, 1 / math.e]))
    assert m.trace == pytest.approx(math.e + 1 / math.e)
    assert m.translation_length() == pytest.approx(2.0)
    rep, att = m.fixed_points()
    assert abs(rep[0]) == pytest.approx(0.0, abs=1e-12)
    assert abs(att[1]) == pytest.approx(0.0, abs=1e-12)
    assert Mobius(-2 * np.eye(2)).equals(Mobius.identity())
    with pytest.raises(GeometryError):
        Mobius(np.diag([1.0, -1.0]))
    with pytest.raises(GeometryError):
        Mobius(np.array([[0.0, -1.0], [1.0, 0.0]])).fixed_points()


def test_long_products_stay_in_psl2():
    m = Mobius(np.array([[2.0, 1.0], [1.0, 1.0]]))
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    # entries near 1e16: det(m^40) is lost to cancellation
    big = m.power(40)
    assert big.trace == pytest.approx(phi**80 + phi**-80, rel=1e-9)
    assert big.translation_length() == pytest.approx(40 * m.translation_length(), rel=1e-9)
    assert (big @ m).trace == pytest.approx(phi**82 + phi**-82, rel=1e-9)
    assert big.inverse().trace == pytest.approx(big.trace, rel=1e-12)


def test_psl2_check_is_relative_to_entry_size():
    assert Mobius(np.diag([1e-4, 1e-4])).equals(Mobius.identity())
    assert Mobius(np.array([[3e8, 1e8], [1e8, 1e8]])).equals(Mobius(np.array([[3.0, 1.0], [1.0, 1.0]])), 1e-12)
    with pytest.raises(GeometryError):
        Mobius(np.array([[1e8, 1e8], [1e8, 1e8]]))
    with pytest.raises(GeometryError):
        Mobius(np.array([[1e8, 0.0], [0.0, 1e-9]]))


def test_three_point_map():
    g = three_point_map([(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)], [(2.0, 1.0), (5.0, 1.0), (3.0, 1.0)])
    assert g(0.0) == pytest.approx(2.0)
    assert g(math.inf) == pytest.approx(5.0)
    assert g(1.0) == pytest.approx(3.0)


def test_isometry_dictionary_is_equivariant():
    m = Mobius(np.array([[2.0, 1.0], [1.0, 1.0]]))
    g = isometry_of(m)
    u, v = 0.5, -2.0
    assert np.allclose(g.apply(proj_point_vector(u, v)), proj_point_vector(m(u), m(v)), atol=1e-10)
    assert mobius_of(g).equals(m, 1e-10)


def test_timelike_distance_along_standard_geodesic():
    curve, s_q = ChartCurve.through_points((1.0, -1.0), (math.e, -math.e))
    d = timelike_distance(proj_point_vector(1.0, -1.0), proj_point_vector(math.e, -math.e))
    assert d == pytest.approx(1.0, rel=1e-12)
    assert curve.arc_length(1.0, s_q) == pytest.approx(d, rel=1e-10)


def test_spacelike_pair_has_no_timelike_distance():
    with pytest.raises(GeometryError):
        timelike_distance(proj_point_vector(1.0, -1.0), proj_point_vector(0.5, 2.0))


def test_lightlike_pair_has_no_timelike_distance():
    # same alpha leaf: <p, q> = 1 exactly
    p, q = proj_point_vector(1.0, -1.0), proj_point_vector(1.0, 3.0)
    assert inner(p, q) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(GeometryError):
        timelike_distance(p, q)
    assert timelike_distance(p, p) == 0.0


def test_geodesic_through_and_limit_points():
    g = geodesic_through((1.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    assert g.causal_type == "timelike"
    assert q_form(g.at(0.8)) == pytest.approx(1.0)
    future, past = limit_points(g)
    assert future.is_future
    with pytest.raises(GeometryError):
        geodesic_through((1.0, 0.0, 0.0), (1.0, 0.0, 0.0))


def test_plane_pair_configuration():
    e1, e2, e3 = np.eye(3)
    meet = plane_pair_configuration(MinkPlane.span(e1, e3), MinkPlane.span(e1, (0.0, 0.5, 1.0)))
    assert meet.intersection == "spacelike"
    assert "meet" in meet.pairs.values()
    disjoint = plane_pair_configuration(MinkPlane.span(e1, e3), MinkPlane.span(e2, e3))
    assert disjoint.intersection == "timelike"
    assert set(disjoint.pairs.values()) == {"none"}


def test_component_closures_are_sampled():
    e1, e2, e3 = np.eye(3)
    disjoint = plane_pair_configuration(MinkPlane.span(e1, e3), MinkPlane.span(e2, e3))
    assert len(disjoint.gaps) == 6
    assert disjoint.closures_disjoint
    assert min(disjoint.gaps.values()) > 0.5
    # both planes contain the lightlike line through (1, 0, 1): two closures share a limit point
    touching = plane_pair_configuration(MinkPlane.span(e1, e3), MinkPlane.span((1.0, 0.0, 1.0), (0.0, 1.0, 0.5)))
    assert touching.intersection == "lightlike"
    assert "future-asymptotic" in touching.pairs.values()
    assert not touching.closures_disjoint
    assert min(touching.gaps.values()) < 1e-9
    meet = plane_pair_configuration(MinkPlane.span(e1, e3), MinkPlane.span(e1, (0.0, 0.5, 1.0)))
    assert not meet.closures_disjoint


def test_lightlike_rectangle_area_matches_quadrature():
    value, _ = dblquad(lambda v, u: area_element(u, v), 1.0, 2.0, -2.0, -1.0)
    assert lightlike_rectangle_area(1.0, 2.0, -2.0, -1.0) == pytest.approx(value, rel=1e-8)
    square = TimelikePolygon.from_vertices(
        [ProjPoint(1.0, -2.0), ProjPoint(2.0, -2.0), ProjPoint(2.0, -1.0), ProjPoint(1.0, -1.0)]
    )
    assert polygon_area(square) == pytest.approx(value, rel=1e-8)


def test_curve_meets_alpha_leaf():
    standard = ChartCurve(np.eye(2), np.diag([-1.0, 1.0]), "geodesic")
    roots = curve_form_roots(standard, ChartCurve.alpha_leaf(2.0, 0.0).form())
    assert roots == pytest.approx([2.0])


def test_gauss_bonnet_on_random_triangles():
    rng = np.random.default_rng(7)
    worst = max(gauss_bonnet_residual(random_timelike_triangle(rng)) for _ in range(25))
    assert worst < 1e-6


def test_gauss_bonnet_needs_geodesic_edges():
    square = TimelikePolygon.from_vertices(
        [ProjPoint(1.0, -2.0), ProjPoint(2.0, -2.0), ProjPoint(2.0, -1.0), ProjPoint(1.0, -1.0)]
    )
    with pytest.raises(GeometryError):
        gauss_bonnet_residual(square)


def test_lorentz_angle_between_timelike_directions():
    p = (1.0, 0.0, 0.0)
    t = 0.7
    x = (0.0, 0.0, 1.0)
    y = (0.0, math.sinh(t), math.cosh(t))
    assert abs(lorentz_angle(x, y, p)) == pytest.approx(t, rel=1e-12)
    assert lorentz_angle(y, x, p) == pytest.approx(-lorentz_angle(x, y, p))
    assert lorentz_angle(x, x, p) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(GeometryError):
        lorentz_angle((0.0, 1.0, 0.0), y, p)
