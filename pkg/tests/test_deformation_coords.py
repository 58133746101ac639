import math

import pandas as pd
import pytest

from deformation_coords import (
    LengthTwist,
    RigidityReport,
    check_basis,
    coordinates,
    dehn_twist_action,
    from_length_twist,
    length_coordinate,
    rigidity_scan,
    round_trip_residual,
    twist_coordinate,
    twist_family,
)
from surface_builder import check_invariants


def test_length_twist_validation():
    with pytest.raises(ValueError):
        LengthTwist(0.0, 0.5)
    with pytest.raises(ValueError):
        LengthTwist(-1.0, 0.5)
    with pytest.raises(ValueError):
        LengthTwist(1.0, math.nan)
    lt = LengthTwist(1.2, -1.25)
    assert lt.twists == -2
    assert lt.fraction == pytest.approx(0.75)
    assert lt.distance(LengthTwist(1.25, -1.0)) == pytest.approx(0.25)
    assert lt.as_dict() == {"l": 1.2, "theta_twist": -1.25}


def test_check_basis():
    assert check_basis([(1, 0), (0, 1)]) == ((1, 0), (0, 1))
    assert check_basis([(2, 1), (1, 1)]) == ((2, 1), (1, 1))
    with pytest.raises(ValueError):
        check_basis([(2, 0), (0, 1)])
    with pytest.raises(ValueError):
        check_basis([(1, 1), (1, 1)])


def test_dehn_twist_changes_the_marking_only(rect_torus):
    twisted = dehn_twist_action(rect_torus, 2)
    assert twisted.twist_count == rect_torus.twist_count + 2
    assert twisted.weights == {"A1": (1, 0), "A2": (1, 0), "B1": (3, 1), "B2": (2, 1)}
    assert rect_torus.weights["B2"] == (0, 1)
    assert twisted.gen_b.equals(rect_torus.gen_b @ rect_torus.gen_a.power(-2))
    assert twisted.gen_a.equals(rect_torus.gen_a)
    assert check_invariants(twisted).passed()
    back = dehn_twist_action(twisted, -2)
    assert back.weights == rect_torus.weights
    assert back.twist_count == rect_torus.twist_count


@pytest.mark.parametrize(
    "theta_twist, count, offset",
    [(0.25, 0, 0.3), (2.25, 2, 0.3), (-0.75, -1, 0.3), (1.0, 1, 0.0)],
)
def test_inverse_chart_layout(theta_twist, count, offset):
    torus = from_length_twist(1.0, LengthTwist(1.2, theta_twist))
    assert torus.kind == "rectangle"
    assert torus.twist_count == count
    assert torus.params["offset"] == pytest.approx(offset, abs=1e-12)


def test_inverse_chart_in_a_sheared_basis():
    torus = from_length_twist(1.0, (1.2, 0.25), [(1, 0), (1, 1)])
    assert torus.twist_count == 1
    assert torus.params["offset"] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        from_length_twist(1.0, (1.2, 0.25), [(0, 1), (-1, 0)])


def test_twist_family_on_a_rectangle_torus(rect_torus):
    point = twist_family(rect_torus, 1.0)
    assert point.torus.twist_count == 1
    assert point.torus.params["offset"] == pytest.approx(0.1)
    assert point.coordinates.theta_twist == pytest.approx(0.25 + 1.0 / 1.2)
    assert point.base is rect_torus
    with pytest.raises(ValueError):
        twist_family(rect_torus, 1.2)
    with pytest.raises(ValueError):
        twist_family(rect_torus, -0.1)


def test_length_coordinate_of_a_rectangle_torus(rect_torus):
    assert length_coordinate(rect_torus, check_cone=False) == pytest.approx(1.2, rel=1e-10)
    with pytest.raises(ValueError):
        length_coordinate(rect_torus, (2, 0), check_cone=False)


def test_twist_coordinate_reads_the_offset(rect_torus):
    assert twist_coordinate(rect_torus, check_cone=False) == pytest.approx(0.25, abs=1e-6)


def test_twist_coordinate_counts_dehn_twists(rect_torus):
    twisted = dehn_twist_action(rect_torus, 1)
    assert twist_coordinate(twisted, check_cone=False) == pytest.approx(1.25, abs=1e-6)


def test_coordinates_round_trip():
    lt = LengthTwist(1.2, 0.3)
    assert round_trip_residual(1.0, lt) < 1e-8
    again = coordinates(from_length_twist(1.0, lt), check_cone=False)
    assert again.l == pytest.approx(1.2, rel=1e-10)


def test_rigidity_scan_needs_the_standard_chart():
    with pytest.raises(ValueError):
        rigidity_scan(1.0, [1.0], [0.0], [(0, 1), (-1, 0)], workers=1)


def test_rigidity_report_counts_exclusions():
    frame = pd.DataFrame(
        {
            "l": [1.0, 1.0, 2.0],
            "theta_twist": [0.0, 0.5, 0.0],
            "L_a": [1.0, math.nan, 2.0],
            "L_b": [1.5, math.nan, 2.5],
            "jac_det": [0.3, math.nan, math.nan],
            "flags": ["", "excluded:SolverError", "no-jacobian:TracingError"],
        }
    )
    report = RigidityReport(1.0, frame, min_pair_distance=1.4)
    assert report.excluded == 1
    assert report.passed
    assert report.summary()["min_pair_distance"] == 1.4
    assert "smoothness" not in report.summary()


@pytest.mark.slow
def test_small_rigidity_scan():
    report = rigidity_scan(1.0, [0.8, 1.6], [-0.5, 0.5], workers=1, smoke=True)
    assert len(report.frame) == 4
    assert report.passed
    assert report.grid["l"] == [0.8, 1.6, 2]
    assert report.smoothness is not None


@pytest.mark.slow
@pytest.mark.parametrize("l", [0.3, 1.5, 3.0])
@pytest.mark.parametrize("theta_twist", [-2.0, -0.5, 0.75, 1.9])
def test_round_trip_sweep(l, theta_twist):
    assert round_trip_residual(1.0, LengthTwist(l, theta_twist)) < 1e-8


def test_single_point_rigidity_scan():
    report = rigidity_scan(1.0, [1.0], [0.25], workers=1)
    assert len(report.frame) == 1
    row = report.frame.iloc[0]
    assert not row["flags"].startswith("excluded")
    assert row["L_a"] == pytest.approx(1.0, rel=1e-8)
    assert row["L_b"] > 0.0
    assert report.passed
