import math

import numpy as np
import pytest

from closed_geodesics import (
    ClosedGeodesic,
    boundary_geodesic,
    default_transversal,
    geodesic_length_oracle,
    shoot,
)
from ds2_geometry import Mobius
from lorentz_kernel import GeometryError


def test_length_oracle():
    assert geodesic_length_oracle(Mobius(np.diag([math.e, 1 / math.e]))) == pytest.approx(2.0)
    with pytest.raises(GeometryError):
        geodesic_length_oracle(Mobius(np.array([[1.0, 1.0], [0.0, 1.0]])))


def test_boundary_geodesic_has_length_l(rect_torus):
    g = boundary_geodesic(rect_torus)
    assert g.homology == (1, 0)
    assert g.primitive_length == pytest.approx(1.2, rel=1e-10)
    assert g.oracle_residual() < 1e-10
    assert len(g.representatives) == len(g.arcs)


def test_boundary_geodesic_of_untwisted_torus(rect_torus_untwisted):
    g = boundary_geodesic(rect_torus_untwisted)
    assert g.length == pytest.approx(1.2, rel=1e-10)
    assert len(g.arcs) == 1


def test_l_torus_has_no_boundary_geodesic(l_torus):
    with pytest.raises(ValueError):
        boundary_geodesic(l_torus)


def test_multiple_traversals(rect_torus):
    g = boundary_geodesic(rect_torus)
    twice = ClosedGeodesic((2, 0), g.arcs, g.holonomy, multiplicity=2)
    assert twice.length == pytest.approx(2 * g.length)
    assert twice.primitive_class == (1, 0)
    assert not twice.simple
    assert geodesic_length_oracle(twice.total_holonomy) == pytest.approx(twice.length, rel=1e-10)


def test_rectangle_transversal_is_the_boundary_geodesic(rect_torus):
    assert default_transversal(rect_torus).primitive_length == pytest.approx(1.2, rel=1e-10)


@pytest.mark.parametrize("target", [(0, 0), (2, 0), (3, -6)])
def test_shoot_rejects_non_primitive_classes(rect_torus, target):
    with pytest.raises(ValueError):
        shoot(rect_torus, target)


def test_shot_geodesic_matches_its_holonomy(l_torus):
    g = default_transversal(l_torus, seed=0)
    assert g.oracle_residual() < 1e-8 * max(1.0, g.primitive_length)
    assert g.arcs
