import numpy as np
import pytest

from lorentz_kernel import (
    CausalClass,
    GeometryError,
    Isometry,
    MinkPlane,
    MinkVector,
    classify,
    classify_plane,
    inner,
    is_isometry,
    lorentz_cross,
    q_form,
    stabilizer_boost,
)


@pytest.mark.parametrize(
    "vec, expected",
    [
        ((1.0, 0.0, 0.0), CausalClass.SPACELIKE),
        ((0.0, 0.0, 1.0), CausalClass.TIMELIKE_FUTURE),
        ((0.0, 0.3, -2.0), CausalClass.TIMELIKE_PAST),
        ((1.0, 0.0, 1.0), CausalClass.LIGHTLIKE_FUTURE),
        ((0.0, -1.0, -1.0), CausalClass.LIGHTLIKE_PAST),
        ((0.0, 0.0, 0.0), CausalClass.ZERO),
    ],
)
def test_classify(vec, expected):
    assert classify(vec) == expected


def test_quadratic_form_signature():
    assert q_form((1, 0, 0)) == 1.0
    assert q_form((0, 1, 0)) == 1.0
    assert q_form((0, 0, 1)) == -1.0
    assert inner((1, 2, 3), (4, 5, 6)) == pytest.approx(4 + 10 - 18)
    assert q_form(MinkVector(3.0, 4.0, 5.0)) == pytest.approx(0.0)


def test_bad_vectors_rejected():
    with pytest.raises(GeometryError):
        q_form((1.0, 2.0))
    with pytest.raises(GeometryError):
        classify((np.nan, 0.0, 0.0))


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((1, 0, 0), (0, 0, 1), "timelike"),
        ((1, 0, 0), (0, 1, 0), "spacelike"),
        ((1, 0, 0), (0, 1, 1), "lightlike"),
    ],
)
def test_classify_plane(a, b, expected):
    assert classify_plane(MinkPlane.span(a, b)) == expected


def test_degenerate_span():
    with pytest.raises(GeometryError):
        MinkPlane.span((1, 0, 0), (2, 0, 0))


def test_stabilizer_boost_fixes_base_and_is_a_group():
    base = (1.0, 0.0, 0.0)
    g = stabilizer_boost(base, 0.7)
    assert is_isometry(g.m)
    assert np.allclose(g.apply(base), base, atol=1e-12)
    h = stabilizer_boost(base, 0.7) @ stabilizer_boost(base, 0.5)
    assert np.allclose(h.m, stabilizer_boost(base, 1.2).m, atol=1e-10)
    assert np.allclose((g @ g.inverse()).m, np.eye(3), atol=1e-12)


def test_boost_of_non_spacelike_base():
    with pytest.raises(GeometryError):
        stabilizer_boost((0.0, 0.0, 1.0), 1.0)


def test_boost_acts_as_hyperbolic_rotation_in_orthogonal_plane():
    g = stabilizer_boost((1.0, 0.0, 0.0), 0.9)
    v = g.apply((0.0, 0.0, 1.0))
    assert q_form(v) == pytest.approx(-1.0)
    assert abs(v[1]) == pytest.approx(np.sinh(0.9))
    assert v[2] == pytest.approx(np.cosh(0.9))


def test_is_isometry_rejects_reflections():
    assert is_isometry(np.eye(3))
    assert not is_isometry(np.diag([1.0, 1.0, -1.0]))
    assert not is_isometry(np.diag([-1.0, 1.0, 1.0]))
    assert not is_isometry(2 * np.eye(3))
    assert Isometry.identity().apply((1, 2, 3)).tolist() == [1.0, 2.0, 3.0]


def test_lorentz_cross_is_orthogonal():
    u, v = np.array([1.0, 0.5, 0.2]), np.array([0.3, -1.0, 2.0])
    n = lorentz_cross(u, v)
    assert inner(n, u) == pytest.approx(0.0, abs=1e-12)
    assert inner(n, v) == pytest.approx(0.0, abs=1e-12)
