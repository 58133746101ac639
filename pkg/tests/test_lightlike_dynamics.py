import math

import numpy as np
import pytest

from closed_geodesics import boundary_geodesic
from lightlike_dynamics import (
    AsymptoticCycle,
    asymptotic_cycle,
    cesaro_cycle,
    class_A_test,
    complement,
    cycle_from_return_map,
    cycles_distinct,
    first_return_map,
    past_alpha_leaf,
    rotation_map,
    rotation_number,
)


@pytest.mark.parametrize("c", [(1, 0), (0, 1), (2, 1), (-3, 5), (7, -4)])
def test_complement_has_unit_determinant(c):
    e = complement(c)
    assert c[0] * e[1] - c[1] * e[0] == 1


def test_complement_of_non_primitive_class():
    with pytest.raises(ValueError):
        complement((2, 4))


def test_rational_rotation_is_detected_as_periodic():
    rn = rotation_number(rotation_map(1.0, 0.25), iters=1000)
    assert rn.rho == pytest.approx(0.25, abs=1e-12)
    assert rn.periodic == (1, 4)
    assert rn.error == 0.0
    assert rn.converged


def test_irrational_rotation_number():
    angle = math.sqrt(2.0) - 1.0
    rn = rotation_number(rotation_map(1.0, angle), iters=2000)
    assert rn.periodic is None
    assert rn.converged
    assert rn.rho == pytest.approx(angle, abs=1e-8)
    lo, hi = rn.interval
    assert lo <= rn.rho <= hi


def test_rotation_longer_than_the_circle():
    fm = rotation_map(2.0, 2.6)
    assert fm(0.0) == pytest.approx(0.6)
    assert fm.lift(0.0) == pytest.approx(0.6)
    assert rotation_number(fm, iters=1000).rho == pytest.approx(0.3, abs=1e-10)


def test_rotation_map_report():
    fm = rotation_map(1.0, 0.25)
    assert fm.continuity_defect() == pytest.approx(0.0, abs=1e-12)
    report = fm.to_report()
    assert report["foliation"] == "alpha"
    assert len(report["branches"]) == 1
    assert report["branches"][0]["dom_hi"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fm.traced_lift(None, 0.5)


def test_cycle_from_rotation():
    fm = rotation_map(1.0, 0.25)
    cyc = cycle_from_return_map(fm, rotation_number(fm, iters=1000))
    assert cyc.direction == pytest.approx((-0.25, -1.0))
    assert cyc.foliation == "alpha"


def test_asymptotic_cycle_directions():
    a = AsymptoticCycle.of((2.0, 0.0), "alpha")
    b = AsymptoticCycle.of((0.0, -3.0), "beta")
    assert a.direction == (1.0, 0.0)
    assert b.direction == (0.0, -1.0)
    assert a.angle_to(b) == pytest.approx(math.pi / 2)
    assert a.angle_to(AsymptoticCycle.of((-5.0, 0.0), "beta")) == pytest.approx(0.0)
    assert cycles_distinct(a, b)
    assert not cycles_distinct(a, AsymptoticCycle.of((1.0, 1e-9), "beta"))
    with pytest.raises(ValueError):
        AsymptoticCycle.of((0.0, 0.0), "alpha")


def test_past_alpha_leaf_runs_up():
    leaf = past_alpha_leaf(2.0, -1.0)
    assert leaf.uv(0.5) == pytest.approx((2.0, -0.5))
    assert leaf.kind == "alpha"


@pytest.mark.slow
def test_rectangle_torus_return_map(rect_torus):
    fm = first_return_map(rect_torus, "alpha", boundary_geodesic(rect_torus))
    assert fm.length == pytest.approx(1.2)
    assert fm.continuity_defect() < 1e-8
    assert "discontinuous" not in fm.flags
    xs = np.linspace(0.0, fm.length, 7, endpoint=False)
    lifts = [fm.lift(x) for x in xs]
    assert all(b > a for a, b in zip(lifts, lifts[1:]))


@pytest.mark.slow
def test_l_torus_is_class_a(l_torus):
    assert class_A_test(l_torus, iters=20_000)


@pytest.mark.slow
def test_cesaro_agrees_with_the_return_map(l_torus):
    for fol in ("alpha", "beta"):
        exact = asymptotic_cycle(l_torus, fol, iters=20_000)
        averaged = cesaro_cycle(l_torus, fol, crossings=5_000)
        assert exact.angle_to(averaged) < 1e-2


@pytest.mark.parametrize("fol", ["alpha", "beta"])
def test_rectangle_torus_leaves_return(rect_torus, fol):
    fm = first_return_map(rect_torus, fol, boundary_geodesic(rect_torus), grid=24)
    assert fm.length == pytest.approx(1.2)
    assert "discontinuous" not in fm.flags


def test_l_torus_cycles_are_distinct_after_few_iterations(l_torus):
    assert class_A_test(l_torus, iters=2_000)
    ca, cb = l_torus.cache["asymptotic_cycles"]
    assert cycles_distinct(ca, cb)
    # the vertex cycles are still there
    assert l_torus.cone_cycle.vertices


def test_short_cesaro_average(l_torus):
    exact = asymptotic_cycle(l_torus, "beta", iters=2_000)
    averaged = cesaro_cycle(l_torus, "beta", crossings=500)
    assert exact.angle_to(averaged) < 5e-2
