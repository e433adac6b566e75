"""Rotation orbits, star discrepancy, and Birkhoff averaging."""

import math
from fractions import Fraction

import numpy as np
import pytest

from solenoidlab.params import SystemParams, TrigPoly
from solenoidlab.rotation import (
    birkhoff_average,
    projection_entropy_observable,
    rotation_orbit,
    star_discrepancy,
)
from solenoidlab.words import scale_tilde


# ------------------------------------------------------------ star discrepancy


def test_discrepancy_perfect_lattice():
    assert star_discrepancy(np.array([0.0, 0.25, 0.5, 0.75])) == 0.0


def test_discrepancy_single_point():
    assert star_discrepancy(np.array([0.3])) == pytest.approx(0.3, abs=1e-15)


def test_discrepancy_two_cluster():
    # five copies each of 0 and 1/2: the sorted gap peaks at 1/2 - 1/10
    pts = np.array([0.0, 0.5] * 5)
    assert star_discrepancy(pts) == pytest.approx(0.4, abs=1e-15)


def test_discrepancy_repeated_rational_orbit():
    # three full periods of the order-5 orbit: 1/q - 1/N with N = 15
    pts = np.array([k / 5 for k in range(5)] * 3)
    assert star_discrepancy(pts) == pytest.approx(1 / 5 - 1 / 15, abs=1e-15)


def test_discrepancy_validation():
    with pytest.raises(ValueError, match="empty"):
        star_discrepancy(np.array([]))
    with pytest.raises(ValueError, match="lie in"):
        star_discrepancy(np.array([0.2, 1.0]))
    with pytest.raises(ValueError, match="lie in"):
        star_discrepancy(np.array([-0.1, 0.2]))


# ------------------------------------------------------------- rotation orbits


def test_orbit_first_steps():
    orb = rotation_orbit(0.3, 0.1, 3)
    assert orb.points[0] == pytest.approx(0.1, abs=1e-15)
    assert orb.points[1] == pytest.approx(0.8, abs=1e-15)
    assert orb.points[2] == pytest.approx(0.5, abs=1e-15)
    assert orb.period is None


def test_orbit_points_stay_in_unit_interval():
    orb = rotation_orbit(math.sqrt(2) - 1, 0.97, 10000)
    assert np.all(orb.points >= 0.0) and np.all(orb.points < 1.0)


def test_orbit_matches_exact_rational_arithmetic():
    # the Dekker split keeps k * delta exact to the last bit even at k ~ 1e6
    delta = math.sqrt(2) - 1
    orb = rotation_orbit(delta, 0.3, 10**6)
    fd, ft = Fraction(delta), Fraction(0.3)
    for k in (0, 1, 99999, 999999):
        exact = float((ft - k * fd) % 1)
        assert abs(exact - orb.points[k]) < 1e-12


def test_orbit_rational_is_exactly_periodic():
    orb = rotation_orbit(1 / 7, 0.2, 21, delta_fraction=(1, 7))
    assert orb.period == 7
    assert np.array_equal(orb.points[:7], orb.points[7:14])
    assert np.array_equal(orb.points[:7], orb.points[14:])


def test_orbit_rational_matches_float_formula():
    orb = rotation_orbit(0.25, 0.3, 5, delta_fraction=(1, 4))
    direct = [(0.3 - k * 0.25) % 1.0 for k in range(5)]
    assert np.allclose(orb.points, direct, atol=1e-15)


def test_orbit_half_rotation_alternates():
    orb = rotation_orbit(0.5, 0.0, 10, delta_fraction=(1, 2))
    assert np.array_equal(orb.points, np.array([0.0, 0.5] * 5))
    assert orb.discrepancy == pytest.approx(0.4, abs=1e-15)


def test_orbit_golden_type_equidistributes():
    orb = rotation_orbit(math.sqrt(2) - 1, 0.0, 1000)
    assert orb.discrepancy < 0.01


def test_orbit_validation():
    with pytest.raises(ValueError, match="at least one"):
        rotation_orbit(0.3, 0.0, 0)
    with pytest.raises(ValueError, match="denominator"):
        rotation_orbit(0.3, 0.0, 5, delta_fraction=(1, 0))


# ------------------------------------------------------- entropy observable


def test_observable_level_and_range(system_b2):
    f, lt = projection_entropy_observable(system_b2, 3)
    assert lt == scale_tilde(system_b2, 3) == 3
    v = f(0.15)
    assert 0.0 <= v <= 2.0
    assert f(0.15) == v


def test_observable_budget_guards(system_b2):
    with pytest.raises(ValueError, match="too coarse"):
        projection_entropy_observable(system_b2, 0)
    with pytest.raises(ValueError, match="budget exceeded"):
        projection_entropy_observable(system_b2, 17)


# ----------------------------------------------------------- Birkhoff averages


def test_birkhoff_custom_observable_matches_direct_cumsum():
    p = SystemParams(2, 0.5, math.sqrt(2) - 1, TrigPoly(0.0, (1.0,), ()))
    obs = lambda t: math.cos(2 * math.pi * t)
    rep = birkhoff_average(p, 1, 0.1, 40, observable=obs, quad_points=64)
    orb = rotation_orbit(math.modf(1 * p.delta)[0], 0.1, 40)
    vals = [obs(float(t)) for t in orb.points]
    for k in range(1, 41):
        assert rep.averages[k - 1] == pytest.approx(sum(vals[:k]) / k, abs=1e-12)
    assert rep.integral == pytest.approx(
        sum(obs((i + 0.5) / 64) for i in range(64)) / 64, abs=1e-15
    )
    assert rep.ks == list(range(1, 41))
    assert rep.gaps == [abs(a - rep.integral) for a in rep.averages]
    for (k, a, integral, g), want_k in zip(rep.rows(), rep.ks):
        assert k == want_k and integral == rep.integral and g == abs(a - integral)


def test_birkhoff_gap_shrinks_along_irrational_orbit():
    p = SystemParams(2, 0.5, math.sqrt(2) - 1, TrigPoly(0.0, (1.0,), ()))
    obs = lambda t: math.cos(2 * math.pi * t)
    rep = birkhoff_average(p, 1, 0.1, 256, observable=obs, quad_points=256)
    assert abs(rep.integral) < 1e-15
    assert rep.gaps[255] < rep.gaps[15]


def test_birkhoff_rational_orbit_is_periodic():
    p = SystemParams(2, 0.5, 0.25, TrigPoly(0.0, (1.0,), ()), delta_fraction=(1, 4))
    obs = lambda t: math.sin(2 * math.pi * t) ** 2
    rep = birkhoff_average(p, 2, 0.3, 8, observable=obs, quad_points=32)
    # ell = 2 turns the quarter rotation into a half rotation: period two
    assert rep.averages[3] == pytest.approx(rep.averages[1], abs=1e-14)
    assert rep.averages[7] == pytest.approx(rep.averages[1], abs=1e-14)


def test_birkhoff_default_observable(system_b2):
    rep = birkhoff_average(system_b2, 2, 0.1, 3, quad_points=16)
    assert rep.ell == 2
    assert rep.ell_tilde == 2
    assert len(rep.averages) == 3
    assert all(0.0 <= a <= 2.0 for a in rep.averages)


def test_birkhoff_validation(system_b2):
    with pytest.raises(ValueError, match="k_max"):
        birkhoff_average(system_b2, 2, 0.1, 0)
