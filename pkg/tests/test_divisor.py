"""Divisor data model and hypothesis validators."""

import math

import numpy as np
import pytest

from conesphere.divisor import (
    Divisor,
    WeightSpec,
    cone_angle,
    divisor,
    equatorial_divisor,
    euler_characteristic,
    flagship_divisor,
    geodesic_distance,
    solver_scope_check,
    troyanov_check,
    weight_admissible,
)
from conesphere.errors import DomainError, ScopeError, ShapeError


def test_cone_angle_identity_and_monotonicity():
    assert cone_angle(0.0) == 2.0 * math.pi
    betas = np.linspace(-0.99, 0.0, 50)
    angles = [cone_angle(b) for b in betas]
    assert np.all(np.diff(angles) > 0.0)


def test_cone_angle_rejects_exponent_at_or_below_minus_one():
    with pytest.raises(DomainError):
        cone_angle(-1.0)


def test_divisor_positions_normalized():
    d = divisor([[0.0, 0.0, 2.0]], [-0.5])
    assert np.allclose(d.positions[0], [0.0, 0.0, 1.0])


def test_divisor_rejects_zero_position():
    with pytest.raises(DomainError):
        divisor([[0.0, 0.0, 0.0]], [-0.5])


def test_divisor_length_mismatch():
    with pytest.raises(ShapeError):
        divisor([[1.0, 0.0, 0.0]], [-0.5, -0.4])


def test_euler_characteristic_values_and_additivity():
    assert euler_characteristic(Divisor(())) == 2.0
    d = flagship_divisor()
    assert abs(euler_characteristic(d) - 0.8) < 1e-12
    # appending a point adds exactly its exponent
    bigger = divisor(
        np.vstack([d.positions, [0.0, 0.0, 1.0]]),
        np.append(d.betas, -0.25),
    )
    assert abs(euler_characteristic(bigger) - (0.8 - 0.25)) < 1e-12


def test_troyanov_truth_table():
    d = equatorial_divisor([-0.3, -0.4, -0.5])
    rep = troyanov_check(d)
    assert rep.passed
    assert np.allclose(rep.margins, (0.6, 0.4, 0.2), atol=1e-12)

    rep = troyanov_check(equatorial_divisor([-0.9, -0.1, -0.1]))
    assert not rep.passed
    assert abs(rep.margins[0] - (-0.7)) < 1e-12

    rep = troyanov_check(equatorial_divisor([-0.5, -0.5, -0.5]))
    assert rep.passed
    assert np.allclose(rep.margins, (0.5, 0.5, 0.5), atol=1e-12)


def test_troyanov_scope_and_permutation_invariance():
    with pytest.raises(ScopeError):
        troyanov_check(equatorial_divisor([-0.3, -0.4]))
    d = equatorial_divisor([-0.2, -0.35, -0.55])
    base = sorted(troyanov_check(d).margins)
    perm = equatorial_divisor([-0.55, -0.2, -0.35])
    assert np.allclose(sorted(troyanov_check(perm).margins), base, atol=1e-12)


def test_weight_admissible_truth_table():
    d = equatorial_divisor([-0.5, -0.5, -0.5])
    assert weight_admissible(WeightSpec(gamma=(0.5, 0.5, 0.5)), d).passed
    rep = weight_admissible(WeightSpec(gamma=(2.0, 0.5, 0.5)), d)
    assert not rep.passed
    # gamma = 2 hits the indicial value -4 / (-1/2) exactly
    val, dist = rep.nearest_forbidden[0]
    assert val == pytest.approx(2.0) and dist < 1e-12
    rep = weight_admissible(WeightSpec(gamma=(-0.5, 0.5, 0.5)), d)
    assert not rep.passed and rep.positivity[0] is False


def test_weight_admissible_shape_mismatch():
    d = equatorial_divisor([-0.5, -0.5, -0.5])
    with pytest.raises(ShapeError):
        weight_admissible(WeightSpec(gamma=(0.5, 0.5)), d)


def test_weight_spec_validation():
    with pytest.raises(DomainError):
        WeightSpec(gamma=(0.5,), holder_alpha=1.5)
    with pytest.raises(DomainError):
        WeightSpec(gamma=(0.5,), order_k=-1)


def test_solver_scope_truth_table():
    rep = solver_scope_check(equatorial_divisor([-0.3, -0.4, -0.5]))
    assert rep.passed
    assert abs(rep.chi - 0.8) < 1e-12

    rep = solver_scope_check(equatorial_divisor([-0.5, -0.5, -0.5]))
    assert not rep.passed
    assert not rep.distinct_triple
    assert rep.n_at_least_3 and rep.betas_in_range and rep.troyanov and rep.chi_positive

    rep = solver_scope_check(equatorial_divisor([-0.3, -0.4]))
    assert not rep.passed and not rep.n_at_least_3


def test_geodesic_distance():
    assert geodesic_distance([1, 0, 0], [0, 1, 0]) == pytest.approx(math.pi / 2)
    assert geodesic_distance([0, 0, 1], [0, 0, 1]) == 0.0


def test_equatorial_divisor_gaps():
    d = equatorial_divisor([-0.3, -0.4, -0.5], gaps=[1.0, 1.0, 2.0 * math.pi - 2.0])
    assert geodesic_distance(d.positions[0], d.positions[1]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        equatorial_divisor([-0.3, -0.4], gaps=[4.0, 4.0])
    with pytest.raises(ShapeError):
        equatorial_divisor([-0.3, -0.4], gaps=[1.0])


def test_flagship_divisor_is_in_scope():
    assert solver_scope_check(flagship_divisor()).passed
