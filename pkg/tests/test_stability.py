import math

import numpy as np
import pytest

from garkrow.errors import Singular
from garkrow.methods import METHOD_IDS, ROS2_GAMMA, builtin
from garkrow.stability import (
    exponential_coefficients,
    scan_region,
    stability_at_infinity,
    stability_at_stiff_limit,
    stability_forms,
    stability_point,
    stability_value,
    taylor_coefficients,
)
from garkrow.tableau import PartitionedTableau

# R of ROS2 from its closed form, evaluated in 50-digit arithmetic.
ROS2_R = {-0.1: 0.9048004636413377, -1.0: 0.35044026276028184, -10.0: -0.20355222796797212}
# IMEX-ROS22 with the Rosenbrock partition infinitely stiff and (explicit, DIRK) z
# pinned at (-0.5, -0.3); reference from the full formula at z = -1e45, 60 digits.
ROS22_PINNED_LIMIT = 0.49190036952107674

IMPLICIT_EULER = PartitionedTableau((1,), {}, {(0, 0): np.eye(1)}, (np.ones(1),))


def test_zero_gives_one():
    for name in METHOD_IDS:
        t = builtin(name).tableau
        assert stability_value(t, [0.0] * t.n_partitions) == 1.0


def test_ros2_closed_form():
    t = builtin("ros2").tableau
    g = ROS2_GAMMA
    for z, ref in ROS2_R.items():
        closed = (1 + (1 - 2 * g) * z) / (1 - g * z) ** 2
        assert abs(stability_value(t, [z]) - ref) <= 1e-13 * abs(ref)
        assert closed == pytest.approx(ref, rel=1e-15)


def test_explicit_trapezoid_on_boundary():
    assert stability_value(builtin("erk-trapezoidal").tableau, [-2.0]) == pytest.approx(1.0, abs=1e-15)


def test_both_forms_agree():
    rng = np.random.default_rng(7)
    for name in METHOD_IDS:
        t = builtin(name).tableau
        z = -rng.random(t.n_partitions) * 5 + 1j * rng.standard_normal(t.n_partitions)
        r1, r2 = stability_forms(t, z)
        assert abs(r1 - r2) <= 1e-12 * max(1.0, abs(r1))


def test_point_magnitude():
    p = stability_point(builtin("ros2").tableau, [-1.0])
    assert p.magnitude == pytest.approx(abs(ROS2_R[-1.0]))


def test_stiff_limits_vanish_for_l_stable_methods():
    assert abs(stability_at_stiff_limit(builtin("ros2").tableau, 0)) <= 1e-12
    t = builtin("imex-row3-2-5").tableau
    implicit = PartitionedTableau((5,), {(0, 0): t.alpha[(1, 1)]}, {(0, 0): t.gamma[(1, 1)]}, (t.weights[1],))
    assert abs(stability_at_stiff_limit(implicit, 0)) <= 1e-12


def test_imex_ros22_stiff_limit():
    t = builtin("imex-ros22").tableau
    assert abs(stability_at_stiff_limit(t, 2, [0.0, 0.0])) <= 1e-14
    got = stability_at_stiff_limit(t, 2, [-0.5, -0.3])
    assert got == pytest.approx(ROS22_PINNED_LIMIT, abs=1e-14)
    # full-length z_other works too, the stiff entry is ignored
    assert stability_at_stiff_limit(t, 2, [-0.5, -0.3, 123.0]) == got


def test_stiff_limit_matches_large_z():
    for name, zo in [("imex-ros22", [-0.5, -0.3]), ("imex-ros4-3-6", [-0.25 + 0.5j]), ("ros2", [])]:
        t = builtin(name).tableau
        st = t.n_partitions - 1
        z = list(zo)
        z.insert(st, -1e10)
        assert abs(stability_at_stiff_limit(t, st, zo) - stability_value(t, z)) <= 1e-6


def test_singular_stiff_block():
    with pytest.raises(Singular):
        stability_at_stiff_limit(builtin("imex-ros22").tableau, 1)  # implicit trapezoid block


def test_stability_at_infinity_last_partition():
    assert stability_at_infinity(builtin("imex-ros4-3-6").tableau) == pytest.approx(0.0, abs=1e-14)


def test_taylor_match_through_claimed_order():
    for name in METHOD_IDS:
        t = builtin(name).tableau
        p = t.claimed_order
        coef = taylor_coefficients(t, p)
        ref = exponential_coefficients(p)
        assert np.allclose(coef.real, ref, rtol=1e-6, atol=1e-9), name


def test_taylor_detects_order_limit():
    t = builtin("ros2").tableau
    coef = taylor_coefficients(t, 3)
    assert abs(coef[3] - 1 / 6) > 1e-3


def test_scan_explicit_trapezoid():
    grid = scan_region(builtin("erk-trapezoidal").tableau, 0, (-3.0, 1.0, 9), (-3.0, 3.0, 7))
    assert grid.abs_r.shape == (7, 9)
    j = list(grid.re).index(-2.0)
    i = list(grid.im).index(0.0)
    assert grid.abs_r[i, j] == pytest.approx(1.0, abs=1e-15)
    poly = np.abs(1 + (grid.re[None, :] + 1j * grid.im[:, None]) + (grid.re[None, :] + 1j * grid.im[:, None]) ** 2 / 2)
    assert np.allclose(grid.abs_r, poly, rtol=1e-14)


def test_scan_implicit_euler_bounded():
    grid = scan_region(IMPLICIT_EULER, 0, (-4.0, 0.0, 17), (-3.0, 3.0, 13))
    assert np.all(grid.abs_r <= 1.0 + 1e-15)


def test_scan_single_point():
    t = builtin("ros2").tableau
    grid = scan_region(t, 0, (-1.0, 5.0, 1), (0.0, 0.0, 1))
    assert grid.abs_r.shape == (1, 1)
    assert grid.abs_r[0, 0] == abs(stability_value(t, [-1.0]))


def test_scan_pole_is_nan():
    grid = scan_region(IMPLICIT_EULER, 0, (1.0, 1.0, 1), (0.0, 0.0, 1))
    assert math.isnan(grid.abs_r[0, 0])


def test_scan_pins_change_region():
    t = builtin("imex-row3-2-5").tableau
    free = scan_region(t, 1, (-5.0, 0.0, 6), (0.0, 0.0, 1))
    pinned = scan_region(t, 1, (-5.0, 0.0, 6), (0.0, 0.0, 1), pins=[-1.0, 0.0])
    assert not np.allclose(free.abs_r, pinned.abs_r)


def test_grid_csv_header():
    csv = scan_region(builtin("ros2").tableau, 0, (-1.0, 0.0, 2), (0.0, 0.0, 1)).to_csv()
    lines = csv.splitlines()
    assert lines[0] == "re,im,absR"
    assert len(lines) == 3


def test_zero_size_axis_rejected():
    with pytest.raises(ValueError):
        scan_region(builtin("ros2").tableau, 0, (-1.0, 0.0, 0), (0.0, 0.0, 1))
