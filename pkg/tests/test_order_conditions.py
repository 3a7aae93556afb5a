import numpy as np
import pytest

from garkrow.errors import ShapeMismatch, Singular, StructureMismatch
from garkrow.methods import METHOD_IDS, builtin, imex_ros22_two_way
from garkrow.order_conditions import (
    check_dae_algebraic,
    check_gark_ros,
    check_gark_row,
    check_imex_coupling,
    check_inconsistent_ic,
    check_internal_then_coupling_specialcase2,
    claimed_conditions,
    times,
)
from garkrow.tableau import PartitionedTableau


def single(alpha, gamma, b):
    return PartitionedTableau((len(b),), {(0, 0): np.array(alpha)}, {(0, 0): np.array(gamma)}, (np.array(b),))


# A classical three-stage order-3 Rosenbrock method (ROS3P).
ROS3P_G = 0.5 + np.sqrt(3) / 6
ROS3P = single(
    [[0, 0, 0], [1, 0, 0], [1, 0, 0]],
    [[ROS3P_G, 0, 0], [-1, ROS3P_G, 0], [-ROS3P_G, 0.5 - 2 * ROS3P_G, ROS3P_G]],
    [2 / 3, 0, 1 / 3],
)


def test_ros2_order_two_exact():
    rep = check_gark_ros(builtin("ros2").tableau, 2)
    assert rep.passed
    assert rep.select("ros.o2").max_residual <= 1e-16


def test_ros2_perturbed_weight_residual():
    t = builtin("ros2").tableau
    b = t.weights[0] + np.array([1e-3, 0.0])
    rep = check_gark_ros(t.with_weights([b]), 1)
    assert rep.entries[0].id == "ros.o1"
    assert rep.entries[0].residual == pytest.approx(1e-3, rel=1e-12)


def test_ros436_order_four():
    assert check_gark_ros(builtin("imex-ros4-3-6").tableau, 4).max_residual <= 1e-10


def test_row325_implicit_block_as_row():
    t = builtin("imex-row3-2-5").tableau
    imp = single(t.alpha[(1, 1)], t.gamma[(1, 1)], t.weights[1])
    assert check_gark_row(imp, 3).max_residual <= 1e-10


def test_ros2_fails_w_conditions():
    rep = check_gark_row(builtin("ros2").tableau, 2)
    assert {e.id for e in rep.failing()} == {"row.o2.c", "row.o2.g"}
    g = 1 - np.sqrt(2) / 2
    assert rep.select("row.o2.g").entries[0].lhs == pytest.approx((1 - g) * g, abs=1e-16)


def test_erk_passes_gamma_terms_with_zero_residual():
    rep = check_gark_row(builtin("erk-trapezoidal").tableau, 2)
    assert rep.select("row.o2.g").max_residual == 0.0
    assert rep.passed


def test_classical_ros3_cross_check():
    assert check_gark_ros(ROS3P, 3).max_residual <= 1e-14
    assert not check_gark_ros(ROS3P, 4).passed
    # hand evaluation of the two third-order conditions
    a, g, b = ROS3P.alpha[(0, 0)], ROS3P.gamma[(0, 0)], ROS3P.weights[0]
    c, e = a.sum(1), (a + g).sum(1)
    assert b @ c**2 == pytest.approx(1 / 3, abs=1e-15)
    assert b @ (a + g) @ e == pytest.approx(1 / 6, abs=1e-15)


def test_family_counts():
    t = builtin("imex-row3-2-5").tableau  # two partitions
    ros4 = [i for i in check_gark_ros(t, 4).ids() if i.startswith("ros.o4")]
    row4 = [i for i in check_gark_row(t, 4).ids() if i.startswith("row.o4")]
    row3 = [i for i in check_gark_row(t, 3).ids() if i.startswith("row.o3")]
    assert (len(ros4), len(row3), len(row4)) == (4, 5, 13)
    # |family| x N^arity entries
    assert len(check_gark_ros(t, 4).entries) == 2 + 4 + 2 * 8 + 4 * 16
    assert len(check_gark_row(t, 4).entries) == 2 + 2 * 4 + 5 * 8 + 13 * 16


def test_row_passing_implies_ros_passing():
    for name in METHOD_IDS:
        t = builtin(name).tableau
        for p in range(1, 5):
            if check_gark_row(t, p, tol=1e-8).passed:
                assert check_gark_ros(t, p, tol=1e-8).passed, (name, p)


def test_conditions_are_multilinear_in_weights():
    t = builtin("imex-ros4-3-6").tableau
    one = check_gark_ros(t, 1)
    two = check_gark_ros(t.with_weights([2 * b for b in t.weights]), 1)
    for e1, e2 in zip(one.entries, two.entries):
        assert e2.lhs == pytest.approx(2 * e1.lhs, rel=1e-15)


def test_times_is_elementwise():
    assert np.array_equal(times(np.array([1.0, 2.0]), np.array([3.0, 4.0])), [3.0, 8.0])


def test_special_case_two_collapses_to_base():
    t = builtin("imex-ros4-3-6").tableau
    base = (t.weights[1], t.alpha[(1, 1)], t.gamma[(1, 1)])
    rep = check_internal_then_coupling_specialcase2(base, base, 4)
    ref = check_gark_ros(single(base[1], base[2], base[0]), 4)
    assert rep.max_residual == pytest.approx(ref.max_residual, abs=1e-14)
    for e in rep.select("sc2").entries:
        assert e.residual <= 1e-10


def test_special_case_two_gamma_free_coupling():
    t = builtin("imex-ros4-3-6").tableau
    b, a, g = t.weights[1], t.alpha[(1, 1)], t.gamma[(1, 1)]
    rep = check_internal_then_coupling_specialcase2((b, a, g), (b, a, np.zeros_like(g)), 3, exact_jacobian=False)
    # with a zero coupling gamma only b^T abar g survives among the W-type terms
    assert rep.select("sc2.row.o3.a-gbar").max_residual == 0.0
    assert rep.select("sc2.row.o3.g-gbar").max_residual == 0.0
    assert rep.select("sc2.row.o3.gbar-g").max_residual == 0.0
    assert rep.select("sc2.row.o3.abar-g").entries[0].lhs == pytest.approx(b @ a @ g.sum(1), abs=1e-15)


def test_special_case_two_perturbation_shows_as_residual():
    t = builtin("imex-row3-2-5").tableau
    b, a, g = t.weights[1], t.alpha[(1, 1)], t.gamma[(1, 1)]
    gv = g.sum(1)
    rng = np.random.default_rng(0)
    # a coupling alpha with b^T abar g = 0 and the same abscissae
    ab = np.tril(rng.standard_normal(a.shape), -1)
    ab[:, 0] += a.sum(1) - ab.sum(1)
    delta = 1e-4
    base_val = b @ ab @ gv
    # move along the constraint gradient, keeping row sums by compensating in column 0
    grad = np.tril(np.outer(b, gv), -1)
    grad[:, 0] -= grad.sum(1)
    step = -base_val / (b @ grad @ gv)
    ab0 = ab + step * grad
    assert abs(b @ ab0 @ gv) <= 1e-14
    ab1 = ab0 + (delta / (b @ grad @ gv)) * grad
    rep = check_internal_then_coupling_specialcase2((b, a, g), (b, ab1, g), 3, exact_jacobian=False)
    assert rep.select("sc2.row.o3.abar-g").entries[0].residual == pytest.approx(delta, rel=1e-8)
    assert rep.select("sc2.c-match").max_residual <= 1e-14


def test_special_case_two_shape_mismatch():
    t = builtin("imex-ros4-3-6").tableau
    base = (t.weights[1], t.alpha[(1, 1)], t.gamma[(1, 1)])
    with pytest.raises(ShapeMismatch):
        check_internal_then_coupling_specialcase2(base, (np.ones(2), np.zeros((2, 2)), np.zeros((2, 2))), 3)


def test_imex_coupling_builtins():
    assert check_imex_coupling(builtin("imex-row3-2-4").tableau, 3, exact_jacobian=False, special_case=True, tol=1e-8).passed
    assert check_imex_coupling(builtin("imex-ros4-3-6").tableau, 4, exact_jacobian=True, special_case=True).max_residual <= 1e-10


def test_imex_coupling_explicit_equals_implicit():
    erk = builtin("erk-trapezoidal").tableau
    a = erk.alpha[(0, 0)]
    t = PartitionedTableau((2, 2), {k: a for k in [(0, 0), (0, 1), (1, 0), (1, 1)]}, {}, (erk.weights[0],) * 2)
    rep = check_imex_coupling(t, 2, exact_jacobian=False, special_case=False)
    assert all(e.residual == 0.0 for e in rep.entries if e.target == 0.0)


def test_imex_coupling_structure_errors():
    with pytest.raises(StructureMismatch):
        check_imex_coupling(builtin("ros2").tableau, 2, True, False)
    t = builtin("imex-row3-2-5").tableau
    a = t.alpha[(0, 1)].copy()
    a[3, 1] += 0.1
    with pytest.raises(StructureMismatch):
        check_imex_coupling(t.replace(alpha={**t.alpha, (0, 1): a}), 3, False, special_case=True)


def test_dae_conditions_ros436():
    rep = check_dae_algebraic(builtin("imex-ros4-3-6").tableau, 0, 1, order_x=4, order_z=2)
    assert rep.max_residual <= 1e-10
    assert rep.select("dae.assumption-a").max_residual == 0.0


def test_dae_z2_for_ros2_algebraic_partition():
    # omega = beta^{-1} of the ROS2 block, c = [0, 1]; stiff accuracy makes b^T omega = e_2^T
    rep = check_dae_algebraic(imex_ros22_two_way().tableau, 0, 1, order_x=2, order_z=2)
    assert rep.select("dae.z2").entries[0].lhs == pytest.approx(1.0, abs=1e-15)


def test_dae_degenerate_one_stage_fails_z2():
    t = PartitionedTableau((1, 1), {}, {(1, 1): np.eye(1), (1, 0): np.eye(1)}, (np.ones(1), np.ones(1)))
    rep = check_dae_algebraic(t, 0, 1, order_x=2, order_z=2)
    assert rep.select("dae.z2").entries[0].lhs == 0.0
    assert not rep.passed


def test_dae_singular_beta():
    t = PartitionedTableau((1, 1), {}, {}, (np.ones(1), np.ones(1)))
    with pytest.raises(Singular):
        check_dae_algebraic(t, 0, 1, 2, 2)
    with pytest.raises(Singular):
        check_inconsistent_ic(t, 0, 1)


def test_inconsistent_ic_row325():
    rep = check_inconsistent_ic(builtin("imex-row3-2-5").tableau, 0, 1)
    assert rep.select(("ic.z2", "ic.x1")).max_residual <= 1e-10
    assert rep.select("ic.z1").max_residual <= 1e-10  # stiff accuracy


def test_inconsistent_ic_one_stage():
    t = PartitionedTableau((1, 1), {}, {(1, 1): np.eye(1), (1, 0): np.eye(1)}, (np.ones(1), np.ones(1)))
    assert check_inconsistent_ic(t, 0, 1).select("ic.z1").passed


def test_claimed_conditions_all_builtins():
    for name in METHOD_IDS:
        rep = claimed_conditions(name)
        assert rep.passed, (name, [e.id for e in rep.failing()])


def test_report_json_roundtrip():
    import json

    rep = claimed_conditions("ros2")
    doc = json.loads(rep.to_json())
    assert doc["pass"] is True
    assert {e["id"] for e in doc["entries"]} == set(rep.ids())
