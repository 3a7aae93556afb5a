import math

import numpy as np
import pytest

from garkrow.errors import ShapeMismatch, StructureMismatch, UnknownMethod
from garkrow.methods import (
    IMEX_METHODS,
    METHOD_IDS,
    Role,
    builtin,
    compose_imex_special_case,
    drop_partition,
    for_partitions,
    imex_ros22_two_way,
    row324_gamma,
)
from garkrow.tableau import PartitionedTableau, is_stiffly_accurate

# Middle root of 6g^3 - 18g^2 + 9g - 1, from a 50-digit polynomial root finder.
ROW324_GAMMA = 0.43586652150845899942


def test_ros2_weights():
    g = 1 - math.sqrt(2) / 2
    b = builtin("ros2").tableau.weights[0]
    assert b[0] == pytest.approx(1 - g, abs=1e-16)
    assert b[1] == pytest.approx(g, abs=1e-16)


def test_row325_weights_are_transcribed():
    b = builtin("imex-row3-2-5").tableau.weights
    expected = [5225 / 21024, -407 / 2190, 6039 / 4672, -127253 / 210240, 1 / 4]
    for q in range(2):
        assert np.array_equal(b[q], expected)


def test_ros436_gamma_diagonal():
    t = builtin("imex-ros4-3-6").tableau
    assert np.all(np.diag(t.gamma[(1, 1)]) == 0.25)
    assert not np.any(t.gamma[(0, 0)])


def test_row324_gamma_root():
    g = row324_gamma()
    assert round(g, 2) == 0.44
    assert abs(6 * g**3 - 18 * g**2 + 9 * g - 1) <= 1e-15
    assert g == pytest.approx(ROW324_GAMMA, abs=1e-16)


def test_unknown_method():
    with pytest.raises(UnknownMethod):
        builtin("rk4")


def test_builtin_is_referentially_transparent():
    for name in METHOD_IDS:
        a, b = builtin(name).tableau, builtin(name).tableau
        for key in a.alpha:
            assert a.alpha[key].tobytes() == b.alpha[key].tobytes()


def test_claimed_orders():
    orders = {m: builtin(m).tableau.claimed_order for m in IMEX_METHODS}
    assert orders == {"imex-ros22": 2, "imex-row3-2-4": 3, "imex-row3-2-5": 3, "imex-ros4-3-6": 4}
    emb = {m: builtin(m).tableau.claimed_embedded_order for m in IMEX_METHODS[1:]}
    assert emb == {"imex-row3-2-4": 2, "imex-row3-2-5": 2, "imex-ros4-3-6": 3}
    assert not builtin("imex-ros22").tableau.has_embedded
    assert builtin("imex-ros22").fixed_step_only


def test_stiff_accuracy_of_builtins():
    for name in ("ros2", "imex-row3-2-5", "imex-ros4-3-6"):
        assert is_stiffly_accurate(builtin(name).tableau), name


def test_explicit_partitions_have_zero_gamma():
    for name in METHOD_IDS:
        card = builtin(name)
        for q, role in enumerate(card.roles):
            if role is Role.EXPLICIT:
                for m in range(card.tableau.n_partitions):
                    assert not np.any(card.tableau.gamma[(q, m)]), (name, q, m)


def test_card_rejects_explicit_role_with_gamma():
    from garkrow.methods import MethodCard

    with pytest.raises(StructureMismatch):
        MethodCard(builtin("ros2").tableau, (Role.EXPLICIT,))


def test_imex_ros22_roles():
    assert builtin("imex-ros22").roles == (Role.EXPLICIT, Role.DIAGONALLY_IMPLICIT, Role.LINEARLY_IMPLICIT)


def test_compose_reproduces_two_way_imex_ros22():
    two = imex_ros22_two_way().tableau
    comp = compose_imex_special_case(builtin("erk-trapezoidal"), builtin("ros2"), shared_b=False)
    for key in two.alpha:
        assert np.array_equal(comp.alpha[key], two.alpha[key]), key
        assert np.array_equal(comp.gamma[key], two.gamma[key]), key
    for q in range(2):
        assert np.array_equal(comp.weights[q], two.weights[q])


def test_compose_with_gamma_free_partner_is_partitioned_erk():
    erk = builtin("erk-trapezoidal").tableau
    comp = compose_imex_special_case(erk, erk, shared_b=True)
    assert comp.combined_stages
    for key in comp.alpha:
        assert np.array_equal(comp.alpha[key], erk.alpha[(0, 0)])
        assert not np.any(comp.gamma[key])


def test_compose_reproduces_row324():
    t = builtin("imex-row3-2-4").tableau
    ex = PartitionedTableau((4,), {(0, 0): t.alpha[(0, 0)]}, {}, (t.weights[0],))
    im = PartitionedTableau((4,), {(0, 0): t.alpha[(1, 1)]}, {(0, 0): t.gamma[(1, 1)]}, (t.weights[1],))
    comp = compose_imex_special_case(ex, im, shared_b=True)
    for key in t.alpha:
        assert np.array_equal(comp.alpha[key], t.alpha[key]), key
        assert np.array_equal(comp.gamma[key], t.gamma[key]), key


def test_compose_errors():
    with pytest.raises(ShapeMismatch):
        compose_imex_special_case(builtin("erk-trapezoidal"), builtin("imex-ros4-3-6").tableau, shared_b=False)
    ros2 = builtin("ros2").tableau
    with pytest.raises(StructureMismatch):
        compose_imex_special_case(ros2, ros2, shared_b=True)  # explicit part has gamma
    erk = builtin("erk-trapezoidal").tableau
    with pytest.raises(StructureMismatch):
        compose_imex_special_case(erk, ros2, shared_b=True)  # weights differ


def test_for_partitions():
    assert for_partitions("imex-ros4-3-6", 2) is builtin("imex-ros4-3-6")
    assert for_partitions("imex-ros22", 2).tableau.n_partitions == 2
    with pytest.raises(ShapeMismatch):
        for_partitions("ros2", 2)


def test_drop_partition_keeps_order():
    card = drop_partition(builtin("imex-ros22"), 1)
    assert card.roles == (Role.EXPLICIT, Role.LINEARLY_IMPLICIT)
    assert card.tableau.stage_counts == (2, 2)
