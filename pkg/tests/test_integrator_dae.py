import warnings

import numpy as np
import pytest

from garkrow.errors import DomainError, InconsistentState, ShapeMismatch, SingularGz, StructureMismatch
from garkrow.integrator_dae import (
    DaeProblem,
    DaeState,
    integrate_dae_adaptive,
    integrate_dae_fixed,
    make_consistent,
    step_dae,
)
from garkrow.integrator_ode import AnalyticJacobian, OdeProblem, StepController, step
from garkrow.methods import ROS2_GAMMA, builtin, imex_ros22_two_way
from garkrow.problems import zla

DAE_METHODS = ("imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6")


def mirror():
    """x' = z, 0 = x - z."""
    return DaeProblem(1, 1, lambda x, z: z.copy(), lambda x, z: x - z, x0=np.ones(1), z0=np.ones(1))


def oscillator():
    """x1' = z, x2' = -x1, 0 = x1 + 2 x2 - z: a linear constraint."""
    return DaeProblem(
        2,
        1,
        lambda x, z: np.array([z[0], -x[0]]),
        lambda x, z: np.array([x[0] + 2 * x[1] - z[0]]),
        x0=np.array([1.0, 0.5]),
        z0=np.array([2.0]),
    )


def embedded_ode(p, eps):
    """x' = f, eps z' = g as a two-partition ODE with exact Jacobians."""
    dx, n = p.d_x, p.d_x + p.d_z

    def f0(t, y):
        return np.concatenate([p.f(y[:dx], y[dx:]), np.zeros(p.d_z)])

    def f1(t, y):
        return np.concatenate([np.zeros(dx), p.g(y[:dx], y[dx:]) / eps])

    def j0(t, y):
        fx, fz, _, _ = p.jacobians(y[:dx], y[dx:])
        J = np.zeros((n, n))
        J[:dx, :dx], J[:dx, dx:] = fx, fz
        return J

    def j1(t, y):
        _, _, gx, gz = p.jacobians(y[:dx], y[dx:])
        J = np.zeros((n, n))
        J[dx:, :dx], J[dx:, dx:] = gx / eps, gz / eps
        return J

    return OdeProblem((f0, f1), (AnalyticJacobian(j0), AnalyticJacobian(j1)), n)


def test_mirror_step_by_hand():
    # k1 = h z, l1 = k1, k2 = h (z + l1), l2 = l1 + k2 - k1
    h, g = 0.1, ROS2_GAMMA
    x0 = z0 = 1.0
    k1 = h * z0
    l1 = k1
    k2 = h * (z0 + l1)
    l2 = l1 + k2 - k1
    x1 = x0 + 0.5 * (k1 + k2)
    z1 = z0 + (1 - g) * l1 + g * l2
    got = step_dae(mirror(), imex_ros22_two_way(), mirror().initial_state(), h).state
    assert abs(got.x[0] - x1) <= 1e-13
    assert abs(got.z[0] - z1) <= 1e-13
    assert x1 == pytest.approx(1.105, abs=1e-15)
    assert z1 == pytest.approx(1.1 + 0.01 * g, abs=1e-15)


@pytest.mark.parametrize("name", DAE_METHODS)
def test_matches_vanishing_parameter_limit_of_ode_step(name):
    p = zla()
    s = p.initial_state()
    card = builtin(name)
    dae = step_dae(p, card, s, 0.01).state.y
    diffs = [np.max(np.abs(step(embedded_ode(p, eps), card, 0.0, s.y, 0.01).y_next - dae)) for eps in (1e-8, 1e-10)]
    scale = np.max(np.abs(dae))
    assert diffs[1] <= 1e-10 * scale
    # the gap closes linearly in eps
    assert 50 <= diffs[0] / diffs[1] <= 200


def test_mirror_limit_two_way():
    p = mirror()
    dae = step_dae(p, imex_ros22_two_way(), p.initial_state(), 0.1).state.y
    ode = step(embedded_ode(p, 1e-12), imex_ros22_two_way(), 0.0, np.ones(2), 0.1).y_next
    assert np.max(np.abs(ode - dae)) <= 1e-10


def test_constant_solution_is_kept():
    p = DaeProblem(1, 1, lambda x, z: np.zeros(1), lambda x, z: z - 3.0, x0=np.array([2.0]), z0=np.array([3.0]))
    for name in DAE_METHODS:
        tr = integrate_dae_fixed(p, builtin(name), 0.0, 1.0, 5)
        assert np.max(np.abs(tr.x - 2.0)) <= 1e-15
        assert np.max(np.abs(tr.z - 3.0)) <= 1e-15


def test_zero_step_leaves_state():
    p = zla()
    s = p.initial_state()
    res = step_dae(p, builtin("imex-row3-2-5"), s, 0.0)
    assert res.state is s
    assert not np.any(res.error_estimate)


def test_zla_entry_is_consistent():
    s = zla().initial_state()
    assert s.constraint_residual == 0.0
    assert s.z[0] == pytest.approx(115.83 * 0.444 * 0.007, rel=1e-15)


def test_make_consistent():
    p = zla()
    z = make_consistent(p, p.x0, [0.0])
    assert z[0] == pytest.approx(0.35999964, abs=1e-8)
    assert make_consistent(oscillator(), [2.0, 2.0], [0.0])[0] == pytest.approx(6.0, abs=1e-12)


def test_make_consistent_singular():
    p = DaeProblem(1, 1, lambda x, z: z, lambda x, z: x - 1.0, x0=np.zeros(1), z0=np.zeros(1))
    with pytest.raises(SingularGz):
        make_consistent(p, [0.0], [0.0])


@pytest.mark.parametrize("name", DAE_METHODS)
def test_linear_constraint_preserved(name):
    p = oscillator()
    for h in (0.1, 1.0):
        s = step_dae(p, builtin(name), p.initial_state(), h).state
        assert s.constraint_residual <= 1e-10 * np.max(np.abs(s.z))


def test_two_way_ros22_drifts_off_constraint():
    s = step_dae(oscillator(), imex_ros22_two_way(), oscillator().initial_state(), 0.1).state
    assert s.constraint_residual > 1e-3


def test_inconsistent_state_warns_once():
    p = zla()
    bad = DaeState.of(p, p.x0, p.z0 + 1e-4)
    with pytest.warns(InconsistentState):
        step_dae(p, builtin("imex-row3-2-5"), bad, 1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        step_dae(p, builtin("imex-row3-2-5"), p.initial_state(), 1e-3)
    with pytest.warns(InconsistentState) as rec:
        integrate_dae_fixed(p, builtin("imex-row3-2-5"), 0.0, 0.01, 5, bad)
    assert len(rec) == 1


def test_structure_checks():
    p = zla()
    s = p.initial_state()
    with pytest.raises(StructureMismatch):
        step_dae(p, builtin("ros2"), s, 0.01)
    with pytest.raises(StructureMismatch):
        step_dae(p, builtin("imex-ros22"), s, 0.01)
    t = builtin("imex-row3-2-5").tableau
    flat = t.replace(gamma={**t.gamma, (1, 1): np.tril(t.gamma[(1, 1)], -1)})
    with pytest.raises(StructureMismatch):
        step_dae(p, flat, s, 0.01)


def test_state_shape_checked():
    with pytest.raises(ShapeMismatch):
        DaeState.of(zla(), np.zeros(4), np.zeros(1))


def test_singular_algebraic_jacobian():
    p = DaeProblem(1, 1, lambda x, z: z, lambda x, z: x - 1.0, x0=np.ones(1), z0=np.zeros(1))
    with pytest.raises(SingularGz):
        step_dae(p, builtin("imex-row3-2-5"), p.initial_state(), 0.1)


def test_domain_error_propagates():
    p = zla()
    with pytest.raises(DomainError):
        step_dae(p, builtin("imex-ros4-3-6"), p.initial_state(), 1.0)


def test_compiled_loop_matches_interpreted():
    p = zla()
    card = builtin("imex-row3-2-5")
    slow = integrate_dae_fixed(p, card, 0.0, 2.0, 400, record=False, compiled=False)
    fast = integrate_dae_fixed(p, card, 0.0, 2.0, 400, record=False)
    assert np.max(np.abs(fast.final - slow.final)) <= 1e-12 * np.max(np.abs(slow.final))
    assert list(fast.times) == [0.0, 2.0]
    assert fast.stats.steps == 400


def test_recorded_run_and_csv():
    p = zla()
    tr = integrate_dae_fixed(p, builtin("imex-ros4-3-6"), 0.0, 0.5, 5)
    assert tr.times[-1] == 0.5
    assert tr.x.shape == (6, 5) and tr.z.shape == (6, 1)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,y0,y1,y2,y3,y4,y5,g_norm"
    assert len(lines) == 7
    assert float(lines[-1].split(",")[-1]) == tr.g_norm[-1]


def test_fixed_order_on_zla():
    p = zla()
    card = builtin("imex-ros4-3-6")
    ref = integrate_dae_fixed(p, card, 0.0, 1.0, 1600, record=False).final
    e1 = np.max(np.abs(integrate_dae_fixed(p, card, 0.0, 1.0, 50, record=False).final - ref))
    e2 = np.max(np.abs(integrate_dae_fixed(p, card, 0.0, 1.0, 100, record=False).final - ref))
    assert np.log2(e1 / e2) >= 3.5


def test_adaptive_dae():
    p = zla()
    ref = integrate_dae_fixed(p, builtin("imex-ros4-3-6"), 0.0, 10.0, 20000, record=False).final
    ctl = StepController(atol=1e-9, rtol=1e-7)
    tr = integrate_dae_adaptive(p, builtin("imex-row3-2-5"), 0.0, 10.0, controller=ctl)
    assert tr.times[-1] == 10.0
    assert np.max(np.abs(tr.final - ref)) <= 1e-5 * np.max(np.abs(ref))
    assert tr.stats.accepted == len(tr.times) - 1
    assert np.max(tr.g_norm) <= 1e-8


def test_adaptive_requires_embedded_pair():
    with pytest.raises(ValueError):
        integrate_dae_adaptive(mirror(), imex_ros22_two_way(), 0.0, 1.0)
