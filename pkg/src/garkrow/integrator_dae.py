"""Semi-explicit index-1 DAEs ``x' = f(x, z)``, ``0 = g(x, z)``.

A two-partition method is applied with partition 0 acting on the
differential variables and partition 1 on the algebraic ones. The algebraic
stages use the zero-parameter limit of a linearly implicit stage,

    gamma_ii g_z l_i = -g(X_i, Z_i) - g_x sum_j gamma^{ad}_ij k_j - g_z sum_{j<i} gamma^{aa}_ij l_j,

so each costs one ``d_z x d_z`` solve. All Jacobians are taken at the start
of the step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    InconsistentState,
    NewtonDivergence,
    ShapeMismatch,
    Singular,
    SingularGz,
    SingularStageMatrix,
    StepSizeUnderflow,
    StructureMismatch,
)
from ._kernels import STATUS_NONFINITE, STATUS_OK, STATUS_SINGULAR_ALG, CompiledDae, dae_fixed
from .integrator_ode import Counters, StepController, Trajectory, controller_order
from .linalg import lu_factor, lu_solve
from .methods import MethodCard, as_card
from .tableau import PartitionedTableau, decoupled_ordering

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]

#: Entry residual above which a step warns about an inconsistent state.
CONSISTENCY_WARN = 1e-6


def _fd(fun: Fn, x: np.ndarray, z: np.ndarray, wrt: int, scale: np.ndarray | None = None) -> np.ndarray:
    """Forward differences with increment ``sqrt(eps) * max(|v_i|, scale_i)``; ``scale`` defaults to ones."""
    base = np.asarray(fun(x, z), dtype=float)
    v = (x if wrt == 0 else z).astype(float, copy=True)
    floor = np.ones(v.size) if scale is None else np.broadcast_to(np.asarray(scale, dtype=float), v.shape)
    J = np.empty((base.size, v.size))
    root = math.sqrt(np.finfo(float).eps)
    for i in range(v.size):
        vp = v.copy()
        vp[i] += root * max(abs(v[i]), floor[i])
        dv = vp[i] - v[i]
        out = fun(vp, z) if wrt == 0 else fun(x, vp)
        J[:, i] = (np.asarray(out) - base) / dv
    return J


@dataclass(frozen=True)
class DaeProblem:
    """``x' = f(x, z)``, ``0 = g(x, z)`` with optional analytic Jacobians.

    Missing Jacobians fall back to forward differences. ``x_scale`` and
    ``z_scale`` give the typical magnitude of each variable; they floor the
    difference increment (default 1) so that badly scaled variables still get
    a relative step.
    """

    d_x: int
    d_z: int
    f: Fn
    g: Fn
    f_x: Fn | None = None
    f_z: Fn | None = None
    g_x: Fn | None = None
    g_z: Fn | None = None
    x0: np.ndarray | None = None
    z0: np.ndarray | None = None
    t_span: tuple[float, float] = (0.0, 1.0)
    name: str = ""
    compiled: CompiledDae | None = None
    x_scale: np.ndarray | float | None = None
    z_scale: np.ndarray | float | None = None

    def jacobian_functions(self) -> tuple[Fn, Fn, Fn, Fn]:
        """``(f_x, f_z, g_x, g_z)`` as callables, finite differences where none is given."""
        out = []
        for fun, jac, wrt in (
            (self.f, self.f_x, 0),
            (self.f, self.f_z, 1),
            (self.g, self.g_x, 0),
            (self.g, self.g_z, 1),
        ):
            scale = self.x_scale if wrt == 0 else self.z_scale
            if jac is None:
                out.append(lambda x, z, fun=fun, wrt=wrt, scale=scale: _fd(fun, x, z, wrt, scale))
            else:
                out.append(lambda x, z, jac=jac: np.asarray(jac(x, z), dtype=float))
        return tuple(out)

    def jacobians(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, ...]:
        """``(f_x, f_z, g_x, g_z)`` at ``(x, z)``."""
        return tuple(j(x, z) for j in self.jacobian_functions())

    def finite_difference_jacobians(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, ...]:
        xs, zs = self.x_scale, self.z_scale
        return (_fd(self.f, x, z, 0, xs), _fd(self.f, x, z, 1, zs), _fd(self.g, x, z, 0, xs), _fd(self.g, x, z, 1, zs))

    def residual(self, x: np.ndarray, z: np.ndarray) -> float:
        return float(np.linalg.norm(self.g(x, z)))

    def initial_state(self) -> "DaeState":
        if self.x0 is None or self.z0 is None:
            raise ValueError(f"problem {self.name!r} has no initial state")
        return DaeState.of(self, self.x0, self.z0)


@dataclass(frozen=True)
class DaeState:
    x: np.ndarray
    z: np.ndarray
    constraint_residual: float

    @classmethod
    def of(cls, problem: DaeProblem, x, z) -> "DaeState":
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if x.shape != (problem.d_x,) or z.shape != (problem.d_z,):
            raise ShapeMismatch(f"state shapes {x.shape}, {z.shape} do not match ({problem.d_x},), ({problem.d_z},)")
        return cls(x, z, problem.residual(x, z))

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.x, self.z])


@dataclass(frozen=True)
class DaeStepResult:
    state: DaeState
    error_estimate: np.ndarray | None
    stages_x: np.ndarray | None = None
    stages_z: np.ndarray | None = None


def _check_method(t: PartitionedTableau) -> None:
    if t.n_partitions != 2:
        raise StructureMismatch(f"a DAE step needs a two-partition method, {t.name!r} has {t.n_partitions}")
    if np.any(np.diag(t.alpha[(1, 1)]) != 0.0):
        raise StructureMismatch("algebraic stages must be linearly implicit (zero alpha diagonal)")
    if np.any(np.diag(t.gamma[(1, 1)]) == 0.0):
        raise StructureMismatch("every algebraic stage needs a nonzero gamma diagonal")
    if np.any(np.diag(t.alpha[(0, 0)]) != 0.0):
        raise StructureMismatch("differential stages must be explicit or linearly implicit")


def _row(row: np.ndarray, skip: int | None = None) -> np.ndarray | None:
    """Dense coefficient row, or None when it has no nonzero entry."""
    row = np.array(row, dtype=float)
    if skip is not None:
        row[skip] = 0.0
    return row if np.any(row) else None


@dataclass(frozen=True)
class _Plan:
    """Stage sweep of a two-partition method with its nonzero coefficients."""

    tableau: PartitionedTableau
    # (partition, stage, alpha row for k, alpha row for l, gamma row for k, gamma row for l, gamma_ii)
    stages: tuple
    need_fx: bool
    need_fz: bool
    need_gx: bool
    b: tuple
    err: tuple | None

    @classmethod
    def build(cls, t: PartitionedTableau) -> "_Plan":
        _check_method(t)
        A, G = t.alpha, t.gamma
        stages = []
        for q, i in decoupled_ordering(t):
            diag = G[(q, q)][i, i]
            stages.append(
                (
                    q,
                    i,
                    _row(A[(q, 0)][i]),
                    _row(A[(q, 1)][i]),
                    _row(G[(q, 0)][i], skip=i if q == 0 else None),
                    _row(G[(q, 1)][i], skip=i if q == 1 else None),
                    float(diag),
                )
            )
        b = (_row(t.weights[0]), _row(t.weights[1]))
        err = None
        if t.embedded_weights is not None:
            err = tuple(_row(t.weights[m] - t.embedded_weights[m]) for m in range(2))
        return cls(
            t,
            tuple(stages),
            need_fx=bool(np.any(G[(0, 0)])),
            need_fz=bool(np.any(G[(0, 1)])),
            need_gx=bool(np.any(G[(1, 0)])),
            b=b,
            err=err,
        )


_PLANS: dict[int, _Plan] = {}


def _plan(t: PartitionedTableau) -> _Plan:
    p = _PLANS.get(id(t))
    if p is None or p.tableau is not t:
        p = _Plan.build(t)
        if len(_PLANS) > 256:
            _PLANS.clear()
        _PLANS[id(t)] = p
    return p


def _combine(base: np.ndarray | None, row: np.ndarray | None, stages: np.ndarray) -> np.ndarray | None:
    if row is None:
        return base
    return row @ stages if base is None else base + row @ stages


#: Stage matrices up to this size are inverted explicitly once per step.
_SMALL = 8


def _solver(M: np.ndarray, on_singular):
    try:
        f = lu_factor(M)
    except Singular as exc:
        raise on_singular(str(exc)) from None
    if f.n <= _SMALL:
        inv = lu_solve(f, np.eye(f.n))
        return lambda r: inv @ r
    return lambda r: lu_solve(f, r)


def step_dae(
    problem: DaeProblem,
    method: MethodCard | PartitionedTableau,
    state: DaeState,
    h: float,
    *,
    keep_stages: bool = False,
    counters: Counters | None = None,
    warn: bool = True,
) -> DaeStepResult:
    """One step of a two-partition method on an index-1 DAE.

    Warns with :class:`InconsistentState` when the entry residual exceeds
    ``1e-6``; the step is still taken. Raises :class:`SingularGz` when a
    stage matrix ``gamma_ii g_z`` cannot be factored.
    """
    t = method.tableau if isinstance(method, MethodCard) else method
    plan = _plan(t)
    counters = counters if counters is not None else Counters()
    if warn and state.constraint_residual > CONSISTENCY_WARN:
        warnings.warn(
            f"entry constraint residual {state.constraint_residual:.3e} exceeds {CONSISTENCY_WARN:g}",
            InconsistentState,
            stacklevel=2,
        )
    if h == 0.0:
        return DaeStepResult(state, None if plan.err is None else np.zeros(problem.d_x + problem.d_z))
    x, z = state.x, state.z
    jac = problem.jacobian_functions()
    fx = jac[0](x, z) if plan.need_fx else None
    fz = jac[1](x, z) if plan.need_fz else None
    gx = jac[2](x, z) if plan.need_gx else None
    gz = jac[3](x, z)
    counters.jac_evals += 1
    s_d, s_a = t.stage_counts
    k = np.zeros((s_d, problem.d_x))
    l = np.zeros((s_a, problem.d_z))
    solvers: dict = {}

    def solver(key, build, err):
        f = solvers.get(key)
        if f is None:
            f = _solver(build(), err)
            counters.lu_count += 1
            solvers[key] = f
        return f

    for q, i, ak, al, gk, gl, gii in plan.stages:
        if q == 0:
            X = _combine(x, ak, k)
            Z = _combine(z, al, l)
            rhs = h * np.asarray(problem.f(X, Z), dtype=float)
            counters.rhs_evals += 1
            sk = _combine(None, gk, k)
            sl = _combine(None, gl, l)
            if sk is not None:
                rhs += h * (fx @ sk)
            if sl is not None:
                rhs += h * (fz @ sl)
            if gii != 0.0:
                rhs = solver((0, gii), lambda: np.eye(problem.d_x) - (h * gii) * fx, SingularStageMatrix)(rhs)
            k[i] = rhs
        else:
            X = _combine(x, ak, k)
            Z = _combine(z, al, l)
            rhs = -np.asarray(problem.g(X, Z), dtype=float)
            counters.rhs_evals += 1
            sk = _combine(None, gk, k)
            sl = _combine(None, gl, l)
            if sk is not None:
                rhs -= gx @ sk
            if sl is not None:
                rhs -= gz @ sl
            l[i] = solver((1, gii), lambda: gii * gz, SingularGz)(rhs)

    x_new = _combine(x, plan.b[0], k)
    z_new = _combine(z, plan.b[1], l)
    err = None
    if plan.err is not None:
        ex = _combine(None, plan.err[0], k)
        ez = _combine(None, plan.err[1], l)
        err = np.concatenate(
            [np.zeros(problem.d_x) if ex is None else ex, np.zeros(problem.d_z) if ez is None else ez]
        )
    return DaeStepResult(
        DaeState(x_new, z_new, problem.residual(x_new, z_new)),
        err,
        k if keep_stages else None,
        l if keep_stages else None,
    )


@dataclass
class DaeTrajectory:
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    g_norm: np.ndarray
    stats: Counters = field(default_factory=Counters)

    @property
    def final(self) -> np.ndarray:
        return np.concatenate([self.x[-1], self.z[-1]])

    def to_csv(self) -> str:
        traj = Trajectory(self.times, np.hstack([self.x, self.z]), self.stats)
        return traj.to_csv({"g_norm": self.g_norm})


def _record(states: list[DaeState], times: list[float], stats: Counters) -> DaeTrajectory:
    return DaeTrajectory(
        np.array(times),
        np.array([s.x for s in states]),
        np.array([s.z for s in states]),
        np.array([s.constraint_residual for s in states]),
        stats,
    )


def integrate_dae_fixed(
    problem: DaeProblem,
    method: MethodCard | PartitionedTableau,
    t0: float,
    tf: float,
    n_steps: int,
    state0: DaeState | None = None,
    *,
    record: bool = True,
    compiled: bool = True,
) -> DaeTrajectory:
    """Fixed steps; the constraint residual is recorded after every step.

    With ``record=False`` only the final state is kept, and problems that
    carry compiled functions run the compiled loop unless ``compiled`` is
    False.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    state = state0 if state0 is not None else problem.initial_state()
    h = (tf - t0) / n_steps
    h_last = (tf - t0) - (n_steps - 1) * h
    stats = Counters()
    if not record and compiled and problem.compiled is not None:
        return _integrate_compiled(problem, method, t0, tf, n_steps, state, h, h_last, stats)
    times, states = [t0], [state]
    for n in range(n_steps):
        hn = h_last if n == n_steps - 1 else h
        state = step_dae(problem, method, state, hn, counters=stats, warn=n == 0).state
        stats.steps += 1
        stats.accepted += 1
        if record or n == n_steps - 1:
            times.append(tf if n == n_steps - 1 else t0 + (n + 1) * h)
            states.append(state)
    return _record(states, times, stats)


def _integrate_compiled(problem, method, t0, tf, n_steps, state, h, h_last, stats) -> DaeTrajectory:
    t = method.tableau if isinstance(method, MethodCard) else method
    plan = _plan(t)  # validates the method structure
    if state.constraint_residual > CONSISTENCY_WARN:
        warnings.warn(
            f"entry constraint residual {state.constraint_residual:.3e} exceeds {CONSISTENCY_WARN:g}",
            InconsistentState,
            stacklevel=3,
        )
    c = problem.compiled
    order = [(q, i) for q, i, *_ in plan.stages]
    A, G = t.alpha, t.gamma

    def arr(m):
        return np.ascontiguousarray(m, dtype=float)

    x, z, status, done = dae_fixed(
        c.f, c.g, c.f_x, c.f_z, c.g_x, c.g_z, c.params,
        np.array([q for q, _ in order], dtype=np.int64),
        np.array([i for _, i in order], dtype=np.int64),
        arr(A[(0, 0)]), arr(A[(0, 1)]), arr(A[(1, 0)]), arr(A[(1, 1)]),
        arr(G[(0, 0)]), arr(G[(0, 1)]), arr(G[(1, 0)]), arr(G[(1, 1)]),
        arr(t.weights[0]), arr(t.weights[1]),
        arr(state.x), arr(state.z), float(h), int(n_steps), float(h_last),
    )  # fmt: skip
    if status == STATUS_SINGULAR_ALG:
        raise SingularGz(f"gamma*g_z singular in step {done + 1}")
    if status != STATUS_OK:
        if status == STATUS_NONFINITE:
            raise FloatingPointError(f"non-finite state after step {done}")
        raise SingularStageMatrix(f"differential stage matrix singular in step {done + 1}")
    stats.steps = stats.accepted = n_steps
    final = DaeState(x, z, problem.residual(x, z))
    return _record([state, final], [t0, tf], stats)


def integrate_dae_adaptive(
    problem: DaeProblem,
    method: MethodCard | PartitionedTableau,
    t0: float,
    tf: float,
    state0: DaeState | None = None,
    controller: StepController | None = None,
) -> DaeTrajectory:
    """Adaptive stepping on the embedded estimate over the full ``(x, z)`` vector."""
    card = as_card(method)
    if not card.tableau.has_embedded:
        raise ValueError(f"method {card.name!r} has no embedded weights")
    ctl = controller or StepController()
    order = controller_order(card)
    state = state0 if state0 is not None else problem.initial_state()
    h = ctl.h0 if ctl.h0 is not None else 1e-3 * (tf - t0)
    h_min = 1e-14 * abs(tf - t0)
    stats = Counters()
    t = t0
    times, states = [t0], [state]
    while t < tf:
        h = min(h, tf - t)
        if h < h_min and tf - t > h_min:
            raise StepSizeUnderflow(f"step {h:.3e} below {h_min:.3e} at t={t:.6g}")
        if stats.steps >= ctl.max_steps:
            raise StepSizeUnderflow(f"exceeded {ctl.max_steps} steps")
        stats.steps += 1
        try:
            res = step_dae(problem, card, state, h, counters=stats)
            err = ctl.error_norm(res.error_estimate, state.y, res.state.y)
        except (ArithmeticError, ValueError):
            err = math.inf
        if err <= 1.0:
            t = tf if tf - (t + h) <= h_min else t + h
            state = res.state
            times.append(t)
            states.append(state)
            stats.accepted += 1
            h = ctl.propose(h, err, order)
        else:
            stats.rejected += 1
            h = min(h, ctl.propose(h, err if math.isfinite(err) else 1e10, order))
    return _record(states, times, stats)


def make_consistent(
    problem: DaeProblem, x, z_guess, *, tol: float = 1e-12, max_iter: int = 50
) -> np.ndarray:
    """Newton iteration on ``g(x, z) = 0`` for ``z``. Returns ``z`` with ``||g|| <= tol``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z_guess, dtype=float).copy()
    for _ in range(max_iter + 1):
        r = np.asarray(problem.g(x, z), dtype=float)
        if np.linalg.norm(r) <= tol:
            return z
        _, _, _, gz = problem.jacobians(x, z)
        try:
            z = z - lu_solve(lu_factor(gz), r)
        except Singular as exc:
            raise SingularGz(str(exc)) from None
        if not np.all(np.isfinite(z)):
            break
    raise NewtonDivergence(f"constraint Newton did not reach {tol:g} in {max_iter} iterations")
