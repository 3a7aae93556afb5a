"""Time stepping for additively partitioned ODEs ``y' = f^1(t, y) + ... + f^N(t, y)``.

One engine serves both entry points. :func:`step` sweeps the stages of every
partition separately. :func:`step_imex_fast` first merges partitions whose
blocks and weights coincide, so that a single combined stage replaces several
(the shared-``b`` IMEX case). Stage ``i`` of a group ``G`` solves

    K = sum_{q in G} [ h f^q(t_q, y + sum alpha^{q,.} K) + h M^q sum gamma^{q,.} K ]

where only ``K`` itself is unknown. With no diagonal ``alpha`` this is one
linear system with matrix ``I - h sum_q gamma^{q,G}_ii M^q``; a diagonal
``alpha`` entry makes the stage nonlinear and it is solved by simplified
Newton with the same kind of matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NewtonDivergence, ShapeMismatch, Singular, SingularStageMatrix, StepSizeUnderflow
from .linalg import lu_factor, lu_solve
from .methods import MethodCard, as_card
from .tableau import MethodClass, PartitionedTableau, decoupled_ordering, derive_vectors

Rhs = Callable[[float, np.ndarray], np.ndarray]

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 25


# --------------------------------------------------------------------------- #
# Jacobian providers and problems
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class AnalyticJacobian:
    """Exact Jacobian ``func(t, y)``; ``constant`` allows reuse across steps."""

    func: Callable[[float, np.ndarray], np.ndarray]
    constant: bool = False


@dataclass(frozen=True)
class FiniteDifferenceJacobian:
    """Forward differences of the partition's right-hand side."""


@dataclass(frozen=True)
class FrozenJacobian:
    """A fixed matrix used in place of the Jacobian at every step."""

    matrix: np.ndarray


JacobianProvider = AnalyticJacobian | FiniteDifferenceJacobian | FrozenJacobian


def finite_difference_jacobian(f: Rhs, t: float, y: np.ndarray, f0: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian with increment ``sqrt(eps) * max(|y_i|, 1)``."""
    y = np.asarray(y)
    f0 = np.asarray(f(t, y)) if f0 is None else f0
    J = np.empty((f0.size, y.size), dtype=np.result_type(f0, y))
    root = math.sqrt(np.finfo(float).eps)
    for i in range(y.size):
        dy = root * max(abs(y[i]), 1.0)
        yp = y.copy()
        yp[i] = yp[i] + dy
        dy = yp[i] - y[i]  # the increment actually represented
        J[:, i] = (np.asarray(f(t, yp)) - f0) / dy
    return J


@dataclass(frozen=True)
class OdeProblem:
    """Right-hand side split into ``N`` additive partitions.

    ``time_derivatives[q]``, when given, returns ``df^q/dt`` and enables the
    non-autonomous correction of linearly implicit stages.
    """

    rhs: tuple[Rhs, ...]
    jacobians: tuple[JacobianProvider, ...]
    dimension: int
    y0: np.ndarray | None = None
    t_span: tuple[float, float] = (0.0, 1.0)
    time_derivatives: tuple[Rhs | None, ...] | None = None
    name: str = ""
    exact: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if len(self.jacobians) != len(self.rhs):
            raise ShapeMismatch("one Jacobian provider per partition is required")
        if self.time_derivatives is not None and len(self.time_derivatives) != len(self.rhs):
            raise ShapeMismatch("one time derivative (or None) per partition is required")

    @property
    def n_partitions(self) -> int:
        return len(self.rhs)

    def f(self, t: float, y: np.ndarray) -> np.ndarray:
        """The full right-hand side."""
        return sum(np.asarray(fq(t, y)) for fq in self.rhs)

    def jacobian(self, q: int, t: float, y: np.ndarray) -> np.ndarray:
        p = self.jacobians[q]
        if isinstance(p, FrozenJacobian):
            return np.asarray(p.matrix)
        if isinstance(p, AnalyticJacobian):
            return np.asarray(p.func(t, y))
        return finite_difference_jacobian(self.rhs[q], t, y)

    def finite_difference(self, q: int, t: float, y: np.ndarray) -> np.ndarray:
        return finite_difference_jacobian(self.rhs[q], t, y)

    def with_jacobians(self, jacobians: Sequence[JacobianProvider]) -> "OdeProblem":
        return replace(self, jacobians=tuple(jacobians))


# --------------------------------------------------------------------------- #
# bookkeeping
# --------------------------------------------------------------------------- #


@dataclass
class Counters:
    steps: int = 0
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    jac_evals: int = 0
    lu_count: int = 0
    newton_iters: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class FactorCache:
    """Stage-matrix factorizations keyed by group, diagonal weights and ``h``.

    The cache stays valid as long as the Jacobian matrices it was built from
    are the same objects; :meth:`bind` clears it otherwise.
    """

    token: tuple = ()
    store: dict = field(default_factory=dict)

    def bind(self, mats: Sequence[np.ndarray | None]) -> None:
        token = tuple(id(m) if m is not None else None for m in mats)
        if token != self.token:
            self.token = token
            self.store.clear()


@dataclass
class StepResult:
    y_next: np.ndarray
    error_estimate: np.ndarray | None = None
    stages: list[np.ndarray] | None = None
    groups: list[list[int]] | None = None
    lu_count: int = 0


# --------------------------------------------------------------------------- #
# the stage engine
# --------------------------------------------------------------------------- #


def combinable_groups(t: PartitionedTableau) -> list[list[int]]:
    """Partitions whose stages can be summed into one combined stage.

    Partitions ``p`` and ``p2`` merge when they have equal stage counts and
    weights and every row partition ``q`` couples to them through identical
    ``alpha`` and ``gamma`` blocks.
    """
    n = t.n_partitions
    groups: list[list[int]] = []
    for p in range(n):
        for grp in groups:
            r = grp[0]
            if t.stage_counts[r] != t.stage_counts[p] or not np.array_equal(t.weights[r], t.weights[p]):
                continue
            if t.embedded_weights is not None and not np.array_equal(t.embedded_weights[r], t.embedded_weights[p]):
                continue
            if all(
                np.array_equal(t.alpha[(q, r)], t.alpha[(q, p)]) and np.array_equal(t.gamma[(q, r)], t.gamma[(q, p)])
                for q in range(n)
            ):
                grp.append(p)
                break
        else:
            groups.append([p])
    return groups


def needs_matrix(t: PartitionedTableau, q: int) -> bool:
    """Whether partition ``q`` uses a Jacobian (linear terms or a Newton solve)."""
    n = t.n_partitions
    return bool(np.any(np.diag(t.alpha[(q, q)]) != 0.0) or any(np.any(t.gamma[(q, m)] != 0.0) for m in range(n)))


def _norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


class _Engine:
    """Precomputed per-method data for the grouped stage sweep."""

    def __init__(self, t: PartitionedTableau, groups: list[list[int]]):
        self.t = t
        self.groups = groups
        self.order = decoupled_ordering(t, groups if len(groups) < t.n_partitions else None)
        d = derive_vectors(t)
        self.c = d.c
        self.g = d.g
        n = t.n_partitions
        rep = [grp[0] for grp in groups]
        # alpha/gamma rows seen by partition q from group H
        self.A = {(q, H): t.alpha[(q, rep[H])] for q in range(n) for H in range(len(groups))}
        self.G = {(q, H): t.gamma[(q, rep[H])] for q in range(n) for H in range(len(groups))}
        self.b = [t.weights[r] for r in rep]
        self.bhat = None if t.embedded_weights is None else [t.embedded_weights[r] for r in rep]
        self.uses_matrix = [needs_matrix(t, q) for q in range(n)]
        # nonzero coefficient rows per (partition, group, stage), diagonal entry excluded
        self.rows = {}
        for G, grp in enumerate(groups):
            for i in range(t.stage_counts[grp[0]]):
                for q in grp:
                    arows, grows = [], []
                    for H in range(len(groups)):
                        for rows, src in ((arows, self.A), (grows, self.G)):
                            row = np.array(src[(q, H)][i], dtype=float)
                            if H == G:
                                row[i] = 0.0
                            if np.any(row):
                                rows.append((H, row))
                    self.rows[(q, G, i)] = (arows, grows, float(self.A[(q, G)][i, i]), float(self.G[(q, G)][i, i]))


_ENGINES: dict[tuple[int, bool], _Engine] = {}


def _engine(t: PartitionedTableau, combined: bool) -> _Engine:
    key = (id(t), combined)
    eng = _ENGINES.get(key)
    if eng is None or eng.t is not t:
        groups = combinable_groups(t) if combined else [[q] for q in range(t.n_partitions)]
        eng = _Engine(t, groups)
        if len(_ENGINES) > 256:
            _ENGINES.clear()
        _ENGINES[key] = eng
    return eng


def _time_data(eng: _Engine, q: int, weights: Sequence[float] | None) -> tuple[np.ndarray, np.ndarray]:
    if weights is None:
        return eng.c[(q, q)], eng.g[(q, q)]
    n = eng.t.n_partitions
    ct = sum(weights[m] * eng.c[(q, m)] for m in range(n))
    gt = sum(weights[m] * eng.g[(q, m)] for m in range(n))
    return ct, gt


def current_jacobians(problem: OdeProblem, t_: PartitionedTableau, t: float, y: np.ndarray, counters: Counters | None = None) -> list[np.ndarray | None]:
    """Jacobian matrices at ``(t, y)`` for the partitions that use one."""
    mats: list[np.ndarray | None] = []
    for q in range(t_.n_partitions):
        if needs_matrix(t_, q):
            mats.append(problem.jacobian(q, t, y))
            if counters is not None and not isinstance(problem.jacobians[q], FrozenJacobian):
                counters.jac_evals += 1
        else:
            mats.append(None)
    return mats


def _advance(
    problem: OdeProblem,
    card: MethodCard,
    t: float,
    y: np.ndarray,
    h: float,
    combined: bool,
    jacobians: Sequence[np.ndarray | None] | None,
    time_weights: Sequence[float] | None,
    keep_stages: bool,
    cache: FactorCache | None,
    counters: Counters | None,
) -> StepResult:
    tab = card.tableau
    if problem.n_partitions != tab.n_partitions:
        raise ShapeMismatch(f"problem has {problem.n_partitions} partitions, method {tab.name} has {tab.n_partitions}")
    eng = _engine(tab, combined)
    counters = counters if counters is not None else Counters()
    y = np.asarray(y)
    if jacobians is None:
        jacobians = current_jacobians(problem, tab, t, y, counters)
    mats = list(jacobians)
    for q in range(tab.n_partitions):
        if eng.uses_matrix[q] and mats[q] is None:
            raise ValueError(f"partition {q + 1} needs a Jacobian matrix")
    if cache is None:
        cache = FactorCache()
    cache.bind(mats)
    dtype = np.result_type(y, np.float64, *[m for m in mats if m is not None])
    d = y.size
    groups = eng.groups
    K = [np.zeros((tab.stage_counts[grp[0]], d), dtype=dtype) for grp in groups]
    tder = problem.time_derivatives
    times = {q: _time_data(eng, q, time_weights) for q in range(tab.n_partitions)}
    ft = {}
    if tder is not None:
        for q, fq in enumerate(tder):
            if fq is not None and np.any(times[q][1] != 0.0):
                ft[q] = np.asarray(fq(t, y))
    ynorm = _norm(y)
    lu_before = counters.lu_count

    def factor(key, weights_by_q):
        full = (key, h)
        f = cache.store.get(full)
        if f is None:
            M = np.eye(d, dtype=dtype)
            for q, w in weights_by_q:
                if w != 0.0:
                    M = M - (h * w) * mats[q]
            try:
                f = lu_factor(M)
            except Singular as exc:
                raise SingularStageMatrix(str(exc)) from None
            counters.lu_count += 1
            cache.store[full] = f
        return f

    for G, i in eng.order:
        members = groups[G]
        base, rhs0 = {}, np.zeros(d, dtype=dtype)
        diag_a, diag_g = [], []
        for q in members:
            arows, grows, a_ii, g_ii = eng.rows[(q, G, i)]
            Y = y
            for H, row in arows:
                Y = Y + row @ K[H]
            base[q] = Y
            if grows:
                S = sum(row @ K[H] for H, row in grows)
                rhs0 += h * (mats[q] @ S)
            diag_a.append((q, a_ii))
            diag_g.append((q, g_ii))
            if q in ft:
                rhs0 += (h * h * times[q][1][i]) * ft[q]

        def explicit_part(Kval):
            out = rhs0.copy()
            for q, a_ii in diag_a:
                tq = t + times[q][0][i] * h
                arg = base[q] if a_ii == 0.0 or Kval is None else base[q] + a_ii * Kval
                out += h * np.asarray(problem.rhs[q](tq, arg))
                counters.rhs_evals += 1
            return out

        if all(a == 0.0 for _, a in diag_a):
            r = explicit_part(None)
            if any(gv != 0.0 for _, gv in diag_g):
                key = (G, tuple(gv for _, gv in diag_g), "lin")
                Kval = lu_solve(factor(key, diag_g), r)
            else:
                Kval = r
        else:
            # K - sum h f^q(Y^q + a_q K) - h M^q (S^q + g_q K) = 0, simplified Newton
            w = [(q, a + gv) for (q, a), (_, gv) in zip(diag_a, diag_g)]
            f = factor((G, tuple(v for _, v in w), "lin"), w)
            Kval = np.zeros(d, dtype=dtype)
            tol = NEWTON_TOL * ynorm
            for it in range(NEWTON_MAXITER):
                res = Kval - explicit_part(Kval)
                for q, gv in diag_g:
                    if gv != 0.0:
                        res -= (h * gv) * (mats[q] @ Kval)
                dK = lu_solve(f, res)
                Kval = Kval - dK
                counters.newton_iters += 1
                dn = _norm(dK)
                if not np.isfinite(dn):
                    raise NewtonDivergence(f"stage {i + 1} of group {G + 1}: Newton produced non-finite values")
                if dn <= tol or dn == 0.0:
                    break
            else:
                raise NewtonDivergence(f"stage {i + 1} of group {G + 1}: no convergence in {NEWTON_MAXITER} iterations")
        K[G][i] = Kval

    y_next = y.astype(dtype, copy=True)
    for H in range(len(groups)):
        y_next += eng.b[H] @ K[H]
    err = None
    if eng.bhat is not None:
        err = np.zeros(d, dtype=dtype)
        for H in range(len(groups)):
            err += (eng.b[H] - eng.bhat[H]) @ K[H]
    return StepResult(
        y_next=y_next,
        error_estimate=err,
        stages=K if keep_stages else None,
        groups=[list(g) for g in groups],
        lu_count=counters.lu_count - lu_before,
    )


def step(
    problem: OdeProblem,
    method: MethodCard | PartitionedTableau,
    t: float,
    y: np.ndarray,
    h: float,
    *,
    jacobians: Sequence[np.ndarray | None] | None = None,
    time_weights: Sequence[float] | None = None,
    keep_stages: bool = False,
    cache: FactorCache | None = None,
    counters: Counters | None = None,
) -> StepResult:
    """One step with separate stages for every partition.

    ``jacobians`` overrides the matrices ``M^q`` (by default the Jacobians at
    ``(t, y)``, or the frozen matrix of a :class:`FrozenJacobian`).
    ``time_weights`` splits the time equation ``t' = 1`` between partitions for
    non-autonomous problems; by default each partition uses its own diagonal
    block abscissae.
    """
    return _advance(problem, as_card(method), t, y, h, False, jacobians, time_weights, keep_stages, cache, counters)


def step_imex_fast(
    problem: OdeProblem,
    method: MethodCard | PartitionedTableau,
    t: float,
    y: np.ndarray,
    h: float,
    **kwargs,
) -> StepResult:
    """One step using combined stages for partitions with shared coefficients.

    Requires a method flagged ``combined_stages``; the result agrees with
    :func:`step` up to rounding.
    """
    card = as_card(method)
    if not card.tableau.combined_stages:
        raise ValueError(f"method {card.name!r} is not flagged for combined stages")
    return _advance(
        problem,
        card,
        t,
        y,
        h,
        True,
        kwargs.get("jacobians"),
        kwargs.get("time_weights"),
        kwargs.get("keep_stages", False),
        kwargs.get("cache"),
        kwargs.get("counters"),
    )


# --------------------------------------------------------------------------- #
# drivers
# --------------------------------------------------------------------------- #


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    stats: Counters
    extra: dict = field(default_factory=dict)

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, extra_columns: dict[str, np.ndarray] | None = None) -> str:
        d = self.states.shape[1]
        cols = ["t"] + [f"y{i}" for i in range(d)] + list(extra_columns or {})
        lines = [",".join(cols)]
        for k, tk in enumerate(self.times):
            row = [tk, *np.real(self.states[k])]
            row += [v[k] for v in (extra_columns or {}).values()]
            lines.append(",".join(format(float(v), ".17g") for v in row))
        return "\n".join(lines) + "\n"


class JacobianPolicy:
    """Chooses ``M^q`` per step: exact at each step for ROS, frozen for ROW.

    Frozen providers always give their matrix; constant analytic Jacobians
    are evaluated once.
    """

    def __init__(self, problem: OdeProblem, card: MethodCard, refresh: bool = False):
        self.problem = problem
        self.tab = card.tableau
        self.refresh = refresh or self.tab.method_class is MethodClass.ROS
        self.mats: list[np.ndarray | None] | None = None

    def get(self, t: float, y: np.ndarray, counters: Counters) -> list[np.ndarray | None]:
        if self.mats is None:
            self.mats = current_jacobians(self.problem, self.tab, t, y, counters)
            return self.mats
        if not self.refresh:
            return self.mats
        new = list(self.mats)
        changed = False
        for q, m in enumerate(self.mats):
            if m is None:
                continue
            p = self.problem.jacobians[q]
            if isinstance(p, FrozenJacobian) or (isinstance(p, AnalyticJacobian) and p.constant):
                continue
            new[q] = self.problem.jacobian(q, t, y)
            counters.jac_evals += 1
            changed = True
        if changed:
            self.mats = new
        return self.mats


def _stepper(card: MethodCard, fast: bool | None):
    use_fast = card.tableau.combined_stages if fast is None else fast
    return step_imex_fast if use_fast else step


def integrate_fixed(
    problem: OdeProblem,
    method: MethodCard | PartitionedTableau,
    t0: float,
    tf: float,
    n_steps: int,
    y0: np.ndarray | None = None,
    *,
    fast: bool | None = None,
    refresh_jacobian: bool = False,
    record: bool = True,
    time_weights: Sequence[float] | None = None,
) -> Trajectory:
    """``n_steps`` equal steps from ``t0`` to exactly ``tf``."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    card = as_card(method)
    y = np.asarray(problem.y0 if y0 is None else y0)
    if y is None or y.ndim != 1:
        raise ValueError("an initial state vector is required")
    stepper = _stepper(card, fast)
    policy = JacobianPolicy(problem, card, refresh_jacobian)
    counters = Counters()
    cache = FactorCache()
    h = (tf - t0) / n_steps
    times = [t0]
    states = [y.copy()]
    t = t0
    for k in range(n_steps):
        mats = policy.get(t, y, counters)
        hk = (tf - t) if k == n_steps - 1 else h
        res = stepper(problem, card, t, y, hk, jacobians=mats, cache=cache, counters=counters, time_weights=time_weights)
        y = res.y_next
        t = tf if k == n_steps - 1 else t0 + (k + 1) * h
        counters.steps += 1
        counters.accepted += 1
        if record:
            times.append(t)
            states.append(y)
    if not record:
        times.append(t)
        states.append(y)
    return Trajectory(np.array(times), np.array(states), counters)


@dataclass(frozen=True)
class StepController:
    """Elementary integral step-size controller on an RMS error norm."""

    atol: float = 1e-6
    rtol: float = 1e-6
    safety: float = 0.9
    ratio_min: float = 0.2
    ratio_max: float = 5.0
    h0: float | None = None
    max_steps: int = 1_000_000

    def error_norm(self, est: np.ndarray, y: np.ndarray, y_new: np.ndarray) -> float:
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean(np.abs(est / scale) ** 2)))

    def propose(self, h: float, err: float, order: int) -> float:
        if err == 0.0:
            ratio = self.ratio_max
        else:
            ratio = self.safety * err ** (-1.0 / order)
        return h * min(self.ratio_max, max(self.ratio_min, ratio))


def controller_order(card: MethodCard) -> int:
    t = card.tableau
    p = t.claimed_order or 1
    if t.has_embedded and t.claimed_embedded_order:
        return min(p, t.claimed_embedded_order) + 1
    return p + 1


def _initial_step(problem: OdeProblem, t0: float, tf: float, y0: np.ndarray, ctl: StepController, order: int) -> float:
    if ctl.h0 is not None:
        return ctl.h0
    scale = ctl.atol + ctl.rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(problem.f(t0, y0) / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return float(min(h, abs(tf - t0)))


def integrate_adaptive(
    problem: OdeProblem,
    method: MethodCard | PartitionedTableau,
    t0: float,
    tf: float,
    y0: np.ndarray | None = None,
    controller: StepController | None = None,
    *,
    fast: bool | None = None,
    refresh_jacobian: bool = False,
) -> Trajectory:
    """Adaptive integration with the embedded pair, or step doubling without one.

    Statistics report accepted and rejected steps, right-hand-side and
    Jacobian evaluations and LU factorizations.
    """
    ctl = controller or StepController()
    card = as_card(method)
    tab = card.tableau
    y = np.asarray(problem.y0 if y0 is None else y0)
    stepper = _stepper(card, fast)
    policy = JacobianPolicy(problem, card, refresh_jacobian)
    counters = Counters()
    cache = FactorCache()
    order = controller_order(card)
    h = _initial_step(problem, t0, tf, y, ctl, order)
    h_min = 1e-14 * abs(tf - t0)
    t = t0
    times, states = [t0], [y.copy()]
    while t < tf:
        if counters.steps >= ctl.max_steps:
            raise StepSizeUnderflow(f"exceeded {ctl.max_steps} steps")
        h = min(h, tf - t)
        if h < h_min and tf - t > h_min:
            raise StepSizeUnderflow(f"step {h:.3e} below {h_min:.3e} at t={t:.6g}")
        mats = policy.get(t, y, counters)
        kw = dict(jacobians=mats, cache=cache, counters=counters)
        if tab.has_embedded:
            res = stepper(problem, card, t, y, h, **kw)
            y_new, est = res.y_next, res.error_estimate
        else:
            full = stepper(problem, card, t, y, h, **kw).y_next
            half = stepper(problem, card, t, y, h / 2, **kw).y_next
            mid_mats = policy.get(t + h / 2, half, counters)
            y_new = stepper(problem, card, t + h / 2, half, h / 2, jacobians=mid_mats, cache=cache, counters=counters).y_next
            est = (y_new - full) / (2 ** (tab.claimed_order or 1) - 1)
        counters.steps += 1
        err = ctl.error_norm(est, y, y_new)
        if err <= 1.0 and np.all(np.isfinite(y_new)):
            t = tf if tf - (t + h) <= h_min else t + h
            y = y_new
            times.append(t)
            states.append(y)
            counters.accepted += 1
            h = ctl.propose(h, err, order)
        else:
            counters.rejected += 1
            h = min(h, ctl.propose(h, err if np.isfinite(err) else 1e10, order))
    return Trajectory(np.array(times), np.array(states), counters)
