"""Benchmark and test problems.

State layout for the Brusselator is ``[u_1..u_N, v_1..v_N]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from ._kernels import CompiledDae
from .errors import DomainError
from .integrator_ode import AnalyticJacobian, FrozenJacobian, OdeProblem
from .integrator_dae import DaeProblem


# --------------------------------------------------------------------------- #
# Brusselator
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class BrusselatorConfig:
    interior_points: int = 100
    A: float = 1.0
    B: float = 3.0
    alpha: float = 1.0 / 50.0
    t_span: tuple[float, float] = (0.0, 10.0)

    @property
    def dx(self) -> float:
        return 1.0 / (self.interior_points + 1)

    @property
    def grid(self) -> np.ndarray:
        return self.dx * np.arange(1, self.interior_points + 1)


def brusselator_laplacian(cfg: BrusselatorConfig) -> np.ndarray:
    """Diffusion Jacobian: ``alpha/dx^2 * tridiag(1, -2, 1)`` on each of the ``u`` and ``v`` blocks."""
    n = cfg.interior_points
    T = -2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    L = np.zeros((2 * n, 2 * n))
    L[:n, :n] = T
    L[n:, n:] = T
    return (cfg.alpha / cfg.dx**2) * L


def brusselator(cfg: BrusselatorConfig | None = None) -> OdeProblem:
    """Reaction (partition 0, explicit target) and diffusion (partition 1) split."""
    cfg = cfg or BrusselatorConfig()
    n = cfg.interior_points
    if n < 3:
        raise ValueError("the Brusselator needs at least 3 interior points")
    A, B = cfg.A, cfg.B
    L = brusselator_laplacian(cfg)
    L.setflags(write=False)
    bc = np.zeros(2 * n)
    scale = cfg.alpha / cfg.dx**2
    bc[0] = bc[n - 1] = scale * 1.0  # u = 1 on both ends
    bc[n] = bc[2 * n - 1] = scale * 3.0  # v = 3 on both ends
    bc.setflags(write=False)

    def reaction(t, y):
        u, v = y[:n], y[n:]
        u2v = u * u * v
        return np.concatenate([A + u2v - (B + 1.0) * u, B * u - u2v])

    def reaction_jac(t, y):
        u, v = y[:n], y[n:]
        J = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        J[idx, idx] = 2 * u * v - (B + 1.0)
        J[idx, n + idx] = u * u
        J[n + idx, idx] = B - 2 * u * v
        J[n + idx, n + idx] = -u * u
        return J

    def diffusion(t, y):
        return L @ y + bc

    x = cfg.grid
    y0 = np.concatenate([1.0 + np.sin(2 * np.pi * x), np.full(n, 3.0)])
    return OdeProblem(
        rhs=(reaction, diffusion),
        jacobians=(AnalyticJacobian(reaction_jac), AnalyticJacobian(lambda t, y: L, constant=True)),
        dimension=2 * n,
        y0=y0,
        t_span=cfg.t_span,
        name="brusselator",
    )


# --------------------------------------------------------------------------- #
# ZLA kinetics
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ZlaConfig:
    k1: float = 18.7
    k2: float = 0.58
    k3: float = 0.09
    k4: float = 0.42
    K: float = 34.4
    klA: float = 3.3
    Ks: float = 115.83
    pCO2: float = 0.9
    H: float = 737.0
    t_span: tuple[float, float] = (0.0, 180.0)
    x0: tuple[float, ...] = (0.444, 0.00123, 0.0, 0.007, 0.0)

    @property
    def z0(self) -> float:
        return self.Ks * self.x0[0] * self.x0[3]

    def params(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.k4, self.K, self.klA, self.Ks, self.pCO2, self.H])


#: Typical size of the concentrations y1..y5, used to floor difference increments.
ZLA_X_SCALE = 1e-3

# f = S @ (r1, r2, r3, r4, r5, F_in)
_ZLA_S = np.array(
    [
        [-2.0, 1.0, -1.0, -1.0, 0.0, 0.0],
        [-0.5, 0.0, 0.0, -1.0, -0.5, 1.0],
        [1.0, -1.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 1.0, -2.0, 0.0, 0.0],
        [0.0, 1.0, -1.0, 0.0, 1.0, 0.0],
    ]
)


@njit(cache=True)
def _zla_sqrt_y2(y2):
    if not y2 > 0.0:
        raise DomainError("y2 is not positive; the square-root rates are undefined")
    return math.sqrt(y2)


@njit(cache=True)
def _zla_f(x, z, p):
    k1, k2, k3, k4, K, klA, pCO2, H = p[0], p[1], p[2], p[3], p[4], p[5], p[7], p[8]
    y1, y2, y3, y4, y5 = x[0], x[1], x[2], x[3], x[4]
    y6 = z[0]
    s = _zla_sqrt_y2(y2)
    r1 = k1 * y1**4 * s
    r2 = k2 * y3 * y4
    r3 = (k2 / K) * y1 * y5
    r4 = k3 * y1 * y4**2
    r5 = k4 * y6**2 * s
    fin = klA * (pCO2 / H - y2)
    out = np.empty(5)
    out[0] = -2.0 * r1 + r2 - r3 - r4
    out[1] = -0.5 * r1 - r4 - 0.5 * r5 + fin
    out[2] = r1 - r2 + r3
    out[3] = -r2 + r3 - 2.0 * r4
    out[4] = r2 - r3 + r5
    return out


@njit(cache=True)
def _zla_g(x, z, p):
    out = np.empty(1)
    out[0] = p[6] * x[0] * x[3] - z[0]
    return out


@njit(cache=True)
def _zla_rate_jacobian(x, z, p):
    """Rows ``d r_j / d(y1..y6)`` for ``r = (r1..r5, F_in)``."""
    k1, k2, k3, k4, K, klA = p[0], p[1], p[2], p[3], p[4], p[5]
    y1, y2, y3, y4, y5 = x[0], x[1], x[2], x[3], x[4]
    y6 = z[0]
    s = _zla_sqrt_y2(y2)
    D = np.zeros((6, 6))
    D[0, 0] = 4.0 * k1 * y1**3 * s
    D[0, 1] = k1 * y1**4 * 0.5 / s
    D[1, 2] = k2 * y4
    D[1, 3] = k2 * y3
    D[2, 0] = (k2 / K) * y5
    D[2, 4] = (k2 / K) * y1
    D[3, 0] = k3 * y4**2
    D[3, 3] = 2.0 * k3 * y1 * y4
    D[4, 1] = k4 * y6**2 * 0.5 / s
    D[4, 5] = 2.0 * k4 * y6 * s
    D[5, 1] = -klA
    return D


@njit(cache=True)
def _zla_f_x(x, z, p):
    return _ZLA_S @ np.ascontiguousarray(_zla_rate_jacobian(x, z, p)[:, :5])


@njit(cache=True)
def _zla_f_z(x, z, p):
    return _ZLA_S @ np.ascontiguousarray(_zla_rate_jacobian(x, z, p)[:, 5:])


@njit(cache=True)
def _zla_g_x(x, z, p):
    out = np.zeros((1, 5))
    out[0, 0] = p[6] * x[3]
    out[0, 3] = p[6] * x[0]
    return out


@njit(cache=True)
def _zla_g_z(x, z, p):
    out = np.empty((1, 1))
    out[0, 0] = -1.0
    return out


def zla(cfg: ZlaConfig | None = None) -> DaeProblem:
    """Five kinetic equations in ``y1..y5`` and the constraint ``0 = Ks y1 y4 - y6``.

    Raises :class:`DomainError` whenever ``y2 <= 0`` is evaluated. The
    functions are compiled, so long fixed-step runs can use the compiled loop.
    """
    c = cfg or ZlaConfig()
    P = c.params()
    P.setflags(write=False)

    def bind(fun):
        return lambda x, z: fun(np.asarray(x, dtype=float), np.asarray(z, dtype=float), P)

    return DaeProblem(
        d_x=5,
        d_z=1,
        f=bind(_zla_f),
        g=bind(_zla_g),
        f_x=bind(_zla_f_x),
        f_z=bind(_zla_f_z),
        g_x=bind(_zla_g_x),
        g_z=bind(_zla_g_z),
        x0=np.array(c.x0, dtype=float),
        z0=np.array([c.z0]),
        t_span=c.t_span,
        name="zla",
        compiled=CompiledDae(_zla_f, _zla_g, _zla_f_x, _zla_f_z, _zla_g_x, _zla_g_z, P),
        x_scale=ZLA_X_SCALE,
    )


# --------------------------------------------------------------------------- #
# small analytic problems
# --------------------------------------------------------------------------- #


def dahlquist_split(lambdas: Sequence[complex], y0: complex = 1.0) -> OdeProblem:
    """``y' = (lambda_1 + ... + lambda_N) y`` with one partition per term.

    The state is complex so that complex eigenvalues are represented exactly.
    """
    lams = tuple(complex(v) for v in lambdas)
    total = sum(lams)
    return OdeProblem(
        rhs=tuple((lambda t, y, lam=lam: lam * y) for lam in lams),
        jacobians=tuple(AnalyticJacobian(lambda t, y, lam=lam: np.array([[lam]]), constant=True) for lam in lams),
        dimension=1,
        y0=np.array([complex(y0)]),
        t_span=(0.0, 1.0),
        name="dahlquist",
        exact=lambda t: np.array([complex(y0) * np.exp(total * t)]),
    )


def logistic_exact(y0: float, t: float) -> float:
    e = math.exp(t)
    return y0 * e / (1.0 - y0 + y0 * e)


def logistic_split(y0: float = 0.5, t_span: tuple[float, float] = (0.0, 1.0)) -> OdeProblem:
    """``y' = y - y^2`` split as ``f^1 = y`` and ``f^2 = -y^2``."""
    return OdeProblem(
        rhs=(lambda t, y: y.copy(), lambda t, y: -y * y),
        jacobians=(
            AnalyticJacobian(lambda t, y: np.eye(1), constant=True),
            AnalyticJacobian(lambda t, y: np.array([[-2.0 * y[0]]])),
        ),
        dimension=1,
        y0=np.array([float(y0)]),
        t_span=t_span,
        name="logistic",
        exact=lambda t: np.array([logistic_exact(y0, t)]),
    )


# --------------------------------------------------------------------------- #
# problem transformations
# --------------------------------------------------------------------------- #


def _zero_rhs(t, y):
    return np.zeros_like(y)


def pad_partitions(problem: OdeProblem, positions: Sequence[int]) -> OdeProblem:
    """Insert identically zero partitions so that the problem's ``m``-th
    partition lands at ``positions[m]`` of the result."""
    n_out = max(positions) + 1
    if len(set(positions)) != len(positions) or len(positions) != problem.n_partitions:
        raise ValueError("positions must be distinct, one per partition")
    zero_j = FrozenJacobian(np.zeros((problem.dimension, problem.dimension)))
    rhs, jac, td = [_zero_rhs] * n_out, [zero_j] * n_out, [None] * n_out
    for m, p in enumerate(positions):
        rhs[p] = problem.rhs[m]
        jac[p] = problem.jacobians[m]
        if problem.time_derivatives is not None:
            td[p] = problem.time_derivatives[m]
    return OdeProblem(
        rhs=tuple(rhs),
        jacobians=tuple(jac),
        dimension=problem.dimension,
        y0=problem.y0,
        t_span=problem.t_span,
        time_derivatives=tuple(td) if problem.time_derivatives is not None else None,
        name=problem.name,
        exact=problem.exact,
    )


def perturbed_frozen_jacobians(
    problem: OdeProblem, relative: float = 0.3, seed: int = 0, partitions: Sequence[int] | None = None
) -> OdeProblem:
    """Replace Jacobians by ``J(t0, y0) + relative*||J|| * P`` with ``P`` random symmetric, ``||P||_2 = 1``."""
    rng = np.random.default_rng(seed)
    t0 = problem.t_span[0]
    y0 = np.asarray(problem.y0)
    d = problem.dimension
    chosen = range(problem.n_partitions) if partitions is None else partitions
    jacs = list(problem.jacobians)
    for q in chosen:
        J = problem.jacobian(q, t0, y0)
        P = rng.standard_normal((d, d))
        P = P + P.T
        P /= np.linalg.norm(P, 2)
        scale = max(np.linalg.norm(J, 2), 1.0)
        jacs[q] = FrozenJacobian(J + relative * scale * P)
    return problem.with_jacobians(jacs)
