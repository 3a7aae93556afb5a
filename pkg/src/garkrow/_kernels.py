"""Compiled fixed-step loops for small systems.

Problems opt in by supplying ``numba``-compiled right-hand sides with the
signature ``fun(x, z, params)``. The loops mirror the interpreted steppers
stage for stage; the interpreted code remains the reference, and tests
compare the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .linalg import PIVOT_THRESHOLD

STATUS_OK = 0
STATUS_SINGULAR_DIFF = 1
STATUS_SINGULAR_ALG = 2
STATUS_NONFINITE = 3


@dataclass(frozen=True)
class CompiledDae:
    """Compiled ``f, g`` and their Jacobians, all called as ``fun(x, z, params)``."""

    f: Callable
    g: Callable
    f_x: Callable
    f_z: Callable
    g_x: Callable
    g_z: Callable
    params: np.ndarray


@njit(cache=True)
def solve_small(M, r):
    """Gaussian elimination with partial pivoting; ``ok`` is False below the pivot threshold."""
    n = M.shape[0]
    a = M.copy()
    x = r.copy()
    norm = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += abs(a[i, j])
        norm = max(norm, s)
    tiny = PIVOT_THRESHOLD * norm
    if norm == 0.0:
        return x, False
    for k in range(n):
        p = k
        for i in range(k + 1, n):
            if abs(a[i, k]) > abs(a[p, k]):
                p = i
        if abs(a[p, k]) <= tiny:
            return x, False
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
        for i in range(k + 1, n):
            m = a[i, k] / a[k, k]
            if m != 0.0:
                for j in range(k, n):
                    a[i, j] -= m * a[k, j]
                x[i] -= m * x[k]
    for k in range(n - 1, -1, -1):
        s = x[k]
        for j in range(k + 1, n):
            s -= a[k, j] * x[j]
        x[k] = s / a[k, k]
    return x, True


@njit(cache=True)
def dae_fixed(
    f, g, f_x, f_z, g_x, g_z, params,
    order_q, order_i,
    A00, A01, A10, A11, G00, G01, G10, G11,
    b0, b1,
    x0, z0, h, n_steps, h_last,
):  # fmt: skip
    """``n_steps`` steps (the last of size ``h_last``). Returns ``(x, z, status, steps_done)``."""
    dx = x0.shape[0]
    dz = z0.shape[0]
    sd = A00.shape[0]
    sa = A11.shape[0]
    need_fx = np.any(G00 != 0.0)
    need_fz = np.any(G01 != 0.0)
    need_gx = np.any(G10 != 0.0)
    x = x0.copy()
    z = z0.copy()
    k = np.zeros((sd, dx))
    l = np.zeros((sa, dz))
    fx = np.zeros((dx, dx))
    fz = np.zeros((dx, dz))
    gx = np.zeros((dz, dx))
    eye = np.eye(dx)
    for n in range(n_steps):
        hn = h_last if n == n_steps - 1 else h
        if need_fx:
            fx = f_x(x, z, params)
        if need_fz:
            fz = f_z(x, z, params)
        if need_gx:
            gx = g_x(x, z, params)
        gz = g_z(x, z, params)
        k[:, :] = 0.0
        l[:, :] = 0.0
        for s in range(order_q.shape[0]):
            q = order_q[s]
            i = order_i[s]
            if q == 0:
                X = x + A00[i] @ k
                Z = z + A01[i] @ l
                rhs = hn * f(X, Z, params)
                sk = G00[i] @ k
                sl = G01[i] @ l
                if need_fx:
                    rhs += hn * (fx @ sk)
                if need_fz:
                    rhs += hn * (fz @ sl)
                gii = G00[i, i]
                if gii != 0.0:
                    sol, ok = solve_small(eye - (hn * gii) * fx, rhs)
                    if not ok:
                        return x, z, STATUS_SINGULAR_DIFF, n
                    rhs = sol
                k[i] = rhs
            else:
                X = x + A10[i] @ k
                Z = z + A11[i] @ l
                rhs = -g(X, Z, params)
                if need_gx:
                    rhs -= gx @ (G10[i] @ k)
                rhs -= gz @ (G11[i] @ l)
                sol, ok = solve_small(G11[i, i] * gz, rhs)
                if not ok:
                    return x, z, STATUS_SINGULAR_ALG, n
                l[i] = sol
        x = x + b0 @ k
        z = z + b1 @ l
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            return x, z, STATUS_NONFINITE, n + 1
    return x, z, STATUS_OK, n_steps
