"""Dense LU factorization with partial pivoting, for real and complex data.

The stage systems of linearly implicit methods all have the form
``(I - h*gamma*M) k = r``. One factorization can serve every stage that
shares the diagonal coefficient, so the factorization is a value object that
is created once and solved against many times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import Singular

#: Relative pivot threshold below which a matrix is declared singular.
PIVOT_THRESHOLD = 1e-14


@dataclass(frozen=True)
class LuFactorization:
    """Combined ``L\\U`` storage with row pivots, so that ``P A = L U``.

    ``lu`` holds the strictly lower part of the unit lower factor and the
    upper factor. ``perm[i]`` is the original row placed at position ``i``;
    ``pivots[k]`` is the row swapped with row ``k`` at elimination step ``k``.
    """

    lu: np.ndarray
    perm: np.ndarray
    sign: int
    pivots: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def determinant(self) -> complex | float:
        return self.sign * np.prod(np.diag(self.lu))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self, rhs)


def _as_square(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if np.iscomplexobj(a):
        return a.astype(np.complex128, copy=True)
    return a.astype(np.float64, copy=True)


def lu_factor(a) -> LuFactorization:
    """Factor a square matrix with row partial pivoting.

    Raises :class:`Singular` when a pivot magnitude drops below
    ``1e-14 * ||A||_inf``.
    """
    lu = _as_square(a)
    n = lu.shape[0]
    norm = np.abs(lu).sum(axis=1).max() if n else 0.0
    threshold = PIVOT_THRESHOLD * norm
    perm = np.arange(n)
    pivots = np.arange(n, dtype=np.int32)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if norm == 0.0 or abs(lu[p, k]) <= threshold:
            raise Singular(f"pivot {abs(lu[p, k]):.3e} at column {k} below threshold {threshold:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            pivots[k] = p
            sign = -sign
        if k + 1 < n:
            lu[k + 1 :, k] /= lu[k, k]
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    lu = np.asfortranarray(lu)  # LAPACK layout, so solves do not copy
    lu.setflags(write=False)
    perm.setflags(write=False)
    pivots.setflags(write=False)
    return LuFactorization(lu, perm, sign, pivots)


def lu_solve(f: LuFactorization, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` given ``f = lu_factor(A)``. ``rhs`` may be 1-D or 2-D."""
    rhs = np.asarray(rhs)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, factorization has {f.n}")
    # The forward and back substitutions go to LAPACK's getrs; pivoting and
    # the singularity policy live in lu_factor above.
    if np.iscomplexobj(rhs) and not np.iscomplexobj(f.lu):
        return _getrs(f, rhs.real) + 1j * _getrs(f, rhs.imag)
    return _getrs(f, rhs)


def _getrs(f: LuFactorization, rhs: np.ndarray) -> np.ndarray:
    dtype = np.result_type(f.lu.dtype, rhs.dtype, np.float64)
    (getrs,) = get_lapack_funcs(("getrs",), (np.empty(0, dtype=dtype),))
    lu = f.lu if f.lu.dtype == dtype else f.lu.astype(dtype)
    x, info = getrs(lu, f.pivots, rhs.astype(dtype, copy=False))
    if info != 0:
        raise ValueError(f"getrs failed with info={info}")
    return x


def solve(a, rhs) -> np.ndarray:
    """Factor and solve in one call."""
    return lu_solve(lu_factor(a), rhs)


def invert_small(a) -> np.ndarray:
    """Inverse of a small nonsingular matrix, column by column from one LU."""
    f = lu_factor(a)
    return lu_solve(f, np.eye(f.n, dtype=f.lu.dtype))
