"""Linear stability of partitioned methods on the multi-rate Dahlquist test.

For ``y' = (lambda_1 + ... + lambda_N) y`` with ``z_m = h*lambda_m`` one step
multiplies ``y`` by

    R(Z) = 1 + b^T (I - Z B)^{-1} Z 1,

where ``B = A + G`` is the global coefficient matrix and ``Z`` repeats
``z_m`` over the stages of partition ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import Singular
from .linalg import lu_factor, lu_solve
from .tableau import PartitionedTableau, assemble_global, stage_offsets


@dataclass(frozen=True)
class StabilityPoint:
    z: tuple[complex, ...]
    r: complex

    @property
    def magnitude(self) -> float:
        return abs(self.r)


def _stage_z(t: PartitionedTableau, z: Sequence[complex]) -> np.ndarray:
    z = np.asarray(z, dtype=complex).ravel()
    if z.size == 1 and t.n_partitions > 1:
        z = np.repeat(z, t.n_partitions)
    if z.size != t.n_partitions:
        raise ValueError(f"need {t.n_partitions} z values, got {z.size}")
    return np.repeat(z, t.stage_counts)


def stability_forms(t: PartitionedTableau, z: Sequence[complex]) -> tuple[complex, complex]:
    """``R`` from ``(I - ZB)^{-1} Z`` and from the equivalent ``Z (I - BZ)^{-1}``."""
    _, _, B, b = assemble_global(t)
    zs = _stage_z(t, z)
    one = np.ones(len(zs))
    eye = np.eye(len(zs))
    r1 = 1 + b @ lu_solve(lu_factor(eye - zs[:, None] * B), zs)
    r2 = 1 + (b * zs) @ lu_solve(lu_factor(eye - B * zs[None, :]), one)
    return complex(r1), complex(r2)


def stability_value(t: PartitionedTableau, z: Sequence[complex]) -> complex:
    """Evaluate ``R(Z)``. Raises :class:`Singular` at poles. A scalar ``z`` is used for every partition."""
    _, _, B, b = assemble_global(t)
    zs = _stage_z(t, z)
    f = lu_factor(np.eye(len(zs)) - zs[:, None] * B)
    return complex(1 + b @ lu_solve(f, zs))


def stability_point(t: PartitionedTableau, z: Sequence[complex]) -> StabilityPoint:
    return StabilityPoint(tuple(complex(v) for v in np.atleast_1d(z)), stability_value(t, z))


def stability_at_stiff_limit(
    t: PartitionedTableau, stiff_partition: int, z_other: Sequence[complex] | None = None
) -> complex:
    """Limit of ``R`` as ``z`` of ``stiff_partition`` tends to infinity.

    ``z_other`` gives the remaining partitions' values, either with one entry
    per partition (the stiff entry is ignored) or with the stiff entry left
    out. Missing values default to zero. With ``S`` the stiff stages and
    ``O`` the others the limit is

        1 - b_S^T B_SS^{-1} 1 + (b_O^T - b_S^T B_SS^{-1} B_SO) u,
        (I - Z_O K) u = Z_O (1 - B_OS B_SS^{-1} 1),  K = B_OO - B_OS B_SS^{-1} B_SO,

    evaluated without forming any large number. Raises :class:`Singular` if
    ``B_SS`` is singular.
    """
    n = t.n_partitions
    if not 0 <= stiff_partition < n:
        raise ValueError(f"stiff partition {stiff_partition} out of range")
    if z_other is None:
        zo = [0j] * n
    else:
        zo = [complex(v) for v in z_other]
        if len(zo) == n - 1:
            zo.insert(stiff_partition, 0j)
        if len(zo) != n:
            raise ValueError(f"need {n - 1} or {n} values in z_other")
    _, _, B, b = assemble_global(t)
    off = stage_offsets(t)
    S = np.arange(off[stiff_partition], off[stiff_partition + 1])
    O = np.setdiff1d(np.arange(off[-1]), S)
    fss = lu_factor(B[np.ix_(S, S)])
    oneS = np.ones(len(S))
    # row vector b_S^T B_SS^{-1}, via the transposed system
    w = lu_solve(lu_factor(B[np.ix_(S, S)].T), b[S])
    r = 1.0 - w @ oneS
    if len(O) == 0:
        return complex(r)
    zs = np.repeat(np.asarray(zo, dtype=complex), t.stage_counts)[O]
    BOS, BSO, BOO = B[np.ix_(O, S)], B[np.ix_(S, O)], B[np.ix_(O, O)]
    K = BOO - BOS @ lu_solve(fss, BSO)
    rhs = zs * (np.ones(len(O)) - BOS @ lu_solve(fss, oneS))
    u = lu_solve(lu_factor(np.eye(len(O)) - zs[:, None] * K), rhs)
    return complex(r + (b[O] - w @ BSO) @ u)


def stability_at_infinity(t: PartitionedTableau) -> complex:
    """``R`` as the last partition becomes infinitely stiff, all others at zero."""
    return stability_at_stiff_limit(t, t.n_partitions - 1)


def taylor_coefficients(
    t: PartitionedTableau, order: int, radius: float = 1e-2, samples: int = 64
) -> np.ndarray:
    """Taylor coefficients ``a_0..a_order`` of ``z -> R(z/N, ..., z/N)``.

    The total ``z`` is shared equally by the ``N`` partitions, so a method of
    order ``p`` has ``a_k = 1/k!`` for ``k <= p``. The coefficients come from
    a discrete Cauchy integral over a circle of the given radius.
    """
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    share = radius / t.n_partitions
    vals = np.array([stability_value(t, [share * x] * t.n_partitions) for x in w])
    coef = np.fft.fft(vals) / samples
    return np.array([coef[k] / radius**k for k in range(order + 1)])


def exponential_coefficients(order: int) -> np.ndarray:
    return np.array([1.0 / math.factorial(k) for k in range(order + 1)])


@dataclass(frozen=True)
class RegionGrid:
    re: np.ndarray
    im: np.ndarray
    abs_r: np.ndarray  # shape (len(im), len(re)); NaN where R has a pole

    def rows(self):
        for i, y in enumerate(self.im):
            for j, x in enumerate(self.re):
                yield float(x), float(y), float(self.abs_r[i, j])

    def to_csv(self) -> str:
        lines = ["re,im,absR"]
        lines += [f"{x:.17g},{y:.17g},{a:.17g}" for x, y, a in self.rows()]
        return "\n".join(lines) + "\n"


def _axis(bounds) -> np.ndarray:
    lo, hi, n = bounds
    n = int(n)
    if n < 1:
        raise ValueError("a grid axis needs at least one point")
    if n == 1:
        return np.array([float(lo)])
    return np.linspace(float(lo), float(hi), n)


def scan_region(
    t: PartitionedTableau,
    partition: int,
    re_range: tuple[float, float, int],
    im_range: tuple[float, float, int],
    pins: Sequence[complex] | None = None,
) -> RegionGrid:
    """Sample ``|R|`` while ``z`` of ``partition`` sweeps a rectangle.

    The other partitions stay at ``pins`` (default 0; one value per partition,
    the swept entry is ignored). Ranges are ``(lo, hi, count)``; a count of 1
    uses ``lo``.
    """
    re, im = _axis(re_range), _axis(im_range)
    z = [0j] * t.n_partitions if pins is None else [complex(v) for v in pins]
    if len(z) != t.n_partitions:
        raise ValueError(f"need {t.n_partitions} pinned values")
    out = np.empty((len(im), len(re)))
    for i, y in enumerate(im):
        for j, x in enumerate(re):
            z[partition] = complex(x, y)
            try:
                out[i, j] = abs(stability_value(t, z))
            except Singular:
                out[i, j] = np.nan
    return RegionGrid(re, im, out)
