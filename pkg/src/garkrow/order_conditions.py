"""Order conditions of partitioned Rosenbrock(-W) methods, up to order four.

Every check returns a :class:`ConditionReport`: one entry per condition and
index tuple, each holding the left-hand side, the target and the residual
``|lhs - target|``. Partition indices in entries are zero-based.

Notation follows the usual tree labelling. ``c[m, n]``, ``g[m, n]`` and
``e[m, n]`` are the row sums of ``alpha``, ``gamma`` and ``beta``; ``*`` is
the elementwise product (see :func:`times`).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch, StructureMismatch
from .linalg import invert_small
from .tableau import DerivedVectors, PartitionedTableau, derive_vectors

DEFAULT_TOL = 1e-10
#: Looser tolerance for methods whose coefficients depend on a computed root.
ROOT_DEPENDENT_TOL = 1e-8


def times(*vectors: np.ndarray) -> np.ndarray:
    """Elementwise product of vectors (the tree-notation ``x`` operator)."""
    out = np.ones_like(vectors[0])
    for v in vectors:
        out = out * v
    return out


@dataclass(frozen=True)
class ConditionEntry:
    id: str
    indices: tuple[int, ...]
    lhs: float
    target: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.target)


@dataclass
class ConditionReport:
    entries: list[ConditionEntry] = field(default_factory=list)
    tolerance: float = DEFAULT_TOL

    def add(self, cid: str, indices: Sequence[int], lhs: float, target: float) -> None:
        self.entries.append(ConditionEntry(cid, tuple(int(i) for i in indices), float(lhs), float(target)))

    def extend(self, other: "ConditionReport") -> "ConditionReport":
        self.entries.extend(other.entries)
        return self

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def __bool__(self) -> bool:
        return self.passed

    def failing(self) -> list[ConditionEntry]:
        return [e for e in self.entries if e.residual > self.tolerance]

    def select(self, prefix: str | Iterable[str]) -> "ConditionReport":
        prefixes = (prefix,) if isinstance(prefix, str) else tuple(prefix)
        return ConditionReport([e for e in self.entries if e.id.startswith(prefixes)], self.tolerance)

    def ids(self) -> list[str]:
        return sorted({e.id for e in self.entries})

    def with_tolerance(self, tol: float) -> "ConditionReport":
        return ConditionReport(list(self.entries), tol)

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "pass": self.passed,
            "entries": [
                {"id": e.id, "indices": list(e.indices), "lhs": e.lhs, "target": e.target, "residual": e.residual}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _loop(n: int, arity: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(n), repeat=arity)


# --------------------------------------------------------------------------- #
# GARK-ROS: exact Jacobians
# --------------------------------------------------------------------------- #


def check_gark_ros(t: PartitionedTableau, order: int, tol: float = DEFAULT_TOL) -> ConditionReport:
    """All exact-Jacobian conditions of orders ``1..order`` over every index tuple."""
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    d = derive_vectors(t)
    b, A, B, c, e = t.weights, t.alpha, d.beta, d.c, d.e
    n = t.n_partitions
    rep = ConditionReport(tolerance=tol)
    for (m,) in _loop(n, 1):
        rep.add("ros.o1", (m,), b[m].sum(), 1.0)
    if order >= 2:
        for m, k in _loop(n, 2):
            rep.add("ros.o2", (m, k), b[m] @ e[(m, k)], 0.5)
    if order >= 3:
        for m, k, p in _loop(n, 3):
            rep.add("ros.o3.bushy", (m, k, p), b[m] @ times(c[(m, k)], c[(m, p)]), 1 / 3)
            rep.add("ros.o3.bump", (m, k, p), b[m] @ B[(m, k)] @ e[(k, p)], 1 / 6)
    if order >= 4:
        for m, k, p, q in _loop(n, 4):
            rep.add("ros.o4.bushy", (m, k, p, q), b[m] @ times(c[(m, k)], c[(m, p)], c[(m, q)]), 1 / 4)
            rep.add("ros.o4.branch", (m, k, p, q), b[m] @ times(A[(m, k)] @ e[(k, p)], c[(m, q)]), 1 / 8)
            rep.add("ros.o4.bump-bushy", (m, k, p, q), b[m] @ B[(m, k)] @ times(c[(k, p)], c[(k, q)]), 1 / 12)
            rep.add("ros.o4.tall", (m, k, p, q), b[m] @ B[(m, k)] @ B[(k, p)] @ e[(p, q)], 1 / 24)
    return rep


# --------------------------------------------------------------------------- #
# GARK-ROW: arbitrary Jacobian approximations
# --------------------------------------------------------------------------- #


def check_gark_row(t: PartitionedTableau, order: int, tol: float = DEFAULT_TOL) -> ConditionReport:
    """All W-method conditions (1, 2, 5 and 13 families) over every index tuple."""
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    d = derive_vectors(t)
    b, A, G, c, g = t.weights, t.alpha, t.gamma, d.c, d.g
    n = t.n_partitions
    rep = ConditionReport(tolerance=tol)
    mats = {"a": A, "g": G}
    vecs = {"c": c, "g": g}
    for (m,) in _loop(n, 1):
        rep.add("row.o1", (m,), b[m].sum(), 1.0)
    if order >= 2:
        for m, k in _loop(n, 2):
            rep.add("row.o2.c", (m, k), b[m] @ c[(m, k)], 0.5)
            rep.add("row.o2.g", (m, k), b[m] @ g[(m, k)], 0.0)
    if order >= 3:
        for m, k, p in _loop(n, 3):
            rep.add("row.o3.bushy", (m, k, p), b[m] @ times(c[(m, k)], c[(m, p)]), 1 / 3)
            for x, y in itertools.product("ag", "cg"):
                target = 1 / 6 if (x, y) == ("a", "c") else 0.0
                rep.add(f"row.o3.{x}{y}", (m, k, p), b[m] @ mats[x][(m, k)] @ vecs[y][(k, p)], target)
    if order >= 4:
        for m, k, p, q in _loop(n, 4):
            idx = (m, k, p, q)
            rep.add("row.o4.bushy", idx, b[m] @ times(c[(m, k)], c[(m, p)], c[(m, q)]), 1 / 4)
            rep.add("row.o4.branch-c", idx, b[m] @ times(A[(m, k)] @ c[(k, p)], c[(m, q)]), 1 / 8)
            rep.add("row.o4.branch-g", idx, b[m] @ times(A[(m, k)] @ g[(k, p)], c[(m, q)]), 0.0)
            rep.add("row.o4.a-bushy", idx, b[m] @ A[(m, k)] @ times(c[(k, p)], c[(k, q)]), 1 / 12)
            rep.add("row.o4.g-bushy", idx, b[m] @ G[(m, k)] @ times(c[(k, p)], c[(k, q)]), 0.0)
            for x, y, z in itertools.product("ag", "ag", "cg"):
                target = 1 / 24 if (x, y, z) == ("a", "a", "c") else 0.0
                lhs = b[m] @ mats[x][(m, k)] @ mats[y][(k, p)] @ vecs[z][(p, q)]
                rep.add(f"row.o4.{x}{y}{z}", idx, lhs, target)
    return rep


# --------------------------------------------------------------------------- #
# decoupled special case: base scheme plus a coupling scheme with equal c
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SingleScheme:
    """Weights and blocks ``(b, alpha, gamma)`` of one unpartitioned scheme."""

    b: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray

    @classmethod
    def of(cls, obj) -> "SingleScheme":
        if isinstance(obj, SingleScheme):
            return obj
        if isinstance(obj, PartitionedTableau):
            if obj.n_partitions != 1:
                raise ShapeMismatch("expected a single-partition tableau")
            return cls(obj.weights[0], obj.alpha[(0, 0)], obj.gamma[(0, 0)])
        b, a, g = obj
        return cls(np.asarray(b, float), np.asarray(a, float), np.asarray(g, float))

    def as_tableau(self) -> PartitionedTableau:
        return PartitionedTableau((len(self.b),), {(0, 0): self.alpha}, {(0, 0): self.gamma}, (self.b,))


def check_internal_then_coupling_specialcase2(
    base, coupling, order: int, exact_jacobian: bool = True, tol: float = DEFAULT_TOL
) -> ConditionReport:
    """Base-method conditions followed by the coupling conditions.

    ``base`` is ``(b, alpha, gamma)`` and ``coupling`` is ``(b, alpha_bar,
    gamma_bar)`` with the same ``b``; the coupling scheme must reproduce the
    abscissae, ``alpha_bar @ 1 == alpha @ 1``. The base entries come from
    :func:`check_gark_ros` (or :func:`check_gark_row` when
    ``exact_jacobian`` is false). The coupling entries are the four W-type
    third-order conditions, the two exact-Jacobian third-order conditions and
    the eight exact-Jacobian fourth-order conditions, each up to ``order``.
    """
    bs, cs = SingleScheme.of(base), SingleScheme.of(coupling)
    s = len(bs.b)
    for arr in (bs.alpha, bs.gamma, cs.alpha, cs.gamma):
        if arr.shape != (s, s):
            raise ShapeMismatch(f"expected {s}x{s} blocks, got {arr.shape}")
    if len(cs.b) != s:
        raise ShapeMismatch("coupling weights have the wrong length")
    check = check_gark_ros if exact_jacobian else check_gark_row
    rep = check(bs.as_tableau(), order, tol)
    b = bs.b
    a, gm, ab, gb = bs.alpha, bs.gamma, cs.alpha, cs.gamma
    be, bb = a + gm, ab + gb
    c, g, gbar = a.sum(1), gm.sum(1), gb.sum(1)
    cbar = ab.sum(1)
    e, ebar = c + g, cbar + gbar
    rep.add("sc2.c-match", (), float(np.max(np.abs(cbar - c))), 0.0)
    if order >= 3:
        rep.add("sc2.row.o3.a-gbar", (), b @ a @ gbar, 0.0)
        rep.add("sc2.row.o3.abar-g", (), b @ ab @ g, 0.0)
        rep.add("sc2.row.o3.g-gbar", (), b @ gm @ gbar, 0.0)
        rep.add("sc2.row.o3.gbar-g", (), b @ gb @ g, 0.0)
        rep.add("sc2.ros.o3.beta-ebar", (), b @ be @ ebar, 1 / 6)
        rep.add("sc2.ros.o3.betabar-e", (), b @ bb @ e, 1 / 6)
    if order >= 4:
        rep.add("sc2.ros.o4.branch-ebar", (), b @ times(a @ ebar, c), 1 / 8)
        rep.add("sc2.ros.o4.branch-abar", (), b @ times(ab @ e, c), 1 / 8)
        rep.add("sc2.ros.o4.tall-bar-e", (), b @ bb @ be @ e, 1 / 24)
        rep.add("sc2.ros.o4.tall-barbar-e", (), b @ bb @ bb @ e, 1 / 24)
        rep.add("sc2.ros.o4.tall-bar-ebar", (), b @ bb @ be @ ebar, 1 / 24)
        rep.add("sc2.ros.o4.tall-ebar-bar", (), b @ be @ bb @ ebar, 1 / 24)
        rep.add("sc2.ros.o4.tall-e-bar", (), b @ be @ bb @ e, 1 / 24)
        rep.add("sc2.ros.o4.tall-ebar", (), b @ be @ be @ ebar, 1 / 24)
    return rep


# --------------------------------------------------------------------------- #
# IMEX coupling (partition 0 explicit, partition 1 linearly implicit)
# --------------------------------------------------------------------------- #


def _require_imex(t: PartitionedTableau) -> None:
    if t.n_partitions != 2:
        raise StructureMismatch("IMEX coupling needs exactly two partitions")
    if np.any(t.gamma[(0, 0)] != 0.0) or np.any(t.gamma[(0, 1)] != 0.0):
        raise StructureMismatch("partition 1 must be explicit (zero gamma blocks)")


def is_imex_special_case(t: PartitionedTableau, tol: float = 1e-12) -> bool:
    """Explicit and implicit partitions each reuse one ``alpha`` (and ``gamma``) for both columns."""
    if t.n_partitions != 2:
        return False
    A, G = t.alpha, t.gamma
    if not (np.array_equal(A[(0, 0)], A[(0, 1)]) and np.array_equal(A[(1, 0)], A[(1, 1)])):
        return False
    if not np.array_equal(G[(1, 0)], G[(1, 1)]) or np.any(G[(0, 0)] != 0.0) or np.any(G[(0, 1)] != 0.0):
        return False
    return bool(np.max(np.abs(A[(0, 0)].sum(1) - A[(1, 1)].sum(1))) <= tol)


def check_imex_coupling(
    t: PartitionedTableau,
    order: int,
    exact_jacobian: bool,
    special_case: bool,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """IMEX coupling conditions for orders 2 up to ``order``.

    The general families assume internal consistency, so ``c^E``, ``c^I`` and
    ``g^I`` stand for the diagonal-block row sums. With ``special_case`` the
    blocks must have the shared-``alpha`` structure and the reduced lists
    are used. The general W-type fourth-order coupling is taken from the full
    GARK-ROW list (entries whose indices mix the two partitions).
    """
    _require_imex(t)
    if special_case and not is_imex_special_case(t):
        raise StructureMismatch("blocks do not have the shared-alpha IMEX structure")
    d = derive_vectors(t)
    E, I = 0, 1
    A, G, B = t.alpha, t.gamma, d.beta
    bE, bI = t.weights
    cE, cI, gI = d.c[(E, E)], d.c[(I, I)], d.g[(I, I)]
    eI = cI + gI
    rep = ConditionReport(tolerance=tol)

    if order >= 2:
        if exact_jacobian:
            rep.add("imex.ros.o2.EI", (E, I), bE @ d.e[(E, I)], 0.5)
            rep.add("imex.ros.o2.IE", (I, E), bI @ d.e[(I, E)], 0.5)
        else:
            rep.add("imex.row.o2.EI-c", (E, I), bE @ d.c[(E, I)], 0.5)
            rep.add("imex.row.o2.IE-c", (I, E), bI @ d.c[(I, E)], 0.5)
            rep.add("imex.row.o2.IE-g", (I, E), bI @ d.g[(I, E)], 0.0)

    if special_case:
        aE, aI, gmI, bIm = A[(E, E)], A[(I, I)], G[(I, I)], B[(I, I)]
        c = cE
        if order >= 3:
            rep.add("imex.case1.o3.aE-gI", (), bE @ aE @ gI, 0.0)
            if exact_jacobian:
                rep.add("imex.case1.ros.o3.betaI-gI", (), bI @ bIm @ gI, 0.0)
        if order >= 4:
            rep.add("imex.case1.o4.branch-gI", (), bE @ times(aE @ gI, c), 0.0)
            rep.add("imex.case1.o4.aE-aE-gI", (), bE @ aE @ aE @ gI, 0.0)
            if exact_jacobian:
                rep.add("imex.case1.ros.o4.aE-betaI-c", (), bE @ aE @ bIm @ c, 1 / 24)
                rep.add("imex.case1.ros.o4.aE-betaI-gI", (), bE @ aE @ bIm @ gI, 0.0)
                rep.add("imex.case1.ros.o4.betaI-aE-c", (), bI @ bIm @ aE @ c, 1 / 24)
                rep.add("imex.case1.ros.o4.betaI-aE-gI", (), bI @ bIm @ aE @ gI, 0.0)
            else:
                rep.add("imex.case1.row.o4.aE-aI-c", (), bE @ aE @ aI @ c, 1 / 24)
                rep.add("imex.case1.row.o4.aE-gI-c", (), bE @ aE @ gmI @ c, 0.0)
                rep.add("imex.case1.row.o4.aE-aI-gI", (), bE @ aE @ aI @ gI, 0.0)
                rep.add("imex.case1.row.o4.aE-gI-gI", (), bE @ aE @ gmI @ gI, 0.0)
                rep.add("imex.case1.row.o4.aI-aE-c", (), bI @ aI @ aE @ c, 1 / 24)
                rep.add("imex.case1.row.o4.gI-aE-c", (), bI @ gmI @ aE @ c, 0.0)
                rep.add("imex.case1.row.o4.aI-aE-gI", (), bI @ aI @ aE @ gI, 0.0)
                rep.add("imex.case1.row.o4.gI-aE-gI", (), bI @ gmI @ aE @ gI, 0.0)
        return rep

    aEI, aIE, aEE = A[(E, I)], A[(I, E)], A[(E, E)]
    gIE = G[(I, E)]
    bIE, bII = B[(I, E)], B[(I, I)]
    if order >= 3:
        if exact_jacobian:
            rep.add("imex.ros.o3.aEI-eI", (), bE @ aEI @ eI, 1 / 6)
            rep.add("imex.ros.o3.betaIE-cE", (), bI @ bIE @ cE, 1 / 6)
        else:
            rep.add("imex.row.o3.aEI-cI", (), bE @ aEI @ cI, 1 / 6)
            rep.add("imex.row.o3.aEI-gI", (), bE @ aEI @ gI, 0.0)
            rep.add("imex.row.o3.aIE-cE", (), bI @ aIE @ cE, 1 / 6)
            rep.add("imex.row.o3.gIE-cE", (), bI @ gIE @ cE, 0.0)
    if order >= 4:
        if exact_jacobian:
            rep.add("imex.ros.o4.branch-EI", (), bE @ times(aEI @ eI, cE), 1 / 8)
            rep.add("imex.ros.o4.branch-IE", (), bI @ times(aIE @ cE, cI), 1 / 8)
            rep.add("imex.ros.o4.aEI-cI2", (), bE @ aEI @ (cI * cI), 1 / 12)
            rep.add("imex.ros.o4.betaIE-cE2", (), bI @ bIE @ (cE * cE), 1 / 12)
            rep.add("imex.ros.o4.aEE-aEI-eI", (), bE @ aEE @ aEI @ eI, 1 / 24)
            rep.add("imex.ros.o4.aEI-betaIE-cE", (), bE @ aEI @ bIE @ cE, 1 / 24)
            rep.add("imex.ros.o4.aEI-betaII-eI", (), bE @ aEI @ bII @ eI, 1 / 24)
            rep.add("imex.ros.o4.betaIE-aEE-cE", (), bI @ bIE @ aEE @ cE, 1 / 24)
            rep.add("imex.ros.o4.betaIE-aEI-eI", (), bI @ bIE @ aEI @ eI, 1 / 24)
            rep.add("imex.ros.o4.betaII-betaIE-cE", (), bI @ bII @ bIE @ cE, 1 / 24)
        else:
            full = check_gark_row(t, 4, tol)
            for entry in full.entries:
                if entry.id.startswith("row.o4") and len(set(entry.indices)) > 1:
                    rep.entries.append(ConditionEntry("imex." + entry.id, entry.indices, entry.lhs, entry.target))
    return rep


# --------------------------------------------------------------------------- #
# index-1 DAE conditions
# --------------------------------------------------------------------------- #


def _dae_parts(t: PartitionedTableau, diff: int, alg: int) -> tuple[DerivedVectors, np.ndarray]:
    if diff == alg or not (0 <= diff < t.n_partitions and 0 <= alg < t.n_partitions):
        raise ShapeMismatch("differential and algebraic partitions must be two distinct valid indices")
    d = derive_vectors(t)
    return d, invert_small(d.beta[(alg, alg)])


def check_dae_algebraic(
    t: PartitionedTableau,
    diff_partition: int,
    alg_partition: int,
    order_x: int,
    order_z: int,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """Stiff (index-1) conditions for the algebraic (z) and differential (x) parts.

    Raises :class:`~garkrow.errors.Singular` when ``beta[a, a]`` is singular.
    The simplifying assumption ``beta[a, d] == beta[a, a]`` that these lists
    rely on is reported as entry ``dae.assumption-a`` (target 0).
    """
    dd, aa = diff_partition, alg_partition
    d, w = _dae_parts(t, dd, aa)
    A, B = t.alpha, d.beta
    bd, ba = t.weights[dd], t.weights[aa]
    cad, cdd, edd = d.c[(aa, dd)], d.c[(dd, dd)], d.e[(dd, dd)]
    rep = ConditionReport(tolerance=tol)
    rep.add("dae.assumption-a", (aa, dd), float(np.max(np.abs(B[(aa, dd)] - B[(aa, aa)]))), 0.0)
    if order_z >= 2:
        rep.add("dae.z2", (), ba @ w @ cad**2, 1.0)
    if order_z >= 3:
        rep.add("dae.z3.bushy", (), ba @ w @ cad**3, 1.0)
        rep.add("dae.z3.x-chain", (), ba @ w @ times(A[(aa, dd)] @ edd, cad), 0.5)
        rep.add("dae.z3.z-chain", (), ba @ w @ times(A[(aa, aa)] @ w @ cad**2, cad), 1.0)
    if order_x >= 3:
        rep.add("dae.x3", (), bd @ B[(dd, aa)] @ w @ cad**2, 1 / 3)
    if order_x >= 4:
        rep.add("dae.x4.branch", (), bd @ times(A[(dd, aa)] @ w @ cad**2, cdd), 1 / 4)
        rep.add("dae.x4.bushy", (), bd @ B[(dd, aa)] @ w @ cad**3, 1 / 4)
        rep.add("dae.x4.x-chain", (), bd @ B[(dd, aa)] @ w @ times(cad, A[(aa, dd)] @ edd), 1 / 8)
        rep.add("dae.x4.tall", (), bd @ B[(dd, dd)] @ B[(dd, aa)] @ w @ cad**2, 1 / 12)
    return rep


def check_inconsistent_ic(
    t: PartitionedTableau, diff_partition: int, alg_partition: int, tol: float = DEFAULT_TOL
) -> ConditionReport:
    """Extra conditions that damp an inconsistent algebraic start value.

    Entries ``ic.z1`` (order delta), ``ic.z2`` (h*delta) for z and ``ic.x1``
    (h*delta), ``ic.x2.*`` (h^2*delta) for x, with ``o = omega @ 1``.
    """
    dd, aa = diff_partition, alg_partition
    d, w = _dae_parts(t, dd, aa)
    A, B = t.alpha, d.beta
    bd, ba = t.weights[dd], t.weights[aa]
    cad, cdd = d.c[(aa, dd)], d.c[(dd, dd)]
    o = w @ np.ones(t.stage_counts[aa])
    rep = ConditionReport(tolerance=tol)
    rep.add("ic.z1", (), ba @ o, 1.0)
    rep.add("ic.z2", (), ba @ w @ times(cad, A[(aa, aa)] @ o), 1.0)
    rep.add("ic.x1", (), bd @ B[(dd, aa)] @ o, 1.0)
    rep.add("ic.x2.branch", (), bd @ times(cdd, A[(dd, aa)] @ o), 0.5)
    rep.add("ic.x2.tall", (), bd @ B[(dd, dd)] @ B[(dd, aa)] @ o, 0.5)
    rep.add("ic.x2.z-chain", (), bd @ B[(dd, aa)] @ w @ times(cad, A[(aa, aa)] @ o), 0.5)
    return rep


# --------------------------------------------------------------------------- #
# convenience
# --------------------------------------------------------------------------- #

Check = Callable[..., ConditionReport]


def claimed_conditions(name: str, t: PartitionedTableau | None = None) -> ConditionReport:
    """Every condition family a built-in method claims, at its own tolerance.

    IMEX-ROS22 is checked in its three-way form for the Rosenbrock conditions
    and in its two-way form (zero middle partition) for IMEX coupling and the
    index-1 conditions.
    """
    from .methods import builtin, imex_ros22_two_way

    card = builtin(name)
    t = card.tableau if t is None else t
    tol = ROOT_DEPENDENT_TOL if name == "imex-row3-2-4" else DEFAULT_TOL
    cls = check_gark_row if t.method_class.value == "row" else check_gark_ros
    rep = cls(t, t.claimed_order or 1, tol)
    if t.has_embedded and t.claimed_embedded_order:
        emb = cls(t.embedded_tableau(), t.claimed_embedded_order, tol)
        rep.entries.extend(ConditionEntry("embedded." + e.id, e.indices, e.lhs, e.target) for e in emb.entries)
    if name == "imex-ros22":
        two = imex_ros22_two_way().tableau
        rep.extend(check_imex_coupling(two, 2, exact_jacobian=True, special_case=True, tol=tol))
        rep.extend(check_dae_algebraic(two, 0, 1, order_x=2, order_z=2, tol=tol))
    elif name == "imex-row3-2-4":
        rep.extend(check_imex_coupling(t, 3, exact_jacobian=False, special_case=True, tol=tol))
        rep.extend(check_dae_algebraic(t, 0, 1, order_x=3, order_z=2, tol=tol))
    elif name == "imex-row3-2-5":
        rep.extend(check_imex_coupling(t, 3, exact_jacobian=False, special_case=True, tol=tol))
        rep.extend(check_dae_algebraic(t, 0, 1, order_x=3, order_z=2, tol=tol))
        rep.extend(check_inconsistent_ic(t, 0, 1, tol).select(("ic.z1", "ic.z2", "ic.x1")))
    elif name == "imex-ros4-3-6":
        rep.extend(check_gark_row(t, 3, tol))
        rep.extend(check_imex_coupling(t, 4, exact_jacobian=True, special_case=True, tol=tol))
        rep.extend(check_dae_algebraic(t, 0, 1, order_x=4, order_z=2, tol=tol))
    return rep
