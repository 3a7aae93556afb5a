"""Partitioned Rosenbrock(-W) tableaus: data model, validation, derived data.

A method with ``N`` partitions carries, for every ordered pair ``(q, m)``, a
coupling block ``alpha[q, m]`` and a Jacobian block ``gamma[q, m]`` of shape
``s_q x s_m``, plus one weight vector per partition. Partition indices are
zero-based throughout the Python API. The JSON format uses one-based
``"q,m"`` keys so that files read naturally next to printed tableaus.
"""

from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NotDecoupled, ShapeMismatch
from .linalg import invert_small

Block = tuple[int, int]
Stage = tuple[int, int]


class MethodClass(str, enum.Enum):
    """Whether order claims assume exact Jacobians (ROS) or any matrix (ROW)."""

    ROS = "ros"
    ROW = "row"


class CouplingMode(str, enum.Enum):
    STRICT = "strict"
    DECOUPLED = "decoupled"


def frac(value: str | float | int) -> float:
    """Convert an exact rational string such as ``"-407/2190"`` to the nearest double."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def _frozen(a, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ShapeMismatch(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PartitionedTableau:
    """Coefficient blocks and weights of a GARK-ROS or GARK-ROW method.

    Missing blocks in ``alpha`` or ``gamma`` are filled with zeros. Arrays are
    stored read-only so a tableau can be shared freely.
    """

    stage_counts: tuple[int, ...]
    alpha: Mapping[Block, np.ndarray]
    gamma: Mapping[Block, np.ndarray]
    weights: tuple[np.ndarray, ...]
    embedded_weights: tuple[np.ndarray, ...] | None = None
    method_class: MethodClass = MethodClass.ROS
    coupling_mode: CouplingMode = CouplingMode.STRICT
    name: str = ""
    claimed_order: int | None = None
    claimed_embedded_order: int | None = None
    combined_stages: bool = False

    def __post_init__(self) -> None:
        counts = tuple(int(s) for s in self.stage_counts)
        if not counts or any(s <= 0 for s in counts):
            raise ShapeMismatch(f"stage counts must be positive, got {counts}")
        n = len(counts)
        blocks = {}
        for label, source in (("alpha", self.alpha), ("gamma", self.gamma)):
            full = {}
            for key in source:
                q, m = key
                if not (0 <= q < n and 0 <= m < n):
                    raise ShapeMismatch(f"{label} block {key} outside {n} partitions")
            for q in range(n):
                for m in range(n):
                    shape = (counts[q], counts[m])
                    raw = source.get((q, m))
                    full[(q, m)] = _frozen(np.zeros(shape) if raw is None else raw, shape)
            blocks[label] = full
        if len(self.weights) != n:
            raise ShapeMismatch(f"{len(self.weights)} weight vectors for {n} partitions")
        weights = tuple(_frozen(b, (counts[q],)) for q, b in enumerate(self.weights))
        embedded = None
        if self.embedded_weights is not None:
            if len(self.embedded_weights) != n:
                raise ShapeMismatch("embedded weights do not match the partition count")
            embedded = tuple(_frozen(b, (counts[q],)) for q, b in enumerate(self.embedded_weights))
        object.__setattr__(self, "stage_counts", counts)
        object.__setattr__(self, "alpha", blocks["alpha"])
        object.__setattr__(self, "gamma", blocks["gamma"])
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "embedded_weights", embedded)
        object.__setattr__(self, "method_class", MethodClass(self.method_class))
        object.__setattr__(self, "coupling_mode", CouplingMode(self.coupling_mode))

    @property
    def n_partitions(self) -> int:
        return len(self.stage_counts)

    @property
    def total_stages(self) -> int:
        return sum(self.stage_counts)

    @property
    def has_embedded(self) -> bool:
        return self.embedded_weights is not None

    def with_weights(self, weights: Sequence[np.ndarray], **changes) -> "PartitionedTableau":
        """Copy with replaced weights (used to check embedded formulas)."""
        return self.replace(weights=tuple(weights), embedded_weights=None, **changes)

    def replace(self, **changes) -> "PartitionedTableau":
        fields = dict(
            stage_counts=self.stage_counts,
            alpha=dict(self.alpha),
            gamma=dict(self.gamma),
            weights=self.weights,
            embedded_weights=self.embedded_weights,
            method_class=self.method_class,
            coupling_mode=self.coupling_mode,
            name=self.name,
            claimed_order=self.claimed_order,
            claimed_embedded_order=self.claimed_embedded_order,
            combined_stages=self.combined_stages,
        )
        fields.update(changes)
        return PartitionedTableau(**fields)

    def embedded_tableau(self) -> "PartitionedTableau":
        """The tableau with ``b`` replaced by ``b_hat``."""
        if self.embedded_weights is None:
            raise ValueError(f"tableau {self.name!r} has no embedded weights")
        return self.with_weights(self.embedded_weights, claimed_order=self.claimed_embedded_order)


# --------------------------------------------------------------------------- #
# validation
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    block: Block | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def _upper_nonzero(a: np.ndarray, strict_lower: bool) -> bool:
    k = 0 if strict_lower else 1
    return bool(np.any(np.triu(a, k) != 0.0))


def validate(t: PartitionedTableau) -> ValidationReport:
    """List every structural problem of ``t``; an empty report means valid.

    Strict mode requires all ``alpha`` blocks strictly lower triangular and all
    ``gamma`` blocks lower triangular. Decoupled mode lets off-diagonal blocks
    be arbitrary and diagonal blocks lower triangular, provided the stages
    can still be evaluated one at a time (see :func:`decoupled_ordering`).
    Triangularity is checked against exact zero.
    """
    out: list[Violation] = []
    n = t.n_partitions
    for label, blocks in (("alpha", t.alpha), ("gamma", t.gamma)):
        for (q, m), a in blocks.items():
            if not np.all(np.isfinite(a)):
                out.append(Violation("nonfinite", f"non-finite entry in {label} block ({q + 1},{m + 1})", (q, m)))
    for q, b in enumerate(t.weights):
        if not np.all(np.isfinite(b)):
            out.append(Violation("nonfinite", f"non-finite entry in weights of partition {q + 1}", (q, q)))
    if t.embedded_weights is not None:
        for q, b in enumerate(t.embedded_weights):
            if not np.all(np.isfinite(b)):
                out.append(Violation("nonfinite", f"non-finite entry in embedded weights of partition {q + 1}", (q, q)))

    for q in range(n):
        for m in range(n):
            a, g = t.alpha[(q, m)], t.gamma[(q, m)]
            tag = f"({q + 1},{m + 1})"
            if t.coupling_mode is CouplingMode.STRICT:
                if _upper_nonzero(a, strict_lower=True):
                    where = "diagonal" if np.all(np.triu(a, 1) == 0.0) else "upper triangle"
                    out.append(Violation("triangularity", f"{where} of alpha block {tag} nonzero", (q, m)))
                if _upper_nonzero(g, strict_lower=False):
                    out.append(Violation("triangularity", f"upper triangle of gamma block {tag} nonzero", (q, m)))
            elif q == m:
                if _upper_nonzero(a, strict_lower=False):
                    out.append(Violation("triangularity", f"upper triangle of alpha block {tag} nonzero", (q, m)))
                if _upper_nonzero(g, strict_lower=False):
                    out.append(Violation("triangularity", f"upper triangle of gamma block {tag} nonzero", (q, m)))
    if not out:
        try:
            decoupled_ordering(t)
        except NotDecoupled as exc:
            out.append(Violation("coupling", str(exc)))
    return ValidationReport(tuple(out))


# --------------------------------------------------------------------------- #
# derived vectors and global assembly
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DerivedVectors:
    """Row sums and combined blocks used by the order conditions.

    ``c[m, n] = alpha[m, n] @ 1``, ``g[m, n] = gamma[m, n] @ 1``,
    ``e = c + g`` and ``beta = alpha + gamma``.
    """

    beta: Mapping[Block, np.ndarray]
    c: Mapping[Block, np.ndarray]
    g: Mapping[Block, np.ndarray]
    e: Mapping[Block, np.ndarray]
    _omega_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def omega(self, a: int) -> np.ndarray:
        """``beta[a, a]`` inverse for the algebraic partition ``a``."""
        if a not in self._omega_cache:
            w = invert_small(self.beta[(a, a)])
            w.setflags(write=False)
            self._omega_cache[a] = w
        return self._omega_cache[a]


def derive_vectors(t: PartitionedTableau) -> DerivedVectors:
    beta, c, g, e = {}, {}, {}, {}
    for key in t.alpha:
        a, gm = t.alpha[key], t.gamma[key]
        beta[key] = _frozen(a + gm)
        c[key] = _frozen(a.sum(axis=1))
        g[key] = _frozen(gm.sum(axis=1))
        e[key] = _frozen(c[key] + g[key])
    return DerivedVectors(beta, c, g, e)


def is_internally_consistent(t: PartitionedTableau, tol: float = 1e-12) -> bool:
    """True when ``c[m, n]`` and ``g[m, n]`` do not depend on ``n``."""
    d = derive_vectors(t)
    n = t.n_partitions
    for m in range(n):
        for k in range(n):
            if np.max(np.abs(d.c[(m, k)] - d.c[(m, 0)])) > tol:
                return False
            if np.max(np.abs(d.g[(m, k)] - d.g[(m, 0)])) > tol:
                return False
    return True


def is_stiffly_accurate(t: PartitionedTableau, tol: float = 1e-12) -> bool:
    """True when every ``b[q]`` equals the last row of ``beta[N, q]``."""
    last = t.n_partitions - 1
    for q, b in enumerate(t.weights):
        row = t.alpha[(last, q)][-1] + t.gamma[(last, q)][-1]
        if np.max(np.abs(row - b)) > tol:
            return False
    return True


@dataclass(frozen=True)
class GlobalMatrices:
    A: np.ndarray
    G: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __iter__(self):
        return iter((self.A, self.G, self.B, self.b))


def stage_offsets(t: PartitionedTableau) -> list[int]:
    return [0, *np.cumsum(t.stage_counts).tolist()]


def assemble_global(t: PartitionedTableau, embedded: bool = False) -> GlobalMatrices:
    """Stack the blocks into ``s x s`` matrices in partition order; ``B = A + G``."""
    off = stage_offsets(t)
    s = off[-1]
    A = np.zeros((s, s))
    G = np.zeros((s, s))
    for (q, m), a in t.alpha.items():
        A[off[q] : off[q + 1], off[m] : off[m + 1]] = a
        G[off[q] : off[q + 1], off[m] : off[m + 1]] = t.gamma[(q, m)]
    weights = t.embedded_weights if embedded else t.weights
    if weights is None:
        raise ValueError(f"tableau {t.name!r} has no embedded weights")
    b = np.concatenate(weights)
    return GlobalMatrices(A, G, A + G, b)


def split_global(t: PartitionedTableau, M: np.ndarray) -> dict[Block, np.ndarray]:
    """Slice a global ``s x s`` matrix back into blocks."""
    off = stage_offsets(t)
    n = t.n_partitions
    return {(q, m): M[off[q] : off[q + 1], off[m] : off[m + 1]] for q in range(n) for m in range(n)}


# --------------------------------------------------------------------------- #
# evaluation order
# --------------------------------------------------------------------------- #


def stage_dependencies(t: PartitionedTableau, groups: Sequence[Sequence[int]] | None = None) -> dict[Stage, set[Stage]]:
    """Map each stage to the other stages its equation reads.

    With ``groups`` the stages of partitions in one group are merged and
    keyed by group index; the method must then have identical blocks within
    each group, which the caller is responsible for.
    """
    if groups is None:
        groups = [[q] for q in range(t.n_partitions)]
    deps: dict[Stage, set[Stage]] = {}
    for gi, members in enumerate(groups):
        for i in range(t.stage_counts[members[0]]):
            need: set[Stage] = set()
            for q in members:
                for hj, others in enumerate(groups):
                    m = others[0]
                    row = (t.alpha[(q, m)][i] != 0.0) | (t.gamma[(q, m)][i] != 0.0)
                    need.update((hj, j) for j in np.flatnonzero(row).tolist())
            need.discard((gi, i))
            deps[(gi, i)] = need
    return deps


def round_robin(counts: Sequence[int]) -> list[Stage]:
    return [(q, i) for i in range(max(counts)) for q in range(len(counts)) if i < counts[q]]


def _ordering_from(deps: dict[Stage, set[Stage]], counts: Sequence[int]) -> list[Stage]:
    preferred = round_robin(counts)
    rank = {st: r for r, st in enumerate(preferred)}
    done: set[Stage] = set()
    ok = True
    for st in preferred:
        if not deps[st] <= done:
            ok = False
            break
        done.add(st)
    if ok:
        return preferred
    # Kahn's algorithm, always releasing the earliest round-robin stage.
    indeg = {st: len(d) for st, d in deps.items()}
    users: dict[Stage, list[Stage]] = {st: [] for st in deps}
    for st, d in deps.items():
        for x in d:
            users[x].append(st)
    heap = [rank[st] for st, k in indeg.items() if k == 0]
    heapq.heapify(heap)
    order: list[Stage] = []
    while heap:
        st = preferred[heapq.heappop(heap)]
        order.append(st)
        for u in users[st]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, rank[u])
    if len(order) != len(preferred):
        stuck = sorted((st for st in preferred if st not in set(order)), key=rank.get)
        pretty = ", ".join(f"({q + 1},{i + 1})" for q, i in stuck[:6])
        raise NotDecoupled(f"stages are mutually implicit: {pretty}")
    return order


def decoupled_ordering(t: PartitionedTableau, groups: Sequence[Sequence[int]] | None = None) -> list[Stage]:
    """An evaluation order of ``(partition, stage)`` pairs, zero-based.

    Each stage may depend on itself only through its diagonal coefficients
    and otherwise only on stages that come earlier. The round-robin sweep
    ``(0,0), (1,0), ..., (0,1), (1,1), ...`` is returned whenever it works,
    otherwise a topological order that stays as close to it as possible.
    Raises :class:`NotDecoupled` if the dependency graph has a cycle.
    """
    if groups is None:
        counts = list(t.stage_counts)
    else:
        counts = [t.stage_counts[g[0]] for g in groups]
    return _ordering_from(stage_dependencies(t, groups), counts)


# --------------------------------------------------------------------------- #
# JSON
# --------------------------------------------------------------------------- #


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _matrix(rows: Iterable[Iterable]) -> list[list[float]]:
    return [[frac(v) for v in row] for row in rows]


def to_dict(t: PartitionedTableau) -> dict:
    n = t.n_partitions

    def blocks(source):
        return {
            f"{q + 1},{m + 1}": [[_num(v) for v in row] for row in source[(q, m)]]
            for q in range(n)
            for m in range(n)
            if np.any(source[(q, m)] != 0.0)
        }

    out = {
        "name": t.name,
        "class": t.method_class.value,
        "coupling": t.coupling_mode.value,
        "partitions": n,
        "stages": list(t.stage_counts),
        "alpha": blocks(t.alpha),
        "gamma": blocks(t.gamma),
        "b": [[_num(v) for v in b] for b in t.weights],
        "bhat": None if t.embedded_weights is None else [[_num(v) for v in b] for b in t.embedded_weights],
        "claimed_order": t.claimed_order,
        "claimed_embedded_order": t.claimed_embedded_order,
    }
    if t.combined_stages:
        out["combined_stages"] = True
    return out


def from_dict(data: Mapping) -> PartitionedTableau:
    """Build a tableau from the JSON schema. Raises ``ShapeMismatch``, ``KeyError`` or ``ValueError`` on bad input."""
    n = int(data["partitions"])
    stages = [int(s) for s in data["stages"]]
    if len(stages) != n:
        raise ShapeMismatch(f"'stages' lists {len(stages)} counts for {n} partitions")

    def blocks(key):
        out = {}
        for label, rows in (data.get(key) or {}).items():
            q, m = (int(x) - 1 for x in label.split(","))
            out[(q, m)] = _matrix(rows)
        return out

    bhat = data.get("bhat")
    return PartitionedTableau(
        stage_counts=tuple(stages),
        alpha=blocks("alpha"),
        gamma=blocks("gamma"),
        weights=tuple(np.array([frac(v) for v in b]) for b in data["b"]),
        embedded_weights=None if bhat is None else tuple(np.array([frac(v) for v in b]) for b in bhat),
        method_class=MethodClass(data.get("class", "ros")),
        coupling_mode=CouplingMode(data.get("coupling", "strict")),
        name=data.get("name", ""),
        claimed_order=data.get("claimed_order"),
        claimed_embedded_order=data.get("claimed_embedded_order"),
        combined_stages=bool(data.get("combined_stages", False)),
    )


def dumps(t: PartitionedTableau) -> str:
    return json.dumps(to_dict(t), indent=2)


def loads(text: str) -> PartitionedTableau:
    return from_dict(json.loads(text))
