"""Built-in coefficient sets.

Rational coefficients are written as fraction strings and converted to the
nearest double exactly once, so a transcription slip shows up as an
order-condition residual instead of being hidden by rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch, StructureMismatch, UnknownMethod
from .tableau import CouplingMode, MethodClass, PartitionedTableau, frac


class Role(str, enum.Enum):
    EXPLICIT = "explicit"
    DIAGONALLY_IMPLICIT = "diagonally-implicit"
    LINEARLY_IMPLICIT = "linearly-implicit"


@dataclass(frozen=True)
class MethodCard:
    """A tableau plus how each partition is meant to be treated."""

    tableau: PartitionedTableau
    roles: tuple[Role, ...]
    dae_suitable: bool = False
    notes: str = ""

    def __post_init__(self) -> None:
        roles = tuple(Role(r) for r in self.roles)
        if len(roles) != self.tableau.n_partitions:
            raise ShapeMismatch(f"{len(roles)} roles for {self.tableau.n_partitions} partitions")
        for q, r in enumerate(roles):
            if r is Role.EXPLICIT and np.any(self.tableau.gamma[(q, q)] != 0.0):
                raise StructureMismatch(f"partition {q + 1} is marked explicit but has a nonzero gamma block")
        object.__setattr__(self, "roles", roles)

    @property
    def name(self) -> str:
        return self.tableau.name

    @property
    def fixed_step_only(self) -> bool:
        return not self.tableau.has_embedded


def infer_roles(t: PartitionedTableau) -> tuple[Role, ...]:
    roles = []
    for q in range(t.n_partitions):
        if np.any(np.diag(t.alpha[(q, q)]) != 0.0):
            roles.append(Role.DIAGONALLY_IMPLICIT)
        elif any(np.any(t.gamma[(q, m)] != 0.0) for m in range(t.n_partitions)):
            roles.append(Role.LINEARLY_IMPLICIT)
        else:
            roles.append(Role.EXPLICIT)
    return tuple(roles)


def as_card(method: MethodCard | PartitionedTableau) -> MethodCard:
    if isinstance(method, MethodCard):
        return method
    return MethodCard(method, infer_roles(method))


def _lower(rows: Sequence[Sequence], s: int, diagonal: bool = False) -> np.ndarray:
    """Fill an ``s x s`` matrix from ragged rows of a lower triangle.

    Row ``i`` lists entries ``0..i-1`` (or ``0..i`` when ``diagonal``).
    Empty trailing rows may be omitted.
    """
    out = np.zeros((s, s))
    for i, row in enumerate(rows):
        width = i + 1 if diagonal else i
        if len(row) > width:
            raise ShapeMismatch(f"row {i} has {len(row)} entries, expected at most {width}")
        out[i, : len(row)] = [frac(v) for v in row]
    return out


def _vec(values: Sequence) -> np.ndarray:
    return np.array([frac(v) for v in values])


# --------------------------------------------------------------------------- #
# gamma root for IMEX-ROW3(2)4
# --------------------------------------------------------------------------- #


@lru_cache(maxsize=None)
def row324_gamma() -> float:
    """Middle real root of ``6 g^3 - 18 g^2 + 9 g - 1``, by Newton from 0.44."""
    g = 0.44
    for _ in range(100):
        step = (6 * g**3 - 18 * g**2 + 9 * g - 1) / (18 * g**2 - 36 * g + 9)
        g -= step
        if abs(step) <= 1e-17:
            break
    return g


# --------------------------------------------------------------------------- #
# single-partition bases
# --------------------------------------------------------------------------- #

ROS2_GAMMA = 1.0 - math.sqrt(2.0) / 2.0


def _ros2_blocks() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = ROS2_GAMMA
    return np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[g, 0.0], [-g, g]]), np.array([1.0 - g, g])


def _ros2() -> MethodCard:
    a, gm, b = _ros2_blocks()
    t = PartitionedTableau(
        stage_counts=(2,),
        alpha={(0, 0): a},
        gamma={(0, 0): gm},
        weights=(b,),
        method_class=MethodClass.ROS,
        name="ros2",
        claimed_order=2,
    )
    return MethodCard(t, (Role.LINEARLY_IMPLICIT,), dae_suitable=True, notes="L-stable, stiffly accurate two-stage Rosenbrock method")


_ERK_TRAP_A = np.array([[0.0, 0.0], [1.0, 0.0]])
_IRK_TRAP_A = np.array([[0.0, 0.0], [0.5, 0.5]])
_TRAP_B = np.array([0.5, 0.5])


def _erk_trapezoidal() -> MethodCard:
    t = PartitionedTableau(
        stage_counts=(2,),
        alpha={(0, 0): _ERK_TRAP_A},
        gamma={},
        weights=(_TRAP_B,),
        method_class=MethodClass.ROW,
        name="erk-trapezoidal",
        claimed_order=2,
    )
    return MethodCard(t, (Role.EXPLICIT,), notes="explicit trapezoidal rule (Heun)")


def _irk_trapezoidal() -> MethodCard:
    t = PartitionedTableau(
        stage_counts=(2,),
        alpha={(0, 0): _IRK_TRAP_A},
        gamma={},
        weights=(_TRAP_B,),
        method_class=MethodClass.ROW,
        coupling_mode=CouplingMode.DECOUPLED,
        name="irk-trapezoidal",
        claimed_order=2,
    )
    return MethodCard(t, (Role.DIAGONALLY_IMPLICIT,), notes="implicit trapezoidal rule; second stage solved by Newton")


# --------------------------------------------------------------------------- #
# IMEX-ROS22: explicit trapezoid, implicit trapezoid and ROS2 in three partitions
# --------------------------------------------------------------------------- #


def _imex_ros22() -> MethodCard:
    ra, rg, rb = _ros2_blocks()
    et, it = _ERK_TRAP_A, _IRK_TRAP_A
    alpha = {
        (0, 0): et, (0, 1): et, (0, 2): et,
        (1, 0): it, (1, 1): it, (1, 2): et,
        (2, 0): ra, (2, 1): ra, (2, 2): ra,
    }  # fmt: skip
    gamma = {(2, 0): rg, (2, 1): rg, (2, 2): rg}
    t = PartitionedTableau(
        stage_counts=(2, 2, 2),
        alpha=alpha,
        gamma=gamma,
        weights=(_TRAP_B, _TRAP_B, rb),
        method_class=MethodClass.ROS,
        coupling_mode=CouplingMode.DECOUPLED,
        name="imex-ros22",
        claimed_order=2,
        combined_stages=True,
    )
    return MethodCard(
        t,
        (Role.EXPLICIT, Role.DIAGONALLY_IMPLICIT, Role.LINEARLY_IMPLICIT),
        dae_suitable=True,
        notes="three-way split; no embedded weights, fixed step or step doubling only",
    )


def drop_partition(card: MethodCard, q: int, name: str | None = None) -> MethodCard:
    """Remove partition ``q``; exact when the corresponding right-hand side is zero.

    Applied to partition 1 (zero-based) of ``imex-ros22`` this yields the two-way
    explicit-trapezoid/ROS2 IMEX scheme.
    """
    t = card.tableau
    keep = [p for p in range(t.n_partitions) if p != q]
    if not keep:
        raise ShapeMismatch("cannot drop the only partition")
    remap = {old: new for new, old in enumerate(keep)}
    alpha = {(remap[a], remap[b]): v for (a, b), v in t.alpha.items() if a in remap and b in remap}
    gamma = {(remap[a], remap[b]): v for (a, b), v in t.gamma.items() if a in remap and b in remap}
    emb = None if t.embedded_weights is None else tuple(t.embedded_weights[p] for p in keep)
    nt = t.replace(
        stage_counts=tuple(t.stage_counts[p] for p in keep),
        alpha=alpha,
        gamma=gamma,
        weights=tuple(t.weights[p] for p in keep),
        embedded_weights=emb,
        name=name or f"{t.name}-without-{q + 1}",
        combined_stages=False,
    )
    if all(not np.any(np.diag(nt.alpha[(p, p)])) for p in range(nt.n_partitions)):
        from .tableau import validate

        strict = nt.replace(coupling_mode=CouplingMode.STRICT)
        if validate(strict).ok:
            nt = strict
    return MethodCard(nt, tuple(card.roles[p] for p in keep), card.dae_suitable, card.notes)


def imex_ros22_two_way() -> MethodCard:
    """IMEX-ROS22 with the (zero) diagonally implicit partition removed."""
    return drop_partition(builtin("imex-ros22"), 1, name="imex-ros22")


# --------------------------------------------------------------------------- #
# IMEX-ROW3(2)4
# --------------------------------------------------------------------------- #


def _imex_row324() -> MethodCard:
    g = row324_gamma()
    g2 = g * g
    F = frac
    ae = _lower(
        [
            [],
            [2 * g],
            [-F("15/16") * g2 + F("103/32") * g - F("5/8"), F("15/16") * g2 - F("87/32") * g + F("9/8")],
            [
                -F("81/272") * g2 + F("111/136") * g + F("265/544"),
                F("1/16") * g2 + F("1/8") * g - F("25/32"),
                F("4/17") * g2 - F("16/17") * g + F("22/17"),
            ],
        ],
        4,
    )
    ai = _lower(
        [
            [],
            [2 * g],
            [-F("9/8") * g2 + F("115/32") * g - F("19/32"), F("9/8") * g2 - F("99/32") * g + F("35/32")],
            [
                F("9/34") * g2 - F("19/34") * g + F("31/68"),
                -F("1/2") * g2 + F("3/2") * g - F("3/4"),
                F("4/17") * g2 - F("16/17") * g + F("22/17"),
            ],
        ],
        4,
    )
    gi = _lower(
        [
            [g],
            [-2 * g, g],
            [F("3/2") * g2 - F("157/32") * g + F("33/32"), -F("3/4") * g2 + F("57/32") * g - F("21/32"), g],
            [
                -F("9/17") * g2 + F("19/17") * g - F("7/17"),
                3 * g2 - 8 * g + 2,
                -F("42/17") * g2 + F("100/17") * g - F("27/17"),
                g,
            ],
        ],
        4,
        diagonal=True,
    )
    b = np.array(
        [
            -F("9/34") * g2 + F("19/34") * g + F("3/68"),
            F("5/2") * g2 - F("13/2") * g + F("5/4"),
            -F("38/17") * g2 + F("84/17") * g - F("5/17"),
            g,
        ]
    )
    bhat = np.array(
        [
            -F("57/272") * g2 + F("109/272") * g + F("9/136"),
            F("47/16") * g2 - F("31/4") * g + F("23/16"),
            -F("40/17") * g2 + F("201/34") * g - F("15/34"),
            -F("3/8") * g2 + F("23/16") * g - F("1/16"),
        ]
    )
    erk = _single(ae, np.zeros((4, 4)), b, bhat, MethodClass.ROW)
    row = _single(ai, gi, b, bhat, MethodClass.ROW)
    t = compose_imex_special_case(erk, row, shared_b=True).replace(
        name="imex-row3-2-4", claimed_order=3, claimed_embedded_order=2
    )
    return MethodCard(
        t,
        (Role.EXPLICIT, Role.LINEARLY_IMPLICIT),
        dae_suitable=True,
        notes="gamma is the middle root of 6g^3-18g^2+9g-1; coefficients depend on the computed root",
    )


def _single(a, gm, b, bhat=None, cls=MethodClass.ROW) -> PartitionedTableau:
    return PartitionedTableau(
        stage_counts=(len(b),),
        alpha={(0, 0): a},
        gamma={(0, 0): gm},
        weights=(np.asarray(b),),
        embedded_weights=None if bhat is None else (np.asarray(bhat),),
        method_class=cls,
    )


# --------------------------------------------------------------------------- #
# IMEX-ROW3(2)5
# --------------------------------------------------------------------------- #


def _imex_row325() -> MethodCard:
    a = _lower(
        [
            [],
            ["1/2"],
            ["5062/13725", "4088/13725"],
            ["173067/636265", "495828/636265", "-24705/127253"],
            ["30859/262800", "-547/21900", "183/146", "-18179/52560"],
        ],
        5,
    )
    gm = _lower(
        [
            ["1/4"],
            ["-1/2", "1/4"],
            ["-4762/13725", "-2563/13725", "1/4"],
            ["-156792/636265", "-685353/636265", "82350/127253", "1/4"],
            ["22969/175200", "-3523/21900", "183/4672", "-18179/70080", "1/4"],
        ],
        5,
        diagonal=True,
    )
    b = _vec(["5225/21024", "-407/2190", "6039/4672", "-127253/210240", "1/4"])
    bhat = _vec(["9095/539616", "27387/56210", "421083/359744", "-812861/770880", "117/308"])
    erk = _single(a, np.zeros((5, 5)), b, bhat)
    row = _single(a, gm, b, bhat)
    t = compose_imex_special_case(erk, row, shared_b=True).replace(
        name="imex-row3-2-5", claimed_order=3, claimed_embedded_order=2
    )
    return MethodCard(
        t,
        (Role.EXPLICIT, Role.LINEARLY_IMPLICIT),
        dae_suitable=True,
        notes="explicit and W parts share alpha; stiffly accurate and L-stable",
    )


# --------------------------------------------------------------------------- #
# IMEX-ROS4(3)6
# --------------------------------------------------------------------------- #


def _imex_ros436() -> MethodCard:
    ae = _lower(
        [
            [],
            ["1/2"],
            ["4761/11050", "2592/5525"],
            ["3779/99450", "12931/44200", "5/72"],
            ["-9468553/45647550", "18193697/30431700", "-92843/413100", "1352/2025"],
            ["5613193/5967000", "261179/884000", "18091/108000", "-13609/19500", "153/520"],
        ],
        6,
    )
    ai = _lower(
        [
            [],
            ["1/2"],
            ["87/140", "39/140"],
            ["-331/1260", "17/28", "1/18"],
            ["84025/231336", "-755/9639", "-425/1944", "4225/5508"],
            ["1091/2160", "29/32", "145/864", "-545/624", "153/520"],
        ],
        6,
    )
    gi = _lower(
        [
            ["1/4"],
            ["-1/2", "1/4"],
            ["-183/700", "57/700", "1/4"],
            ["257/700", "-731/1400", "-1/8", "1/4"],
            ["33925/231336", "45835/77112", "2725/16524", "-1300/1377", "1/4"],
            ["-47/135", "-25/48", "-65/108", "335/312", "153/1040", "1/4"],
        ],
        6,
        diagonal=True,
    )
    b = _vec(["113/720", "37/96", "-125/288", "125/624", "459/1040", "1/4"])
    bhat = _vec(["433321/3204900", "121913/569760", "-25667/1025568", "6024/15431", "965889/6172400", "1531/11870"])
    erk = _single(ae, np.zeros((6, 6)), b, bhat)
    ros = _single(ai, gi, b, bhat, MethodClass.ROS)
    t = compose_imex_special_case(erk, ros, shared_b=True).replace(
        name="imex-ros4-3-6", claimed_order=4, claimed_embedded_order=3
    )
    return MethodCard(
        t,
        (Role.EXPLICIT, Role.LINEARLY_IMPLICIT),
        dae_suitable=True,
        notes="Rosenbrock order 4 with exact Jacobian; W order 3; stiffly accurate",
    )


# --------------------------------------------------------------------------- #
# composition and lookup
# --------------------------------------------------------------------------- #


def _only_block(t: PartitionedTableau, what: str) -> tuple[np.ndarray, np.ndarray]:
    if t.n_partitions != 1:
        raise ShapeMismatch(f"{what} must be a single-partition tableau")
    return t.alpha[(0, 0)], t.gamma[(0, 0)]


def compose_imex_special_case(
    erk: PartitionedTableau | MethodCard,
    rosw: PartitionedTableau | MethodCard,
    shared_b: bool,
) -> PartitionedTableau:
    """Pair an explicit tableau with a Rosenbrock(-W) tableau as an IMEX method.

    The explicit partition uses its own ``alpha`` for every coupling block and
    the implicit partition uses its own ``alpha`` and ``gamma`` for every
    coupling block. With ``shared_b`` both partitions share the weights, which
    lets a single set of combined stages drive the step.
    """
    erk = erk.tableau if isinstance(erk, MethodCard) else erk
    rosw = rosw.tableau if isinstance(rosw, MethodCard) else rosw
    ae, ge = _only_block(erk, "explicit part")
    ai, gi = _only_block(rosw, "implicit part")
    if ae.shape != ai.shape:
        raise ShapeMismatch(f"stage counts differ: {ae.shape[0]} vs {ai.shape[0]}")
    if np.any(ge != 0.0):
        raise StructureMismatch("explicit part has a nonzero gamma block")
    be, bi = erk.weights[0], rosw.weights[0]
    if shared_b and not np.array_equal(be, bi):
        raise StructureMismatch("shared_b requested but the weight vectors differ")
    emb = None
    if erk.embedded_weights is not None and rosw.embedded_weights is not None:
        emb = (erk.embedded_weights[0], rosw.embedded_weights[0])
    s = ae.shape[0]
    strict = not np.any(np.diag(ae)) and not np.any(np.diag(ai))
    return PartitionedTableau(
        stage_counts=(s, s),
        alpha={(0, 0): ae, (0, 1): ae, (1, 0): ai, (1, 1): ai},
        gamma={(1, 0): gi, (1, 1): gi},
        weights=(be, bi),
        embedded_weights=emb,
        method_class=rosw.method_class,
        coupling_mode=CouplingMode.STRICT if strict else CouplingMode.DECOUPLED,
        name=f"{erk.name or 'erk'}+{rosw.name or 'rosw'}",
        combined_stages=bool(shared_b),
    )


_BUILDERS = {
    "ros2": _ros2,
    "imex-ros22": _imex_ros22,
    "imex-row3-2-4": _imex_row324,
    "imex-row3-2-5": _imex_row325,
    "imex-ros4-3-6": _imex_ros436,
    "erk-trapezoidal": _erk_trapezoidal,
    "irk-trapezoidal": _irk_trapezoidal,
}

METHOD_IDS: tuple[str, ...] = tuple(_BUILDERS)

#: The four IMEX schemes of the convergence experiments, in order 2, 3, 3, 4.
IMEX_METHODS: tuple[str, ...] = ("imex-ros22", "imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6")


@lru_cache(maxsize=None)
def builtin(name: str) -> MethodCard:
    """Look up a built-in method; raises :class:`UnknownMethod`."""
    try:
        build = _BUILDERS[name]
    except KeyError:
        raise UnknownMethod(f"unknown method {name!r}; choose from {', '.join(METHOD_IDS)}") from None
    return build()


def for_partitions(name: str, n_partitions: int) -> MethodCard:
    """The built-in ``name`` shaped for a problem with ``n_partitions`` partitions.

    Only ``imex-ros22`` has a second shape: its two-way form, for problems with
    one explicit and one linearly implicit partition.
    """
    card = builtin(name)
    if card.tableau.n_partitions == n_partitions:
        return card
    if name == "imex-ros22" and n_partitions == 2:
        return imex_ros22_two_way()
    raise ShapeMismatch(f"method {name} has {card.tableau.n_partitions} partitions, problem has {n_partitions}")
