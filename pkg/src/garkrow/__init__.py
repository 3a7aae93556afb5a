"""Partitioned linearly implicit Runge-Kutta methods (GARK-ROS and GARK-ROW).

The package is organised bottom-up: ``tableau`` holds coefficient data,
``methods`` the built-in schemes, ``order_conditions`` and ``stability`` the
analysis tools, ``integrator_ode``/``integrator_dae`` the steppers and
``problems`` the benchmarks. ``cli`` wires them to the command line.
"""

from .errors import (
    DomainError,
    GarkError,
    InconsistentState,
    NewtonDivergence,
    NotDecoupled,
    ShapeMismatch,
    Singular,
    SingularGz,
    SingularStageMatrix,
    StepSizeUnderflow,
    StructureMismatch,
    UnknownMethod,
)
from .methods import METHOD_IDS, MethodCard, builtin, for_partitions
from .tableau import CouplingMode, MethodClass, PartitionedTableau, validate

__version__ = "0.1.0"

__all__ = [
    "METHOD_IDS",
    "CouplingMode",
    "DomainError",
    "GarkError",
    "InconsistentState",
    "MethodCard",
    "MethodClass",
    "NewtonDivergence",
    "NotDecoupled",
    "PartitionedTableau",
    "ShapeMismatch",
    "Singular",
    "SingularGz",
    "SingularStageMatrix",
    "StepSizeUnderflow",
    "StructureMismatch",
    "UnknownMethod",
    "builtin",
    "for_partitions",
    "validate",
]
