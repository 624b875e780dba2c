"""Minimum-power allocation in OCDMA networks.

Three solvers for ``min 1'p`` subject to per-user CIR targets and a power
box: a modified Hopfield network with valid-subspace confinement, SQP with
an interior-point QP subsolver, and an augmented Lagrangian method. The
closed-form all-tight power vector serves as the reference solution.
"""
from .alm import AlmOptions, solve_alm
from .errors import (ConfigError, EmptyInstanceError, NoConvergence, NumericalFailure,
                     OcdmaError, RankDeficient, SingularOrInfeasible)
from .hopfield import HopfieldOptions, solve_hopfield
from .metrics import ConvergenceCriterion, feasibility, nmse
from .netmodel import (NetworkInstance, QosClass, SystemParams, extend_instance,
                       generate_feasible_instance, generate_instance, load_instance,
                       qos_class, save_instance)
from .problem import cir, matrix_form, oracle, tarhuni_solve
from .report import SolverReport, SolverTrace, Status
from .sqp import SqpOptions, solve_sqp

__version__ = "0.1.0"

__all__ = [
    "AlmOptions", "ConfigError", "ConvergenceCriterion", "EmptyInstanceError",
    "HopfieldOptions", "NetworkInstance", "NoConvergence", "NumericalFailure",
    "OcdmaError", "QosClass", "RankDeficient", "SingularOrInfeasible", "SolverReport",
    "SolverTrace", "SqpOptions", "Status", "SystemParams", "cir", "extend_instance",
    "feasibility", "generate_feasible_instance", "generate_instance", "load_instance",
    "matrix_form", "nmse", "oracle", "qos_class", "save_instance", "solve_alm",
    "solve_hopfield", "solve_sqp", "tarhuni_solve",
]
