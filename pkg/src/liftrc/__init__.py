"""Exact lifted probabilistic inference by recursive conditioning."""

from .contexts import CountingTable, CurrentContext, canonical_key, forget_variable
from .counting import count_csp_solutions
from .dsl import ModelSyntaxError, format_model, parse_model
from .ground_engine import GroundEngine, RunStats
from .grounding import OracleInfeasibleError, ground_model
from .lifted_engine import (
    DisconnectionCertificate,
    LiftedEngine,
    LiftedInternalError,
    NotLiftableError,
)
from .model import (
    Constant,
    ConstraintSet,
    FactorTable,
    FunctorDecl,
    Model,
    ModelError,
    Parameter,
    Parfactor,
    Population,
    PRV,
    Substitution,
    apply_substitution,
    validate_model,
)
from .numbers import (
    ExactMode,
    ExactSizeError,
    LogSpaceMode,
    binomial,
    falling_factorial,
    make_mode,
    multinomial,
)
from .query import (
    EngineDisagreementError,
    EngineReport,
    Query,
    QueryAnswer,
    ZeroProbabilityEvidenceError,
    answer_query,
    partition_function,
)
from .shatter import preemptive_shatter, split_parfactor

__version__ = "0.1.0"

__all__ = [
    "CountingTable", "CurrentContext", "canonical_key", "forget_variable",
    "count_csp_solutions",
    "ModelSyntaxError", "format_model", "parse_model",
    "GroundEngine", "RunStats",
    "OracleInfeasibleError", "ground_model",
    "DisconnectionCertificate", "LiftedEngine", "LiftedInternalError", "NotLiftableError",
    "Constant", "ConstraintSet", "FactorTable", "FunctorDecl", "Model", "ModelError",
    "Parameter", "Parfactor", "Population", "PRV", "Substitution",
    "apply_substitution", "validate_model",
    "ExactMode", "ExactSizeError", "LogSpaceMode",
    "binomial", "falling_factorial", "make_mode", "multinomial",
    "EngineDisagreementError", "EngineReport", "Query", "QueryAnswer",
    "ZeroProbabilityEvidenceError", "answer_query", "partition_function",
    "preemptive_shatter", "split_parfactor",
]
