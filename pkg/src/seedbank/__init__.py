"""Event-driven simulators and a Monte Carlo verification harness for
seed-bank population models with skewed offspring distributions."""

__version__ = "0.1.0"

from .measures import (MeasureKind, MeasureSpec, ValidationReport,
                       beta_discretization, induced_mutation_measure,
                       total_event_rates, validate)
from .params import EnvConvention, FrequencyState, SimParams

__all__ = [
    "EnvConvention",
    "FrequencyState",
    "MeasureKind",
    "MeasureSpec",
    "SimParams",
    "ValidationReport",
    "beta_discretization",
    "induced_mutation_measure",
    "total_event_rates",
    "validate",
    "__version__",
]
