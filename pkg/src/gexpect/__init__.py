"""Sub-linear expectations on finite measure families, with exact adversarial
dynamic programming, concentration bounds, a G-heat solver, controlled
Brownian paths and self-normalized limit experiments."""

__version__ = "0.1.0"

from .core import (AxiomReport, CapacityPair, ConfigurationError, DiscreteLaw, DomainError,
                   MeasureFamily, ResourceError, capacity, choquet_integral, conjugate_expectation,
                   random_family, rvf, single_law, upper_expectation, verify_axioms)
from .tree import AdversarialTree, StateDP, iid_sequence_value, sequence_capacity, sum_sq_dp

__all__ = [
    "AxiomReport", "CapacityPair", "ConfigurationError", "DiscreteLaw", "DomainError",
    "MeasureFamily", "ResourceError", "capacity", "choquet_integral", "conjugate_expectation",
    "random_family", "rvf", "single_law", "upper_expectation", "verify_axioms",
    "AdversarialTree", "StateDP", "iid_sequence_value", "sequence_capacity", "sum_sq_dp",
]
