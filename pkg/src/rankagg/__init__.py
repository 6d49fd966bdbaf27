"""Approximate 1-medians of permutation sets, offline and on a simulated MPC cluster."""

from .perm import (
    Instance,
    InstanceFormatError,
    InvalidInputError,
    Metric,
    Permutation,
    cost,
    distance,
    footrule,
    hamming,
    kendall,
    ulam,
)

__all__ = [
    "Instance",
    "InstanceFormatError",
    "InvalidInputError",
    "Metric",
    "Permutation",
    "cost",
    "distance",
    "footrule",
    "hamming",
    "kendall",
    "ulam",
]
