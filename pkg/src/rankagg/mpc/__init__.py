"""Simulated massively parallel execution of the distances, solvers and driver."""

from .distances import kendall_machine_count, mpc_distance, ulam_oracle_charge
from .engine import CapViolation, Cluster, MachineBudgetExceeded, MpcConfig, MpcTrace, run_program, words
from .framework import mpc_aggregate, offline_counterpart
from .medians import mpc_footrule_median, mpc_hamming_median, mpc_kendall_median
from .ulam import mpc_ulam_reconstruct

__all__ = [
    "CapViolation", "Cluster", "MachineBudgetExceeded", "MpcConfig", "MpcTrace", "kendall_machine_count",
    "mpc_aggregate", "mpc_distance", "mpc_footrule_median", "mpc_hamming_median", "mpc_kendall_median",
    "mpc_ulam_reconstruct", "offline_counterpart", "run_program", "ulam_oracle_charge", "words",
]
