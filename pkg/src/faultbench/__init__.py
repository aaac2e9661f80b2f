"""Fault-diagnosis benchmark workbench.

Pipeline: multiplier circuits with injected stuck-at faults -> pseudo-Boolean
cost polynomials (explicit or implicit mapping) -> quadratic reduction with
conjunction ancillas -> minor embedding on a chimera hardware graph, solved
with simulated annealing, parallel tempering with isoenergetic cluster moves,
path-integral simulated quantum annealing, and an exact CDCL SAT diagnoser,
followed by time-to-solution scaling analysis.
"""

from faultbench.circuit import (
    Circuit,
    DiagnosisInstance,
    FaultModel,
    GateKind,
    Observation,
    brute_force_diagnosis,
    build_full_adder,
    build_multiplier,
    evaluate,
    generate_instance,
)
from faultbench.pubo import MappingOptions, Polynomial, map_explicit, map_implicit

__all__ = [
    "Circuit",
    "DiagnosisInstance",
    "FaultModel",
    "GateKind",
    "Observation",
    "brute_force_diagnosis",
    "build_full_adder",
    "build_multiplier",
    "evaluate",
    "generate_instance",
    "MappingOptions",
    "Polynomial",
    "map_explicit",
    "map_implicit",
]
