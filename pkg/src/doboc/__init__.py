"""Distributed second-order consensus optimization via a neighbor-only direction recursion."""

from .algorithms import AgentView, AlgoConfig, ProtocolViolation
from .graph import CommGraph, build_metropolis_weights, mix, validate_weights
from .objectives import PenaltyProblem, penalty_gradient, penalty_hessian_vec, penalty_value
from .simulator import RunTrace, compute_reference, run

__all__ = [
    "AgentView",
    "AlgoConfig",
    "CommGraph",
    "PenaltyProblem",
    "ProtocolViolation",
    "RunTrace",
    "build_metropolis_weights",
    "compute_reference",
    "mix",
    "penalty_gradient",
    "penalty_hessian_vec",
    "penalty_value",
    "run",
    "validate_weights",
]
