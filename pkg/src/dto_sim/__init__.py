"""Distributed time-varying optimization with sliding-mode disturbance rejection."""

from .controller import ControllerGains, ControllerState, nominal_control, reaching_time_bound, sliding_control
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    DtoError,
    GraphError,
    InfeasibleError,
    SimulationError,
    SingularHessianError,
)
from .graph import Graph, build_graph, path, ring
from .kernels import DEFAULT_BACKEND
from .optimum import optimal_trajectory, penalized_optimal_trajectory
from .penalty import BarrierSchedule
from .problem import AgentProblem, ProblemInstance, scenario, scenario_a, scenario_b
from .sim import SimConfig, Trajectory, consensus_error, consensus_time, manifold_norms, run, tracking_errors

__version__ = "0.1.0"

__all__ = [
    "AgentProblem", "BarrierSchedule", "ConfigError", "ControllerGains", "ControllerState",
    "ConvergenceError", "DEFAULT_BACKEND", "DomainError", "DtoError", "Graph", "GraphError",
    "InfeasibleError", "ProblemInstance", "SimConfig", "SimulationError", "SingularHessianError",
    "Trajectory", "build_graph", "consensus_error", "consensus_time", "manifold_norms",
    "nominal_control", "optimal_trajectory", "path", "penalized_optimal_trajectory",
    "reaching_time_bound", "ring", "run", "scenario", "scenario_a", "scenario_b",
    "sliding_control", "tracking_errors",
]
