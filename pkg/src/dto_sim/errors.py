"""Exception types raised across the package."""

from __future__ import annotations


class DtoError(Exception):
    """Base error. Carries optional simulation context for diagnostics."""

    module = "dto_sim"

    def __init__(self, message: str, *, time: float | None = None, agent: int | None = None):
        super().__init__(message)
        self.time = time
        self.agent = agent

    def diagnostic(self) -> str:
        parts = [f"[{self.module}]", str(self)]
        if self.time is not None:
            parts.append(f"(t={self.time:.6g}")
            parts[-1] += f", agent={self.agent})" if self.agent is not None else ")"
        elif self.agent is not None:
            parts.append(f"(agent={self.agent})")
        return " ".join(parts)


class GraphError(DtoError, ValueError):
    module = "graph"


class DomainError(DtoError, ValueError):
    """A point lies outside the domain of the barrier-penalized objective."""

    module = "penalty"

    def __init__(self, message: str, *, constraint: int | None = None, **kw):
        super().__init__(message, **kw)
        self.constraint = constraint


class SingularHessianError(DtoError, ArithmeticError):
    module = "controller"


class InfeasibleError(DtoError, ValueError):
    module = "problem"


class ConvergenceError(DtoError, RuntimeError):
    module = "sim"


class SimulationError(DtoError, RuntimeError):
    module = "sim"


class ConfigError(DtoError, ValueError):
    module = "cli"
