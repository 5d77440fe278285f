"""Log-barrier penalized local objective with exponential barrier/slack schedules.

For an agent with cost ``f`` and constraints ``g_j`` the penalized objective is

    L(x, t) = f(x, t) - (1 / rho(t)) * sum_j log(sigma(t) - g_j(x, t))

with ``rho(t) = a1 * exp(a2 * t)`` and ``sigma(t) = a3 * exp(-a4 * t)``.
All derivatives below are closed-form chain-rule expansions of ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError

if TYPE_CHECKING:
    from .problem import AgentProblem

# Smallest admissible sigma - g; below this 1/(sigma - g)^2 is not trustworthy.
MIN_MARGIN = 1e-12


@dataclass(frozen=True)
class BarrierSchedule:
    a1: float
    a2: float
    a3: float
    a4: float

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"barrier parameter {name} must be positive, got {v!r}")

    def rho(self, t: float) -> float:
        return barrier_parameter(self, t)

    def sigma(self, t: float) -> float:
        return slack(self, t)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a1, self.a2, self.a3, self.a4)


def barrier_parameter(s: BarrierSchedule, t: float) -> float:
    return s.a1 * math.exp(s.a2 * t)


def slack(s: BarrierSchedule, t: float) -> float:
    return s.a3 * math.exp(-s.a4 * t)


def _margins(agent: AgentProblem, x, t) -> tuple[float, list[float]]:
    sigma = slack(agent.barrier, t)
    return sigma, [sigma - g.value(x, t) for g in agent.constraints]


def in_domain(agent: AgentProblem, x, t: float) -> bool:
    """True iff every constraint satisfies ``g_j(x, t) < sigma(t)``."""
    _, gaps = _margins(agent, np.asarray(x, dtype=float), t)
    return all(gap > 0 for gap in gaps)


def _checked_margins(agent: AgentProblem, x, t):
    sigma, gaps = _margins(agent, x, t)
    for j, gap in enumerate(gaps):
        if not gap > MIN_MARGIN:
            raise DomainError(
                f"constraint {j + 1} violates the barrier domain: sigma - g = {gap:.3e}",
                constraint=j + 1,
                time=t,
            )
    return sigma, gaps


def penalized_value(agent: AgentProblem, x, t: float) -> float:
    x = np.asarray(x, dtype=float)
    _, gaps = _checked_margins(agent, x, t)
    rho = barrier_parameter(agent.barrier, t)
    return float(agent.cost.value(x, t) - sum(math.log(m) for m in gaps) / rho)


def penalized_gradient(agent: AgentProblem, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, gaps = _checked_margins(agent, x, t)
    rho = barrier_parameter(agent.barrier, t)
    grad = np.array(agent.cost.gradient(x, t), dtype=float)
    for g, m in zip(agent.constraints, gaps):
        grad += g.gradient(x, t) / (rho * m)
    return grad


def penalized_hessian(agent: AgentProblem, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, gaps = _checked_margins(agent, x, t)
    rho = barrier_parameter(agent.barrier, t)
    hess = np.array(agent.cost.hessian(x, t), dtype=float)
    for g, m in zip(agent.constraints, gaps):
        dg = g.gradient(x, t)
        hess += (g.hessian(x, t) / m + np.outer(dg, dg) / m**2) / rho
    # outer products are symmetric only up to rounding
    return 0.5 * (hess + hess.T)


def penalized_grad_time_partial(agent: AgentProblem, x, t: float) -> np.ndarray:
    """Partial derivative in ``t`` of the penalized gradient, ``x`` held fixed."""
    x = np.asarray(x, dtype=float)
    sigma, gaps = _checked_margins(agent, x, t)
    b = agent.barrier
    rho = barrier_parameter(b, t)
    rho_dot = b.a2 * rho
    sigma_dot = -b.a4 * sigma
    out = np.array(agent.cost.grad_time_partial(x, t), dtype=float)
    for g, m in zip(agent.constraints, gaps):
        dg = g.gradient(x, t)
        gap_rate = sigma_dot - g.time_partial(x, t)
        out += -rho_dot / rho**2 * dg / m
        out += (g.grad_time_partial(x, t) / m - dg * gap_rate / m**2) / rho
    return out

