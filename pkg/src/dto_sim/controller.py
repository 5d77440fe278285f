"""Distributed control law: consensus + Newton tracking term and the
integral sliding-mode disturbance rejection term.

Per agent ``i`` the input is ``u = u1 + u2`` with

    u1 = -H^{-1} (beta * sum_{j in N_i} sign(x_i - x_j) + grad L + d/dt grad L)
    u2 = -k0 sign(s) - k1 sig(s)^rho1 - k2 sig(s)^rho2,   s = x - int_0^t u1

where ``H`` is the Hessian of the agent's penalized objective ``L``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DomainError, SingularHessianError
from .penalty import penalized_grad_time_partial, penalized_gradient, penalized_hessian

if TYPE_CHECKING:
    from .graph import Graph
    from .problem import AgentProblem, ProblemInstance

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ControllerGains:
    k0: float
    k1: float
    k2: float
    rho1: float
    rho2: float
    beta: float

    def __post_init__(self):
        for name in ("k0", "k1", "k2", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"gain {name} must be positive, got {v!r}")
        if not 0 < self.rho1 < 1:
            raise ValueError(f"rho1 must lie in (0, 1), got {self.rho1!r}")
        if not (math.isfinite(self.rho2) and self.rho2 > 1):
            raise ValueError(f"rho2 must exceed 1, got {self.rho2!r}")

    def replace(self, **changes) -> ControllerGains:
        fields = {k: getattr(self, k) for k in ("k0", "k1", "k2", "rho1", "rho2", "beta")}
        fields.update(changes)
        return ControllerGains(**fields)


@dataclass(frozen=True)
class ControllerState:
    """Running integral ``z = int_0^t u1``; the sliding variable is ``s = x - z``."""

    z: np.ndarray

    @classmethod
    def zeros(cls, agents: int, dim: int) -> ControllerState:
        return cls(np.zeros((agents, dim)))

    def manifold(self, states) -> np.ndarray:
        return np.asarray(states, dtype=float) - self.z


def sign(v, epsilon: float = 0.0) -> np.ndarray:
    """Element-wise sign with ``sign(0) = 0``; boundary-layer ``v/(|v|+eps)`` if eps > 0."""
    v = np.asarray(v, dtype=float)
    if epsilon > 0:
        return v / (np.abs(v) + epsilon)
    return np.sign(v)


def sig(v, alpha: float) -> np.ndarray:
    """Element-wise ``sign(v) * |v|**alpha``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** alpha


def _solve(hess: np.ndarray, rhs: np.ndarray, t: float) -> np.ndarray:
    cond = np.linalg.cond(hess)
    if not cond <= MAX_CONDITION:
        raise SingularHessianError(f"penalized Hessian condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}", time=t)
    return np.linalg.solve(hess, rhs)


def psi(agent: AgentProblem, x, t: float) -> np.ndarray:
    """Tracking drift ``H^{-1} (grad L + d/dt grad L)``."""
    x = np.asarray(x, dtype=float)
    hess = penalized_hessian(agent, x, t)
    return _solve(hess, penalized_gradient(agent, x, t) + penalized_grad_time_partial(agent, x, t), t)


def consensus_sum(agent_index: int, states, graph: Graph, sign_epsilon: float = 0.0) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    xi = states[agent_index]
    total = np.zeros_like(xi)
    for j in graph.neighbors(agent_index):
        total += sign(xi - states[j], sign_epsilon)
    return total


def nominal_control(
    agent_index: int,
    states,
    t: float,
    graph: Graph,
    agent: AgentProblem,
    beta: float,
    sign_epsilon: float = 0.0,
    consensus: bool = True,
) -> np.ndarray:
    """Consensus plus Newton-flow input ``u1`` for one agent.

    ``states`` holds every agent's state (row per agent); only neighbors are read.
    With ``consensus=False`` the sign coupling is dropped, leaving ``-psi``.
    """
    states = np.asarray(states, dtype=float)
    x = states[agent_index]
    try:
        hess = penalized_hessian(agent, x, t)
        rhs = penalized_gradient(agent, x, t) + penalized_grad_time_partial(agent, x, t)
    except DomainError as exc:
        exc.agent = agent_index + 1
        raise
    if consensus:
        rhs = beta * consensus_sum(agent_index, states, graph, sign_epsilon) + rhs
    try:
        return -_solve(hess, rhs, t)
    except SingularHessianError as exc:
        exc.agent = agent_index + 1
        raise


def sliding_control(s, gains: ControllerGains, sign_epsilon: float = 0.0) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return -gains.k0 * sign(s, sign_epsilon) - gains.k1 * sig(s, gains.rho1) - gains.k2 * sig(s, gains.rho2)


def update_manifold(state: ControllerState, u1, dt: float) -> ControllerState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return ControllerState(state.z + dt * np.asarray(u1, dtype=float))


def reaching_time_bound(gains: ControllerGains, agents: int, dim: int) -> float:
    """Upper bound on the time for every sliding variable to reach zero.

    Independent of the initial condition and of the disturbance, provided
    ``k0`` dominates the disturbance bound.
    """
    r1, r2 = gains.rho1, gains.rho2
    first = 1.0 / (2.0 ** ((r1 - 1) / 2) * gains.k1 * (1 - r1))
    second = 1.0 / (2.0 ** ((r2 - 1) / 2) * gains.k2 * (agents * dim) ** ((1 - r2) / 2) * (r2 - 1))
    return first + second


def beta_lower_bound(psi_bar: float, dim: int, edge_count: int, inv_hessian_floor: float, epsilon: float) -> float:
    if not inv_hessian_floor > 0:
        raise ValueError(f"inverse-Hessian eigenvalue floor must be positive, got {inv_hessian_floor!r}")
    if psi_bar < 0 or not epsilon > 0:
        raise ValueError("psi_bar must be nonnegative and epsilon positive")
    return 2.0 * psi_bar * dim**2 * edge_count / inv_hessian_floor + epsilon


@dataclass(frozen=True)
class GainBoundEstimate:
    """Sampled (not certified) quantities entering the consensus gain bound."""

    psi_bar: float
    inv_hessian_floor: float
    samples_used: int


def estimate_gain_bounds(
    instance: ProblemInstance,
    sample_box: tuple[float, float] | tuple[Sequence[float], Sequence[float]],
    t_max: float,
    samples: int = 10_000,
    seed: int = 0,
    safety: float = 2.0,
) -> GainBoundEstimate:
    """Sample ``||psi_i||_2`` and ``lambda_min(H_i^{-1})`` over a box of states and ``[0, t_max]``.

    Points outside an agent's barrier domain are skipped. ``psi_bar`` is the
    largest sampled norm times ``safety``.
    """
    rng = np.random.default_rng(seed)
    n = instance.dimension
    lo = np.broadcast_to(np.asarray(sample_box[0], dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(sample_box[1], dtype=float), (n,))
    psi_max = 0.0
    floor = math.inf
    used = 0
    for _ in range(samples):
        t = float(rng.uniform(0.0, t_max))
        x = rng.uniform(lo, hi)
        for agent in instance.agents:
            try:
                hess = penalized_hessian(agent, x, t)
                drift = psi(agent, x, t)
            except (DomainError, SingularHessianError):
                continue
            used += 1
            psi_max = max(psi_max, float(np.linalg.norm(drift)))
            floor = min(floor, 1.0 / float(np.linalg.eigvalsh(hess)[-1]))
    if used == 0:
        raise DomainError("no sampled point lies inside any agent's barrier domain")
    return GainBoundEstimate(safety * psi_max, floor, used)


def estimate_psi_bound(instance, sample_box, t_max, samples=10_000, seed=0) -> float:
    return estimate_gain_bounds(instance, sample_box, t_max, samples, seed).psi_bar


def check_beta(gains: ControllerGains, instance: ProblemInstance, estimate: GainBoundEstimate, epsilon: float = 1e-3) -> float:
    """Log a warning when ``beta`` sits below the sampled gain bound; returns the bound."""
    bound = beta_lower_bound(
        estimate.psi_bar, instance.dimension, instance.graph.edge_count, estimate.inv_hessian_floor, epsilon
    )
    if gains.beta < bound:
        log.warning("beta=%g is below the sampled consensus gain bound %.4g", gains.beta, bound)
    return bound
