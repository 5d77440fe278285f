"""Time-varying costs, constraints, disturbances and the two four-agent scenarios."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .controller import ControllerGains
from .errors import DomainError, InfeasibleError
from .graph import Graph, path, ring
from .penalty import BarrierSchedule, slack


class TimeVaryingFunction(ABC):
    """Smooth scalar function of ``(x, t)`` with analytic derivatives.

    Implementations must be free of hidden mutable state.
    """

    dim: int

    @abstractmethod
    def value(self, x, t: float) -> float: ...

    @abstractmethod
    def gradient(self, x, t: float) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, x, t: float) -> np.ndarray: ...

    @abstractmethod
    def time_partial(self, x, t: float) -> float: ...

    @abstractmethod
    def grad_time_partial(self, x, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class HarmonicSignal:
    """Vector signal ``offset + sin_amp*sin(omega*t) + cos_amp*cos(omega*t)``, element-wise."""

    offset: np.ndarray
    sin_amp: np.ndarray
    cos_amp: np.ndarray
    omega: np.ndarray

    @classmethod
    def make(cls, offset=0.0, sin_amp=0.0, cos_amp=0.0, omega=1.0, dim: int | None = None) -> HarmonicSignal:
        arrays = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (offset, sin_amp, cos_amp, omega)]
        size = dim if dim is not None else max(a.size for a in arrays)
        arrays = [np.broadcast_to(a, (size,)).copy() for a in arrays]
        for a in arrays:
            a.setflags(write=False)
        return cls(*arrays)

    @property
    def dim(self) -> int:
        return self.offset.size

    def __call__(self, t: float) -> np.ndarray:
        wt = self.omega * t
        return self.offset + self.sin_amp * np.sin(wt) + self.cos_amp * np.cos(wt)

    def rate(self, t: float) -> np.ndarray:
        wt = self.omega * t
        return self.omega * (self.sin_amp * np.cos(wt) - self.cos_amp * np.sin(wt))

    def bound(self) -> float:
        """``max_k sup_t |signal_k(t)|``."""
        return float(np.max(np.abs(self.offset) + np.hypot(self.sin_amp, self.cos_amp)))

    def __eq__(self, other):
        if not isinstance(other, HarmonicSignal):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("offset", "sin_amp", "cos_amp", "omega"))

    __hash__ = None


class QuadraticTracking(TimeVaryingFunction):
    """``f(x, t) = weight * ||x - ref(t)||^2 + bias(t)``."""

    def __init__(self, weight: float, ref: HarmonicSignal, bias: HarmonicSignal | None = None):
        if not weight > 0:
            raise ValueError("weight must be positive")
        self.weight = float(weight)
        self.ref = ref
        self.bias = bias if bias is not None else HarmonicSignal.make(0.0)
        self.dim = ref.dim

    def value(self, x, t):
        e = np.asarray(x, dtype=float) - self.ref(t)
        return float(self.weight * (e @ e) + self.bias(t)[0])

    def gradient(self, x, t):
        return 2.0 * self.weight * (np.asarray(x, dtype=float) - self.ref(t))

    def hessian(self, x, t):
        return 2.0 * self.weight * np.eye(self.dim)

    def time_partial(self, x, t):
        e = np.asarray(x, dtype=float) - self.ref(t)
        return float(-2.0 * self.weight * (e @ self.ref.rate(t)) + self.bias.rate(t)[0])

    def grad_time_partial(self, x, t):
        return -2.0 * self.weight * self.ref.rate(t)

    def __eq__(self, other):
        if not isinstance(other, QuadraticTracking):
            return NotImplemented
        return (self.weight, self.ref, self.bias) == (other.weight, other.ref, other.bias)

    __hash__ = None


class AffineConstraint(TimeVaryingFunction):
    """``g(x, t) = normal . x - bound(t)``; feasible when ``g <= 0``."""

    def __init__(self, normal, bound: HarmonicSignal):
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float)).copy()
        self.normal.setflags(write=False)
        self.bound = bound
        self.dim = self.normal.size

    def value(self, x, t):
        return float(self.normal @ np.asarray(x, dtype=float) - self.bound(t)[0])

    def gradient(self, x, t):
        return self.normal.copy()

    def hessian(self, x, t):
        return np.zeros((self.dim, self.dim))

    def time_partial(self, x, t):
        return float(-self.bound.rate(t)[0])

    def grad_time_partial(self, x, t):
        return np.zeros(self.dim)

    def __eq__(self, other):
        if not isinstance(other, AffineConstraint):
            return NotImplemented
        return np.array_equal(self.normal, other.normal) and self.bound == other.bound

    __hash__ = None


class CallableFunction(TimeVaryingFunction):
    """User-supplied function from five callables of ``(x, t)``.

    With ``check=True`` the analytic derivatives are compared against central
    differences at ``check_points`` on construction.
    """

    def __init__(
        self,
        dim: int,
        value: Callable,
        gradient: Callable,
        hessian: Callable,
        time_partial: Callable,
        grad_time_partial: Callable,
        *,
        check: bool = True,
        check_points: Sequence[tuple] = (),
        rtol: float = 1e-6,
    ):
        self.dim = int(dim)
        self._f = (value, gradient, hessian, time_partial, grad_time_partial)
        if check:
            points = list(check_points) or [(np.full(self.dim, 0.3), 0.7)]
            for x, t in points:
                check_derivatives(self, x, t, rtol=rtol)

    def value(self, x, t):
        return float(self._f[0](np.asarray(x, dtype=float), t))

    def gradient(self, x, t):
        return np.atleast_1d(np.asarray(self._f[1](np.asarray(x, dtype=float), t), dtype=float))

    def hessian(self, x, t):
        return np.atleast_2d(np.asarray(self._f[2](np.asarray(x, dtype=float), t), dtype=float))

    def time_partial(self, x, t):
        return float(self._f[3](np.asarray(x, dtype=float), t))

    def grad_time_partial(self, x, t):
        return np.atleast_1d(np.asarray(self._f[4](np.asarray(x, dtype=float), t), dtype=float))


# finite-difference oracles -------------------------------------------------


def _finite(v, what):
    if not np.all(np.isfinite(v)):
        raise DomainError(f"non-finite {what} during finite differencing; step leaves the function's domain")
    return v


def fd_gradient(f, x, t: float, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``f.value`` in ``x``. ``f`` may also be a plain callable."""
    if not h > 0:
        raise ValueError("h must be positive")
    value = f.value if hasattr(f, "value") else f
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (_finite(value(x + e, t), "value") - _finite(value(x - e, t), "value")) / (2 * h)
    return out


def fd_jacobian(grad, x, t: float, h: float = 1e-5) -> np.ndarray:
    """Central differences of a vector map ``grad(x, t)``; used for Hessian checks."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((_finite(grad(x + e, t), "gradient") - _finite(grad(x - e, t), "gradient")) / (2 * h))
    return np.column_stack(cols)


def fd_time_derivative(fn, x, t: float, h: float = 1e-5):
    """Central difference of ``fn(x, t)`` in ``t`` with ``x`` fixed."""
    return (_finite(np.asarray(fn(x, t + h)), "value") - _finite(np.asarray(fn(x, t - h)), "value")) / (2 * h)


def relative_error(actual, expected, floor: float = 1e-8) -> float:
    """Worst element-wise ``|a - e| / |e|``; errors below ``floor`` in absolute terms count as zero."""
    a = np.asarray(actual, dtype=float)
    e = np.asarray(expected, dtype=float)
    diff = np.abs(a - e)
    rel = np.where(diff <= floor, 0.0, diff / np.maximum(np.abs(e), np.finfo(float).tiny))
    return float(np.max(rel)) if rel.size else 0.0


def check_derivatives(f: TimeVaryingFunction, x, t: float, h: float = 1e-5, rtol: float = 1e-6) -> None:
    """Raise ``ValueError`` if any analytic channel disagrees with central differences."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    checks = {
        "gradient": (f.gradient(x, t), fd_gradient(f, x, t, h)),
        "hessian": (f.hessian(x, t), fd_jacobian(f.gradient, x, t, h)),
        "time_partial": (f.time_partial(x, t), fd_time_derivative(f.value, x, t, h)),
        "grad_time_partial": (f.grad_time_partial(x, t), fd_time_derivative(f.gradient, x, t, h)),
    }
    for name, (analytic, numeric) in checks.items():
        err = relative_error(analytic, numeric)
        if err >= rtol:
            raise ValueError(f"{name} disagrees with finite differences at x={x}, t={t}: rel. error {err:.2e}")
    hess = f.hessian(x, t)
    if not np.allclose(hess, hess.T, rtol=1e-12, atol=1e-12):
        raise ValueError("hessian is not symmetric")


# problem data ---------------------------------------------------------------


@dataclass(frozen=True)
class AgentProblem:
    cost: TimeVaryingFunction
    constraints: tuple[TimeVaryingFunction, ...]
    barrier: BarrierSchedule
    disturbance: Callable[[float], np.ndarray]
    initial_state: np.ndarray

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float)).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "initial_state", x0)
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def dim(self) -> int:
        return self.initial_state.size

    def initial_feasibility(self) -> list[float]:
        """``g_j(x(0), 0) - sigma(0)`` per constraint; all must be negative."""
        sigma0 = slack(self.barrier, 0.0)
        return [g.value(self.initial_state, 0.0) - sigma0 for g in self.constraints]

    def __eq__(self, other):
        if not isinstance(other, AgentProblem):
            return NotImplemented
        return (
            self.cost == other.cost
            and self.constraints == other.constraints
            and self.barrier == other.barrier
            and self.disturbance == other.disturbance
            and np.array_equal(self.initial_state, other.initial_state)
        )

    __hash__ = None


@dataclass(frozen=True)
class ProblemInstance:
    """Graph plus one :class:`AgentProblem` per node.

    ``disturbance_bound`` is the declared ``D0`` with ``||d_i(t)||_inf <= D0``.
    ``metadata`` keeps reference parameters that drive no computation.
    """

    graph: Graph
    agents: tuple[AgentProblem, ...]
    dimension: int
    disturbance_bound: float
    gains: ControllerGains | None = None
    name: str = "custom"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) != self.graph.node_count:
            raise ValueError(f"{len(self.agents)} agents for a graph with {self.graph.node_count} nodes")
        for i, a in enumerate(self.agents):
            if a.dim != self.dimension or a.cost.dim != self.dimension:
                raise ValueError(f"agent {i + 1} has dimension {a.dim}, expected {self.dimension}")

    @property
    def size(self) -> int:
        return len(self.agents)

    def check_initial_feasibility(self) -> None:
        """Raise :class:`InfeasibleError` unless ``g_ij(x_i(0), 0) < sigma_i(0)`` for all i, j."""
        for i, agent in enumerate(self.agents):
            for j, margin in enumerate(agent.initial_feasibility()):
                if not margin < 0:
                    raise InfeasibleError(
                        f"initial state violates g_ij(x_i(0), 0) < sigma_i(0) for constraint {j + 1} "
                        f"(margin {margin:.6g})",
                        time=0.0,
                        agent=i + 1,
                    )

    def with_initial_states(self, states) -> ProblemInstance:
        states = np.asarray(states, dtype=float).reshape(self.size, self.dimension)
        agents = [
            AgentProblem(a.cost, a.constraints, a.barrier, a.disturbance, x0) for a, x0 in zip(self.agents, states)
        ]
        return self._replace(agents=tuple(agents))

    def _replace(self, **changes) -> ProblemInstance:
        fields = dict(
            graph=self.graph,
            agents=self.agents,
            dimension=self.dimension,
            disturbance_bound=self.disturbance_bound,
            gains=self.gains,
            name=self.name,
            metadata=dict(self.metadata),
        )
        fields.update(changes)
        return ProblemInstance(**fields)


def global_cost(p: ProblemInstance, x, t: float) -> float:
    """Sum of all agents' costs at a common point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(sum(a.cost.value(x, t) for a in p.agents))


# built-in four-agent scenarios -----------------------------------------------

SCENARIO_GAINS = ControllerGains(k0=10.0, k1=3.0, k2=3.0, rho1=0.5, rho2=3.0, beta=3.0)
SCENARIO_BARRIER = BarrierSchedule(a1=10.0, a2=0.05, a3=30.0, a4=1.0)
SCENARIO_INITIAL_STATES = (-2.0, -1.0, 1.0, 3.0)


def _scenario_agents() -> tuple[AgentProblem, ...]:
    h = HarmonicSignal.make
    costs = [
        QuadraticTracking(1.0, h(sin_amp=1.0), h(offset=5.0)),
        QuadraticTracking(1.0, h(sin_amp=-3.0), h(cos_amp=1.0)),
        QuadraticTracking(1.0, h(cos_amp=1.0), h(offset=-5.0)),
        QuadraticTracking(1.0, h(sin_amp=1.0)),
    ]
    disturbances = [
        h(offset=2.0, sin_amp=3.0),
        h(sin_amp=2.0, omega=0.5 * math.pi),
        h(offset=2.0),
        h(offset=0.5, cos_amp=1.5),
    ]
    constraint = AffineConstraint([1.0], h(cos_amp=1.0))
    return tuple(
        AgentProblem(c, (constraint,), SCENARIO_BARRIER, d, [x0])
        for c, d, x0 in zip(costs, disturbances, SCENARIO_INITIAL_STATES)
    )


def _scenario_instance(graph: Graph, name: str) -> ProblemInstance:
    agents = _scenario_agents()
    return ProblemInstance(
        graph=graph,
        agents=agents,
        dimension=1,
        disturbance_bound=max(a.disturbance.bound() for a in agents),
        gains=SCENARIO_GAINS,
        name=name,
        # listed with the gains; no control law term uses them
        metadata={"nu": 3.0, "rho": 18.0},
    )


def scenario_a() -> ProblemInstance:
    """Four agents on a ring with sinusoidal quadratic costs and ``x <= cos t``."""
    return _scenario_instance(ring(4), "a")


def scenario_b() -> ProblemInstance:
    """Same agents as :func:`scenario_a` on the path ``1-2-3-4``."""
    return _scenario_instance(path(4), "b")


def scenario(name: str) -> ProblemInstance:
    try:
        return {"a": scenario_a, "b": scenario_b}[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected 'a' or 'b'") from None
