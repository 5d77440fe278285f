"""Closed-loop simulation of ``dx_i/dt = u_i + d_i`` and trajectory metrics.

Integration is explicit Euler at a fixed step. The sliding-variable integral
``z = int u1`` uses the same rule, so ``s = x - z`` is its exact discrete
analogue. Disturbances enter the integrator only; the controller never sees them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .controller import ControllerGains, ControllerState, nominal_control, reaching_time_bound, sliding_control
from .errors import DomainError, DtoError, SimulationError
from .optimum import optimal_trajectory, penalized_optimal_trajectory
from .penalty import MIN_MARGIN, slack
from .problem import ProblemInstance

log = logging.getLogger(__name__)

BACKEND_CHOICES = ("auto", "cython", "python", "generic")


class GainError(DtoError, ValueError):
    module = "controller"


@dataclass(frozen=True)
class SimConfig:
    """Run parameters. ``gains=None`` takes the instance's own gains.

    ``consensus``, ``sliding`` and ``disturbances`` switch off the sign
    coupling, the sliding-mode input and the disturbance for ablation runs.
    """

    instance: ProblemInstance
    gains: ControllerGains | None = None
    dt: float = 1e-4
    t_end: float = 20.0
    record_stride: int = 100
    sign_epsilon: float = 0.0
    consensus: bool = True
    sliding: bool = True
    disturbances: bool = True
    backend: str = "auto"

    def __post_init__(self):
        if self.gains is None:
            if self.instance.gains is None:
                raise ValueError("no controller gains given and the instance carries none")
            object.__setattr__(self, "gains", self.instance.gains)
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be nonnegative, got {self.t_end!r}")
        if isinstance(self.record_stride, bool) or int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride!r}")
        if not self.sign_epsilon >= 0:
            raise ValueError(f"sign_epsilon must be nonnegative, got {self.sign_epsilon!r}")
        if self.backend not in BACKEND_CHOICES:
            raise ValueError(f"backend must be one of {BACKEND_CHOICES}, got {self.backend!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def replace(self, **changes) -> SimConfig:
        return replace(self, **changes)


@dataclass
class Trajectory:
    """Recorded run. Arrays are indexed ``[record, agent, component]``;
    ``margins[i]`` holds ``g_ij(x_i, t) - sigma_i(t)`` with shape ``(records, q_i)``."""

    times: np.ndarray
    states: np.ndarray
    sliding: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    disturbance: np.ndarray
    margins: tuple[np.ndarray, ...]
    config: SimConfig
    backend: str
    _oracle_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def instance(self) -> ProblemInstance:
        return self.config.instance

    def __len__(self) -> int:
        return self.times.size


# generic stepper ----------------------------------------------------------------


def _inputs(states, cstate: ControllerState, t: float, config: SimConfig):
    inst = config.instance
    gains = config.gains
    u1 = np.zeros_like(states)
    for i, agent in enumerate(inst.agents):
        u1[i] = nominal_control(
            i, states, t, inst.graph, agent, gains.beta, config.sign_epsilon, consensus=config.consensus
        )
    if config.sliding:
        u2 = np.array([sliding_control(s, gains, config.sign_epsilon) for s in cstate.manifold(states)])
    else:
        u2 = np.zeros_like(states)
    if config.disturbances:
        d = np.array([np.asarray(a.disturbance(t), dtype=float) for a in inst.agents]).reshape(states.shape)
    else:
        d = np.zeros_like(states)
    return u1, u2, d


def _first_violation(instance: ProblemInstance, states, t: float) -> int | None:
    for i, agent in enumerate(instance.agents):
        sigma = slack(agent.barrier, t)
        if any(not sigma - g.value(states[i], t) > MIN_MARGIN for g in agent.constraints):
            return i
    return None


def _advance(states, cstate, t, dt, config, inputs=None):
    u1, u2, d = inputs if inputs is not None else _inputs(states, cstate, t, config)
    new_states = states + dt * ((u1 + u2) + d)
    return new_states, ControllerState(cstate.z + dt * u1)


def step(states, controller_state: ControllerState, t: float, dt: float, config: SimConfig, inputs=None):
    """One Euler step of every agent and of the sliding integral.

    If the new state leaves a barrier domain the step is redone as ten
    substeps of ``dt/10`` over the same interval; a second violation aborts.
    """
    states = np.asarray(states, dtype=float)
    inst = config.instance
    new_states, new_c = _advance(states, controller_state, t, dt, config, inputs)
    if not np.all(np.isfinite(new_states)):
        raise SimulationError("non-finite state", time=t)
    if _first_violation(inst, new_states, t + dt) is None:
        return new_states, new_c
    h = dt / 10.0
    xs, cs = states, controller_state
    for sub in range(10):
        ts = t + sub * h
        xs, cs = _advance(xs, cs, ts, h, config, inputs if sub == 0 else None)
        bad = _first_violation(inst, xs, ts + h)
        if bad is not None:
            raise SimulationError("domain violation after dt/10 retry", time=ts + h, agent=bad + 1)
    return xs, cs


def _run_generic(config: SimConfig) -> Trajectory:
    inst = config.instance
    N, n = inst.size, inst.dimension
    x = np.array([a.initial_state for a in inst.agents], dtype=float)
    c = ControllerState.zeros(N, n)
    rows = {k: [] for k in ("t", "x", "s", "u1", "u2", "d")}
    margins = [[] for _ in range(N)]
    n_steps, stride = config.n_steps, config.record_stride
    for k in range(n_steps + 1):
        t = k * config.dt
        try:
            inputs = _inputs(x, c, t, config)
        except DtoError as exc:
            raise SimulationError(f"{type(exc).__name__}: {exc}", time=t, agent=exc.agent) from exc
        if k % stride == 0 or k == n_steps:
            for key, val in zip(("t", "x", "s", "u1", "u2", "d"), (t, x, c.manifold(x), *inputs)):
                rows[key].append(val)
            for i, agent in enumerate(inst.agents):
                sigma = slack(agent.barrier, t)
                margins[i].append([g.value(x[i], t) - sigma for g in agent.constraints])
        if k == n_steps:
            break
        x, c = step(x, c, t, config.dt, config, inputs)
    return Trajectory(
        times=np.array(rows["t"]),
        states=np.array(rows["x"]),
        sliding=np.array(rows["s"]),
        u1=np.array(rows["u1"]),
        u2=np.array(rows["u2"]),
        disturbance=np.array(rows["d"]),
        margins=tuple(np.array(m, dtype=float).reshape(-1, len(a.constraints)) for m, a in zip(margins, inst.agents)),
        config=config,
        backend="generic",
    )


def _run_fused(config: SimConfig, packed, backend: str) -> Trajectory:
    inst = config.instance
    g = config.gains
    x0 = np.array([a.initial_state for a in inst.agents], dtype=float)
    res = kernels.simulate(
        packed,
        x0,
        (g.k0, g.k1, g.k2, g.rho1, g.rho2, g.beta),
        (config.consensus, config.sliding, config.disturbances),
        config.dt,
        config.n_steps,
        config.record_stride,
        config.sign_epsilon,
        backend=backend,
    )
    if res.status != 0:
        agent = res.fail_agent + 1 if res.fail_agent >= 0 else None
        raise SimulationError(res.message, time=res.fail_step * config.dt, agent=agent)
    cptr = packed.cptr
    margins = tuple(res.margins[:, cptr[i] : cptr[i + 1]].copy() for i in range(inst.size))
    return Trajectory(res.times, res.states, res.sliding, res.u1, res.u2, res.disturbance, margins, config, backend)


def validate(config: SimConfig) -> None:
    inst = config.instance
    inst.check_initial_feasibility()
    if config.sliding and config.disturbances and not config.gains.k0 > inst.disturbance_bound:
        raise GainError(f"k0={config.gains.k0:g} must exceed the disturbance bound D0={inst.disturbance_bound:g}")


def run(config: SimConfig) -> Trajectory:
    """Simulate ``[0, t_end]``. Deterministic for a fixed config and backend.

    ``backend="auto"`` uses the fused kernel (compiled when available) for
    harmonic-family instances and the generic stepper otherwise.
    """
    validate(config)
    if config.backend == "generic":
        return _run_generic(config)
    packed = kernels.pack(config.instance)
    if packed is None:
        if config.backend != "auto":
            raise ValueError(f"backend {config.backend!r} needs a harmonic-family instance")
        return _run_generic(config)
    backend = kernels.DEFAULT_BACKEND if config.backend == "auto" else config.backend
    return _run_fused(config, packed, backend)


# metrics --------------------------------------------------------------------------


def _pairwise_max(x: np.ndarray) -> float:
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=-1)).max())


def consensus_errors(traj: Trajectory) -> np.ndarray:
    """Max pairwise 2-norm distance between agent states, per record."""
    return np.array([_pairwise_max(x) for x in traj.states])


def _record_index(traj: Trajectory, t: float, exact: bool) -> int:
    k = int(np.argmin(np.abs(traj.times - t)))
    if exact and abs(traj.times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise KeyError(f"t={t} is not on the recorded grid (nearest {traj.times[k]})")
    return k


def consensus_error(traj: Trajectory, t: float, exact: bool = True) -> float:
    return _pairwise_max(traj.states[_record_index(traj, t, exact)])


def consensus_time(traj: Trajectory, enter: float = 1e-2, stay: float = 2e-2) -> float | None:
    """First recorded time with error below ``enter`` that stays below ``stay`` to the end."""
    err = consensus_errors(traj)
    stays = np.flip(np.logical_and.accumulate(np.flip(err < stay)))
    hits = np.nonzero((err < enter) & stays)[0]
    return float(traj.times[hits[0]]) if hits.size else None


def manifold_norms(traj: Trajectory) -> np.ndarray:
    """``max_i ||s_i||_inf`` per record."""
    return np.abs(traj.sliding).max(axis=(1, 2))


def chatter_band(gains: ControllerGains, dt: float, disturbance_bound: float) -> float:
    """Discrete sliding band ``2 dt (k0 + k1 + k2 + D0)``."""
    return 2.0 * dt * (gains.k0 + gains.k1 + gains.k2 + disturbance_bound)


def reaching_bound(traj: Trajectory) -> float:
    inst = traj.instance
    return reaching_time_bound(traj.config.gains, inst.size, inst.dimension)


def optimum_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """True and penalized centralized optima on the recorded grid (cached)."""
    if "optima" not in traj._oracle_cache:
        inst = traj.instance
        true = np.array([optimal_trajectory(inst, t) for t in traj.times])
        pen = np.array([penalized_optimal_trajectory(inst, t, seed=x) for t, x in zip(traj.times, true)])
        traj._oracle_cache["optima"] = (true, pen)
    return traj._oracle_cache["optima"]


def tracking_errors(traj: Trajectory, instance: ProblemInstance | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``max_i ||x_i - x*||`` against the true and the penalized optimum, per record."""
    if instance is not None and instance is not traj.instance:
        traj = replace(traj, config=traj.config.replace(instance=instance), _oracle_cache={})
    true, pen = optimum_series(traj)
    err = lambda ref: np.linalg.norm(traj.states - ref[:, None, :], axis=-1).max(axis=1)
    return err(true), err(pen)


def global_costs(traj: Trajectory) -> np.ndarray:
    """``sum_i f_i(x_i(t), t)`` per record."""
    agents = traj.instance.agents
    return np.array(
        [sum(a.cost.value(x[i], t) for i, a in enumerate(agents)) for t, x in zip(traj.times, traj.states)]
    )


def max_margin(traj: Trajectory) -> float:
    vals = [m.max() for m in traj.margins if m.size]
    return float(max(vals)) if vals else -math.inf


def summary(traj: Trajectory) -> dict[str, np.ndarray]:
    """Global per-record series, keyed by summary-CSV column."""
    true, pen = tracking_errors(traj)
    return {
        "t": traj.times,
        "consensus_error": consensus_errors(traj),
        "tracking_err_true": true,
        "tracking_err_penalized": pen,
        "global_cost": global_costs(traj),
        "manifold_norm": manifold_norms(traj),
    }


def nabla_sum_norms(traj: Trajectory) -> np.ndarray:
    """``||sum_i grad L_i(x_i, t)||`` per record."""
    from .penalty import penalized_gradient

    agents = traj.instance.agents
    out = []
    for t, x in zip(traj.times, traj.states):
        try:
            out.append(np.linalg.norm(sum(penalized_gradient(a, x[i], t) for i, a in enumerate(agents))))
        except DomainError:
            out.append(math.nan)
    return np.array(out)


def decay_rate(times, values) -> float:
    """Least-squares ``lambda`` in ``values ~ C exp(-lambda t)``."""
    times = np.asarray(times, dtype=float)
    slope, _ = np.polyfit(times, np.log(np.asarray(values, dtype=float)), 1)
    return float(-slope)
