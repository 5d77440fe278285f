"""Backend selection for the fused simulation loop.

The compiled extension ``_fused`` is used when it imports; otherwise (or when
``DTO_SIM_PURE_PYTHON=1``) the pure-Python twin ``_fused_py`` runs instead.
Both accept instances whose costs are :class:`QuadraticTracking`, constraints
:class:`AffineConstraint` and disturbances :class:`HarmonicSignal`; anything
else goes through the generic object-level stepper in :mod:`dto_sim.sim`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _fused_py
from .problem import AffineConstraint, HarmonicSignal, ProblemInstance, QuadraticTracking

try:
    if os.environ.get("DTO_SIM_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernel disabled by DTO_SIM_PURE_PYTHON")
    from . import _fused as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _fused_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled
DEFAULT_BACKEND = "cython" if _compiled is not None else "python"

STATUS = {
    _fused_py.OK: "ok",
    _fused_py.DOMAIN: "domain violation",
    _fused_py.RETRY_FAILED: "domain violation after dt/10 retry",
    _fused_py.NONFINITE: "non-finite state",
    _fused_py.SINGULAR: "singular penalized Hessian",
}


@dataclass(frozen=True)
class HarmonicPack:
    """Flat arrays describing a harmonic-family instance."""

    N: int
    n: int
    weight: np.ndarray
    ref: np.ndarray
    cptr: np.ndarray
    cnormal: np.ndarray
    cbound: np.ndarray
    barrier: np.ndarray
    dist: np.ndarray
    nptr: np.ndarray
    nidx: np.ndarray

    @property
    def constraint_count(self) -> int:
        return int(self.cptr[-1])


def _harmonic_rows(sig: HarmonicSignal) -> np.ndarray:
    return np.column_stack([sig.offset, sig.sin_amp, sig.cos_amp, sig.omega])


def pack(instance: ProblemInstance) -> HarmonicPack | None:
    """Flatten ``instance`` for the fused loop, or ``None`` if it is outside the harmonic family."""
    n = instance.dimension
    weight, ref, cptr, cnormal, cbound, barrier, dist = [], [], [0], [], [], [], []
    for agent in instance.agents:
        cost = agent.cost
        if type(cost) is not QuadraticTracking or not isinstance(agent.disturbance, HarmonicSignal):
            return None
        if agent.disturbance.dim != n:
            return None
        weight.append(cost.weight)
        ref.append(_harmonic_rows(cost.ref))
        for g in agent.constraints:
            if type(g) is not AffineConstraint or g.bound.dim != 1:
                return None
            cnormal.append(g.normal)
            cbound.append(_harmonic_rows(g.bound)[0])
        cptr.append(cptr[-1] + len(agent.constraints))
        barrier.append(agent.barrier.as_tuple())
        dist.append(_harmonic_rows(agent.disturbance))
    g = instance.graph
    nptr, nidx = [0], []
    for i in range(g.node_count):
        nidx.extend(g.neighbors(i))
        nptr.append(len(nidx))
    f64 = lambda a: np.ascontiguousarray(np.asarray(a, dtype=np.float64).ravel())
    i64 = lambda a: np.ascontiguousarray(np.asarray(a, dtype=np.int64).ravel())
    return HarmonicPack(
        N=instance.size,
        n=n,
        weight=f64(weight),
        ref=f64(ref),
        cptr=i64(cptr),
        cnormal=f64(cnormal),
        cbound=f64(cbound),
        barrier=f64(barrier),
        dist=f64(dist),
        nptr=i64(nptr),
        nidx=i64(nidx),
    )


@dataclass
class KernelResult:
    status: int
    fail_step: int
    fail_agent: int
    times: np.ndarray
    states: np.ndarray
    sliding: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    disturbance: np.ndarray
    margins: np.ndarray

    @property
    def message(self) -> str:
        return STATUS[self.status]


def simulate(
    p: HarmonicPack,
    x0: np.ndarray,
    gains: tuple[float, ...],
    flags: tuple[bool, bool, bool],
    dt: float,
    n_steps: int,
    stride: int,
    sign_epsilon: float = 0.0,
    backend: str | None = None,
) -> KernelResult:
    """Run the fused Euler loop on ``backend`` (default: compiled if available)."""
    mod = BACKENDS[backend or DEFAULT_BACKEND]
    records = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    size = p.N * p.n
    out_t = np.zeros(records)
    outs = [np.zeros((records, size)) for _ in range(5)]
    out_m = np.zeros((records, p.constraint_count))
    status, fail_step, fail_agent, rec = mod.simulate(
        p.N, p.n, p.weight, p.ref, p.cptr, p.cnormal, p.cbound, p.barrier, p.dist, p.nptr, p.nidx,
        tuple(float(g) for g in gains), tuple(bool(f) for f in flags),
        np.ascontiguousarray(x0, dtype=np.float64).ravel(),
        float(dt), int(n_steps), int(stride), float(sign_epsilon),
        out_t, *outs, out_m,
    )
    shape = (rec, p.N, p.n)
    x, s, u1, u2, d = (o[:rec].reshape(shape) for o in outs)
    return KernelResult(int(status), int(fail_step), int(fail_agent), out_t[:rec], x, s, u1, u2, d, out_m[:rec])
