"""Command-line front end: ``dto-sim --scenario a --t-end 20 --plot``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

Scenario files are TOML. Recognized keys::

    scenario = "a"              # base instance: "a", "b", or factory = "module:function"
    nodes = 4
    edges = [[1, 2], [2, 3], [3, 4]]   # 1-based
    initial_state = [-2, -1, 1, 3]     # one number (n = 1) or list per agent
    sign_epsilon = 0.0
    dt = 1e-4
    t_end = 20.0

    [barrier]                   # any subset of a1..a4
    a1 = 10.0
    a3 = 30.0

    [gains]                     # any subset of k0, k1, k2, rho1, rho2, beta
    beta = 4.5
"""

from __future__ import annotations

import argparse
import importlib
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, sim
from .controller import ControllerGains
from .errors import ConfigError, DtoError, GraphError
from .graph import build_graph
from .penalty import BarrierSchedule
from .problem import ProblemInstance, scenario

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FILE_KEYS = {"scenario", "factory", "nodes", "edges", "barrier", "gains", "sign_epsilon", "initial_state", "dt", "t_end"}
GAIN_KEYS = ("k0", "k1", "k2", "rho1", "rho2", "beta")


@dataclass
class RunSpec:
    scenario: str
    dt: float | None = None
    t_end: float | None = None
    out: Path = Path("dto_sim_out")
    plot: bool = False
    sign_epsilon: float | None = None
    stride: int | None = None
    gains: dict[str, float] = field(default_factory=dict)
    backend: str = "auto"

    @property
    def file(self) -> Path | None:
        return Path(self.scenario[5:]) if self.scenario.startswith("file:") else None


def _scenario_arg(v: str) -> str:
    if v.lower() in ("a", "b"):
        return v.lower()
    if v.startswith("file:") and len(v) > 5:
        return v
    raise argparse.ArgumentTypeError("expected a, b or file:PATH")


def _positive(v: str) -> float:
    x = float(v)
    if not (math.isfinite(x) and x > 0):
        raise argparse.ArgumentTypeError("must be a positive number")
    return x


def _nonneg(v: str) -> float:
    x = float(v)
    if not (math.isfinite(x) and x >= 0):
        raise argparse.ArgumentTypeError("must be a nonnegative number")
    return x


def _stride(v: str) -> int:
    k = int(v)
    if k < 1:
        raise argparse.ArgumentTypeError("must be an integer >= 1")
    return k


def _gain(v: str) -> tuple[str, float]:
    name, sep, val = v.partition("=")
    if not sep or name not in GAIN_KEYS:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {', '.join(GAIN_KEYS)}")
    return name, float(val)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dto-sim", description="Simulate distributed time-varying optimization with sliding-mode disturbance rejection.")
    p.add_argument("--scenario", required=True, type=_scenario_arg, help="a (ring), b (path) or file:PATH to a TOML scenario")
    p.add_argument("--dt", type=_positive, help="Euler step in seconds (default 1e-4)")
    p.add_argument("--t-end", type=_positive, help="final time in seconds (default 20)")
    p.add_argument("--out", type=Path, default=None, help="output directory (default $DTO_SIM_OUT or ./dto_sim_out)")
    p.add_argument("--plot", action="store_true", help="also write states.svg, constraints.svg, manifold.svg")
    p.add_argument("--sign-epsilon", type=_nonneg, help="boundary-layer width for sign terms (default 0)")
    p.add_argument("--stride", type=_stride, help="record every STRIDE-th step (default 100)")
    p.add_argument("--gain", type=_gain, action="append", default=[], metavar="NAME=VALUE", help="override a controller gain; repeatable")
    p.add_argument("--backend", choices=sim.BACKEND_CHOICES, default="auto", help="integration backend")
    return p


def parse_args(argv=None) -> RunSpec:
    parser = build_parser()
    a = parser.parse_args(argv)
    out = a.out if a.out is not None else Path(os.environ.get("DTO_SIM_OUT") or "dto_sim_out")
    return RunSpec(a.scenario, a.dt, a.t_end, out, a.plot, a.sign_epsilon, a.stride, dict(a.gain), a.backend)


# scenario files ---------------------------------------------------------------------


def _number(doc, key, positive=False):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"{key!r} must be a {'positive ' if positive else ''}finite number, got {v!r}")
    return float(v)


def _table(doc, key, names):
    tab = doc[key]
    if not isinstance(tab, dict) or set(tab) - set(names):
        raise ConfigError(f"[{key}] accepts only {', '.join(names)}")
    return {k: _number(tab, k) for k in tab}


def load_scenario_file(path) -> tuple[ProblemInstance, dict]:
    """Instance plus run overrides (dt, t_end, sign_epsilon) from a TOML file."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(doc) - FILE_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "factory" in doc:
        mod, _, fn = str(doc["factory"]).partition(":")
        try:
            inst = getattr(importlib.import_module(mod), fn)()
        except (ImportError, AttributeError, ValueError) as exc:
            raise ConfigError(f"factory {doc['factory']!r} failed: {exc}") from None
        if not isinstance(inst, ProblemInstance):
            raise ConfigError(f"factory {doc['factory']!r} did not return a ProblemInstance")
    else:
        try:
            inst = scenario(str(doc.get("scenario", "a")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    if "nodes" in doc or "edges" in doc:
        nodes = int(doc.get("nodes", inst.size))
        if nodes != inst.size:
            raise ConfigError(f"nodes={nodes} but the base instance has {inst.size} agents")
        try:
            edges = [(int(i), int(j)) for i, j in doc.get("edges", [])]
        except (TypeError, ValueError):
            raise ConfigError("edges must be a list of [i, j] pairs") from None
        try:
            inst = inst._replace(graph=build_graph(nodes, edges))
        except GraphError as exc:
            raise ConfigError(f"invalid graph: {exc}") from None
    if "barrier" in doc:
        fields = dict(zip(("a1", "a2", "a3", "a4"), inst.agents[0].barrier.as_tuple()))
        fields.update(_table(doc, "barrier", ("a1", "a2", "a3", "a4")))
        try:
            bar = BarrierSchedule(**fields)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        inst = inst._replace(agents=tuple(a.__class__(a.cost, a.constraints, bar, a.disturbance, a.initial_state) for a in inst.agents))
    if "gains" in doc:
        try:
            inst = inst._replace(gains=inst.gains.replace(**_table(doc, "gains", GAIN_KEYS)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "initial_state" in doc:
        try:
            x0 = np.asarray(doc["initial_state"], dtype=float).reshape(inst.size, inst.dimension)
        except (TypeError, ValueError):
            raise ConfigError(f"initial_state must hold {inst.size} states of dimension {inst.dimension}") from None
        inst = inst.with_initial_states(x0)
    overrides = {}
    for key, positive in (("dt", True), ("t_end", True), ("sign_epsilon", False)):
        if key in doc:
            overrides[key] = _number(doc, key, positive)
    return inst, overrides


def build_config(spec: RunSpec) -> sim.SimConfig:
    if spec.file is not None:
        inst, kw = load_scenario_file(spec.file)
    else:
        inst, kw = scenario(spec.scenario), {}
    for key in ("dt", "t_end", "sign_epsilon"):
        if getattr(spec, key) is not None:
            kw[key] = getattr(spec, key)
    if spec.stride is not None:
        kw["record_stride"] = spec.stride
    gains = inst.gains
    if spec.gains:
        try:
            gains = gains.replace(**spec.gains)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return sim.SimConfig(inst, gains=gains, backend=spec.backend, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(v) -> str:
    return "none" if v is None else f"{v:.6g}"


def run_command(spec: RunSpec) -> int:
    try:
        config = build_config(spec)
    except ConfigError as exc:
        print(f"dto-sim: error: {exc.diagnostic()}", file=sys.stderr)
        return 2
    try:
        traj = sim.run(config)
        series = sim.summary(traj)
        spec.out.mkdir(parents=True, exist_ok=True)
        io.write_agents_csv(traj, spec.out / "agents.csv")
        io.write_summary_csv(series, spec.out / "summary.csv")
        if spec.plot:
            from .svgplot import emit_plots

            emit_plots(traj, spec.out, optimum=sim.optimum_series(traj)[0], reaching_time=sim.reaching_bound(traj))
    except DtoError as exc:
        print(f"dto-sim: error: {exc.diagnostic()}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dto-sim: error: [cli] cannot write output: {exc}", file=sys.stderr)
        return 1
    print(
        f"scenario={config.instance.name} backend={traj.backend} "
        f"T2={_fmt(sim.consensus_time(traj))} "
        f"final_consensus_error={_fmt(series['consensus_error'][-1])} "
        f"final_tracking_err_penalized={_fmt(series['tracking_err_penalized'][-1])} "
        f"max_margin={_fmt(sim.max_margin(traj))} "
        f"out={spec.out}"
    )
    return 0


def main(argv=None) -> int:
    try:
        spec = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run_command(spec)


if __name__ == "__main__":
    sys.exit(main())
