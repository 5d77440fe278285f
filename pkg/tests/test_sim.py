import math

import numpy as np
import pytest

from dto_sim import sim
from dto_sim.controller import ControllerState, nominal_control, sliding_control
from dto_sim.errors import InfeasibleError, SimulationError
from dto_sim.graph import build_graph
from dto_sim.penalty import BarrierSchedule
from dto_sim.problem import SCENARIO_GAINS, AffineConstraint, AgentProblem, HarmonicSignal, ProblemInstance, QuadraticTracking, scenario_a

h = HarmonicSignal.make


def _edge_instance(push):
    """One agent near the wall ``x < 1`` with a constant push ``push``."""
    bar = BarrierSchedule(1.0, 1e-9, 1.0, 1e-9)
    agent = AgentProblem(QuadraticTracking(1.0, h()), (AffineConstraint([1.0], h()),), bar, h(offset=push), [0.9])
    return ProblemInstance(build_graph(1, []), (agent,), 1, abs(push), SCENARIO_GAINS.replace(k0=abs(push) + 1))


def test_config_invariants():
    inst = scenario_a()
    for bad in (dict(dt=0.0), dict(dt=-1e-3), dict(t_end=-1.0), dict(record_stride=0), dict(record_stride=1.5), dict(sign_epsilon=-1), dict(backend="gpu")):
        with pytest.raises(ValueError):
            sim.SimConfig(inst, **bad)
    cfg = sim.SimConfig(inst)
    assert cfg.gains == SCENARIO_GAINS and cfg.n_steps == 200_000


def test_step_zero_input_keeps_state():
    cfg = sim.SimConfig(scenario_a(), sliding=False, disturbances=False)
    x = np.array([[-2.0], [-1.0], [1.0], [3.0]])
    zero = (np.zeros_like(x),) * 3
    x1, c1 = sim.step(x, ControllerState.zeros(4, 1), 0.0, 1e-3, cfg, inputs=zero)
    np.testing.assert_array_equal(x1, x)
    np.testing.assert_array_equal(c1.z, 0.0)


def test_step_disturbance_only():
    cfg = sim.SimConfig(scenario_a())
    x = np.array([[-2.0], [-1.0], [1.0], [3.0]])
    d = np.array([[a.disturbance(0.0)[0]] for a in cfg.instance.agents])
    x1, _ = sim.step(x, ControllerState.zeros(4, 1), 0.0, 1e-3, cfg, inputs=(np.zeros_like(x), np.zeros_like(x), d))
    assert x1[2, 0] == pytest.approx(1.002, abs=1e-15)


def test_step_matches_hand_composition():
    inst = scenario_a()
    cfg = sim.SimConfig(inst)
    x = np.array([[-2.0], [-1.0], [1.0], [3.0]])
    dt = 1e-3
    x1, c1 = sim.step(x, ControllerState.zeros(4, 1), 0.0, dt, cfg)
    for i, a in enumerate(inst.agents):
        u1 = nominal_control(i, x, 0.0, inst.graph, a, 3.0)
        u2 = sliding_control(x[i], SCENARIO_GAINS)
        assert x1[i, 0] == pytest.approx(x[i, 0] + dt * (u1[0] + u2[0] + a.disturbance(0.0)[0]), abs=1e-14)
        assert c1.z[i, 0] == pytest.approx(dt * u1[0], abs=1e-15)


def test_retry_recovers_and_backends_agree(monkeypatch):
    cfg = sim.SimConfig(_edge_instance(2.0), dt=0.2, t_end=2.0, record_stride=1)
    hits = []
    check = sim._first_violation

    def spy(*args):
        bad = check(*args)
        hits.append(bad)
        return bad

    monkeypatch.setattr(sim, "_first_violation", spy)
    tg = sim.run(cfg.replace(backend="generic"))
    assert 0 in hits  # a full step left the domain and the substeps recovered
    tk = sim.run(cfg.replace(backend="python"))
    np.testing.assert_allclose(tg.states, tk.states, rtol=1e-13)
    np.testing.assert_allclose(tg.sliding, tk.sliding, rtol=1e-13, atol=1e-15)
    assert np.all(tk.margins[0] < 0)


@pytest.mark.parametrize("backend", ["generic", "python"])
def test_retry_failure_reports_time_and_agent(backend):
    cfg = sim.SimConfig(_edge_instance(100.0), dt=0.1, t_end=1.0, sliding=False, backend=backend)
    with pytest.raises(SimulationError) as exc:
        sim.run(cfg)
    assert exc.value.agent == 1
    assert exc.value.time is not None and exc.value.time <= 0.1 + 1e-12
    assert "[sim]" in exc.value.diagnostic()


def test_run_preconditions():
    with pytest.raises(InfeasibleError):
        sim.run(sim.SimConfig(scenario_a().with_initial_states([40, 0, 0, 0])))
    with pytest.raises(sim.GainError):
        sim.run(sim.SimConfig(scenario_a(), gains=SCENARIO_GAINS.replace(k0=4.0)))


def test_t_end_zero():
    tr = sim.run(sim.SimConfig(scenario_a(), t_end=0.0))
    assert tr.times.tolist() == [0.0]
    np.testing.assert_array_equal(tr.states[0, :, 0], [-2, -1, 1, 3])


def test_recording_grid():
    tr = sim.run(sim.SimConfig(scenario_a(), t_end=0.0105, record_stride=20))
    n = len(tr)
    assert tr.times[-1] == pytest.approx(0.0105)
    assert all(getattr(tr, f).shape == (n, 4, 1) for f in ("states", "sliding", "u1", "u2", "disturbance"))
    assert all(m.shape == (n, 1) and np.all(np.isfinite(m)) for m in tr.margins)


def test_trajectory_metrics_at_start(traj_a):
    assert sim.consensus_error(traj_a, 0.0) == 5.0
    assert sim.manifold_norms(traj_a)[0] == 3.0
    true, pen = sim.tracking_errors(traj_a)
    assert true[0] == pytest.approx(2.75, abs=1e-12)
    assert len(true) == len(pen) == len(traj_a)
    with pytest.raises(KeyError):
        sim.consensus_error(traj_a, 0.005)
    assert sim.consensus_error(traj_a, 0.004, exact=False) == sim.consensus_error(traj_a, 0.0)


def test_tracking_zero_at_optimum():
    inst = scenario_a()
    tr = sim.run(sim.SimConfig(inst, t_end=0.0))
    x_star = sim.optimal_trajectory(inst, 0.0)
    tr.states[:] = x_star
    true, _ = sim.tracking_errors(tr)
    assert true[0] == 0.0


def test_consensus_time_rule():
    tr = sim.run(sim.SimConfig(scenario_a(), t_end=0.0))
    tr.times = np.arange(6.0)
    base = np.array([0.0, 1.0, 0.0, 0.0])[None, :, None]
    for errs, expect in (([1, 0.005, 0.015, 0.005, 0.001, 0.0], 1.0), ([1, 0.005, 0.03, 0.005, 0.001, 0.0], 3.0), ([1] * 6, None)):
        tr.states = base * np.array(errs)[:, None, None]
        assert sim.consensus_time(tr) == expect


def test_manifold_zero_without_disturbance():
    tr = sim.run(sim.SimConfig(scenario_a().with_initial_states([0, 0, 0, 0]), disturbances=False, t_end=2.0))
    assert np.abs(tr.sliding).max() < 1e-12


def test_determinism():
    cfg = sim.SimConfig(scenario_a(), t_end=2.0)
    a, b = sim.run(cfg), sim.run(cfg)
    for f in ("times", "states", "sliding", "u1", "u2", "disturbance"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_constraint_margins_match_definition(traj_a):
    for i, a in enumerate(traj_a.instance.agents):
        for r in (0, 500, 2000):
            t, x = traj_a.times[r], traj_a.states[r, i]
            g = a.constraints[0].value(x, t) - a.barrier.sigma(t)
            assert traj_a.margins[i][r, 0] == pytest.approx(g, abs=1e-14)


def test_step_size_robustness(traj_a):
    half = sim.run(sim.SimConfig(scenario_a(), dt=5e-5, record_stride=200))
    assert np.abs(half.states[-1] - traj_a.states[-1]).max() < 1e-2
    band_full = sim.manifold_norms(traj_a)[traj_a.times > 2].max()
    band_half = sim.manifold_norms(half)[half.times > 2].max()
    assert band_half == pytest.approx(band_full / 2, rel=0.1)


def test_nominal_flow_ablation(traj_a):
    # with u2 and d off the consensus error behaves like the full run
    abl = sim.run(sim.SimConfig(scenario_a(), disturbances=False, sliding=False))
    late = traj_a.times > 3
    full_err = sim.consensus_errors(traj_a)[late]
    abl_err = sim.consensus_errors(abl)[late]
    assert abs(full_err.max() - abl_err.max()) < 0.05
    assert np.abs(full_err - abl_err).max() < 0.05


def test_summary_series(traj_a):
    s = sim.summary(traj_a)
    assert list(s) == ["t", "consensus_error", "tracking_err_true", "tracking_err_penalized", "global_cost", "manifold_norm"]
    assert all(len(v) == len(traj_a) for v in s.values())
    assert s["global_cost"][0] == pytest.approx(9 + 2 - 5 + 9, abs=1e-12)
