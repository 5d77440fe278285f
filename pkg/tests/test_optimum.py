import math

import numpy as np
import pytest

from dto_sim.graph import build_graph
from dto_sim.optimum import golden_section, optimal_trajectory, penalized_optimal_trajectory
from dto_sim.penalty import BarrierSchedule, penalized_gradient
from dto_sim.problem import (
    SCENARIO_GAINS,
    AffineConstraint,
    AgentProblem,
    HarmonicSignal,
    ProblemInstance,
    QuadraticTracking,
    scenario_a,
)

h = HarmonicSignal.make


def closed_form(t):
    return min((math.cos(t) - math.sin(t)) / 4, math.cos(t))


def _single(constraints=(), ref=None):
    agent = AgentProblem(QuadraticTracking(1.0, ref or h(sin_amp=1.0)), constraints, BarrierSchedule(10, 0.05, 30, 1), h(), [0.0])
    return ProblemInstance(build_graph(1, []), (agent,), 1, 0.0, SCENARIO_GAINS)


def test_golden_section():
    assert golden_section(lambda x: (x - 0.3) ** 2, -2, 5, tol=1e-12) == pytest.approx(0.3, abs=1e-6)
    assert golden_section(lambda x: abs(x - 0.3), -2, 5, tol=1e-12) == pytest.approx(0.3, abs=1e-11)


def test_scenario_a_examples():
    inst = scenario_a()
    assert optimal_trajectory(inst, 0.0)[0] == pytest.approx(0.25, abs=1e-12)
    assert optimal_trajectory(inst, math.pi)[0] == pytest.approx(-1.0, abs=1e-12)


def test_unconstrained_single_agent():
    for t in (0.0, 0.9, 2.5):
        assert optimal_trajectory(_single(), t)[0] == pytest.approx(math.sin(t), abs=1e-12)


def test_penalized_optimum_examples():
    inst = scenario_a()
    xp = penalized_optimal_trajectory(inst, 0.0)
    assert abs(xp[0] - 0.25) < 0.02
    r = sum(penalized_gradient(a, xp, 0.0) for a in inst.agents)
    assert abs(r[0]) < 1e-10
    free = _single()
    assert penalized_optimal_trajectory(free, 1.2)[0] == pytest.approx(math.sin(1.2), abs=1e-12)


def test_penalized_gap_on_grid():
    # the barrier gap shrinks overall but not monotonically: an active
    # constraint couples it to the phase of cos t
    inst = scenario_a()
    gaps = [abs(penalized_optimal_trajectory(inst, t)[0] - optimal_trajectory(inst, t)[0]) for t in (0, 5, 10, 15, 20)]
    assert gaps[0] < 0.02
    assert max(gaps) < 0.2
    assert gaps[-1] < gaps[1]


def test_vector_optimum_matches_projection():
    # min |x - c|^2 s.t. a.x <= b has the closed-form projection
    a, b, c = np.array([1.0, 2.0]), 0.5, np.array([1.0, 1.0])
    agent = AgentProblem(
        QuadraticTracking(1.0, h(offset=c)), (AffineConstraint(a, h(offset=b)),), BarrierSchedule(10, 0.05, 30, 1), h(dim=2), [0.0, 0.0]
    )
    inst = ProblemInstance(build_graph(1, []), (agent,), 2, 0.0, SCENARIO_GAINS)
    expect = c - (a @ c - b) / (a @ a) * a
    np.testing.assert_allclose(optimal_trajectory(inst, 0.0), expect, atol=1e-7)
