import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dto_sim import cli, io, sim
from dto_sim.problem import scenario_a

SUMMARY = re.compile(r"T2=(\S+) final_consensus_error=(\S+) final_tracking_err_penalized=(\S+) max_margin=(\S+)")


def _summary(out):
    m = SUMMARY.search(out)
    assert m, out
    return [None if v == "none" else float(v) for v in m.groups()]


def test_parse_args_examples(tmp_path, monkeypatch):
    monkeypatch.delenv("DTO_SIM_OUT", raising=False)
    spec = cli.parse_args(["--scenario", "a", "--t-end", "20"])
    assert spec.scenario == "a" and spec.t_end == 20.0 and spec.dt is None and not spec.plot
    monkeypatch.setenv("DTO_SIM_OUT", str(tmp_path))
    spec = cli.parse_args(["--scenario", f"file:{tmp_path}/x.toml", "--gain", "beta=4.5", "--stride", "10", "--plot"])
    assert spec.file.name == "x.toml" and spec.gains == {"beta": 4.5} and spec.out == tmp_path and spec.stride == 10


@pytest.mark.parametrize(
    "argv, flag",
    [
        ([], "--scenario"),
        (["--scenario", "a", "--dt", "0"], "--dt"),
        (["--scenario", "a", "--dt", "abc"], "--dt"),
        (["--scenario", "c"], "--scenario"),
        (["--scenario", "a", "--stride", "0"], "--stride"),
        (["--scenario", "a", "--bogus"], "--bogus"),
        (["--scenario", "a", "--gain", "gamma=1"], "--gain"),
    ],
)
def test_usage_errors(argv, flag, capsys):
    assert cli.main(argv) == 2
    err = capsys.readouterr().err
    assert "usage:" in err and flag in err


def test_scenario_a_run(tmp_path, capsys):
    code = cli.main(["--scenario", "a", "--t-end", "2", "--stride", "50", "--out", str(tmp_path), "--plot"])
    assert code == 0
    t2, cons, track, margin = _summary(capsys.readouterr().out)
    assert margin < 0
    agents = io.read_csv(tmp_path / "agents.csv")
    summary = io.read_csv(tmp_path / "summary.csv")
    assert (tmp_path / "agents.csv").read_text().splitlines()[0] == "t,agent,x_1,s_1,u1_1,u2_1,g_margin_1,d_1"
    assert (tmp_path / "summary.csv").read_text().splitlines()[0] == "t,consensus_error,tracking_err_true,tracking_err_penalized,global_cost,manifold_norm"
    assert summary["consensus_error"][-1] == pytest.approx(cons, rel=1e-5)
    assert agents["g_margin_1"].max() == pytest.approx(margin, rel=1e-4)
    assert len(agents["t"]) == 4 * len(summary["t"]) == 4 * 401
    for name in ("states.svg", "constraints.svg", "manifold.svg"):
        root = ET.parse(tmp_path / name).getroot()
        assert root.tag.endswith("svg")
        assert root.findall(".//{http://www.w3.org/2000/svg}polyline")
    # constraint plot data sits below the zero line after t=1
    late = agents["t"] > 1
    assert np.all(agents["g_margin_1"][late] < 0)


def test_infeasible_file_exits_1(tmp_path, capsys):
    f = tmp_path / "bad.toml"
    f.write_text('scenario = "a"\ninitial_state = [40, -1, 1, 3]\n')
    assert cli.main(["--scenario", f"file:{f}", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "[problem]" in err and "g_ij(x_i(0), 0) < sigma_i(0)" in err and "agent=1" in err and "t=0" in err


def test_runtime_failure_exits_1(tmp_path, capsys):
    f = tmp_path / "gain.toml"
    f.write_text("[gains]\nk0 = 4.0\n")
    assert cli.main(["--scenario", f"file:{f}", "--out", str(tmp_path)]) == 1
    assert "D0=5" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    ["nodes = 3\n", "edges = [[1, 1]]\n", "[gains]\nrho1 = 2.0\n", "colour = 1\n", "dt = -1\n", "initial_state = [1, 2]\n", "scenario = 'zzz'\n", "dt = \n"],
)
def test_bad_files_exit_2(tmp_path, text, capsys):
    f = tmp_path / "s.toml"
    f.write_text(text)
    assert cli.main(["--scenario", f"file:{f}", "--out", str(tmp_path)]) == 2
    assert "[cli]" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert cli.main(["--scenario", f"file:{tmp_path}/nope.toml"]) == 2


def test_file_overrides(tmp_path):
    f = tmp_path / "s.toml"
    f.write_text(
        'scenario = "a"\nnodes = 4\nedges = [[1, 2], [2, 3], [3, 4]]\ndt = 2e-4\nt_end = 0.5\nsign_epsilon = 1e-3\n'
        "initial_state = [-1, 0, 0.5, 1]\n[barrier]\na1 = 20.0\n[gains]\nbeta = 4.5\n"
    )
    cfg = cli.build_config(cli.parse_args(["--scenario", f"file:{f}", "--t-end", "0.25"]))
    assert cfg.dt == 2e-4 and cfg.t_end == 0.25 and cfg.sign_epsilon == 1e-3
    assert cfg.gains.beta == 4.5 and cfg.instance.graph.edge_count == 3
    assert cfg.instance.agents[0].barrier.a1 == 20.0
    assert [a.initial_state[0] for a in cfg.instance.agents] == [-1, 0, 0.5, 1]


def test_factory(tmp_path):
    f = tmp_path / "s.toml"
    f.write_text('factory = "dto_sim.problem:scenario_b"\n')
    cfg = cli.build_config(cli.parse_args(["--scenario", f"file:{f}"]))
    assert cfg.instance.name == "b"


def test_default_out_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DTO_SIM_OUT", str(tmp_path / "envout"))
    assert cli.main(["--scenario", "b", "--t-end", "0.1"]) == 0
    assert (tmp_path / "envout" / "summary.csv").exists()


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--scenario", "a", "--t-end", "0.1", "--out", str(blocker / "sub")]) == 1
    assert "[cli]" in capsys.readouterr().err


def test_topology_ordering_with_adequate_gain(tmp_path, capsys):
    # beta above the consensus-holding threshold of both graphs
    t2 = {}
    for name in ("a", "b"):
        code = cli.main(["--scenario", name, "--gain", "beta=4.5", "--stride", "1000", "--out", str(tmp_path / name)])
        assert code == 0
        t2[name], _, track, margin = _summary(capsys.readouterr().out)
        assert margin < 0 and track < 5e-2
    assert t2["a"] is not None and t2["b"] is not None and t2["b"] > t2["a"]


def test_csv_round_trip(tmp_path):
    tr = sim.run(sim.SimConfig(scenario_a(), t_end=0.5, record_stride=7))
    io.write_agents_csv(tr, tmp_path / "a.csv")
    back = io.read_csv(tmp_path / "a.csv")
    for col, arr in (("x_1", tr.states), ("s_1", tr.sliding), ("u1_1", tr.u1), ("u2_1", tr.u2), ("d_1", tr.disturbance)):
        np.testing.assert_array_equal(back[col], arr[:, :, 0].ravel())
    np.testing.assert_array_equal(back["g_margin_1"], np.concatenate(tr.margins, axis=1).ravel())
    np.testing.assert_array_equal(back["t"], np.repeat(tr.times, 4))
    np.testing.assert_array_equal(back["agent"], np.tile([1, 2, 3, 4], len(tr)))
