import pytest

from dto_sim import SimConfig, run, scenario_a, scenario_b

# criterion id -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        title, passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {key:>4} {title}: {detail}")


@pytest.fixture(scope="session")
def traj_a():
    return run(SimConfig(scenario_a()))


@pytest.fixture(scope="session")
def traj_b():
    return run(SimConfig(scenario_b()))
