"""CSV recording of trajectories.

Floats are written with ``repr`` (shortest round-tripping decimal), so values
read back compare equal to the in-memory records.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .sim import Trajectory

SUMMARY_COLUMNS = ("t", "consensus_error", "tracking_err_true", "tracking_err_penalized", "global_cost", "manifold_norm")


def agent_header(dim: int, constraints: int) -> list[str]:
    cols = ["t", "agent"]
    for prefix in ("x", "s", "u1", "u2"):
        cols += [f"{prefix}_{k}" for k in range(1, dim + 1)]
    cols += [f"g_margin_{j}" for j in range(1, constraints + 1)]
    cols += [f"d_{k}" for k in range(1, dim + 1)]
    return cols


def _fmt(v) -> str:
    return repr(float(v))


def write_agents_csv(traj: Trajectory, path) -> Path:
    """One row per recorded time per agent. Agents are numbered from 1.

    Agents with fewer constraints than the widest one leave the trailing
    margin cells empty.
    """
    path = Path(path)
    q = max((m.shape[1] for m in traj.margins), default=0)
    n = traj.states.shape[2]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(agent_header(n, q))
        for r, t in enumerate(traj.times):
            for i in range(traj.states.shape[1]):
                row = [_fmt(t), str(i + 1)]
                for arr in (traj.states, traj.sliding, traj.u1, traj.u2):
                    row += [_fmt(v) for v in arr[r, i]]
                m = traj.margins[i][r]
                row += [_fmt(v) for v in m] + [""] * (q - m.size)
                row += [_fmt(v) for v in traj.disturbance[r, i]]
                w.writerow(row)
    return path


def write_summary_csv(series: dict[str, np.ndarray], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in zip(*(series[c] for c in SUMMARY_COLUMNS)):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a CSV written by this module; empty cells become NaN."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [()] * len(header)
    out = {}
    for name, vals in zip(header, cols):
        if name == "agent":
            out[name] = np.array([int(v) for v in vals], dtype=int)
        else:
            out[name] = np.array([float(v) if v else np.nan for v in vals], dtype=float)
    return out
