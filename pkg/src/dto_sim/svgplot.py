"""Self-contained SVG line plots of a trajectory, written as plain text."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def line_plot(series, title: str, xlabel: str, ylabel: str, hlines=(), vlines=()) -> str:
    """``series``: iterable of ``(label, x, y, dashed)``. ``hlines``/``vlines``: ``(value, label)``."""
    series = [(lab, np.asarray(x, float), np.asarray(y, float), dash) for lab, x, y, dash in series]
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series] + [np.array([v for v, _ in hlines], float)])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) or 1.0
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    X = lambda v: LEFT + (v - x0) / (x1 - x0) * pw
    Y = lambda v: TOP + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{X(v):.2f}" y1="{TOP + ph}" x2="{X(v):.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{LEFT - 5}" y1="{Y(v):.2f}" x2="{LEFT}" y2="{Y(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{Y(v) + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    out.append(f'<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>')
    legend = []
    for v, lab in hlines:
        out.append(f'<line x1="{LEFT}" y1="{Y(v):.2f}" x2="{LEFT + pw}" y2="{Y(v):.2f}" stroke="gray" stroke-dasharray="4 3"/>')
        legend.append((lab, "gray", True))
    for v, lab in vlines:
        if x0 <= v <= x1:
            out.append(f'<line x1="{X(v):.2f}" y1="{TOP}" x2="{X(v):.2f}" y2="{TOP + ph}" stroke="black" stroke-dasharray="2 3"/>')
            legend.append((lab, "black", True))
    for k, (lab, x, y, dash) in enumerate(series):
        color = "black" if dash else COLORS[k % len(COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x[ok], y[ok]))
        extra = ' stroke-dasharray="6 4"' if dash else ""
        out.append(f'<polyline clip-path="url(#plot)" fill="none" stroke="{color}" stroke-width="1.4"{extra} points="{pts}"/>')
        legend.append((lab, color, dash))
    lx = LEFT + pw + 15
    for k, (lab, color, dash) in enumerate(legend):
        ly = TOP + 12 + 18 * k
        extra = ' stroke-dasharray="6 4"' if dash else ""
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"{extra}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(traj, out_dir, optimum=None, reaching_time=None) -> list[Path]:
    """Write ``states.svg``, ``constraints.svg`` and ``manifold.svg`` into ``out_dir``.

    ``optimum``: optional ``(R, n)`` array overlaid on the state plot.
    """
    if len(traj.times) == 0:
        raise ValueError("cannot plot an empty trajectory")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = traj.times
    N, n = traj.states.shape[1:]
    comp = lambda k: f"[{k + 1}]" if n > 1 else ""

    states = [(f"x{i + 1}{comp(k)}", t, traj.states[:, i, k], False) for i in range(N) for k in range(n)]
    if optimum is not None:
        states += [(f"x*{comp(k)}", t, np.asarray(optimum)[:, k], True) for k in range(n)]
    cons = [
        (f"agent {i + 1}" + (f" g{j + 1}" if m.shape[1] > 1 else ""), t, m[:, j], False)
        for i, m in enumerate(traj.margins)
        for j in range(m.shape[1])
    ]
    if not cons:
        cons = [("no constraints", t, np.zeros_like(t), False)]
    manifold = [(f"agent {i + 1}", t, np.abs(traj.sliding[:, i, :]).max(axis=1), False) for i in range(N)]
    vlines = [(reaching_time, "T_d bound")] if reaching_time is not None else []

    docs = {
        "states.svg": line_plot(states, "State trajectories", "t [s]", "x"),
        "constraints.svg": line_plot(cons, "Constraint margins", "t [s]", "g(x, t) - sigma(t)", hlines=[(0.0, "zero")]),
        "manifold.svg": line_plot(manifold, "Sliding manifold", "t [s]", "||s||_inf", vlines=vlines),
    }
    paths = []
    for name, text in docs.items():
        p = out_dir / name
        p.write_text(text)
        paths.append(p)
    return paths
