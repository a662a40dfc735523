"""Static trajectory rendering from trial trace files.

Produces a vector image of the grid with obstacles, object markers, the
belief shading from the last recorded snapshot, and one viewpoint glyph
(circle plus heading tick) per step.  Output is byte-stable for identical
traces: the SVG hash salt is pinned and no timestamps are embedded.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

_HEADING_XY = {
    0: (1, 0), 45: (1, 1), 90: (0, 1), 135: (-1, 1),
    180: (-1, 0), 225: (-1, -1), 270: (0, -1), 315: (1, -1),
}


def render_trajectory(trace: dict, out: str | Path) -> Path:
    """Draw a trace (as written by the trial runner) to ``out``."""
    sc = trace["scenario"]
    grid = sc["map"]
    w, h = grid["width"], grid["height"]
    steps = trace.get("steps", [])

    plt.rcParams["svg.hashsalt"] = "corrsearch"
    fig, ax = plt.subplots(figsize=(max(4, w * 0.45), max(4, h * 0.45)))
    ax.set_xlim(-0.5, w - 0.5)
    ax.set_ylim(-0.5, h - 0.5)
    ax.set_aspect("equal")
    ax.set_xticks(range(w))
    ax.set_yticks(range(h))
    ax.grid(True, color="0.85", linewidth=0.5)
    ax.tick_params(labelsize=6)

    belief = None
    for step in reversed(steps):
        if "belief" in step:
            belief = step["belief"]
            break
    if belief:
        peak = max(belief.values()) or 1.0
        for key, p in sorted(belief.items()):
            if p <= 0:
                continue
            c, r = (int(v) for v in key.split(","))
            ax.add_patch(
                Rectangle((c - 0.5, r - 0.5), 1, 1, color="tab:orange",
                          alpha=min(0.85, 0.85 * p / peak), linewidth=0)
            )

    for c, r in sorted(map(tuple, grid.get("obstacles", []))):
        ax.add_patch(Rectangle((c - 0.5, r - 0.5), 1, 1, color="0.3", linewidth=0))

    tc = sc["target"]["cell"]
    ax.plot(tc[0], tc[1], marker="*", markersize=14, color="tab:red", zorder=5)
    for obj in sc.get("objects", []):
        oc = obj["cell"]
        ax.plot(oc[0], oc[1], marker="s", markersize=9, color="tab:blue", zorder=5)

    ip = sc["init_pose"]
    poses = [(ip["cell"][0], ip["cell"][1], ip["heading"])]
    poses += [tuple(step["pose"]) for step in steps]
    xs = [p[0] for p in poses]
    ys = [p[1] for p in poses]
    ax.plot(xs, ys, "-", color="tab:green", linewidth=1.2, alpha=0.8, zorder=3)
    for i, (x, y, heading) in enumerate(poses):
        dx, dy = _HEADING_XY[heading]
        norm = (dx * dx + dy * dy) ** 0.5
        ax.plot(x, y, "o", markersize=5, color="tab:green",
                alpha=0.5 + 0.5 * (i + 1) / len(poses), zorder=4)
        ax.plot([x, x + 0.4 * dx / norm], [y, y + 0.4 * dy / norm],
                "-", color="black", linewidth=1.0, zorder=4)

    ax.set_title(
        f"{sc.get('name', '?')} | {trace.get('agent', '?')} | "
        f"seed {trace.get('seed', '?')}",
        fontsize=8,
    )
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=out.suffix.lstrip(".") or "svg",
                metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return out


def render_trace_file(trace_path: str | Path, out: str | Path) -> Path:
    with open(trace_path) as fh:
        return render_trajectory(json.load(fh), out)
