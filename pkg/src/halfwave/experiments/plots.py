"""Report figures: decay curves and shell series rendered to SVG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.figsize": (6.4, 4.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "halfwave",
})


def _group_series(report):
    groups: dict[str, list] = {}
    for s in report.series:
        base = s.tag.split(":")[0]
        groups.setdefault(base, []).append(s)
    return groups


def plot_report_figures(report, out_dir: Path) -> dict[str, Path]:
    """One log-log figure per series family, certified envelopes overlaid."""
    out: dict[str, Path] = {}
    envelopes = {
        c["id"]: c for c in report.certificates if isinstance(c, dict) and "envelope" in c
    }
    for base, group in _group_series(report).items():
        fig, ax = plt.subplots()
        drew = False
        for s in group:
            pos = s.values > 0
            if pos.sum() < 2:
                continue
            label = s.tag if s.shell is None else f"{s.tag} (n={s.shell})"
            ax.loglog(s.times[pos], s.values[pos], marker=".", lw=1.0, label=label)
            drew = True
        if not drew:
            plt.close(fig)
            continue
        env = envelopes.get(base)
        if env and "slope_max" in env.get("envelope", {}):
            t0 = group[0].times
            ref = group[0].values[group[0].values > 0]
            if len(ref):
                level = ref[0] * (t0[0] ** 0.9)
                ax.loglog(t0, level * t0 ** (-0.9), "k--", lw=0.8, label="t^-0.9 envelope")
        ax.set_xlabel("t")
        ax.set_ylabel(base)
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = Path(out_dir) / f"{report.label}_{base}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        out[f"svg:{base}"] = path
    return out
