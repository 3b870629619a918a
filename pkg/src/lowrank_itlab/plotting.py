"""SVG figures for sweep results.

Figures are rendered with the Agg backend, text kept as SVG text, a fixed
hash salt and no date stamp, so the same rows always give the same bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_RC = {
    "svg.hashsalt": "lowrank-itlab",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "lines.markersize": 5,
}

_LABELS = {
    "n": "samples n",
    "pe_hat": "error rate",
    "coverage_fail_hat": "coverage failure rate",
    "m": "matrix side m",
    "n_star": "threshold n*",
}


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_svg_curve(
    rows: Sequence,
    x_field: str,
    y_field: str,
    path: str | Path,
    log_y: bool = False,
    title: str | None = None,
) -> None:
    """One line per (m, r, q, semiring) group; a single row draws a single marker."""
    rows = [row for row in rows if getattr(row, y_field) is not None]
    if not rows:
        raise ValueError("no rows to plot")
    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault(row.key, []).append(row)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for (m, r, q, semiring), grp in sorted(groups.items()):
            grp = sorted(grp, key=lambda row: getattr(row, x_field))
            xs = [getattr(row, x_field) for row in grp]
            ys = [getattr(row, y_field) for row in grp]
            if log_y:
                pts = [(x, y) for x, y in zip(xs, ys) if y > 0]
                xs, ys = [p[0] for p in pts], [p[1] for p in pts]
            label = f"m={m} r={r} q={q}" + ("" if semiring == "integer" else " mod q")
            ax.plot(xs, ys, marker="o", label=label)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel(_LABELS.get(x_field, x_field))
        ax.set_ylabel(_LABELS.get(y_field, y_field))
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        _save(fig, path)


def emit_threshold_svg(table, path: str | Path) -> None:
    """Empirical threshold n*(m) against the c*m and c*m*ln(m) reference curves."""
    ms = [e.m for e in table.entries]
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(ms, [e.n_star for e in table.entries], marker="o", label="n*(m)")
        ax.plot(ms, [table.reference_linear(m) for m in ms], ls="--", label="c m")
        if not math.isnan(table.mlogm_coeff):
            ax.plot(ms, [table.reference_mlogm(m) for m in ms], ls=":", label="c m ln m")
        ax.set_xlabel(_LABELS["m"])
        ax.set_ylabel(_LABELS["n_star"])
        ax.set_title(f"target error rate {table.target_pe:g}")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        _save(fig, path)
