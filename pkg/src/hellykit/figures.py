"""Matplotlib renderings of bound reports, written next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import BoundReport


def _rows_with_values(report):
    return [r for r in report.rows if r.achieved is not None]


def _bound_label(pipeline: str) -> str:
    return {
        "volume": r"vol ratio bound $n^{(3-\delta)/2}$",
        "diameter": r"containment bound $n^{2-\delta/2}$",
        "lowerbound": r"$\sqrt{n}/\log(1+n)$ statistic",
    }.get(pipeline, "bound")


def render_report_figures(report: BoundReport, stem) -> list:
    """Write <stem>_achieved.png and <stem>_normalized.png; returns the paths."""
    stem = Path(stem)
    rows = _rows_with_values(report)
    out = []
    if not rows:
        return out
    deltas = sorted({r.delta for r in rows})
    ns = sorted({r.n for r in rows})
    constant = report.config.get("report_constant", 3.0)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for delta in deltas:
        pts = [(r.n, r.achieved) for r in rows if r.delta == delta]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, "o", alpha=0.6, label=rf"$\delta$={delta:g}")
        if report.pipeline in ("volume", "diameter"):
            exponent = (3.0 - delta) / 2.0 if report.pipeline == "volume" else 2.0 - delta / 2.0
            grid = sorted(set(xs))
            ax.plot(
                grid,
                [constant * n**exponent for n in grid],
                "--",
                alpha=0.5,
                label=rf"$3\,n^{{{exponent:g}}}$",
            )
    ax.set_xlabel("dimension n")
    ax.set_ylabel("achieved")
    ax.set_title(f"{report.pipeline}: achieved vs {_bound_label(report.pipeline)}")
    if report.pipeline in ("volume", "diameter"):
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = stem.with_name(stem.name + "_achieved.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for delta in deltas:
        pts = [(r.n, r.normalized) for r in rows if r.delta == delta and r.normalized is not None]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", alpha=0.6, label=rf"$\delta$={delta:g}")
    if report.pipeline in ("volume", "diameter"):
        ax.axhline(constant, color="k", linestyle="--", alpha=0.5, label=f"report constant {constant:g}")
    elif report.pipeline == "lowerbound":
        floor = report.config.get("floor", 0.0)
        ax.axhline(floor, color="k", linestyle="--", alpha=0.5, label=f"floor {floor:g}")
    ax.set_xlabel("dimension n")
    ax.set_ylabel("normalized")
    ax.set_xticks(ns)
    ax.set_title(f"{report.pipeline}: normalized values")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = stem.with_name(stem.name + "_normalized.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    out.append(path)
    return out
