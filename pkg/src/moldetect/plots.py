"""Figure rendering for report rows.

Renders the same rows the CLI writes as CSV.  Uses the non-interactive
matplotlib backend so it works headless; every function returns the list
of files it wrote.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_FLOOR = 1e-16  # log plots cannot show exact zeros


def _clip(values):
    return [max(v, _FLOOR) for v in values]


def render_rates_figure(rows, out_dir, stem="rates"):
    """Miss and false-alarm rates against the array size, one line per n.

    `rows` are dicts with at least m_snm, n, p_m, p_f keys (the analyze
    and sweep CSV rows).  Writes <stem>_pm.png and <stem>_pf.png.
    """
    by_n = defaultdict(list)
    for row in rows:
        by_n[row["n"]].append(row)
    written = []
    for field, label, suffix in (("p_m", "miss rate", "pm"), ("p_f", "false-alarm rate", "pf")):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for n in sorted(by_n):
            series = sorted(by_n[n], key=lambda r: r["m_snm"])
            ax.semilogy(
                [r["m_snm"] for r in series],
                _clip([r[field] for r in series]),
                marker="o",
                markersize=3,
                label=f"n = {n}",
            )
        ax.set_xlabel("number of sensors M")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        if len(by_n) > 1:
            ax.legend()
        path = os.path.join(out_dir, f"{stem}_{suffix}.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def render_optimization_figure(history_rows, xi, gamma, out_dir, stem="design"):
    """Constraint view of the design scan: P_M and P_F vs M with limits."""
    series = sorted(history_rows, key=lambda r: r["m_snm"])
    m_values = [r["m_snm"] for r in series]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(m_values, _clip([r["p_m"] for r in series]), marker="o", markersize=3, label="miss rate")
    ax.semilogy(m_values, _clip([r["p_f"] for r in series]), marker="s", markersize=3, label="false-alarm rate")
    ax.axhline(1.0 - xi, color="tab:blue", linestyle="--", alpha=0.6, label="miss ceiling")
    ax.axhline(gamma, color="tab:orange", linestyle="--", alpha=0.6, label="false-alarm ceiling")
    ax.set_xlabel("number of sensors M")
    ax.set_ylabel("rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_roc_figure(points, out_dir, stem="roc"):
    """Empirical miss rate against false-alarm budget from a threshold sweep."""
    points = sorted(points, key=lambda p: p[0])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(
        _clip([p[0] for p in points]),
        _clip([1.0 - p[1] for p in points]),
        marker="o",
        markersize=3,
    )
    ax.set_xlabel("per-sensor false-alarm budget")
    ax.set_ylabel("miss rate")
    ax.grid(True, which="both", alpha=0.3)
    path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return [path]
