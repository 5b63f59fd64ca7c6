"""Standalone, byte-stable SVG figures (matplotlib with fixed ids and no timestamp)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import IDEALIZED_BETA  # noqa: E402

_RC = {"svg.hashsalt": "toricleak", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_failure_rates(rows: list[dict], path: str, log: bool = False) -> None:
    """One polyline per (scheme, decoder, r, d) of any-failure rate against p."""
    curves = defaultdict(list)
    for row in rows:
        curves[(row["scheme"], row["decoder"], row["r"], row["d"])].append(
            (row["p"], row["any_fail"] / row["trials"]))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for (scheme, decoder, r, d), pts in sorted(curves.items()):
            pts.sort()
            ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", ms=3,
                    label=f"{scheme} {decoder} r={r:g} d={d}")
        if log:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("p")
        ax.set_ylabel("failure rate")
        if curves:
            ax.legend(fontsize=7)
        _save(fig, path)


def plot_thresholds(thresholds: dict, path: str) -> None:
    """Threshold against r per (scheme, decoder), with the idealized overlay."""
    series = defaultdict(list)
    for (scheme, decoder, r), est in thresholds.items():
        if not isinstance(est, str):
            series[(scheme, decoder)].append((r, est.p_th))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for (scheme, decoder), pts in sorted(series.items()):
            pts.sort()
            ax.plot([r for r, _ in pts], [t for _, t in pts], marker="s", ms=3, label=f"{scheme} {decoder}")
            r0, t0 = pts[0]
            if r0 == 0 and len(pts) > 1:
                rs = [r for r, _ in pts]
                ax.plot(rs, [t0 / (1 + IDEALIZED_BETA * r) for r in rs], ls="--", lw=0.8,
                        label=f"{scheme} {decoder} idealized")
        ax.set_xlabel("r")
        ax.set_ylabel("threshold p")
        if series:
            ax.legend(fontsize=7)
        _save(fig, path)
