"""
Optional PNG rendering of experiment tables (matplotlib, Agg backend).

Only the CSV files are authoritative; the pictures are a convenience.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .experiments import ResultTable

__all__ = ["render", "PLOTTABLE"]

SCHEME_STYLE = {
    "proposed": dict(color="C0", marker="o"),
    "random_optimal": dict(color="C1", marker="s"),
    "random_equal": dict(color="C2", marker="^"),
}
RECEIVER_LINE = {"zf": "-", "mrc": "--"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _ok_rows(table: ResultTable):
    if "status" not in table.columns:
        return table.rows
    i = table.columns.index("status")
    return [r for r in table.rows if r[i] == "ok"]


def _scheme_sweep(table: ResultTable, plt):
    cols = table.columns
    by = cols[1] if cols[0] == "receiver" else cols[0]
    has_rx = cols[0] == "receiver"
    ix = {c: cols.index(c) for c in cols}
    fig, (ax_lat, ax_se) = plt.subplots(1, 2, figsize=(10, 4))
    rows = _ok_rows(table)
    receivers = sorted({r[0] for r in rows}) if has_rx else [None]
    for rx in receivers:
        for scheme, style in SCHEME_STYLE.items():
            sel = [r for r in rows if r[ix["scheme"]] == scheme and (rx is None or r[0] == rx)]
            if not sel:
                continue
            x = [float(r[ix[by]]) for r in sel]
            label = scheme if rx is None else f"{scheme} ({rx})"
            ls = RECEIVER_LINE.get(rx, "-")
            ax_lat.plot(x, [r[ix["latency_seconds"]] for r in sel], ls, label=label, **style)
            ax_se.plot(x, [r[ix["SE"]] for r in sel], ls, label=label, **style)
    for ax, name in ((ax_lat, "latency (s)"), (ax_se, "spectral efficiency (bit/s/Hz)")):
        ax.set_xlabel(by)
        ax.set_ylabel(name)
        ax.set_yscale("log")
        if by == "M":
            ax.set_xscale("log", base=2)
        ax.grid(True, which="both", alpha=0.3)
    ax_lat.legend(fontsize=7)
    return fig


def _accuracy(table: ResultTable, plt):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = table.rows
    for rx in sorted({r[2] for r in rows}):
        for k, E in enumerate(sorted({r[1] for r in rows})):
            sel = sorted((r for r in rows if r[2] == rx and r[1] == E), key=lambda r: r[0])
            M = [r[0] for r in sel]
            ax.errorbar(M, [r[3] for r in sel], yerr=[r[4] for r in sel], fmt="o", color=f"C{k}",
                        capsize=2, ms=3)
            ax.plot(M, [r[5] for r in sel], RECEIVER_LINE[rx], color=f"C{k}",
                    label=f"{rx}, E={E:g} dB")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("M")
    ax.set_ylabel("rate (bit/symbol)")
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    return fig


def _structure(table: ResultTable, plt):
    by = table.columns[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in _ok_rows(table):
        x = float(r[0])
        sizes = r[2]
        ax.scatter([x] * len(sizes), sizes, s=12, color="C0", alpha=0.6)
        ax.scatter([x], [r[1]], marker="x", color="C3")
    ax.scatter([], [], s=12, color="C0", label="group sizes")
    ax.scatter([], [], marker="x", color="C3", label="training length")
    if by == "M":
        ax.set_xscale("log", base=2)
    ax.set_xlabel(by)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def _surface(table: ResultTable, plt):
    panels = sorted({r[0] for r in table.rows})
    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
    for ax, panel in zip(axes[0], panels):
        sel = [r for r in table.rows if r[0] == panel]
        Ls = np.array(sorted({r[3] for r in sel}))
        Ks = np.array(sorted({r[4] for r in sel}))
        grid = np.zeros((Ls.size, Ks.size))
        for r in sel:
            grid[r[3] - Ls[0], r[4] - Ks[0]] = r[5]
        im = ax.pcolormesh(Ks, Ls, grid, shading="auto")
        top = min(Ls[-1], Ks[-1])
        ax.plot([1, top], [1, top], "w--", lw=1)
        best = next(r for r in sel if r[6])
        ax.plot(best[4], best[3], "rx", ms=8)
        ax.set_xlabel("K")
        ax.set_ylabel("L")
        ax.set_title(f"E={sel[0][1]:g} dB, M={sel[0][2]}")
        fig.colorbar(im, ax=ax, label="SE")
    return fig


PLOTTABLE = {
    "table3": _scheme_sweep, "table4": _scheme_sweep, "table5": _scheme_sweep,
    "figure3": _accuracy, "figure4": _scheme_sweep, "figure5": _scheme_sweep,
    "figure6": _structure, "figure7": _structure, "figure8": _surface,
}


def render(table: ResultTable, out_dir: str | Path) -> Path | None:
    """Write ``<name>.png`` next to the CSV; returns ``None`` for tables without a plot."""
    draw = PLOTTABLE.get(table.name)
    if draw is None or not table.rows:
        return None
    plt = _pyplot()
    fig = draw(table, plt)
    fig.tight_layout()
    path = Path(out_dir) / f"{table.name}.png"
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
