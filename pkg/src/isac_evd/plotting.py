"""PNG renderings of the sweep tables.

Uses the non-interactive Agg backend and strips the PNG software stamp so
the same table always renders to the same bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render", "PLOTTERS"]

_PNG_META = {"Software": None}


def _groups(table, key):
    keys = table.column(key)
    for k in sorted(set(keys.tolist())):
        yield k, keys == k


def _roc(table, ax):
    for nt, m in _groups(table, "n_tx"):
        p_f = table.column("p_f")[m]
        ax.plot(p_f, table.column("p_d_analytic")[m], label=f"N_t={nt} analytic")
        ax.plot(p_f, table.column("p_d_empirical")[m], "o", ms=2, label=f"N_t={nt} simulated")
    ax.plot([0, 1], [0, 1], ":", color="gray")
    ax.set_xlabel("P_F")
    ax.set_ylabel("P_D")


def _rate(table, ax):
    for nt, m in _groups(table, "n_tx"):
        x = table.column("p_c_dbm")[m]
        ax.plot(x, table.column("rate_analytic")[m], label=f"N_t={nt} analytic")
        ax.plot(x, table.column("rate_mc")[m], "o", ms=2, label=f"N_t={nt} simulated")
    ax.set_xlabel("P_c (dBm)")
    ax.set_ylabel("ergodic rate (bps/Hz)")


def _error(table, ax):
    for nt, m in _groups(table, "n_tx"):
        ax.plot(table.column("tau")[m], table.column("p_e")[m], label=f"N_t={nt}")
    ax.set_xlabel("threshold")
    ax.set_ylabel("P_e")


def _sweep_power(table, ax):
    for nt, m in _groups(table, "n_tx"):
        x = table.column("p_dbm")[m]
        ax.plot(x, table.column("p_e_star")[m], label=f"N_t={nt} joint")
        ax.plot(x, table.column("p_e_cfar")[m], "--", label=f"N_t={nt} CFAR")
    ax.set_yscale("log")
    ax.set_xlabel("P (dBm)")
    ax.set_ylabel("P_e")


def _sweep_rmin(table, ax):
    for p, m in _groups(table, "p_dbm"):
        ax.plot(table.column("r_min")[m], table.column("p_e_star")[m], label=f"P={p:g} dBm")
    ax.set_yscale("log")
    ax.set_xlabel("R_min (bps/Hz)")
    ax.set_ylabel("P_e")


def _validate(table, ax):
    names = table.columns["check"]
    ratio = np.asarray(table.column("measured"), float) / np.asarray(table.column("tolerance"), float)
    ax.barh(range(len(names)), ratio, color=["tab:green" if ok else "tab:red" for ok in table.columns["passed"]])
    ax.axvline(1.0, color="k", lw=0.8)
    ax.set_yticks(range(len(names)), names, fontsize=6)
    ax.set_xlabel("measured / tolerance")


PLOTTERS = {
    "roc": _roc,
    "rate_sweep": _rate,
    "error_vs_threshold": _error,
    "sweep_power": _sweep_power,
    "sweep_rmin": _sweep_rmin,
    "validate": _validate,
}


def render(table, out_dir) -> list:
    """Draw ``table`` into ``<out_dir>/<name>.png``; returns the written paths."""
    plotter = PLOTTERS.get(table.name)
    if plotter is None:
        return []
    fig, ax = plt.subplots(figsize=(6, 4.5), dpi=100)
    try:
        plotter(table, ax)
        if table.name != "validate":
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=6)
        fig.tight_layout()
        path = Path(out_dir) / f"{table.name}.png"
        fig.savefig(path, metadata=_PNG_META)
    finally:
        plt.close(fig)
    paths = [path]
    if table.name == "sweep_rmin":
        paths.append(_render_rate_panel(table, out_dir))
    return paths


def _render_rate_panel(table, out_dir) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3), dpi=100)
    try:
        for p, m in _groups(table, "p_dbm"):
            ax.plot(table.column("r_min")[m], table.column("achieved_rate")[m], label=f"P={p:g} dBm")
        ax.set_xlabel("R_min (bps/Hz)")
        ax.set_ylabel("achieved rate")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=6)
        fig.tight_layout()
        path = Path(out_dir) / "sweep_rmin_rate.png"
        fig.savefig(path, metadata=_PNG_META)
    finally:
        plt.close(fig)
    return path
